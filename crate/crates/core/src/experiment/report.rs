use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::ser::{SerializeSeq, Serializer};
use serde::Serialize;

use super::config::{Command, ExperimentConfig};
use crate::error::{Error, Result};

pub const SCHEMA_ID: &str = "rkframe-report/1";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// The shipped JSON Schema of reports.
pub const REPORT_SCHEMA: &str = include_str!("../../schema/report.schema.json");

/// Real numbers are written as `{:.16e}`, which keeps 17 significant digits
/// and round-trips every finite binary64 value.
pub fn format_real(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{x:.16e}")
    }
}

pub fn format_complex(z: Complex64) -> String {
    format!("{},{}", format_real(z.re), format_real(z.im))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Int,
    Real,
    Complex,
    Text,
    Bool,
}

/// How a number was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Input,
    ClosedForm,
    Eigen,
    Quadrature,
    /// Smallest ratio found by optimization; the true constant is at most this.
    InnerEstimateLower,
    /// Largest ratio found by optimization; the true constant is at least this.
    InnerEstimateUpper,
    /// Maximum over a finite box family; the supremum is at least this.
    FiniteFamily,
    /// Truncated density statistic.
    Truncated,
    Verdict,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Value {
    Int(u64),
    Real(f64),
    Complex(Complex64),
    Text(String),
    Bool(bool),
    Null,
}

impl Value {
    fn cell(&self) -> String {
        match self {
            Value::Int(i) => i.to_string(),
            Value::Real(x) => format_real(*x),
            Value::Complex(z) => format_complex(*z),
            Value::Text(t) => t.clone(),
            Value::Bool(b) => b.to_string(),
            Value::Null => String::new(),
        }
    }
}

impl From<f64> for Value {
    fn from(x: f64) -> Self {
        Value::Real(x)
    }
}

impl From<Option<f64>> for Value {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Value::Null, Value::Real)
    }
}

impl From<usize> for Value {
    fn from(i: usize) -> Self {
        Value::Int(i as u64)
    }
}

impl From<Complex64> for Value {
    fn from(z: Complex64) -> Self {
        Value::Complex(z)
    }
}

impl From<bool> for Value {
    fn from(b: bool) -> Self {
        Value::Bool(b)
    }
}

impl From<&str> for Value {
    fn from(t: &str) -> Self {
        Value::Text(t.to_string())
    }
}

impl From<String> for Value {
    fn from(t: String) -> Self {
        Value::Text(t)
    }
}

impl Serialize for Value {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Value::Int(i) => s.serialize_u64(*i),
            Value::Bool(b) => s.serialize_bool(*b),
            Value::Null => s.serialize_none(),
            other => s.serialize_str(&other.cell()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Quantity {
    pub name: String,
    pub kind: Kind,
    pub method: Method,
    /// Operation that produced the value.
    pub source: String,
    pub value: Value,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Column {
    pub name: String,
    pub kind: Kind,
    pub method: Method,
    pub source: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<Column>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(name: &str, columns: &[(&str, Kind, Method, &str)]) -> Self {
        Table {
            name: name.to_string(),
            columns: columns
                .iter()
                .map(|&(name, kind, method, source)| Column {
                    name: name.to_string(),
                    kind,
                    method,
                    source: source.to_string(),
                })
                .collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        assert_eq!(row.len(), self.columns.len(), "row width of table {}", self.name);
        self.rows.push(row);
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub schema: String,
    pub tool_version: String,
    pub command: Command,
    pub config: ExperimentConfig,
    pub conventions: Vec<String>,
    pub results: Vec<Quantity>,
    pub tables: Vec<Table>,
    pub warnings: Vec<String>,
    /// Wall-clock seconds per stage. Written to a separate file so that
    /// reports stay byte-identical across runs.
    #[serde(skip)]
    pub timings: Timings,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Timings(pub Vec<(String, f64)>);

impl Serialize for Timings {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Entry<'a> {
            stage: &'a str,
            seconds: f64,
        }
        let mut seq = s.serialize_seq(Some(self.0.len()))?;
        for (stage, seconds) in &self.0 {
            seq.serialize_element(&Entry { stage, seconds: *seconds })?;
        }
        seq.end()
    }
}

impl ExperimentReport {
    pub fn new(config: &ExperimentConfig) -> Self {
        ExperimentReport {
            schema: SCHEMA_ID.into(),
            tool_version: TOOL_VERSION.into(),
            command: config.command,
            config: config.clone(),
            conventions: vec![
                "inner_estimate_lower and inner_estimate_upper values come from local optimization; \
                 the true lower constant is at most, and the true upper constant at least, the reported value"
                    .into(),
                "finite_family values are maxima over a finite box family and bound the supremum from below".into(),
                "real numbers are decimal strings with 17 significant digits; complex numbers are \"re,im\"".into(),
            ],
            results: Vec::new(),
            tables: Vec::new(),
            warnings: Vec::new(),
            timings: Timings::default(),
        }
    }

    pub fn quantity(&mut self, name: &str, kind: Kind, method: Method, source: &str, value: impl Into<Value>) {
        self.results.push(Quantity {
            name: name.into(),
            kind,
            method,
            source: source.into(),
            value: value.into(),
        });
    }

    pub fn result(&self, name: &str) -> Option<&Value> {
        self.results.iter().find(|q| q.name == name).map(|q| &q.value)
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports always serialize");
        s.push('\n');
        s
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            other => Err(Error::Config(format!("unknown format `{other}` (json or csv)"))),
        }
    }
}

fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Files are staged under temporary names and renamed once all of them are
/// written; on any failure every staged or renamed file is removed.
struct Staging {
    dir: PathBuf,
    staged: Vec<(PathBuf, PathBuf)>,
}

impl Staging {
    fn add(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let tmp = self.dir.join(format!(".{name}.partial"));
        let out = self.dir.join(name);
        self.staged.push((tmp.clone(), out));
        let mut f = fs::File::create(&tmp).map_err(|e| io_error(&tmp, e))?;
        f.write_all(bytes).and_then(|_| f.sync_all()).map_err(|e| io_error(&tmp, e))
    }

    fn commit(mut self) -> Result<Vec<PathBuf>> {
        let staged = std::mem::take(&mut self.staged);
        let mut done = Vec::new();
        for (tmp, out) in &staged {
            if let Err(e) = fs::rename(tmp, out) {
                for p in &done {
                    let _ = fs::remove_file(p);
                }
                for (t, _) in &staged {
                    let _ = fs::remove_file(t);
                }
                return Err(io_error(out, e));
            }
            done.push(out.clone());
        }
        Ok(done)
    }
}

impl Drop for Staging {
    fn drop(&mut self) {
        for (tmp, _) in &self.staged {
            let _ = fs::remove_file(tmp);
        }
    }
}

/// The snake_case name of a unit enum variant.
fn label<T: Serialize>(v: &T) -> String {
    serde_json::to_value(v).ok().and_then(|x| x.as_str().map(String::from)).unwrap_or_default()
}

fn csv_bytes(header: &[String], rows: impl Iterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let fail = |e: csv::Error| Error::Parse(format!("csv encoding: {e}"));
    w.write_record(header).map_err(fail)?;
    for row in rows {
        w.write_record(&row).map_err(fail)?;
    }
    w.into_inner().map_err(|e| Error::Parse(format!("csv encoding: {e}")))
}

/// One CSV document per table, with a header row.
pub fn table_csv(t: &Table) -> Result<Vec<u8>> {
    let header: Vec<String> = t.columns.iter().map(|c| c.name.clone()).collect();
    csv_bytes(&header, t.rows.iter().map(|r| r.iter().map(Value::cell).collect()))
}

/// Writes the report into `dir` and returns the files created.
///
/// * json: `<command>.json`;
/// * csv: `<command>.results.csv`, one `<command>.<table>.csv` per table and
///   the echoed configuration as `<command>.config.json`.
///
/// Both formats add `<command>.timings.json`.
pub fn emit_report(report: &ExperimentReport, format: Format, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    let stem = report.command.name();
    let mut st = Staging {
        dir: dir.to_path_buf(),
        staged: Vec::new(),
    };
    match format {
        Format::Json => st.add(&format!("{stem}.json"), report.to_json().as_bytes())?,
        Format::Csv => {
            let header = ["name", "kind", "method", "source", "value"].map(String::from);
            let rows = report.results.iter().map(|q| {
                vec![q.name.clone(), label(&q.kind), label(&q.method), q.source.clone(), q.value.cell()]
            });
            st.add(&format!("{stem}.results.csv"), &csv_bytes(&header, rows)?)?;
            for t in &report.tables {
                st.add(&format!("{stem}.{}.csv", t.name), &table_csv(t)?)?;
            }
            st.add(&format!("{stem}.config.json"), format!("{}\n", report.config.to_json()).as_bytes())?;
        }
    }
    let timings = serde_json::to_string_pretty(&report.timings).expect("timings serialize");
    st.add(&format!("{stem}.timings.json"), format!("{timings}\n").as_bytes())?;
    st.commit()
}
