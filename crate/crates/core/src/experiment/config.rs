use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::OptimizerConfig;
use crate::kernels::Exponent;
use crate::seqgen::{self, LatticeParams, DEFAULT_CENTERS, DEFAULT_LADDER};
use crate::spaces::{Point, PointSeq, Space};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Gram,
    Frame,
    Dual,
    Carleson,
    Lift,
    Babenko,
    Seqgen,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Gram => "gram",
            Command::Frame => "frame",
            Command::Dual => "dual",
            Command::Carleson => "carleson",
            Command::Lift => "lift",
            Command::Babenko => "babenko",
            Command::Seqgen => "seqgen",
        }
    }
}

impl std::str::FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| Error::Config(format!("unknown command `{s}`")))
    }
}

/// Where the points come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SequenceSource {
    Inline {
        points: Vec<Point>,
    },
    RadialGeometric {
        count: usize,
        base: f64,
    },
    SeipLattice {
        #[serde(flatten)]
        lattice: LatticeParams,
    },
    /// Seeded by the top-level `seed`.
    RandomSeparated {
        count: usize,
        min_sep: f64,
    },
}

impl SequenceSource {
    /// The generated points, read in `space`. One-variable generators feed
    /// any space of dimension one.
    pub fn generate(&self, space: Space, seed: u64) -> Result<PointSeq> {
        let seq = match self {
            SequenceSource::Inline { points } => return PointSeq::new(space, points.clone()),
            SequenceSource::RadialGeometric { count, base } => seqgen::radial_geometric(*count, *base)?,
            SequenceSource::SeipLattice { lattice } => seqgen::seip_lattice(lattice)?,
            SequenceSource::RandomSeparated { count, min_sep } => {
                return seqgen::random_separated(&space, *count, *min_sep, seed)
            }
        };
        if space.dim() != 1 {
            return Err(Error::Config(format!("this generator produces disc sequences, not points of {space}")));
        }
        seq.in_space(space)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureConfig {
    /// Nominal resolution of fixed grids and of the base of adapted grids.
    pub resolution: usize,
    /// Refinement factor of adapted grids.
    pub kappa: f64,
    pub max_per_axis: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig {
            resolution: 64,
            kappa: 8.0,
            max_per_axis: 4096,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    /// `A^q` of the disc, the lattice itself.
    BergmanDisc,
    /// `H^q(B_2)` through `a -> (a, 0)`.
    Ball,
    /// `H^q(D^2)` through `a -> (a, a)`.
    Bidisc,
}

impl Target {
    pub fn name(self) -> &'static str {
        match self {
            Target::BergmanDisc => "bergman_disc",
            Target::Ball => "ball",
            Target::Bidisc => "bidisc",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSpec {
    pub sigma: f64,
    pub rings: u32,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationSpec {
    /// Distance kept from both ends of `(1/q, 1/p)`.
    pub margin: f64,
    /// Aim at `lo + position (hi - lo)` inside the shrunken window.
    pub position: f64,
    /// Accept once within this distance of the aim.
    pub tolerance: f64,
    /// Bracket for the angular density.
    pub angular_density: [f64; 2],
    pub max_steps: usize,
    pub r_ladder: Vec<f64>,
    pub centers: usize,
}

impl Default for CalibrationSpec {
    fn default() -> Self {
        CalibrationSpec {
            margin: 0.05,
            position: 0.8,
            tolerance: 0.005,
            angular_density: [0.002, 0.5],
            max_steps: 40,
            r_ladder: DEFAULT_LADDER.to_vec(),
            centers: DEFAULT_CENTERS,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BabenkoSpec {
    pub p: Exponent,
    pub q: Exponent,
    pub lattice: LatticeSpec,
    #[serde(default)]
    pub calibration: CalibrationSpec,
    pub ladder: Vec<usize>,
    pub targets: Vec<Target>,
}

fn default_depth() -> u32 {
    12
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: Command,
    #[serde(default)]
    pub space: Option<Space>,
    #[serde(default)]
    pub exponent: Option<Exponent>,
    #[serde(default)]
    pub sequence: Option<SequenceSource>,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub quadrature: QuadratureConfig,
    #[serde(default = "default_depth")]
    pub carleson_depth: u32,
    #[serde(default)]
    pub babenko: Option<BabenkoSpec>,
    /// Output directory.
    #[serde(default)]
    pub output: Option<String>,
    #[serde(default)]
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("configs always serialize")
    }

    pub fn space(&self) -> Result<Space> {
        let space = self.space.ok_or_else(|| self.missing("space"))?;
        space.validate()?;
        Ok(space)
    }

    pub fn exponent(&self) -> Result<Exponent> {
        self.exponent.ok_or_else(|| self.missing("exponent"))
    }

    pub fn sequence(&self) -> Result<PointSeq> {
        let src = self.sequence.as_ref().ok_or_else(|| self.missing("sequence"))?;
        src.generate(self.space()?, self.seed)
    }

    pub fn babenko(&self) -> Result<&BabenkoSpec> {
        self.babenko.as_ref().ok_or_else(|| self.missing("babenko"))
    }

    fn missing(&self, field: &str) -> Error {
        Error::Config(format!("`{}` needs the `{field}` field", self.command.name()))
    }

    /// Checks every field the command reads, without computing anything.
    pub fn validate(&self) -> Result<()> {
        self.optimizer.validate()?;
        let qc = &self.quadrature;
        if qc.resolution < crate::quadrature::MIN_RESOLUTION || !(qc.kappa > 0.0) || qc.max_per_axis == 0 {
            return Err(Error::Config("quadrature needs resolution >= 4, kappa > 0 and max_per_axis > 0".into()));
        }
        if self.carleson_depth == 0 || self.carleson_depth > crate::carleson::MAX_DEPTH {
            return Err(Error::Config(format!(
                "carleson_depth must lie in 1..={}",
                crate::carleson::MAX_DEPTH
            )));
        }
        match self.command {
            Command::Babenko => self.babenko()?.validate(),
            Command::Gram | Command::Frame | Command::Dual => {
                self.exponent()?;
                self.sequence().map(|_| ())
            }
            Command::Lift => {
                self.exponent()?;
                crate::subordination::LiftMap::new(self.space()?)?;
                self.sequence().map(|_| ())
            }
            Command::Carleson | Command::Seqgen => self.sequence().map(|_| ()),
        }
    }
}

impl BabenkoSpec {
    pub fn validate(&self) -> Result<()> {
        let (p, q) = (self.p.value(), self.q.value());
        if !(p > 2.0 && p < q) {
            return Err(Error::Config(format!("babenko needs 2 < p < q, got p = {p}, q = {q}")));
        }
        if self.ladder.is_empty() || self.ladder[0] == 0 || self.ladder.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("babenko ladder must be a strictly increasing list of positive sizes".into()));
        }
        if self.targets.is_empty() {
            return Err(Error::Config("babenko needs at least one target".into()));
        }
        let mut seen = self.targets.clone();
        seen.sort_by_key(|t| t.name());
        seen.dedup();
        if seen.len() != self.targets.len() {
            return Err(Error::Config("babenko targets must be distinct".into()));
        }
        let c = &self.calibration;
        let [lo, hi] = c.angular_density;
        if !(lo > 0.0 && lo < hi && hi.is_finite()) {
            return Err(Error::Config("calibration.angular_density must be an increasing pair of positive numbers".into()));
        }
        if !(c.margin >= 0.0) || !(c.position > 0.0 && c.position < 1.0) || !(c.tolerance > 0.0) || c.max_steps == 0 {
            return Err(Error::Config(
                "calibration needs margin >= 0, position in (0, 1), tolerance > 0 and max_steps >= 1".into(),
            ));
        }
        if c.centers == 0 || c.r_ladder.is_empty() || c.r_ladder.iter().any(|&r| !(r > 0.5 && r < 1.0)) {
            return Err(Error::Config("calibration needs centers >= 1 and radii in (1/2, 1)".into()));
        }
        LatticeParams {
            sigma: self.lattice.sigma,
            angular_density: hi,
            rings: self.lattice.rings,
            seed: self.lattice.seed,
        }
        .validate()
    }
}
