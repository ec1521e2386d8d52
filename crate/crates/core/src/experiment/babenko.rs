//! A sequence that is `q`-hilbertian but not `q`-besselian, read at finite
//! truncation.
//!
//! A Seip lattice with upper density `D+` between `1/q` and `1/p` is
//! interpolating for `A^p` of the disc and not for `A^q`. Its Carleson
//! constants stay bounded while the lower `q` frame constant of the
//! truncations decays. The same sequence is carried to `H^q(B_2)` by
//! `a -> (a, 0)` and to `H^q(D^2)` by `a -> (a, a)`.

use std::time::Instant;

use num_complex::Complex64;

use super::config::{BabenkoSpec, ExperimentConfig, Target};
use super::report::{ExperimentReport, Kind, Method, Table, Value};
use crate::carleson::{box_constant, delta_product};
use crate::error::{Error, Result};
use crate::frame::{frame_search, grid_axes_for, ExtraStarts, FrameSearch};
use crate::kernels::Exponent;
use crate::quadrature::build_grid_adapted;
use crate::seqgen::{density_estimate, diagonal_embed, seip_lattice, DensityEstimate, LatticeParams};
use crate::spaces::{PointSeq, Space};
use crate::subordination::LiftMap;

pub const VERDICT_DECAYING: &str = "q-hilbertian retained, q-besselian decaying";
pub const VERDICT_SINGLE: &str = "inconclusive (single N)";
pub const VERDICT_ABSENT: &str = "trend not observed";

/// Convention recorded in every Babenko report.
pub const DENSITY_CONVENTION: &str = "Seip: a separated sequence is interpolating for A^p of the disc iff its upper \
    uniform density D+ is below 1/p; D+ is estimated by density_estimate at the largest ladder radius";

#[derive(Clone, Debug, PartialEq)]
pub struct CalibrationStep {
    pub angular_density: f64,
    pub density: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Calibration {
    pub lattice: LatticeParams,
    pub estimate: DensityEstimate,
    /// Shrunken window `(1/q + margin, 1/p - margin)`.
    pub window: (f64, f64),
    pub aim: f64,
    pub trace: Vec<CalibrationStep>,
}

fn trace_text(trace: &[CalibrationStep]) -> String {
    trace
        .iter()
        .enumerate()
        .map(|(i, s)| format!("  step {i}: angular_density = {:.6e}, density = {:.6}", s.angular_density, s.density))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Bisection (in `log` of the angular density) until the density estimate
/// is within `tolerance` of the aim.
pub fn calibrate(setup: &BabenkoSpec, seed: u64) -> Result<Calibration> {
    let c = &setup.calibration;
    let (p, q) = (setup.p.value(), setup.q.value());
    let window = (1.0 / q + c.margin, 1.0 / p - c.margin);
    let aim = window.0 + c.position * (window.1 - window.0);
    let mut trace = Vec::new();
    if window.0 >= window.1 {
        return Err(Error::Calibration {
            reason: format!(
                "the density window ({:.6}, {:.6}) is empty at margin {}",
                window.0, window.1, c.margin
            ),
            trace: trace_text(&trace),
        });
    }
    let params = |d: f64| LatticeParams {
        sigma: setup.lattice.sigma,
        angular_density: d,
        rings: setup.lattice.rings,
        seed: setup.lattice.seed,
    };
    let measure = |d: f64, trace: &mut Vec<CalibrationStep>| -> Result<DensityEstimate> {
        let est = density_estimate(&seip_lattice(&params(d))?, &c.r_ladder, c.centers, seed)?;
        trace.push(CalibrationStep {
            angular_density: d,
            density: est.value,
        });
        Ok(est)
    };
    let [mut lo, mut hi] = c.angular_density;
    let at_lo = measure(lo, &mut trace)?;
    let at_hi = measure(hi, &mut trace)?;
    if at_lo.value > aim || at_hi.value < aim {
        return Err(Error::Calibration {
            reason: format!("the angular density bracket [{lo}, {hi}] does not straddle the aim {aim:.6}"),
            trace: trace_text(&trace),
        });
    }
    let mut best: Option<(f64, DensityEstimate)> = None;
    for (d, est) in [(lo, at_lo), (hi, at_hi)] {
        if est.value > window.0 && est.value < window.1 && (est.value - aim).abs() <= c.tolerance {
            best = Some((d, est));
        }
    }
    let mut steps = 0;
    while best.is_none() && steps < c.max_steps {
        steps += 1;
        let mid = (lo * hi).sqrt();
        let est = measure(mid, &mut trace)?;
        if est.value > window.0 && est.value < window.1 && (est.value - aim).abs() <= c.tolerance {
            best = Some((mid, est));
        } else if est.value < aim {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    match best {
        Some((d, estimate)) => Ok(Calibration {
            lattice: params(d),
            estimate,
            window,
            aim,
            trace,
        }),
        None => Err(Error::Calibration {
            reason: format!(
                "no angular density gave a density within {} of {aim:.6} in {} steps",
                c.tolerance, c.max_steps
            ),
            trace: trace_text(&trace),
        }),
    }
}

/// The truncation `disc` carried to the target space, with the base axis
/// counts of its adapted grid.
fn target_sequence(target: Target, disc: &PointSeq, resolution: usize) -> Result<(PointSeq, Vec<usize>)> {
    let bergman = Space::BergmanBall { n: 1, k: 0 };
    match target {
        Target::BergmanDisc => Ok((disc.in_space(bergman)?, grid_axes_for(&bergman, resolution))),
        Target::Ball => {
            let lift = LiftMap::new(bergman)?;
            let mut axes = grid_axes_for(&lift.target(), resolution);
            // lifted functions do not depend on the padded coordinate
            axes[1] = 1;
            Ok((lift.embed_seq(&disc.in_space(bergman)?)?, axes))
        }
        Target::Bidisc => {
            let seq = diagonal_embed(disc)?;
            let axes = grid_axes_for(&seq.space(), resolution);
            Ok((seq, axes))
        }
    }
}

fn pad(v: &[Complex64], n: usize) -> Vec<Complex64> {
    let mut out = v.to_vec();
    out.resize(n, Complex64::new(0.0, 0.0));
    out
}

fn carry(prev: Option<&FrameSearch>, n: usize) -> ExtraStarts {
    match prev {
        Some(s) => ExtraStarts {
            low: vec![pad(&s.lower_witness, n)],
            high: vec![pad(&s.upper_witness, n)],
        },
        None => ExtraStarts::default(),
    }
}

const COLUMNS: [(&str, Kind, Method, &str); 13] = [
    ("n", Kind::Int, Method::Input, "ladder"),
    ("lower_q", Kind::Real, Method::InnerEstimateLower, "frame_bounds at exponent q"),
    ("upper_q", Kind::Real, Method::InnerEstimateUpper, "frame_bounds at exponent q"),
    ("lower_p", Kind::Real, Method::InnerEstimateLower, "frame_bounds at exponent p"),
    ("upper_p", Kind::Real, Method::InnerEstimateUpper, "frame_bounds at exponent p"),
    ("lambda_min", Kind::Real, Method::Eigen, "spectral_bounds of the p = 2 Grammian"),
    ("lambda_max", Kind::Real, Method::Eigen, "spectral_bounds of the p = 2 Grammian"),
    ("box_constant", Kind::Real, Method::FiniteFamily, "box_constant in the target space"),
    ("delta", Kind::Real, Method::ClosedForm, "delta_product of the disc truncation"),
    ("density", Kind::Real, Method::Truncated, "density_estimate of the disc truncation"),
    ("grid_nodes", Kind::Int, Method::Input, "build_grid_adapted"),
    ("converged_q", Kind::Bool, Method::Input, "frame_bounds at exponent q"),
    ("converged_p", Kind::Bool, Method::Input, "frame_bounds at exponent p"),
];

/// Verdict of one target from its first and last rows.
pub fn verdict(lower_q: &[f64], upper_q: &[f64]) -> (&'static str, Option<f64>, Option<f64>) {
    if lower_q.len() < 2 {
        return (VERDICT_SINGLE, None, None);
    }
    let lr = lower_q[lower_q.len() - 1] / lower_q[0];
    let ur = upper_q[upper_q.len() - 1] / upper_q[0];
    let v = if lr <= 0.5 && ur <= 1.5 { VERDICT_DECAYING } else { VERDICT_ABSENT };
    (v, Some(lr), Some(ur))
}

pub fn run_babenko(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let setup = cfg.babenko()?;
    let mut report = ExperimentReport::new(cfg);
    report.conventions.push(DENSITY_CONVENTION.into());

    let clock = Instant::now();
    let cal = calibrate(setup, cfg.seed)?;
    report.timings.0.push(("calibration".into(), clock.elapsed().as_secs_f64()));
    let mut table = Table::new(
        "calibration",
        &[
            ("step", Kind::Int, Method::Input, "calibrate"),
            ("angular_density", Kind::Real, Method::Input, "calibrate"),
            ("density", Kind::Real, Method::Truncated, "density_estimate"),
        ],
    );
    for (i, s) in cal.trace.iter().enumerate() {
        table.push(vec![i.into(), s.angular_density.into(), s.density.into()]);
    }
    report.tables.push(table);
    let src = "calibrate";
    report.quantity("calibration.window_low", Kind::Real, Method::ClosedForm, src, cal.window.0);
    report.quantity("calibration.window_high", Kind::Real, Method::ClosedForm, src, cal.window.1);
    report.quantity("calibration.aim", Kind::Real, Method::ClosedForm, src, cal.aim);
    report.quantity("calibration.angular_density", Kind::Real, Method::Input, src, cal.lattice.angular_density);
    report.quantity("calibration.density", Kind::Real, Method::Truncated, "density_estimate", cal.estimate.value);
    report.quantity("calibration.steps", Kind::Int, Method::Input, src, cal.trace.len());

    let lattice = seip_lattice(&cal.lattice)?;
    let n_max = *setup.ladder.last().expect("validated ladder");
    if lattice.len() < n_max {
        return Err(Error::Config(format!(
            "the calibrated lattice has {} points but the ladder needs {n_max}; add rings",
            lattice.len()
        )));
    }
    let (p, q) = (setup.p, setup.q);
    let c = &setup.calibration;
    // disc quantities do not depend on the target
    let mut disc_rows = Vec::new();
    for &n in &setup.ladder {
        let disc = lattice.truncate(n);
        let delta = delta_product(&disc)?;
        let density = density_estimate(&disc, &c.r_ladder, c.centers, cfg.seed)?.value;
        disc_rows.push((disc, delta, density));
    }

    for &target in &setup.targets {
        let name = target.name();
        let mut table = Table::new(name, &COLUMNS);
        let (mut prev_q, mut prev_p): (Option<FrameSearch>, Option<FrameSearch>) = (None, None);
        let (mut lows, mut ups) = (Vec::new(), Vec::new());
        for (disc, delta, density) in &disc_rows {
            let clock = Instant::now();
            let n = disc.len();
            let (seq, base) = target_sequence(target, disc, cfg.quadrature.resolution)?;
            let space = seq.space();
            let grid = build_grid_adapted(&space, &base, &seq, cfg.quadrature.kappa, cfg.quadrature.max_per_axis)?;
            let at = |e: Exponent, prev: Option<&FrameSearch>| {
                frame_search(&space, e, &seq, &cfg.optimizer, &grid, &carry(prev, n))
            };
            let sq = at(q, prev_q.as_ref())?;
            let sp = at(p, prev_p.as_ref())?;
            let spectral = crate::frame::spectral_reference(&space, &seq)?;
            let boxes = box_constant(&seq, cfg.carleson_depth)?;
            for (label, s) in [("q", &sq), ("p", &sp)] {
                if !s.report.converged {
                    report.warnings.push(format!(
                        "babenko/{name}/N={n}/{label}: converged=false after {} iterations",
                        s.report.iterations
                    ));
                }
            }
            table.push(vec![
                n.into(),
                sq.report.lower.into(),
                sq.report.upper.into(),
                sp.report.lower.into(),
                sp.report.upper.into(),
                spectral.lambda_min.into(),
                spectral.lambda_max.into(),
                boxes.box_constant.into(),
                (*delta).into(),
                (*density).into(),
                grid.len().into(),
                sq.report.converged.into(),
                sp.report.converged.into(),
            ]);
            lows.push(sq.report.lower);
            ups.push(sq.report.upper);
            prev_q = Some(sq);
            prev_p = Some(sp);
            report.timings.0.push((format!("{name}/N={n}"), clock.elapsed().as_secs_f64()));
        }
        let (v, lr, ur) = verdict(&lows, &ups);
        let src = "run_babenko";
        report.quantity(&format!("babenko.{name}.lower_q_ratio"), Kind::Real, Method::ClosedForm, src, lr);
        report.quantity(&format!("babenko.{name}.upper_q_ratio"), Kind::Real, Method::ClosedForm, src, ur);
        report.quantity(&format!("babenko.{name}.verdict"), Kind::Text, Method::Verdict, src, v);
        report.tables.push(table);
    }
    Ok(report)
}

/// Rows of a Babenko target table as `(n, lower_q, upper_q)`.
pub fn trend_rows(report: &ExperimentReport, target: Target) -> Vec<(usize, f64, f64)> {
    let Some(t) = report.table(target.name()) else {
        return Vec::new();
    };
    t.rows
        .iter()
        .map(|r| match (&r[0], &r[1], &r[2]) {
            (Value::Int(n), Value::Real(l), Value::Real(u)) => (*n as usize, *l, *u),
            _ => unreachable!("babenko rows start with n, lower_q, upper_q"),
        })
        .collect()
}
