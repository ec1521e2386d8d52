use std::time::Instant;

use num_complex::Complex64;

use super::config::ExperimentConfig;
use super::report::{ExperimentReport, Kind, Method, Table};
use crate::carleson::{box_constant, BoxFamily};
use crate::error::Result;
use crate::frame::{frame_bounds, grid_axes_for};
use crate::gram::{build_gram, condition_number, dual_system, extension_norm_estimate, spectral_bounds};
use crate::kernels::{Exponent, KernelCoeffs};
use crate::quadrature::build_grid_axes;
use crate::seqgen::{density_estimate, DEFAULT_CENTERS, DEFAULT_LADDER};
use crate::subordination::{kernel_agreement_check, lift_carleson_check, lift_norm_ratio, LiftMap};

/// Number of random directions tried by the extension norm estimate.
const EXTENSION_TRIALS: usize = 64;

fn gram(cfg: &ExperimentConfig, report: &mut ExperimentReport) -> Result<()> {
    let (space, p, seq) = (cfg.space()?, cfg.exponent()?, cfg.sequence()?);
    let g = build_gram(&space, p, &seq)?;
    // one row per Gram row, one complex cell per column
    let names: Vec<String> = (0..seq.len()).map(|j| format!("col_{j}")).collect();
    let columns: Vec<_> = names
        .iter()
        .map(|c| (c.as_str(), Kind::Complex, Method::ClosedForm, "gram_entry"))
        .collect();
    let mut t = Table::new("gram", &columns);
    for i in 0..seq.len() {
        t.push((0..seq.len()).map(|j| g.entries[(i, j)].into()).collect());
    }
    report.tables.push(t);
    report.quantity("gram.n", Kind::Int, Method::Input, "build_gram", seq.len());
    let cond = condition_number(&g.entries);
    report.quantity("gram.condition_number", Kind::Real, Method::Eigen, "condition_number", cond);
    if !(cond <= crate::gram::CONDITION_LIMIT) {
        report
            .warnings
            .push(format!("gram: condition number {cond:e} exceeds {:e}", crate::gram::CONDITION_LIMIT));
    }
    if p.is_two() {
        let r = spectral_bounds(&g)?.reference.expect("spectral reports carry eigenvalues");
        report.quantity("gram.lambda_min", Kind::Real, Method::Eigen, "spectral_bounds", r.lambda_min);
        report.quantity("gram.lambda_max", Kind::Real, Method::Eigen, "spectral_bounds", r.lambda_max);
    }
    Ok(())
}

fn frame(cfg: &ExperimentConfig, report: &mut ExperimentReport) -> Result<()> {
    let (space, p, seq) = (cfg.space()?, cfg.exponent()?, cfg.sequence()?);
    let src = "frame_bounds";
    if p.is_two() {
        let r = spectral_bounds(&build_gram(&space, p, &seq)?)?;
        report.quantity("frame.lower", Kind::Real, Method::Eigen, "spectral_bounds", r.lower);
        report.quantity("frame.upper", Kind::Real, Method::Eigen, "spectral_bounds", r.upper);
    }
    let r = frame_bounds(&space, p, &seq, &cfg.optimizer)?;
    report.quantity("frame.optimized_lower", Kind::Real, Method::InnerEstimateLower, src, r.lower);
    report.quantity("frame.optimized_upper", Kind::Real, Method::InnerEstimateUpper, src, r.upper);
    report.quantity("frame.iterations", Kind::Int, Method::Input, src, r.iterations);
    report.quantity("frame.converged", Kind::Bool, Method::Input, src, r.converged);
    if !r.converged {
        report.warnings.push(format!("frame: converged=false after {} iterations", r.iterations));
    }
    Ok(())
}

fn dual(cfg: &ExperimentConfig, report: &mut ExperimentReport) -> Result<()> {
    let (space, p, seq) = (cfg.space()?, cfg.exponent()?, cfg.sequence()?);
    let ds = dual_system(&space, p, &seq)?;
    let grid = build_grid_axes(&space, &grid_axes_for(&space, cfg.quadrature.resolution))?;
    report.quantity("dual.condition_number", Kind::Real, Method::Eigen, "dual_system", ds.condition);
    report.quantity(
        "dual.biorthogonality_residual",
        Kind::Real,
        Method::ClosedForm,
        "biorthogonality_residual",
        ds.biorthogonality_residual(),
    );
    let est = extension_norm_estimate(&ds, &grid, EXTENSION_TRIALS, cfg.seed)?;
    report.quantity("dual.extension_norm", Kind::Real, Method::InnerEstimateUpper, "extension_norm_estimate", est);
    let mut t = Table::new(
        "dual_norms",
        &[
            ("index", Kind::Int, Method::Input, "dual_system"),
            ("norm", Kind::Real, Method::Quadrature, "dual_norms"),
        ],
    );
    for (i, v) in ds.dual_norms(&grid)?.into_iter().enumerate() {
        t.push(vec![i.into(), v.into()]);
    }
    report.tables.push(t);
    Ok(())
}

fn carleson(cfg: &ExperimentConfig, report: &mut ExperimentReport) -> Result<()> {
    let seq = cfg.sequence()?;
    let r = box_constant(&seq, cfg.carleson_depth)?;
    let family = match r.family {
        BoxFamily::DyadicArcs => "dyadic_arcs",
        BoxFamily::ProductArcs => "product_arcs",
        BoxFamily::Koranyi => "koranyi",
    };
    report.quantity("carleson.box_constant", Kind::Real, Method::FiniteFamily, "box_constant", r.box_constant);
    report.quantity("carleson.family", Kind::Text, Method::Input, "box_constant", family);
    report.quantity("carleson.depth", Kind::Int, Method::Input, "box_constant", r.box_family_depth as usize);
    report.quantity("carleson.necessary_only", Kind::Bool, Method::Input, "box_constant", r.necessary_only);
    report.quantity("carleson.delta", Kind::Real, Method::ClosedForm, "delta_product", r.delta);
    if r.necessary_only {
        report
            .warnings
            .push("carleson: product boxes only test a necessary condition on polydiscs".into());
    }
    Ok(())
}

fn lift(cfg: &ExperimentConfig, report: &mut ExperimentReport) -> Result<()> {
    let (space, q, seq) = (cfg.space()?, cfg.exponent()?, cfg.sequence()?);
    let map = LiftMap::new(space)?;
    let mut worst: f64 = 0.0;
    for a in seq.points() {
        for z in seq.points() {
            worst = worst.max(kernel_agreement_check(&map, a, z)?);
        }
    }
    report.quantity("lift.kernel_discrepancy", Kind::Real, Method::ClosedForm, "kernel_agreement_check", worst);
    let two = Exponent::new(2.0)?;
    let g = build_gram(&space, two, &seq)?.entries;
    let h = build_gram(&map.target(), two, &map.embed_seq(&seq)?)?.entries;
    report.quantity("lift.gram_discrepancy", Kind::Real, Method::ClosedForm, "build_gram", (g - h).camax());
    let f = KernelCoeffs::new(q, seq.clone(), vec![Complex64::new(1.0, 0.0); seq.len()])?;
    let ratio = lift_norm_ratio(&map, &f, q.value(), cfg.quadrature.resolution)?;
    report.quantity("lift.norm_ratio", Kind::Real, Method::Quadrature, "lift_norm_ratio", ratio);
    let (below, above) = lift_carleson_check(&map, &seq, cfg.carleson_depth)?;
    report.quantity("lift.box_constant_source", Kind::Real, Method::FiniteFamily, "lift_carleson_check", below.box_constant);
    report.quantity("lift.box_constant_target", Kind::Real, Method::FiniteFamily, "lift_carleson_check", above.box_constant);
    let mut t = Table::new(
        "lifted_points",
        &[
            ("index", Kind::Int, Method::Input, "embed_point"),
            ("coordinate", Kind::Int, Method::Input, "embed_point"),
            ("value", Kind::Complex, Method::Input, "embed_point"),
        ],
    );
    for (i, a) in map.embed_seq(&seq)?.points().iter().enumerate() {
        for (j, c) in a.coords().iter().enumerate() {
            t.push(vec![i.into(), j.into(), (*c).into()]);
        }
    }
    report.tables.push(t);
    Ok(())
}

fn seqgen(cfg: &ExperimentConfig, report: &mut ExperimentReport) -> Result<()> {
    let seq = cfg.sequence()?;
    let mut t = Table::new(
        "points",
        &[
            ("index", Kind::Int, Method::Input, "sequence"),
            ("coordinate", Kind::Int, Method::Input, "sequence"),
            ("value", Kind::Complex, Method::Input, "sequence"),
            ("gap", Kind::Real, Method::Input, "sequence"),
        ],
    );
    for (i, a) in seq.points().iter().enumerate() {
        for (j, c) in a.coords().iter().enumerate() {
            t.push(vec![i.into(), j.into(), (*c).into(), a.coord_gaps()[j].into()]);
        }
    }
    report.tables.push(t);
    report.quantity("seqgen.count", Kind::Int, Method::Input, "sequence", seq.len());
    if seq.space().dim() == 1 {
        let est = density_estimate(&seq.in_space(crate::spaces::Space::HardyDisc)?, &DEFAULT_LADDER, DEFAULT_CENTERS, cfg.seed)?;
        report.quantity("seqgen.density", Kind::Real, Method::Truncated, "density_estimate", est.value);
    }
    Ok(())
}

/// Runs the configured command.
pub fn run(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    use super::config::Command;
    cfg.validate()?;
    if cfg.command == Command::Babenko {
        return super::babenko::run_babenko(cfg);
    }
    let mut report = ExperimentReport::new(cfg);
    let clock = Instant::now();
    match cfg.command {
        Command::Gram => gram(cfg, &mut report)?,
        Command::Frame => frame(cfg, &mut report)?,
        Command::Dual => dual(cfg, &mut report)?,
        Command::Carleson => carleson(cfg, &mut report)?,
        Command::Lift => lift(cfg, &mut report)?,
        Command::Seqgen => seqgen(cfg, &mut report)?,
        Command::Babenko => unreachable!(),
    }
    report.timings.0.push((cfg.command.name().into(), clock.elapsed().as_secs_f64()));
    Ok(report)
}
