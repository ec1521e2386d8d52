//! End-to-end acceptance criteria. Runs without the libtest harness so that
//! every criterion prints one `PASS` or `FAIL` line; exits nonzero if any
//! criterion fails.

use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rkframe::experiment::{run, trend_rows, ExperimentConfig, Target, Value};
use rkframe::carleson::box_constant;
use rkframe::frame::{frame_bounds, grid_axes_for, OptimizerConfig};
use rkframe::gram::{build_gram, dual_system, interpolation_constant, spectral_bounds};
use rkframe::kernels::chi;
use rkframe::quadrature::{build_grid, build_grid_axes, function_norm, norm_gradient, space_norm};
use rkframe::seqgen::{radial_geometric, random_separated_within};
use rkframe::subordination::{kernel_agreement_check, LiftMap};
use rkframe::{Exponent, KernelCoeffs, Point, PointSeq, Space};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn exp(p: f64) -> Exponent {
    Exponent::new(p).unwrap()
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn random_coeffs(rng: &mut ChaCha8Rng, n: usize) -> Vec<Complex64> {
    (0..n).map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect()
}

fn p2_oracle() -> Outcome {
    let clock = Instant::now();
    let cfg = OptimizerConfig::default();
    let mut worst: f64 = 0.0;
    for space in [Space::HardyDisc, Space::HardyPolydisc { n: 2 }, Space::HardyBall { n: 2 }] {
        for seed in 0..20u64 {
            let n = 2 + (seed as usize % 5);
            let seq = random_separated_within(&space, n, 0.3, 0.8, seed).map_err(|e| e.to_string())?;
            let spectral = spectral_bounds(&build_gram(&space, exp(2.0), &seq).unwrap()).unwrap();
            let opt = frame_bounds(&space, exp(2.0), &seq, &cfg).unwrap();
            worst = worst.max(rel(opt.lower, spectral.lower)).max(rel(opt.upper, spectral.upper));
        }
    }
    let secs = clock.elapsed().as_secs_f64();
    check(
        worst <= 1e-3 && secs < 120.0,
        format!("60 sequences, worst relative gap {worst:.2e}, {secs:.1} s"),
    )
}

fn two_point() -> Outcome {
    let space = Space::HardyDisc;
    let seq = PointSeq::new(space, vec![Point::real(&[0.0]), Point::real(&[3f64.sqrt() / 2.0])]).unwrap();
    let spectral = spectral_bounds(&build_gram(&space, exp(2.0), &seq).unwrap()).unwrap();
    let cfg = OptimizerConfig { restarts: 8, ..Default::default() };
    let opt = frame_bounds(&space, exp(2.0), &seq, &cfg).unwrap();
    let ds = dual_system(&space, exp(2.0), &seq).unwrap();
    let norms = ds.dual_norms(&build_grid(&space, 512).unwrap()).unwrap();
    let constant = interpolation_constant(&space, &seq).unwrap();
    let errors = [
        (spectral.lower - 0.5f64.sqrt()).abs(),
        (spectral.upper - 1.5f64.sqrt()).abs(),
        (opt.lower - 0.5f64.sqrt()).abs(),
        (opt.upper - 1.5f64.sqrt()).abs(),
        (norms[0] - (4.0f64 / 3.0).sqrt()).abs(),
        (norms[1] - (4.0f64 / 3.0).sqrt()).abs(),
        (constant - 2f64.sqrt()).abs(),
    ];
    let worst = errors.iter().copied().fold(0.0, f64::max);
    check(worst <= 1e-6, format!("largest deviation from the closed forms {worst:.2e}"))
}

fn dual_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let spaces = [
        Space::HardyDisc,
        Space::HardyPolydisc { n: 2 },
        Space::HardyBall { n: 2 },
        Space::BergmanBall { n: 1, k: 0 },
        Space::BergmanBall { n: 2, k: 1 },
    ];
    let (mut bio, mut idem): (f64, f64) = (0.0, 0.0);
    let mut count = 0;
    for space in spaces {
        for p in [2.0, 3.0, 4.0] {
            for trial in 0..4u64 {
                let n = 2 + (trial as usize * 2).min(6);
                let seq = random_separated_within(&space, n, 0.3, 0.9, rng.random()).map_err(|e| e.to_string())?;
                let ds = dual_system(&space, exp(p), &seq).map_err(|e| e.to_string())?;
                bio = bio.max(ds.biorthogonality_residual());
                let f = KernelCoeffs::new(exp(p), seq.clone(), random_coeffs(&mut rng, n)).unwrap();
                let once = ds.project(&f).unwrap();
                let twice = ds.project(&once).unwrap();
                for _ in 0..4 {
                    let probe = random_separated_within(&space, 1, 0.5, 0.95, rng.random()).unwrap();
                    let z = &probe.points()[0];
                    let (u, v) = (once.eval(z).unwrap(), twice.eval(z).unwrap());
                    idem = idem.max((u - v).norm() / (1.0 + u.norm()));
                }
                count += 1;
            }
        }
    }
    check(
        bio <= 1e-8 && idem <= 1e-6,
        format!("{count} instances, biorthogonality residual {bio:.2e}, P^2 - P residual {idem:.2e}"),
    )
}

fn quadrature_convergence() -> Outcome {
    let space = Space::HardyDisc;
    let a = Point::real(&[0.6]);
    let seq = PointSeq::new(space, vec![a.clone()]).unwrap();
    let unnormalized = c(chi(&space, &a).unwrap().powf(-0.5), 0.0);
    let f = KernelCoeffs::new(exp(2.0), seq, vec![unnormalized]).unwrap();
    let norm = space_norm(&f, &build_grid(&space, 1024).unwrap(), 2.0).unwrap();
    let norm_err = (norm - 1.25).abs();

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for space in [Space::HardyDisc, Space::HardyPolydisc { n: 2 }, Space::HardyBall { n: 2 }, Space::BergmanBall { n: 1, k: 1 }] {
        let grid = build_grid(&space, 8).unwrap();
        for q in [1.5, 2.0, 3.0, 4.0] {
            let n = 3;
            let seq = random_separated_within(&space, n, 0.3, 0.9, rng.random()).unwrap();
            let coeffs = random_coeffs(&mut rng, n);
            let f = KernelCoeffs::new(exp(3.0), seq.clone(), coeffs.clone()).unwrap();
            let grad = norm_gradient(&f, &grid, q).unwrap();
            let h = 1e-6;
            let at = |i: usize, d: Complex64| {
                let mut v = coeffs.clone();
                v[i] += d;
                space_norm(&KernelCoeffs::new(exp(3.0), seq.clone(), v).unwrap(), &grid, q).unwrap()
            };
            let scale = grad.iter().map(|g| g.norm()).fold(0.0, f64::max);
            for i in 0..n {
                let fd = c(
                    (at(i, c(h, 0.0)) - at(i, c(-h, 0.0))) / (2.0 * h),
                    (at(i, c(0.0, h)) - at(i, c(0.0, -h))) / (2.0 * h),
                );
                worst = worst.max((grad[i] - fd).norm() / scale);
            }
        }
    }
    check(
        norm_err <= 1e-6 && worst <= 1e-5,
        format!("|‖k_a‖ - 1.25| = {norm_err:.2e}, gradient vs finite differences {worst:.2e}"),
    )
}

fn subordination() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut agree: f64 = 0.0;
    let mut gram: f64 = 0.0;
    for (n, k) in [(1, 0), (1, 1), (2, 1)] {
        let lift = LiftMap::new(Space::BergmanBall { n, k }).unwrap();
        for _ in 0..1000 {
            let pair = random_separated_within(&lift.source(), 2, 1e-6, 0.99, rng.random()).unwrap();
            let (a, z) = (&pair.points()[0], &pair.points()[1]);
            agree = agree.max(kernel_agreement_check(&lift, a, z).unwrap());
        }
        let seq = random_separated_within(&lift.source(), 6, 0.3, 0.95, rng.random()).unwrap();
        for p in [2.0, 3.0] {
            let g = build_gram(&lift.source(), exp(p), &seq).unwrap().entries;
            let h = build_gram(&lift.target(), exp(p), &lift.embed_seq(&seq).unwrap()).unwrap().entries;
            gram = gram.max((g - h).camax());
        }
    }
    let lift = LiftMap::new(Space::BergmanBall { n: 1, k: 0 }).unwrap();
    let src = build_grid_axes(&lift.source(), &grid_axes_for(&lift.source(), 256)).unwrap();
    let tgt = build_grid_axes(&lift.target(), &grid_axes_for(&lift.target(), 256)).unwrap();
    let mut monomial: f64 = 0.0;
    for m in 0..=10 {
        let below = function_norm(&src, 2.0, |z| Ok(z.coords[0].powu(m))).unwrap();
        let above = function_norm(&tgt, 2.0, |z| Ok(z.coords[0].powu(m))).unwrap();
        monomial = monomial.max((above / below - 1.0).abs());
    }
    check(
        agree <= 1e-14 && monomial <= 1e-3 && gram <= 1e-14,
        format!("kernel discrepancy {agree:.2e}, monomial ratio deviation {monomial:.2e}, Gram discrepancy {gram:.2e}"),
    )
}

const BABENKO: &str = include_str!("../../../configs/babenko.json");

fn babenko() -> Outcome {
    let clock = Instant::now();
    let cfg = ExperimentConfig::from_json(BABENKO).map_err(|e| e.to_string())?;
    let report = run(&cfg).map_err(|e| e.to_string())?;
    let secs = clock.elapsed().as_secs_f64();
    let mut ok = secs < 600.0;
    let mut parts = Vec::new();
    for target in [Target::BergmanDisc, Target::Ball, Target::Bidisc] {
        let rows = trend_rows(&report, target);
        let (Some(first), Some(last)) = (rows.first(), rows.last()) else {
            return Err(format!("no rows for {}", target.name()));
        };
        let (lr, ur) = (last.1 / first.1, last.2 / first.2);
        ok &= rows.len() == 4 && first.0 == 10 && last.0 == 60 && lr <= 0.5 && ur <= 1.5;
        parts.push(format!("{}: lower ratio {lr:.3}, upper ratio {ur:.3}", target.name()));
    }
    let density = match report.result("calibration.density") {
        Some(Value::Real(d)) => *d,
        _ => f64::NAN,
    };
    ok &= density > 1.0 / 6.0 && density < 1.0 / 3.0;
    check(ok, format!("density {density:.4}; {}; {secs:.0} s", parts.join("; ")))
}

fn carleson_consistency() -> Outcome {
    let space = Space::HardyDisc;
    let family = radial_geometric(60, 0.5).unwrap();
    let boxes = |n: usize| box_constant(&family.truncate(n), 12).unwrap().box_constant;
    let spectrum = |n: usize| {
        let r = spectral_bounds(&build_gram(&space, exp(2.0), &family.truncate(n)).unwrap()).unwrap();
        r.reference.unwrap()
    };
    let (b5, b60) = (boxes(5), boxes(60));
    let (s5, s20, s60) = (spectrum(5), spectrum(20), spectrum(60));
    check(
        b60 <= 4.0 * b5 && s60.lambda_max <= 1.5 * s5.lambda_max && s60.lambda_min >= 0.5 * s20.lambda_min,
        format!(
            "box constant {b5:.4} -> {b60:.4}, lambda_max {:.4} -> {:.4}, lambda_min(20) {:.4e}, lambda_min(60) {:.4e}",
            s5.lambda_max, s60.lambda_max, s20.lambda_min, s60.lambda_min
        ),
    )
}

fn determinism() -> Outcome {
    let configs = [
        include_str!("../../../configs/gram.json"),
        include_str!("../../../configs/frame.json"),
        include_str!("../../../configs/dual.json"),
        include_str!("../../../configs/carleson.json"),
        include_str!("../../../configs/lift.json"),
        include_str!("../../../configs/seqgen.json"),
        include_str!("../../../configs/babenko_quick.json"),
    ];
    let mut names = Vec::new();
    for text in configs {
        let cfg = ExperimentConfig::from_json(text).map_err(|e| e.to_string())?;
        let first = run(&cfg).map_err(|e| e.to_string())?.to_json();
        let echoed: serde_json::Value = serde_json::from_str(&first).unwrap();
        let again = ExperimentConfig::from_json(&echoed["config"].to_string()).map_err(|e| e.to_string())?;
        let second = run(&again).map_err(|e| e.to_string())?.to_json();
        if first != second {
            return Err(format!("{} report differs after a re-run from its echo", cfg.command.name()));
        }
        names.push(cfg.command.name());
    }
    Ok(format!("byte-identical re-runs for {}", names.join(", ")))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("p=2 oracle equivalence", p2_oracle),
        ("two-point closed form", two_point),
        ("dual-system identities", dual_identities),
        ("quadrature convergence", quadrature_convergence),
        ("subordination exactness", subordination),
        ("Babenko trend", babenko),
        ("Carleson consistency", carleson_consistency),
        ("determinism", determinism),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let label = format!("{} {name}", i + 1);
        if !filter.is_empty() && !filter.iter().any(|s| label.contains(s.as_str())) {
            continue;
        }
        let clock = Instant::now();
        let outcome = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        let took = Duration::from_secs_f64(clock.elapsed().as_secs_f64());
        match outcome {
            Ok(detail) => println!("PASS criterion {label}: {detail} [{took:.1?}]"),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {label}: {detail} [{took:.1?}]");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
