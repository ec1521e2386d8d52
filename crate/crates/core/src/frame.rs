//! Hilbertian and besselian constants for general `p` by projected gradient
//! on the unit sphere of `l^{p'}`.
//!
//! For a sequence `S` and exponent `p` the objective is the synthesis ratio
//!
//! ```text
//! R(mu) = || sum_a mu_a k_{a,p'} ||_{p'} / ||mu||_{l^{p'}}
//! ```
//!
//! evaluated by quadrature. `upper` is the largest value found, `lower` the
//! smallest. Both are inner estimates: the true upper constant is at least
//! the reported one and the true lower constant at most the reported one.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gram::{build_gram, spectral_bounds, FrameMethod, FrameReport, SpectralReference};
use crate::kernels::Exponent;
use crate::quadrature::{build_grid_axes, QuadratureGrid, SynthesisOperator};
use crate::random::{complex_gaussian_vec, lp_norm, lp_normalize};
use crate::spaces::{PointSeq, Space};

const ARMIJO: f64 = 1e-4;
const BACKTRACK: f64 = 0.5;
const MIN_STEP: f64 = 1e-20;
const MAX_STEP: f64 = 1e6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub restarts: usize,
    pub max_iters: usize,
    pub step_init: f64,
    pub tol: f64,
    pub seed: u64,
    /// Nominal resolution, mapped to per-axis counts by [`grid_axes_for`].
    pub grid_resolution: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            restarts: 32,
            max_iters: 2000,
            step_init: 1.0,
            tol: 1e-8,
            seed: 0,
            grid_resolution: 512,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.restarts < 1 {
            return Err(Error::Config("optimizer.restarts must be at least 1".into()));
        }
        if self.max_iters < 1 {
            return Err(Error::Config("optimizer.max_iters must be at least 1".into()));
        }
        if !(self.tol > 0.0) || !(self.step_init > 0.0) {
            return Err(Error::Config("optimizer.tol and optimizer.step_init must be positive".into()));
        }
        if self.grid_resolution < crate::quadrature::MIN_RESOLUTION {
            return Err(Error::Config("optimizer.grid_resolution is below the quadrature minimum".into()));
        }
        Ok(())
    }
}

/// Per-axis grid resolution derived from a nominal resolution `r`.
///
/// * disc: `r` nodes;
/// * polydisc `D^n`: `r >> 2(n-1)` per axis (at least 8);
/// * ball `B_n`: `r` for `n = 1`, else `r >> (2n-1)` per axis (at least 4);
/// * Bergman `A_k(B_n)`: `r >> 3` radial nodes (at least 8), sphere axes as
///   for `B_n` except `r >> 1` angles when `n = 1`.
pub fn grid_axes_for(space: &Space, r: usize) -> Vec<usize> {
    let sphere = |n: usize, r: usize| -> Vec<usize> {
        if n == 1 {
            vec![r]
        } else {
            vec![(r >> (2 * n - 1)).max(4); 2 * n - 1]
        }
    };
    match *space {
        Space::HardyDisc => vec![r],
        Space::HardyPolydisc { n } => vec![(r >> (2 * (n - 1))).max(8); n],
        Space::HardyBall { n } => sphere(n, r),
        Space::BergmanBall { n, .. } => {
            let mut axes = vec![(r >> 3).max(8)];
            if n == 1 {
                axes.push((r >> 1).max(8));
            } else {
                axes.extend(sphere(n, r));
            }
            axes
        }
    }
}

/// Scale-invariant ratio `||L mu|| / ||mu||_{l^q}`.
trait Synthesis {
    fn norm(&self, mu: &[Complex64]) -> f64;
    fn norm_and_gradient(&self, mu: &[Complex64]) -> (f64, Vec<Complex64>);
}

struct Weighted<'a> {
    op: &'a SynthesisOperator,
    q: f64,
}

impl Synthesis for Weighted<'_> {
    fn norm(&self, mu: &[Complex64]) -> f64 {
        self.op.norm(mu, self.q)
    }

    fn norm_and_gradient(&self, mu: &[Complex64]) -> (f64, Vec<Complex64>) {
        self.op.norm_and_gradient(mu, self.q)
    }
}

/// `q = 2`: the norm is `sqrt(mu^H Q mu)` for the quadrature Gram `Q`.
struct Quadratic {
    gram: DMatrix<Complex64>,
}

impl Quadratic {
    fn apply(&self, mu: &[Complex64]) -> Vec<Complex64> {
        let n = mu.len();
        (0..n).map(|a| (0..n).map(|b| self.gram[(a, b)] * mu[b]).sum()).collect()
    }
}

impl Synthesis for Quadratic {
    fn norm(&self, mu: &[Complex64]) -> f64 {
        let qm = self.apply(mu);
        let v: Complex64 = mu.iter().zip(&qm).map(|(m, x)| m.conj() * x).sum();
        v.re.max(0.0).sqrt()
    }

    fn norm_and_gradient(&self, mu: &[Complex64]) -> (f64, Vec<Complex64>) {
        let qm = self.apply(mu);
        let v: Complex64 = mu.iter().zip(&qm).map(|(m, x)| m.conj() * x).sum();
        let norm = v.re.max(0.0).sqrt();
        if norm == 0.0 {
            return (0.0, vec![Complex64::new(0.0, 0.0); mu.len()]);
        }
        (norm, qm.into_iter().map(|x| x / norm).collect())
    }
}

fn ratio(syn: &dyn Synthesis, mu: &[Complex64], q: f64) -> f64 {
    syn.norm(mu) / lp_norm(mu, q)
}

fn ratio_and_gradient(syn: &dyn Synthesis, mu: &[Complex64], q: f64) -> (f64, Vec<Complex64>) {
    let (a, ga) = syn.norm_and_gradient(mu);
    let b = lp_norm(mu, q);
    let r = a / b;
    let scale = b.powf(1.0 - q);
    let grad = ga
        .iter()
        .zip(mu)
        .map(|(g, m)| {
            let mm = m.norm();
            let gb = if mm > 0.0 { m * (mm.powf(q - 2.0) * scale) } else { Complex64::new(0.0, 0.0) };
            (g - gb * r) / b
        })
        .collect();
    (r, grad)
}

struct Run {
    value: f64,
    point: Vec<Complex64>,
    iterations: usize,
    converged: bool,
}

/// Projected gradient with Barzilai-Borwein trial steps and Armijo
/// backtracking. `sign = 1` minimizes,
/// `sign = -1` maximizes. Iterates are renormalized onto the `l^q` sphere.
/// Stops once the relative change is below `tol` and `|grad|^2 <= tol R^2`.
fn optimize(syn: &dyn Synthesis, q: f64, start: &[Complex64], sign: f64, cfg: &OptimizerConfig) -> Run {
    let mut mu = start.to_vec();
    lp_normalize(&mut mu, q);
    let (mut r, mut g) = ratio_and_gradient(syn, &mu, q);
    let mut step = cfg.step_init;
    for it in 0..cfg.max_iters {
        let g2: f64 = g.iter().map(|x| x.norm_sqr()).sum();
        if g2 == 0.0 || !g2.is_finite() {
            return Run { value: r, point: mu, iterations: it, converged: g2 == 0.0 };
        }
        let accepted = loop {
            let mut cand: Vec<Complex64> = mu.iter().zip(&g).map(|(m, d)| m - d * (sign * step)).collect();
            lp_normalize(&mut cand, q);
            let rc = ratio(syn, &cand, q);
            if sign * (rc - r) <= -ARMIJO * step * g2 {
                break Some((cand, rc));
            }
            step *= BACKTRACK;
            if step < MIN_STEP {
                break None;
            }
        };
        let Some((cand, rc)) = accepted else {
            // no descent along the gradient: stationary to working precision
            return Run { value: r, point: mu, iterations: it + 1, converged: true };
        };
        let rel = (rc - r).abs() / r.abs().max(f64::MIN_POSITIVE);
        let (r_new, g_new) = ratio_and_gradient(syn, &cand, q);
        // Barzilai-Borwein trial step for the next iteration
        let (mut ss, mut sy) = (0.0, 0.0);
        for ((c, m), (gn, go)) in cand.iter().zip(&mu).zip(g_new.iter().zip(&g)) {
            let ds = c - m;
            ss += ds.norm_sqr();
            sy += sign * (ds.conj() * (gn - go)).re;
        }
        step = if sy > 0.0 { (ss / sy).clamp(MIN_STEP, MAX_STEP) } else { (step * 2.0).min(MAX_STEP) };
        mu = cand;
        r = r_new;
        g = g_new;
        let g2: f64 = g.iter().map(|x| x.norm_sqr()).sum();
        if rel < cfg.tol && g2 <= cfg.tol * r * r {
            return Run { value: r, point: mu, iterations: it + 1, converged: true };
        }
    }
    Run { value: r, point: mu, iterations: cfg.max_iters, converged: false }
}

/// Start vector of restart `k`: uniform for `k = 0`, seeded Gaussian
/// otherwise. Restart `k` does not depend on the total restart count.
fn start_vector(n: usize, q: f64, seed: u64, k: usize) -> Vec<Complex64> {
    let mut v = if k == 0 {
        vec![Complex64::new(1.0, 0.0); n]
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(k as u64);
        complex_gaussian_vec(&mut rng, n)
    };
    lp_normalize(&mut v, q);
    v
}

struct Extremes {
    lower: f64,
    upper: f64,
    lower_witness: Vec<Complex64>,
    upper_witness: Vec<Complex64>,
    iterations: usize,
    converged: bool,
}

/// Additional starting points: `low` vectors start descents, `high`
/// vectors start ascents.
#[derive(Clone, Debug, Default)]
pub struct ExtraStarts {
    pub low: Vec<Vec<Complex64>>,
    pub high: Vec<Vec<Complex64>>,
}

/// Eigenvectors of the `p = 2` Grammian for its smallest and largest
/// eigenvalues.
fn spectral_starts(space: &Space, seq: &PointSeq) -> Result<ExtraStarts> {
    let g = build_gram(space, Exponent::new(2.0)?, seq)?;
    let eig = nalgebra::SymmetricEigen::new(g.entries);
    let (mut lo, mut hi) = (0, 0);
    for i in 0..eig.eigenvalues.len() {
        if eig.eigenvalues[i] < eig.eigenvalues[lo] {
            lo = i;
        }
        if eig.eigenvalues[i] > eig.eigenvalues[hi] {
            hi = i;
        }
    }
    let col = |i: usize| eig.eigenvectors.column(i).iter().copied().collect();
    Ok(ExtraStarts { low: vec![col(lo)], high: vec![col(hi)] })
}

struct Tracker {
    ext: Extremes,
}

impl Tracker {
    fn new(n: usize) -> Self {
        Tracker {
            ext: Extremes {
                lower: f64::INFINITY,
                upper: 0.0,
                lower_witness: vec![Complex64::new(0.0, 0.0); n],
                upper_witness: vec![Complex64::new(0.0, 0.0); n],
                iterations: 0,
                converged: true,
            },
        }
    }

    fn witness(&mut self, v: f64, mu: &[Complex64]) {
        if v < self.ext.lower {
            self.ext.lower = v;
            self.ext.lower_witness = mu.to_vec();
        }
        if v > self.ext.upper {
            self.ext.upper = v;
            self.ext.upper_witness = mu.to_vec();
        }
    }

    fn run(&mut self, run: Run) {
        self.witness(run.value, &run.point);
        self.ext.iterations += run.iterations;
        self.ext.converged &= run.converged;
    }
}

fn extremes(
    syn: &dyn Synthesis,
    n: usize,
    q: f64,
    cfg: &OptimizerConfig,
    want_upper: bool,
    extra: &[&ExtraStarts],
) -> Extremes {
    let mut t = Tracker::new(n);
    // every evaluated vector is a witness; basis vectors keep the sandwich
    for a in 0..n {
        let mut e = vec![Complex64::new(0.0, 0.0); n];
        e[a] = Complex64::new(1.0, 0.0);
        t.witness(ratio(syn, &e, q), &e);
    }
    for starts in extra {
        for v in starts.low.iter().filter(|v| v.len() == n) {
            t.run(optimize(syn, q, v, 1.0, cfg));
        }
        if want_upper {
            for v in starts.high.iter().filter(|v| v.len() == n) {
                t.run(optimize(syn, q, v, -1.0, cfg));
            }
        }
    }
    for k in 0..cfg.restarts {
        let start = start_vector(n, q, cfg.seed, k);
        t.run(optimize(syn, q, &start, 1.0, cfg));
        if want_upper {
            t.run(optimize(syn, q, &start, -1.0, cfg));
        }
    }
    t.ext
}

fn check_inputs(space: &Space, seq: &PointSeq, cfg: &OptimizerConfig) -> Result<()> {
    cfg.validate()?;
    if *space != seq.space() {
        return Err(Error::SpaceMismatch {
            expected: space.to_string(),
            given: seq.space().to_string(),
        });
    }
    if seq.is_empty() {
        return Err(Error::EmptySequence);
    }
    Ok(())
}

/// Frame constants on the grid given by `cfg.grid_resolution`.
///
/// Besides the `cfg.restarts` starts (uniform, then seeded Gaussian), each
/// direction is also started from the matching extreme eigenvector of the
/// `p = 2` Grammian, and every basis vector is evaluated as a witness.
pub fn frame_bounds(space: &Space, p: Exponent, seq: &PointSeq, cfg: &OptimizerConfig) -> Result<FrameReport> {
    check_inputs(space, seq, cfg)?;
    let grid = build_grid_axes(space, &grid_axes_for(space, cfg.grid_resolution))?;
    frame_bounds_on_grid(space, p, seq, cfg, &grid)
}

/// Frame constants on a caller-supplied grid.
pub fn frame_bounds_on_grid(
    space: &Space,
    p: Exponent,
    seq: &PointSeq,
    cfg: &OptimizerConfig,
    grid: &QuadratureGrid,
) -> Result<FrameReport> {
    Ok(frame_search(space, p, seq, cfg, grid, &ExtraStarts::default())?.report)
}

/// A frame report with the unit vectors of `l^{p'}` attaining its bounds.
#[derive(Clone, Debug)]
pub struct FrameSearch {
    pub report: FrameReport,
    pub lower_witness: Vec<Complex64>,
    pub upper_witness: Vec<Complex64>,
}

/// [`frame_bounds_on_grid`] with caller-supplied extra starts, for example
/// the witnesses of a shorter truncation padded with zeros. Starts of the
/// wrong length are ignored.
pub fn frame_search(
    space: &Space,
    p: Exponent,
    seq: &PointSeq,
    cfg: &OptimizerConfig,
    grid: &QuadratureGrid,
    extra: &ExtraStarts,
) -> Result<FrameSearch> {
    check_inputs(space, seq, cfg)?;
    let pc = p.conjugate();
    let q = pc.value();
    let op = SynthesisOperator::from_kernels(pc, seq, grid)?;
    let warm = spectral_starts(space, seq)?;
    let starts = [&warm, extra];
    let ext = if pc.is_two() {
        extremes(&Quadratic { gram: op.weighted_gram() }, seq.len(), q, cfg, true, &starts)
    } else {
        extremes(&Weighted { op: &op, q }, seq.len(), q, cfg, true, &starts)
    };
    let reference = if p.is_two() {
        spectral_bounds(&build_gram(space, p, seq)?)?.reference
    } else {
        None
    };
    let normalize = |mut v: Vec<Complex64>| {
        lp_normalize(&mut v, q);
        v
    };
    Ok(FrameSearch {
        report: FrameReport {
            lower: ext.lower,
            upper: ext.upper,
            method: FrameMethod::Optimized,
            restarts_used: cfg.restarts,
            iterations: ext.iterations,
            converged: ext.converged,
            reference,
        },
        lower_witness: normalize(ext.lower_witness),
        upper_witness: normalize(ext.upper_witness),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct GrammianBound {
    /// Smallest `||G mu||_{l^{p'}} / ||mu||_{l^{p'}}` found.
    pub lower: f64,
    pub restarts_used: usize,
    pub iterations: usize,
    pub converged: bool,
    /// `sigma_min(G)`, reported when `p = 2`.
    pub sigma_min: Option<f64>,
}

/// Estimate of `inf ||G mu||_{l^{p'}}` over the unit sphere of `l^{p'}`,
/// where `(G mu)_b = sum_a mu_a G_{a,b}`. Exact gradients, no quadrature.
pub fn grammian_lower_bound(
    space: &Space,
    p: Exponent,
    seq: &PointSeq,
    cfg: &OptimizerConfig,
) -> Result<GrammianBound> {
    check_inputs(space, seq, cfg)?;
    let g = build_gram(space, p, seq)?;
    let n = seq.len();
    let mut mat = Vec::with_capacity(n * n);
    for b in 0..n {
        for a in 0..n {
            mat.push(g.entries[(a, b)]);
        }
    }
    let op = SynthesisOperator::from_matrix(n, n, mat);
    let q = p.conjugate().value();
    let ext = extremes(&Weighted { op: &op, q }, n, q, cfg, false, &[&spectral_starts(space, seq)?]);
    let sigma_min = if p.is_two() {
        let sv = nalgebra::SVD::new(g.entries.clone(), false, false).singular_values;
        Some(sv.iter().copied().fold(f64::INFINITY, f64::min))
    } else {
        None
    };
    Ok(GrammianBound {
        lower: ext.lower,
        restarts_used: cfg.restarts,
        iterations: ext.iterations,
        converged: ext.converged,
        sigma_min,
    })
}

/// `lambda_min` and `lambda_max` of a `p = 2` Grammian as a reference pair.
pub fn spectral_reference(space: &Space, seq: &PointSeq) -> Result<SpectralReference> {
    let rep = spectral_bounds(&build_gram(space, Exponent::new(2.0)?, seq)?)?;
    Ok(rep.reference.expect("spectral reports carry their eigenvalues"))
}
