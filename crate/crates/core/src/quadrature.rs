//! Quadrature for `H^p` boundary norms and `A^p_k` volume norms.
//!
//! Every grid carries a probability measure (weights sum to one), so
//! constants have unit norm in every space.
//!
//! Layout per space (one resolution per axis, listed in this order):
//!
//! * `HardyDisc`: trapezoid rule on the circle.
//! * `HardyPolydisc(n)`: tensor product of `n` trapezoid rules on `T^n`.
//! * `HardyBall(n)`: the sphere `S^{2n-1}` written as `z_j = sqrt(t_j) e^{i theta_j}`,
//!   with `(t_1, .., t_n)` uniform on the simplex. Axes are the `n` angles
//!   (trapezoid) followed by the `n - 1` collapsed simplex coordinates
//!   (Gauss-Jacobi). For `n = 2` this is the Hopf parametrization with
//!   Gauss-Legendre in `t = |z_1|^2`.
//! * `BergmanBall(n, k)`: radial axis first, Gauss-Jacobi in `s = |z|^2` for the
//!   weight `s^{n-1} (1 - s)^k`, tensored with the sphere grid above.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::kernels::{disc_factor, kernel_view, normalizer, Exponent, KernelCoeffs};
use crate::spaces::{gap_of_modulus_sq, PointSeq, PointView, Space};

/// Smallest per-axis resolution accepted by [`build_grid`].
pub const MIN_RESOLUTION: usize = 4;
/// Upper bound on the number of nodes of a single grid.
pub const MAX_NODES: usize = 20_000_000;
/// Nodes where `|f|` falls below this contribute nothing to gradients.
pub const ZERO_SET_TOL: f64 = 1e-14;

#[derive(Clone, Debug)]
pub struct QuadratureGrid {
    space: Space,
    axes: Vec<usize>,
    dim: usize,
    coords: Vec<Complex64>,
    coord_gaps: Vec<f64>,
    norm_gaps: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureGrid {
    pub fn space(&self) -> Space {
        self.space
    }

    /// Per-axis resolutions in the order documented at module level.
    pub fn axes(&self) -> &[usize] {
        &self.axes
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn node(&self, j: usize) -> PointView<'_> {
        let d = self.dim;
        PointView {
            coords: &self.coords[j * d..(j + 1) * d],
            coord_gaps: &self.coord_gaps[j * d..(j + 1) * d],
            norm_gap: self.norm_gaps[j],
        }
    }
}

/// Gauss-Jacobi rule on `[0, 1]` for the weight `(1 - s)^alpha s^beta`,
/// normalized to total mass one. Golub-Welsch on the Jacobi matrix.
pub fn gauss_jacobi_unit(m: usize, alpha: f64, beta: f64) -> (Vec<f64>, Vec<f64>) {
    assert!(m >= 1 && alpha > -1.0 && beta > -1.0);
    let ab = alpha + beta;
    let mut jac = DMatrix::<f64>::zeros(m, m);
    for k in 0..m {
        let kf = k as f64;
        let diag = if k == 0 {
            (beta - alpha) / (ab + 2.0)
        } else {
            (beta * beta - alpha * alpha) / ((2.0 * kf + ab) * (2.0 * kf + ab + 2.0))
        };
        jac[(k, k)] = diag;
        if k + 1 < m {
            let j = kf + 1.0;
            let t = 2.0 * j + ab;
            let b = 4.0 * j * (j + alpha) * (j + beta) * (j + ab) / (t * t * (t + 1.0) * (t - 1.0));
            jac[(k, k + 1)] = b.sqrt();
            jac[(k + 1, k)] = b.sqrt();
        }
    }
    let eig = SymmetricEigen::new(jac);
    let mut pairs: Vec<(f64, f64)> = (0..m)
        .map(|i| (eig.eigenvalues[i], eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
    let total: f64 = pairs.iter().map(|p| p.1).sum();
    let nodes = pairs.iter().map(|p| (0.5 * (1.0 + p.0)).clamp(0.0, 1.0)).collect();
    let weights = pairs.iter().map(|p| p.1 / total).collect();
    (nodes, weights)
}

#[derive(Clone)]
struct Axis {
    values: Vec<f64>,
    weights: Vec<f64>,
}

fn angle_axis(m: usize) -> Axis {
    Axis {
        values: (0..m).map(|j| 2.0 * PI * j as f64 / m as f64).collect(),
        weights: vec![1.0 / m as f64; m],
    }
}

fn jacobi_axis(m: usize, alpha: f64, beta: f64) -> Axis {
    let (values, weights) = gauss_jacobi_unit(m, alpha, beta);
    Axis { values, weights }
}

/// Number of axes a grid on `space` needs.
pub fn axis_count(space: &Space) -> usize {
    match *space {
        Space::HardyDisc => 1,
        Space::HardyPolydisc { n } => n,
        Space::HardyBall { n } => 2 * n - 1,
        Space::BergmanBall { n, .. } => 2 * n,
    }
}

/// Grid with the same resolution on every axis.
pub fn build_grid(space: &Space, resolution: usize) -> Result<QuadratureGrid> {
    if resolution < MIN_RESOLUTION {
        return Err(Error::Config(format!(
            "quadrature resolution must be at least {MIN_RESOLUTION}, got {resolution}"
        )));
    }
    build_grid_axes(space, &vec![resolution; axis_count(space)])
}

/// Grid with an explicit resolution per axis (see the module docs for the
/// axis order). Axes may be as coarse as one node.
pub fn build_grid_axes(space: &Space, axes: &[usize]) -> Result<QuadratureGrid> {
    space.validate()?;
    if axes.len() != axis_count(space) {
        return Err(Error::Config(format!(
            "{space} grids need {} axis resolutions, got {}",
            axis_count(space),
            axes.len()
        )));
    }
    if axes.contains(&0) {
        return Err(Error::Config("axis resolutions must be positive".into()));
    }
    let total = axes.iter().try_fold(1usize, |acc, &m| acc.checked_mul(m));
    match total {
        Some(t) if t <= MAX_NODES => {}
        _ => {
            return Err(Error::ResourceGuard(format!(
                "grid with axes {axes:?} exceeds {MAX_NODES} nodes"
            )))
        }
    }
    let n = space.dim();
    let mut builder = GridBuilder::new(*space, axes.to_vec(), n, total.unwrap_or(0));
    match *space {
        Space::HardyDisc | Space::HardyPolydisc { .. } => {
            let angle_axes: Vec<Axis> = axes.iter().map(|&m| angle_axis(m)).collect();
            for_each_tensor(&angle_axes, |vals, w| {
                let coords: Vec<Complex64> = vals.iter().map(|&t| Complex64::from_polar(1.0, t)).collect();
                // the Euclidean gap is unused on product domains
                builder.push(&coords, &vec![0.0; n], 1.0 - (n as f64).sqrt(), w);
            });
        }
        Space::HardyBall { .. } => {
            let sphere = sphere_axes(n, axes);
            for_each_tensor(&sphere, |vals, w| {
                let (coords, gaps) = sphere_point(n, vals, 1.0);
                builder.push(&coords, &gaps, 0.0, w);
            });
        }
        Space::BergmanBall { k, .. } => {
            let mut all = vec![jacobi_axis(axes[0], k as f64, (n - 1) as f64)];
            all.extend(sphere_axes(n, &axes[1..]));
            for_each_tensor(&all, |vals, w| {
                let s = vals[0];
                let (coords, gaps) = sphere_point(n, &vals[1..], s);
                builder.push(&coords, &gaps, gap_of_modulus_sq(s), w);
            });
        }
    }
    Ok(builder.finish())
}

/// Grid refined for the kernels of `seq`.
///
/// `base` gives minimum counts in the usual axis order. Radial and simplex
/// axes get at least `kappa / sqrt(g)` Gauss nodes, where `g` is the
/// smallest boundary gap in `seq`. At each node of those axes, angle `j`
/// gets at least `kappa * max_a rho_j |a_j| / (1 - sum_i rho_i |a_i|)`
/// trapezoid nodes (`rho_j = |z_j|` at the node), which resolves every
/// kernel of `seq` at the scale of its distance to the node's shell.
/// Product domains use the one-variable factor `|a_j| / (1 - |a_j|)`.
/// No axis exceeds `max_per_axis` nodes.
pub fn build_grid_adapted(
    space: &Space,
    base: &[usize],
    seq: &PointSeq,
    kappa: f64,
    max_per_axis: usize,
) -> Result<QuadratureGrid> {
    space.validate()?;
    check_space(space, &seq.space())?;
    let n = space.dim();
    if base.len() != axis_count(space) || base.contains(&0) {
        return Err(Error::Config(format!(
            "{space} grids need {} positive axis resolutions",
            axis_count(space)
        )));
    }
    if !(kappa > 0.0 && kappa.is_finite()) || max_per_axis == 0 {
        return Err(Error::Config("refinement needs kappa > 0 and a positive axis cap".into()));
    }
    let cap = |m: f64, floor: usize| -> usize { (m.ceil().min(max_per_axis as f64) as usize).max(floor.min(max_per_axis)) };
    let bergman = matches!(space, Space::BergmanBall { .. });
    let moduli: Vec<Vec<f64>> = seq.points().iter().map(|a| a.coords().iter().map(|c| c.norm()).collect()).collect();
    let (angle_base, outer): (Vec<usize>, Vec<Axis>) = match *space {
        Space::HardyDisc | Space::HardyPolydisc { .. } => (base.to_vec(), Vec::new()),
        Space::HardyBall { .. } | Space::BergmanBall { .. } => {
            let g = seq.points().iter().map(|a| a.norm_gap()).fold(1.0, f64::min);
            let radial = |m: usize| cap(kappa / g.sqrt(), m);
            let mut outer = Vec::new();
            let sphere = match *space {
                Space::BergmanBall { k, .. } => {
                    outer.push(jacobi_axis(radial(base[0]), k as f64, (n - 1) as f64));
                    &base[1..]
                }
                _ => base,
            };
            for (i, &m) in sphere[n..].iter().enumerate() {
                outer.push(jacobi_axis(radial(m), (n - 2 - i) as f64, 0.0));
            }
            (sphere[..n].to_vec(), outer)
        }
    };
    // per outer node: (scale, simplex coordinates, weight, angle counts)
    let mut plan: Vec<(f64, Vec<f64>, f64, Vec<usize>)> = Vec::new();
    let mut total = 0usize;
    let mut visit = |vals: &[f64], w: f64| -> Result<()> {
        let (scale, us) = if bergman { (vals[0], &vals[1..]) } else { (1.0, vals) };
        let mut t = Vec::with_capacity(n);
        let mut rest = 1.0;
        for &u in us {
            t.push(rest * u);
            rest *= 1.0 - u;
        }
        t.push(rest);
        let rho: Vec<f64> = t.iter().map(|&tj| (scale * tj).sqrt()).collect();
        let mut counts = Vec::with_capacity(n);
        for j in 0..n {
            let mut need: f64 = 0.0;
            for (a, m) in seq.points().iter().zip(&moduli) {
                let v = if space.is_ball() {
                    let direct = 1.0 - rho.iter().zip(m).map(|(r, x)| r * x).sum::<f64>();
                    let gr = gap_of_modulus_sq(scale);
                    let stable = gr + a.norm_gap() - gr * a.norm_gap();
                    rho[j] * m[j] / direct.max(stable)
                } else {
                    m[j] / a.coord_gaps()[j]
                };
                need = need.max(v);
            }
            counts.push(cap(kappa * need, angle_base[j]));
        }
        let nodes = counts.iter().try_fold(1usize, |acc, &c| acc.checked_mul(c));
        total = nodes.and_then(|c| total.checked_add(c)).filter(|&t| t <= MAX_NODES).ok_or_else(|| {
            Error::ResourceGuard(format!("adapted grid exceeds {MAX_NODES} nodes"))
        })?;
        plan.push((scale, us.to_vec(), w, counts));
        Ok(())
    };
    if outer.is_empty() {
        visit(&[], 1.0)?;
    } else {
        let mut err = None;
        for_each_tensor(&outer, |vals, w| {
            if err.is_none() {
                err = visit(vals, w).err();
            }
        });
        if let Some(e) = err {
            return Err(e);
        }
    }
    let axes = match plan.as_slice() {
        [(_, _, _, counts)] if outer.is_empty() => counts.clone(),
        _ => base.to_vec(),
    };
    let mut builder = GridBuilder::new(*space, axes, n, total);
    let mut cache: std::collections::HashMap<usize, Axis> = std::collections::HashMap::new();
    for (scale, us, w_outer, counts) in plan {
        let angle_axes: Vec<Axis> = counts
            .iter()
            .map(|&c| cache.entry(c).or_insert_with(|| angle_axis(c)).clone())
            .collect();
        for_each_tensor(&angle_axes, |angles, w| {
            if space.is_ball() {
                let mut vals = angles.to_vec();
                vals.extend_from_slice(&us);
                let (coords, gaps) = sphere_point(n, &vals, scale);
                let norm_gap = if bergman { gap_of_modulus_sq(scale) } else { 0.0 };
                builder.push(&coords, &gaps, norm_gap, w * w_outer);
            } else {
                let coords: Vec<Complex64> = angles.iter().map(|&t| Complex64::from_polar(1.0, t)).collect();
                builder.push(&coords, &vec![0.0; n], 1.0 - (n as f64).sqrt(), w * w_outer);
            }
        });
    }
    Ok(builder.finish())
}

fn sphere_axes(n: usize, axes: &[usize]) -> Vec<Axis> {
    let mut out: Vec<Axis> = axes[..n].iter().map(|&m| angle_axis(m)).collect();
    for (i, &m) in axes[n..].iter().enumerate() {
        // collapsed coordinate u_{i+1} carries (1 - u)^{n - 2 - i}
        out.push(jacobi_axis(m, (n - 2 - i) as f64, 0.0));
    }
    out
}

/// Point `sqrt(scale * t_j) e^{i theta_j}` on the sphere of radius
/// `sqrt(scale)`, from angles and collapsed simplex coordinates.
fn sphere_point(n: usize, vals: &[f64], scale: f64) -> (Vec<Complex64>, Vec<f64>) {
    let (angles, us) = vals.split_at(n);
    let mut t = Vec::with_capacity(n);
    let mut rest = 1.0;
    for &u in us {
        t.push(rest * u);
        rest *= 1.0 - u;
    }
    t.push(rest);
    let coords = t
        .iter()
        .zip(angles)
        .map(|(&tj, &th)| Complex64::from_polar((scale * tj).sqrt(), th))
        .collect();
    let gaps = t.iter().map(|&tj| gap_of_modulus_sq(scale * tj)).collect();
    (coords, gaps)
}

fn for_each_tensor(axes: &[Axis], mut f: impl FnMut(&[f64], f64)) {
    let mut idx = vec![0usize; axes.len()];
    let mut vals: Vec<f64> = axes.iter().map(|a| a.values[0]).collect();
    loop {
        let w: f64 = idx.iter().zip(axes).map(|(&i, a)| a.weights[i]).product();
        f(&vals, w);
        let mut d = axes.len();
        loop {
            if d == 0 {
                return;
            }
            d -= 1;
            idx[d] += 1;
            if idx[d] < axes[d].values.len() {
                vals[d] = axes[d].values[idx[d]];
                break;
            }
            idx[d] = 0;
            vals[d] = axes[d].values[0];
        }
    }
}

struct GridBuilder {
    space: Space,
    axes: Vec<usize>,
    dim: usize,
    coords: Vec<Complex64>,
    coord_gaps: Vec<f64>,
    norm_gaps: Vec<f64>,
    weights: Vec<f64>,
}

impl GridBuilder {
    fn new(space: Space, axes: Vec<usize>, dim: usize, nodes: usize) -> Self {
        GridBuilder {
            space,
            axes,
            dim,
            coords: Vec::with_capacity(nodes * dim),
            coord_gaps: Vec::with_capacity(nodes * dim),
            norm_gaps: Vec::with_capacity(nodes),
            weights: Vec::with_capacity(nodes),
        }
    }

    fn push(&mut self, coords: &[Complex64], gaps: &[f64], norm_gap: f64, w: f64) {
        self.coords.extend_from_slice(coords);
        self.coord_gaps.extend_from_slice(gaps);
        self.norm_gaps.push(norm_gap);
        self.weights.push(w);
    }

    fn finish(mut self) -> QuadratureGrid {
        let total: f64 = self.weights.iter().sum();
        for w in self.weights.iter_mut() {
            *w /= total;
        }
        QuadratureGrid {
            space: self.space,
            axes: self.axes,
            dim: self.dim,
            coords: self.coords,
            coord_gaps: self.coord_gaps,
            norm_gaps: self.norm_gaps,
            weights: self.weights,
        }
    }
}

fn check_space(expected: &Space, given: &Space) -> Result<()> {
    if expected != given {
        return Err(Error::SpaceMismatch {
            expected: expected.to_string(),
            given: given.to_string(),
        });
    }
    Ok(())
}

/// `(sum_j w_j |g(node_j)|^q)^{1/q}` for an arbitrary pointwise-evaluable `g`.
pub fn function_norm(
    grid: &QuadratureGrid,
    q: f64,
    mut g: impl FnMut(PointView<'_>) -> Result<Complex64>,
) -> Result<f64> {
    if !(q >= 1.0 && q.is_finite()) {
        return Err(Error::UnsupportedExponent(q));
    }
    let mut acc = 0.0;
    for j in 0..grid.len() {
        let v = g(grid.node(j))?;
        acc += grid.weights[j] * lp_power(v.norm_sqr(), q);
    }
    Ok(acc.powf(1.0 / q))
}

#[inline]
fn lp_power(m2: f64, q: f64) -> f64 {
    if q == 2.0 {
        m2
    } else {
        m2.powf(0.5 * q)
    }
}

/// Quadrature value of `||f||_q` for a finite kernel combination.
pub fn space_norm(f: &KernelCoeffs, grid: &QuadratureGrid, q: f64) -> Result<f64> {
    check_space(&grid.space, &f.space)?;
    if f.seq.is_empty() {
        return Ok(0.0);
    }
    let op = SynthesisOperator::from_kernels(f.exponent, &f.seq, grid)?;
    if !(q >= 1.0 && q.is_finite()) {
        return Err(Error::UnsupportedExponent(q));
    }
    Ok(op.norm(&f.coeffs, q))
}

/// Gradient of [`space_norm`] with respect to the coefficients.
///
/// Convention: entry `a` is `d/dRe(c_a) + i d/dIm(c_a)`. Zero at `f = 0`.
pub fn norm_gradient(f: &KernelCoeffs, grid: &QuadratureGrid, q: f64) -> Result<Vec<Complex64>> {
    check_space(&grid.space, &f.space)?;
    if !(q > 1.0 && q.is_finite()) {
        return Err(Error::UnsupportedExponent(q));
    }
    if f.seq.is_empty() {
        return Ok(Vec::new());
    }
    let op = SynthesisOperator::from_kernels(f.exponent, &f.seq, grid)?;
    Ok(op.norm_and_gradient(&f.coeffs, q).1)
}

/// Largest dense synthesis matrix, in complex entries.
pub const MAX_DENSE_ENTRIES: usize = 100_000_000;

/// Linear map `mu -> L mu` into a weighted `l^q` space. Used both for
/// kernel synthesis on quadrature nodes and for finite Grammians.
///
/// On tensor grids of `D^2` the kernels factor as `u(z_1) v(z_2)` and the
/// map is stored as the two factor matrices, so that `L mu` is the
/// `M_1 x M_2` matrix `U diag(mu) V^T`.
#[derive(Clone, Debug)]
pub struct SynthesisOperator {
    rows: usize,
    cols: usize,
    repr: Repr,
    weights: Vec<f64>,
}

#[derive(Clone, Debug)]
enum Repr {
    /// Row-major `rows x cols`.
    Dense(Vec<Complex64>),
    Product(Box<Factors>),
}

#[derive(Clone, Debug)]
/// Complex products take three real GEMMs: with `t1 = A C`, `t2 = B D` and
/// `t3 = (A + B)(C + D)`, `(A + iB)(C + iD) = (t1 - t2) + i(t3 - t1 - t2)`.
struct Factors {
    ur: DMatrix<f64>,
    ui: DMatrix<f64>,
    vr: DMatrix<f64>,
    vi: DMatrix<f64>,
    /// `vr - vi`, for products with `conj(V)`.
    vd: DMatrix<f64>,
    /// `v` transposed and `vtr + vti`, for the forward product.
    vtr: DMatrix<f64>,
    vti: DMatrix<f64>,
    vts: DMatrix<f64>,
}

impl Factors {
    fn new(u: &[Vec<Complex64>], v: &[Vec<Complex64>], cols: usize) -> Self {
        let part = |f: &[Vec<Complex64>], im: bool| {
            DMatrix::from_fn(f.len(), cols, |r, c| if im { f[r][c].im } else { f[r][c].re })
        };
        let (vr, vi) = (part(v, false), part(v, true));
        let (vtr, vti) = (vr.transpose(), vi.transpose());
        Factors {
            ur: part(u, false),
            ui: part(u, true),
            vd: &vr - &vi,
            vts: &vtr + &vti,
            vtr,
            vti,
            vr,
            vi,
        }
    }

    /// Real and imaginary parts of `U diag(mu) V^T`.
    fn apply(&self, mu: &[Complex64]) -> (DMatrix<f64>, DMatrix<f64>) {
        let (m1, m2) = (self.ur.nrows(), self.vr.nrows());
        let mut ar = self.ur.clone();
        let mut ai = self.ui.clone();
        for (c, m) in mu.iter().enumerate() {
            for r in 0..m1 {
                let (x, y) = (self.ur[(r, c)], self.ui[(r, c)]);
                ar[(r, c)] = x * m.re - y * m.im;
                ai[(r, c)] = x * m.im + y * m.re;
            }
        }
        let mut fr = DMatrix::zeros(m1, m2);
        let mut t2 = DMatrix::zeros(m1, m2);
        let mut fi = DMatrix::zeros(m1, m2);
        fr.gemm(1.0, &ar, &self.vtr, 0.0);
        t2.gemm(1.0, &ai, &self.vti, 0.0);
        ar += &ai;
        fi.gemm(1.0, &ar, &self.vts, 0.0);
        for ((re, im), b) in fr.iter_mut().zip(fi.iter_mut()).zip(t2.iter()) {
            *im -= *re + b;
            *re -= b;
        }
        (fr, fi)
    }
}

/// `(u, v)` factor tables of a `D^2` tensor grid with uniform weights.
fn product_factors(seq: &PointSeq, grid: &QuadratureGrid, scales: &[f64]) -> Result<Option<Factors>> {
    if grid.space != (Space::HardyPolydisc { n: 2 }) || grid.axes.len() != 2 {
        return Ok(None);
    }
    let (m1, m2) = (grid.axes[0], grid.axes[1]);
    if m1 * m2 != grid.len() || grid.weights.iter().any(|&w| w != grid.weights[0]) {
        return Ok(None);
    }
    let table = |axis: usize, m: usize, stride: usize, scaled: bool| -> Result<Vec<Vec<Complex64>>> {
        (0..m)
            .map(|j| {
                let z = grid.node(j * stride);
                seq.points()
                    .iter()
                    .zip(scales)
                    .map(|(a, s)| {
                        let k = disc_factor(a.coords()[axis], a.coord_gaps()[axis], z.coords[axis], z.coord_gaps[axis])?;
                        Ok(if scaled { k * *s } else { k })
                    })
                    .collect()
            })
            .collect()
    };
    let u = table(0, m1, m2, true)?;
    let v = table(1, m2, 1, false)?;
    Ok(Some(Factors::new(&u, &v, seq.len())))
}

impl SynthesisOperator {
    /// `L[j][a] = k_{a,p}(node_j)`, weights from the grid.
    pub fn from_kernels(exponent: Exponent, seq: &PointSeq, grid: &QuadratureGrid) -> Result<Self> {
        check_space(&grid.space, &seq.space())?;
        let space = seq.space();
        let cols = seq.len();
        let scales: Vec<f64> = seq.points().iter().map(|a| normalizer(&space, exponent, a.view())).collect();
        if cols > 0 {
            if let Some(f) = product_factors(seq, grid, &scales)? {
                return Ok(SynthesisOperator {
                    rows: grid.len(),
                    cols,
                    repr: Repr::Product(Box::new(f)),
                    weights: grid.weights.clone(),
                });
            }
        }
        Self::dense(seq, grid, &scales)
    }

    fn dense(seq: &PointSeq, grid: &QuadratureGrid, scales: &[f64]) -> Result<Self> {
        let space = seq.space();
        let cols = seq.len();
        if grid.len().saturating_mul(cols) > MAX_DENSE_ENTRIES {
            return Err(Error::ResourceGuard(format!(
                "synthesis matrix of {} x {cols} exceeds {MAX_DENSE_ENTRIES} entries",
                grid.len()
            )));
        }
        let mut mat = Vec::with_capacity(grid.len() * cols);
        for j in 0..grid.len() {
            let z = grid.node(j);
            for (a, s) in seq.points().iter().zip(scales) {
                mat.push(kernel_view(&space, a.view(), z)? * *s);
            }
        }
        Ok(SynthesisOperator {
            rows: grid.len(),
            cols,
            repr: Repr::Dense(mat),
            weights: grid.weights.clone(),
        })
    }

    /// Row-major `rows x cols` matrix with unit weights.
    pub fn from_matrix(rows: usize, cols: usize, mat: Vec<Complex64>) -> Self {
        assert_eq!(mat.len(), rows * cols);
        SynthesisOperator {
            rows,
            cols,
            repr: Repr::Dense(mat),
            weights: vec![1.0; rows],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn apply(&self, mu: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(mu.len(), self.cols);
        match &self.repr {
            Repr::Dense(mat) => mat
                .chunks_exact(self.cols.max(1))
                .take(self.rows)
                .map(|row| row.iter().zip(mu).map(|(l, m)| l * m).sum())
                .collect(),
            Repr::Product(f) => {
                let (fr, fi) = f.apply(mu);
                let m2 = fr.ncols();
                (0..self.rows).map(|j| Complex64::new(fr[(j / m2, j % m2)], fi[(j / m2, j % m2)])).collect()
            }
        }
    }

    pub fn norm(&self, mu: &[Complex64], q: f64) -> f64 {
        let acc: f64 = match &self.repr {
            Repr::Dense(_) => self
                .apply(mu)
                .iter()
                .zip(&self.weights)
                .map(|(x, w)| w * lp_power(x.norm_sqr(), q))
                .sum(),
            Repr::Product(f) => {
                let (fr, fi) = f.apply(mu);
                let w = self.weights[0];
                fr.iter().zip(fi.iter()).map(|(x, y)| w * lp_power(x * x + y * y, q)).sum()
            }
        };
        acc.powf(1.0 / q)
    }

    /// Norm and its gradient in the packed convention of [`norm_gradient`].
    pub fn norm_and_gradient(&self, mu: &[Complex64], q: f64) -> (f64, Vec<Complex64>) {
        match &self.repr {
            Repr::Dense(mat) => self.dense_norm_and_gradient(mat, mu, q),
            Repr::Product(f) => self.product_norm_and_gradient(f, mu, q),
        }
    }

    fn dense_norm_and_gradient(&self, mat: &[Complex64], mu: &[Complex64], q: f64) -> (f64, Vec<Complex64>) {
        let v = self.apply(mu);
        let mut acc = 0.0;
        for (x, w) in v.iter().zip(&self.weights) {
            acc += w * lp_power(x.norm_sqr(), q);
        }
        let norm = acc.powf(1.0 / q);
        let mut grad = vec![Complex64::new(0.0, 0.0); self.cols];
        if norm == 0.0 {
            return (0.0, grad);
        }
        let scale = norm.powf(1.0 - q);
        for (j, x) in v.iter().enumerate() {
            let m = x.norm();
            if m < ZERO_SET_TOL {
                continue;
            }
            let c = x * (self.weights[j] * m.powf(q - 2.0) * scale);
            let row = &mat[j * self.cols..(j + 1) * self.cols];
            for (g, l) in grad.iter_mut().zip(row) {
                *g += c * l.conj();
            }
        }
        (norm, grad)
    }

    /// The gradient is `diag(U^H C conj(V))` with `C` the pointwise weight
    /// `w |F|^{q-2} F / ||F||^{q-1}`.
    fn product_norm_and_gradient(&self, f: &Factors, mu: &[Complex64], q: f64) -> (f64, Vec<Complex64>) {
        let (mut cr, mut ci) = f.apply(mu);
        let w = self.weights[0];
        // |F|^{q-2} = |F|^q / |F|^2, kept from the norm pass
        let mut ratio = Vec::with_capacity(cr.len());
        let mut acc = 0.0;
        for (x, y) in cr.iter().zip(ci.iter()) {
            let m2 = x * x + y * y;
            let pw = lp_power(m2, q);
            acc += w * pw;
            ratio.push(if m2 < ZERO_SET_TOL * ZERO_SET_TOL { 0.0 } else { pw / m2 });
        }
        let norm = acc.powf(1.0 / q);
        let mut grad = vec![Complex64::new(0.0, 0.0); self.cols];
        if norm == 0.0 {
            return (0.0, grad);
        }
        let scale = w * norm.powf(1.0 - q);
        for ((x, y), r) in cr.iter_mut().zip(ci.iter_mut()).zip(&ratio) {
            *x *= r * scale;
            *y *= r * scale;
        }
        let (m1, n) = (f.ur.nrows(), self.cols);
        // T = C conj(V)
        let mut tr = DMatrix::zeros(m1, n);
        let mut t2 = DMatrix::zeros(m1, n);
        let mut ti = DMatrix::zeros(m1, n);
        tr.gemm(1.0, &cr, &f.vr, 0.0);
        t2.gemm(1.0, &ci, &f.vi, 0.0);
        cr += &ci;
        ti.gemm(1.0, &cr, &f.vd, 0.0);
        for ((re, im), b) in tr.iter_mut().zip(ti.iter_mut()).zip(t2.iter()) {
            *im += b - *re;
            *re += b;
        }
        for (a, g) in grad.iter_mut().enumerate() {
            let (mut re, mut im) = (0.0, 0.0);
            for r in 0..m1 {
                let (ur, ui) = (f.ur[(r, a)], f.ui[(r, a)]);
                let (xr, xi) = (tr[(r, a)], ti[(r, a)]);
                re += ur * xr + ui * xi;
                im += ur * xi - ui * xr;
            }
            *g = Complex64::new(re, im);
        }
        (norm, grad)
    }

    /// `L^H W L`; the `q = 2` norm is `sqrt(mu^H (L^H W L) mu)`.
    pub fn weighted_gram(&self) -> DMatrix<Complex64> {
        let n = self.cols;
        let mut q = DMatrix::<Complex64>::zeros(n, n);
        match &self.repr {
            Repr::Dense(mat) => {
                for j in 0..self.rows {
                    let row = &mat[j * n..(j + 1) * n];
                    let w = self.weights[j];
                    for a in 0..n {
                        let ca = row[a].conj() * w;
                        for b in a..n {
                            q[(a, b)] += ca * row[b];
                        }
                    }
                }
            }
            Repr::Product(f) => {
                // entrywise product of the two factor Grams
                let gram = |re: &DMatrix<f64>, im: &DMatrix<f64>, a: usize, b: usize| -> Complex64 {
                    (0..re.nrows())
                        .map(|r| Complex64::new(re[(r, a)], -im[(r, a)]) * Complex64::new(re[(r, b)], im[(r, b)]))
                        .sum()
                };
                let w = self.weights[0];
                for a in 0..n {
                    for b in a..n {
                        q[(a, b)] = gram(&f.ur, &f.ui, a, b) * gram(&f.vr, &f.vi, a, b) * w;
                    }
                }
            }
        }
        for a in 0..n {
            for b in 0..a {
                q[(a, b)] = q[(b, a)].conj();
            }
            q[(a, a)].im = 0.0;
        }
        q
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spaces::Point;
    use approx::assert_abs_diff_eq;

    #[test]
    fn disc_grid_is_trapezoid() {
        let g = build_grid(&Space::HardyDisc, 8).unwrap();
        assert_eq!(g.len(), 8);
        for j in 0..8 {
            assert_eq!(g.weights()[j], 0.125);
            assert_abs_diff_eq!(g.node(j).coords[0].norm(), 1.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn node_counts_and_mass() {
        assert_eq!(build_grid(&Space::HardyPolydisc { n: 2 }, 16).unwrap().len(), 256);
        for space in [
            Space::HardyDisc,
            Space::HardyPolydisc { n: 3 },
            Space::HardyBall { n: 3 },
            Space::BergmanBall { n: 2, k: 1 },
        ] {
            let g = build_grid(&space, 6).unwrap();
            assert_abs_diff_eq!(g.weights().iter().sum::<f64>(), 1.0, epsilon = 1e-12);
            assert!(g.weights().iter().all(|&w| w > 0.0));
        }
    }

    #[test]
    fn resolution_floor() {
        assert!(matches!(build_grid(&Space::HardyDisc, 3), Err(Error::Config(_))));
    }

    #[test]
    fn gauss_jacobi_moments() {
        // int_0^1 s^m (1-s)^a s^b ds / B(b+1, a+1)
        let (x, w) = gauss_jacobi_unit(6, 2.0, 1.0);
        let beta = |p: f64, q: f64| {
            // B(p, q) for integer p, q
            let f = |n: f64| (1..n as usize).map(|i| i as f64).product::<f64>();
            f(p) * f(q) / f(p + q)
        };
        for m in 0..10 {
            let got: f64 = x.iter().zip(&w).map(|(s, w)| w * s.powi(m)).sum();
            let want = beta(m as f64 + 2.0, 3.0) / beta(2.0, 3.0);
            assert_abs_diff_eq!(got, want, epsilon = 1e-13);
        }
    }

    #[test]
    fn sphere_moments() {
        // normalized surface measure on S^5: E|z_1|^2 = 1/3, E|z_1|^4 = 2/(3*4)
        let g = build_grid(&Space::HardyBall { n: 3 }, 6).unwrap();
        let m2: f64 = (0..g.len()).map(|j| g.weights()[j] * g.node(j).coords[0].norm_sqr()).sum();
        let m4: f64 = (0..g.len()).map(|j| g.weights()[j] * g.node(j).coords[0].norm_sqr().powi(2)).sum();
        assert_abs_diff_eq!(m2, 1.0 / 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(m4, 1.0 / 6.0, epsilon = 1e-13);
        for j in 0..g.len() {
            let r2: f64 = g.node(j).coords.iter().map(|c| c.norm_sqr()).sum();
            assert_abs_diff_eq!(r2, 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn bergman_moments() {
        // A_1(B_2): E|z|^2 = n/(n+k+1) = 1/2
        let g = build_grid(&Space::BergmanBall { n: 2, k: 1 }, 6).unwrap();
        let m2: f64 = (0..g.len())
            .map(|j| g.weights()[j] * g.node(j).coords.iter().map(|c| c.norm_sqr()).sum::<f64>())
            .sum();
        assert_abs_diff_eq!(m2, 0.5, epsilon = 1e-14);
    }

    fn single(space: Space, p: f64, a: Point, c: Complex64) -> KernelCoeffs {
        let seq = PointSeq::new(space, vec![a]).unwrap();
        KernelCoeffs::new(Exponent::new(p).unwrap(), seq, vec![c]).unwrap()
    }

    #[test]
    fn constants_have_unit_norm() {
        for space in [Space::HardyDisc, Space::HardyBall { n: 2 }, Space::BergmanBall { n: 1, k: 2 }] {
            let f = single(space, 3.0, Point::new(vec![Complex64::new(0.0, 0.0); space.dim()]), 1.0.into());
            let g = build_grid(&space, 8).unwrap();
            for q in [1.0, 1.5, 2.0, 7.0] {
                assert_abs_diff_eq!(space_norm(&f, &g, q).unwrap(), 1.0, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn kernel_norms_in_disc() {
        let g = build_grid(&Space::HardyDisc, 512).unwrap();
        let a = Point::real(&[0.6]);
        let f = single(Space::HardyDisc, 2.0, a.clone(), 1.0.into());
        assert_abs_diff_eq!(space_norm(&f, &g, 2.0).unwrap(), 1.0, epsilon = 1e-6);
        let unnormalized = single(Space::HardyDisc, 2.0, a, (1.0 / 0.64f64.sqrt()).into());
        assert_abs_diff_eq!(space_norm(&unnormalized, &g, 2.0).unwrap(), 1.25, epsilon = 1e-6);
    }

    #[test]
    fn gradient_of_single_constant() {
        let g = build_grid(&Space::HardyDisc, 8).unwrap();
        let f = single(Space::HardyDisc, 2.0, Point::real(&[0.0]), 0.7.into());
        let grad = norm_gradient(&f, &g, 3.0).unwrap();
        assert_abs_diff_eq!(grad[0].re, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(grad[0].im, 0.0, epsilon = 1e-14);
        let zero = single(Space::HardyDisc, 2.0, Point::real(&[0.3]), 0.0.into());
        assert_eq!(norm_gradient(&zero, &g, 3.0).unwrap()[0], Complex64::new(0.0, 0.0));
        assert!(matches!(norm_gradient(&f, &g, 1.0), Err(Error::UnsupportedExponent(_))));
    }

    #[test]
    fn mismatched_space_is_reported() {
        let g = build_grid(&Space::HardyBall { n: 1 }, 8).unwrap();
        let f = single(Space::HardyDisc, 2.0, Point::real(&[0.0]), 1.0.into());
        assert!(matches!(space_norm(&f, &g, 2.0), Err(Error::SpaceMismatch { .. })));
    }

    #[test]
    fn factored_bidisc_matches_dense() {
        let space = Space::HardyPolydisc { n: 2 };
        let pts = vec![
            Point::new(vec![Complex64::new(0.5, 0.2), Complex64::new(-0.3, 0.6)]),
            Point::new(vec![Complex64::new(0.0, -0.9), Complex64::new(0.7, 0.1)]),
            Point::real(&[0.0, 0.0]),
        ];
        let seq = PointSeq::new(space, pts).unwrap();
        let grid = build_grid_axes(&space, &[24, 40]).unwrap();
        let p = Exponent::new(3.0).unwrap();
        let fast = SynthesisOperator::from_kernels(p, &seq, &grid).unwrap();
        assert!(matches!(fast.repr, Repr::Product(_)));
        let scales: Vec<f64> = seq.points().iter().map(|a| normalizer(&space, p, a.view())).collect();
        let slow = SynthesisOperator::dense(&seq, &grid, &scales).unwrap();
        let mu = [Complex64::new(0.3, -1.0), Complex64::new(2.0, 0.5), Complex64::new(-0.7, 0.0)];
        for (x, y) in fast.apply(&mu).iter().zip(slow.apply(&mu)) {
            assert!((x - y).norm() <= 1e-12 * (1.0 + y.norm()));
        }
        for q in [1.2, 2.0, 6.0] {
            let (a, ga) = fast.norm_and_gradient(&mu, q);
            let (b, gb) = slow.norm_and_gradient(&mu, q);
            assert_abs_diff_eq!(a, b, epsilon = 1e-12 * b);
            assert_abs_diff_eq!(fast.norm(&mu, q), b, epsilon = 1e-12 * b);
            for (x, y) in ga.iter().zip(&gb) {
                assert!((x - y).norm() <= 1e-11);
            }
        }
        assert!((fast.weighted_gram() - slow.weighted_gram()).camax() <= 1e-12);
    }

    #[test]
    fn node_guard() {
        let err = build_grid(&Space::HardyBall { n: 4 }, 64).unwrap_err();
        assert!(matches!(err, Error::ResourceGuard(_)));
    }
}
