//! Grammians, exact `p = 2` frame constants, dual systems, minimal-norm
//! interpolation and the finite extension operator.

use nalgebra::{DMatrix, SymmetricEigen, SVD};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{chi_view, gram_entry_view, Exponent, KernelCoeffs};
use crate::quadrature::{QuadratureGrid, SynthesisOperator};
use crate::random::{complex_gaussian_vec, lp_normalize};
use crate::spaces::{PointSeq, Space};

/// Pairing matrices whose condition number exceeds this are rejected.
pub const CONDITION_LIMIT: f64 = 1e12;

#[derive(Clone, Debug)]
pub struct GramMatrix {
    pub space: Space,
    pub p: Exponent,
    pub seq: PointSeq,
    /// `entries[(i, j)] = <k_{a_i,p'}, k_{a_j,p}>`.
    pub entries: DMatrix<Complex64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameMethod {
    Eigen2,
    Optimized,
}

/// Eigenvalues of the `p = 2` Grammian, attached to optimized reports.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectralReference {
    pub lambda_min: f64,
    pub lambda_max: f64,
}

/// Lower and upper synthesis constants of a kernel system.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameReport {
    pub lower: f64,
    pub upper: f64,
    pub method: FrameMethod,
    pub restarts_used: usize,
    pub iterations: usize,
    pub converged: bool,
    pub reference: Option<SpectralReference>,
}

fn require_space(space: &Space, seq: &PointSeq) -> Result<()> {
    if *space != seq.space() {
        return Err(Error::SpaceMismatch {
            expected: space.to_string(),
            given: seq.space().to_string(),
        });
    }
    Ok(())
}

fn matrix_from(
    seq: &PointSeq,
    mut entry: impl FnMut(usize, usize) -> Result<Complex64>,
) -> Result<DMatrix<Complex64>> {
    let n = seq.len();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] = entry(i, j)?;
        }
    }
    Ok(m)
}

pub fn build_gram(space: &Space, p: Exponent, seq: &PointSeq) -> Result<GramMatrix> {
    require_space(space, seq)?;
    if seq.is_empty() {
        return Err(Error::EmptySequence);
    }
    let pts = seq.points();
    let mut entries = matrix_from(seq, |i, j| {
        if i == j {
            Ok(Complex64::new(1.0, 0.0))
        } else {
            gram_entry_view(space, p, pts[i].view(), pts[j].view())
        }
    })?;
    if p.is_two() {
        // exact Hermitian symmetry
        for i in 0..pts.len() {
            for j in 0..i {
                entries[(i, j)] = entries[(j, i)].conj();
            }
        }
    }
    Ok(GramMatrix {
        space: *space,
        p,
        seq: seq.clone(),
        entries,
    })
}

/// Smallest and largest eigenvalue of a Hermitian matrix.
pub fn hermitian_extremes(m: &DMatrix<Complex64>) -> (f64, f64) {
    let eig = SymmetricEigen::new(m.clone());
    let lo = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = eig.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

/// Ratio of extreme singular values.
pub fn condition_number(m: &DMatrix<Complex64>) -> f64 {
    let sv = SVD::new(m.clone(), false, false).singular_values;
    let hi = sv.iter().copied().fold(0.0, f64::max);
    let lo = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if lo == 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

/// Exact `p = 2` constants: `sqrt(lambda_min(G))` and `sqrt(lambda_max(G))`,
/// since `||sum mu_a k_{a,2}||^2` is the Gram quadratic form.
pub fn spectral_bounds(g: &GramMatrix) -> Result<FrameReport> {
    if !g.p.is_two() {
        return Err(Error::WrongMethod(g.p.value()));
    }
    let (lo, hi) = hermitian_extremes(&g.entries);
    Ok(FrameReport {
        lower: lo.max(0.0).sqrt(),
        upper: hi.max(0.0).sqrt(),
        method: FrameMethod::Eigen2,
        restarts_used: 0,
        iterations: 0,
        converged: true,
        reference: Some(SpectralReference {
            lambda_min: lo,
            lambda_max: hi,
        }),
    })
}

/// `M[c][b] = <k_{c,p}, k_{b,p'}>`.
pub fn pairing_matrix(space: &Space, p: Exponent, seq: &PointSeq) -> Result<DMatrix<Complex64>> {
    let pts = seq.points();
    let pc = p.conjugate();
    matrix_from(seq, |c, b| {
        if c == b {
            Ok(Complex64::new(1.0, 0.0))
        } else {
            gram_entry_view(space, pc, pts[c].view(), pts[b].view())
        }
    })
}

/// Dual system `rho_a = sum_c A[c][a] k_{c,p}` biorthogonal to `{k_{b,p'}}`.
#[derive(Clone, Debug)]
pub struct DualSystem {
    pub space: Space,
    pub p: Exponent,
    pub seq: PointSeq,
    pub dual_coeffs: DMatrix<Complex64>,
    pub pairing: DMatrix<Complex64>,
    pub condition: f64,
}

pub fn dual_system(space: &Space, p: Exponent, seq: &PointSeq) -> Result<DualSystem> {
    require_space(space, seq)?;
    if seq.is_empty() {
        return Err(Error::EmptySequence);
    }
    let pairing = pairing_matrix(space, p, seq)?;
    let condition = condition_number(&pairing);
    if !(condition <= CONDITION_LIMIT) {
        return Err(Error::Degenerate {
            condition,
            threshold: CONDITION_LIMIT,
        });
    }
    let dual_coeffs = pairing
        .transpose()
        .try_inverse()
        .ok_or(Error::Degenerate {
            condition,
            threshold: CONDITION_LIMIT,
        })?;
    Ok(DualSystem {
        space: *space,
        p,
        seq: seq.clone(),
        dual_coeffs,
        pairing,
        condition,
    })
}

impl DualSystem {
    pub fn len(&self) -> usize {
        self.seq.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seq.is_empty()
    }

    /// `max |<rho_a, k_{b,p'}> - delta_ab|`, from `A^T M`.
    pub fn biorthogonality_residual(&self) -> f64 {
        let prod = self.dual_coeffs.transpose() * &self.pairing;
        let n = self.len();
        let mut worst: f64 = 0.0;
        for a in 0..n {
            for b in 0..n {
                let target = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((prod[(a, b)] - target).norm());
            }
        }
        worst
    }

    /// `rho_a` as a kernel combination.
    pub fn dual_function(&self, a: usize) -> Result<KernelCoeffs> {
        let coeffs = self.dual_coeffs.column(a).iter().copied().collect();
        KernelCoeffs::new(self.p, self.seq.clone(), coeffs)
    }

    /// `E(lambda) = sum_a lambda_a rho_a`.
    pub fn extension(&self, lambda: &[Complex64]) -> Result<KernelCoeffs> {
        if lambda.len() != self.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                given: lambda.len(),
            });
        }
        let coeffs = (0..self.len())
            .map(|c| (0..self.len()).map(|a| self.dual_coeffs[(c, a)] * lambda[a]).sum())
            .collect();
        KernelCoeffs::new(self.p, self.seq.clone(), coeffs)
    }

    /// Restriction `{<f, k_{b,p'}>}_b = {chi_b^{1/p} f(b)}_b`.
    pub fn restrict(&self, f: &KernelCoeffs) -> Result<Vec<Complex64>> {
        if f.space != self.space {
            return Err(Error::SpaceMismatch {
                expected: self.space.to_string(),
                given: f.space.to_string(),
            });
        }
        let inv_p = 1.0 / self.p.value();
        self.seq
            .points()
            .iter()
            .map(|b| Ok(f.eval_view(b.view())? * chi_view(&self.space, b.view()).powf(inv_p)))
            .collect()
    }

    /// `P f = E(R f)`, the projection onto the span of the `k_{a,p}`.
    pub fn project(&self, f: &KernelCoeffs) -> Result<KernelCoeffs> {
        self.extension(&self.restrict(f)?)
    }

    /// Quadrature norms `||rho_a||_p`.
    pub fn dual_norms(&self, grid: &QuadratureGrid) -> Result<Vec<f64>> {
        let op = SynthesisOperator::from_kernels(self.p, &self.seq, grid)?;
        let q = self.p.value();
        Ok((0..self.len())
            .map(|a| {
                let col: Vec<Complex64> = self.dual_coeffs.column(a).iter().copied().collect();
                op.norm(&col, q)
            })
            .collect())
    }
}

/// Value of `E(lambda)` at `z`.
pub fn apply_extension(ds: &DualSystem, lambda: &[Complex64], z: &crate::spaces::Point) -> Result<Complex64> {
    ds.extension(lambda)?.eval(z)
}

/// Lower estimate of `||E||` from `l^p` to `H^p`: the largest ratio over the
/// canonical basis and `trials` seeded random unit vectors. The random
/// stream is nested, so the estimate never decreases as `trials` grows.
pub fn extension_norm_estimate(ds: &DualSystem, grid: &QuadratureGrid, trials: usize, seed: u64) -> Result<f64> {
    if trials == 0 {
        return Err(Error::Config("extension_norm_estimate needs trials >= 1".into()));
    }
    let op = SynthesisOperator::from_kernels(ds.p, &ds.seq, grid)?;
    let q = ds.p.value();
    let n = ds.len();
    let image = |lambda: &[Complex64]| -> f64 {
        let coeffs: Vec<Complex64> = (0..n)
            .map(|c| (0..n).map(|a| ds.dual_coeffs[(c, a)] * lambda[a]).sum())
            .collect();
        op.norm(&coeffs, q)
    };
    let mut best: f64 = 0.0;
    for a in 0..n {
        let mut e = vec![Complex64::new(0.0, 0.0); n];
        e[a] = Complex64::new(1.0, 0.0);
        best = best.max(image(&e));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..trials {
        let mut lambda = complex_gaussian_vec(&mut rng, n);
        lp_normalize(&mut lambda, q);
        best = best.max(image(&lambda));
    }
    Ok(best)
}

#[derive(Clone, Debug)]
pub struct MinNormInterpolant {
    pub f: KernelCoeffs,
    pub norm: f64,
    /// `max_a |<f, k_{a,2}> - target_a|`.
    pub residual: f64,
}

/// Minimal `H^2` norm solution of `<f, k_{a,2}> = target_a`. It lies in the
/// span of the `k_{a,2}`, with coefficients solving `G^T c = target`.
pub fn min_norm_interpolant(space: &Space, seq: &PointSeq, target: &[Complex64]) -> Result<MinNormInterpolant> {
    let two = Exponent::new(2.0)?;
    let g = build_gram(space, two, seq)?;
    if target.len() != seq.len() {
        return Err(Error::LengthMismatch {
            expected: seq.len(),
            given: target.len(),
        });
    }
    let condition = condition_number(&g.entries);
    if !(condition <= CONDITION_LIMIT) {
        return Err(Error::Degenerate {
            condition,
            threshold: CONDITION_LIMIT,
        });
    }
    let gt = g.entries.transpose();
    let rhs = nalgebra::DVector::from_column_slice(target);
    let c = gt.clone().lu().solve(&rhs).ok_or(Error::Degenerate {
        condition,
        threshold: CONDITION_LIMIT,
    })?;
    let residual = (&gt * &c - &rhs).iter().map(|x| x.norm()).fold(0.0, f64::max);
    // ||f||^2 = sum_{a,b} c_a conj(c_b) G_ab
    let mut quad = Complex64::new(0.0, 0.0);
    for a in 0..seq.len() {
        for b in 0..seq.len() {
            quad += c[a] * c[b].conj() * g.entries[(a, b)];
        }
    }
    let f = KernelCoeffs::new(two, seq.clone(), c.iter().copied().collect())?;
    Ok(MinNormInterpolant {
        f,
        norm: quad.re.max(0.0).sqrt(),
        residual,
    })
}

/// `sup_{||lambda||_2 = 1} ||f_min(lambda)||_2 = sqrt(lambda_max(G^{-1}))`.
pub fn interpolation_constant(space: &Space, seq: &PointSeq) -> Result<f64> {
    let g = build_gram(space, Exponent::new(2.0)?, seq)?;
    let condition = condition_number(&g.entries);
    let inv = g.entries.clone().try_inverse().filter(|_| condition <= CONDITION_LIMIT).ok_or(
        Error::Degenerate {
            condition,
            threshold: CONDITION_LIMIT,
        },
    )?;
    let herm = (&inv + inv.adjoint()) * Complex64::new(0.5, 0.0);
    Ok(hermitian_extremes(&herm).1.sqrt())
}
