//! Reproducing kernels, the `chi` normalizer and normalized kernels.
//!
//! Conventions: `chi_a = 1 / k_a(a)` and `k_{a,p} = chi_a^{1/p'} k_a`, with
//! `p'` the conjugate exponent. Gram entries use the `H^2` (or `A^2_k`)
//! pairing, `<k_a, k_b> = k_a(b)`.

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{Error, Result};
use crate::spaces::{
    ball_one_minus, disc_one_minus, require_in_domain, Point, PointSeq, PointView, Space,
};

const POLE_TOL: f64 = 1e-300;
const CLOSED_DOMAIN_SLACK: f64 = 1e-12;

/// Lebesgue exponent `p > 1`. The conjugate is always derived.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize)]
#[serde(transparent)]
pub struct Exponent(f64);

impl Exponent {
    pub fn new(p: f64) -> Result<Self> {
        if !(p.is_finite() && p > 1.0) {
            return Err(Error::Config(format!("exponent must satisfy 1 < p < inf, got {p}")));
        }
        Ok(Exponent(p))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// `p' = p / (p - 1)`.
    pub fn conjugate(self) -> Exponent {
        Exponent(self.0 / (self.0 - 1.0))
    }

    pub fn is_two(self) -> bool {
        self.0 == 2.0
    }
}

impl<'de> Deserialize<'de> for Exponent {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let p = f64::deserialize(d)?;
        Exponent::new(p).map_err(serde::de::Error::custom)
    }
}

fn check_closed(space: &Space, z: &Point) -> Result<()> {
    if z.dim() != space.dim() {
        return Err(Error::DimensionMismatch {
            expected: space.dim(),
            given: z.dim(),
        });
    }
    let inside = if space.is_ball() {
        z.norm_gap() >= -CLOSED_DOMAIN_SLACK
    } else {
        z.coord_gaps().iter().all(|&g| g >= -CLOSED_DOMAIN_SLACK)
    };
    if !inside {
        return Err(Error::OutsideDomain {
            space: space.to_string(),
            index: 1,
        });
    }
    Ok(())
}

/// `k_a(z)`: `prod_j 1/(1 - conj(a_j) z_j)` on the polydisc,
/// `1/(1 - <z, a>)^n` on `B_n`, `1/(1 - <z, a>)^(n+k+1)` for `A_k(B_n)`.
/// `a` must be interior; `z` may lie on the boundary.
pub fn eval_kernel(space: &Space, a: &Point, z: &Point) -> Result<Complex64> {
    require_in_domain(space, a, 0)?;
    check_closed(space, z)?;
    kernel_view(space, a.view(), z.view())
}

pub(crate) fn kernel_view(space: &Space, a: PointView<'_>, z: PointView<'_>) -> Result<Complex64> {
    let den = kernel_denominator(space, a, z);
    if den.norm() < POLE_TOL {
        return Err(Error::Singularity(den.norm()));
    }
    Ok(den.inv())
}

/// One coordinate factor `1 / (1 - conj(a_j) z_j)` of a polydisc kernel.
pub(crate) fn disc_factor(a: Complex64, ga: f64, z: Complex64, gz: f64) -> Result<Complex64> {
    let den = disc_one_minus(a, ga, z, gz);
    if den.norm() < POLE_TOL {
        return Err(Error::Singularity(den.norm()));
    }
    Ok(den.inv())
}

/// `1 / k_a(z)`, never singular for interior `a`.
#[inline]
pub(crate) fn kernel_denominator(space: &Space, a: PointView<'_>, z: PointView<'_>) -> Complex64 {
    if space.is_ball() {
        ball_one_minus(a, z).powi(space.ball_kernel_power())
    } else {
        let mut den = Complex64::new(1.0, 0.0);
        for j in 0..a.coords.len() {
            den *= disc_one_minus(a.coords[j], a.coord_gaps[j], z.coords[j], z.coord_gaps[j]);
        }
        den
    }
}

/// `chi_a = 1 / k_a(a)`, built from exact boundary gaps.
pub fn chi(space: &Space, a: &Point) -> Result<f64> {
    require_in_domain(space, a, 0)?;
    Ok(chi_view(space, a.view()))
}

pub(crate) fn chi_view(space: &Space, a: PointView<'_>) -> f64 {
    let defect = |g: f64| g * (2.0 - g);
    if space.is_ball() {
        defect(a.norm_gap).powi(space.ball_kernel_power())
    } else {
        a.coord_gaps.iter().map(|&g| defect(g)).product()
    }
}

/// `k_{a,p}(z) = chi_a^{1/p'} k_a(z)`.
pub fn eval_normalized_kernel(space: &Space, p: Exponent, a: &Point, z: &Point) -> Result<Complex64> {
    require_in_domain(space, a, 0)?;
    check_closed(space, z)?;
    let k = kernel_view(space, a.view(), z.view())?;
    Ok(k * normalizer(space, p, a.view()))
}

#[inline]
pub(crate) fn normalizer(space: &Space, p: Exponent, a: PointView<'_>) -> f64 {
    chi_view(space, a).powf(1.0 - 1.0 / p.value())
}

/// `G_{a,b} = <k_{a,p'}, k_{b,p}> = chi_a^{1/p} chi_b^{1/p'} k_a(b)`.
pub fn gram_entry(space: &Space, p: Exponent, a: &Point, b: &Point) -> Result<Complex64> {
    require_in_domain(space, a, 0)?;
    require_in_domain(space, b, 1)?;
    gram_entry_view(space, p, a.view(), b.view())
}

pub(crate) fn gram_entry_view(
    space: &Space,
    p: Exponent,
    a: PointView<'_>,
    b: PointView<'_>,
) -> Result<Complex64> {
    let inv_p = 1.0 / p.value();
    let scale = chi_view(space, a).powf(inv_p) * chi_view(space, b).powf(1.0 - inv_p);
    Ok(kernel_view(space, a, b)? * scale)
}

/// Finite combination `f = sum_a coeffs_a k_{a,p}` of normalized kernels.
#[derive(Clone, Debug)]
pub struct KernelCoeffs {
    pub space: Space,
    pub exponent: Exponent,
    pub seq: PointSeq,
    pub coeffs: Vec<Complex64>,
}

impl KernelCoeffs {
    pub fn new(exponent: Exponent, seq: PointSeq, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != seq.len() {
            return Err(Error::LengthMismatch {
                expected: seq.len(),
                given: coeffs.len(),
            });
        }
        if coeffs.iter().any(|c| !(c.re.is_finite() && c.im.is_finite())) {
            return Err(Error::Config("kernel coefficients must be finite".into()));
        }
        Ok(KernelCoeffs {
            space: seq.space(),
            exponent,
            seq,
            coeffs,
        })
    }

    /// Pointwise value `f(z)`.
    pub fn eval(&self, z: &Point) -> Result<Complex64> {
        check_closed(&self.space, z)?;
        self.eval_view(z.view())
    }

    pub(crate) fn eval_view(&self, z: PointView<'_>) -> Result<Complex64> {
        let mut acc = Complex64::new(0.0, 0.0);
        for (a, c) in self.seq.points().iter().zip(&self.coeffs) {
            if *c == Complex64::new(0.0, 0.0) {
                continue;
            }
            acc += c * kernel_view(&self.space, a.view(), z)? * normalizer(&self.space, self.exponent, a.view());
        }
        Ok(acc)
    }

    pub fn scaled(&self, s: Complex64) -> KernelCoeffs {
        KernelCoeffs {
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
            ..self.clone()
        }
    }
}
