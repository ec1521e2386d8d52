//! Lifting from `A_k(B_n)` to the Hardy space of `B_{n+k+1}`.
//!
//! A function `f` on `B_n` lifts to `f~(z, zeta) = f(z)` on the larger ball,
//! and points lift by zero padding. The Bergman kernel of `A_k(B_n)` and the
//! Szego kernel of `B_{n+k+1}` are both `(1 - <z, a>)^-(n+k+1)`, so kernels,
//! `chi` and Gram matrices agree exactly on lifted points.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::carleson::{box_constant, CarlesonReport};
use crate::error::{Error, Result};
use crate::frame::grid_axes_for;
use crate::kernels::{eval_kernel, KernelCoeffs};
use crate::quadrature::{build_grid_axes, space_norm};
use crate::spaces::{require_in_domain, Point, PointSeq, Space};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LiftMap {
    source: Space,
    target: Space,
}

impl LiftMap {
    pub fn new(source: Space) -> Result<Self> {
        source.validate()?;
        match source {
            Space::BergmanBall { n, k } => Ok(LiftMap {
                source,
                target: Space::HardyBall { n: n + k + 1 },
            }),
            other => Err(Error::UnsupportedSpace {
                op: "lift",
                space: other.to_string(),
            }),
        }
    }

    pub fn source(&self) -> Space {
        self.source
    }

    pub fn target(&self) -> Space {
        self.target
    }

    /// `a -> (a, 0, ..., 0)`.
    pub fn embed_point(&self, a: &Point) -> Result<Point> {
        require_in_domain(&self.source, a, 0)?;
        Ok(self.pad(a))
    }

    fn pad(&self, a: &Point) -> Point {
        let m = self.target.dim();
        let mut coords = a.coords().to_vec();
        coords.resize(m, Complex64::new(0.0, 0.0));
        let mut gaps = a.coord_gaps().to_vec();
        gaps.resize(m, 1.0);
        Point::from_parts(coords, gaps, a.norm_gap())
    }

    pub fn embed_seq(&self, seq: &PointSeq) -> Result<PointSeq> {
        self.check_source(seq.space())?;
        let pts = seq.points().iter().map(|a| self.pad(a)).collect();
        let lifted = PointSeq::new(self.target, pts)?;
        match seq.labels() {
            Some(l) => lifted.with_labels(l.to_vec()),
            None => Ok(lifted),
        }
    }

    /// The lift `f~` as a kernel combination on the target ball.
    pub fn lift_function(&self, f: &KernelCoeffs) -> Result<KernelCoeffs> {
        KernelCoeffs::new(f.exponent, self.embed_seq(&f.seq)?, f.coeffs.clone())
    }

    fn check_source(&self, given: Space) -> Result<()> {
        if given != self.source {
            return Err(Error::SpaceMismatch {
                expected: self.source.to_string(),
                given: given.to_string(),
            });
        }
        Ok(())
    }
}

/// `|k_a(z) - k~_{a~}(z~)|`.
pub fn kernel_agreement_check(lift: &LiftMap, a: &Point, z: &Point) -> Result<f64> {
    let src = eval_kernel(&lift.source, a, z)?;
    let tgt = eval_kernel(&lift.target, &lift.embed_point(a)?, &lift.embed_point(z)?)?;
    Ok((src - tgt).norm())
}

/// `||f~||_{H^q(B_{n+k+1})} / ||f||_{A^q_k(B_n)}`, both on grids derived
/// from the nominal resolution `res` by [`grid_axes_for`].
pub fn lift_norm_ratio(lift: &LiftMap, f: &KernelCoeffs, q: f64, res: usize) -> Result<f64> {
    lift.check_source(f.space)?;
    let src_grid = build_grid_axes(&lift.source, &grid_axes_for(&lift.source, res))?;
    let tgt_grid = build_grid_axes(&lift.target, &grid_axes_for(&lift.target, res))?;
    let below = space_norm(f, &src_grid, q)?;
    let above = space_norm(&lift.lift_function(f)?, &tgt_grid, q)?;
    if !(below > 0.0) {
        return Err(Error::Config("cannot take the norm ratio of the zero function".into()));
    }
    Ok(above / below)
}

/// Box constants of `mu_S` in the source and of `mu_S~` in the target.
pub fn lift_carleson_check(lift: &LiftMap, seq: &PointSeq, depth: u32) -> Result<(CarlesonReport, CarlesonReport)> {
    lift.check_source(seq.space())?;
    Ok((box_constant(seq, depth)?, box_constant(&lift.embed_seq(seq)?, depth)?))
}
