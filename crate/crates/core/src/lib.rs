//! Reproducing kernels, Grammians and frame constants of Hardy and weighted
//! Bergman spaces on the disc, polydisc and ball, computed at finite
//! truncation.

pub mod carleson;
pub mod error;
pub mod experiment;
pub mod frame;
pub mod gram;
pub mod kernels;
pub mod quadrature;
mod random;
pub mod seqgen;
pub mod spaces;
pub mod subordination;

pub use error::{Error, Result};
pub use kernels::{Exponent, KernelCoeffs};
pub use spaces::{Point, PointSeq, Space};
