//! Sequence generators and a truncated estimate of Seip's upper density.
//!
//! Density convention: for a separated sequence `S` in the disc,
//!
//! ```text
//! D+(S) = limsup_{r -> 1} sup_z  sum_{1/2 < rho(z,a) < r} log(1/rho(z,a)) / log(1/(1-r))
//! ```
//!
//! and `S` is interpolating for `A^p(D)` exactly when `D+(S) < 1/p`.
//! [`density_estimate`] evaluates the quotient on a finite radius ladder,
//! takes the sup over finitely many centers and reports the largest radius.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spaces::{distance_unchecked, gap_of_modulus_sq, Point, PointSeq, Space};

/// Default radius ladder of [`density_estimate`].
pub const DEFAULT_LADDER: [f64; 3] = [0.9, 0.99, 0.999];
pub const DEFAULT_CENTERS: usize = 64;
/// Attempts allowed per requested point in [`random_separated`].
pub const ATTEMPTS_PER_POINT: usize = 1000;
/// Default modulus cap of [`random_separated`].
pub const DEFAULT_RADIUS_CAP: f64 = 0.95;
/// Jitter amplitude, as a fraction of the angular step and of one ring.
const JITTER: f64 = 0.25;
/// Ring `m` is rotated by `frac(m * GOLDEN)` of its angular step so that
/// consecutive rings do not line up along a ray.
const GOLDEN: f64 = 0.618_033_988_749_894_8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeParams {
    pub sigma: f64,
    pub angular_density: f64,
    pub rings: u32,
    /// Seed of the optional jitter. `None` gives the exact lattice.
    #[serde(default)]
    pub seed: Option<u64>,
}

impl LatticeParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 1.0 && self.sigma.is_finite()) {
            return Err(Error::Config(format!("lattice sigma must exceed 1, got {}", self.sigma)));
        }
        if !(self.angular_density > 0.0 && self.angular_density.is_finite()) {
            return Err(Error::Config("lattice angular_density must be positive".into()));
        }
        if self.rings < 1 {
            return Err(Error::Config("lattice needs at least one ring".into()));
        }
        let last = self.sigma.powi(self.rings as i32);
        if !(last * self.angular_density * 2.0 * PI <= 1e7) || 1.0 / last < f64::MIN_POSITIVE {
            return Err(Error::Config("lattice is too large; reduce rings or sigma".into()));
        }
        Ok(())
    }

    /// Points on ring `m`: `ceil(angular_density * 2 pi sigma^m)`.
    pub fn ring_count(&self, m: u32) -> usize {
        (self.angular_density * 2.0 * PI * self.sigma.powi(m as i32)).ceil().max(1.0) as usize
    }
}

/// Rings `m = 1..=rings` at radius `1 - sigma^-m`, each with
/// [`LatticeParams::ring_count`] equally spaced angles, staggered from ring
/// to ring. Points are ordered
/// ring by ring, so truncations keep whole inner rings.
pub fn seip_lattice(params: &LatticeParams) -> Result<PointSeq> {
    params.validate()?;
    let mut rng = params.seed.map(ChaCha8Rng::seed_from_u64);
    let mut pts = Vec::new();
    for m in 1..=params.rings {
        let count = params.ring_count(m);
        let step = 2.0 * PI / count as f64;
        for j in 0..count {
            let offset = (m as f64 * GOLDEN).fract() * step;
            let (mut angle, mut gap) = (offset + j as f64 * step, params.sigma.powi(-(m as i32)));
            if let Some(rng) = rng.as_mut() {
                angle += JITTER * step * rng.random_range(-1.0..1.0);
                gap *= params.sigma.powf(JITTER * rng.random_range(-1.0..1.0));
            }
            pts.push(Point::disc_polar(angle, gap));
        }
    }
    PointSeq::new(Space::HardyDisc, pts)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensityEstimate {
    pub value: f64,
    pub r_ladder: Vec<f64>,
    /// Maximum over the centers, one entry per ladder radius.
    pub per_radius: Vec<f64>,
    pub sup_centers: usize,
}

/// Truncated `D+`. Centers are the origin followed by `centers - 1` seeded
/// draws (with replacement) from the sequence itself. The reported value is
/// the maximum over centers at the largest ladder radius; smaller radii are
/// dominated by the nearest neighbours and are kept in `per_radius` only.
pub fn density_estimate(seq: &PointSeq, r_ladder: &[f64], centers: usize, seed: u64) -> Result<DensityEstimate> {
    if seq.space().dim() != 1 {
        return Err(Error::UnsupportedSpace {
            op: "density_estimate",
            space: seq.space().to_string(),
        });
    }
    if r_ladder.is_empty() || r_ladder.iter().any(|&r| !(r > 0.5 && r < 1.0)) {
        return Err(Error::Config("density radii must lie in (1/2, 1)".into()));
    }
    if centers < 1 {
        return Err(Error::Config("density estimate needs at least one center".into()));
    }
    let empty = DensityEstimate {
        value: 0.0,
        r_ladder: r_ladder.to_vec(),
        per_radius: vec![0.0; r_ladder.len()],
        sup_centers: centers,
    };
    if seq.is_empty() {
        return Ok(empty);
    }
    let space = seq.space();
    let origin = Point::real(&[0.0]);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picks: Vec<&Point> = std::iter::once(&origin)
        .chain((1..centers).map(|_| &seq.points()[rng.random_range(0..seq.len())]))
        .collect();
    let mut per_radius = vec![0.0f64; r_ladder.len()];
    for z in picks {
        let rhos: Vec<f64> = seq.points().iter().map(|a| distance_unchecked(&space, z.view(), a.view())).collect();
        for (slot, &r) in per_radius.iter_mut().zip(r_ladder) {
            let num: f64 = rhos.iter().filter(|&&d| d > 0.5 && d < r).map(|d| -d.ln()).sum();
            *slot = slot.max(num / -(1.0 - r).ln());
        }
    }
    let outer = (0..r_ladder.len()).fold(0, |best, i| if r_ladder[i] > r_ladder[best] { i } else { best });
    Ok(DensityEstimate {
        value: per_radius[outer],
        per_radius,
        ..empty
    })
}

/// `r_k = 1 - base^k`, `k = 1..=count`, on the positive axis.
pub fn radial_geometric(count: usize, base: f64) -> Result<PointSeq> {
    if count < 1 {
        return Err(Error::Config("radial family needs count >= 1".into()));
    }
    if !(base > 0.0 && base < 1.0) {
        return Err(Error::Config(format!("radial base must lie in (0, 1), got {base}")));
    }
    let pts = (1..=count).map(|k| Point::disc_polar(0.0, base.powi(k as i32))).collect();
    PointSeq::new(Space::HardyDisc, pts)
}

/// `a -> (a, a)` from the disc into the bidisc.
pub fn diagonal_embed(seq: &PointSeq) -> Result<PointSeq> {
    if seq.space() != Space::HardyDisc {
        return Err(Error::UnsupportedSpace {
            op: "diagonal_embed",
            space: seq.space().to_string(),
        });
    }
    let pts = seq
        .points()
        .iter()
        .map(|a| {
            let (c, g) = (a.coords()[0], a.coord_gaps()[0]);
            Point::from_parts(vec![c, c], vec![g, g], gap_of_modulus_sq(2.0 * c.norm_sqr()))
        })
        .collect();
    let out = PointSeq::new(Space::HardyPolydisc { n: 2 }, pts)?;
    match seq.labels() {
        Some(l) => out.with_labels(l.to_vec()),
        None => Ok(out),
    }
}

/// Rejection sampling with pairwise distance at least `min_sep`, using
/// candidates of modulus at most [`DEFAULT_RADIUS_CAP`].
pub fn random_separated(space: &Space, count: usize, min_sep: f64, seed: u64) -> Result<PointSeq> {
    random_separated_within(space, count, min_sep, DEFAULT_RADIUS_CAP, seed)
}

/// As [`random_separated`] with an explicit cap: ball candidates are uniform
/// in `|z| <= cap`, product candidates uniform in each `|z_j| <= cap`.
pub fn random_separated_within(
    space: &Space,
    count: usize,
    min_sep: f64,
    cap: f64,
    seed: u64,
) -> Result<PointSeq> {
    space.validate()?;
    if count < 1 {
        return Err(Error::Config("random_separated needs count >= 1".into()));
    }
    if !(min_sep > 0.0 && min_sep < 1.0) {
        return Err(Error::Config(format!("min_sep must lie in (0, 1), got {min_sep}")));
    }
    if !(cap > 0.0 && cap < 1.0) {
        return Err(Error::Config(format!("radius cap must lie in (0, 1), got {cap}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let budget = ATTEMPTS_PER_POINT * count;
    let mut pts: Vec<Point> = Vec::with_capacity(count);
    for _ in 0..budget {
        let cand = sample_point(space, cap, &mut rng);
        if pts.iter().all(|p| distance_unchecked(space, p.view(), cand.view()) >= min_sep) {
            pts.push(cand);
            if pts.len() == count {
                return PointSeq::new(*space, pts);
            }
        }
    }
    Err(Error::Saturation {
        attempts: budget,
        placed: pts.len(),
        requested: count,
    })
}

fn uniform_in_disc(rng: &mut ChaCha8Rng, cap: f64) -> Complex64 {
    let r = cap * rng.random::<f64>().sqrt();
    Complex64::from_polar(r, 2.0 * PI * rng.random::<f64>())
}

fn sample_point(space: &Space, cap: f64, rng: &mut ChaCha8Rng) -> Point {
    let n = space.dim();
    if space.is_ball() {
        let dir: Vec<Complex64> = crate::random::complex_gaussian_vec(rng, n);
        let m = dir.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        let r = cap * rng.random::<f64>().powf(1.0 / (2 * n) as f64);
        Point::new(dir.iter().map(|c| c * (r / m)).collect())
    } else {
        Point::new((0..n).map(|_| uniform_in_disc(rng, cap)).collect())
    }
}
