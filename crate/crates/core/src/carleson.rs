//! Carleson diagnostics for finite sequences.
//!
//! The measure attached to a sequence is `mu_S = sum_a chi_a delta_a`. Box
//! constants are maxima of `mu_S(T(Q)) / cap(Q)` over fixed finite families:
//!
//! * disc: dyadic arcs `Q` of length `2 pi 2^-l`, `l = 0..=depth`, with tent
//!   `T(Q) = {z : 1 - |z| <= 2^-l, arg z in Q}` and `cap(Q) = 2^-l`;
//! * polydisc: products of one-variable tents with independent levels and
//!   `cap = prod_j 2^-l_j`. Chang's condition needs arbitrary open sets, so
//!   this is only a necessary condition and the report says so;
//! * balls: Koranyi boxes `{z : |1 - <z, zeta>| < h}` with `h = 2^(1-l)` and
//!   `cap = h^m`, where `m` is the kernel power (`n` for `H(B_n)`,
//!   `n + k + 1` for `A_k(B_n)`). Centers are the coordinate axes, a fixed
//!   seeded net of `NET_SIZE` directions and the directions of the points.
//!
//! Every family is nested in `depth`, so the constant is monotone in it.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::chi_view;
use crate::random::complex_gaussian_vec;
use crate::spaces::{ball_one_minus, PointSeq, PointView, Space};

pub const MAX_DEPTH: u32 = 30;
pub const NET_SIZE: usize = 48;
const NET_SEED: u64 = 0x6b6f_7261_6e79_6921;
const MAX_PRODUCT_BOXES: f64 = 5e7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoxFamily {
    DyadicArcs,
    ProductArcs,
    Koranyi,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxDescriptor {
    /// Boundary center: arc midpoints per coordinate, or `zeta` for a Koranyi box.
    pub center: Vec<Complex64>,
    /// Arc lengths per coordinate, or the single radius `h`.
    pub size: Vec<f64>,
    pub levels: Vec<u32>,
    pub mass: f64,
    pub capacity: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CarlesonReport {
    /// Carleson product, disc only.
    pub delta: Option<f64>,
    pub box_constant: f64,
    pub box_family_depth: u32,
    pub family: BoxFamily,
    /// `true` when a small constant does not certify a Carleson measure.
    pub necessary_only: bool,
    pub worst_box: Option<BoxDescriptor>,
}

/// `inf_b prod_{a != b} rho(a, b)` on the disc. Empty products are 1.
pub fn delta_product(seq: &PointSeq) -> Result<f64> {
    let space = seq.space();
    if space != Space::HardyDisc {
        return Err(Error::UnsupportedSpace {
            op: "delta_product",
            space: space.to_string(),
        });
    }
    let pts = seq.points();
    let mut delta: f64 = 1.0;
    for (i, b) in pts.iter().enumerate() {
        let mut prod = 1.0;
        for (j, a) in pts.iter().enumerate() {
            if i != j {
                prod *= crate::spaces::distance_unchecked(&space, a.view(), b.view());
            }
        }
        delta = delta.min(prod);
    }
    Ok(delta)
}

/// Weights of `mu_S`: `chi_a` at each point.
pub fn carleson_measure_weights(seq: &PointSeq) -> Vec<f64> {
    let space = seq.space();
    seq.points().iter().map(|a| chi_view(&space, a.view())).collect()
}

/// Box constant of `mu_S` over the family of the sequence's space.
pub fn box_constant(seq: &PointSeq, depth: u32) -> Result<CarlesonReport> {
    box_constant_weighted(seq, &carleson_measure_weights(seq), depth)
}

/// Box constant of `sum_a w_a delta_a` for arbitrary nonnegative weights.
pub fn box_constant_weighted(seq: &PointSeq, weights: &[f64], depth: u32) -> Result<CarlesonReport> {
    if depth < 1 {
        return Err(Error::Config("box family depth must be at least 1".into()));
    }
    if depth > MAX_DEPTH {
        return Err(Error::ResourceGuard(format!(
            "box family depth {depth} exceeds the limit {MAX_DEPTH}"
        )));
    }
    if weights.len() != seq.len() {
        return Err(Error::LengthMismatch {
            expected: seq.len(),
            given: weights.len(),
        });
    }
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::Config("measure weights must be finite and nonnegative".into()));
    }
    let space = seq.space();
    let (best, family, necessary_only) = match space {
        Space::HardyDisc => (product_boxes(seq, weights, depth)?, BoxFamily::DyadicArcs, false),
        Space::HardyPolydisc { .. } => (product_boxes(seq, weights, depth)?, BoxFamily::ProductArcs, true),
        Space::HardyBall { .. } | Space::BergmanBall { .. } => {
            (koranyi_boxes(seq, weights, depth), BoxFamily::Koranyi, false)
        }
    };
    let delta = if space == Space::HardyDisc { Some(delta_product(seq)?) } else { None };
    Ok(CarlesonReport {
        delta,
        box_constant: best.as_ref().map_or(0.0, |b| b.mass / b.capacity),
        box_family_depth: depth,
        family,
        necessary_only,
        worst_box: best,
    })
}

fn keep_best(best: &mut Option<BoxDescriptor>, cand: BoxDescriptor) {
    let better = match best {
        None => cand.mass > 0.0,
        Some(b) => cand.mass / cand.capacity > b.mass / b.capacity,
    };
    if better {
        *best = Some(cand);
    }
}

/// Deepest dyadic level whose tent contains a point with boundary gap `g`.
fn deepest_level(g: f64, depth: u32) -> u32 {
    (0..=depth).take_while(|&l| g <= 0.5f64.powi(l as i32)).last().unwrap_or(0)
}

fn arc_index(z: Complex64, level: u32) -> u64 {
    let count = 1u64 << level;
    let theta = z.im.atan2(z.re).rem_euclid(2.0 * PI);
    ((theta / (2.0 * PI) * count as f64) as u64).min(count - 1)
}

fn product_boxes(seq: &PointSeq, weights: &[f64], depth: u32) -> Result<Option<BoxDescriptor>> {
    let n = seq.space().dim();
    let work = seq.len() as f64 * (depth as f64 + 1.0).powi(n as i32);
    if work > MAX_PRODUCT_BOXES {
        return Err(Error::ResourceGuard(format!(
            "product box family needs about {work:.0} box visits"
        )));
    }
    // key: per coordinate (level, arc index)
    let mut mass: BTreeMap<Vec<(u32, u64)>, f64> = BTreeMap::new();
    for (a, &w) in seq.points().iter().zip(weights) {
        if w == 0.0 {
            continue;
        }
        let tops: Vec<u32> = a.coord_gaps().iter().map(|&g| deepest_level(g, depth)).collect();
        let mut levels = vec![0u32; n];
        loop {
            let key: Vec<(u32, u64)> =
                (0..n).map(|j| (levels[j], arc_index(a.coords()[j], levels[j]))).collect();
            *mass.entry(key).or_insert(0.0) += w;
            let mut j = 0;
            while j < n && levels[j] == tops[j] {
                levels[j] = 0;
                j += 1;
            }
            if j == n {
                break;
            }
            levels[j] += 1;
        }
    }
    let mut best = None;
    for (key, m) in mass {
        let capacity: f64 = key.iter().map(|&(l, _)| 0.5f64.powi(l as i32)).product();
        let center = key
            .iter()
            .map(|&(l, i)| Complex64::from_polar(1.0, (i as f64 + 0.5) * 2.0 * PI / (1u64 << l) as f64))
            .collect();
        let size = key.iter().map(|&(l, _)| 2.0 * PI * 0.5f64.powi(l as i32)).collect();
        keep_best(
            &mut best,
            BoxDescriptor {
                center,
                size,
                levels: key.iter().map(|&(l, _)| l).collect(),
                mass: m,
                capacity,
            },
        );
    }
    Ok(best)
}

/// Coordinate axes, the seeded net, then the point directions.
fn koranyi_centers(seq: &PointSeq) -> Vec<Vec<Complex64>> {
    let n = seq.space().dim();
    let mut centers = Vec::new();
    for j in 0..n {
        let mut e = vec![Complex64::new(0.0, 0.0); n];
        e[j] = Complex64::new(1.0, 0.0);
        centers.push(e);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(NET_SEED);
    for _ in 0..NET_SIZE {
        centers.push(unit_vector(complex_gaussian_vec(&mut rng, n)));
    }
    for a in seq.points() {
        if a.norm() > 0.0 {
            centers.push(unit_vector(a.coords().to_vec()));
        }
    }
    centers
}

fn unit_vector(mut v: Vec<Complex64>) -> Vec<Complex64> {
    let m = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    v.iter_mut().for_each(|c| *c /= m);
    v
}

fn koranyi_boxes(seq: &PointSeq, weights: &[f64], depth: u32) -> Option<BoxDescriptor> {
    let space = seq.space();
    let power = space.ball_kernel_power();
    let n = space.dim();
    let mut best = None;
    for zeta in koranyi_centers(seq) {
        let zeta_view = PointView {
            coords: &zeta,
            coord_gaps: &vec![0.0; n],
            norm_gap: 0.0,
        };
        let reach: Vec<(f64, f64)> = seq
            .points()
            .iter()
            .zip(weights)
            .map(|(a, &w)| (ball_one_minus(zeta_view, a.view()).norm(), w))
            .collect();
        for l in 0..=depth {
            let h = 2.0 * 0.5f64.powi(l as i32);
            let m: f64 = reach.iter().filter(|(d, _)| *d < h).map(|(_, w)| w).sum();
            keep_best(
                &mut best,
                BoxDescriptor {
                    center: zeta.clone(),
                    size: vec![h],
                    levels: vec![l],
                    mass: m,
                    capacity: h.powi(power),
                },
            );
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spaces::Point;
    use approx::assert_abs_diff_eq;

    fn disc(xs: &[f64]) -> PointSeq {
        PointSeq::new(Space::HardyDisc, xs.iter().map(|&x| Point::real(&[x])).collect()).unwrap()
    }

    #[test]
    fn delta_examples() {
        assert_eq!(delta_product(&disc(&[0.3])).unwrap(), 1.0);
        assert_abs_diff_eq!(delta_product(&disc(&[0.0, 0.5])).unwrap(), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(delta_product(&disc(&[0.0, 0.5, -0.5])).unwrap(), 0.25, epsilon = 1e-15);
        let ball = PointSeq::new(Space::HardyBall { n: 2 }, vec![Point::real(&[0.0, 0.0])]).unwrap();
        assert!(matches!(delta_product(&ball), Err(Error::UnsupportedSpace { .. })));
    }

    #[test]
    fn measure_weights() {
        assert_abs_diff_eq!(carleson_measure_weights(&disc(&[0.9]))[0], 0.19, epsilon = 1e-15);
        let ball = PointSeq::new(Space::HardyBall { n: 2 }, vec![Point::real(&[0.5, 0.0])]).unwrap();
        assert_abs_diff_eq!(carleson_measure_weights(&ball)[0], 9.0 / 16.0, epsilon = 1e-15);
        for space in [Space::HardyPolydisc { n: 3 }, Space::BergmanBall { n: 2, k: 2 }] {
            let s = PointSeq::new(space, vec![Point::real(&vec![0.0; space.dim()])]).unwrap();
            assert_eq!(carleson_measure_weights(&s), vec![1.0]);
        }
    }

    #[test]
    fn origin_only_in_the_full_circle() {
        for depth in [1, 5, 30] {
            let rep = box_constant(&disc(&[0.0]), depth).unwrap();
            assert_eq!(rep.box_constant, 1.0);
            assert_eq!(rep.worst_box.unwrap().levels, vec![0]);
        }
    }

    #[test]
    fn single_point_near_the_boundary() {
        let rep = box_constant(&disc(&[0.99]), 1).unwrap();
        let chi = 1.0 - 0.99f64 * 0.99;
        assert_abs_diff_eq!(rep.box_constant, chi / 0.5, epsilon = 1e-15);
        assert_eq!(rep.worst_box.as_ref().unwrap().levels, vec![1]);
    }

    #[test]
    fn homogeneous_in_weights() {
        let s = disc(&[0.2, -0.7, 0.9]);
        let w = carleson_measure_weights(&s);
        let base = box_constant_weighted(&s, &w, 8).unwrap().box_constant;
        let scaled: Vec<f64> = w.iter().map(|x| x * 3.5).collect();
        let rep = box_constant_weighted(&s, &scaled, 8).unwrap();
        assert_abs_diff_eq!(rep.box_constant, 3.5 * base, epsilon = 1e-13);
    }

    #[test]
    fn monotone_in_depth() {
        let pts: Vec<Point> = (1..=12).map(|k| Point::disc_polar(0.7 * k as f64, 0.5f64.powi(k))).collect();
        let s = PointSeq::new(Space::HardyDisc, pts).unwrap();
        let mut prev = 0.0;
        for d in 1..=16 {
            let c = box_constant(&s, d).unwrap().box_constant;
            assert!(c >= prev);
            prev = c;
        }
        let ball = PointSeq::new(
            Space::HardyBall { n: 2 },
            vec![Point::real(&[0.9, 0.0]), Point::real(&[0.0, 0.95]), Point::real(&[0.5, 0.5])],
        )
        .unwrap();
        let mut prev = 0.0;
        for d in 1..=10 {
            let c = box_constant(&ball, d).unwrap().box_constant;
            assert!(c >= prev);
            prev = c;
        }
    }

    #[test]
    fn depth_guard_and_empty() {
        assert!(matches!(box_constant(&disc(&[0.1]), 31), Err(Error::ResourceGuard(_))));
        assert!(matches!(box_constant(&disc(&[0.1]), 0), Err(Error::Config(_))));
        let empty = PointSeq::new(Space::BergmanBall { n: 1, k: 0 }, vec![]).unwrap();
        let rep = box_constant(&empty, 4).unwrap();
        assert_eq!(rep.box_constant, 0.0);
        assert!(rep.worst_box.is_none());
    }

    #[test]
    fn polydisc_is_flagged_as_proxy() {
        let s = PointSeq::new(Space::HardyPolydisc { n: 2 }, vec![Point::real(&[0.5, -0.5])]).unwrap();
        let rep = box_constant(&s, 3).unwrap();
        assert!(rep.necessary_only);
        assert_eq!(rep.family, BoxFamily::ProductArcs);
        // chi = (3/4)^2 in the box with levels (1, 1)
        assert_abs_diff_eq!(rep.box_constant, 0.5625 / 0.25, epsilon = 1e-15);
        assert!(!box_constant(&disc(&[0.5]), 3).unwrap().necessary_only);
    }

    #[test]
    fn radial_family_stays_bounded() {
        let pts = |n: i32| (1..=n).map(|k| Point::disc_polar(0.0, 0.5f64.powi(k))).collect::<Vec<_>>();
        let c5 = box_constant(&PointSeq::new(Space::HardyDisc, pts(5)).unwrap(), 30).unwrap().box_constant;
        let c60 = box_constant(&PointSeq::new(Space::HardyDisc, pts(60)).unwrap(), 30).unwrap().box_constant;
        assert!(c60 <= 4.0 * c5, "{c60} vs {c5}");
    }
}
