//! Domains, points and the pseudohyperbolic metric.
//!
//! Points keep their distance to the boundary next to their coordinates.
//! A disc point at radius `1 - 2^-60` has coordinates that round to `1.0`,
//! but its gap `2^-60` is exact, and every kernel, normalizer and distance
//! in this crate is evaluated from gaps and unit directions rather than from
//! `1 - |a|^2` formed in floating point.

use std::collections::HashMap;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Function space on a bounded domain of `C^n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", from = "SpaceRepr")]
pub enum Space {
    HardyDisc,
    HardyPolydisc { n: usize },
    HardyBall { n: usize },
    /// Weighted Bergman space for the measure `(1 - |z|^2)^k dm` on `B_n`.
    BergmanBall { n: usize, k: usize },
}

// serde drops `deny_unknown_fields` on unit variants of tagged enums, so the
// disc is read as an empty struct variant
#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum SpaceRepr {
    HardyDisc {},
    HardyPolydisc { n: usize },
    HardyBall { n: usize },
    BergmanBall { n: usize, k: usize },
}

impl From<SpaceRepr> for Space {
    fn from(repr: SpaceRepr) -> Self {
        match repr {
            SpaceRepr::HardyDisc {} => Space::HardyDisc,
            SpaceRepr::HardyPolydisc { n } => Space::HardyPolydisc { n },
            SpaceRepr::HardyBall { n } => Space::HardyBall { n },
            SpaceRepr::BergmanBall { n, k } => Space::BergmanBall { n, k },
        }
    }
}

impl Space {
    pub fn dim(&self) -> usize {
        match *self {
            Space::HardyDisc => 1,
            Space::HardyPolydisc { n } | Space::HardyBall { n } | Space::BergmanBall { n, .. } => n,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim() == 0 {
            return Err(Error::Config(format!("{self}: dimension must be at least 1")));
        }
        Ok(())
    }

    /// True for spaces whose domain is the unit ball (metric and kernels use
    /// the Euclidean structure); false for the disc and polydisc.
    pub fn is_ball(&self) -> bool {
        matches!(self, Space::HardyBall { .. } | Space::BergmanBall { .. })
    }

    /// Power of `1 / (1 - <z, a>)` in the kernel (ball spaces only).
    pub(crate) fn ball_kernel_power(&self) -> i32 {
        match *self {
            Space::HardyBall { n } => n as i32,
            Space::BergmanBall { n, k } => (n + k + 1) as i32,
            _ => 1,
        }
    }
}

impl fmt::Display for Space {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Space::HardyDisc => write!(f, "H(D)"),
            Space::HardyPolydisc { n } => write!(f, "H(D^{n})"),
            Space::HardyBall { n } => write!(f, "H(B_{n})"),
            Space::BergmanBall { n, k } => write!(f, "A_{k}(B_{n})"),
        }
    }
}

/// Borrowed view of a point; quadrature grids hand these out without
/// allocating.
#[derive(Clone, Copy, Debug)]
pub struct PointView<'a> {
    pub coords: &'a [Complex64],
    /// `1 - |coords[j]|` per coordinate.
    pub coord_gaps: &'a [f64],
    /// `1 - |coords|` (Euclidean norm).
    pub norm_gap: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Point {
    coords: Vec<Complex64>,
    coord_gaps: Vec<f64>,
    norm_gap: f64,
}

pub(crate) fn gap_of_modulus_sq(m2: f64) -> f64 {
    (1.0 - m2) / (1.0 + m2.sqrt())
}

impl Point {
    pub fn new(coords: Vec<Complex64>) -> Self {
        let coord_gaps = coords.iter().map(|c| gap_of_modulus_sq(c.norm_sqr())).collect();
        let m2: f64 = coords.iter().map(|c| c.norm_sqr()).sum();
        Point {
            coords,
            coord_gaps,
            norm_gap: gap_of_modulus_sq(m2),
        }
    }

    pub fn real(coords: &[f64]) -> Self {
        Point::new(coords.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    /// One-variable point `(1 - gap) e^{i angle}` with the gap kept exactly.
    pub fn disc_polar(angle: f64, gap: f64) -> Self {
        let c = Complex64::from_polar(1.0 - gap, angle);
        Point {
            coords: vec![c],
            coord_gaps: vec![gap],
            norm_gap: gap,
        }
    }

    pub(crate) fn from_parts(coords: Vec<Complex64>, coord_gaps: Vec<f64>, norm_gap: f64) -> Self {
        Point {
            coords,
            coord_gaps,
            norm_gap,
        }
    }

    pub fn coords(&self) -> &[Complex64] {
        &self.coords
    }

    pub fn coord_gaps(&self) -> &[f64] {
        &self.coord_gaps
    }

    pub fn norm_gap(&self) -> f64 {
        self.norm_gap
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn view(&self) -> PointView<'_> {
        PointView {
            coords: &self.coords,
            coord_gaps: &self.coord_gaps,
            norm_gap: self.norm_gap,
        }
    }

    /// Euclidean norm recovered from the gap.
    pub fn norm(&self) -> f64 {
        1.0 - self.norm_gap
    }
}

impl Serialize for Point {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let pairs: Vec<[f64; 2]> = self.coords.iter().map(|c| [c.re, c.im]).collect();
        pairs.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Point {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let pairs = Vec::<[f64; 2]>::deserialize(d)?;
        Ok(Point::new(
            pairs.into_iter().map(|[re, im]| Complex64::new(re, im)).collect(),
        ))
    }
}

fn check_dim(space: &Space, given: usize) -> Result<()> {
    let expected = space.dim();
    if expected != given {
        return Err(Error::DimensionMismatch { expected, given });
    }
    Ok(())
}

pub(crate) fn view_in_domain(space: &Space, a: PointView<'_>) -> bool {
    if space.is_ball() {
        a.norm_gap > 0.0
    } else {
        a.coord_gaps.iter().all(|&g| g > 0.0)
    }
}

/// Whether `a` lies in the open domain of `space`.
pub fn point_in_domain(space: &Space, a: &Point) -> Result<bool> {
    check_dim(space, a.dim())?;
    Ok(view_in_domain(space, a.view()))
}

pub(crate) fn require_in_domain(space: &Space, a: &Point, index: usize) -> Result<()> {
    if !point_in_domain(space, a)? {
        return Err(Error::OutsideDomain {
            space: space.to_string(),
            index,
        });
    }
    Ok(())
}

#[inline]
pub(crate) fn unit(c: Complex64) -> Complex64 {
    let m = c.norm();
    if m > 0.0 {
        c / m
    } else {
        Complex64::new(1.0, 0.0)
    }
}

/// `1 - conj(a) z` for one-variable points given with their gaps.
#[inline]
pub(crate) fn disc_one_minus(a: Complex64, ga: f64, z: Complex64, gz: f64) -> Complex64 {
    let (ua, uz) = (unit(a), unit(z));
    let radial = ga + gz - ga * gz;
    let rr = (1.0 - ga) * (1.0 - gz);
    let w = ua.conj() * uz;
    radial + rr * Complex64::new(0.5 * (ua - uz).norm_sqr(), -w.im)
}

/// `a - z` for one-variable points given with their gaps.
#[inline]
fn disc_difference(a: Complex64, ga: f64, z: Complex64, gz: f64) -> Complex64 {
    let (ua, uz) = (unit(a), unit(z));
    (ua - uz) - (ua * ga - uz * gz)
}

fn ball_unit(coords: &[Complex64]) -> Vec<Complex64> {
    let m = coords.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    if m > 0.0 {
        coords.iter().map(|c| c / m).collect()
    } else {
        let mut u = vec![Complex64::new(0.0, 0.0); coords.len()];
        u[0] = Complex64::new(1.0, 0.0);
        u
    }
}

/// `1 - <z, a> = 1 - sum_j z_j conj(a_j)` on the ball.
pub(crate) fn ball_one_minus(a: PointView<'_>, z: PointView<'_>) -> Complex64 {
    let (ga, gz) = (a.norm_gap, z.norm_gap);
    let ra = 1.0 - ga;
    let rz = 1.0 - gz;
    let ma = a.coords.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    let mz = z.coords.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    if ma == 0.0 || mz == 0.0 {
        return Complex64::new(1.0, 0.0);
    }
    let mut half_dist = 0.0;
    let mut inner = Complex64::new(0.0, 0.0);
    for (ca, cz) in a.coords.iter().zip(z.coords) {
        let (ua, uz) = (ca / ma, cz / mz);
        half_dist += (ua - uz).norm_sqr();
        inner += uz * ua.conj();
    }
    let radial = ga + gz - ga * gz;
    radial + ra * rz * Complex64::new(0.5 * half_dist, -inner.im)
}

/// Pseudohyperbolic distance `|phi_a(b)|`, where `phi_a` is the involution
/// of the domain exchanging 0 and `a`. On the polydisc this is the maximum
/// of the one-variable distances over coordinates.
///
/// Returns a value in `[0, 1]`; the upper end is reached only when the true
/// distance is within rounding of 1.
pub fn pseudohyperbolic_distance(space: &Space, a: &Point, b: &Point) -> Result<f64> {
    require_in_domain(space, a, 0)?;
    require_in_domain(space, b, 1)?;
    Ok(distance_unchecked(space, a.view(), b.view()))
}

pub(crate) fn distance_unchecked(space: &Space, a: PointView<'_>, b: PointView<'_>) -> f64 {
    if space.is_ball() && space.dim() > 1 {
        ball_distance(a, b)
    } else {
        a.coords
            .iter()
            .zip(a.coord_gaps)
            .zip(b.coords.iter().zip(b.coord_gaps))
            .map(|((&ca, &ga), (&cb, &gb))| disc_distance(ca, ga, cb, gb))
            .fold(0.0, f64::max)
    }
}

fn disc_distance(a: Complex64, ga: f64, b: Complex64, gb: f64) -> f64 {
    let num = disc_difference(a, ga, b, gb).norm();
    let den = disc_one_minus(a, ga, b, gb).norm();
    (num / den).min(1.0)
}

fn ball_distance(a: PointView<'_>, b: PointView<'_>) -> f64 {
    let ua = ball_unit(a.coords);
    let ub = ball_unit(b.coords);
    let (ga, gb) = (a.norm_gap, b.norm_gap);
    let diff2: f64 = ua
        .iter()
        .zip(&ub)
        .map(|(&x, &y)| ((x - y) - (x * ga - y * gb)).norm_sqr())
        .sum();
    // |a|^2 |b|^2 - |<b, a>|^2 via the Lagrange identity
    let mut wedge = 0.0;
    for i in 0..ua.len() {
        for j in i + 1..ua.len() {
            wedge += (ua[i] * ub[j] - ua[j] * ub[i]).norm_sqr();
        }
    }
    let (ra, rb) = (1.0 - ga, 1.0 - gb);
    let num = (diff2 - ra * ra * rb * rb * wedge).max(0.0);
    let den = ball_one_minus(a, b).norm_sqr();
    (num / den).sqrt().min(1.0)
}

/// Disc involution `(a - z) / (1 - conj(a) z)`.
pub fn disc_involution(a: Complex64, z: Complex64) -> Complex64 {
    (a - z) / (1.0 - a.conj() * z)
}

/// Ball involution `phi_a(z) = (a - P_a z - s_a Q_a z) / (1 - <z, a>)`, with
/// `s_a = sqrt(1 - |a|^2)`, `P_a` the orthogonal projection onto `C a` and
/// `Q_a = I - P_a`. Computed in plain coordinates.
pub fn ball_involution(a: &[Complex64], z: &[Complex64]) -> Vec<Complex64> {
    let a2: f64 = a.iter().map(|c| c.norm_sqr()).sum();
    let inner: Complex64 = z.iter().zip(a).map(|(zi, ai)| zi * ai.conj()).sum();
    if a2 == 0.0 {
        return z.iter().map(|c| -c).collect();
    }
    let s = (1.0 - a2).sqrt();
    let den = 1.0 - inner;
    a.iter()
        .zip(z)
        .map(|(&ai, &zi)| {
            let p = ai * (inner / a2);
            let qz = zi - p;
            (ai - p - qz * s) / den
        })
        .collect()
}

/// Finite ordered sequence of distinct points in the open domain.
#[derive(Clone, Debug, PartialEq)]
pub struct PointSeq {
    space: Space,
    points: Vec<Point>,
    labels: Option<Vec<String>>,
}

fn point_key(p: &Point) -> Vec<u64> {
    p.coords
        .iter()
        .flat_map(|c| [c.re.to_bits(), c.im.to_bits()])
        .chain(p.coord_gaps.iter().map(|g| g.to_bits()))
        .chain(std::iter::once(p.norm_gap.to_bits()))
        .collect()
}

impl PointSeq {
    /// Validates dimensions, domain membership and exact distinctness. Two
    /// points are equal only when coordinates and gaps all coincide bitwise.
    pub fn new(space: Space, points: Vec<Point>) -> Result<Self> {
        space.validate()?;
        let mut seen: HashMap<Vec<u64>, usize> = HashMap::with_capacity(points.len());
        for (i, p) in points.iter().enumerate() {
            check_dim(&space, p.dim())?;
            require_in_domain(&space, p, i)?;
            if let Some(&first) = seen.get(&point_key(p)) {
                return Err(Error::DuplicatePoint { first, second: i });
            }
            seen.insert(point_key(p), i);
        }
        Ok(PointSeq {
            space,
            points,
            labels: None,
        })
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.points.len() {
            return Err(Error::LengthMismatch {
                expected: self.points.len(),
                given: labels.len(),
            });
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// First `n` points (all of them when `n` exceeds the length).
    pub fn truncate(&self, n: usize) -> PointSeq {
        let n = n.min(self.points.len());
        PointSeq {
            space: self.space,
            points: self.points[..n].to_vec(),
            labels: self.labels.as_ref().map(|l| l[..n].to_vec()),
        }
    }

    /// The same points read in another space of the same dimension, e.g. a
    /// disc sequence as a sequence for `A_k(B_1)`.
    pub fn in_space(&self, space: Space) -> Result<PointSeq> {
        let seq = PointSeq::new(space, self.points.clone())?;
        Ok(PointSeq {
            labels: self.labels.clone(),
            ..seq
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn domain_membership() {
        assert!(point_in_domain(&Space::HardyDisc, &Point::real(&[0.0])).unwrap());
        assert!(!point_in_domain(&Space::HardyBall { n: 2 }, &Point::real(&[0.8, 0.7])).unwrap());
        assert!(point_in_domain(&Space::HardyPolydisc { n: 2 }, &Point::real(&[0.9, 0.95])).unwrap());
        assert!(!point_in_domain(&Space::HardyDisc, &Point::real(&[1.0])).unwrap());
    }

    #[test]
    fn dimension_mismatch_names_lengths() {
        let err = point_in_domain(&Space::HardyBall { n: 3 }, &Point::real(&[0.1])).unwrap_err();
        match err {
            Error::DimensionMismatch { expected, given } => assert_eq!((expected, given), (3, 1)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn disc_distances() {
        let s = Space::HardyDisc;
        let d = |x: f64, y: f64| pseudohyperbolic_distance(&s, &Point::real(&[x]), &Point::real(&[y])).unwrap();
        assert_abs_diff_eq!(d(0.0, 0.5), 0.5, epsilon = 1e-15);
        assert_eq!(d(0.5, 0.5), 0.0);
        assert_abs_diff_eq!(d(0.5, -0.5), 0.8, epsilon = 1e-15);
    }

    #[test]
    fn exact_gaps_survive_rounding() {
        let s = Space::HardyDisc;
        let a = Point::disc_polar(0.0, 2f64.powi(-59));
        let b = Point::disc_polar(0.0, 2f64.powi(-60));
        assert_eq!(a.coords()[0].re, 1.0);
        assert!(point_in_domain(&s, &a).unwrap());
        // (g_a - g_b) / (g_a + g_b - g_a g_b) = 1/3 up to 2^-60
        let d = pseudohyperbolic_distance(&s, &a, &b).unwrap();
        assert_abs_diff_eq!(d, 1.0 / 3.0, epsilon = 1e-15);
        assert!(PointSeq::new(s, vec![a, b]).is_ok());
    }

    #[test]
    fn ball_distance_matches_involution() {
        let s = Space::HardyBall { n: 2 };
        let a = vec![c(0.3, -0.1), c(0.2, 0.4)];
        let b = vec![c(-0.5, 0.2), c(0.1, -0.3)];
        let phi = ball_involution(&a, &b);
        let expected = phi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let got = pseudohyperbolic_distance(&s, &Point::new(a), &Point::new(b)).unwrap();
        assert_abs_diff_eq!(got, expected, epsilon = 1e-14);
    }

    #[test]
    fn involution_is_involutive() {
        let a = vec![c(0.3, -0.1), c(0.2, 0.4)];
        let z = vec![c(-0.5, 0.2), c(0.1, -0.3)];
        let back = ball_involution(&a, &ball_involution(&a, &z));
        for (x, y) in back.iter().zip(&z) {
            assert_abs_diff_eq!((x - y).norm(), 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn polydisc_distance_is_coordinate_max() {
        let s = Space::HardyPolydisc { n: 2 };
        let d = pseudohyperbolic_distance(&s, &Point::real(&[0.0, 0.5]), &Point::real(&[0.5, -0.5])).unwrap();
        assert_abs_diff_eq!(d, 0.8, epsilon = 1e-15);
    }

    #[test]
    fn duplicates_rejected() {
        let p = Point::real(&[0.25]);
        let err = PointSeq::new(Space::HardyDisc, vec![p.clone(), Point::real(&[0.1]), p]).unwrap_err();
        assert!(matches!(err, Error::DuplicatePoint { first: 0, second: 2 }));
    }

    #[test]
    fn outside_points_rejected() {
        let err = PointSeq::new(Space::HardyBall { n: 2 }, vec![Point::real(&[0.8, 0.7])]).unwrap_err();
        assert!(matches!(err, Error::OutsideDomain { index: 0, .. }));
    }
}
