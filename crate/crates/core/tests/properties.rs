use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;
use rkframe::carleson::{box_constant, box_constant_weighted, carleson_measure_weights};
use rkframe::gram::{build_gram, dual_system};
use rkframe::kernels::{chi, eval_kernel, gram_entry};
use rkframe::quadrature::{build_grid, norm_gradient, space_norm, SynthesisOperator};
use rkframe::seqgen::{diagonal_embed, random_separated, random_separated_within, seip_lattice, LatticeParams};
use rkframe::spaces::{disc_involution, point_in_domain, pseudohyperbolic_distance};
use rkframe::subordination::{kernel_agreement_check, LiftMap};
use rkframe::{Exponent, KernelCoeffs, Point, PointSeq, Space};

fn cases(n: u32) -> ProptestConfig {
    ProptestConfig {
        cases: n,
        ..ProptestConfig::default()
    }
}

fn disc_coord(max_r: f64) -> impl Strategy<Value = Complex64> {
    (0.0..max_r, 0.0..2.0 * PI).prop_map(|(r, t)| Complex64::from_polar(r, t))
}

/// A point of `space` with every modulus (or the Euclidean norm) below `max_r`.
fn point(space: Space, max_r: f64) -> BoxedStrategy<Point> {
    match space {
        Space::HardyDisc => disc_coord(max_r).prop_map(|z| Point::new(vec![z])).boxed(),
        Space::HardyPolydisc { n } => prop::collection::vec(disc_coord(max_r), n).prop_map(Point::new).boxed(),
        Space::HardyBall { n } | Space::BergmanBall { n, .. } => (
            prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), n),
            0.0..max_r,
        )
            .prop_map(|(v, r)| {
                let z: Vec<Complex64> = v.iter().map(|&(x, y)| Complex64::new(x, y)).collect();
                let len = z.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt().max(1e-3);
                Point::new(z.iter().map(|c| c * (r / len)).collect())
            })
            .boxed(),
    }
}

fn spaces() -> impl Strategy<Value = Space> {
    prop_oneof![
        Just(Space::HardyDisc),
        Just(Space::HardyPolydisc { n: 2 }),
        Just(Space::HardyBall { n: 2 }),
        Just(Space::BergmanBall { n: 1, k: 0 }),
        Just(Space::BergmanBall { n: 1, k: 1 }),
    ]
}

fn coeffs(n: usize) -> impl Strategy<Value = Vec<Complex64>> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64).prop_map(|(x, y)| Complex64::new(x, y)), n)
}

/// A separated random sequence of moduli at most `cap`, with coefficients.
fn instance(max_n: usize, cap: f64) -> impl Strategy<Value = (Space, PointSeq, Vec<Complex64>)> {
    (spaces(), 1..=max_n, any::<u64>()).prop_flat_map(move |(space, n, seed)| {
        let seq = random_separated_within(&space, n, 0.2, cap, seed).expect("sparse requests always succeed");
        coeffs(n).prop_map(move |c| (space, seq.clone(), c))
    })
}

/// Grids that resolve kernels at radius up to 0.7 to about `1e-8`.
fn grid_for(space: &Space) -> rkframe::quadrature::QuadratureGrid {
    let r = match space {
        Space::HardyDisc => 256,
        Space::HardyPolydisc { .. } => 96,
        Space::HardyBall { .. } => 48,
        Space::BergmanBall { .. } => 96,
    };
    build_grid(space, r).unwrap()
}

proptest! {
    #![proptest_config(cases(64))]

    #[test]
    fn distance_is_symmetric_and_in_range(
        (space, a, b) in spaces().prop_flat_map(|s| (Just(s), point(s, 0.999), point(s, 0.999)))
    ) {
        let d = pseudohyperbolic_distance(&space, &a, &b).unwrap();
        let e = pseudohyperbolic_distance(&space, &b, &a).unwrap();
        prop_assert!((d - e).abs() <= 1e-14);
        prop_assert!((0.0..1.0).contains(&d) || d == 1.0 && a != b);
        prop_assert!(point_in_domain(&space, &a).unwrap());
    }

    #[test]
    fn disc_distance_is_mobius_invariant(a in disc_coord(0.99), b in disc_coord(0.99), c in disc_coord(0.9)) {
        let d = |x: Complex64, y: Complex64| {
            pseudohyperbolic_distance(&Space::HardyDisc, &Point::new(vec![x]), &Point::new(vec![y])).unwrap()
        };
        let before = d(a, b);
        let after = d(disc_involution(c, a), disc_involution(c, b));
        prop_assert!((before - after).abs() <= 1e-12, "{before} vs {after}");
    }

    #[test]
    fn chi_inverts_the_diagonal_kernel((space, a) in spaces().prop_flat_map(|s| (Just(s), point(s, 0.999)))) {
        let k = eval_kernel(&space, &a, &a).unwrap();
        prop_assert!(((chi(&space, &a).unwrap() * k) - 1.0).norm() <= 1e-13);
    }

    #[test]
    fn p2_gram_is_hermitian((space, a, b) in spaces().prop_flat_map(|s| (Just(s), point(s, 0.99), point(s, 0.99)))) {
        let two = Exponent::new(2.0).unwrap();
        let g = gram_entry(&space, two, &a, &b).unwrap();
        let h = gram_entry(&space, two, &b, &a).unwrap();
        prop_assert!((g - h.conj()).norm() <= 1e-14 * g.norm().max(1.0));
    }

    #[test]
    fn chi_decreases_along_rays(t in 0.0..2.0 * PI, r in 0.01..0.98f64) {
        let ray = |s: f64| Point::new(vec![Complex64::from_polar(s, t)]);
        for space in [Space::HardyDisc, Space::BergmanBall { n: 1, k: 2 }] {
            prop_assert!(chi(&space, &ray(r + 0.01)).unwrap() < chi(&space, &ray(r)).unwrap());
        }
    }

    #[test]
    fn lifted_kernels_agree(
        (src, a, z) in prop_oneof![
            Just(Space::BergmanBall { n: 1, k: 0 }),
            Just(Space::BergmanBall { n: 1, k: 1 }),
            Just(Space::BergmanBall { n: 2, k: 1 }),
        ].prop_flat_map(|s| (Just(s), point(s, 0.999), point(s, 0.999)))
    ) {
        let lift = LiftMap::new(src).unwrap();
        prop_assert!(kernel_agreement_check(&lift, &a, &z).unwrap() <= 1e-14);
    }

    #[test]
    fn diagonal_embedding_keeps_distances(a in disc_coord(0.999), b in disc_coord(0.999)) {
        let seq = PointSeq::new(Space::HardyDisc, vec![Point::new(vec![a]), Point::new(vec![b])]).unwrap();
        let d = pseudohyperbolic_distance(&Space::HardyDisc, &seq.points()[0], &seq.points()[1]).unwrap();
        let diag = diagonal_embed(&seq).unwrap();
        let e = pseudohyperbolic_distance(&diag.space(), &diag.points()[0], &diag.points()[1]).unwrap();
        prop_assert_eq!(d, e);
    }
}

proptest! {
    #![proptest_config(cases(16))]

    #[test]
    fn norm_is_homogeneous_and_subadditive(
        (space, seq, c) in instance(5, 0.95),
        d in coeffs(5),
        s in disc_coord(3.0),
        q in prop_oneof![Just(1.5), Just(2.0), Just(3.0)],
    ) {
        let grid = build_grid(&space, 8).unwrap();
        let p = Exponent::new(2.5).unwrap();
        let f = KernelCoeffs::new(p, seq.clone(), c.clone()).unwrap();
        let g = KernelCoeffs::new(p, seq.clone(), d[..seq.len()].to_vec()).unwrap();
        let nf = space_norm(&f, &grid, q).unwrap();
        prop_assert!((space_norm(&f.scaled(s), &grid, q).unwrap() - s.norm() * nf).abs() <= 1e-12 * (1.0 + nf));
        let sum: Vec<Complex64> = c.iter().zip(&g.coeffs).map(|(x, y)| x + y).collect();
        let h = KernelCoeffs::new(p, seq, sum).unwrap();
        prop_assert!(space_norm(&h, &grid, q).unwrap() <= nf + space_norm(&g, &grid, q).unwrap() + 1e-12);
    }

    #[test]
    fn gradient_matches_finite_differences(
        (space, seq, c) in instance(4, 0.95),
        q in prop_oneof![Just(1.5), Just(2.0), Just(3.0), Just(4.0)],
    ) {
        let grid = build_grid(&space, 8).unwrap();
        let f = KernelCoeffs::new(Exponent::new(3.0).unwrap(), seq.clone(), c.clone()).unwrap();
        let grad = norm_gradient(&f, &grid, q).unwrap();
        let h = 1e-6;
        let at = |i: usize, dz: Complex64| {
            let mut v = c.clone();
            v[i] += dz;
            space_norm(&KernelCoeffs::new(f.exponent, seq.clone(), v).unwrap(), &grid, q).unwrap()
        };
        let scale = grad.iter().map(|g| g.norm()).fold(0.0, f64::max).max(1e-3);
        for i in 0..c.len() {
            let re = (at(i, Complex64::new(h, 0.0)) - at(i, Complex64::new(-h, 0.0))) / (2.0 * h);
            let im = (at(i, Complex64::new(0.0, h)) - at(i, Complex64::new(0.0, -h))) / (2.0 * h);
            prop_assert!((grad[i] - Complex64::new(re, im)).norm() <= 1e-5 * scale, "{} vs {re},{im}", grad[i]);
        }
    }

    #[test]
    fn quadrature_norm_matches_the_gram_form((space, seq, c) in instance(8, 0.7)) {
        let two = Exponent::new(2.0).unwrap();
        let g = build_gram(&space, two, &seq).unwrap().entries;
        // entries[(i, j)] = <k_i, k_j>, so the squared norm is c^T G conj(c)
        let mu = nalgebra::DVector::from_vec(c.clone());
        let exact = (mu.transpose() * &g * mu.conjugate())[(0, 0)].re.sqrt();
        let f = KernelCoeffs::new(two, seq, c).unwrap();
        let quad = space_norm(&f, &grid_for(&space), 2.0).unwrap();
        prop_assert!((quad - exact).abs() <= 1e-6 * exact, "{quad} vs {exact}");
    }

    #[test]
    fn projection_is_idempotent(
        (space, seq, c) in instance(8, 0.9),
        p in prop_oneof![Just(2.0), Just(3.0), Just(4.0)],
        probe in prop::collection::vec(0.0..2.0 * PI, 3),
    ) {
        let ds = dual_system(&space, Exponent::new(p).unwrap(), &seq).unwrap();
        prop_assert!(ds.biorthogonality_residual() <= 1e-8);
        let f = KernelCoeffs::new(ds.p, seq, c).unwrap();
        let once = ds.project(&f).unwrap();
        let twice = ds.project(&once).unwrap();
        for t in probe {
            let z = match space.dim() {
                1 => Point::new(vec![Complex64::from_polar(0.7, t)]),
                _ => Point::new(vec![Complex64::from_polar(0.5, t), Complex64::from_polar(0.4, -t)]),
            };
            let (u, v) = (once.eval(&z).unwrap(), twice.eval(&z).unwrap());
            prop_assert!((u - v).norm() <= 1e-6 * (1.0 + u.norm()));
        }
    }

    #[test]
    fn synthesis_norm_is_phase_invariant((space, seq, c) in instance(6, 0.95), t in 0.0..2.0 * PI) {
        let grid = build_grid(&space, 8).unwrap();
        let op = SynthesisOperator::from_kernels(Exponent::new(1.5).unwrap(), &seq, &grid).unwrap();
        let turned: Vec<Complex64> = c.iter().map(|x| x * Complex64::from_polar(1.0, t)).collect();
        let (a, b) = (op.norm(&c, 1.5), op.norm(&turned, 1.5));
        prop_assert!((a - b).abs() <= 1e-10 * (1.0 + a));
    }

    #[test]
    fn box_constant_is_homogeneous_and_monotone((space, seq, _c) in instance(8, 0.95), t in 0.1..10.0f64) {
        let w = carleson_measure_weights(&seq);
        let scaled: Vec<f64> = w.iter().map(|x| x * t).collect();
        let depth = 5;
        let base = box_constant(&seq, depth).unwrap().box_constant;
        let more = box_constant_weighted(&seq, &scaled, depth).unwrap().box_constant;
        prop_assert!((more - t * base).abs() <= 1e-12 * (1.0 + more), "{space}: {more} vs {t} * {base}");
        prop_assert!(box_constant(&seq, depth + 1).unwrap().box_constant >= base);
    }

    #[test]
    fn generators_are_deterministic(seed in any::<u64>(), d in 0.01..0.2f64) {
        let space = Space::HardyBall { n: 2 };
        prop_assert_eq!(random_separated(&space, 6, 0.4, seed).unwrap(), random_separated(&space, 6, 0.4, seed).unwrap());
        let params = LatticeParams { sigma: 2.0, angular_density: d, rings: 5, seed: Some(seed) };
        let s = seip_lattice(&params).unwrap();
        prop_assert_eq!(&s, &seip_lattice(&params).unwrap());
        for a in s.points() {
            prop_assert!(point_in_domain(&Space::HardyDisc, a).unwrap());
        }
    }
}
