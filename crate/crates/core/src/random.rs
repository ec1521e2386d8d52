//! Seeded random vectors shared by the optimizers and generators.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

pub(crate) fn complex_gaussian_vec<R: Rng>(rng: &mut R, n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect()
}

pub(crate) fn lp_norm(v: &[Complex64], q: f64) -> f64 {
    if q == 2.0 {
        return v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    }
    v.iter().map(|x| x.norm().powf(q)).sum::<f64>().powf(1.0 / q)
}

/// Scales `v` onto the unit sphere of `l^q`. Leaves the zero vector alone.
pub(crate) fn lp_normalize(v: &mut [Complex64], q: f64) {
    let n = lp_norm(v, q);
    if n > 0.0 {
        for x in v.iter_mut() {
            *x /= n;
        }
    }
}
