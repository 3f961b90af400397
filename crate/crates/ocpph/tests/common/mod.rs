//! Shared oracles for the integration suites: adaptive quadrature and
//! seeded random representation generators. Everything here is independent
//! of the evaluation paths it checks.

use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Adaptive Simpson quadrature with interval-doubling error control.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, h: f64) -> f64 {
        h / 6.0 * (fa + 4.0 * fm + fb)
    }
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(fa, flm, fm, m - a);
        let right = simpson(fm, frm, fb, b - m);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            recurse(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                + recurse(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
    }
    if a == b {
        return 0.0;
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = simpson(fa, fm, fb, b - a);
    recurse(f, a, b, fa, fm, fb, whole, tol, 48)
}

/// Random strictly stable sub-generator (nonnegative off-diagonals, strictly
/// negative row sums).
pub fn random_sub_generator(rng: &mut ChaCha8Rng, order: usize) -> Array2<f64> {
    let mut t = Array2::<f64>::zeros((order, order));
    for i in 0..order {
        let mut row_sum = 0.0;
        for j in 0..order {
            if i != j {
                let v = rng.random::<f64>();
                t[[i, j]] = v;
                row_sum += v;
            }
        }
        t[[i, i]] = -(row_sum + 0.1 + rng.random::<f64>());
    }
    t
}

/// Random probability row of the given length.
pub fn random_alpha(rng: &mut ChaCha8Rng, order: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..order).map(|_| rng.random::<f64>() + 0.01).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / total).collect()
}

/// Kolmogorov-Smirnov distance between a sorted sample and a CDF.
pub fn ks_distance(sorted: &[f64], cdf: &dyn Fn(f64) -> f64) -> f64 {
    let m = sorted.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        d = d.max(((i + 1) as f64 / m - f).abs());
        d = d.max((i as f64 / m - f).abs());
    }
    d
}
