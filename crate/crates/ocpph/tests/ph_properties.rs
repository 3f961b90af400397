//! Distribution-level invariants of the plain phase-type measures, checked
//! against independent oracles (quadrature, finite differences, empirical
//! distributions).

mod common;

use common::{adaptive_simpson, ks_distance, random_alpha, random_sub_generator, rng};
use ocpph::{ErlangSpec, PhaseTypeRep};

fn random_rep(seed: u64, order: usize) -> PhaseTypeRep {
    let mut r = rng(seed);
    let t = random_sub_generator(&mut r, order);
    PhaseTypeRep::new(random_alpha(&mut r, order), t).unwrap()
}

#[test]
fn density_normalizes_with_tail() {
    for (seed, order) in [(1u64, 2usize), (2, 4), (3, 7)] {
        let rep = random_rep(seed, order);
        let q = rep.quantile(1.0 - 1e-10).unwrap();
        let mass = adaptive_simpson(&|x| rep.pdf(x).unwrap(), 0.0, q, 1e-11);
        let total = mass + rep.reliability(q).unwrap();
        assert!((total - 1.0).abs() < 1e-8, "seed {seed}: total mass {total}");
    }
}

#[test]
fn cdf_and_reliability_share_one_evaluation() {
    let rep = random_rep(9, 5);
    for x in [0.0, 0.2, 1.0, 3.0] {
        let m = rep.measures_at(x).unwrap();
        assert!((m.cdf + m.reliability - 1.0).abs() < 1e-15);
    }
}

#[test]
fn central_difference_of_cdf_recovers_pdf() {
    let rep = ErlangSpec::new(5, 2.0).unwrap().rep();
    for x in [0.5f64, 1.0, 2.5, 4.0] {
        let h = 1e-5 * x.max(1.0);
        let approx = (rep.cdf(x + h).unwrap() - rep.cdf(x - h).unwrap()) / (2.0 * h);
        let exact = rep.pdf(x).unwrap();
        assert!(
            ((approx - exact) / exact).abs() < 1e-5,
            "x={x}: {approx} vs {exact}"
        );
    }
}

#[test]
fn sample_ecdf_passes_ks_against_cdf() {
    // The reset-voltage phase count and rate from the fitted model.
    let rep = ErlangSpec::new(14, 16.74531).unwrap().rep();
    let n = 100_000;
    let data = rep.sample(n, 20240);
    let d = ks_distance(data.values(), &|x| rep.cdf(x).unwrap());
    let band = 1.63 / (n as f64).sqrt() * 1.5;
    assert!(d < band, "KS distance {d} exceeds {band}");
}

#[test]
fn sample_mean_within_clt_band() {
    let rep = ErlangSpec::new(2, 4.0).unwrap().rep();
    let n = 100_000;
    let data = rep.sample(n, 555);
    let mean = data.mean();
    let sd = rep.sd().unwrap();
    let band = 4.0 * sd / (n as f64).sqrt();
    assert!((mean - 0.5).abs() < band, "sample mean {mean} not within {band} of 0.5");
}

#[test]
fn char_fn_hermitian_and_bounded_on_grid() {
    let rep = random_rep(31, 4);
    let mut t = -50.0;
    while t <= 50.0 {
        let phi = rep.char_fn(t).unwrap();
        let conj = rep.char_fn(-t).unwrap();
        assert!(phi.norm() <= 1.0 + 1e-12, "|phi({t})| = {}", phi.norm());
        assert!((phi - conj.conj()).norm() < 1e-12);
        t += 2.5;
    }
}

#[test]
fn char_fn_matches_oscillatory_quadrature() {
    let rep = random_rep(77, 3);
    let t = 0.7;
    let q = rep.quantile(1.0 - 1e-12).unwrap();
    let re = adaptive_simpson(&|x| (t * x).cos() * rep.pdf(x).unwrap(), 0.0, q, 1e-11);
    let im = adaptive_simpson(&|x| (t * x).sin() * rep.pdf(x).unwrap(), 0.0, q, 1e-11);
    let phi = rep.char_fn(t).unwrap();
    assert!((phi.re - re).abs() < 1e-7, "re {re} vs {}", phi.re);
    assert!((phi.im - im).abs() < 1e-7, "im {im} vs {}", phi.im);
}

#[test]
fn moments_match_quadrature() {
    let rep = random_rep(101, 3);
    let q = rep.quantile(1.0 - 1e-12).unwrap();
    for k in 1..=3u32 {
        let oracle = adaptive_simpson(
            &|x| x.powi(k as i32) * rep.pdf(x).unwrap(),
            0.0,
            q,
            1e-12,
        );
        let formula = rep.moment(k).unwrap();
        assert!(
            ((formula - oracle) / oracle).abs() < 1e-6,
            "k={k}: {formula} vs quadrature {oracle}"
        );
    }
}

#[test]
fn reliability_monotone_nonincreasing() {
    let rep = random_rep(404, 6);
    let mut prev = 1.0;
    for i in 0..60 {
        let x = 0.08 * i as f64;
        let r = rep.reliability(x).unwrap();
        assert!(r <= prev + 1e-13);
        prev = r;
    }
}
