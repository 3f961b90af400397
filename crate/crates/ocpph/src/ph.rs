//! Plain phase-type distributions: representation `(alpha, T)` of the
//! absorption time of a Markov jump process, with reliability measures,
//! moments, characteristic function, and exact simulation.

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::matrix::{erlang_exp_row, expm, lu_factor, solve_complex_shifted};

/// Reliability below this floor makes hazard quantities unrepresentable.
pub(crate) const UNDERFLOW_FLOOR: f64 = 1e-300;

/// Tolerance on probability-mass and row-sum invariants.
pub(crate) const MASS_TOLERANCE: f64 = 1e-12;

/// The set of pointwise measures produced from one shared occupancy
/// evaluation.
#[derive(Debug, Clone, Copy)]
pub struct Measures {
    pub pdf: f64,
    pub cdf: f64,
    pub reliability: f64,
    pub hazard: f64,
    pub cum_hazard: f64,
}

/// Structured Erlang parameterization: `phases` sequential stages with a
/// common `rate`, initial vector `(1, 0, ..., 0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErlangSpec {
    phases: usize,
    rate: f64,
}

impl ErlangSpec {
    pub fn new(phases: usize, rate: f64) -> Result<Self> {
        if phases < 1 {
            return Err(Error::InvalidRepresentation("phases must be >= 1".into()));
        }
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(Error::InvalidRepresentation(format!(
                "rate must be a positive finite number, got {rate}"
            )));
        }
        Ok(Self { phases, rate })
    }

    pub fn phases(&self) -> usize {
        self.phases
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    /// Expand into the explicit bidiagonal representation: `-lambda` on the
    /// diagonal, `+lambda` on the superdiagonal, exit only from the last
    /// phase.
    pub fn rep(&self) -> PhaseTypeRep {
        let n = self.phases;
        let lambda = self.rate;
        let mut t = Array2::<f64>::zeros((n, n));
        for i in 0..n {
            t[[i, i]] = -lambda;
            if i + 1 < n {
                t[[i, i + 1]] = lambda;
            }
        }
        let mut alpha = Array1::<f64>::zeros(n);
        alpha[0] = 1.0;
        let mut exit = Array1::<f64>::zeros(n);
        exit[n - 1] = lambda;
        PhaseTypeRep {
            alpha,
            t,
            exit,
            structure: Structure::Erlang { rate: lambda },
        }
    }
}

/// Internal evaluation path. Erlang-built representations use the log-domain
/// Poisson row instead of a dense matrix exponential.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Structure {
    General,
    Erlang { rate: f64 },
}

/// A validated phase-type representation `(alpha, T)` with the exit vector
/// `T^0 = -T e` cached.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseTypeRep {
    alpha: Array1<f64>,
    t: Array2<f64>,
    exit: Array1<f64>,
    structure: Structure,
}

impl PhaseTypeRep {
    /// Validate every representation invariant and cache the exit vector.
    ///
    /// Each violation is reported by name: negative alpha entry, alpha mass
    /// away from one, nonnegative diagonal, negative off-diagonal, positive
    /// row sum, singular `T`.
    pub fn new(alpha: Vec<f64>, t: Array2<f64>) -> Result<Self> {
        let exit = validate_sub_generator(&t, "T")?;
        let alpha = validate_alpha(alpha, t.nrows())?;
        Ok(Self {
            alpha,
            t,
            exit,
            structure: Structure::General,
        })
    }

    pub fn order(&self) -> usize {
        self.t.nrows()
    }

    pub fn alpha(&self) -> &Array1<f64> {
        &self.alpha
    }

    /// The sub-generator `T`.
    pub fn sub_generator(&self) -> &Array2<f64> {
        &self.t
    }

    /// The exit vector `T^0 = -T e`.
    pub fn exit_vector(&self) -> &Array1<f64> {
        &self.exit
    }

    /// Transient occupancy row `alpha e^{T x}`.
    pub(crate) fn occupancy(&self, x: f64) -> Result<Array1<f64>> {
        match self.structure {
            Structure::Erlang { rate } => {
                Ok(Array1::from(erlang_exp_row(self.order(), rate, x)))
            }
            Structure::General => {
                let e = expm(&(&self.t * x))?;
                Ok(self.alpha.dot(&e))
            }
        }
    }

    fn check_nonneg(x: f64, what: &str) -> Result<()> {
        if !(x >= 0.0 && x.is_finite()) {
            return Err(Error::Domain(format!("{what} requires x >= 0, got {x}")));
        }
        Ok(())
    }

    /// Density `alpha e^{T x} T^0`.
    pub fn pdf(&self, x: f64) -> Result<f64> {
        Self::check_nonneg(x, "pdf")?;
        let occ = self.occupancy(x)?;
        Ok(occ.dot(&self.exit).max(0.0))
    }

    /// Distribution function `1 - alpha e^{T x} e`.
    pub fn cdf(&self, x: f64) -> Result<f64> {
        Ok(1.0 - self.reliability(x)?)
    }

    /// Reliability `R(x) = alpha e^{T x} e`, the probability the process is
    /// still transient at `x`.
    pub fn reliability(&self, x: f64) -> Result<f64> {
        Self::check_nonneg(x, "reliability")?;
        let occ = self.occupancy(x)?;
        Ok(occ.sum().clamp(0.0, 1.0))
    }

    /// Hazard rate `f(x) / R(x)`.
    pub fn hazard(&self, x: f64) -> Result<f64> {
        Ok(self.measures_at(x)?.hazard)
    }

    /// Cumulative hazard `-ln R(x)`.
    pub fn cum_hazard(&self, x: f64) -> Result<f64> {
        Ok(self.measures_at(x)?.cum_hazard)
    }

    /// All pointwise measures from one occupancy evaluation.
    pub fn measures_at(&self, x: f64) -> Result<Measures> {
        Self::check_nonneg(x, "measures")?;
        let occ = self.occupancy(x)?;
        let pdf = occ.dot(&self.exit).max(0.0);
        let reliability = occ.sum().clamp(0.0, 1.0);
        if reliability <= UNDERFLOW_FLOOR {
            return Err(Error::TailUnderflow { x, floor: UNDERFLOW_FLOOR });
        }
        Ok(Measures {
            pdf,
            cdf: 1.0 - reliability,
            reliability,
            hazard: pdf / reliability,
            cum_hazard: -reliability.ln(),
        })
    }

    /// Raw moment `E[X^k] = (-1)^k k! alpha T^{-k} e`.
    pub fn moment(&self, k: u32) -> Result<f64> {
        if k < 1 {
            return Err(Error::InvalidInput("moment order k must be >= 1".into()));
        }
        let n = self.order();
        let inf_norm = self
            .t
            .rows()
            .into_iter()
            .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max);
        let factors = lu_factor(&self.t, inf_norm)?;
        let mut v = Array1::<f64>::from_elem(n, 1.0);
        for _ in 0..k {
            v = factors.solve(&v);
        }
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        let k_factorial: f64 = (1..=k).map(|i| i as f64).product();
        Ok(sign * k_factorial * self.alpha.dot(&v))
    }

    pub fn mean(&self) -> Result<f64> {
        self.moment(1)
    }

    pub fn sd(&self) -> Result<f64> {
        let m1 = self.moment(1)?;
        let m2 = self.moment(2)?;
        Ok((m2 - m1 * m1).max(0.0).sqrt())
    }

    /// Characteristic function `phi(t) = -alpha (T + i t I)^{-1} T^0`.
    pub fn char_fn(&self, t: f64) -> Result<Complex64> {
        let y = solve_complex_shifted(&self.t, t, &self.exit)?;
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..self.order() {
            acc += self.alpha[i] * y[i];
        }
        Ok(-acc)
    }

    /// Simulate `count` absorption times of the underlying jump process.
    /// Deterministic for a given `seed`.
    pub fn sample(&self, count: usize, seed: u64) -> Dataset {
        assert!(count >= 1, "sample count must be >= 1");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = (0..count)
            .map(|_| sample_absorption_time(&mut rng, &self.alpha, &self.t, &self.exit, None))
            .collect();
        Dataset::new(values).expect("simulated absorption times are valid observations")
    }

    /// Quantile by bisection on the monotone reliability function.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::Domain(format!("quantile level must be in [0, 1), got {p}")));
        }
        let survival_target = 1.0 - p;
        bisect_reliability(|x| self.reliability(x), survival_target, 1.0)
    }
}

/// Validate the sub-generator invariants of `t` and return the exit vector
/// `-t e`. Each violation is reported by name.
pub(crate) fn validate_sub_generator(t: &Array2<f64>, what: &str) -> Result<Array1<f64>> {
    let n = t.nrows();
    if n == 0 || t.ncols() != n {
        return Err(Error::InvalidRepresentation(format!(
            "{what} must be square of order >= 1, got {}x{}",
            t.nrows(),
            t.ncols()
        )));
    }
    if t.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidRepresentation(format!("non-finite entry in {what}")));
    }
    let mut exit = Array1::<f64>::zeros(n);
    for i in 0..n {
        let mut row_sum = 0.0;
        for j in 0..n {
            let v = t[[i, j]];
            if i == j {
                if v >= 0.0 {
                    return Err(Error::InvalidRepresentation(format!(
                        "diagonal entry of {what} at row {} is {v}, must be negative",
                        i + 1
                    )));
                }
            } else if v < 0.0 {
                return Err(Error::InvalidRepresentation(format!(
                    "negative off-diagonal entry in {what} at ({}, {})",
                    i + 1,
                    j + 1
                )));
            }
            row_sum += v;
        }
        if row_sum > MASS_TOLERANCE {
            return Err(Error::InvalidRepresentation(format!(
                "row-sum error ({what} row {} sums to {row_sum:+e})",
                i + 1
            )));
        }
        // Exit intensity; clamp the roundoff-negative case already admitted
        // by the row-sum tolerance.
        exit[i] = (-row_sum).max(0.0);
    }
    // Nonsingularity is guaranteed by the embedded Markov structure; verify
    // numerically so later solves cannot surprise.
    let inf_norm = t
        .rows()
        .into_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    if lu_factor(t, inf_norm).is_err() {
        return Err(Error::InvalidRepresentation(format!("singular {what}")));
    }
    Ok(exit)
}

/// Validate a probability row: nonnegative entries, total mass one.
pub(crate) fn validate_alpha(alpha: Vec<f64>, order: usize) -> Result<Array1<f64>> {
    if alpha.len() != order {
        return Err(Error::InvalidRepresentation(format!(
            "alpha length {} does not match order {order}",
            alpha.len()
        )));
    }
    if alpha.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidRepresentation("non-finite entry in alpha".into()));
    }
    let mut mass = 0.0;
    for (i, &v) in alpha.iter().enumerate() {
        if v < 0.0 {
            return Err(Error::InvalidRepresentation(format!(
                "negative alpha entry at position {} ({v})",
                i + 1
            )));
        }
        mass += v;
    }
    if (mass - 1.0).abs() > MASS_TOLERANCE {
        return Err(Error::InvalidRepresentation(format!(
            "alpha mass is {mass}, must be 1 (no atom at zero is supported)"
        )));
    }
    Ok(Array1::from(alpha))
}

/// Locate `R(x) = target` for a nonincreasing reliability function by
/// doubling out a bracket and bisecting to `1e-12 * scale`.
pub(crate) fn bisect_reliability(
    reliability: impl Fn(f64) -> Result<f64>,
    target: f64,
    initial_hi: f64,
) -> Result<f64> {
    let mut hi = initial_hi.max(f64::MIN_POSITIVE);
    let mut doublings = 0;
    while reliability(hi)? > target {
        hi *= 2.0;
        doublings += 1;
        if doublings > 400 {
            return Err(Error::Domain(format!(
                "quantile bracket did not close below reliability {target:e}"
            )));
        }
    }
    let mut lo = 0.0;
    let tol = 1e-12 * hi.max(1.0);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if reliability(mid)? > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Exponential holding time with the given rate via inverse transform.
pub(crate) fn exponential_holding(rng: &mut ChaCha8Rng, rate: f64) -> f64 {
    debug_assert!(rate > 0.0);
    // 1 - U lies in (0, 1], so the logarithm stays finite.
    -(1.0 - rng.random::<f64>()).ln() / rate
}

/// Draw an initial state from the probability row `alpha`.
pub(crate) fn sample_initial_state(rng: &mut ChaCha8Rng, alpha: &Array1<f64>) -> usize {
    let u = rng.random::<f64>();
    let mut acc = 0.0;
    for (i, &p) in alpha.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    alpha.len() - 1
}

/// One absorption time of the jump process with generator block `t` and exit
/// vector `exit`, started from `alpha`. When `switch` is given as
/// `(a, t2, exit2)`, the intensities change to the second set for the phase
/// occupied at time `a` — the one cut-point dynamics.
pub(crate) fn sample_absorption_time(
    rng: &mut ChaCha8Rng,
    alpha: &Array1<f64>,
    t: &Array2<f64>,
    exit: &Array1<f64>,
    switch: Option<(f64, &Array2<f64>, &Array1<f64>)>,
) -> f64 {
    let mut state = sample_initial_state(rng, alpha);
    let mut clock = 0.0;
    if let Some((cut, t2, exit2)) = switch {
        loop {
            let rate = -t[[state, state]];
            let hold = exponential_holding(rng, rate);
            if clock + hold > cut {
                // Still transient at the cut: freeze the phase and hand over
                // to the second-period intensities (memorylessness makes the
                // discarded residual exact).
                clock = cut;
                break;
            }
            clock += hold;
            match jump_destination(rng, t, exit, state) {
                None => return clock,
                Some(next) => state = next,
            }
        }
        run_until_absorption(rng, t2, exit2, state, clock)
    } else {
        run_until_absorption(rng, t, exit, state, clock)
    }
}

fn run_until_absorption(
    rng: &mut ChaCha8Rng,
    t: &Array2<f64>,
    exit: &Array1<f64>,
    mut state: usize,
    mut clock: f64,
) -> f64 {
    loop {
        let rate = -t[[state, state]];
        clock += exponential_holding(rng, rate);
        match jump_destination(rng, t, exit, state) {
            None => return clock,
            Some(next) => state = next,
        }
    }
}

/// Destination of one jump out of `state`: `None` for absorption, otherwise
/// the next transient state, chosen proportionally to the intensities.
fn jump_destination(
    rng: &mut ChaCha8Rng,
    t: &Array2<f64>,
    exit: &Array1<f64>,
    state: usize,
) -> Option<usize> {
    let rate = -t[[state, state]];
    let u = rng.random::<f64>() * rate;
    let mut acc = exit[state];
    if u < acc {
        return None;
    }
    let n = t.nrows();
    let mut fallback = None;
    for j in 0..n {
        if j == state {
            continue;
        }
        let w = t[[state, j]];
        if w > 0.0 {
            fallback = Some(j);
            acc += w;
            if u < acc {
                return Some(j);
            }
        }
    }
    // Rounding pushed u past the accumulated mass; take the last positive
    // destination, or absorption if the state only exits.
    if exit[state] > 0.0 && fallback.is_none() {
        None
    } else {
        fallback
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn exponential_is_valid() {
        let rep = PhaseTypeRep::new(vec![1.0], array![[-1.0]]).unwrap();
        assert_eq!(rep.exit_vector()[0], 1.0);
    }

    #[test]
    fn row_sum_violation_is_named() {
        let err = PhaseTypeRep::new(vec![0.5, 0.5], array![[-1.0, 2.0], [0.0, -1.0]]).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("row-sum error") && msg.contains("row 1"), "got: {msg}");
    }

    #[test]
    fn negative_alpha_is_named() {
        let err = PhaseTypeRep::new(vec![1.5, -0.5], array![[-1.0, 0.0], [0.0, -1.0]]).unwrap_err();
        assert!(err.to_string().contains("negative alpha entry"));
    }

    #[test]
    fn alpha_deficit_rejected() {
        let err = PhaseTypeRep::new(vec![0.9], array![[-1.0]]).unwrap_err();
        assert!(err.to_string().contains("alpha mass"));
    }

    #[test]
    fn paper_scale_erlang_specs_are_valid() {
        ErlangSpec::new(14, 16.74531).unwrap().rep();
        ErlangSpec::new(200, 164.1767).unwrap().rep();
    }

    #[test]
    fn erlang_rep_structure() {
        let rep = ErlangSpec::new(2, 2.0).unwrap().rep();
        assert_eq!(rep.sub_generator(), &array![[-2.0, 2.0], [0.0, -2.0]]);
        assert_eq!(rep.exit_vector(), &array![0.0, 2.0]);
        assert_eq!(rep.alpha(), &array![1.0, 0.0]);
        let single = ErlangSpec::new(1, 3.0).unwrap().rep();
        assert_eq!(single.sub_generator(), &array![[-3.0]]);
    }

    #[test]
    fn exponential_closed_forms() {
        let rep = ErlangSpec::new(1, 2.0).unwrap().rep();
        let e2 = (-2.0f64).exp();
        assert!((rep.pdf(1.0).unwrap() - 2.0 * e2).abs() < 1e-14);
        assert!((rep.reliability(1.0).unwrap() - e2).abs() < 1e-14);
    }

    #[test]
    fn erlang2_closed_form_pdf() {
        // Erlang(2, 1) density x e^{-x}.
        let rep = ErlangSpec::new(2, 1.0).unwrap().rep();
        assert!((rep.pdf(2.0).unwrap() - 2.0 * (-2.0f64).exp()).abs() < 1e-14);
    }

    #[test]
    fn boundary_values() {
        let rep = ErlangSpec::new(3, 1.3).unwrap().rep();
        assert_eq!(rep.cdf(0.0).unwrap(), 0.0);
        assert_eq!(rep.reliability(0.0).unwrap(), 1.0);
        assert_eq!(rep.cum_hazard(0.0).unwrap(), 0.0);
        assert!(matches!(rep.pdf(-0.1), Err(Error::Domain(_))));
    }

    #[test]
    fn erlang_moments() {
        let rep = ErlangSpec::new(2, 4.0).unwrap().rep();
        assert!((rep.mean().unwrap() - 0.5).abs() < 1e-12);
        assert!((rep.sd().unwrap() - 2f64.sqrt() / 4.0).abs() < 1e-12);

        // Single-phase model at the set-current scale.
        let rep = ErlangSpec::new(1, 2560.425).unwrap().rep();
        assert!((rep.mean().unwrap() - 1.0 / 2560.425).abs() < 1e-15);
    }

    #[test]
    fn memoryless_hazard_is_flat() {
        let rep = ErlangSpec::new(1, 3.7).unwrap().rep();
        for x in [0.0, 0.4, 2.0] {
            assert!((rep.hazard(x).unwrap() - 3.7).abs() < 1e-12);
        }
    }

    #[test]
    fn erlang2_hazard_closed_form() {
        // R(x) = (1 + x) e^{-x}, f(x) = x e^{-x}  =>  h(1) = 0.5.
        let rep = ErlangSpec::new(2, 1.0).unwrap().rep();
        assert!((rep.hazard(1.0).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn char_fn_at_zero_is_one() {
        let rep = ErlangSpec::new(3, 2.0).unwrap().rep();
        let phi = rep.char_fn(0.0).unwrap();
        assert!((phi - Complex64::new(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn exponential_char_fn_closed_form() {
        // lambda / (lambda - i t) at lambda = 1, t = 1 is 0.5 + 0.5i.
        let rep = ErlangSpec::new(1, 1.0).unwrap().rep();
        let phi = rep.char_fn(1.0).unwrap();
        assert!((phi - Complex64::new(0.5, 0.5)).norm() < 1e-14);
    }

    #[test]
    fn sampling_is_deterministic_and_nonnegative() {
        let rep = ErlangSpec::new(2, 4.0).unwrap().rep();
        let a = rep.sample(500, 42);
        let b = rep.sample(500, 42);
        assert_eq!(a.values(), b.values());
        assert!(a.values().iter().all(|v| *v >= 0.0));
        let c = rep.sample(500, 43);
        assert_ne!(a.values(), c.values());
    }

    #[test]
    fn tail_underflow_is_reported() {
        let rep = ErlangSpec::new(1, 1.0).unwrap().rep();
        assert!(matches!(
            rep.hazard(800.0),
            Err(Error::TailUnderflow { .. })
        ));
    }

    #[test]
    fn quantile_inverts_cdf() {
        let rep = ErlangSpec::new(3, 2.0).unwrap().rep();
        for p in [0.1, 0.5, 0.9, 0.999] {
            let q = rep.quantile(p).unwrap();
            assert!((rep.cdf(q).unwrap() - p).abs() < 1e-9);
        }
    }

    #[test]
    fn erlang_and_general_paths_agree() {
        let spec = ErlangSpec::new(5, 3.0).unwrap();
        let fast = spec.rep();
        let general = PhaseTypeRep::new(
            fast.alpha().to_vec(),
            fast.sub_generator().clone(),
        )
        .unwrap();
        for x in [0.0, 0.3, 1.0, 2.5] {
            assert!((fast.pdf(x).unwrap() - general.pdf(x).unwrap()).abs() < 1e-12);
            assert!(
                (fast.reliability(x).unwrap() - general.reliability(x).unwrap()).abs() < 1e-12
            );
        }
    }

    #[test]
    fn matrix_consistency_identities() {
        // A^{-1} A^0 = -e and A^{-2} A^0 = -A^{-1} e for the structured case.
        let rep = ErlangSpec::new(4, 2.5).unwrap().rep();
        let t = rep.sub_generator();
        let inf_norm = 2.0 * 2.5;
        let f = lu_factor(t, inf_norm).unwrap();
        let x = f.solve(rep.exit_vector());
        for v in x.iter() {
            assert!((v - -1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn occupancy_matches_expm_for_general_rep() {
        let mut rng = crate::testing_rng(5);
        let t = crate::random_sub_generator(&mut rng, 4);
        let rep = PhaseTypeRep::new(vec![0.4, 0.3, 0.2, 0.1], t.clone()).unwrap();
        let occ = rep.occupancy(0.7).unwrap();
        let dense = expm(&(&t * 0.7)).unwrap();
        let expected = rep.alpha().dot(&dense);
        for i in 0..4 {
            assert!((occ[i] - expected[i]).abs() < 1e-14);
        }
    }
}
