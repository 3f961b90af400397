//! One cut-point phase-type distributions: representation
//! `(a, alpha, T1, T2)` where the transient intensities switch from `T1` to
//! `T2` at the cut-point `a`. All measures branch on `x <= a` (the tie at
//! the cut belongs to the first period) and the second period starts from
//! the transient law `alpha e^{T1 a}`.

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::matrix::{
    self, erlang_exp_row, expm, log_poisson_terms, solve_complex_shifted, solve_real,
};
use crate::ph::{
    bisect_reliability, sample_absorption_time, validate_alpha, validate_sub_generator, Measures,
    UNDERFLOW_FLOOR,
};

/// Structured parameterization with Erlang internal structure in both
/// periods: shared phase count `n`, rate `lambda1` before the cut and
/// `lambda2` after it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OcpErlangSpec {
    cut_point: f64,
    phases: usize,
    rate1: f64,
    rate2: f64,
}

impl OcpErlangSpec {
    pub fn new(cut_point: f64, phases: usize, rate1: f64, rate2: f64) -> Result<Self> {
        if !(cut_point > 0.0 && cut_point.is_finite()) {
            return Err(Error::InvalidRepresentation(format!(
                "cut-point must be positive and finite, got {cut_point}"
            )));
        }
        if phases < 1 {
            return Err(Error::InvalidRepresentation("phases must be >= 1".into()));
        }
        for (name, rate) in [("rate1", rate1), ("rate2", rate2)] {
            if !(rate > 0.0 && rate.is_finite()) {
                return Err(Error::InvalidRepresentation(format!(
                    "{name} must be a positive finite number, got {rate}"
                )));
            }
        }
        Ok(Self { cut_point, phases, rate1, rate2 })
    }

    pub fn cut_point(&self) -> f64 {
        self.cut_point
    }

    pub fn phases(&self) -> usize {
        self.phases
    }

    pub fn rate1(&self) -> f64 {
        self.rate1
    }

    pub fn rate2(&self) -> f64 {
        self.rate2
    }

    /// Expand into the explicit representation. Both sub-generators are
    /// bidiagonal with the shared order; all `e^{T x}` products evaluate
    /// through the log-domain Poisson row rather than a dense exponential.
    pub fn rep(&self) -> OneCutPointRep {
        let n = self.phases;
        let build = |lambda: f64| {
            let mut t = Array2::<f64>::zeros((n, n));
            let mut exit = Array1::<f64>::zeros(n);
            for i in 0..n {
                t[[i, i]] = -lambda;
                if i + 1 < n {
                    t[[i, i + 1]] = lambda;
                }
            }
            exit[n - 1] = lambda;
            (t, exit)
        };
        let (t1, exit1) = build(self.rate1);
        let (t2, exit2) = build(self.rate2);
        let mut alpha = Array1::<f64>::zeros(n);
        alpha[0] = 1.0;
        let log_beta = log_poisson_terms(self.rate1 * self.cut_point, n);
        let beta = Array1::from_iter(log_beta.iter().map(|&l| l.exp()));
        OneCutPointRep {
            cut_point: self.cut_point,
            alpha,
            t1,
            t2,
            exit1,
            exit2,
            beta,
            structure: OcpStructure::Erlang {
                rate1: self.rate1,
                rate2: self.rate2,
                log_beta,
                log_factorials: log_factorial_table(n),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum OcpStructure {
    General,
    Erlang {
        rate1: f64,
        rate2: f64,
        /// Log of the second-period initial law, kept in log domain so the
        /// likelihood survives `rate1 * cut_point` far beyond 700.
        log_beta: Vec<f64>,
        /// `ln k!` for `k = 0..n`, so the per-observation likelihood loop
        /// allocates nothing.
        log_factorials: Vec<f64>,
    },
}

/// `ln k!` for `k = 0..n-1`.
fn log_factorial_table(n: usize) -> Vec<f64> {
    let mut table = Vec::with_capacity(n);
    let mut acc = 0.0;
    table.push(0.0);
    for k in 1..n {
        acc += (k as f64).ln();
        table.push(acc);
    }
    table
}

/// A validated one cut-point representation with the exit vectors and the
/// second-period initial law `alpha e^{T1 a}` precomputed.
#[derive(Debug, Clone, PartialEq)]
pub struct OneCutPointRep {
    cut_point: f64,
    alpha: Array1<f64>,
    t1: Array2<f64>,
    t2: Array2<f64>,
    exit1: Array1<f64>,
    exit2: Array1<f64>,
    beta: Array1<f64>,
    structure: OcpStructure,
}

impl OneCutPointRep {
    /// Validate `a > 0`, the phase-type invariants of `(alpha, T1)`, the
    /// sub-generator invariants of `T2`, and the shared order.
    pub fn new(cut_point: f64, alpha: Vec<f64>, t1: Array2<f64>, t2: Array2<f64>) -> Result<Self> {
        if !(cut_point > 0.0 && cut_point.is_finite()) {
            return Err(Error::InvalidRepresentation(format!(
                "cut-point must be positive and finite, got {cut_point}"
            )));
        }
        let exit1 = validate_sub_generator(&t1, "T1")?;
        let exit2 = validate_sub_generator(&t2, "T2")?;
        if t1.nrows() != t2.nrows() {
            return Err(Error::InvalidRepresentation(format!(
                "T1 order {} and T2 order {} must agree",
                t1.nrows(),
                t2.nrows()
            )));
        }
        let alpha = validate_alpha(alpha, t1.nrows())?;
        let transition = expm(&(&t1 * cut_point))?;
        let beta = alpha.dot(&transition);
        Ok(Self {
            cut_point,
            alpha,
            t1,
            t2,
            exit1,
            exit2,
            beta,
            structure: OcpStructure::General,
        })
    }

    pub fn cut_point(&self) -> f64 {
        self.cut_point
    }

    pub fn order(&self) -> usize {
        self.t1.nrows()
    }

    pub fn alpha(&self) -> &Array1<f64> {
        &self.alpha
    }

    pub fn sub_generator_1(&self) -> &Array2<f64> {
        &self.t1
    }

    pub fn sub_generator_2(&self) -> &Array2<f64> {
        &self.t2
    }

    pub fn exit_vector_1(&self) -> &Array1<f64> {
        &self.exit1
    }

    pub fn exit_vector_2(&self) -> &Array1<f64> {
        &self.exit2
    }

    /// The transient law at the cut, `alpha e^{T1 a}`: the initial vector of
    /// the second period.
    pub fn second_period_law(&self) -> &Array1<f64> {
        &self.beta
    }

    /// Transient occupancy row at `x`: `alpha e^{T1 x}` on the first branch,
    /// `alpha e^{T1 a} e^{T2 (x-a)}` on the second.
    fn occupancy(&self, x: f64) -> Result<Array1<f64>> {
        let n = self.order();
        match &self.structure {
            OcpStructure::Erlang { rate1, rate2, .. } => {
                if x <= self.cut_point {
                    Ok(Array1::from(erlang_exp_row(n, *rate1, x)))
                } else {
                    let terms = erlang_exp_row(n, *rate2, x - self.cut_point);
                    // (beta e^{T2 s})_j = sum_{i <= j} beta_i p_{j-i}(lambda2 s)
                    let mut occ = Array1::<f64>::zeros(n);
                    for j in 0..n {
                        let mut acc = 0.0;
                        for i in 0..=j {
                            acc += self.beta[i] * terms[j - i];
                        }
                        occ[j] = acc;
                    }
                    Ok(occ)
                }
            }
            OcpStructure::General => {
                if x <= self.cut_point {
                    let e = expm(&(&self.t1 * x))?;
                    Ok(self.alpha.dot(&e))
                } else {
                    let e = expm(&(&self.t2 * (x - self.cut_point)))?;
                    Ok(self.beta.dot(&e))
                }
            }
        }
    }

    fn check_nonneg(x: f64, what: &str) -> Result<()> {
        if !(x >= 0.0 && x.is_finite()) {
            return Err(Error::Domain(format!("{what} requires x >= 0, got {x}")));
        }
        Ok(())
    }

    /// Density: `alpha e^{T1 x} T1^0` for `x <= a`,
    /// `alpha e^{T1 a} e^{T2 (x-a)} T2^0` for `x > a`.
    pub fn pdf(&self, x: f64) -> Result<f64> {
        Self::check_nonneg(x, "pdf")?;
        let occ = self.occupancy(x)?;
        let exit = if x <= self.cut_point { &self.exit1 } else { &self.exit2 };
        Ok(occ.dot(exit).max(0.0))
    }

    /// Log-density, computed in pure log domain on the Erlang path so large
    /// `rate * time` products never underflow. The general path takes the
    /// logarithm of the dense evaluation.
    pub(crate) fn log_pdf(&self, x: f64) -> f64 {
        debug_assert!(x >= 0.0);
        match &self.structure {
            OcpStructure::Erlang { rate1, rate2, log_beta, log_factorials } => {
                let n = self.order();
                if x <= self.cut_point {
                    // log of lambda1 * Poisson(lambda1 x) pmf at n-1.
                    let mu = *rate1 * x;
                    let k = (n - 1) as f64;
                    let log_pmf = if mu == 0.0 {
                        if n == 1 { 0.0 } else { f64::NEG_INFINITY }
                    } else {
                        -mu + k * mu.ln() - log_factorials[n - 1]
                    };
                    rate1.ln() + log_pmf
                } else {
                    // Two-pass log-sum-exp over
                    //   log beta_i + log Poisson(lambda2 (x-a)) pmf at n-1-i
                    // without building the term vector.
                    let mu = *rate2 * (x - self.cut_point);
                    let log_mu = if mu > 0.0 { mu.ln() } else { f64::NEG_INFINITY };
                    let term = |i: usize| {
                        let k = n - 1 - i;
                        let log_pmf = if mu == 0.0 {
                            if k == 0 { 0.0 } else { f64::NEG_INFINITY }
                        } else {
                            -mu + k as f64 * log_mu - log_factorials[k]
                        };
                        log_beta[i] + log_pmf
                    };
                    let mut max = f64::NEG_INFINITY;
                    for i in 0..n {
                        max = max.max(term(i));
                    }
                    if !max.is_finite() {
                        return f64::NEG_INFINITY;
                    }
                    let mut sum = 0.0;
                    for i in 0..n {
                        sum += (term(i) - max).exp();
                    }
                    rate2.ln() + max + sum.ln()
                }
            }
            OcpStructure::General => match self.pdf(x) {
                Ok(p) => p.ln(),
                Err(_) => f64::NEG_INFINITY,
            },
        }
    }

    /// Reliability: continuous at the cut (both branches give
    /// `alpha e^{T1 a} e` there).
    pub fn reliability(&self, x: f64) -> Result<f64> {
        Self::check_nonneg(x, "reliability")?;
        let occ = self.occupancy(x)?;
        Ok(occ.sum().clamp(0.0, 1.0))
    }

    pub fn cdf(&self, x: f64) -> Result<f64> {
        Ok(1.0 - self.reliability(x)?)
    }

    pub fn hazard(&self, x: f64) -> Result<f64> {
        Ok(self.measures_at(x)?.hazard)
    }

    pub fn cum_hazard(&self, x: f64) -> Result<f64> {
        Ok(self.measures_at(x)?.cum_hazard)
    }

    /// All pointwise measures from one shared occupancy evaluation, so
    /// `cdf + reliability = 1` holds exactly as computed.
    pub fn measures_at(&self, x: f64) -> Result<Measures> {
        Self::check_nonneg(x, "measures")?;
        let occ = self.occupancy(x)?;
        let exit = if x <= self.cut_point { &self.exit1 } else { &self.exit2 };
        let pdf = occ.dot(exit).max(0.0);
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

    /// The density jump at the cut as the moment formulas see it:
    /// `alpha e^{T1 a} (T1^0 - T2^0)`.
    pub fn pdf_jump_at_cut(&self) -> f64 {
        self.beta.dot(&self.exit1) - self.beta.dot(&self.exit2)
    }

    /// Characteristic function
    /// `phi(t) = alpha e^{a(T1 + itI)} [(T1+itI)^{-1} T1^0 - (T2+itI)^{-1} T2^0]
    ///  - alpha (T1+itI)^{-1} T1^0`,
    /// with `e^{a(T1+itI)} = e^{ita} e^{a T1}` so no complex exponential is
    /// ever formed.
    pub fn char_fn(&self, t: f64) -> Result<Complex64> {
        let w1 = solve_complex_shifted(&self.t1, t, &self.exit1)?;
        let w2 = solve_complex_shifted(&self.t2, t, &self.exit2)?;
        let n = self.order();
        let mut beta_dot = Complex64::new(0.0, 0.0);
        let mut alpha_dot = Complex64::new(0.0, 0.0);
        for i in 0..n {
            beta_dot += self.beta[i] * (w1[i] - w2[i]);
            alpha_dot += self.alpha[i] * w1[i];
        }
        let phase = Complex64::new(0.0, t * self.cut_point).exp();
        Ok(phase * beta_dot - alpha_dot)
    }

    /// Largest `t` below which the moment-generating function converges:
    /// the smaller negated spectral abscissa of the two sub-generators
    /// (`min(lambda1, lambda2)` for the Erlang structure).
    pub fn mgf_bound(&self) -> f64 {
        match &self.structure {
            OcpStructure::Erlang { rate1, rate2, .. } => rate1.min(*rate2),
            OcpStructure::General => {
                let a1 = -matrix::spectral_abscissa(&self.t1);
                let a2 = -matrix::spectral_abscissa(&self.t2);
                a1.min(a2)
            }
        }
    }

    /// Moment-generating function, same matrix expression as [`char_fn`]
    /// with the real shift `t`. Defined for `t` strictly below
    /// [`mgf_bound`](Self::mgf_bound).
    ///
    /// [`char_fn`]: Self::char_fn
    pub fn mgf(&self, t: f64) -> Result<f64> {
        if !t.is_finite() {
            return Err(Error::Domain("mgf argument must be finite".into()));
        }
        let bound = self.mgf_bound();
        if t >= bound {
            return Err(Error::Domain(format!(
                "mgf diverges for t >= {bound} (got t = {t})"
            )));
        }
        let n = self.order();
        let eye = Array2::<f64>::eye(n);
        let s1 = &self.t1 + &(&eye * t);
        let s2 = &self.t2 + &(&eye * t);
        let w1 = solve_real(&s1, &self.exit1)?;
        let w2 = solve_real(&s2, &self.exit2)?;
        let beta_dot = self.beta.dot(&(&w1 - &w2));
        let alpha_dot = self.alpha.dot(&w1);
        Ok((t * self.cut_point).exp() * beta_dot - alpha_dot)
    }

    /// Mean from the matrix expression
    /// `mu = -alpha T1^{-1} e + alpha e^{T1 a} (T1^{-1} - T2^{-1}) e`.
    pub fn mean(&self) -> Result<f64> {
        let (u1, u2) = self.resolvent_ones()?;
        Ok(-self.alpha.dot(&u1) + self.beta.dot(&(&u1 - &u2)))
    }

    /// Second raw moment
    /// `E[X^2] = 2 alpha T1^{-2} e
    ///  - 2 alpha e^{T1 a} [T2^{-1}(aI - T2^{-1}) - T1^{-1}(aI - T1^{-1})] e`
    /// (the `a` inside the bracket is the scalar cut-point).
    pub fn second_moment(&self) -> Result<f64> {
        let (u1, u2) = self.resolvent_ones()?;
        let v1 = solve_real(&self.t1, &u1)?;
        let v2 = solve_real(&self.t2, &u2)?;
        let a = self.cut_point;
        let bracket = &(&u2 * a) - &v2 - &(&u1 * a) + &v1;
        Ok(2.0 * self.alpha.dot(&v1) - 2.0 * self.beta.dot(&bracket))
    }

    /// Standard deviation `sqrt(E[X^2] - mu^2)`.
    pub fn sd(&self) -> Result<f64> {
        let mu = self.mean()?;
        let m2 = self.second_moment()?;
        Ok((m2 - mu * mu).max(0.0).sqrt())
    }

    /// `(T1^{-1} e, T2^{-1} e)`.
    fn resolvent_ones(&self) -> Result<(Array1<f64>, Array1<f64>)> {
        let ones = Array1::<f64>::from_elem(self.order(), 1.0);
        let u1 = solve_real(&self.t1, &ones)?;
        let u2 = solve_real(&self.t2, &ones)?;
        Ok((u1, u2))
    }

    /// Simulate `count` absorption times of the time-inhomogeneous jump
    /// process: `T1` dynamics up to the cut, then `T2` dynamics from the
    /// phase occupied at the cut. Deterministic for a given `seed`.
    pub fn sample(&self, count: usize, seed: u64) -> Dataset {
        assert!(count >= 1, "sample count must be >= 1");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = (0..count)
            .map(|_| {
                sample_absorption_time(
                    &mut rng,
                    &self.alpha,
                    &self.t1,
                    &self.exit1,
                    Some((self.cut_point, &self.t2, &self.exit2)),
                )
            })
            .collect();
        Dataset::new(values).expect("simulated absorption times are valid observations")
    }

    /// Quantile by bisection on the monotone reliability function.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::Domain(format!("quantile level must be in [0, 1), got {p}")));
        }
        let initial_hi = match &self.structure {
            OcpStructure::Erlang { rate2, .. } => {
                self.cut_point + 50.0 * self.order() as f64 / rate2
            }
            OcpStructure::General => self.cut_point + 1.0,
        };
        bisect_reliability(|x| self.reliability(x), 1.0 - p, initial_hi)
    }
}
