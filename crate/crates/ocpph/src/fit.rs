//! Maximum-likelihood fitting: the one cut-point log-likelihood, cut-point
//! profiling over an empirical-quantile grid with an inner bounded
//! quasi-Newton optimization of the two Erlang rates, phase-count selection,
//! and parametric-bootstrap confidence intervals for the cut-point.

use rayon::prelude::*;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::matrix::log_poisson_terms;
use crate::ocp::{OcpErlangSpec, OneCutPointRep};
use crate::optim::optimize_box;
use crate::ph::ErlangSpec;

/// Log of the density floor below which an observation's contribution is
/// replaced by the finite penalty.
const LOG_DENSITY_FLOOR: f64 = -690.77552789821368; // ln(1e-300)

/// Penalty added per observation whose density underflows the floor, so the
/// objective stays finite for the optimizer.
const PENALTY_PER_POINT: f64 = -1e10;

/// Fitting configuration. The defaults are the ones used throughout: a
/// 49-point interior-quantile grid for the cut-point, rate bounds wide
/// enough for voltage and current scales, three rate multistarts
/// (moment-matching start, half, double), and a 500-replicate bootstrap.
#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    /// Inclusive phase-count search interval for [`select_phases`].
    pub phase_range: (usize, usize),
    /// Number of interior empirical quantiles tried as cut-point candidates.
    pub cutpoint_grid_size: usize,
    /// Box constraints for both rates.
    pub rate_bounds: (f64, f64),
    /// Number of rate starts per cut-point candidate (1..=3).
    pub multistarts: usize,
    /// Bootstrap replicate count `B`; 0 skips interval/p-value work.
    pub bootstrap_reps: usize,
    /// Confidence level for the cut-point interval.
    pub confidence_level: f64,
    /// Master seed; every replicate derives its own stream from it.
    pub seed: u64,
    /// Projected-gradient stopping tolerance of the inner optimizer.
    pub tolerance: f64,
    /// Iteration cap of the inner optimizer.
    pub max_iterations: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            phase_range: (1, 30),
            cutpoint_grid_size: 49,
            rate_bounds: (1e-6, 1e8),
            multistarts: 3,
            bootstrap_reps: 500,
            confidence_level: 0.95,
            seed: 0,
            tolerance: 1e-8,
            max_iterations: 500,
        }
    }
}

impl FitConfig {
    fn validate(&self) -> Result<()> {
        if self.phase_range.0 < 1 || self.phase_range.0 > self.phase_range.1 {
            return Err(Error::InvalidInput(format!(
                "phase range [{}, {}] must be a nonempty interval with lower bound >= 1",
                self.phase_range.0, self.phase_range.1
            )));
        }
        if !(self.rate_bounds.0 > 0.0 && self.rate_bounds.0 < self.rate_bounds.1) {
            return Err(Error::InvalidInput("rate bounds must satisfy 0 < lo < hi".into()));
        }
        if self.cutpoint_grid_size < 1 {
            return Err(Error::InvalidInput("cut-point grid size must be >= 1".into()));
        }
        if self.multistarts < 1 {
            return Err(Error::InvalidInput("multistarts must be >= 1".into()));
        }
        if !(self.confidence_level > 0.0 && self.confidence_level < 1.0) {
            return Err(Error::InvalidInput("confidence level must lie in (0, 1)".into()));
        }
        Ok(())
    }

    /// Cheaper settings for the per-replicate refits inside bootstrap loops:
    /// a coarser cut-point grid, a single rate start, and a looser inner
    /// tolerance. The refit stays a full grid-profiled fit, just at lower
    /// resolution; the generating cut-point is injected as an extra grid
    /// candidate by the bootstrap drivers.
    pub(crate) fn bootstrap_refit(&self) -> FitConfig {
        FitConfig {
            cutpoint_grid_size: self.cutpoint_grid_size.min(9),
            multistarts: 1,
            bootstrap_reps: 0,
            tolerance: self.tolerance.max(1e-6),
            max_iterations: self.max_iterations.min(150),
            ..self.clone()
        }
    }
}

/// The model a fit produced.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FittedModel {
    PhErlang(ErlangSpec),
    OcpErlang(OcpErlangSpec),
}

impl FittedModel {
    pub fn phases(&self) -> usize {
        match self {
            FittedModel::PhErlang(s) => s.phases(),
            FittedModel::OcpErlang(s) => s.phases(),
        }
    }

    /// Simulate a dataset of the given size from the fitted model.
    pub fn sample(&self, count: usize, seed: u64) -> Dataset {
        match self {
            FittedModel::PhErlang(s) => s.rep().sample(count, seed),
            FittedModel::OcpErlang(s) => s.rep().sample(count, seed),
        }
    }

    /// Distribution function of the fitted model.
    pub fn cdf(&self, x: f64) -> Result<f64> {
        match self {
            FittedModel::PhErlang(s) => s.rep().cdf(x),
            FittedModel::OcpErlang(s) => s.rep().cdf(x),
        }
    }
}

/// Fit output: the model, its log-likelihood, the optional cut-point
/// confidence interval, and the phase-count trace.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub model: FittedModel,
    pub log_likelihood: f64,
    /// Percentile bootstrap interval for the cut-point, when requested.
    pub cutpoint_ci: Option<(f64, f64)>,
    pub converged: bool,
    /// Objective evaluations spent across grid, multistarts, and polish.
    pub evaluations: usize,
    /// `(n, best log-likelihood)` for every phase count tried.
    pub trace: Vec<(usize, f64)>,
}

/// A log-likelihood value together with the flag that marks whether any
/// observation fell below the density floor and was replaced by the finite
/// penalty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogLikelihood {
    pub value: f64,
    pub penalized: bool,
}

/// One cut-point log-likelihood: the sum of log densities with the tie at
/// the cut assigned to the first branch. Never returns minus infinity;
/// underflowing observations contribute the finite penalty instead.
pub fn loglik_ocp(rep: &OneCutPointRep, data: &Dataset) -> LogLikelihood {
    let mut value = 0.0;
    let mut penalized = false;
    for &x in data.values() {
        let lp = rep.log_pdf(x);
        if lp < LOG_DENSITY_FLOOR || !lp.is_finite() {
            value += PENALTY_PER_POINT;
            penalized = true;
        } else {
            value += lp;
        }
    }
    LogLikelihood { value, penalized }
}

/// Erlang log-likelihood under the same floor-and-penalty rule.
pub fn loglik_erlang(spec: &ErlangSpec, data: &Dataset) -> LogLikelihood {
    let n = spec.phases();
    let rate = spec.rate();
    let log_rate = rate.ln();
    let mut value = 0.0;
    let mut penalized = false;
    for &x in data.values() {
        let lp = log_rate + log_poisson_terms(rate * x, n)[n - 1];
        if lp < LOG_DENSITY_FLOOR || !lp.is_finite() {
            value += PENALTY_PER_POINT;
            penalized = true;
        } else {
            value += lp;
        }
    }
    LogLikelihood { value, penalized }
}

/// Closed-form Erlang rate MLE with the phase count fixed:
/// `lambda_hat = n / mean(data)`.
pub fn mle_erlang_rate(n: usize, data: &Dataset) -> Result<f64> {
    if n < 1 {
        return Err(Error::InvalidInput("phase count must be >= 1".into()));
    }
    let mean = data.mean();
    if mean <= 0.0 {
        return Err(Error::DegenerateData(
            "all observations are zero; the Erlang rate MLE is undefined".into(),
        ));
    }
    Ok(n as f64 / mean)
}

/// Fit a plain Erlang phase-type model with `n` phases (closed form).
pub fn fit_ph_erlang(data: &Dataset, n: usize) -> Result<FitResult> {
    let rate = mle_erlang_rate(n, data)?;
    let spec = ErlangSpec::new(n, rate)?;
    let ll = loglik_erlang(&spec, data);
    Ok(FitResult {
        model: FittedModel::PhErlang(spec),
        log_likelihood: ll.value,
        cutpoint_ci: None,
        converged: true,
        evaluations: 1,
        trace: vec![(n, ll.value)],
    })
}

/// Derive an independent replicate seed from the master seed; replicate
/// results are reduced by index, so outcomes do not depend on execution
/// order.
pub(crate) fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add((index.wrapping_add(1)).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Poisson mean `mu` whose upper tail `P(Poisson(mu) >= n)` hits `target`,
/// by bisection. This inverts the Erlang CDF `F(a) = P(Poisson(lambda a) >= n)`
/// for the warm start.
fn poisson_tail_inverse(n: usize, target: f64) -> f64 {
    let tail = |mu: f64| {
        let mut below = 0.0;
        for lp in log_poisson_terms(mu, n) {
            below += lp.exp();
        }
        1.0 - below
    };
    let mut hi = n as f64 + 1.0;
    while tail(hi) < target && hi < 1e6 {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if tail(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-9 * hi.max(1.0) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Warm start for the two rates at a given cut-point candidate. `lambda1`
/// matches the first-branch probability mass (the Erlang CDF at `a` equals
/// the empirical fraction below the cut); `lambda2` matches the mean
/// residual beyond the cut against the phases left unconsumed at the cut.
/// Both are clamped into the rate bounds.
fn rate_warm_start(data: &Dataset, a: f64, n: usize, bounds: (f64, f64)) -> (f64, f64) {
    let m = data.len();
    let lower_count = data.count_at_most(a);
    let values = data.values();
    let fraction = (lower_count as f64 / m as f64).clamp(1e-4, 1.0 - 1e-4);
    let mu = poisson_tail_inverse(n, fraction);
    let lambda1 = if a > 0.0 { mu / a } else { bounds.1 };

    let residual: f64 = values[lower_count..].iter().map(|v| v - a).sum::<f64>()
        / (m - lower_count).max(1) as f64;
    let phases_left = (n as f64 - mu).max(1.0);
    let lambda2 = if residual > 0.0 { phases_left / residual } else { bounds.1 };

    (lambda1.clamp(bounds.0, bounds.1), lambda2.clamp(bounds.0, bounds.1))
}

/// Log-likelihood evaluator for the Erlang-structured model that bypasses
/// matrix construction. The first branch collapses to sufficient statistics
/// (its per-observation log density is concave in `x`, so the density-floor
/// check only needs the segment endpoints); the second branch runs the
/// log-domain convolution per observation.
struct ErlangLoglik<'d> {
    data: &'d Dataset,
    n: usize,
    cut: f64,
    split: usize,
    lower_sum: f64,
    lower_log_sum: f64,
    lower_has_zero: bool,
    log_factorials: Vec<f64>,
}

impl<'d> ErlangLoglik<'d> {
    fn new(data: &'d Dataset, n: usize, cut: f64) -> Self {
        let split = data.count_at_most(cut);
        let lower = &data.values()[..split];
        let lower_has_zero = lower.first().is_some_and(|&v| v == 0.0);
        let lower_sum: f64 = lower.iter().sum();
        let lower_log_sum: f64 = lower.iter().filter(|v| **v > 0.0).map(|v| v.ln()).sum();
        let mut log_factorials = Vec::with_capacity(n);
        let mut acc = 0.0;
        log_factorials.push(0.0);
        for k in 1..n {
            acc += (k as f64).ln();
            log_factorials.push(acc);
        }
        Self {
            data,
            n,
            cut,
            split,
            lower_sum,
            lower_log_sum,
            lower_has_zero,
            log_factorials,
        }
    }

    /// Per-observation log density of the first branch.
    fn branch1_log_pdf(&self, lambda1: f64, x: f64) -> f64 {
        let n = self.n;
        if x == 0.0 {
            return if n == 1 { lambda1.ln() } else { f64::NEG_INFINITY };
        }
        n as f64 * lambda1.ln() + (n - 1) as f64 * x.ln()
            - lambda1 * x
            - self.log_factorials[n - 1]
    }

    fn eval(&self, lambda1: f64, lambda2: f64) -> LogLikelihood {
        let values = self.data.values();
        let n = self.n;
        let mut value = 0.0;
        let mut penalized = false;

        if self.split > 0 {
            let lo = values[0];
            let hi = values[self.split - 1];
            let endpoints_ok = !self.lower_has_zero
                && self.branch1_log_pdf(lambda1, lo) >= LOG_DENSITY_FLOOR
                && self.branch1_log_pdf(lambda1, hi) >= LOG_DENSITY_FLOOR;
            if endpoints_ok {
                value += self.split as f64
                    * (n as f64 * lambda1.ln() - self.log_factorials[n - 1])
                    + (n - 1) as f64 * self.lower_log_sum
                    - lambda1 * self.lower_sum;
            } else {
                for &x in &values[..self.split] {
                    let lp = self.branch1_log_pdf(lambda1, x);
                    if lp < LOG_DENSITY_FLOOR || !lp.is_finite() {
                        value += PENALTY_PER_POINT;
                        penalized = true;
                    } else {
                        value += lp;
                    }
                }
            }
        }

        if self.split < values.len() {
            // log beta_i = log Poisson(lambda1 * a) pmf at i.
            let mu1 = lambda1 * self.cut;
            let log_mu1 = if mu1 > 0.0 { mu1.ln() } else { f64::NEG_INFINITY };
            let log_beta = |i: usize| {
                if mu1 == 0.0 {
                    return if i == 0 { 0.0 } else { f64::NEG_INFINITY };
                }
                -mu1 + i as f64 * log_mu1 - self.log_factorials[i]
            };
            let log_l2 = lambda2.ln();
            for &x in &values[self.split..] {
                let mu2 = lambda2 * (x - self.cut);
                let log_mu2 = if mu2 > 0.0 { mu2.ln() } else { f64::NEG_INFINITY };
                let term = |i: usize| {
                    let k = n - 1 - i;
                    let log_pmf = if mu2 == 0.0 {
                        if k == 0 { 0.0 } else { f64::NEG_INFINITY }
                    } else {
                        -mu2 + k as f64 * log_mu2 - self.log_factorials[k]
                    };
                    log_beta(i) + log_pmf
                };
                let mut max = f64::NEG_INFINITY;
                for i in 0..n {
                    max = max.max(term(i));
                }
                let lp = if max.is_finite() {
                    let mut sum = 0.0;
                    for i in 0..n {
                        sum += (term(i) - max).exp();
                    }
                    log_l2 + max + sum.ln()
                } else {
                    f64::NEG_INFINITY
                };
                if lp < LOG_DENSITY_FLOOR || !lp.is_finite() {
                    value += PENALTY_PER_POINT;
                    penalized = true;
                } else {
                    value += lp;
                }
            }
        }

        LogLikelihood { value, penalized }
    }
}

struct CandidateFit {
    cut_point: f64,
    rates: (f64, f64),
    log_likelihood: f64,
    evaluations: usize,
}

/// Maximize the rate pair for a fixed cut-point candidate; `None` when the
/// candidate leaves fewer than three observations on either side.
fn fit_rates_at_cut(
    data: &Dataset,
    a: f64,
    n: usize,
    config: &FitConfig,
) -> Result<Option<CandidateFit>> {
    let m = data.len();
    let lower = data.count_at_most(a);
    if lower < 3 || m - lower < 3 {
        return Ok(None);
    }
    // Rates are optimized on the log scale: scale-equivariant steps and
    // even conditioning across the voltage/current magnitudes.
    let log_bounds = (config.rate_bounds.0.ln(), config.rate_bounds.1.ln());
    let bounds = [log_bounds, log_bounds];
    let (l1, l2) = rate_warm_start(data, a, n, config.rate_bounds);
    let starts: [(f64, f64); 3] = [(l1, l2), (l1 / 2.0, l2 / 2.0), (l1 * 2.0, l2 * 2.0)];

    let context = ErlangLoglik::new(data, n, a);
    let mut best: Option<CandidateFit> = None;
    let mut evaluations = 0usize;
    for &(s1, s2) in starts.iter().take(config.multistarts) {
        let start = [
            s1.clamp(config.rate_bounds.0, config.rate_bounds.1).ln(),
            s2.clamp(config.rate_bounds.0, config.rate_bounds.1).ln(),
        ];
        let objective = |theta: &[f64]| context.eval(theta[0].exp(), theta[1].exp()).value;
        let outcome = optimize_box(objective, &bounds, &start, config.tolerance, config.max_iterations)?;
        evaluations += outcome.evaluations;
        if best.as_ref().is_none_or(|b| outcome.value > b.log_likelihood) {
            best = Some(CandidateFit {
                cut_point: a,
                rates: (outcome.point[0].exp(), outcome.point[1].exp()),
                log_likelihood: outcome.value,
                evaluations: 0,
            });
        }
    }
    Ok(best.map(|mut b| {
        b.evaluations = evaluations;
        b
    }))
}

/// Maximum-likelihood fit of the Erlang-structured one cut-point model with
/// `n` phases: profile the cut-point over interior empirical quantiles,
/// optimize the rate pair at each candidate, then jointly polish
/// `(a, lambda1, lambda2)` inside the inter-observation interval of the
/// winning candidate (where the likelihood is smooth in `a`).
pub fn fit_ocp_erlang(data: &Dataset, n: usize, config: &FitConfig) -> Result<FitResult> {
    fit_ocp_erlang_with_hint(data, n, config, None)
}

/// [`fit_ocp_erlang`] with an extra cut-point candidate injected into the
/// grid. Bootstrap refits pass the generating cut-point so a coarse grid
/// still has a candidate in the right inter-observation interval.
pub(crate) fn fit_ocp_erlang_with_hint(
    data: &Dataset,
    n: usize,
    config: &FitConfig,
    cut_hint: Option<f64>,
) -> Result<FitResult> {
    config.validate()?;
    if n < 1 {
        return Err(Error::InvalidInput("phase count must be >= 1".into()));
    }
    let m = data.len();
    if m < 10 {
        return Err(Error::UnfittableData(format!(
            "need at least 10 observations to fit a cut-point model, got {m}"
        )));
    }

    // Candidate cut-points: interior empirical quantiles, strictly between
    // the extremes so both branches keep observations. The quantile grid is
    // blind to cut-points whose branch holds less mass than one grid step
    // (the set-voltage regime has F(a) ~ 0.002), so midpoints between the
    // lowest and highest admissible order statistics are added as well.
    let grid = config.cutpoint_grid_size;
    let values = data.values();
    let mut candidates: Vec<f64> = (1..=grid)
        .map(|k| data.quantile(k as f64 / (grid + 1) as f64))
        .collect();
    let edge_ranks: &[usize] = if cut_hint.is_some() {
        // Refit path: the hint marks the interesting interval; keep only
        // the lowest admissible edge candidates so replicates whose branch
        // lost mass can still follow the cut down.
        &[3, 4, 5]
    } else {
        &[3, 4, 5, 7, 10, 15, 22, 32]
    };
    for &k in edge_ranks {
        if k + 3 <= m {
            candidates.push(0.5 * (values[k - 1] + values[k]));
            candidates.push(0.5 * (values[m - k - 1] + values[m - k]));
        }
    }
    if let Some(hint) = cut_hint {
        candidates.push(hint);
    }
    candidates.retain(|&a| a > data.min() && a < data.max());
    candidates.sort_by(|x, y| x.partial_cmp(y).expect("finite candidates"));
    candidates.dedup();

    let mut best: Option<CandidateFit> = None;
    let mut evaluations = 0usize;
    for &a in &candidates {
        if let Some(fit) = fit_rates_at_cut(data, a, n, config)? {
            evaluations += fit.evaluations;
            if best.as_ref().is_none_or(|b| fit.log_likelihood > b.log_likelihood) {
                best = Some(fit);
            }
        }
    }
    let best = best.ok_or_else(|| {
        Error::UnfittableData(
            "no cut-point candidate keeps at least three observations on each side".into(),
        )
    })?;

    // Joint polish restricted to the inter-observation interval containing
    // the winning candidate: the branch assignment is constant there, so
    // the likelihood is smooth in the cut-point.
    let upper_idx = values.partition_point(|v| *v <= best.cut_point);
    let lower_idx = upper_idx.saturating_sub(1);
    let a_lo = values[lower_idx];
    let a_hi = f64::from_bits(values[upper_idx].to_bits() - 1);
    let log_bounds = (config.rate_bounds.0.ln(), config.rate_bounds.1.ln());
    let bounds = [(a_lo, a_hi.max(a_lo)), log_bounds, log_bounds];
    let start = [
        best.cut_point.clamp(bounds[0].0, bounds[0].1),
        best.rates.0.ln(),
        best.rates.1.ln(),
    ];
    let objective = |theta: &[f64]| {
        ErlangLoglik::new(data, n, theta[0])
            .eval(theta[1].exp(), theta[2].exp())
            .value
    };
    let polish = optimize_box(objective, &bounds, &start, config.tolerance, config.max_iterations)?;
    evaluations += polish.evaluations;

    let (a_fit, l1_fit, l2_fit, ll) = if polish.value >= best.log_likelihood {
        (polish.point[0], polish.point[1].exp(), polish.point[2].exp(), polish.value)
    } else {
        (best.cut_point, best.rates.0, best.rates.1, best.log_likelihood)
    };
    let spec = OcpErlangSpec::new(a_fit, n, l1_fit, l2_fit)?;
    Ok(FitResult {
        model: FittedModel::OcpErlang(spec),
        log_likelihood: ll,
        cutpoint_ci: None,
        converged: polish.converged,
        evaluations,
        trace: vec![(n, ll)],
    })
}

/// Fit every phase count in `config.phase_range` and keep the maximum
/// log-likelihood, stopping early once the likelihood has decreased for
/// five consecutive counts beyond the running best. The Erlang OCP model
/// has the same free-parameter count for every `n`, so the raw likelihood
/// is comparable across the range.
pub fn select_phases(data: &Dataset, config: &FitConfig) -> Result<FitResult> {
    config.validate()?;
    let (n_min, n_max) = config.phase_range;
    let mut best: Option<FitResult> = None;
    let mut trace: Vec<(usize, f64)> = Vec::new();
    let mut evaluations = 0usize;
    let mut decreases = 0usize;
    for n in n_min..=n_max {
        let fit = fit_ocp_erlang(data, n, config)?;
        evaluations += fit.evaluations;
        trace.push((n, fit.log_likelihood));
        match &best {
            Some(b) if fit.log_likelihood <= b.log_likelihood => {
                decreases += 1;
                if decreases >= 5 {
                    break;
                }
            }
            _ => {
                decreases = 0;
                best = Some(fit);
            }
        }
    }
    let mut best = best.expect("phase range is nonempty");
    best.trace = trace;
    best.evaluations = evaluations;
    Ok(best)
}

/// Same selection rule for the plain Erlang model, where each fit is the
/// closed-form rate MLE.
pub fn select_phases_ph(data: &Dataset, config: &FitConfig) -> Result<FitResult> {
    config.validate()?;
    let (n_min, n_max) = config.phase_range;
    let mut best: Option<FitResult> = None;
    let mut trace: Vec<(usize, f64)> = Vec::new();
    let mut decreases = 0usize;
    for n in n_min..=n_max {
        let fit = fit_ph_erlang(data, n)?;
        trace.push((n, fit.log_likelihood));
        match &best {
            Some(b) if fit.log_likelihood <= b.log_likelihood => {
                decreases += 1;
                if decreases >= 5 {
                    break;
                }
            }
            _ => {
                decreases = 0;
                best = Some(fit);
            }
        }
    }
    let mut best = best.expect("phase range is nonempty");
    best.trace = trace;
    best.evaluations = best.trace.len();
    Ok(best)
}

/// Status of a bootstrap cut-point interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CiFlag {
    /// Interval computed and it contains the point estimate.
    Ok,
    /// `bootstrap_reps` was zero; no interval was computed.
    Skipped,
    /// Interval computed but the point estimate lies outside it.
    PointEstimateOutside,
}

/// Percentile bootstrap interval for the cut-point.
#[derive(Debug, Clone, PartialEq)]
pub struct CutpointCi {
    pub level: f64,
    pub interval: Option<(f64, f64)>,
    pub flag: CiFlag,
    /// Replicates that refit successfully.
    pub replicates_used: usize,
}

/// Parametric bootstrap percentile interval for the cut-point: simulate
/// `B` datasets of size `m` from the fitted model, refit `(a, l1, l2)` with
/// the phase count fixed, and take the percentile interval of the
/// replicate cut-points. Replicate seeds derive from `config.seed` and the
/// replicate index, so the interval is reproducible and independent of
/// scheduling.
pub fn bootstrap_ci_cutpoint(
    data: &Dataset,
    fit: &FitResult,
    config: &FitConfig,
) -> Result<CutpointCi> {
    config.validate()?;
    let FittedModel::OcpErlang(spec) = fit.model else {
        return Err(Error::InvalidInput(
            "cut-point interval requires a fitted one cut-point model".into(),
        ));
    };
    let b = config.bootstrap_reps;
    if b == 0 {
        return Ok(CutpointCi {
            level: config.confidence_level,
            interval: None,
            flag: CiFlag::Skipped,
            replicates_used: 0,
        });
    }
    if b < 100 {
        return Err(Error::InvalidInput(format!(
            "bootstrap_reps must be 0 (skipped) or >= 100 for reporting, got {b}"
        )));
    }
    let m = data.len();
    let n = spec.phases();
    let rep = spec.rep();
    let refit_config = config.bootstrap_refit();

    let mut replicate_cuts: Vec<Option<f64>> = (0..b)
        .into_par_iter()
        .map(|i| {
            let seed = derive_seed(config.seed, i as u64);
            let replicate = rep.sample(m, seed);
            fit_ocp_erlang_with_hint(&replicate, n, &refit_config, Some(spec.cut_point()))
                .ok()
                .map(|r| match r.model {
                    FittedModel::OcpErlang(s) => s.cut_point(),
                    FittedModel::PhErlang(_) => unreachable!("ocp fit returns an ocp model"),
                })
        })
        .collect();

    let mut cuts: Vec<f64> = replicate_cuts.drain(..).flatten().collect();
    let failures = b - cuts.len();
    if failures * 5 > b {
        return Err(Error::UnreliableCi { completed: cuts.len(), requested: b });
    }
    cuts.sort_by(|x, y| x.partial_cmp(y).expect("finite cut-points"));
    let lo = percentile(&cuts, (1.0 - config.confidence_level) / 2.0);
    let hi = percentile(&cuts, (1.0 + config.confidence_level) / 2.0);
    let flag = if (lo..=hi).contains(&spec.cut_point()) {
        CiFlag::Ok
    } else {
        CiFlag::PointEstimateOutside
    };
    Ok(CutpointCi {
        level: config.confidence_level,
        interval: Some((lo, hi)),
        flag,
        replicates_used: cuts.len(),
    })
}

/// Interpolated percentile of a sorted slice.
fn percentile(sorted: &[f64], p: f64) -> f64 {
    let m = sorted.len();
    if m == 1 {
        return sorted[0];
    }
    let pos = p.clamp(0.0, 1.0) * (m - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}
