//! Goodness of fit and empirical curve estimation: the Anderson-Darling
//! statistic with a refit-per-replicate parametric-bootstrap p-value, the
//! ECDF, the Nelson-Aalen cumulative hazard, and kernel density / hazard
//! smoothers for plot overlays.
//!
//! The hazard smoother uses one global bandwidth, not the local-bandwidth
//! selection of the reference implementation; it is an illustrative
//! overlay, not a contractual estimator.

use rayon::prelude::*;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::fit::{derive_seed, fit_ocp_erlang_with_hint, fit_ph_erlang, FitConfig, FitResult, FittedModel};

/// Anderson-Darling test output. The p-value follows the bootstrap rule
/// `(1 + #{replicate A^2 >= observed}) / (B + 1)` with `B` the replicates
/// that refit successfully.
#[derive(Debug, Clone, PartialEq)]
pub struct GofReport {
    pub a_squared: f64,
    pub p_value: f64,
    /// Successfully refitted replicates backing the p-value.
    pub bootstrap_reps: usize,
    /// The replicate statistics themselves, in replicate-index order.
    pub replicate_stats: Vec<f64>,
}

/// Anderson-Darling statistic of `data` against the fully specified `cdf`:
/// `A^2 = -m - (1/m) sum (2i-1) [ln F(x_(i)) + ln(1 - F(x_(m+1-i)))]`.
///
/// Fails with a boundary error naming the observation when the CDF
/// evaluates to exactly 0 or 1 there.
pub fn anderson_darling(data: &Dataset, cdf: impl Fn(f64) -> Result<f64>) -> Result<f64> {
    let values = data.values();
    let m = values.len();
    let mut f = Vec::with_capacity(m);
    for (i, &x) in values.iter().enumerate() {
        let v = cdf(x)?;
        if v <= 0.0 || v >= 1.0 {
            return Err(Error::CdfBoundary { index: i + 1, x, value: v });
        }
        f.push(v);
    }
    let mut sum = 0.0;
    for i in 0..m {
        let weight = (2 * (i + 1) - 1) as f64;
        sum += weight * (f[i].ln() + (1.0 - f[m - 1 - i]).ln());
    }
    let m_f = m as f64;
    Ok(-m_f - sum / m_f)
}

/// Parametric-bootstrap p-value for a fitted model. `model` must be the
/// fit of `data`, since the replicate pipeline mirrors exactly that: each
/// replicate is simulated from the fitted model, refitted from scratch
/// (cut-point grid and rates for the OCP model, closed-form rate for the
/// plain Erlang), and scored against its own refit, so the p-value accounts
/// for parameter estimation. Deterministic for a given `config.seed`.
pub fn ad_pvalue_bootstrap(
    data: &Dataset,
    model: &FittedModel,
    config: &FitConfig,
) -> Result<GofReport> {
    let b = config.bootstrap_reps;
    if b < 99 {
        return Err(Error::InvalidInput(format!(
            "bootstrap p-values need at least 99 replicates, got {b}"
        )));
    }
    let observed = anderson_darling(data, |x| model.cdf(x))?;
    let m = data.len();
    let refit_config = config.bootstrap_refit();

    let replicate_stats: Vec<Option<f64>> = (0..b)
        .into_par_iter()
        .map(|i| {
            let seed = derive_seed(config.seed, i as u64);
            let replicate = model.sample(m, seed);
            let refit = refit_replicate(&replicate, model, &refit_config).ok()?;
            anderson_darling(&replicate, |x| refit.cdf(x)).ok()
        })
        .collect();

    let stats: Vec<f64> = replicate_stats.into_iter().flatten().collect();
    let failures = b - stats.len();
    if failures * 5 > b {
        return Err(Error::UnreliablePValue { completed: stats.len(), requested: b });
    }
    let exceeding = stats.iter().filter(|&&s| s >= observed).count();
    let effective = stats.len();
    Ok(GofReport {
        a_squared: observed,
        p_value: (1.0 + exceeding as f64) / (effective as f64 + 1.0),
        bootstrap_reps: effective,
        replicate_stats: stats,
    })
}

fn refit_replicate(
    replicate: &Dataset,
    model: &FittedModel,
    config: &FitConfig,
) -> Result<FittedModel> {
    let refit: FitResult = match model {
        FittedModel::OcpErlang(spec) => {
            fit_ocp_erlang_with_hint(replicate, spec.phases(), config, Some(spec.cut_point()))?
        }
        FittedModel::PhErlang(spec) => fit_ph_erlang(replicate, spec.phases())?,
    };
    Ok(refit.model)
}

/// Right-continuous empirical distribution function `#{x_i <= x} / m`.
pub fn ecdf(data: &Dataset, x: f64) -> f64 {
    data.count_at_most(x) as f64 / data.len() as f64
}

/// Nelson-Aalen cumulative hazard estimate
/// `H_hat(x) = sum_{x_(i) <= x} d_i / (m - rank + 1)`, with ties grouped.
pub fn empirical_cum_hazard(data: &Dataset, x: f64) -> f64 {
    let values = data.values();
    let m = values.len();
    let mut total = 0.0;
    let mut i = 0;
    while i < m && values[i] <= x {
        let mut d = 1;
        while i + d < m && values[i + d] == values[i] {
            d += 1;
        }
        // i observations died strictly before this group, so m - i remain
        // at risk.
        total += d as f64 / (m - i) as f64;
        i += d;
    }
    total
}

/// Silverman's rule bandwidth `0.9 min(sd, IQR/1.34) m^{-1/5}`.
fn silverman_bandwidth(data: &Dataset) -> Result<f64> {
    if data.len() < 2 {
        return Err(Error::DegenerateBandwidth(
            "automatic bandwidth needs at least 2 observations".into(),
        ));
    }
    let sd = data.sd();
    let iqr = data.iqr();
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    let h = 0.9 * spread * (data.len() as f64).powf(-0.2);
    if !(h > 0.0) {
        return Err(Error::DegenerateBandwidth(
            "data have no dispersion; pass an explicit bandwidth".into(),
        ));
    }
    Ok(h)
}

/// Gaussian kernel density estimate at `x`. The bandwidth defaults to
/// Silverman's rule.
pub fn kde_density(data: &Dataset, x: f64, bandwidth: Option<f64>) -> Result<f64> {
    let h = match bandwidth {
        Some(h) if h > 0.0 && h.is_finite() => h,
        Some(h) => {
            return Err(Error::DegenerateBandwidth(format!(
                "explicit bandwidth must be positive, got {h}"
            )))
        }
        None => silverman_bandwidth(data)?,
    };
    let norm = 1.0 / (data.len() as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
    let sum: f64 = data
        .values()
        .iter()
        .map(|&xi| {
            let u = (x - xi) / h;
            (-0.5 * u * u).exp()
        })
        .sum();
    Ok(norm * sum)
}

/// Epanechnikov-smoothed hazard estimate: Nelson-Aalen increments spread by
/// `K_E(u) = 0.75 (1 - u^2)` on `|u| <= 1` with the global bandwidth
/// `(max - min) / m^{1/5}` unless one is supplied.
pub fn kernel_hazard(data: &Dataset, x: f64, bandwidth: Option<f64>) -> Result<f64> {
    if data.len() < 5 {
        return Err(Error::InvalidInput(
            "hazard smoothing needs at least 5 observations".into(),
        ));
    }
    let h = match bandwidth {
        Some(h) if h > 0.0 && h.is_finite() => h,
        Some(h) => {
            return Err(Error::DegenerateBandwidth(format!(
                "explicit bandwidth must be positive, got {h}"
            )))
        }
        None => {
            let range = data.max() - data.min();
            if range <= 0.0 {
                return Err(Error::DegenerateBandwidth(
                    "data have no range; pass an explicit bandwidth".into(),
                ));
            }
            range / (data.len() as f64).powf(0.2)
        }
    };
    let values = data.values();
    let m = values.len();
    let mut total = 0.0;
    let mut i = 0;
    while i < m {
        let mut d = 1;
        while i + d < m && values[i + d] == values[i] {
            d += 1;
        }
        let u = (x - values[i]) / h;
        if u.abs() <= 1.0 {
            let kernel = 0.75 * (1.0 - u * u) / h;
            total += kernel * d as f64 / (m - i) as f64;
        }
        i += d;
    }
    Ok(total)
}
