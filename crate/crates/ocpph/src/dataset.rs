//! Observed lifetime samples: the likelihood input.

use crate::error::{Error, Result};

/// A sorted collection of nonnegative observations (reset voltages, set
/// currents, ...). Construction validates and sorts; the stored order is
/// nondecreasing ever after.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    values: Vec<f64>,
}

impl Dataset {
    /// Validate and sort raw observations.
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidInput("dataset must contain at least one observation".into()));
        }
        for (i, v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "observation {} is not finite",
                    i + 1
                )));
            }
            if *v < 0.0 {
                return Err(Error::Domain(format!(
                    "observation {} is negative ({v})",
                    i + 1
                )));
            }
        }
        values.sort_by(|a, b| a.partial_cmp(b).expect("finite values compare"));
        Ok(Self { values })
    }

    /// Sorted observations.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Sample size `m`.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    /// Always false: the constructor rejects empty data.
    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        *self.values.last().expect("nonempty")
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.len() as f64
    }

    /// Sample standard deviation (n-1 denominator); zero for a single point.
    pub fn sd(&self) -> f64 {
        let m = self.len();
        if m < 2 {
            return 0.0;
        }
        let mean = self.mean();
        let ss: f64 = self.values.iter().map(|v| (v - mean).powi(2)).sum();
        (ss / (m - 1) as f64).sqrt()
    }

    /// Empirical quantile with linear interpolation between order statistics.
    pub fn quantile(&self, p: f64) -> f64 {
        assert!((0.0..=1.0).contains(&p), "quantile level must be in [0, 1]");
        let m = self.values.len();
        if m == 1 {
            return self.values[0];
        }
        let pos = p * (m - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        let frac = pos - lo as f64;
        self.values[lo] * (1.0 - frac) + self.values[hi] * frac
    }

    /// Interquartile range.
    pub fn iqr(&self) -> f64 {
        self.quantile(0.75) - self.quantile(0.25)
    }

    /// Number of observations less than or equal to `x`.
    pub fn count_at_most(&self, x: f64) -> usize {
        self.values.partition_point(|v| *v <= x)
    }
}
