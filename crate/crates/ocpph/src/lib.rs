//! One cut-point phase-type (OCP-PH) distributions for reliability
//! lifetime modeling.
//!
//! A phase-type distribution is the law of the absorption time of a finite
//! continuous-time Markov chain with representation `(alpha, T)`. The one
//! cut-point extension switches the transient intensities from `T1` to `T2`
//! at a level `a`, giving a time-inhomogeneous absorbing process with
//! representation `(a, alpha, T1, T2)`.
//!
//! The crate provides:
//!
//! - [`ph`]: plain phase-type representations, reliability measures,
//!   moments, characteristic function, and exact sampling;
//! - [`ocp`]: the one cut-point distribution with the same measure set plus
//!   the moment-generating function and matrix moment formulas;
//! - [`fit`]: maximum-likelihood fitting with cut-point profiling,
//!   phase-count selection, and bootstrap confidence intervals;
//! - [`gof`]: Anderson-Darling goodness of fit with parametric-bootstrap
//!   p-values, and empirical curve estimators (ECDF, Nelson-Aalen, kernel
//!   density and hazard smoothers);
//! - [`io`]: dataset and model-file formats plus plot-ready curve tables;
//! - [`matrix`]: the dense matrix-exponential and solve kernels behind all
//!   of the above.

pub mod dataset;
pub mod error;
pub mod fit;
pub mod gof;
pub mod io;
pub mod matrix;
pub mod ocp;
pub mod optim;
pub mod ph;

pub use dataset::Dataset;
pub use error::{Error, Result};
pub use fit::{FitConfig, FitResult, FittedModel};
pub use gof::GofReport;
pub use ocp::{OcpErlangSpec, OneCutPointRep};
pub use ph::{ErlangSpec, Measures, PhaseTypeRep};

#[cfg(test)]
pub(crate) fn testing_rng(seed: u64) -> rand_chacha::ChaCha8Rng {
    use rand::SeedableRng;
    rand_chacha::ChaCha8Rng::seed_from_u64(seed)
}

/// Random strictly stable sub-generator: nonnegative off-diagonals, strictly
/// negative row sums. Used by tests across modules.
#[cfg(test)]
pub(crate) fn random_sub_generator(
    rng: &mut rand_chacha::ChaCha8Rng,
    order: usize,
) -> ndarray::Array2<f64> {
    use rand::Rng;
    let mut t = ndarray::Array2::<f64>::zeros((order, order));
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
