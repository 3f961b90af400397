//! Dense linear-algebra kernels: matrix exponential, LU solves (real and
//! complex-shifted), and a log-domain fast path for the Erlang structure.
//!
//! Everything in here is a pure function of its inputs. Matrices are dense
//! `ndarray::Array2<f64>`; no sparse or structured storage in the general
//! path (the Erlang fast path covers the hot case).

use ndarray::{Array1, Array2};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Relative pivot threshold below which a matrix is declared singular.
///
/// Scaled by the infinity norm of the matrix so the test matches the
/// residual tolerance of the solves (~1e-10 relative).
const SINGULARITY_THRESHOLD: f64 = 1e-13;

fn check_square_finite(a: &Array2<f64>, what: &str) -> Result<usize> {
    let n = a.nrows();
    if n == 0 || a.ncols() != n {
        return Err(Error::InvalidInput(format!(
            "{what}: expected a square matrix of order >= 1, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!("{what}: non-finite entry")));
    }
    Ok(n)
}

fn inf_norm(a: &Array2<f64>) -> f64 {
    a.rows()
        .into_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn one_norm(a: &Array2<f64>) -> f64 {
    let mut max = 0.0f64;
    for j in 0..a.ncols() {
        let s: f64 = a.column(j).iter().map(|v| v.abs()).sum();
        max = max.max(s);
    }
    max
}

// ---------------------------------------------------------------------------
// LU factorization, generic over f64 / Complex64
// ---------------------------------------------------------------------------

/// Scalar types the pivoting LU factorization works over.
pub(crate) trait LuScalar:
    Copy
    + num_complex::ComplexFloat
    + std::ops::SubAssign
    + std::ops::Mul<Output = Self>
    + std::ops::Div<Output = Self>
{
    fn magnitude(self) -> f64;
}

impl LuScalar for f64 {
    fn magnitude(self) -> f64 {
        self.abs()
    }
}

impl LuScalar for Complex64 {
    fn magnitude(self) -> f64 {
        self.norm()
    }
}

/// Packed LU factors with partial pivoting: `P A = L U`.
pub(crate) struct LuFactors<S> {
    lu: Array2<S>,
    perm: Vec<usize>,
}

/// Factor `a` in place of a copy. `scale` is the norm used for the relative
/// singularity test (pass the infinity norm of the original matrix).
pub(crate) fn lu_factor<S: LuScalar>(a: &Array2<S>, scale: f64) -> Result<LuFactors<S>> {
    let n = a.nrows();
    let mut lu = a.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    let threshold = SINGULARITY_THRESHOLD * scale.max(f64::MIN_POSITIVE);
    for col in 0..n {
        let mut max_val = 0.0;
        let mut max_row = col;
        for row in col..n {
            let v = lu[[row, col]].magnitude();
            if v > max_val {
                max_val = v;
                max_row = row;
            }
        }
        if max_val < threshold {
            return Err(Error::SingularMatrix(format!(
                "pivot {max_val:e} below threshold {threshold:e} at column {col}"
            )));
        }
        if max_row != col {
            perm.swap(col, max_row);
            for j in 0..n {
                let tmp = lu[[col, j]];
                lu[[col, j]] = lu[[max_row, j]];
                lu[[max_row, j]] = tmp;
            }
        }
        let pivot = lu[[col, col]];
        for row in (col + 1)..n {
            let factor = lu[[row, col]] / pivot;
            lu[[row, col]] = factor;
            for j in (col + 1)..n {
                let sub = factor * lu[[col, j]];
                lu[[row, j]] -= sub;
            }
        }
    }
    Ok(LuFactors { lu, perm })
}

impl<S: LuScalar> LuFactors<S> {
    /// Solve `A x = b` using the stored factors.
    pub(crate) fn solve(&self, b: &Array1<S>) -> Array1<S> {
        let n = self.lu.nrows();
        assert_eq!(b.len(), n, "right-hand side length mismatch");
        let mut x = Array1::from_iter(self.perm.iter().map(|&p| b[p]));
        // Forward substitution (unit lower triangle).
        for i in 1..n {
            for k in 0..i {
                let sub = self.lu[[i, k]] * x[k];
                x[i] -= sub;
            }
        }
        // Back substitution.
        for i in (0..n).rev() {
            for k in (i + 1)..n {
                let sub = self.lu[[i, k]] * x[k];
                x[i] -= sub;
            }
            x[i] = x[i] / self.lu[[i, i]];
        }
        x
    }

    /// Solve `A X = B` column by column.
    fn solve_matrix(&self, b: &Array2<S>) -> Array2<S> {
        let n = self.lu.nrows();
        let m = b.ncols();
        let mut x = b.clone();
        for j in 0..m {
            let col = Array1::from_iter(b.column(j).iter().copied());
            let sol = self.solve(&col);
            for i in 0..n {
                x[[i, j]] = sol[i];
            }
        }
        x
    }
}

/// Solve `A x = b` with partial-pivoting LU.
///
/// Declares `A` singular when a pivot falls below `1e-13 * ||A||_inf`.
pub fn solve_real(a: &Array2<f64>, b: &Array1<f64>) -> Result<Array1<f64>> {
    let n = check_square_finite(a, "solve_real")?;
    if b.len() != n {
        return Err(Error::InvalidInput(format!(
            "solve_real: rhs length {} does not match order {n}",
            b.len()
        )));
    }
    if b.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("solve_real: non-finite rhs entry".into()));
    }
    let factors = lu_factor(a, inf_norm(a))?;
    Ok(factors.solve(b))
}

/// Solve `(T + i t I) x = b` for real `T`, real shift `t`, real `b`.
///
/// A singular shifted matrix signals that `t` lies outside the neighbourhood
/// of zero where the transform formulas are valid.
pub fn solve_complex_shifted(
    t_mat: &Array2<f64>,
    t: f64,
    b: &Array1<f64>,
) -> Result<Array1<Complex64>> {
    let n = check_square_finite(t_mat, "solve_complex_shifted")?;
    if b.len() != n {
        return Err(Error::InvalidInput(format!(
            "solve_complex_shifted: rhs length {} does not match order {n}",
            b.len()
        )));
    }
    if !t.is_finite() {
        return Err(Error::InvalidInput("solve_complex_shifted: non-finite shift".into()));
    }
    let mut shifted = Array2::<Complex64>::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            shifted[[i, j]] = Complex64::new(t_mat[[i, j]], if i == j { t } else { 0.0 });
        }
    }
    let scale = shifted
        .rows()
        .into_iter()
        .map(|r| r.iter().map(|v| v.norm()).sum::<f64>())
        .fold(0.0, f64::max);
    let factors = lu_factor(&shifted, scale)?;
    let rhs = Array1::from_iter(b.iter().map(|&v| Complex64::new(v, 0.0)));
    Ok(factors.solve(&rhs))
}

// ---------------------------------------------------------------------------
// Matrix exponential
// ---------------------------------------------------------------------------

/// Pade(13,13) numerator coefficients (Higham 2005, scaling-and-squaring).
const PADE13_COEFFS: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

/// Norm threshold above which the argument is scaled before the Pade step.
const PADE13_THETA: f64 = 5.371920351148152;

/// Matrix exponential by scaling-and-squaring with a fixed Pade(13,13)
/// approximant and norm-based scaling. Exact for order 1.
pub fn expm(a: &Array2<f64>) -> Result<Array2<f64>> {
    let n = check_square_finite(a, "expm")?;
    if n == 1 {
        return Ok(Array2::from_elem((1, 1), a[[0, 0]].exp()));
    }
    let norm = one_norm(a);
    let squarings = if norm > PADE13_THETA {
        (norm / PADE13_THETA).log2().ceil() as u32
    } else {
        0
    };
    let scaled = a / 2f64.powi(squarings as i32);

    let eye = Array2::<f64>::eye(n);
    let a2 = scaled.dot(&scaled);
    let a4 = a2.dot(&a2);
    let a6 = a2.dot(&a4);

    let b = &PADE13_COEFFS;
    let w1 = &a6 * b[13] + &a4 * b[11] + &a2 * b[9];
    let w2 = a6.dot(&w1) + &a6 * b[7] + &a4 * b[5] + &a2 * b[3] + &eye * b[1];
    let u = scaled.dot(&w2);
    let v1 = &a6 * b[12] + &a4 * b[10] + &a2 * b[8];
    let v = a6.dot(&v1) + &a6 * b[6] + &a4 * b[4] + &a2 * b[2] + &eye * b[0];

    let denom = &v - &u;
    let numer = &v + &u;
    let factors = lu_factor(&denom, inf_norm(&denom)).map_err(|_| {
        Error::SingularMatrix("expm: Pade denominator numerically singular".into())
    })?;
    let mut result = factors.solve_matrix(&numer);
    for _ in 0..squarings {
        result = result.dot(&result);
    }
    Ok(result)
}

// ---------------------------------------------------------------------------
// Erlang fast path (log domain)
// ---------------------------------------------------------------------------

/// Log Poisson(mu) probabilities at k = 0..count-1, accumulated in log
/// domain so no intermediate factorial or power overflows.
pub(crate) fn log_poisson_terms(mu: f64, count: usize) -> Vec<f64> {
    debug_assert!(mu >= 0.0 && mu.is_finite());
    let mut out = Vec::with_capacity(count);
    if count == 0 {
        return out;
    }
    if mu == 0.0 {
        out.push(0.0);
        out.resize(count, f64::NEG_INFINITY);
        return out;
    }
    let log_mu = mu.ln();
    let mut lp = -mu;
    out.push(lp);
    for k in 1..count {
        lp += log_mu - (k as f64).ln();
        out.push(lp);
    }
    out
}

/// First row of `exp(T x)` for the Erlang sub-generator of order `n` and
/// rate `lambda`: entry `j` is the Poisson(lambda x) probability of `j`
/// events. Computed in log domain, so `lambda * x` up to ~1e4 stays finite.
///
/// # Panics
///
/// Panics when `n == 0`, `lambda <= 0`, or `x < 0`.
pub fn erlang_exp_row(n: usize, lambda: f64, x: f64) -> Vec<f64> {
    assert!(n >= 1, "erlang_exp_row: n must be >= 1");
    assert!(
        lambda > 0.0 && lambda.is_finite(),
        "erlang_exp_row: lambda must be a positive finite rate"
    );
    assert!(x >= 0.0 && x.is_finite(), "erlang_exp_row: x must be >= 0");
    log_poisson_terms(lambda * x, n)
        .into_iter()
        .map(f64::exp)
        .collect()
}

// ---------------------------------------------------------------------------
// Spectral abscissa bound (MGF convergence domain)
// ---------------------------------------------------------------------------

/// Spectral abscissa (largest real part of an eigenvalue) of a sub-generator.
///
/// Shifts by `c = max(-T_ii)` so `M = T + cI` is entrywise nonnegative, then
/// power-iterates for the Perron root: abscissa = rho(M) - c. For nilpotent
/// shifted matrices (the Erlang structure) the iteration collapses to zero
/// and the abscissa is exactly `-lambda`.
pub(crate) fn spectral_abscissa(t_mat: &Array2<f64>) -> f64 {
    let n = t_mat.nrows();
    let c = (0..n).map(|i| -t_mat[[i, i]]).fold(0.0, f64::max);
    let m = t_mat + c * Array2::<f64>::eye(n);
    let mut v = Array1::<f64>::from_elem(n, 1.0 / n as f64);
    let mut rho = 0.0;
    for _ in 0..500 {
        let w = m.dot(&v);
        let norm: f64 = w.iter().map(|x| x.abs()).sum();
        if norm < 1e-280 {
            // Nilpotent direction: Perron root is zero.
            return -c;
        }
        let next_rho = norm;
        v = w / norm;
        if (next_rho - rho).abs() <= 1e-12 * next_rho.max(1.0) {
            rho = next_rho;
            break;
        }
        rho = next_rho;
    }
    rho - c
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn max_abs_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
        a.iter()
            .zip(b.iter())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn expm_zero_is_identity() {
        let z = Array2::<f64>::zeros((1, 1));
        let e = expm(&z).unwrap();
        assert_eq!(e[[0, 0]], 1.0);
        let z4 = Array2::<f64>::zeros((4, 4));
        assert!(max_abs_diff(&expm(&z4).unwrap(), &Array2::eye(4)) < 1e-14);
    }

    #[test]
    fn expm_scalar() {
        let a = array![[-1.0]];
        let e = expm(&a).unwrap();
        assert!((e[[0, 0]] - 0.36787944117144233).abs() < 1e-14);
    }

    #[test]
    fn expm_bidiagonal_closed_form() {
        // exp([[-2, 2], [0, -2]]) = e^{-2} [[1, 2], [0, 1]]
        let a = array![[-2.0, 2.0], [0.0, -2.0]];
        let e = expm(&a).unwrap();
        let s = (-2.0f64).exp();
        let expected = array![[s, 2.0 * s], [0.0, s]];
        assert!(max_abs_diff(&e, &expected) < 1e-13);
    }

    #[test]
    fn expm_rejects_non_finite() {
        let a = array![[f64::NAN]];
        assert!(matches!(expm(&a), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn solve_identity() {
        let a = Array2::<f64>::eye(3);
        let b = array![1.0, 2.0, 3.0];
        let x = solve_real(&a, &b).unwrap();
        assert_eq!(x, b);
    }

    #[test]
    fn solve_zero_rhs() {
        let a = array![[-2.0, 2.0], [0.0, -2.0]];
        let x = solve_real(&a, &array![0.0, 0.0]).unwrap();
        assert_eq!(x, array![0.0, 0.0]);
    }

    #[test]
    fn solve_multiply_back() {
        let a = array![[-2.0, 2.0], [0.0, -2.0]];
        let b = array![0.0, 2.0];
        let x = solve_real(&a, &b).unwrap();
        assert!((x[0] - -1.0).abs() < 1e-14);
        assert!((x[1] - -1.0).abs() < 1e-14);
        let back = a.dot(&x);
        for i in 0..2 {
            assert!((back[i] - b[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn solve_detects_singular() {
        let a = array![[1.0, 2.0], [2.0, 4.0]];
        assert!(matches!(
            solve_real(&a, &array![1.0, 1.0]),
            Err(Error::SingularMatrix(_))
        ));
    }

    #[test]
    fn complex_shift_zero_reduces_to_real() {
        let t = array![[-1.0]];
        let x = solve_complex_shifted(&t, 0.0, &array![1.0]).unwrap();
        assert!((x[0] - Complex64::new(-1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn complex_shift_scalar_division() {
        // (−1 + i) x = 1  =>  x = −0.5 − 0.5i
        let t = array![[-1.0]];
        let x = solve_complex_shifted(&t, 1.0, &array![1.0]).unwrap();
        assert!((x[0] - Complex64::new(-0.5, -0.5)).norm() < 1e-14);
    }

    #[test]
    fn complex_shift_residual() {
        let t = array![[-2.0, 2.0], [0.0, -2.0]];
        let b = array![0.0, 2.0];
        let x = solve_complex_shifted(&t, 1.0, &b).unwrap();
        // Multiply (T + iI) x back and recover b.
        for i in 0..2 {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..2 {
                let m = Complex64::new(t[[i, j]], if i == j { 1.0 } else { 0.0 });
                acc += m * x[j];
            }
            assert!((acc - Complex64::new(b[i], 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn erlang_row_at_time_zero() {
        assert_eq!(erlang_exp_row(3, 7.0, 0.0), vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn erlang_row_poisson_terms() {
        let row = erlang_exp_row(2, 2.0, 1.0);
        let e2 = (-2.0f64).exp();
        assert!((row[0] - e2).abs() < 1e-15);
        assert!((row[1] - 2.0 * e2).abs() < 1e-15);
    }

    #[test]
    fn erlang_row_no_overflow_at_huge_rate_time_product() {
        // lambda * x = 1e4 overflows naive factorials; log domain must not.
        let row = erlang_exp_row(64, 1.0e4, 1.0);
        assert!(row.iter().all(|p| p.is_finite() && *p >= 0.0 && *p <= 1.0));
    }

    #[test]
    fn erlang_row_matches_expm() {
        let (n, lambda, x) = (14usize, 16.74531f64, 0.595f64);
        let mut t = Array2::<f64>::zeros((n, n));
        for i in 0..n {
            t[[i, i]] = -lambda;
            if i + 1 < n {
                t[[i, i + 1]] = lambda;
            }
        }
        let e = expm(&(t * x)).unwrap();
        let row = erlang_exp_row(n, lambda, x);
        for j in 0..n {
            assert!(
                (row[j] - e[[0, j]]).abs() < 1e-12,
                "entry {j}: {} vs {}",
                row[j],
                e[[0, j]]
            );
        }
    }

    #[test]
    fn semigroup_property_random_stable() {
        let mut rng = crate::testing_rng(17);
        for order in [1usize, 2, 5, 9, 20] {
            let a = crate::random_sub_generator(&mut rng, order);
            for (s, t) in [(0.3, 0.9), (1.4, 0.2), (2.0, 2.0)] {
                let whole = expm(&(&a * (s + t))).unwrap();
                let parts = expm(&(&a * s)).unwrap().dot(&expm(&(&a * t)).unwrap());
                assert!(
                    max_abs_diff(&whole, &parts) < 1e-9,
                    "order {order}, s={s}, t={t}"
                );
            }
        }
    }

    #[test]
    fn conservative_generator_rows_sum_to_one() {
        let mut rng = crate::testing_rng(3);
        for order in [2usize, 4, 8] {
            let t = crate::random_sub_generator(&mut rng, order);
            // Append the absorbing column to build a full generator.
            let n = order + 1;
            let mut q = Array2::<f64>::zeros((n, n));
            for i in 0..order {
                let mut row_sum = 0.0;
                for j in 0..order {
                    q[[i, j]] = t[[i, j]];
                    row_sum += t[[i, j]];
                }
                q[[i, order]] = -row_sum;
            }
            let e = expm(&(q * 1.7)).unwrap();
            for i in 0..n {
                let s: f64 = e.row(i).iter().sum();
                assert!((s - 1.0).abs() < 1e-10, "row {i} sums to {s}");
            }
        }
    }

    #[test]
    fn sub_generator_exponential_is_sub_stochastic() {
        let mut rng = crate::testing_rng(8);
        for order in [1usize, 3, 6, 12] {
            let t = crate::random_sub_generator(&mut rng, order);
            for x in [0.1, 1.0, 5.0] {
                let e = expm(&(&t * x)).unwrap();
                for i in 0..order {
                    let mut row_sum = 0.0;
                    for j in 0..order {
                        let v = e[[i, j]];
                        assert!((-1e-12..=1.0 + 1e-12).contains(&v), "entry ({i},{j}) = {v}");
                        row_sum += v;
                    }
                    assert!(row_sum <= 1.0 + 1e-12, "row {i} sums to {row_sum}");
                }
            }
        }
    }

    #[test]
    fn abscissa_of_erlang_is_minus_lambda() {
        let lambda = 16.74531;
        let n = 14;
        let mut t = Array2::<f64>::zeros((n, n));
        for i in 0..n {
            t[[i, i]] = -lambda;
            if i + 1 < n {
                t[[i, i + 1]] = lambda;
            }
        }
        assert!((spectral_abscissa(&t) - -lambda).abs() < 1e-9);
    }

    #[test]
    fn abscissa_of_diagonal() {
        let t = array![[-3.0, 0.0], [0.0, -0.5]];
        assert!((spectral_abscissa(&t) - -0.5).abs() < 1e-9);
    }
}
