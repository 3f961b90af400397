//! Box-constrained maximization with a limited-memory quasi-Newton method:
//! projected L-BFGS directions, Armijo backtracking along the projection
//! arc, and central-difference gradients. No analytic gradients are
//! required anywhere in the crate, so the step sizes follow the usual
//! cube-root-of-epsilon rule.

use std::collections::VecDeque;

use crate::error::{Error, Result};

/// Number of curvature pairs kept by the limited memory.
const MEMORY: usize = 8;

/// Armijo sufficient-increase coefficient.
const ARMIJO_C1: f64 = 1e-4;

/// Maximum step halvings per line search.
const MAX_BACKTRACKS: usize = 60;

/// Relative objective improvement below which an iteration counts as
/// stagnant; three stagnant iterations in a row stop the run (the same
/// role as the `factr` stop of reference bounded quasi-Newton codes).
const RELATIVE_F_STAGNATION: f64 = 1e-11;
const STAGNANT_ITERATIONS: usize = 3;

/// Outcome of a bounded maximization.
#[derive(Debug, Clone)]
pub struct OptimOutcome {
    /// Best point found, always inside the bounds.
    pub point: Vec<f64>,
    /// Objective value at `point`.
    pub value: f64,
    /// Whether the projected-gradient norm reached the tolerance.
    pub converged: bool,
    /// Number of objective evaluations consumed.
    pub evaluations: usize,
}

fn project(x: &mut [f64], bounds: &[(f64, f64)]) {
    for (v, &(lo, hi)) in x.iter_mut().zip(bounds) {
        *v = v.clamp(lo, hi);
    }
}

/// Maximize `objective` over the box `bounds`, starting from `start`.
///
/// Returns the best point found with objective value at least the starting
/// value. `converged` reports whether the infinity norm of the projected
/// gradient fell to `tolerance` within `max_iterations`; otherwise the
/// best-so-far point is returned with `converged = false`.
pub fn optimize_box<F: FnMut(&[f64]) -> f64>(
    mut objective: F,
    bounds: &[(f64, f64)],
    start: &[f64],
    tolerance: f64,
    max_iterations: usize,
) -> Result<OptimOutcome> {
    let dim = bounds.len();
    if start.len() != dim {
        return Err(Error::InvalidStart(format!(
            "start has {} coordinates, bounds have {dim}",
            start.len()
        )));
    }
    for (i, &(lo, hi)) in bounds.iter().enumerate() {
        if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidStart(format!(
                "bounds for coordinate {i} are not an ordered finite interval: [{lo}, {hi}]"
            )));
        }
        if start[i] < lo || start[i] > hi {
            return Err(Error::InvalidStart(format!(
                "start coordinate {i} = {} outside [{lo}, {hi}]",
                start[i]
            )));
        }
    }

    let mut evaluations = 0usize;
    fn eval_obj<F: FnMut(&[f64]) -> f64>(obj: &mut F, x: &[f64], evals: &mut usize) -> f64 {
        *evals += 1;
        obj(x)
    }

    let mut x = start.to_vec();
    let mut fx = eval_obj(&mut objective, &x, &mut evaluations);
    if !fx.is_finite() {
        return Err(Error::InvalidStart(format!(
            "objective is not finite at the start point ({fx})"
        )));
    }
    let mut best_x = x.clone();
    let mut best_f = fx;

    let gradient = |x: &[f64], evals: &mut usize, obj: &mut F| -> Vec<f64> {
        let mut g = vec![0.0; dim];
        let h_base = f64::EPSILON.cbrt();
        for j in 0..dim {
            let h = h_base * x[j].abs().max(1.0);
            let (lo, hi) = bounds[j];
            let up = (x[j] + h).min(hi);
            let down = (x[j] - h).max(lo);
            let spread = up - down;
            if spread <= 0.0 {
                g[j] = 0.0;
                continue;
            }
            let mut xp = x.to_vec();
            xp[j] = up;
            let mut xm = x.to_vec();
            xm[j] = down;
            *evals += 2;
            let fp = obj(&xp);
            let fm = obj(&xm);
            g[j] = if fp.is_finite() && fm.is_finite() {
                (fp - fm) / spread
            } else {
                0.0
            };
        }
        g
    };

    let mut grad = gradient(&x, &mut evaluations, &mut objective);
    let mut memory: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut converged = false;
    let mut stagnant = 0usize;

    for _ in 0..max_iterations {
        // Projected-gradient stationarity measure (ascent orientation).
        let mut pg_norm = 0.0f64;
        for j in 0..dim {
            let stepped = (x[j] + grad[j]).clamp(bounds[j].0, bounds[j].1);
            pg_norm = pg_norm.max((stepped - x[j]).abs());
        }
        if pg_norm <= tolerance {
            converged = true;
            break;
        }

        // Two-loop recursion for d ~ H * grad (ascent direction).
        let mut d = grad.clone();
        if !memory.is_empty() {
            let mut alphas = Vec::with_capacity(memory.len());
            for (s, y, rho) in memory.iter().rev() {
                let a = rho * dot(s, &d);
                for j in 0..dim {
                    d[j] -= a * y[j];
                }
                alphas.push(a);
            }
            let (s_last, y_last, _) = memory.back().expect("nonempty");
            let gamma = dot(s_last, y_last) / dot(y_last, y_last);
            for v in d.iter_mut() {
                *v *= gamma;
            }
            for ((s, y, rho), a) in memory.iter().zip(alphas.into_iter().rev()) {
                let b = rho * dot(y, &d);
                for j in 0..dim {
                    d[j] += (a - b) * s[j];
                }
            }
        }
        if dot(&d, &grad) <= 0.0 || d.iter().any(|v| !v.is_finite()) {
            memory.clear();
            d = grad.clone();
        }

        // Backtracking along the projection arc.
        let mut alpha = 1.0;
        let mut accepted: Option<(Vec<f64>, f64)> = None;
        for _ in 0..MAX_BACKTRACKS {
            let mut candidate = x.clone();
            for j in 0..dim {
                candidate[j] += alpha * d[j];
            }
            project(&mut candidate, bounds);
            let displacement: Vec<f64> =
                candidate.iter().zip(&x).map(|(c, o)| c - o).collect();
            if displacement.iter().all(|v| *v == 0.0) {
                break;
            }
            let f_new = eval_obj(&mut objective, &candidate, &mut evaluations);
            if f_new.is_finite() && f_new >= fx + ARMIJO_C1 * dot(&grad, &displacement) {
                accepted = Some((candidate, f_new));
                break;
            }
            alpha *= 0.5;
        }

        let Some((x_new, f_new)) = accepted else {
            // No admissible step along this direction. With a fresh memory
            // the next direction is steepest ascent; when even that admits
            // no improving step at any resolution down to 2^-60, the
            // iterate is stationary at the finite-difference noise floor.
            if memory.is_empty() {
                converged = true;
                break;
            }
            memory.clear();
            continue;
        };

        if f_new - fx <= RELATIVE_F_STAGNATION * (1.0 + fx.abs()) {
            stagnant += 1;
            if stagnant >= STAGNANT_ITERATIONS {
                if memory.is_empty() {
                    // Stagnant along steepest ascent itself: done.
                    x = x_new;
                    fx = f_new;
                    if fx > best_f {
                        best_f = fx;
                        best_x = x;
                    }
                    converged = true;
                    break;
                }
                // A stale curvature model can produce near-orthogonal
                // directions whose accepted steps are microscopic; retry
                // from steepest ascent before giving up.
                memory.clear();
                stagnant = 0;
            }
        } else {
            stagnant = 0;
        }

        let grad_new = gradient(&x_new, &mut evaluations, &mut objective);
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(n, o)| n - o).collect();
        // Curvature pair in minimization orientation: y = -(grad_new - grad).
        let y: Vec<f64> = grad.iter().zip(&grad_new).map(|(o, n)| o - n).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * norm2(&s) * norm2(&y) {
            if memory.len() == MEMORY {
                memory.pop_front();
            }
            memory.push_back((s, y, 1.0 / sy));
        }

        x = x_new;
        fx = f_new;
        grad = grad_new;
        if fx > best_f {
            best_f = fx;
            best_x = x.clone();
        }
    }

    Ok(OptimOutcome {
        point: best_x,
        value: best_f,
        converged,
        evaluations,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
