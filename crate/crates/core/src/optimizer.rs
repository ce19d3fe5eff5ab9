//! Deterministic minimizer for smooth, strongly convex objectives.
//!
//! Full-batch gradient descent with Armijo backtracking and an optional
//! Nesterov acceleration toggle (with function-value restarts). The stopping
//! rule is a gradient-norm certificate: on exit `||grad(w)|| <= tol`, and by
//! strong convexity the returned point is within `tol / lambda` of the exact
//! minimizer. No randomness anywhere; identical inputs give bit-identical
//! outputs.

use crate::error::{Error, Result};
use crate::linalg;

/// A smooth objective with a known strong-convexity modulus.
pub trait Objective {
    fn dimension(&self) -> usize;
    fn value(&self, w: &[f64]) -> f64;
    fn gradient(&self, w: &[f64]) -> Vec<f64>;
    /// Lower bound on the curvature (the `lambda` in the stability argument
    /// `||w - w*|| <= ||grad(w)|| / lambda`).
    fn strong_convexity(&self) -> f64;
}

/// Gradient-norm stopping tolerance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GradTolerance {
    /// `tol = r * max(1, ||grad at the zero vector||)`.
    RelativeToInit(f64),
    Absolute(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub tolerance: GradTolerance,
    pub max_iters: usize,
    pub accelerated: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tolerance: GradTolerance::RelativeToInit(1e-10),
            max_iters: 100_000,
            accelerated: true,
        }
    }
}

impl SolverConfig {
    pub fn with_absolute_tol(tol: f64) -> Self {
        Self {
            tolerance: GradTolerance::Absolute(tol),
            ..Self::default()
        }
    }

    pub fn with_relative_tol(tol: f64) -> Self {
        Self {
            tolerance: GradTolerance::RelativeToInit(tol),
            ..Self::default()
        }
    }
}

/// A certified minimizer: `grad_norm <= tolerance`, so the distance to the
/// exact argmin is at most `tolerance / strong_convexity`.
#[derive(Debug, Clone)]
pub struct Minimized {
    pub weights: Vec<f64>,
    pub grad_norm: f64,
    pub iterations: usize,
    /// The absolute gradient tolerance that was enforced.
    pub tolerance: f64,
}

impl Minimized {
    /// Parameter-space error budget implied by the stopping rule.
    pub fn parameter_slack(&self, strong_convexity: f64) -> f64 {
        self.tolerance / strong_convexity
    }
}

const ARMIJO_C: f64 = 0.25;
const BACKTRACK: f64 = 0.5;
const STEP_GROWTH: f64 = 2.0;

/// Minimize `obj` from the zero vector until the gradient norm certificate
/// holds.
///
/// Runs Armijo-backtracked descent (Nesterov-accelerated when enabled) while
/// objective decreases are resolvable in f64, then switches to a polish phase
/// whose accept/reject decisions use the gradient norm itself. Armijo compares
/// objective values, and near the optimum those differences sink below
/// floating-point roundoff long before the gradient does, so an f-guided
/// search alone cannot certify tolerances near 1e-12.
pub fn minimize<O: Objective + ?Sized>(obj: &O, config: &SolverConfig) -> Result<Minimized> {
    let d = obj.dimension();
    let x0 = vec![0.0; d];
    let g0 = checked_gradient(obj, &x0)?;
    let g0_norm = linalg::norm(&g0);
    let tol = match config.tolerance {
        GradTolerance::RelativeToInit(r) => r * g0_norm.max(1.0),
        GradTolerance::Absolute(a) => a,
    };
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::InvalidParam(format!(
            "gradient tolerance must be positive, got {tol}"
        )));
    }

    let mut x = x0;
    let mut fx = checked_value(obj, &x)?;
    let mut gx = g0;
    let mut gx_norm = g0_norm;
    // Extrapolation state for the accelerated path.
    let mut y = x.clone();
    let mut theta = 1.0f64;
    let mut step = 1.0f64;
    let mut iter = 0usize;
    // Roundoff scale of objective evaluations. The value itself can pass
    // through zero, so the trajectory maximum (never below 1 ulp of 1.0) is
    // the honest estimate of the absolute error in an f comparison.
    let mut f_scale = fx.abs().max(1.0);
    // Consecutive iterations without meaningful gradient-norm progress.
    let mut stall_count = 0usize;
    let mut best_gx_norm = gx_norm;

    while iter < config.max_iters {
        if gx_norm <= tol {
            return Ok(Minimized {
                weights: x,
                grad_norm: gx_norm,
                iterations: iter,
                tolerance: tol,
            });
        }

        // Once the best possible Armijo decrease c*step*||g||^2 is at the
        // roundoff scale of f, or the gradient norm has stopped moving,
        // f comparisons are noise: hand over to the gradient-guided polish
        // loop.
        if ARMIJO_C * step * gx_norm * gx_norm <= 8.0 * f64::EPSILON * f_scale || stall_count >= 200
        {
            break;
        }

        let (gy, fy) = if config.accelerated {
            (checked_gradient(obj, &y)?, checked_value(obj, &y)?)
        } else {
            (gx.clone(), fx)
        };
        f_scale = f_scale.max(fy.abs());
        let gy_norm_sq = linalg::dot(&gy, &gy);

        // Armijo backtracking from the extrapolated point.
        step *= STEP_GROWTH;
        let mut candidate;
        let mut f_candidate;
        let mut stalled = false;
        loop {
            candidate = y.clone();
            linalg::axpy(-step, &gy, &mut candidate);
            f_candidate = checked_value(obj, &candidate)?;
            if f_candidate <= fy - ARMIJO_C * step * gy_norm_sq {
                break;
            }
            step *= BACKTRACK;
            if step < 1e-160 {
                stalled = true;
                break;
            }
        }
        if stalled {
            break;
        }
        iter += 1;

        if config.accelerated {
            // Function-value restart keeps the momentum sequence monotone.
            if f_candidate > fx {
                y = x.clone();
                theta = 1.0;
                continue;
            }
            let theta_next = 0.5 * (1.0 + (1.0 + 4.0 * theta * theta).sqrt());
            let mix = (theta - 1.0) / theta_next;
            let mut y_next = candidate.clone();
            for i in 0..d {
                y_next[i] += mix * (candidate[i] - x[i]);
            }
            theta = theta_next;
            x = candidate;
            fx = f_candidate;
            y = y_next;
        } else {
            x = candidate;
            fx = f_candidate;
        }
        f_scale = f_scale.max(fx.abs());
        gx = checked_gradient(obj, &x)?;
        gx_norm = linalg::norm(&gx);
        if gx_norm < best_gx_norm * (1.0 - 1e-3) {
            best_gx_norm = gx_norm;
            stall_count = 0;
        } else {
            stall_count += 1;
        }
    }

    // Polish phase: plain gradient steps, accepted iff the gradient norm
    // shrinks. Immune to f roundoff; still fully deterministic. The Armijo
    // phase may hand over a step collapsed by noise-level backtracking, so
    // the entry step is clamped back into a range where candidates actually
    // move in f64.
    let mut step = step.clamp(1.0, 1e6);
    let mut rejects_since_accept = 0usize;
    while iter < config.max_iters {
        if gx_norm <= tol {
            return Ok(Minimized {
                weights: x,
                grad_norm: gx_norm,
                iterations: iter,
                tolerance: tol,
            });
        }
        // Neither growing nor shrinking helps any more: the gradient norm is
        // at its floating-point floor for this problem.
        if rejects_since_accept >= 200 {
            break;
        }
        let mut candidate = x.clone();
        linalg::axpy(-step, &gx, &mut candidate);
        iter += 1;
        if candidate == x {
            // Displacement fell below the resolution of x; only a larger
            // step can move the iterate.
            step *= 4.0;
            rejects_since_accept += 1;
            continue;
        }
        let g_candidate = checked_gradient(obj, &candidate)?;
        let g_candidate_norm = linalg::norm(&g_candidate);
        if g_candidate_norm < gx_norm {
            x = candidate;
            gx = g_candidate;
            gx_norm = g_candidate_norm;
            step *= 1.25;
            rejects_since_accept = 0;
        } else {
            step *= BACKTRACK;
            rejects_since_accept += 1;
            if step < 1e-300 {
                break;
            }
        }
    }

    if gx_norm <= tol {
        return Ok(Minimized {
            weights: x,
            grad_norm: gx_norm,
            iterations: iter,
            tolerance: tol,
        });
    }
    Err(Error::NoConvergence {
        max_iters: config.max_iters,
        grad_norm: gx_norm,
        grad_tol: tol,
    })
}

fn checked_value<O: Objective + ?Sized>(obj: &O, w: &[f64]) -> Result<f64> {
    let v = obj.value(w);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite("objective value".into()))
    }
}

fn checked_gradient<O: Objective + ?Sized>(obj: &O, w: &[f64]) -> Result<Vec<f64>> {
    let g = obj.gradient(w);
    debug_assert_eq!(g.len(), obj.dimension());
    if linalg::all_finite(&g) {
        Ok(g)
    } else {
        Err(Error::NonFinite("objective gradient".into()))
    }
}

/// Max absolute per-coordinate gap between the analytic gradient and a central
/// finite difference (step 1e-6) at `point`.
pub fn check_gradient<O: Objective + ?Sized>(obj: &O, point: &[f64]) -> f64 {
    assert!(
        linalg::all_finite(point),
        "gradient check at non-finite point"
    );
    let analytic = obj.gradient(point);
    let step = 1e-6;
    let mut worst = 0.0f64;
    let mut probe = point.to_vec();
    for i in 0..point.len() {
        probe[i] = point[i] + step;
        let plus = obj.value(&probe);
        probe[i] = point[i] - step;
        let minus = obj.value(&probe);
        probe[i] = point[i];
        worst = worst.max(((plus - minus) / (2.0 * step) - analytic[i]).abs());
    }
    worst
}
