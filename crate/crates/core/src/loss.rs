//! Margin losses with certified derivative and curvature bounds.
//!
//! Three losses are supported, each convex and differentiable in the margin
//! `z = y f(x)` with `|l'(z)| <= 1` everywhere:
//!
//! * logistic: `l(z) = log(1 + e^-z)`, curvature bound 1/4;
//! * Huber hinge with half-width `h`: quadratic on `|1 - z| <= h`, curvature
//!   bound `1/(2h)` (twice differentiable except at the two knots);
//! * smoothed hinge with half-width `h`: quartic on `|1 - z| <= h`, globally
//!   twice differentiable, curvature bound `3/(4h)`.
//!
//! The perturbation mechanisms consume the certified bounds, not sampled
//! estimates, so both constants are part of the type rather than recomputed.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default smoothing half-width for the Huber and smoothed-hinge losses.
pub const DEFAULT_HALF_WIDTH: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    Logistic,
    Huber,
    SmoothedHinge,
}

impl std::fmt::Display for LossKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            LossKind::Logistic => "logistic",
            LossKind::Huber => "huber",
            LossKind::SmoothedHinge => "smoothed_hinge",
        };
        f.write_str(name)
    }
}

/// A loss function together with its certified analytic bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossSpec {
    pub kind: LossKind,
    /// Smoothing half-width; `None` for the logistic loss.
    pub h: Option<f64>,
}

impl LossSpec {
    pub fn logistic() -> Self {
        Self {
            kind: LossKind::Logistic,
            h: None,
        }
    }

    pub fn huber(h: f64) -> Result<Self> {
        require_half_width(h)?;
        Ok(Self {
            kind: LossKind::Huber,
            h: Some(h),
        })
    }

    pub fn smoothed_hinge(h: f64) -> Result<Self> {
        require_half_width(h)?;
        Ok(Self {
            kind: LossKind::SmoothedHinge,
            h: Some(h),
        })
    }

    /// Build from the CLI's `--loss` / `--h` pair.
    pub fn from_name(name: &str, h: Option<f64>) -> Result<Self> {
        let h = h.unwrap_or(DEFAULT_HALF_WIDTH);
        match name {
            "logistic" => Ok(Self::logistic()),
            "huber" => Self::huber(h),
            "smoothed_hinge" | "smoothed-hinge" => Self::smoothed_hinge(h),
            other => Err(Error::InvalidParam(format!("unknown loss {other:?}"))),
        }
    }

    /// Certified bound on `sup |l'(z)|`. Equals 1 for all supported losses.
    pub fn derivative_bound(&self) -> f64 {
        1.0
    }

    /// Certified curvature bound `c >= sup |l''(z)|` (where defined).
    pub fn curvature_bound_c(&self) -> f64 {
        match self.kind {
            LossKind::Logistic => 0.25,
            LossKind::Huber => 0.5 / self.half_width(),
            LossKind::SmoothedHinge => 0.75 / self.half_width(),
        }
    }

    /// Whether the loss is twice differentiable everywhere. The Huber hinge is
    /// not (its second derivative jumps at the knots), which the objective
    /// perturbation trainer records as a provenance caveat.
    pub fn globally_twice_differentiable(&self) -> bool {
        self.kind != LossKind::Huber
    }

    fn half_width(&self) -> f64 {
        self.h.expect("half-width present for huber/smoothed_hinge")
    }

    /// Loss value at margin `z`.
    ///
    /// Panics if `z` is not finite.
    pub fn value(&self, z: f64) -> f64 {
        assert!(z.is_finite(), "loss evaluated at non-finite margin {z}");
        match self.kind {
            // max(-z, 0) + log1p(e^-|z|): exact rewrite of log(1 + e^-z) that
            // cannot overflow for |z| > 700.
            LossKind::Logistic => (-z).max(0.0) + (-z.abs()).exp().ln_1p(),
            LossKind::Huber => {
                let h = self.half_width();
                if z > 1.0 + h {
                    0.0
                } else if z < 1.0 - h {
                    1.0 - z
                } else {
                    let t = 1.0 + h - z;
                    t * t / (4.0 * h)
                }
            }
            LossKind::SmoothedHinge => {
                let h = self.half_width();
                if z > 1.0 + h {
                    0.0
                } else if z < 1.0 - h {
                    1.0 - z
                } else {
                    let u = 1.0 - z;
                    -u.powi(4) / (16.0 * h.powi(3))
                        + 3.0 * u * u / (8.0 * h)
                        + u / 2.0
                        + 3.0 * h / 16.0
                }
            }
        }
    }

    /// First derivative `l'(z)`; `|result| <= 1`. At the Huber knots the
    /// quadratic-branch value is returned (the loss is C^1, so the branches
    /// agree there).
    ///
    /// Panics if `z` is not finite.
    pub fn deriv(&self, z: f64) -> f64 {
        assert!(z.is_finite(), "loss derivative at non-finite margin {z}");
        match self.kind {
            LossKind::Logistic => -1.0 / (1.0 + z.exp()),
            LossKind::Huber => {
                let h = self.half_width();
                if z > 1.0 + h {
                    0.0
                } else if z < 1.0 - h {
                    -1.0
                } else {
                    -(1.0 + h - z) / (2.0 * h)
                }
            }
            LossKind::SmoothedHinge => {
                let h = self.half_width();
                if z > 1.0 + h {
                    0.0
                } else if z < 1.0 - h {
                    -1.0
                } else {
                    let u = 1.0 - z;
                    u.powi(3) / (4.0 * h.powi(3)) - 3.0 * u / (4.0 * h) - 0.5
                }
            }
        }
    }

    /// Second derivative `l''(z)`; lies in `[0, curvature_bound_c()]`. At the
    /// Huber knots (where the true second derivative is undefined on a set of
    /// measure zero) the quadratic-branch value is returned.
    ///
    /// Panics if `z` is not finite.
    pub fn second_deriv(&self, z: f64) -> f64 {
        assert!(
            z.is_finite(),
            "loss second derivative at non-finite margin {z}"
        );
        match self.kind {
            LossKind::Logistic => {
                // 1/((1+e^-z)(1+e^z)); each factor saturates to +inf rather
                // than overflowing the product, so the result decays to 0.
                1.0 / ((1.0 + (-z).exp()) * (1.0 + z.exp()))
            }
            LossKind::Huber => {
                let h = self.half_width();
                if z > 1.0 + h || z < 1.0 - h {
                    0.0
                } else {
                    1.0 / (2.0 * h)
                }
            }
            LossKind::SmoothedHinge => {
                let h = self.half_width();
                if z > 1.0 + h || z < 1.0 - h {
                    0.0
                } else {
                    let u = 1.0 - z;
                    -3.0 * u * u / (4.0 * h.powi(3)) + 3.0 / (4.0 * h)
                }
            }
        }
    }
}

fn require_half_width(h: f64) -> Result<()> {
    if h.is_finite() && h > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParam(format!(
            "smoothing half-width must be positive, got {h}"
        )))
    }
}
