//! GLM losses `φ_y(⟨w, x⟩)` with their regularity constants.
//!
//! A loss carries the admissible label range `|y| ≤ label_bound` and reports
//! `Y²`, an upper bound on `|φ_y(0)|` over that range. Optimizers read every
//! constant from here, so a new loss only has to implement [`GlmLoss`].

use std::fmt::Debug;

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::math::vector::check_dims;
use crate::math::{dot, norm_sq, RngHandle, Vector};

pub trait GlmLoss: Debug + Send + Sync {
    fn name(&self) -> String;

    /// `φ_y(z)`.
    fn value(&self, z: f64, y: f64) -> f64;

    /// `∂φ_y/∂z`, or a fixed subgradient where φ is not differentiable.
    fn derivative(&self, z: f64, y: f64) -> f64;

    /// Bound `H` on `|∂²φ_y/∂z²|`, if the loss is smooth.
    fn smoothness(&self) -> Option<f64>;

    /// Bound on `|∂φ_y/∂z|`, if the loss is Lipschitz in `z`.
    fn lipschitz(&self) -> Option<f64>;

    fn label_bound(&self) -> f64;

    /// `Y²` with `|φ_y(0)| ≤ Y²` for every admissible label.
    fn bound_at_zero(&self) -> f64;

    /// Slope `a` when the loss is `a·|z − y|`. Lets the ERM solver switch to a
    /// dual method for this nonsmooth case.
    fn absolute_slope(&self) -> Option<f64> {
        None
    }
}

/// `(z − y)²`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SquaredLoss {
    label_bound: f64,
}

impl SquaredLoss {
    pub fn new(label_bound: f64) -> Result<Self> {
        check_label_bound(label_bound)?;
        Ok(Self { label_bound })
    }
}

impl GlmLoss for SquaredLoss {
    fn name(&self) -> String {
        "squared".into()
    }
    fn value(&self, z: f64, y: f64) -> f64 {
        (z - y) * (z - y)
    }
    fn derivative(&self, z: f64, y: f64) -> f64 {
        2.0 * (z - y)
    }
    fn smoothness(&self) -> Option<f64> {
        Some(2.0)
    }
    fn lipschitz(&self) -> Option<f64> {
        None
    }
    fn label_bound(&self) -> f64 {
        self.label_bound
    }
    fn bound_at_zero(&self) -> f64 {
        self.label_bound * self.label_bound
    }
}

/// `(H/2)(z − 2y/√H)²`, the `H`-smooth rescaling of the squared loss.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScaledSquaredLoss {
    h: f64,
    label_bound: f64,
}

impl ScaledSquaredLoss {
    pub fn new(h: f64, label_bound: f64) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(invalid(
                "h",
                format!("must be positive and finite, got {h}"),
            ));
        }
        check_label_bound(label_bound)?;
        Ok(Self { h, label_bound })
    }
}

impl GlmLoss for ScaledSquaredLoss {
    fn name(&self) -> String {
        format!("scaled-squared(h={})", self.h)
    }
    fn value(&self, z: f64, y: f64) -> f64 {
        let r = z - 2.0 * y / self.h.sqrt();
        0.5 * self.h * r * r
    }
    fn derivative(&self, z: f64, y: f64) -> f64 {
        self.h * (z - 2.0 * y / self.h.sqrt())
    }
    fn smoothness(&self) -> Option<f64> {
        Some(self.h)
    }
    fn lipschitz(&self) -> Option<f64> {
        None
    }
    fn label_bound(&self) -> f64 {
        self.label_bound
    }
    fn bound_at_zero(&self) -> f64 {
        // φ_y(0) = (H/2)(4y²/H) = 2y²
        2.0 * self.label_bound * self.label_bound
    }
}

/// `|z − y|`. The subgradient at the kink is 0.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AbsoluteLoss {
    label_bound: f64,
}

impl AbsoluteLoss {
    pub fn new(label_bound: f64) -> Result<Self> {
        check_label_bound(label_bound)?;
        Ok(Self { label_bound })
    }
}

impl GlmLoss for AbsoluteLoss {
    fn name(&self) -> String {
        "absolute".into()
    }
    fn value(&self, z: f64, y: f64) -> f64 {
        (z - y).abs()
    }
    fn derivative(&self, z: f64, y: f64) -> f64 {
        if z > y {
            1.0
        } else if z < y {
            -1.0
        } else {
            0.0
        }
    }
    fn smoothness(&self) -> Option<f64> {
        None
    }
    fn lipschitz(&self) -> Option<f64> {
        Some(1.0)
    }
    fn label_bound(&self) -> f64 {
        self.label_bound
    }
    fn bound_at_zero(&self) -> f64 {
        self.label_bound
    }
    fn absolute_slope(&self) -> Option<f64> {
        Some(1.0)
    }
}

/// Huber loss with threshold `c`: quadratic `r²/2` for `|r| ≤ c`, linear
/// beyond. Both 1-smooth and `c`-Lipschitz.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HuberLoss {
    c: f64,
    label_bound: f64,
}

impl HuberLoss {
    pub fn new(c: f64, label_bound: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(invalid(
                "c",
                format!("must be positive and finite, got {c}"),
            ));
        }
        check_label_bound(label_bound)?;
        Ok(Self { c, label_bound })
    }
}

impl GlmLoss for HuberLoss {
    fn name(&self) -> String {
        format!("huber(c={})", self.c)
    }
    fn value(&self, z: f64, y: f64) -> f64 {
        let r = (z - y).abs();
        if r <= self.c {
            0.5 * r * r
        } else {
            self.c * (r - 0.5 * self.c)
        }
    }
    fn derivative(&self, z: f64, y: f64) -> f64 {
        (z - y).clamp(-self.c, self.c)
    }
    fn smoothness(&self) -> Option<f64> {
        Some(1.0)
    }
    fn lipschitz(&self) -> Option<f64> {
        Some(self.c)
    }
    fn label_bound(&self) -> f64 {
        self.label_bound
    }
    fn bound_at_zero(&self) -> f64 {
        self.value(0.0, self.label_bound)
    }
}

fn check_label_bound(b: f64) -> Result<()> {
    if !(b >= 0.0 && b.is_finite()) {
        return Err(invalid(
            "label_bound",
            format!("must be finite and >= 0, got {b}"),
        ));
    }
    Ok(())
}

/// `φ_y(⟨w, x⟩)`.
pub fn loss(l: &dyn GlmLoss, w: &Vector, x: &Vector, y: f64) -> Result<f64> {
    check_dims(w.dim(), x.dim())?;
    Ok(l.value(dot(w.as_slice(), x.as_slice()), y))
}

/// `φ′_y(⟨w, x⟩) · x`.
pub fn grad(l: &dyn GlmLoss, w: &Vector, x: &Vector, y: f64) -> Result<Vector> {
    check_dims(w.dim(), x.dim())?;
    let s = l.derivative(dot(w.as_slice(), x.as_slice()), y);
    x.scale(s)
}

/// `‖Y‖`, the square root of the bound at zero.
pub fn y_norm(l: &dyn GlmLoss) -> f64 {
    l.bound_at_zero().sqrt()
}

/// Gradient-norm bound `2‖Y‖√H‖X‖ + 2HB‖X‖²` for an `H`-smooth
/// non-negative GLM on the ball of radius `b`.
pub fn smooth_lipschitz_on_ball(l: &dyn GlmLoss, x_bound: f64, b: f64) -> Result<f64> {
    let h = require_smooth(l)?;
    Ok(2.0 * y_norm(l) * h.sqrt() * x_bound + 2.0 * h * b * x_bound * x_bound)
}

/// Bound on `‖∇ℓ(w; (x, y))‖` over `‖w‖ ≤ b`, `‖x‖ ≤ x_bound`.
///
/// Uses the smooth bound when `H` is declared and `G_link·‖X‖` otherwise; if
/// both are declared the smaller one is returned.
pub fn lipschitz_on_ball(l: &dyn GlmLoss, x_bound: f64, b: f64) -> Result<f64> {
    let smooth = l
        .smoothness()
        .map(|_| smooth_lipschitz_on_ball(l, x_bound, b))
        .transpose()?;
    let lip = l.lipschitz().map(|g| g * x_bound);
    match (smooth, lip) {
        (Some(a), Some(c)) => Ok(a.min(c)),
        (Some(a), None) => Ok(a),
        (None, Some(c)) => Ok(c),
        (None, None) => Err(Error::MissingRegularity {
            loss: l.name(),
            needed: "smoothness or Lipschitz constant",
        }),
    }
}

/// `3(Y² + HB²‖X‖²)`, a bound on the loss over the ball for smooth losses.
pub fn loss_bound_on_ball(l: &dyn GlmLoss, x_bound: f64, b: f64) -> Result<f64> {
    let h = require_smooth(l)?;
    Ok(3.0 * (l.bound_at_zero() + h * b * b * x_bound * x_bound))
}

pub(crate) fn require_smooth(l: &dyn GlmLoss) -> Result<f64> {
    l.smoothness().ok_or_else(|| Error::MissingRegularity {
        loss: l.name(),
        needed: "smoothness H",
    })
}

pub(crate) fn require_lipschitz(l: &dyn GlmLoss) -> Result<f64> {
    l.lipschitz().ok_or_else(|| Error::MissingRegularity {
        loss: l.name(),
        needed: "Lipschitz constant",
    })
}

/// Worst ratios seen by the randomized bound checks.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct BoundCheckReport {
    pub samples: usize,
    /// `max ‖∇ℓ‖ / √(4H‖x‖²ℓ)`.
    pub self_bounding_ratio: f64,
    /// `max ‖∇ℓ‖ / G` with `G` from [`smooth_lipschitz_on_ball`].
    pub gradient_ratio: f64,
    /// `max ℓ / (3(Y² + HB²X²))`.
    pub loss_ratio: f64,
    pub gradient_violations: usize,
    pub loss_violations: usize,
}

/// Draws a triple `(w, x, y)` with `‖w‖ ≤ b`, `‖x‖ ≤ x_bound`,
/// `|y| ≤ label_bound`. Radii are drawn uniformly so that boundary and
/// interior cases both appear.
fn draw_triple(
    rng: &mut RngHandle,
    d: usize,
    b: f64,
    x_bound: f64,
    label_bound: f64,
) -> (Vector, Vector, f64) {
    let mut w = crate::math::random_unit(rng, d);
    let rw = b * rng.uniform();
    w.iter_mut().for_each(|v| *v *= rw);
    let mut x = crate::math::random_unit(rng, d);
    let rx = x_bound * rng.uniform();
    x.iter_mut().for_each(|v| *v *= rx);
    let y = label_bound * (2.0 * rng.uniform() - 1.0);
    (Vector::from_finite(w), Vector::from_finite(x), y)
}

/// Randomized check of the self-bounding property
/// `‖∇ℓ(w)‖ ≤ √(4H‖x‖²ℓ(w))` for a smooth loss.
///
/// Returns the report on success and the first witness on violation.
pub fn check_self_bounding(
    l: &dyn GlmLoss,
    d: usize,
    x_bound: f64,
    b: f64,
    samples: usize,
    rng: &mut RngHandle,
) -> Result<BoundCheckReport> {
    let h = require_smooth(l)?;
    if d == 0 {
        return Err(invalid("d", "must be positive"));
    }
    let mut report = BoundCheckReport {
        samples,
        ..Default::default()
    };
    for _ in 0..samples {
        let (w, x, y) = draw_triple(rng, d, b, x_bound, l.label_bound());
        let value = loss(l, &w, &x, y)?;
        let g = grad(l, &w, &x, y)?.norm();
        let bound = (4.0 * h * norm_sq(x.as_slice()) * value).sqrt();
        if g > bound * (1.0 + 1e-9) + 1e-300 {
            return Err(Error::SelfBoundingViolation {
                w: w.into_inner(),
                x: x.into_inner(),
                y,
                grad_norm: g,
                bound,
            });
        }
        if bound > 0.0 {
            report.self_bounding_ratio = report.self_bounding_ratio.max(g / bound);
        }
    }
    Ok(report)
}

/// Randomized check of the gradient-norm and loss-value bounds on the ball.
/// Violations are counted, not raised.
pub fn check_ball_bounds(
    l: &dyn GlmLoss,
    d: usize,
    x_bound: f64,
    b: f64,
    samples: usize,
    rng: &mut RngHandle,
) -> Result<BoundCheckReport> {
    let g_bound = smooth_lipschitz_on_ball(l, x_bound, b)?;
    let l_bound = loss_bound_on_ball(l, x_bound, b)?;
    let mut report = BoundCheckReport {
        samples,
        ..Default::default()
    };
    for _ in 0..samples {
        let (w, x, y) = draw_triple(rng, d, b, x_bound, l.label_bound());
        let value = loss(l, &w, &x, y)?;
        let g = grad(l, &w, &x, y)?.norm();
        if g > g_bound * (1.0 + 1e-12) {
            report.gradient_violations += 1;
        }
        if value > l_bound * (1.0 + 1e-12) {
            report.loss_violations += 1;
        }
        if g_bound > 0.0 {
            report.gradient_ratio = report.gradient_ratio.max(g / g_bound);
        }
        if l_bound > 0.0 {
            report.loss_ratio = report.loss_ratio.max(value / l_bound);
        }
    }
    Ok(report)
}
