use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::losses::{require_smooth, y_norm, GlmLoss};
use crate::mechanisms::{gaussian_sigma2_noisy_gd, PrivacyBudget};

/// How each noisy gradient step reads the data.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sampling {
    /// Average gradient over all `n` points.
    #[default]
    FullBatch,
    /// Gradient of one point drawn uniformly with replacement.
    SingleSample,
}

/// Run parameters of a training procedure.
///
/// `lambda` and `k` are 0 when a procedure does not use them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerSchedule {
    pub t: usize,
    pub eta: f64,
    pub sigma2: f64,
    pub b: f64,
    pub lambda: f64,
    pub k: usize,
    pub g: f64,
    #[serde(default)]
    pub sampling: Sampling,
    /// Preconditions of the rate that do not hold for this run.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl OptimizerSchedule {
    pub fn validate(&self) -> Result<()> {
        if self.t == 0 {
            return Err(invalid("t", "must be >= 1"));
        }
        for (name, v) in [
            ("eta", self.eta),
            ("sigma2", self.sigma2),
            ("b", self.b),
            ("lambda", self.lambda),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(invalid(
                    "schedule",
                    format!("{name} must be finite and >= 0, got {v}"),
                ));
            }
        }
        Ok(())
    }

    /// True when the ball has radius 0 and the output is the zero vector.
    pub fn is_degenerate(&self) -> bool {
        self.b == 0.0
    }
}

/// Noisy GD schedule for a non-negative `H̃`-smooth loss with `|ℓ(0)| ≤ Y²`.
///
/// `T = n`, `G = 2Y√H̃ + 2H̃B`, `σ² = 8G²T ln(1/δ)/(n²ε²)` and
/// `η = min(B / (√T · max(√H̃·Y, σ√d)), 1/(4H̃))`. A non-private budget gives
/// `σ = 0` and drops the `σ√d` term.
pub fn schedule_noisy_gd(
    h_tilde: f64,
    y: f64,
    b: f64,
    n: usize,
    d: usize,
    budget: &PrivacyBudget,
) -> Result<OptimizerSchedule> {
    if n == 0 {
        return Err(invalid("n", "must be >= 1"));
    }
    if d == 0 {
        return Err(invalid("d", "must be >= 1"));
    }
    if !(h_tilde > 0.0) || !h_tilde.is_finite() {
        return Err(invalid(
            "h_tilde",
            format!("must be positive and finite, got {h_tilde}"),
        ));
    }
    if !(y >= 0.0) || !(b >= 0.0) || !y.is_finite() || !b.is_finite() {
        return Err(invalid(
            "y, b",
            format!("must be finite and >= 0, got y={y}, b={b}"),
        ));
    }
    let t = n;
    let g = 2.0 * y * h_tilde.sqrt() + 2.0 * h_tilde * b;
    let sigma2 = gaussian_sigma2_noisy_gd(g, t, n, budget)?;
    let scale = (h_tilde.sqrt() * y).max(sigma2.sqrt() * (d as f64).sqrt());
    let cap = 1.0 / (4.0 * h_tilde);
    let eta = if scale > 0.0 {
        (b / ((t as f64).sqrt() * scale)).min(cap)
    } else {
        cap
    };
    let mut warnings = Vec::new();
    if b == 0.0 {
        warnings.push("zero-radius ball: output is the zero vector".to_string());
    }
    let n0 = if y > 0.0 {
        h_tilde * b * b / (y * y)
    } else {
        f64::INFINITY
    };
    if (n as f64) < n0 {
        warnings.push(format!("n = {n} is below n0 = H̃B²/Y² = {n0}"));
    }
    Ok(OptimizerSchedule {
        t,
        eta,
        sigma2,
        b,
        lambda: 0.0,
        k: 0,
        g,
        sampling: Sampling::FullBatch,
        warnings,
    })
}

/// [`schedule_noisy_gd`] with the GLM constants `H̃ = H‖X‖²` and `Y` read off
/// `loss`.
pub fn schedule_noisy_gd_glm(
    loss: &dyn GlmLoss,
    x_bound: f64,
    b: f64,
    n: usize,
    d: usize,
    budget: &PrivacyBudget,
) -> Result<OptimizerSchedule> {
    let h = require_smooth(loss)?;
    let h_tilde = h * x_bound * x_bound;
    if h_tilde == 0.0 {
        return Err(invalid("x_bound", "H‖X‖² must be positive"));
    }
    schedule_noisy_gd(h_tilde, y_norm(loss), b, n, d, budget)
}
