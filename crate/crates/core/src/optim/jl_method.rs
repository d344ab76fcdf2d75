use std::collections::BTreeMap;

use crate::data::Dataset;
use crate::error::{invalid, Result};
use crate::losses::{require_lipschitz, require_smooth, y_norm, GlmLoss};
use crate::math::{jl_sample, norm, RngHandle, Vector};
use crate::mechanisms::{PrivacyBudget, Variant};
use crate::optim::noisy_gd::noisy_gd_trace;
use crate::optim::TrainedModel;
use crate::optim::{schedule_noisy_gd_glm, OptimizerSchedule, Sampling};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct JlConfig {
    /// Lipschitz variant only: full-batch noisy GD with the same `T`, `η`,
    /// `σ²` instead of single-sample SGD. `T = n²` full passes are slow.
    pub lipschitz_full_batch: bool,
    /// Fixes the embedding dimension before clamping.
    pub k_override: Option<usize>,
}

fn log_2n_over_delta(n: usize, budget: &PrivacyBudget) -> Result<f64> {
    if budget.delta() <= 0.0 {
        return Err(invalid("delta", "the JL method needs delta > 0"));
    }
    Ok((2.0 * n as f64 / budget.delta()).ln())
}

/// Unclamped smooth-case dimension
/// `(B√H‖X‖ ln(2n/δ) nε / (Y‖X‖ + √H B‖X‖²))^{2/3}`; infinite when
/// non-private.
pub fn jl_dim_smooth_raw(
    loss: &dyn GlmLoss,
    x_bound: f64,
    b: f64,
    n: usize,
    budget: &PrivacyBudget,
) -> Result<f64> {
    let h = require_smooth(loss)?;
    if !budget.is_private() {
        return Ok(f64::INFINITY);
    }
    let l = log_2n_over_delta(n, budget)?;
    let num = b * h.sqrt() * x_bound * l * n as f64 * budget.epsilon();
    let den = y_norm(loss) * x_bound + h.sqrt() * b * x_bound * x_bound;
    if den == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok((num / den).powf(2.0 / 3.0))
}

/// Unclamped Lipschitz-case dimension `ln(2n/δ)·nε`.
pub fn jl_dim_lipschitz_raw(n: usize, budget: &PrivacyBudget) -> Result<f64> {
    if !budget.is_private() {
        return Ok(f64::INFINITY);
    }
    Ok(log_2n_over_delta(n, budget)? * n as f64 * budget.epsilon())
}

/// Clamps to `[1, d]`. Smooth rounds down, Lipschitz rounds up.
pub fn clamp_dim(raw: f64, d: usize, variant: Variant) -> usize {
    let r = match variant {
        Variant::Smooth => raw.floor(),
        Variant::Lipschitz => raw.ceil(),
    };
    if !(r < d as f64) {
        d
    } else {
        (r as usize).max(1)
    }
}

/// Single-sample noisy SGD schedule for the Lipschitz case in `k` dims:
/// `T = n²`, `σ² = 8TG²X² ln(2/δ)/(n²ε²)`,
/// `η = B / (G X (1 + √(k ln(2/δ))/(nε)) T^{3/4})`, radius `2B`.
pub fn schedule_jl_lipschitz(
    g: f64,
    x_bound: f64,
    b: f64,
    n: usize,
    k: usize,
    budget: &PrivacyBudget,
) -> Result<OptimizerSchedule> {
    if n == 0 || k == 0 {
        return Err(invalid("n, k", "must be positive"));
    }
    let nf = n as f64;
    let t = n
        .checked_mul(n)
        .ok_or_else(|| invalid("n", "n² overflows"))?;
    let tf = t as f64;
    let (sigma2, noise_term) = if budget.is_private() {
        if budget.delta() <= 0.0 {
            return Err(invalid("delta", "the JL method needs delta > 0"));
        }
        let l2 = (2.0 / budget.delta()).ln();
        let e = budget.epsilon();
        (
            8.0 * tf * g * g * x_bound * x_bound * l2 / (nf * nf * e * e),
            (k as f64 * l2).sqrt() / (nf * e),
        )
    } else {
        (0.0, 0.0)
    };
    let gx = g * x_bound;
    let eta = if gx > 0.0 {
        b / (gx * (1.0 + noise_term) * tf.powf(0.75))
    } else {
        0.0
    };
    Ok(OptimizerSchedule {
        t,
        eta,
        sigma2,
        b: 2.0 * b,
        lambda: 0.0,
        k,
        g,
        sampling: Sampling::SingleSample,
        warnings: Vec::new(),
    })
}

/// Schedule of the sub-run in `k` dimensions. Uses the declared feature
/// bound `x_bound`; embedded norms are only approximately preserved.
#[allow(clippy::too_many_arguments)]
pub fn schedule_jl(
    loss: &dyn GlmLoss,
    x_bound: f64,
    b: f64,
    n: usize,
    d: usize,
    budget: &PrivacyBudget,
    variant: Variant,
    config: &JlConfig,
) -> Result<OptimizerSchedule> {
    if !(b > 0.0) || !b.is_finite() {
        return Err(invalid(
            "b",
            format!("must be positive and finite, got {b}"),
        ));
    }
    let raw = match config.k_override {
        Some(k) => k as f64,
        None => match variant {
            Variant::Smooth => jl_dim_smooth_raw(loss, x_bound, b, n, budget)?,
            Variant::Lipschitz => jl_dim_lipschitz_raw(n, budget)?,
        },
    };
    let k = clamp_dim(raw, d, variant);
    let mut sched = match variant {
        Variant::Smooth => schedule_noisy_gd_glm(loss, x_bound, 2.0 * b, n, k, budget)?,
        Variant::Lipschitz => {
            let mut s = schedule_jl_lipschitz(require_lipschitz(loss)?, x_bound, b, n, k, budget)?;
            if config.lipschitz_full_batch {
                s.sampling = Sampling::FullBatch;
            }
            s
        }
    };
    sched.k = k;
    Ok(sched)
}

/// Embeds the features with a Gaussian JL matrix `Φ ∈ R^{k×d}`, runs noisy
/// GD (smooth) or noisy SGD (Lipschitz) on the ball of radius `2B` in `R^k`
/// and returns `Φᵀw̃`, without projecting. When `k ≥ d` the embedding is the
/// identity and no matrix is drawn.
pub fn jl_method(
    loss: &dyn GlmLoss,
    ds: &Dataset,
    b: f64,
    budget: &PrivacyBudget,
    variant: Variant,
    config: &JlConfig,
    rng: &mut RngHandle,
) -> Result<TrainedModel> {
    ds.check_loss(loss)?;
    let sched = schedule_jl(
        loss,
        ds.x_bound(),
        b,
        ds.n(),
        ds.d(),
        budget,
        variant,
        config,
    )?;
    let mut diagnostics = BTreeMap::new();
    let w = if sched.k >= ds.d() {
        diagnostics.insert("identity_embedding".into(), 1.0);
        noisy_gd_trace(loss, ds, &sched, rng, false)?.average
    } else {
        diagnostics.insert("identity_embedding".into(), 0.0);
        let phi = jl_sample(rng, sched.k, ds.d())?;
        let embedded = ds.embed(&phi)?;
        diagnostics.insert("embedded_max_norm".into(), embedded.x_bound());
        let inner = noisy_gd_trace(loss, &embedded, &sched, rng, false)?.average;
        diagnostics.insert("inner_norm".into(), norm(&inner));
        let mut lifted = vec![0.0; ds.d()];
        phi.lift_into(&inner, &mut lifted);
        lifted
    };
    diagnostics.insert("k".into(), sched.k as f64);
    diagnostics.insert("empirical_risk".into(), ds.empirical_risk(loss, &w));
    diagnostics.insert("sigma2_injected".into(), sched.sigma2);
    let algorithm = match variant {
        Variant::Smooth => "jl-smooth",
        Variant::Lipschitz => "jl-lipschitz",
    };
    Ok(TrainedModel {
        algorithm: algorithm.into(),
        w: Vector::new(w)?,
        schedule: sched,
        budget: *budget,
        diagnostics,
    })
}
