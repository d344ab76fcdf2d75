use std::collections::BTreeMap;

use crate::data::Dataset;
use crate::error::{invalid, Result};
use crate::losses::{require_lipschitz, require_smooth, smooth_lipschitz_on_ball, y_norm, GlmLoss};
use crate::math::{norm, sample_gaussian_vector, RngHandle, Vector};
use crate::mechanisms::{gaussian_sigma2_output_perturbation, PrivacyBudget, Variant};
use crate::optim::erm::{default_tolerance, regularized_erm_solve};
use crate::optim::{OptimizerSchedule, Sampling, TrainedModel};

/// Knobs for [`output_perturbation`]. The defaults are the calibrated values.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct OutputPerturbationConfig {
    /// Replaces the calibrated noise variance (test hook).
    pub sigma2_override: Option<f64>,
    /// ERM stopping tolerance; defaults to `1e-8·(1 + Y²)`.
    pub tol: Option<f64>,
}

/// Regularisation strength.
///
/// Smooth: `λ = ((Y + HB‖X‖²)√H‖X‖ / (Bnε))^{2/3} · ln(1/δ)^{1/3}`.
/// Lipschitz: `λ = G‖X‖ ln(1/δ)^{1/4} / (B√(nε))`.
/// Zero for a non-private budget.
pub fn output_perturbation_lambda(
    loss: &dyn GlmLoss,
    x_bound: f64,
    b: f64,
    n: usize,
    budget: &PrivacyBudget,
    variant: Variant,
) -> Result<f64> {
    if !(b > 0.0) || !b.is_finite() {
        return Err(invalid(
            "b",
            format!("must be positive and finite, got {b}"),
        ));
    }
    if n == 0 {
        return Err(invalid("n", "must be positive"));
    }
    if !budget.is_private() {
        return Ok(0.0);
    }
    let l = budget.log_inv_delta()?;
    let (nf, e) = (n as f64, budget.epsilon());
    Ok(match variant {
        Variant::Smooth => {
            let h = require_smooth(loss)?;
            let base =
                (y_norm(loss) + h * b * x_bound * x_bound) * h.sqrt() * x_bound / (b * nf * e);
            base.powf(2.0 / 3.0) * l.powf(1.0 / 3.0)
        }
        Variant::Lipschitz => {
            let g = require_lipschitz(loss)?;
            g * x_bound * l.powf(0.25) / (b * (nf * e).sqrt())
        }
    })
}

/// Per-example gradient bound `G` the variant calibrates against: the smooth
/// bound on the ball, or the link Lipschitz constant.
pub fn output_perturbation_g(
    loss: &dyn GlmLoss,
    x_bound: f64,
    b: f64,
    variant: Variant,
) -> Result<f64> {
    match variant {
        Variant::Smooth => smooth_lipschitz_on_ball(loss, x_bound, b),
        Variant::Lipschitz => require_lipschitz(loss),
    }
}

/// `ℓ₂` sensitivity of the regularised minimiser, `2G_eff/(nλ)` with
/// `G_eff = G` (smooth) or `G‖X‖` (Lipschitz).
pub fn output_perturbation_sensitivity(
    loss: &dyn GlmLoss,
    x_bound: f64,
    b: f64,
    lambda: f64,
    n: usize,
    variant: Variant,
) -> Result<f64> {
    let g = output_perturbation_g(loss, x_bound, b, variant)?;
    let g_eff = match variant {
        Variant::Smooth => g,
        Variant::Lipschitz => g * x_bound,
    };
    Ok(2.0 * g_eff / (n as f64 * lambda))
}

/// Full schedule: `λ`, `σ²` and `G`, with `T` the solver iteration count
/// filled in after the solve.
pub fn schedule_output_perturbation(
    loss: &dyn GlmLoss,
    x_bound: f64,
    b: f64,
    n: usize,
    budget: &PrivacyBudget,
    variant: Variant,
) -> Result<OptimizerSchedule> {
    let lambda = output_perturbation_lambda(loss, x_bound, b, n, budget, variant)?;
    let g = output_perturbation_g(loss, x_bound, b, variant)?;
    let sigma2 = if budget.is_private() {
        gaussian_sigma2_output_perturbation(g, x_bound, lambda, n, budget, variant)?
    } else {
        0.0
    };
    Ok(OptimizerSchedule {
        t: 1,
        eta: 0.0,
        sigma2,
        b,
        lambda,
        k: 0,
        g,
        sampling: Sampling::FullBatch,
        warnings: Vec::new(),
    })
}

/// Solves the regularised ERM on the ball of radius `b` and releases
/// `w̃ + ξ`, `ξ ~ N(0, σ²I)`. The output is not projected.
pub fn output_perturbation(
    loss: &dyn GlmLoss,
    ds: &Dataset,
    b: f64,
    budget: &PrivacyBudget,
    variant: Variant,
    config: &OutputPerturbationConfig,
    rng: &mut RngHandle,
) -> Result<TrainedModel> {
    ds.check_loss(loss)?;
    let mut sched = schedule_output_perturbation(loss, ds.x_bound(), b, ds.n(), budget, variant)?;
    if let Some(s2) = config.sigma2_override {
        sched.sigma2 = s2;
    }
    let tol = config.tol.unwrap_or_else(|| default_tolerance(loss));
    let sol = regularized_erm_solve(loss, ds, b, sched.lambda, tol)?;
    sched.t = sol.iterations.max(1);
    let xi = sample_gaussian_vector(rng, ds.d(), sched.sigma2)?;
    let w: Vec<f64> = sol
        .w
        .iter()
        .zip(xi.as_slice())
        .map(|(a, e)| a + e)
        .collect();

    let mut diagnostics = BTreeMap::new();
    diagnostics.insert("erm_residual".into(), sol.residual);
    diagnostics.insert("erm_norm".into(), norm(&sol.w));
    diagnostics.insert("erm_empirical_risk".into(), ds.empirical_risk(loss, &sol.w));
    diagnostics.insert("empirical_risk".into(), ds.empirical_risk(loss, &w));
    diagnostics.insert("sigma2_injected".into(), sched.sigma2);
    let algorithm = match variant {
        Variant::Smooth => "output-pert-smooth",
        Variant::Lipschitz => "output-pert-lipschitz",
    };
    Ok(TrainedModel {
        algorithm: algorithm.into(),
        w: Vector::new(w)?,
        schedule: sched,
        budget: *budget,
        diagnostics,
    })
}

/// The regularised minimiser alone, for sensitivity checks.
pub fn regularized_minimizer(
    loss: &dyn GlmLoss,
    ds: &Dataset,
    b: f64,
    lambda: f64,
    tol: Option<f64>,
) -> Result<Vec<f64>> {
    let tol = tol.unwrap_or_else(|| default_tolerance(loss));
    Ok(regularized_erm_solve(loss, ds, b, lambda, tol)?.w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::{AbsoluteLoss, ScaledSquaredLoss, SquaredLoss};

    const E_INV: f64 = 0.36787944117144233;

    #[test]
    fn lambda_examples() {
        let b = PrivacyBudget::new(1.0, E_INV).unwrap();
        let ab = AbsoluteLoss::new(1.0).unwrap();
        let lip = output_perturbation_lambda(&ab, 1.0, 1.0, 100, &b, Variant::Lipschitz).unwrap();
        assert!((lip - 0.1).abs() < 1e-15);
        // H = 1 and Y = 1.
        let l = ScaledSquaredLoss::new(1.0, 0.5f64.sqrt()).unwrap();
        let sm = output_perturbation_lambda(&l, 1.0, 1.0, 1000, &b, Variant::Smooth).unwrap();
        assert!((sm - 0.015874010519681994).abs() < 1e-12, "{sm}");
    }

    #[test]
    fn zero_noise_returns_minimiser() {
        let ds = Dataset::new(
            2,
            vec![1.0, 0.0, 0.0, 1.0, 0.6, 0.8],
            vec![0.5, -0.2, 0.1],
            1.0,
            1.0,
        )
        .unwrap();
        let l = SquaredLoss::new(1.0).unwrap();
        let budget = PrivacyBudget::new(1.0, 1e-3).unwrap();
        let cfg = OutputPerturbationConfig {
            sigma2_override: Some(0.0),
            ..Default::default()
        };
        let m = output_perturbation(
            &l,
            &ds,
            1.0,
            &budget,
            Variant::Smooth,
            &cfg,
            &mut RngHandle::new(0, 0),
        )
        .unwrap();
        let w = regularized_minimizer(&l, &ds, 1.0, m.schedule.lambda, None).unwrap();
        assert_eq!(m.w.as_slice(), w.as_slice());
    }

    #[test]
    fn noise_matches_schedule() {
        let ds = Dataset::new(1, vec![1.0, 0.5], vec![0.5, -0.2], 1.0, 1.0).unwrap();
        let l = SquaredLoss::new(1.0).unwrap();
        let budget = PrivacyBudget::new(1.0, 1e-3).unwrap();
        let m = output_perturbation(
            &l,
            &ds,
            1.0,
            &budget,
            Variant::Smooth,
            &Default::default(),
            &mut RngHandle::new(0, 0),
        )
        .unwrap();
        let s = schedule_output_perturbation(&l, 1.0, 1.0, 2, &budget, Variant::Smooth).unwrap();
        assert_eq!(m.diag("sigma2_injected").unwrap(), s.sigma2);
        assert_eq!(m.schedule.sigma2, s.sigma2);
    }

    #[test]
    fn rejects_wrong_regularity() {
        let ds = Dataset::new(1, vec![1.0], vec![0.5], 1.0, 1.0).unwrap();
        let sq = SquaredLoss::new(1.0).unwrap();
        let budget = PrivacyBudget::new(1.0, 1e-3).unwrap();
        let r = output_perturbation(
            &sq,
            &ds,
            1.0,
            &budget,
            Variant::Lipschitz,
            &Default::default(),
            &mut RngHandle::new(0, 0),
        );
        assert!(r.is_err());
    }
}
