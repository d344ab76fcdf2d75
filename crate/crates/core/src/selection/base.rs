use std::sync::Arc;

use crate::data::Dataset;
use crate::error::{invalid, Result};
use crate::losses::{require_lipschitz, require_smooth, GlmLoss};
use crate::math::RngHandle;
use crate::mechanisms::{PrivacyBudget, Variant};
use crate::optim::{
    jl_method, noisy_gd, output_perturbation, schedule_noisy_gd_glm, schedule_output_perturbation,
    JlConfig, OutputPerturbationConfig, TrainedModel,
};

/// What a base algorithm will be trained on, as far as the selection
/// layer needs to know before training.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainContext {
    pub n: usize,
    pub d: usize,
    pub x_bound: f64,
    pub budget: PrivacyBudget,
}

impl TrainContext {
    pub fn of(ds: &Dataset, budget: PrivacyBudget) -> Self {
        Self {
            n: ds.n(),
            d: ds.d(),
            x_bound: ds.x_bound(),
            budget,
        }
    }
}

/// A training procedure usable inside boosting and grid search.
pub trait BaseAlgorithm: Send + Sync {
    fn name(&self) -> String;

    fn loss(&self) -> &dyn GlmLoss;

    fn train(
        &self,
        ds: &Dataset,
        b: f64,
        budget: &PrivacyBudget,
        rng: &mut RngHandle,
    ) -> Result<TrainedModel>;

    /// `Δ(B)`: bound on the per-point loss of the trained model, holding
    /// with probability `1 − δ/K` over the algorithm's noise.
    fn loss_sensitivity(&self, b: f64, ctx: &TrainContext, k: usize, delta: f64) -> Result<f64>;

    /// Sub-Gaussian parameter of the output norm, used for the boosting
    /// selection noise.
    fn gamma(&self, b: f64, ctx: &TrainContext) -> Result<f64>;

    /// Theoretical excess-risk bound, for diagnostics only.
    fn err_fn(&self, _b: f64, _ctx: &TrainContext) -> Option<f64> {
        None
    }
}

/// `Y² + HB²‖X‖²`.
pub fn delta_noisy_gd(y2: f64, h: f64, x_bound: f64, b: f64) -> f64 {
    y2 + h * b * b * x_bound * x_bound
}

/// `Y² + H‖X‖²σ² ln(K/δ) + HB²‖X‖²`; pass `log_k_over_delta = ln(K/δ)`.
pub fn delta_output_perturbation(
    y2: f64,
    h: f64,
    x_bound: f64,
    b: f64,
    sigma2: f64,
    log_k_over_delta: f64,
) -> f64 {
    y2 + h * x_bound * x_bound * sigma2 * log_k_over_delta + h * b * b * x_bound * x_bound
}

fn log_k_over_delta(k: usize, delta: f64) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(invalid("delta", "loss sensitivity needs delta > 0"));
    }
    Ok((k.max(1) as f64 / delta).ln().max(0.0))
}

/// Noisy GD with the smooth-case schedule. A non-private budget runs with
/// `σ = 0`.
#[derive(Clone, Debug)]
pub struct NoisyGdAlgorithm {
    pub loss: Arc<dyn GlmLoss>,
}

impl BaseAlgorithm for NoisyGdAlgorithm {
    fn name(&self) -> String {
        "noisy-gd".into()
    }
    fn loss(&self) -> &dyn GlmLoss {
        self.loss.as_ref()
    }
    fn train(
        &self,
        ds: &Dataset,
        b: f64,
        budget: &PrivacyBudget,
        rng: &mut RngHandle,
    ) -> Result<TrainedModel> {
        ds.check_loss(self.loss())?;
        let sched = schedule_noisy_gd_glm(self.loss(), ds.x_bound(), b, ds.n(), ds.d(), budget)?;
        noisy_gd(self.loss(), ds, &sched, budget, rng)
    }
    fn loss_sensitivity(&self, b: f64, ctx: &TrainContext, _k: usize, _delta: f64) -> Result<f64> {
        let h = require_smooth(self.loss())?;
        Ok(delta_noisy_gd(self.loss.bound_at_zero(), h, ctx.x_bound, b))
    }
    fn gamma(&self, b: f64, _ctx: &TrainContext) -> Result<f64> {
        Ok(b)
    }
    fn err_fn(&self, b: f64, ctx: &TrainContext) -> Option<f64> {
        let h = self.loss.smoothness()?;
        let y = self.loss.bound_at_zero().sqrt();
        let n = ctx.n as f64;
        let stat = h.sqrt() * b * ctx.x_bound * y / n.sqrt();
        let priv_term = if ctx.budget.is_private() {
            let l = ctx.budget.log_inv_delta().ok()?;
            (h.sqrt() * b * ctx.x_bound * y).max(h * b * b * ctx.x_bound * ctx.x_bound)
                * (ctx.d as f64 * l).sqrt()
                / (n * ctx.budget.epsilon())
        } else {
            0.0
        };
        Some(stat + priv_term)
    }
}

/// Regularised output perturbation.
#[derive(Clone, Debug)]
pub struct OutputPerturbationAlgorithm {
    pub loss: Arc<dyn GlmLoss>,
    pub variant: Variant,
    pub config: OutputPerturbationConfig,
}

impl OutputPerturbationAlgorithm {
    fn sigma2(&self, b: f64, ctx: &TrainContext) -> Result<f64> {
        if let Some(s) = self.config.sigma2_override {
            return Ok(s);
        }
        Ok(schedule_output_perturbation(
            self.loss(),
            ctx.x_bound,
            b,
            ctx.n,
            &ctx.budget,
            self.variant,
        )?
        .sigma2)
    }
}

impl BaseAlgorithm for OutputPerturbationAlgorithm {
    fn name(&self) -> String {
        match self.variant {
            Variant::Smooth => "output-pert-smooth".into(),
            Variant::Lipschitz => "output-pert-lipschitz".into(),
        }
    }
    fn loss(&self) -> &dyn GlmLoss {
        self.loss.as_ref()
    }
    fn train(
        &self,
        ds: &Dataset,
        b: f64,
        budget: &PrivacyBudget,
        rng: &mut RngHandle,
    ) -> Result<TrainedModel> {
        output_perturbation(self.loss(), ds, b, budget, self.variant, &self.config, rng)
    }
    /// Smooth: the regularised-perturbation bound. Lipschitz:
    /// `Y² + G‖X‖(B + σ√ln(K/δ))`, the same high-probability argument
    /// applied to a `G`-Lipschitz link.
    fn loss_sensitivity(&self, b: f64, ctx: &TrainContext, k: usize, delta: f64) -> Result<f64> {
        let s2 = self.sigma2(b, ctx)?;
        let lk = log_k_over_delta(k, delta)?;
        let y2 = self.loss.bound_at_zero();
        match self.variant {
            Variant::Smooth => {
                let h = require_smooth(self.loss())?;
                Ok(delta_output_perturbation(y2, h, ctx.x_bound, b, s2, lk))
            }
            Variant::Lipschitz => {
                let g = require_lipschitz(self.loss())?;
                Ok(y2 + g * ctx.x_bound * (b + (s2 * lk).sqrt()))
            }
        }
    }
    fn gamma(&self, b: f64, ctx: &TrainContext) -> Result<f64> {
        Ok(b + self.sigma2(b, ctx)?.sqrt())
    }
}

/// The JL method.
#[derive(Clone, Debug)]
pub struct JlAlgorithm {
    pub loss: Arc<dyn GlmLoss>,
    pub variant: Variant,
    pub config: JlConfig,
}

impl BaseAlgorithm for JlAlgorithm {
    fn name(&self) -> String {
        match self.variant {
            Variant::Smooth => "jl-smooth".into(),
            Variant::Lipschitz => "jl-lipschitz".into(),
        }
    }
    fn loss(&self) -> &dyn GlmLoss {
        self.loss.as_ref()
    }
    fn train(
        &self,
        ds: &Dataset,
        b: f64,
        budget: &PrivacyBudget,
        rng: &mut RngHandle,
    ) -> Result<TrainedModel> {
        jl_method(self.loss(), ds, b, budget, self.variant, &self.config, rng)
    }
    /// The inner iterate has norm at most `2B`; the bound uses the declared
    /// feature norm, so it holds on the event that the embedding preserves
    /// `⟨w̃, Φx⟩` up to that scale.
    fn loss_sensitivity(&self, b: f64, ctx: &TrainContext, _k: usize, _delta: f64) -> Result<f64> {
        let y2 = self.loss.bound_at_zero();
        match self.variant {
            Variant::Smooth => Ok(delta_noisy_gd(
                y2,
                require_smooth(self.loss())?,
                ctx.x_bound,
                2.0 * b,
            )),
            Variant::Lipschitz => Ok(y2 + require_lipschitz(self.loss())? * ctx.x_bound * 2.0 * b),
        }
    }
    fn gamma(&self, b: f64, _ctx: &TrainContext) -> Result<f64> {
        Ok(2.0 * b)
    }
}
