use std::sync::Arc;

use rayon::prelude::*;

use crate::data::Dataset;
use crate::error::{invalid, Error, Result};
use crate::losses::GlmLoss;
use crate::math::RngHandle;
use crate::mechanisms::{report_noisy_max, PrivacyBudget};
use crate::optim::TrainedModel;
use crate::selection::base::{BaseAlgorithm, TrainContext};

/// `m = ⌈4 ln(4/β)⌉` training chunks.
pub fn boost_chunks(beta: f64) -> Result<usize> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(invalid("beta", format!("must be in (0, 1), got {beta}")));
    }
    Ok((4.0 * (4.0 / beta).ln()).ceil() as usize)
}

/// Laplace scale `σ̃` of the selection step, `σ̃² = 4(Y² + Hγ²‖X‖²)/(nε)`
/// with `H` the link smoothness (1 for non-smooth losses).
pub fn boost_laplace_scale(
    loss: &dyn GlmLoss,
    gamma: f64,
    x_bound: f64,
    n: usize,
    budget: &PrivacyBudget,
) -> f64 {
    if !budget.is_private() {
        return 0.0;
    }
    let h = loss.smoothness().unwrap_or(1.0);
    (4.0 * (loss.bound_at_zero() + h * gamma * gamma * x_bound * x_bound)
        / (n as f64 * budget.epsilon()))
    .sqrt()
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct BoostConfig {
    /// Forces the number of training chunks.
    pub chunks: Option<usize>,
    /// Forces the selection noise scale.
    pub laplace_scale: Option<f64>,
}

/// Confidence boosting: trains `m` copies of `base` on disjoint chunks, each
/// with budget `(ε/2, δ)`, and returns the one with the best noisy
/// validation loss on the remaining points.
#[derive(Clone)]
pub struct Boost {
    pub base: Arc<dyn BaseAlgorithm>,
    pub beta: f64,
    pub config: BoostConfig,
}

impl Boost {
    pub fn chunks(&self) -> Result<usize> {
        match self.config.chunks {
            Some(0) => Err(invalid("chunks", "must be >= 1")),
            Some(m) => Ok(m),
            None => boost_chunks(self.beta),
        }
    }

    fn chunk_context(&self, ctx: &TrainContext) -> Result<TrainContext> {
        let m = self.chunks()?;
        Ok(TrainContext {
            n: ctx.n / (m + 1),
            d: ctx.d,
            x_bound: ctx.x_bound,
            budget: ctx.budget.scale(0.5, 1.0),
        })
    }
}

impl BaseAlgorithm for Boost {
    fn name(&self) -> String {
        format!("boost({})", self.base.name())
    }

    fn loss(&self) -> &dyn GlmLoss {
        self.base.loss()
    }

    fn train(
        &self,
        ds: &Dataset,
        b: f64,
        budget: &PrivacyBudget,
        rng: &mut RngHandle,
    ) -> Result<TrainedModel> {
        let m = self.chunks()?;
        let n = ds.n();
        if n < m + 1 {
            return Err(Error::TooFewPoints {
                n,
                reason: format!("boosting needs at least m + 1 = {} points", m + 1),
            });
        }
        let size = n / (m + 1);
        let inner = budget.scale(0.5, 1.0);
        let models: Vec<TrainedModel> = (0..m)
            .into_par_iter()
            .map(|i| {
                let chunk = ds.slice(i * size, (i + 1) * size);
                self.base.train(&chunk, b, &inner, &mut rng.split(i as u64))
            })
            .collect::<Result<_>>()?;
        let validation = ds.slice(m * size, n);
        let utilities: Vec<f64> = models
            .iter()
            .map(|md| -validation.empirical_risk(self.loss(), md.w.as_slice()))
            .collect();
        let scale = match self.config.laplace_scale {
            Some(s) => s,
            None => {
                let ctx = TrainContext {
                    n: size,
                    d: ds.d(),
                    x_bound: ds.x_bound(),
                    budget: inner,
                };
                let gamma = self.base.gamma(b, &ctx)?;
                boost_laplace_scale(self.loss(), gamma, ds.x_bound(), n, budget)
            }
        };
        let chosen = report_noisy_max(&utilities, scale, &mut rng.split_named("boost-select"))?;
        let mut model = models
            .into_iter()
            .nth(chosen)
            .expect("index from candidate list");
        model.algorithm = self.name();
        model.budget = *budget;
        model.diagnostics.insert("boost_chunks".into(), m as f64);
        model
            .diagnostics
            .insert("boost_chunk_size".into(), size as f64);
        model
            .diagnostics
            .insert("boost_selected".into(), chosen as f64);
        model
            .diagnostics
            .insert("boost_laplace_scale".into(), scale);
        model
            .diagnostics
            .insert("boost_validation_risk".into(), -utilities[chosen]);
        model.diagnostics.insert(
            "empirical_risk".into(),
            ds.empirical_risk(self.loss(), model.w.as_slice()),
        );
        Ok(model)
    }

    fn loss_sensitivity(&self, b: f64, ctx: &TrainContext, k: usize, delta: f64) -> Result<f64> {
        self.base
            .loss_sensitivity(b, &self.chunk_context(ctx)?, k, delta)
    }

    fn gamma(&self, b: f64, ctx: &TrainContext) -> Result<f64> {
        self.base.gamma(b, &self.chunk_context(ctx)?)
    }

    fn err_fn(&self, b: f64, ctx: &TrainContext) -> Option<f64> {
        self.base.err_fn(b, &self.chunk_context(ctx).ok()?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::SquaredLoss;
    use crate::math::Vector;
    use crate::optim::{OptimizerSchedule, Sampling};
    use std::collections::BTreeMap;

    #[test]
    fn chunk_count() {
        assert_eq!(boost_chunks(0.04).unwrap(), 19);
        assert!(boost_chunks(0.0).is_err());
    }

    /// Returns a fixed vector per call index so that selection is checkable.
    struct Scripted {
        loss: Arc<dyn GlmLoss>,
    }

    impl BaseAlgorithm for Scripted {
        fn name(&self) -> String {
            "scripted".into()
        }
        fn loss(&self) -> &dyn GlmLoss {
            self.loss.as_ref()
        }
        fn train(
            &self,
            ds: &Dataset,
            b: f64,
            budget: &PrivacyBudget,
            _rng: &mut RngHandle,
        ) -> Result<TrainedModel> {
            // The chunk whose first label is 1 yields the good model.
            let w = if ds.y(0) == 1.0 {
                vec![1.0]
            } else {
                vec![-1.0]
            };
            Ok(TrainedModel {
                algorithm: "scripted".into(),
                w: Vector::new(w)?,
                schedule: OptimizerSchedule {
                    t: 1,
                    eta: 0.0,
                    sigma2: 0.0,
                    b,
                    lambda: 0.0,
                    k: 0,
                    g: 0.0,
                    sampling: Sampling::FullBatch,
                    warnings: vec![],
                },
                budget: *budget,
                diagnostics: BTreeMap::new(),
            })
        }
        fn loss_sensitivity(
            &self,
            _b: f64,
            _ctx: &TrainContext,
            _k: usize,
            _delta: f64,
        ) -> Result<f64> {
            Ok(1.0)
        }
        fn gamma(&self, b: f64, _ctx: &TrainContext) -> Result<f64> {
            Ok(b)
        }
    }

    fn data() -> Dataset {
        // Chunks of 2 points for m = 3: labels mark chunk 1 as the good one.
        let y = vec![0.5, 1.0, 1.0, 1.0, 0.5, 1.0, 1.0, 1.0];
        Dataset::new(1, vec![1.0; 8], y, 1.0, 1.0).unwrap()
    }

    #[test]
    fn noiseless_selection_returns_best() {
        let loss: Arc<dyn GlmLoss> = Arc::new(SquaredLoss::new(1.0).unwrap());
        let boost = Boost {
            base: Arc::new(Scripted { loss }),
            beta: 0.1,
            config: BoostConfig {
                chunks: Some(3),
                laplace_scale: Some(0.0),
            },
        };
        let budget = PrivacyBudget::new(1.0, 1e-3).unwrap();
        for seed in 0..5 {
            let m = boost
                .train(&data(), 1.0, &budget, &mut RngHandle::new(seed, 0))
                .unwrap();
            assert_eq!(m.w.as_slice(), &[1.0]);
            assert_eq!(m.diag("boost_selected"), Some(1.0));
        }
    }

    #[test]
    fn single_chunk_trains_once() {
        let loss: Arc<dyn GlmLoss> = Arc::new(SquaredLoss::new(1.0).unwrap());
        let base = Arc::new(crate::selection::NoisyGdAlgorithm { loss });
        let boost = Boost {
            base: base.clone(),
            beta: 0.1,
            config: BoostConfig {
                chunks: Some(1),
                ..Default::default()
            },
        };
        let ds = data();
        let budget = PrivacyBudget::new(1.0, 1e-3).unwrap();
        let rng = RngHandle::new(3, 0);
        let m = boost.train(&ds, 1.0, &budget, &mut rng.clone()).unwrap();
        let direct = base
            .train(
                &ds.slice(0, 4),
                1.0,
                &budget.scale(0.5, 1.0),
                &mut rng.split(0),
            )
            .unwrap();
        assert_eq!(m.w, direct.w);
    }

    #[test]
    fn too_small() {
        let loss: Arc<dyn GlmLoss> = Arc::new(SquaredLoss::new(1.0).unwrap());
        let boost = Boost {
            base: Arc::new(Scripted { loss }),
            beta: 0.04,
            config: Default::default(),
        };
        let r = boost.train(
            &data(),
            1.0,
            &PrivacyBudget::new(1.0, 1e-3).unwrap(),
            &mut RngHandle::new(0, 0),
        );
        assert!(matches!(r, Err(Error::TooFewPoints { .. })));
    }
}
