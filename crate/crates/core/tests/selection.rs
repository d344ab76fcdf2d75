use std::sync::Arc;

use dpglm::instances::{gen_regression, PopulationOracle, RegressionSpec};
use dpglm::losses::{GlmLoss, SquaredLoss};
use dpglm::math::Vector;
use dpglm::optim::{schedule_noisy_gd_glm, TrainedModel};
use dpglm::selection::{
    flagship_pipeline, grid_search_budget_spent, private_grid_search, BaseAlgorithm, Boost,
    BoostConfig, NoisyGdAlgorithm, TrainContext,
};
use dpglm::{Dataset, PrivacyBudget, Result, RngHandle};

fn regression(seed: u64, n: usize, d: usize, w_norm: f64) -> (Dataset, Box<dyn PopulationOracle>) {
    let spec = RegressionSpec {
        d,
        n,
        w_star_norm: w_norm,
        noise_std: 0.1,
        x_bound: 1.0,
        rank: None,
    };
    let (ds, o) = gen_regression(&spec, &mut RngHandle::new(seed, 0)).unwrap();
    (ds, Box::new(o))
}

fn quantile(mut v: Vec<f64>, q: f64) -> f64 {
    v.sort_by(f64::total_cmp);
    v[((v.len() - 1) as f64 * q).round() as usize]
}

/// Noisy GD that, with probability 0.2, returns a point on the far side of
/// the ball instead of its output.
struct Flaky {
    inner: NoisyGdAlgorithm,
}

impl BaseAlgorithm for Flaky {
    fn name(&self) -> String {
        "flaky-noisy-gd".into()
    }
    fn loss(&self) -> &dyn GlmLoss {
        self.inner.loss()
    }
    fn train(
        &self,
        ds: &Dataset,
        b: f64,
        budget: &PrivacyBudget,
        rng: &mut RngHandle,
    ) -> Result<TrainedModel> {
        let mut m = self.inner.train(ds, b, budget, rng)?;
        if rng.split_named("flake").uniform() < 0.2 {
            let w: Vec<f64> = m.w.as_slice().iter().map(|v| -v).collect();
            let s = dpglm::math::norm(&w).max(1e-12);
            m.w = Vector::new(w.into_iter().map(|v| v * b / s).collect())?;
        }
        Ok(m)
    }
    fn loss_sensitivity(&self, b: f64, ctx: &TrainContext, k: usize, delta: f64) -> Result<f64> {
        self.inner.loss_sensitivity(b, ctx, k, delta)
    }
    fn gamma(&self, b: f64, ctx: &TrainContext) -> Result<f64> {
        self.inner.gamma(b, ctx)
    }
}

#[test]
fn boosting_trims_the_tail() {
    let (ds, oracle) = regression(1, 4000, 10, 1.0);
    let loss: Arc<dyn GlmLoss> = Arc::new(SquaredLoss::new(ds.y_bound()).unwrap());
    let budget = PrivacyBudget::new(1.0, 1e-4).unwrap();
    let flaky = Arc::new(Flaky {
        inner: NoisyGdAlgorithm { loss: loss.clone() },
    });
    let boosted = Boost {
        base: flaky.clone(),
        beta: 0.5,
        config: BoostConfig::default(),
    };
    let (mut single, mut boost) = (Vec::new(), Vec::new());
    for seed in 0..30 {
        let m = flaky
            .train(&ds, 1.0, &budget, &mut RngHandle::new(seed, 1))
            .unwrap();
        single.push(oracle.excess_risk(m.w.as_slice()));
        let m = boosted
            .train(&ds, 1.0, &budget, &mut RngHandle::new(seed, 2))
            .unwrap();
        boost.push(oracle.excess_risk(m.w.as_slice()));
    }
    let (qs, qb) = (quantile(single, 0.95), quantile(boost, 0.95));
    assert!(qb <= qs, "boosted q95 {qb} vs single q95 {qs}");
}

#[test]
fn boosting_noisy_gd_is_deterministic() {
    let (ds, _) = regression(2, 600, 4, 1.0);
    let loss: Arc<dyn GlmLoss> = Arc::new(SquaredLoss::new(ds.y_bound()).unwrap());
    let boosted = Boost {
        base: Arc::new(NoisyGdAlgorithm { loss }),
        beta: 0.1,
        config: BoostConfig::default(),
    };
    let budget = PrivacyBudget::new(1.0, 1e-4).unwrap();
    let a = boosted
        .train(&ds, 1.0, &budget, &mut RngHandle::new(3, 0))
        .unwrap();
    let b = boosted
        .train(&ds, 1.0, &budget, &mut RngHandle::new(3, 0))
        .unwrap();
    assert_eq!(a.w, b.w);
    assert_eq!(
        a.diag("boost_chunks"),
        Some(boosted.chunks().unwrap() as f64)
    );
}

/// Validation estimates stay within τ_j and no per-point loss exceeds Δ(B_j).
#[test]
fn validation_soundness_and_delta_coverage() {
    let beta = 0.1;
    let k = 3;
    let mut failures = 0;
    let mut clipped = 0;
    for run in 0..200u64 {
        let (ds, oracle) = regression(1000 + run, 512, 5, 1.5);
        let loss: Arc<dyn GlmLoss> = Arc::new(SquaredLoss::new(ds.y_bound()).unwrap());
        let base = NoisyGdAlgorithm { loss };
        let budget = PrivacyBudget::new(1.0, 1e-4).unwrap();
        let out =
            private_grid_search(&base, &ds, k, &budget, beta, &mut RngHandle::new(run, 1)).unwrap();
        let mut bad = false;
        for c in out.candidates.iter().skip(1) {
            clipped += c.clipped;
            if (c.validation_risk - oracle.risk(c.w.as_slice())).abs() > c.tau {
                bad = true;
            }
        }
        failures += bad as usize;
    }
    let slack = 3.0 * (beta / 2.0 / 200.0f64).sqrt();
    assert!(
        (failures as f64 / 200.0) <= beta / 2.0 + slack,
        "{failures} failures"
    );
    assert_eq!(clipped, 0);
}

/// With ‖w*‖ = 3 the smallest covering ball is B = 4 (j = 2); the selected
/// model's validation risk is within the mechanism's slack of L̃_2.
#[test]
fn grid_search_tracks_covering_ball() {
    let (beta, k, eps) = (0.1, 6, 1.0);
    let runs = 200;
    let mut ok = 0;
    for run in 0..runs as u64 {
        let (ds, _) = regression(5000 + run, 1024, 4, 3.0);
        let loss: Arc<dyn GlmLoss> = Arc::new(SquaredLoss::new(ds.y_bound()).unwrap());
        let base = NoisyGdAlgorithm { loss };
        let budget = PrivacyBudget::new(eps, 1e-4).unwrap();
        let out =
            private_grid_search(&base, &ds, k, &budget, beta, &mut RngHandle::new(run, 2)).unwrap();
        let target = &out.candidates[2];
        assert_eq!(target.b_j, 4.0);
        let n_cands = out.candidates.len() as f64;
        let slack = 4.0 * target.gamma * (n_cands / (beta / 4.0)).ln() / (eps / 2.0);
        let sel = &out.candidates[out.selected];
        if sel.penalized <= target.penalized + slack {
            ok += 1;
        }
    }
    assert!(ok as f64 >= (1.0 - beta) * runs as f64, "{ok}/{runs}");
}

#[test]
fn budget_accounting() {
    for k in [1, 3, 8] {
        let b = PrivacyBudget::new(0.7, 1e-5).unwrap();
        let spent = grid_search_budget_spent(&b, k).unwrap();
        assert!(spent.epsilon() <= b.epsilon() * (1.0 + 1e-12));
        assert!(spent.delta() <= b.delta() * (1.0 + 1e-12));
    }
}

#[test]
fn flagship_selects_a_power_of_two() {
    let (ds, oracle) = regression(7, 2048, 5, 2.0);
    let loss: Arc<dyn GlmLoss> = Arc::new(SquaredLoss::new(ds.y_bound()).unwrap());
    let budget = PrivacyBudget::new(1.0, 1.0 / 2048.0).unwrap();
    let out = flagship_pipeline(loss, &ds, &budget, 0.1, &mut RngHandle::new(8, 0)).unwrap();
    let b = out.model.diag("grid_selected_b").unwrap();
    assert!(b == 0.0 || (b.log2().fract() == 0.0 && b >= 2.0));
    assert_eq!(out.model.algorithm, "flagship");
    assert!(oracle.excess_risk(out.model.w.as_slice()) <= ds.y_bound().powi(2));
    let csv = out.report_csv();
    assert_eq!(
        csv.lines().next().unwrap(),
        "j,b_j,validation_risk,tau,delta_b,penalized,selected"
    );
    assert_eq!(csv.lines().count(), out.candidates.len() + 1);
}

#[test]
fn schedules_in_grid_are_recomputable() {
    let (ds, _) = regression(9, 256, 3, 1.0);
    let loss: Arc<dyn GlmLoss> = Arc::new(SquaredLoss::new(ds.y_bound()).unwrap());
    let base = NoisyGdAlgorithm { loss: loss.clone() };
    let budget = PrivacyBudget::new(1.0, 1e-4).unwrap();
    let out = private_grid_search(&base, &ds, 2, &budget, 0.1, &mut RngHandle::new(10, 0)).unwrap();
    if out.selected > 0 {
        let per = budget.split(4).unwrap();
        let b = out.candidates[out.selected].b_j;
        let s = schedule_noisy_gd_glm(loss.as_ref(), ds.x_bound(), b, ds.n() / 2, ds.d(), &per)
            .unwrap();
        assert_eq!(s, out.model.schedule);
    }
}
