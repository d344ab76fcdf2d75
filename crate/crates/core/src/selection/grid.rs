use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::data::Dataset;
use crate::error::{invalid, Error, Result};
use crate::losses::{require_smooth, y_norm, GlmLoss};
use crate::math::{dot, RngHandle, Vector};
use crate::mechanisms::{gem_select, PrivacyBudget, ScoredCandidate, Variant};
use crate::optim::{OptimizerSchedule, Sampling, TrainedModel};
use crate::selection::base::{BaseAlgorithm, OutputPerturbationAlgorithm, TrainContext};
use crate::selection::boost::{Boost, BoostConfig};

/// Validation slack `τ = Δ ln(4K/β)/n + √(4Y² ln(4K/β)/n)`.
pub fn grid_tau(delta_b: f64, y2: f64, k: usize, beta: f64, n: usize) -> f64 {
    let l = (4.0 * k as f64 / beta).ln();
    let n = n as f64;
    delta_b * l / n + (4.0 * y2 * l / n).sqrt()
}

/// One row of the selection report. `j = 0` is the zero model.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CandidateModel {
    pub j: usize,
    pub b_j: f64,
    #[serde(skip)]
    pub w: Vector,
    /// `L̂(w_j; S₂)` with per-point losses clipped at `Δ(B_j)`.
    pub validation_risk: f64,
    pub tau: f64,
    pub delta_b: f64,
    /// `L̃_j`.
    pub penalized: f64,
    /// Sensitivity handed to the selection mechanism.
    pub gamma: f64,
    /// Points of `S₂` whose loss exceeded `Δ(B_j)`.
    pub clipped: usize,
    pub selected: bool,
}

#[derive(Clone, Debug)]
pub struct GridSearchOutcome {
    pub model: TrainedModel,
    pub candidates: Vec<CandidateModel>,
    pub selected: usize,
}

impl GridSearchOutcome {
    /// CSV with header `j,b_j,validation_risk,tau,delta_b,penalized,selected`.
    pub fn report_csv(&self) -> String {
        let mut s = String::from("j,b_j,validation_risk,tau,delta_b,penalized,selected\n");
        for c in &self.candidates {
            let _ = writeln!(
                s,
                "{},{:?},{:?},{:?},{:?},{:?},{}",
                c.j, c.b_j, c.validation_risk, c.tau, c.delta_b, c.penalized, c.selected
            );
        }
        s
    }
}

/// Budget actually charged by a grid search with `k` candidates: `k` runs at
/// `(ε/2k, δ/2k)` plus the selection step at `ε/2`.
pub fn grid_search_budget_spent(budget: &PrivacyBudget, k: usize) -> Result<PrivacyBudget> {
    let per = budget.split(2 * k)?;
    let eps = per.epsilon() * k as f64 + budget.epsilon() / 2.0;
    let delta = per.delta() * k as f64;
    PrivacyBudget::new(eps, delta)
}

/// Mean of `min(ℓ(w; z), cap)` over `ds`, and the number of clipped points.
fn clipped_risk(loss: &dyn GlmLoss, ds: &Dataset, w: &[f64], cap: f64) -> (f64, usize) {
    let mut s = 0.0;
    let mut clipped = 0;
    for i in 0..ds.n() {
        let v = loss.value(dot(w, ds.x(i)), ds.y(i));
        if v > cap {
            clipped += 1;
            s += cap;
        } else {
            s += v;
        }
    }
    (s / ds.n().max(1) as f64, clipped)
}

fn zero_schedule() -> OptimizerSchedule {
    OptimizerSchedule {
        t: 1,
        eta: 0.0,
        sigma2: 0.0,
        b: 0.0,
        lambda: 0.0,
        k: 0,
        g: 0.0,
        sampling: Sampling::FullBatch,
        warnings: vec![],
    }
}

/// Private grid search over `B_j = 2^j`, `j = 1..K`.
///
/// Trains each candidate on the first half of `ds` with `(ε/2K, δ/2K)`,
/// scores it on the second half as `L̃_j = L̂(w_j; S₂) + τ_j`, and selects
/// among the zero model (score `Y²`, sensitivity 0) and the candidates with
/// the generalized exponential mechanism at `(ε/2, β/4)`. Candidate `j`
/// enters with sensitivity `Δ(B_j)/|S₂|`.
pub fn private_grid_search(
    base: &dyn BaseAlgorithm,
    ds: &Dataset,
    k: usize,
    budget: &PrivacyBudget,
    beta: f64,
    rng: &mut RngHandle,
) -> Result<GridSearchOutcome> {
    if k == 0 {
        return Err(invalid("k", "must be >= 1"));
    }
    if !(beta > 0.0 && beta < 1.0) {
        return Err(invalid("beta", format!("must be in (0, 1), got {beta}")));
    }
    if !budget.is_private() {
        return Err(invalid("budget", "grid search needs a finite epsilon"));
    }
    let n = ds.n();
    if n < 2 || !n.is_multiple_of(2) {
        return Err(Error::TooFewPoints {
            n,
            reason: "grid search needs an even n >= 2".into(),
        });
    }
    let loss = base.loss();
    ds.check_loss(loss)?;
    let s1 = ds.slice(0, n / 2);
    let s2 = ds.slice(n / 2, n);
    let per = budget.split(2 * k)?;
    let ctx = TrainContext::of(&s1, per);
    let y2 = loss.bound_at_zero();

    let trained: Vec<TrainedModel> = (1..=k)
        .into_par_iter()
        .map(|j| base.train(&s1, 2f64.powi(j as i32), &per, &mut rng.split(j as u64)))
        .collect::<Result<_>>()?;

    let mut candidates = vec![CandidateModel {
        j: 0,
        b_j: 0.0,
        w: Vector::zeros(ds.d()),
        validation_risk: clipped_risk(loss, &s2, &vec![0.0; ds.d()], f64::INFINITY).0,
        tau: 0.0,
        delta_b: y2,
        penalized: y2,
        gamma: 0.0,
        clipped: 0,
        selected: false,
    }];
    for (idx, m) in trained.iter().enumerate() {
        let j = idx + 1;
        let b_j = 2f64.powi(j as i32);
        let delta_b = base.loss_sensitivity(b_j, &ctx, k, budget.delta())?;
        let (risk, clipped) = clipped_risk(loss, &s2, m.w.as_slice(), delta_b);
        let tau = grid_tau(delta_b, y2, k, beta, s2.n());
        candidates.push(CandidateModel {
            j,
            b_j,
            w: m.w.clone(),
            validation_risk: risk,
            tau,
            delta_b,
            penalized: risk + tau,
            gamma: delta_b / s2.n() as f64,
            clipped,
            selected: false,
        });
    }
    let scored: Vec<ScoredCandidate> = candidates
        .iter()
        .map(|c| ScoredCandidate {
            score: c.penalized,
            sensitivity: c.gamma,
        })
        .collect();
    let chosen = gem_select(
        &scored,
        budget.epsilon() / 2.0,
        beta / 4.0,
        &mut rng.split_named("gem"),
    )?;
    candidates[chosen].selected = true;

    let mut model = if chosen == 0 {
        TrainedModel {
            algorithm: String::new(),
            w: Vector::zeros(ds.d()),
            schedule: zero_schedule(),
            budget: *budget,
            diagnostics: BTreeMap::new(),
        }
    } else {
        trained[chosen - 1].clone()
    };
    model.algorithm = format!("grid-search({})", base.name());
    model.budget = *budget;
    let c = &candidates[chosen];
    model.diagnostics.insert("grid_k".into(), k as f64);
    model
        .diagnostics
        .insert("grid_selected_j".into(), chosen as f64);
    model.diagnostics.insert("grid_selected_b".into(), c.b_j);
    model.diagnostics.insert(
        "grid_clipped_points".into(),
        candidates.iter().map(|c| c.clipped).sum::<usize>() as f64,
    );
    model.diagnostics.insert(
        "empirical_risk".into(),
        ds.empirical_risk(loss, model.w.as_slice()),
    );
    Ok(GridSearchOutcome {
        model,
        candidates,
        selected: chosen,
    })
}

/// `K = max(1, ⌈ln max(Y√n/(X√H), Y²(nε)^{2/3}/(√H X²))⌉)`.
pub fn flagship_k(y: f64, x_bound: f64, h: f64, n: usize, epsilon: f64) -> usize {
    let nf = n as f64;
    let a = y * nf.sqrt() / (x_bound * h.sqrt());
    let b = y * y * (nf * epsilon).powf(2.0 / 3.0) / (h.sqrt() * x_bound * x_bound);
    let m = a.max(b);
    if !(m > 1.0) || !m.is_finite() {
        return 1;
    }
    (m.ln().ceil() as usize).max(1)
}

/// The boosted smooth output-perturbation base used by the flagship, with
/// boosting confidence `β/(4K)`.
pub fn flagship_base(loss: Arc<dyn GlmLoss>, k: usize, beta: f64) -> Boost {
    Boost {
        base: Arc::new(OutputPerturbationAlgorithm {
            loss,
            variant: Variant::Smooth,
            config: Default::default(),
        }),
        beta: beta / (4.0 * k as f64),
        config: BoostConfig::default(),
    }
}

/// Grid search over boosted smooth output perturbation, with `K` from
/// [`flagship_k`]. Needs no bound on `‖w*‖`.
pub fn flagship_pipeline(
    loss: Arc<dyn GlmLoss>,
    ds: &Dataset,
    budget: &PrivacyBudget,
    beta: f64,
    rng: &mut RngHandle,
) -> Result<GridSearchOutcome> {
    let h = require_smooth(loss.as_ref())?;
    let k = flagship_k(
        y_norm(loss.as_ref()),
        ds.x_bound(),
        h,
        ds.n(),
        budget.epsilon(),
    );
    let base = flagship_base(loss, k, beta);
    let mut out = private_grid_search(&base, ds, k, budget, beta, rng)?;
    out.model.algorithm = "flagship".into();
    Ok(out)
}
