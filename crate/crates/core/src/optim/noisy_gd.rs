use std::collections::BTreeMap;

use crate::data::Dataset;
use crate::error::{invalid, Error, Result};
use crate::losses::GlmLoss;
use crate::math::{axpy, dot, norm, project_ball_in_place, RngHandle, Vector};
use crate::mechanisms::PrivacyBudget;
use crate::optim::{OptimizerSchedule, Sampling, TrainedModel};

/// Result of a raw noisy GD pass.
#[derive(Clone, Debug)]
pub struct NoisyGdTrace {
    /// `(1/T) Σ_{t=1..T} w_t`.
    pub average: Vec<f64>,
    /// `L̂(w_t; S)` for `t = 1..T`, when requested.
    pub risks: Option<Vec<f64>>,
    /// Largest iterate norm seen.
    pub max_norm: f64,
}

/// Noisy projected gradient descent from `w_0 = 0`:
/// `w_{t+1} = Π_B(w_t − η(g_t + ξ_t))`, `ξ_t ~ N(0, σ²I)`.
///
/// `g_t` is the full-batch gradient or, for [`Sampling::SingleSample`], the
/// gradient at one uniformly drawn point. Returns the average of
/// `w_1, …, w_T`.
pub fn noisy_gd_trace(
    loss: &dyn GlmLoss,
    ds: &Dataset,
    sched: &OptimizerSchedule,
    rng: &mut RngHandle,
    record_risks: bool,
) -> Result<NoisyGdTrace> {
    sched.validate()?;
    if ds.n() == 0 {
        return Err(Error::Empty("dataset"));
    }
    let d = ds.d();
    let sigma = sched.sigma2.sqrt();
    let mut w = vec![0.0; d];
    let mut g = vec![0.0; d];
    let mut sum = vec![0.0; d];
    let mut risks = record_risks.then(|| Vec::with_capacity(sched.t));
    let mut max_norm = 0.0f64;
    for step in 0..sched.t {
        match sched.sampling {
            Sampling::FullBatch => ds.gradient_into(loss, &w, &mut g),
            Sampling::SingleSample => {
                let i = rng.index(ds.n());
                let x = ds.x(i);
                let s = loss.derivative(dot(&w, x), ds.y(i));
                for (gj, xj) in g.iter_mut().zip(x) {
                    *gj = s * xj;
                }
            }
        }
        if sigma > 0.0 {
            for gj in g.iter_mut() {
                *gj += sigma * rng.standard_normal();
            }
        }
        axpy(-sched.eta, &g, &mut w);
        project_ball_in_place(&mut w, sched.b);
        if w.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteGradient { step });
        }
        max_norm = max_norm.max(norm(&w));
        axpy(1.0, &w, &mut sum);
        if let Some(r) = risks.as_mut() {
            r.push(ds.empirical_risk(loss, &w));
        }
    }
    let inv = 1.0 / sched.t as f64;
    sum.iter_mut().for_each(|v| *v *= inv);
    Ok(NoisyGdTrace {
        average: sum,
        risks,
        max_norm,
    })
}

/// Runs noisy GD and packages the averaged iterate as a model.
pub fn noisy_gd(
    loss: &dyn GlmLoss,
    ds: &Dataset,
    sched: &OptimizerSchedule,
    budget: &PrivacyBudget,
    rng: &mut RngHandle,
) -> Result<TrainedModel> {
    if sched.sigma2 == 0.0 && budget.is_private() {
        return Err(invalid("schedule", "a private budget needs sigma2 > 0"));
    }
    let trace = noisy_gd_trace(loss, ds, sched, rng, false)?;
    let mut diagnostics = BTreeMap::new();
    diagnostics.insert(
        "empirical_risk".into(),
        ds.empirical_risk(loss, &trace.average),
    );
    diagnostics.insert("average_norm".into(), norm(&trace.average));
    diagnostics.insert("max_iterate_norm".into(), trace.max_norm);
    diagnostics.insert("sigma2_injected".into(), sched.sigma2);
    let algorithm = if budget.is_private() {
        "noisy-gd"
    } else {
        "noisy-gd-nonprivate"
    };
    Ok(TrainedModel {
        algorithm: algorithm.into(),
        w: Vector::new(trace.average)?,
        schedule: sched.clone(),
        budget: *budget,
        diagnostics,
    })
}
