use serde::Serialize;

use crate::data::Dataset;
use crate::error::{invalid, Result};
use crate::losses::{require_smooth, y_norm, GlmLoss};
use crate::math::{norm_sq, RngHandle};
use crate::optim::erm::{default_tolerance, regularized_erm_solve};
use crate::optim::noisy_gd::noisy_gd_trace;
use crate::optim::OptimizerSchedule;

#[derive(Clone, Debug, Serialize)]
pub struct StabilityTrial {
    pub index: usize,
    /// `‖ŵ(S) − ŵ(S⁽ⁱ⁾)‖²` under coupled noise.
    pub squared_distance: f64,
    /// `(1/T) Σ_t (L̂(w_t; S) − L̂(w*; S))`.
    pub average_regret: f64,
    /// `(8H̃η²T/n)·regret + 8H̃η²T·Y²/n`.
    pub bound: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct StabilityReport {
    pub trials: Vec<StabilityTrial>,
    pub mean_squared_distance: f64,
    pub mean_bound: f64,
    pub violations: usize,
}

/// Empirical average argument stability of noisy GD.
///
/// Each trial replaces one uniformly drawn point with `fresh(rng)` and
/// reruns with the same noise stream. The comparator `w*` is the empirical
/// minimiser on the schedule's ball.
pub fn empirical_argument_stability(
    loss: &dyn GlmLoss,
    ds: &Dataset,
    sched: &OptimizerSchedule,
    trials: usize,
    fresh: &mut dyn FnMut(&mut RngHandle) -> (Vec<f64>, f64),
    rng: &mut RngHandle,
) -> Result<StabilityReport> {
    if trials == 0 {
        return Err(invalid("trials", "must be >= 1"));
    }
    let h = require_smooth(loss)?;
    let h_tilde = h * ds.x_bound() * ds.x_bound();
    let y2 = y_norm(loss).powi(2);
    let n = ds.n() as f64;
    let t = sched.t as f64;
    let c = 8.0 * h_tilde * sched.eta * sched.eta * t / n;
    let w_star = regularized_erm_solve(loss, ds, sched.b, 0.0, default_tolerance(loss))?.w;
    let base_risk = ds.empirical_risk(loss, &w_star);

    let mut out = Vec::with_capacity(trials);
    for trial in 0..trials {
        let i = rng.index(ds.n());
        let (x, y) = fresh(rng);
        let neighbour = ds.replace(i, &x, y)?;
        let noise = rng.split(trial as u64);
        let a = noisy_gd_trace(loss, ds, sched, &mut noise.clone(), true)?;
        let b = noisy_gd_trace(loss, &neighbour, sched, &mut noise.clone(), false)?;
        let diff: Vec<f64> = a
            .average
            .iter()
            .zip(&b.average)
            .map(|(p, q)| p - q)
            .collect();
        let risks = a.risks.expect("risks were requested");
        let regret = risks.iter().map(|r| r - base_risk).sum::<f64>() / t;
        out.push(StabilityTrial {
            index: i,
            squared_distance: norm_sq(&diff),
            average_regret: regret,
            bound: c * regret + c * y2,
        });
    }
    let k = out.len() as f64;
    Ok(StabilityReport {
        mean_squared_distance: out.iter().map(|t| t.squared_distance).sum::<f64>() / k,
        mean_bound: out.iter().map(|t| t.bound).sum::<f64>() / k,
        violations: out.iter().filter(|t| t.squared_distance > t.bound).count(),
        trials: out,
    })
}
