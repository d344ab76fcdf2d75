//! Synthetic instances with known risk: a well-specified regression model,
//! the packing datasets behind the smooth lower bound, and the
//! fingerprinting distribution behind the Lipschitz lower bound.

mod lipschitz_hard;
mod rank;
mod regression;
mod smooth_hard;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, DatasetMeta};
use crate::error::Result;
use crate::math::RngHandle;

pub use lipschitz_hard::{
    fingerprint_deviation_mc, fingerprint_deviation_mean, gen_lipschitz_hard, LipschitzHardOracle,
    LipschitzHardSpec, AUTO_BETA_SHAPE,
};
pub use rank::design_rank;
pub use regression::{
    gen_regression, truncated_normal_variance, RegressionOracle, RegressionSpec, NOISE_TRUNCATION,
};
pub use smooth_hard::{
    gen_smooth_hard, least_squares_diagonal, EmpiricalOracle, SmoothHardInstance, SmoothHardSpec,
    DUMMY_SCALE,
};

/// Risk of a linear predictor under the instance's distribution.
pub trait PopulationOracle: Send + Sync {
    fn risk(&self, w: &[f64]) -> f64;

    /// The comparator the excess risk is measured against.
    fn comparator(&self) -> &[f64];

    fn comparator_risk(&self) -> f64 {
        self.risk(self.comparator())
    }

    fn excess_risk(&self, w: &[f64]) -> f64 {
        self.risk(w) - self.comparator_risk()
    }

    /// Standard error of [`PopulationOracle::risk`]; zero for closed forms.
    fn standard_error(&self) -> f64 {
        0.0
    }
}

/// Generator parameters, tagged by kind.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InstanceSpec {
    Regression(RegressionSpec),
    SmoothHard(SmoothHardSpec),
    LipschitzHard(LipschitzHardSpec),
}

impl InstanceSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            InstanceSpec::Regression(_) => "regression",
            InstanceSpec::SmoothHard(_) => "smooth-hard",
            InstanceSpec::LipschitzHard(_) => "lipschitz-hard",
        }
    }

    pub fn n(&self) -> usize {
        match self {
            InstanceSpec::Regression(s) => s.n,
            InstanceSpec::SmoothHard(s) => s.n,
            InstanceSpec::LipschitzHard(s) => s.n,
        }
    }

    pub fn d(&self) -> usize {
        match self {
            InstanceSpec::Regression(s) => s.d,
            InstanceSpec::SmoothHard(s) => s.d,
            InstanceSpec::LipschitzHard(s) => s.d,
        }
    }
}

/// A generated dataset with its oracle and sidecar metadata.
pub struct Instance {
    pub dataset: Dataset,
    pub oracle: Box<dyn PopulationOracle>,
    pub meta: DatasetMeta,
}

/// Generates `spec` from `seed`. The metadata records every parameter, the
/// realised values the generator derived and the design rank.
pub fn generate(spec: &InstanceSpec, seed: u64) -> Result<Instance> {
    let mut rng = RngHandle::new(seed, 0);
    let (dataset, oracle, extra): (Dataset, Box<dyn PopulationOracle>, serde_json::Value) =
        match spec {
            InstanceSpec::Regression(s) => {
                let (ds, oracle) = gen_regression(s, &mut rng)?;
                (ds, Box::new(oracle), serde_json::Value::Null)
            }
            InstanceSpec::SmoothHard(s) => {
                let inst = gen_smooth_hard(s)?;
                let extra = serde_json::json!({
                    "realized_b": inst.realized_b,
                    "d_prime": inst.d_prime,
                    "b_bias": inst.b_bias,
                    "per_coordinate": inst.per_coordinate,
                    "dummy_c": inst.dummy_c,
                });
                let oracle = EmpiricalOracle::new(inst.dataset.clone(), inst.minimizer.clone());
                (inst.dataset, Box::new(oracle), extra)
            }
            InstanceSpec::LipschitzHard(s) => {
                let (ds, oracle) = gen_lipschitz_hard(s, &mut rng)?;
                let extra = serde_json::json!({ "d_prime": oracle.d_prime(), "alpha_mass": oracle.alpha_mass(), "beta_shape": oracle.beta_shape() });
                (ds, Box::new(oracle), extra)
            }
        };
    let mut meta = DatasetMeta::for_dataset(&dataset, spec.kind(), Some(seed));
    meta.rank = Some(design_rank(&dataset, 1e-10));
    if let serde_json::Value::Object(m) = serde_json::to_value(spec)? {
        meta.params = m;
    }
    meta.params.remove("kind");
    if let serde_json::Value::Object(m) = extra {
        for (k, v) in m {
            meta.params.insert(k, v);
        }
    }
    Ok(Instance {
        dataset,
        oracle,
        meta,
    })
}
