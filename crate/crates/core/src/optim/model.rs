use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::math::Vector;
use crate::mechanisms::PrivacyBudget;
use crate::optim::OptimizerSchedule;

/// Output of a training procedure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub algorithm: String,
    pub w: Vector,
    pub schedule: OptimizerSchedule,
    /// Budget charged to this run; `ε = ∞` for non-private runs.
    pub budget: PrivacyBudget,
    #[serde(default)]
    pub diagnostics: BTreeMap<String, f64>,
}

impl TrainedModel {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn diag(&self, key: &str) -> Option<f64> {
        self.diagnostics.get(key).copied()
    }
}
