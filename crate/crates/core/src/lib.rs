//! Differentially private learning of generalized linear models.
//!
//! Noisy projected gradient descent, a Johnson–Lindenstrauss reduction for
//! high dimensions, regularised output perturbation, confidence boosting and
//! a private grid search over the model norm, together with synthetic
//! instance generators and population-risk oracles for testing them.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod error;
pub mod instances;
pub mod losses;
pub mod math;
pub mod mechanisms;
pub mod optim;
pub mod selection;

pub use data::{Dataset, DatasetMeta};
pub use error::{Error, Result};
pub use losses::{AbsoluteLoss, GlmLoss, HuberLoss, ScaledSquaredLoss, SquaredLoss};
pub use math::{RngHandle, Vector};
pub use mechanisms::{PrivacyBudget, ScoredCandidate, Variant};
pub use optim::{OptimizerSchedule, TrainedModel};
