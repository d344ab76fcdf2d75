//! Confidence boosting and private selection of the model norm.

mod base;
mod boost;
mod grid;

pub use base::{
    delta_noisy_gd, delta_output_perturbation, BaseAlgorithm, JlAlgorithm, NoisyGdAlgorithm,
    OutputPerturbationAlgorithm, TrainContext,
};
pub use boost::{boost_chunks, boost_laplace_scale, Boost, BoostConfig};
pub use grid::{
    flagship_base, flagship_k, flagship_pipeline, grid_search_budget_spent, grid_tau,
    private_grid_search, CandidateModel, GridSearchOutcome,
};
