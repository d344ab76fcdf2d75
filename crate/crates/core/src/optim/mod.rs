//! Private training procedures and their parameter schedules.

pub mod erm;
mod jl_method;
mod model;
mod noisy_gd;
mod output_perturbation;
mod schedule;
mod stability;

pub use erm::{regularized_erm_solve, regularized_objective, ErmSolution};
pub use jl_method::{
    clamp_dim, jl_dim_lipschitz_raw, jl_dim_smooth_raw, jl_method, schedule_jl,
    schedule_jl_lipschitz, JlConfig,
};
pub use model::TrainedModel;
pub use noisy_gd::{noisy_gd, noisy_gd_trace, NoisyGdTrace};
pub use output_perturbation::{
    output_perturbation, output_perturbation_g, output_perturbation_lambda,
    output_perturbation_sensitivity, regularized_minimizer, schedule_output_perturbation,
    OutputPerturbationConfig,
};
pub use schedule::{schedule_noisy_gd, schedule_noisy_gd_glm, OptimizerSchedule, Sampling};
pub use stability::{empirical_argument_stability, StabilityReport, StabilityTrial};
