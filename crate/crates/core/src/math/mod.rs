//! Vector arithmetic, seeded randomness and random projections.

mod jl;
mod rng;
pub(crate) mod vector;

pub(crate) use jl::random_unit;
pub use jl::{empirical_jl_failure_rate, jl_apply, jl_lift, jl_required_dim, jl_sample, JlMatrix};
pub use rng::{sample_gaussian_vector, sample_laplace, RngHandle};
pub use vector::{axpy, dot, norm, norm_sq, project_ball, project_ball_in_place, Vector};
