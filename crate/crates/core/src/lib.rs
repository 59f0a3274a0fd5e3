//! Numerical laboratory for nearest-neighbour random walks among random
//! conductances on ℤ.
//!
//! The crate builds reproducible conductance environments
//! ([`environment`]), iterates the exact heat kernel of the walk
//! ([`heat_kernel`]), simulates walker ensembles ([`walker`]), and compares
//! both against the limit statements that hold for stationary ergodic
//! conductances: the local limit theorem, the central limit theorem,
//! Gaussian-type energy bounds, complete monotonicity of return
//! probabilities, Nash-type decay, and null recurrence ([`limits`]).
//!
//! Everything is deterministic: a seed fixes the environment, the walkers,
//! and every reduction order, so results are bit-identical across runs and
//! across thread counts (the `parallel` feature changes scheduling only).

pub mod environment;
pub mod heat_kernel;
pub mod limits;
pub mod numeric;
pub mod rng;
pub mod walker;

pub use environment::{build_env, integrability_class, EnvKind, EnvSpec, Environment, IntegrabilityClass, Observable};
