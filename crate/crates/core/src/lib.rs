//! Linear regression as a QUBO with adaptive per-coefficient precision.
//!
//! The crate is `no_std` (with `alloc`). The default `std` feature adds
//! wall-clock timing of sampler calls and runs annealing reads on a rayon
//! pool.
#![cfg_attr(not(feature = "std"), no_std)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod adaptive;
pub mod dataset;
pub mod error;
pub mod precision;
pub mod qubo;
pub mod regression;
pub mod rng;
pub mod sampler;

pub use adaptive::{
    adaptive_fit, initial_weights_from_fixed, solve_fixed, AdaptiveConfig, AdaptiveState,
    IterationRecord,
};
pub use dataset::{
    accumulate_gram, generate_dataset, synthetic_gram, GramAccumulator, GramSystem, SyntheticSpec,
    TrueModel,
};
pub use error::{Error, Result};
pub use precision::{
    centered_precision, expand_precision_matrix, representable_grid, uniform_precision,
    PrecisionSpec,
};
pub use qubo::{build_qubo, decode_weights, BinaryAssignment, QuboProblem};
pub use regression::{
    r_squared, solve_closed_form, solve_sgd, InMemoryRows, RowSource, SgdConfig, SgdFit,
    WeightVector,
};
pub use sampler::{
    brute_force, default_beta_range, simulated_anneal, BruteForce, SaConfig, SampleRecord,
    SampleSet, Sampler, SimulatedAnnealing,
};
