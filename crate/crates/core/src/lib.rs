//! One-bit compressive sensing: recover a sparse unit-norm signal from the
//! signs of noisy linear measurements.
//!
//! The crate provides the measurement pipeline ([`sensing`]), the pinball
//! margin loss and problem containers ([`loss`]), a projected
//! hard-thresholding solver ([`piht`]), a dual coordinate-ascent solver for
//! the sparsity-regularized convex program with its linear-loss closed form
//! ([`epsvm`]), an alternating sign-correction wrapper for flip noise
//! ([`aop`]), and a batch experiment driver ([`harness`]).

pub mod aop;
pub mod epsvm;
pub mod error;
pub mod harness;
pub mod loss;
pub mod piht;
pub mod sensing;

pub use aop::{aop_solve, AopConfig, AopResult};
pub use epsvm::{
    beta_update, check_optimality, default_mu, default_mu_coef, epsvm_solve,
    hypercube_separation, passive_closed_form, xi_step, DualState, EpsvmConfig, EpsvmResult,
    EpsvmStatus,
};
pub use error::{Error, Result};
pub use loss::{
    epsvm_dual_objective, epsvm_primal_objective, pinball_value, piht_objective,
    piht_subgradient, PinballParams, ProblemData,
};
pub use piht::{hard_threshold, piht_solve, PihtConfig, PihtResult, PihtStatus};
pub use sensing::{
    dump_problem, flip_signs, generate_measurement_system, generate_problem,
    generate_sparse_signal, load_problem, quantize, recovery_error, BitMeasurements, FlipSpec,
    GeneratedProblem, NoiseSpec, ProblemMeta, Seed, SensingMatrix, SparseSignal,
};
