//! Accelerated stochastic gradient methods derived from the Hessian-driven
//! Nesterov flow (SHANG, SHANG++), together with SNAG, NAG, heavy-ball and
//! SGD baselines, a multiplicative-noise gradient oracle, Lyapunov-based rate
//! checks and a seeded Monte-Carlo harness.
//!
//! All numerical code is generic over [`Scalar`] (`f32` or `f64`). The
//! aliases at the crate root fix the scalar to `f64`, which is what the
//! harness and the verification suites use.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod error;
pub mod harness;
pub mod noise;
pub mod objective;
pub mod optimizers;
pub mod point;
pub mod problems;
pub mod scalar;
pub mod verify;

pub use analysis::{
    contraction_check, descent_check, lyapunov, theorem_bound, ContractionReport, DescentReport,
    LyapunovRecord, MeanEnergy, TheoremRate, TolerancePolicy,
};
pub use error::{Error, Result};
pub use harness::{
    run_monte_carlo, run_trajectory, sigma_sweep, Execution, ExperimentSpec, MethodSpec,
    ProblemSpec, StatRow, SweepRow, TrajectoryStats,
};
pub use noise::{
    empirical_mns_constant, sample_noisy_gradient, MnsEstimate, MnsOracle, MnsOracleConfig,
    NoiseShape, NoiseStream,
};
pub use objective::{
    bregman_divergence, three_point_identity_residual, ExactOracle, GradientOracle,
    ObjectiveProblem, SmoothnessProfile,
};
pub use optimizers::{
    baseline_step, build_schedule, schedule_condition_residual, shang_step, shangpp_dl_step,
    shangpp_step, snag_step_hnag, snag_step_original, BaselineMethod, BaselineState, DlState,
    Regime, Schedule, ScheduleParams, ShangMethod, ShangState, SnagHnagParams,
    SnagOriginalParams, SnagState,
};
pub use point::Point;
pub use problems::{fd_gradient, fd_value, make_quadratic, FdProblem, QuadraticProblem};
pub use scalar::Scalar;

/// Double-precision point.
pub type Point64 = Point<f64>;
/// Double-precision smoothness constants.
pub type SmoothnessProfile64 = SmoothnessProfile<f64>;
/// Double-precision SHANG / SHANG++ state.
pub type ShangState64 = ShangState<f64>;
/// Double-precision schedule coefficients.
pub type ScheduleParams64 = ScheduleParams<f64>;
/// Double-precision quadratic objective.
pub type Quadratic64 = QuadraticProblem<f64>;
/// Double-precision piecewise power objective.
pub type Fd64 = FdProblem<f64>;
