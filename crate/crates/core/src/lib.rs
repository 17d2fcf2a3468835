//! SP-BFGS: a BFGS variant whose inverse-Hessian update trades the secant
//! condition against a penalty, for noisy smooth optimization.
//!
//! With penalty `beta = +inf` the update is BFGS; with `beta = 0` it leaves
//! the approximation unchanged. Around it sit a noisy minimizer,
//! bounded-noise oracles, classical test problems, a brute-force ground
//! truth and checks of the theory.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod error;
pub mod instances;
pub mod linalg;
pub mod line_search;
pub mod noise;
pub mod optimizer;
pub mod oracle;
pub mod penalty;
pub mod problems;
pub mod update;

pub use error::{Error, Result};
pub use linalg::{DenseVector, SymMatrix};
pub use line_search::LineSearchConfig;
pub use noise::{NoiseSpec, NoisyOracle};
pub use optimizer::{minimize, minimize_baseline_bfgs, Budget, FkSource, RunConfig, RunTrace};
pub use penalty::{BetaSchedule, PenaltyPolicy, Recovery, SkipRule};
pub use problems::Problem;
pub use update::{bfgs_update, compute_penalty_scalars, spbfgs_update, Beta, CurvaturePair, PenaltyScalars};
