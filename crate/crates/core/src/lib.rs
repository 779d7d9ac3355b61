//! Metric resolvents `T = (A + Q)^{-1} Q` and the fixed-point schemes built on them.
//!
//! The crate is organised bottom-up:
//!
//! - [`metric`]: `Q`-based inner products, norms and structural classification of metrics.
//! - [`operators`]: proximable functions and structured maximal monotone operators.
//! - [`resolvent`]: evaluation of `T`, `R = I - T`, the relaxed and generalized variants,
//!   the generalized proximity operator, and sampled nonexpansiveness checks.
//! - [`iterate`]: Banach-Picard / Krasnosel'skii-Mann / generalized iterations with traces.
//! - [`rates`]: evaluatable convergence-rate bounds and trace comparators.
//! - [`splitting`]: ADMM, PDHG, ALM and linearized Bregman written as metric-resolvent
//!   schemes, with independent native implementations of each algorithm.

// `!(x > 0.0)` deliberately rejects NaN along with nonpositive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod iterate;
pub mod linalg;
pub mod metric;
pub mod operators;
pub mod rates;
pub mod resolvent;
pub mod sampling;
pub mod splitting;

pub use error::{Error, Result};
pub use iterate::{compute_reference, run, IterationTrace, RunOptions, StopReason};
pub use linalg::{Matrix, Vector};
pub use metric::{classify_metric, q_inner, q_norm_sq, spectral_bounds, Definiteness, Metric, Symmetry};
pub use operators::{MonotoneBlockOperator, ProxFn};
pub use rates::{RateBound, RateFormula, RateReport};
pub use resolvent::{ResolventScheme, SolveStrategy};
pub use splitting::{Algorithm, NativeAlgorithm, SplittingProblem};
