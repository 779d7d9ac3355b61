//! Proximable functions and structured maximal monotone operators.

mod block;
mod prox;

pub use block::{strong_monotonicity_audit, MonotoneBlockOperator, MonotonicityReport};
pub use prox::ProxFn;
