//! Unified error type for the solver library.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value violates a named validation rule.
    #[error("config rule `{rule}` violated: {message}")]
    Config { rule: &'static str, message: String },

    /// The metric stopped being a metric: a <= 0, interior b <= 0, or a pole
    /// regularity condition failed badly enough that curvature is meaningless.
    #[error("degenerate metric: {detail}")]
    DegenerateMetric { detail: String },

    /// NaN or infinity showed up where a finite number was required.
    #[error("non-finite value encountered in {context}")]
    NonFinite { context: &'static str },

    /// Two per-node fields that must share a grid do not.
    #[error("operands live on different grids")]
    GridMismatch,

    /// The assembled operator has a numerically vanishing singular value.
    /// The near-kernel vector is attached for reporting.
    #[error(
        "elliptic operator is near-singular: sigma_min = {sigma_min:.3e} <= 1e-8 * ||op|| ({op_norm:.3e}); refusing to solve"
    )]
    NearSingularOperator {
        sigma_min: f64,
        op_norm: f64,
        near_kernel: Vec<f64>,
    },

    /// The tridiagonal elimination hit a vanishing pivot.
    #[error("tridiagonal solve broke down: {detail}")]
    SolverBreakdown { detail: String },

    /// A direct solve finished but its residual exceeds the declared tolerance.
    #[error("solve residual {residual:.3e} exceeds tolerance {tol:.3e}")]
    ResidualTooLarge { residual: f64, tol: f64 },

    /// Damped Newton ran out of iterations.
    #[error("Newton iteration stalled: residual {residual:.3e} after {iterations} iterations")]
    NewtonDivergence { iterations: usize, residual: f64 },

    /// An iterate left the positive cone (conformal factor or metric entry).
    #[error("positivity lost in {context}")]
    PositivityLoss { context: &'static str },

    /// A decay-rate fit has no defined answer on the requested window.
    #[error("decay fit undefined: {detail}")]
    FitUndefined { detail: String },

    /// The gauge ODE integration produced a non-monotone or non-finite map.
    #[error("gauge integration broke down: {detail}")]
    GaugeBreakdown { detail: String },

    /// The operation's family precondition is not met (e.g. boundary
    /// diagnostics on a closed model).
    #[error("operation not applicable: {detail}")]
    NotApplicable { detail: String },

    /// A trajectory-level diagnostic needs more snapshots than were produced.
    #[error("need at least {needed} snapshots, got {got}")]
    TooFewSnapshots { needed: usize, got: usize },
}
