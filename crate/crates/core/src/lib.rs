//! Symmetry-reduced conformal Ricci flow.
//!
//! The library evolves doubly-warped metrics
//! `g = a(s)^2 ds^2 + b(s)^2 ghat_kappa` on asymptotically hyperbolic balls
//! and closed models, keeping scalar curvature pinned to its target value
//! through a pressure field solved from a linear elliptic equation at every
//! stage. Alongside the flow itself it provides the diagnostics used to
//! check the structural claims: constraint drift, gauge equivalence against
//! the DeTurck form, boundary decay of the deviation tensor, and sqrt(t)
//! decay of curvature derivatives.

pub mod config;
pub mod curvature;
pub mod diagnostics;
pub mod elliptic;
pub mod error;
pub mod flow;
pub mod frame_tensor;
pub mod gauge;
pub mod grid;
mod linalg;
pub mod metric;
pub mod norms;
pub mod perturb;
pub mod stencil;
pub mod ttensor;
pub mod yamabe;

pub use config::{ArtifactFormat, FlowConfig, GridSpec, OutputSpec, RunMode, TimeSpec, Tolerances};
pub use curvature::{compute_curvature, scalar_laplacian, CurvatureBundle};
pub use diagnostics::{
    constraint_drift, emit_report, evolution_residual, hypothesis_check, shi_quantity,
    DiagnosticRow, DiagnosticsReport, DiagnosticsSummary, HypothesisCheck,
};
pub use elliptic::{
    assemble_operator, pressure_source, solve_pressure, solve_pressure_for,
    verify_pressure_bounds, BoundaryRow, EllipticOperator, PressureBoundsReport, PressureField,
};
pub use error::{Error, Result};
pub use flow::{
    crf_rhs, dcrf_rhs, deturck_vector_field, lie_derivative_terms, make_state, metric_from_sq,
    run_flow, run_flow_with_mode, step, FlowState, HaltReason, MetricVelocity, StepMode,
    Trajectory,
};
pub use frame_tensor::{grad2_rm_norm, FrameTensor};
pub use gauge::{compare_scalar_invariants, gauge_pullback, GaugeAgreementRow};
pub use grid::{Edge, GridFamily, RadialGrid};
pub use metric::{build_background, SymmetricMetric};
pub use norms::{decay_rate_fit, fit_order, sup_abs, sup_abs_on, weighted_sup_norm};
pub use perturb::{apply_perturbation, PerturbParams, PerturbProfile};
pub use stencil::{fd_weights, Parity};
pub use ttensor::{t_tensor_report, TTensorReport};
pub use yamabe::{conformal_normalize, conformal_rescale};
