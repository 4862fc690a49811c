//! Time integration of the conformal flow and its gauge-fixed variant.
//!
//! The evolving unknowns are the squared profiles (a^2, b^2); squaring keeps
//! the pole values of b pinned at exactly zero (the velocity there is an
//! exact product with zero) and makes positivity loss a simple sign test.
//! Every Runge-Kutta stage re-solves the pressure equation on the stage
//! metric, so the constraint coupling is evaluated to the same order as the
//! metric update.

use crate::config::{FlowConfig, RunMode};
use crate::curvature::{compute_curvature, CurvatureBundle};
use crate::elliptic::{solve_pressure_for, PressureField};
use crate::error::{Error, Result};
use crate::grid::{Edge, RadialGrid};
use crate::metric::{build_background, SymmetricMetric};
use crate::perturb::apply_perturbation;
use crate::stencil::Parity;
use crate::yamabe::conformal_normalize;

/// Which right-hand side drives the step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepMode {
    /// The bare flow; stationary exactly at Einstein states.
    Crf,
    /// The flow plus the Lie-derivative gauge terms toward a fixed reference.
    Dcrf,
}

/// A time slice: metric together with the fields every consumer needs.
#[derive(Clone, Debug)]
pub struct FlowState {
    pub t: f64,
    pub metric: SymmetricMetric,
    pub pressure: PressureField,
    pub curv: CurvatureBundle,
}

/// Velocity of the squared profiles.
#[derive(Clone, Debug)]
pub struct MetricVelocity {
    pub da_sq: Vec<f64>,
    pub db_sq: Vec<f64>,
}

/// Why a run stopped before t_end.
#[derive(Clone, Debug)]
pub enum HaltReason {
    /// The metric left the admissible cone (a -> 0, interior b -> 0, NaN).
    Degeneration { t: f64, detail: String },
    /// The pressure solve failed on an otherwise admissible metric.
    SolverFailure { t: f64, detail: String },
}

impl HaltReason {
    pub fn time(&self) -> f64 {
        match self {
            HaltReason::Degeneration { t, .. } | HaltReason::SolverFailure { t, .. } => *t,
        }
    }

    pub fn detail(&self) -> &str {
        match self {
            HaltReason::Degeneration { detail, .. }
            | HaltReason::SolverFailure { detail, .. } => detail,
        }
    }
}

/// The product of a run: snapshots at the configured cadence plus the data
/// needed to diagnose or gauge-transform them afterwards.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub snapshots: Vec<FlowState>,
    /// DeTurck field at each snapshot; populated for DCRF runs.
    pub w_fields: Option<Vec<Vec<f64>>>,
    pub halt: Option<HaltReason>,
    /// The unperturbed reference metric (also the DeTurck target).
    pub background: SymmetricMetric,
    /// Sub-step size actually used.
    pub dt: f64,
    pub mode: StepMode,
    pub config: FlowConfig,
}

impl Trajectory {
    pub fn halted(&self) -> bool {
        self.halt.is_some()
    }
}

/// Curvature and pressure for a metric, bundled with its time stamp.
pub fn make_state(t: f64, metric: SymmetricMetric, elliptic_tol: f64) -> Result<FlowState> {
    metric.validate()?;
    let curv = compute_curvature(&metric)?;
    let pressure = solve_pressure_for(&metric, &curv, elliptic_tol)?;
    Ok(FlowState {
        t,
        metric,
        pressure,
        curv,
    })
}

/// Velocity of the bare flow: d(a^2)/dt = -2 a^2 (dev_rad + p) and
/// d(b^2)/dt = -2 b^2 (dev_tan + p), where dev is the Einstein deviation.
///
/// The tangential factor uses the constraint-substituted deviation from the
/// curvature bundle rather than the geometric one; the two agree on data
/// satisfying the scalar constraint, and the substituted form decouples the
/// fiber velocity from the radial curvature, whose pole-adjacent stencils
/// otherwise drive a discrete instability (see `compute_curvature`).
pub fn crf_rhs(state: &FlowState) -> MetricVelocity {
    let g = &state.metric;
    let p = &state.pressure.p;
    let n = g.grid.n_points;
    let mut da_sq = vec![0.0; n];
    let mut db_sq = vec![0.0; n];
    let mut a_sq = vec![0.0; n];
    let mut b_sq = vec![0.0; n];
    for i in 0..n {
        a_sq[i] = g.a[i] * g.a[i];
        b_sq[i] = g.b[i] * g.b[i];
        da_sq[i] = -2.0 * a_sq[i] * (state.curv.einstein_dev_rad[i] + p[i]);
        db_sq[i] = -2.0 * b_sq[i] * (state.curv.vel_dev_tan[i] + p[i]);
    }
    add_dissipation(&g.grid, &mut da_sq, &a_sq);
    add_dissipation(&g.grid, &mut db_sq, &b_sq);
    // Far-field freezing: a truncated AH end needs boundary data to be
    // parabolically well posed; leaving the edge free admits boundary-layer
    // modes growing at O(1/ds^2) regardless of the one-sided row choice. The
    // flow fixes the conformal infinity (deviations decay like x^2), so the
    // faithful closure is to hold the outermost nodes at their initial
    // values. They are excluded from all diagnostic bands anyway.
    if g.grid.right == Edge::Truncation {
        for i in n - FROZEN_EDGE_NODES..n {
            da_sq[i] = 0.0;
            db_sq[i] = 0.0;
        }
    }
    MetricVelocity { da_sq, db_sq }
}

/// Strength of the grid-mode filter; the per-step stability load it adds is
/// sigma * DISSIPATION_GAMMA, well inside the integrator's region.
const DISSIPATION_GAMMA: f64 = 2.0;

/// Outermost nodes of a truncated AH grid held at their initial values. The
/// zone spans the footprint of the one-sided derivative rows, so every biased
/// row reads frozen data only; a narrower zone leaves those rows coupled to
/// evolving neighbors, which reinstates the boundary-layer growth.
pub const FROZEN_EDGE_NODES: usize = 6;

/// Eighth-difference dissipation added to the velocity of every evolving node.
///
/// Two discrete feedback loops need it. Near a pole, the 1/b^2 factor in the
/// sphere curvature amplifies node-scale noise by 1/ds^2 and the folded rows
/// close a loop that grows a sawtooth at about 0.6/ds^2. At the frozen
/// far-field interface of a truncated grid, a period-two mode grows at O(10).
/// Both squared profiles are even across fold edges, so (Delta_+ Delta_-)^4
/// of the state is defined up to the edges by reflection; adding
/// -gamma/ds^2 * D8 f / 256 to df/dt damps sawtooth content at gamma/ds^2
/// while displacing smooth data only at O(ds^6), below the truncation error
/// of the interior stencils. Pole nodes themselves are skipped (b^2 stays
/// pinned at zero and a^2 is closed by the regularity projection); on a
/// truncated grid the filter stops where the stencil would need data beyond
/// the last node, inside the frozen zone anyway.
fn add_dissipation(grid: &RadialGrid, vel: &mut [f64], field: &[f64]) {
    const W8: [f64; 9] = [1.0, -8.0, 28.0, -56.0, 70.0, -56.0, 28.0, -8.0, 1.0];
    let n = grid.n_points;
    if n < 13 {
        return;
    }
    let scale = DISSIPATION_GAMMA / (grid.spacing * grid.spacing) / 256.0;
    let last = (n - 1) as isize;
    let right_fold = grid.right != Edge::Truncation;
    let lo = if grid.left == Edge::Pole { 1 } else { 0 };
    let hi = if right_fold {
        if grid.right == Edge::Pole {
            n - 1
        } else {
            n
        }
    } else {
        n - 4
    };
    for j in lo..hi {
        let mut d8 = 0.0;
        for (k, w) in W8.iter().enumerate() {
            let mut t = j as isize + k as isize - 4;
            if t < 0 {
                t = -t;
            }
            if t > last {
                debug_assert!(right_fold);
                t = 2 * last - t;
            }
            d8 += w * field[t as usize];
        }
        vel[j] -= scale * d8;
    }
}

/// Radial component of the DeTurck vector field of g relative to g0:
///
///   W^s = (1/a0^2) (a'/a - a0'/a0) - (m/b0^2) (b b'/a^2 - b0 b0'/a0^2)
///
/// Both parentheses are odd about fold edges and vanish like s^3 near a
/// pole, so W extends by zero there; the pole nodes are set exactly.
pub fn deturck_vector_field(g: &SymmetricMetric, g0: &SymmetricMetric) -> Result<Vec<f64>> {
    if g.grid.n_points != g0.grid.n_points
        || g.grid.family != g0.grid.family
        || g.grid.spacing != g0.grid.spacing
        || g.m != g0.m
    {
        return Err(Error::GridMismatch);
    }
    let n = g.grid.n_points;
    let da = g.grid.d1(&g.a, Parity::Even);
    let da0 = g0.grid.d1(&g0.a, Parity::Even);
    let db = g.grid.d1(&g.b, g.b_parity());
    let db0 = g0.grid.d1(&g0.b, g0.b_parity());
    let m = g.m as f64;
    let mut w = vec![0.0; n];
    for i in 0..n {
        if g.grid.is_pole(i) {
            continue;
        }
        let log_lapse = da[i] / g.a[i] - da0[i] / g0.a[i];
        let warp = g.b[i] * db[i] / (g.a[i] * g.a[i])
            - g0.b[i] * db0[i] / (g0.a[i] * g0.a[i]);
        w[i] = log_lapse / (g0.a[i] * g0.a[i]) - m * warp / (g0.b[i] * g0.b[i]);
    }
    Ok(w)
}

/// Lie derivative of the metric along W d/ds, in squared-profile components:
/// (L_W g)_ss = W (a^2)' + 2 a^2 W' and (L_W g)_tan = W (b^2)'.
pub fn lie_derivative_terms(g: &SymmetricMetric, w: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = g.grid.n_points;
    if w.len() != n {
        return Err(Error::GridMismatch);
    }
    let a_sq: Vec<f64> = g.a.iter().map(|&a| a * a).collect();
    let b_sq: Vec<f64> = g.b.iter().map(|&b| b * b).collect();
    let da_sq = g.grid.d1(&a_sq, Parity::Even);
    let db_sq = g.grid.d1(&b_sq, Parity::Even);
    let dw = g.grid.d1(w, Parity::Odd);
    let mut lie_ss = vec![0.0; n];
    let mut lie_tan = vec![0.0; n];
    for i in 0..n {
        lie_ss[i] = w[i] * da_sq[i] + 2.0 * a_sq[i] * dw[i];
        lie_tan[i] = w[i] * db_sq[i];
    }
    Ok((lie_ss, lie_tan))
}

/// Velocity of the gauge-fixed flow: the bare velocity plus the Lie terms.
/// The sum is assembled termwise on top of `crf_rhs`, so the difference of
/// the two right-hand sides reproduces the Lie terms bitwise.
pub fn dcrf_rhs(state: &FlowState, g0: &SymmetricMetric) -> Result<MetricVelocity> {
    let w = deturck_vector_field(&state.metric, g0)?;
    let (lie_ss, lie_tan) = lie_derivative_terms(&state.metric, &w)?;
    let mut vel = crf_rhs(state);
    let n = vel.da_sq.len();
    let frozen_from = match state.metric.grid.right {
        Edge::Truncation => n - FROZEN_EDGE_NODES,
        _ => n,
    };
    for i in 0..frozen_from {
        vel.da_sq[i] += lie_ss[i];
        vel.db_sq[i] += lie_tan[i];
    }
    Ok(vel)
}

fn velocity_for(state: &FlowState, mode: StepMode, g0: &SymmetricMetric) -> Result<MetricVelocity> {
    match mode {
        StepMode::Crf => Ok(crf_rhs(state)),
        StepMode::Dcrf => dcrf_rhs(state, g0),
    }
}

/// Rebuild a metric from squared profiles, rejecting any sign loss.
///
/// Pole nodes are closed with the regularity constraint a = |b'| instead of
/// the radial velocity. In the continuum the two agree identically (smooth
/// metrics keep |u| = 1 at a pole), but collocating the radial equation at
/// the pole node is linearly unstable: a compatibility defect e = |u| - 1
/// feeds k_sph ~ -2e/b^2 at the nearest interior nodes, which lifts b^2
/// there and grows e through the pole derivative row at a rate ~ 1/h^2.
/// Enforcing the constraint removes that mode without touching the order of
/// accuracy anywhere.
pub fn metric_from_sq(template: &SymmetricMetric, a_sq: &[f64], b_sq: &[f64]) -> Result<SymmetricMetric> {
    let n = template.grid.n_points;
    let mut a = vec![0.0; n];
    let mut b = vec![0.0; n];
    for i in 0..n {
        let (asq, bsq) = (a_sq[i], b_sq[i]);
        if !(asq.is_finite() && bsq.is_finite()) {
            return Err(Error::NonFinite {
                context: "evolved squared profiles",
            });
        }
        if asq <= 0.0 {
            return Err(Error::DegenerateMetric {
                detail: format!("a^2[{i}] = {asq:.6e} after a step"),
            });
        }
        if template.grid.is_pole(i) {
            // The velocity at a pole is an exact multiple of b^2 = 0, so any
            // nonzero value here is a logic error upstream, not evolution.
            debug_assert_eq!(bsq, 0.0);
            b[i] = 0.0;
        } else {
            if bsq <= 0.0 {
                return Err(Error::DegenerateMetric {
                    detail: format!("b^2[{i}] = {bsq:.6e} after a step"),
                });
            }
            b[i] = bsq.sqrt();
        }
        a[i] = asq.sqrt();
    }
    let poles = template.grid.pole_indices();
    if !poles.is_empty() {
        let db = template.grid.d1(&b, Parity::Odd);
        for i in poles {
            let slope = db[i].abs();
            if !(slope.is_finite() && slope > 0.0) {
                return Err(Error::DegenerateMetric {
                    detail: format!("pole slope |b'[{i}]| = {slope:.6e} after a step"),
                });
            }
            a[i] = slope;
        }
    }
    Ok(SymmetricMetric {
        grid: template.grid.clone(),
        m: template.m,
        kappa: template.kappa,
        a,
        b,
        scalar_target: template.scalar_target,
    })
}

/// One classical Runge-Kutta step of size dt (negative dt is allowed; the
/// stepper itself is time-symmetric in its arithmetic). The pressure field
/// is re-solved on every stage metric.
pub fn step(
    state: &FlowState,
    dt: f64,
    mode: StepMode,
    g0: &SymmetricMetric,
    elliptic_tol: f64,
) -> Result<FlowState> {
    let g = &state.metric;
    let a_sq0: Vec<f64> = g.a.iter().map(|&a| a * a).collect();
    let b_sq0: Vec<f64> = g.b.iter().map(|&b| b * b).collect();

    let advanced = |k: &MetricVelocity, frac: f64| -> (Vec<f64>, Vec<f64>) {
        let a: Vec<f64> = a_sq0
            .iter()
            .zip(&k.da_sq)
            .map(|(&y, &v)| y + frac * dt * v)
            .collect();
        let b: Vec<f64> = b_sq0
            .iter()
            .zip(&k.db_sq)
            .map(|(&y, &v)| y + frac * dt * v)
            .collect();
        (a, b)
    };
    let stage_state = |a_sq: &[f64], b_sq: &[f64], t: f64| -> Result<FlowState> {
        make_state(t, metric_from_sq(g, a_sq, b_sq)?, elliptic_tol)
    };

    let k1 = velocity_for(state, mode, g0)?;
    let (a2, b2) = advanced(&k1, 0.5);
    let s2 = stage_state(&a2, &b2, state.t + 0.5 * dt)?;
    let k2 = velocity_for(&s2, mode, g0)?;
    let (a3, b3) = advanced(&k2, 0.5);
    let s3 = stage_state(&a3, &b3, state.t + 0.5 * dt)?;
    let k3 = velocity_for(&s3, mode, g0)?;
    let (a4, b4) = advanced(&k3, 1.0);
    let s4 = stage_state(&a4, &b4, state.t + dt)?;
    let k4 = velocity_for(&s4, mode, g0)?;

    let n = a_sq0.len();
    let sixth = dt / 6.0;
    let mut a_sq = vec![0.0; n];
    let mut b_sq = vec![0.0; n];
    for i in 0..n {
        a_sq[i] = a_sq0[i]
            + sixth * (k1.da_sq[i] + 2.0 * k2.da_sq[i] + 2.0 * k3.da_sq[i] + k4.da_sq[i]);
        b_sq[i] = b_sq0[i]
            + sixth * (k1.db_sq[i] + 2.0 * k2.db_sq[i] + 2.0 * k3.db_sq[i] + k4.db_sq[i]);
    }
    make_state(state.t + dt, metric_from_sq(g, &a_sq, &b_sq)?, elliptic_tol)
}

fn classify_halt(err: Error, t_last_good: f64) -> HaltReason {
    match &err {
        Error::DegenerateMetric { .. } | Error::PositivityLoss { .. } | Error::NonFinite { .. } => {
            HaltReason::Degeneration {
                t: t_last_good,
                detail: err.to_string(),
            }
        }
        _ => HaltReason::SolverFailure {
            t: t_last_good,
            detail: err.to_string(),
        },
    }
}

/// Run a configured flow. Errors while preparing the initial state are
/// returned as errors; once stepping has begun, failures halt the run and
/// are reported on the trajectory together with the last coherent state.
pub fn run_flow(config: &FlowConfig) -> Result<Trajectory> {
    let mode = match config.mode {
        RunMode::Crf => StepMode::Crf,
        RunMode::Dcrf => StepMode::Dcrf,
        RunMode::BothCompare => {
            return Err(Error::Config {
                rule: "run-mode",
                message: "both-compare orchestrates two runs; drive the crf and dcrf legs \
                          separately"
                    .into(),
            })
        }
    };
    run_flow_with_mode(config, mode)
}

/// As `run_flow`, with the step mode chosen directly (the comparison driver
/// runs both legs off one configuration).
pub fn run_flow_with_mode(config: &FlowConfig, mode: StepMode) -> Result<Trajectory> {
    config.validate()?;
    let background = build_background(
        config.family,
        config.m,
        config.kappa,
        config.grid.extent,
        config.grid.n_points,
        config.c,
    )?;
    let mut initial = apply_perturbation(&background, &config.perturbation)?;
    if config.normalize {
        let (normalized, _w) = conformal_normalize(&initial, config.tolerances.newton)?;
        initial = normalized;
    }

    let ds = background.grid.spacing;
    let min_a_sq = initial
        .a
        .iter()
        .fold(f64::INFINITY, |acc, &a| acc.min(a * a));
    let dt_raw = config.time.cfl_sigma * ds * ds * min_a_sq;
    let interval = config.time.snapshot_interval;
    let n_sub = (interval / dt_raw).ceil().max(1.0) as usize;
    let dt = interval / n_sub as f64;
    let n_snap = (config.time.t_end / interval).round() as usize;

    let elliptic_tol = config.tolerances.elliptic;
    let mut current = make_state(0.0, initial, elliptic_tol)?;
    let mut snapshots = Vec::with_capacity(n_snap + 1);
    let mut w_fields: Option<Vec<Vec<f64>>> = match mode {
        StepMode::Dcrf => Some(Vec::with_capacity(n_snap + 1)),
        StepMode::Crf => None,
    };
    let push = |snapshots: &mut Vec<FlowState>,
                    w_fields: &mut Option<Vec<Vec<f64>>>,
                    state: &FlowState|
     -> Result<()> {
        if let Some(ws) = w_fields {
            ws.push(deturck_vector_field(&state.metric, &background)?);
        }
        snapshots.push(state.clone());
        Ok(())
    };
    push(&mut snapshots, &mut w_fields, &current)?;

    let mut halt = None;
    'run: for snap in 0..n_snap {
        for sub in 0..n_sub {
            // Reconstruct the target time additively so snapshot stamps are
            // reproducible across runs regardless of dt roundoff.
            let t_next = (snap as f64 + (sub + 1) as f64 / n_sub as f64) * interval;
            match step(&current, dt, mode, &background, elliptic_tol) {
                Ok(mut next) => {
                    next.t = t_next;
                    current = next;
                }
                Err(e) => {
                    halt = Some(classify_halt(e, current.t));
                    break 'run;
                }
            }
        }
        if current.t > snapshots.last().map(|s| s.t).unwrap_or(f64::NEG_INFINITY) {
            push(&mut snapshots, &mut w_fields, &current)?;
        }
    }
    if halt.is_some() && current.t > snapshots.last().map(|s| s.t).unwrap_or(f64::NEG_INFINITY) {
        // Keep the last coherent state so the halt can be inspected.
        push(&mut snapshots, &mut w_fields, &current)?;
    }

    Ok(Trajectory {
        snapshots,
        w_fields,
        halt,
        background,
        dt,
        mode,
        config: config.clone(),
    })
}
