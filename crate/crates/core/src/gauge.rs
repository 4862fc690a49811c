//! Reconstruction of the ungauged flow from a gauge-fixed run.
//!
//! A DCRF trajectory evolves h(t) by the bare velocity plus L_W h and stores
//! the field W at every snapshot. If phi(t) is the family of radial
//! diffeomorphisms generated by
//!
//!   d phi / dt = -W(phi(t), t),     phi(0) = id,
//!
//! then g(t) = phi(t)^* h(t) satisfies d/dt g = phi^*(dh/dt + L_{-W} h)
//! = phi^*(bare velocity), and since the bare velocity is built from
//! curvature and the metric-determined pressure it commutes with pull-back:
//! g(t) solves the ungauged flow. The sign is fixed by which side of the
//! equation carries the Lie term; `dcrf_rhs` adds +L_W, so the generator
//! here is -W.
//!
//! Everything stays inside the symmetric class: phi acts on the radial
//! coordinate only, so the pull-back of a^2 ds^2 + b^2 ghat is
//! a(phi)^2 phi'^2 ds^2 + b(phi)^2 ghat.

use crate::curvature::compute_curvature;
use crate::error::{Error, Result};
use crate::flow::{make_state, FlowState, StepMode, Trajectory};
use crate::metric::SymmetricMetric;
use crate::norms::{interp_cubic, interp_linear, sup_abs_on};
use crate::stencil::Parity;

/// Per-snapshot agreement of the scalar invariants of two trajectories.
#[derive(Clone, Debug)]
pub struct GaugeAgreementRow {
    pub t: f64,
    /// sup over the trusted band of |R_left - R_right|.
    pub r_discrepancy: f64,
    /// sup over the trusted band of | |Rm|^2_left - |Rm|^2_right |.
    pub rm_sq_discrepancy: f64,
}

/// Pull a DCRF trajectory back through the diffeomorphisms generated by its
/// stored DeTurck field, reconstructing the ungauged run.
///
/// The displacement delta = phi - id is integrated per node with one
/// classical Runge-Kutta step per snapshot interval, evaluating W by linear
/// interpolation in s and in t. Profiles of h are read at phi(s) by cubic
/// interpolation; evaluation beyond the last node is clamped to it, which
/// can only affect nodes inside the truncation layer that every diagnostic
/// band already excludes. Pressure is re-solved on the reconstructed metric
/// rather than interpolated, so the returned states carry derivative fields
/// of the same quality as a direct run.
///
/// Errors with `GaugeBreakdown` if phi stops being strictly monotone, which
/// is the discrete signature of the gauge orbit leaving the chart.
pub fn gauge_pullback(traj: &Trajectory, g0: &SymmetricMetric) -> Result<Trajectory> {
    let w_fields = match (&traj.mode, &traj.w_fields) {
        (StepMode::Dcrf, Some(w)) => w,
        _ => {
            return Err(Error::NotApplicable {
                detail: "gauge pull-back needs a DCRF trajectory with stored W fields".into(),
            })
        }
    };
    let template = &traj.background;
    if g0.grid.n_points != template.grid.n_points
        || g0.grid.family != template.grid.family
        || g0.m != template.m
    {
        return Err(Error::GridMismatch);
    }
    let grid = &template.grid;
    let n = grid.n_points;
    let s = &grid.s_values;
    let s0 = s[0];
    let h = grid.spacing;
    let elliptic_tol = traj.config.tolerances.elliptic;

    let w_at = |field: &[f64], x: f64| -> f64 { interp_linear(s0, h, field, x) };

    let mut delta = vec![0.0_f64; n];
    let mut out_states: Vec<FlowState> = Vec::with_capacity(traj.snapshots.len());

    for (k, snap) in traj.snapshots.iter().enumerate() {
        if k > 0 {
            let prev = &traj.snapshots[k - 1];
            let dt = snap.t - prev.t;
            let (w_a, w_b) = (&w_fields[k - 1], &w_fields[k]);
            // One RK4 step of d delta/dt = -W(s + delta, t) across the
            // interval, with W linear in t between the bracketing snapshots.
            for i in 0..n {
                let x = s[i];
                let eval = |d: f64, theta: f64| -> f64 {
                    let wa = w_at(w_a, x + d);
                    let wb = w_at(w_b, x + d);
                    -((1.0 - theta) * wa + theta * wb)
                };
                let k1 = eval(delta[i], 0.0);
                let k2 = eval(delta[i] + 0.5 * dt * k1, 0.5);
                let k3 = eval(delta[i] + 0.5 * dt * k2, 0.5);
                let k4 = eval(delta[i] + dt * k3, 1.0);
                delta[i] += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            }
        }

        // phi = id + delta must stay strictly monotone for the pull-back to
        // be a diffeomorphism; its derivative enters the radial profile.
        let dphi: Vec<f64> = grid
            .d1(&delta, Parity::Odd)
            .iter()
            .map(|&d| 1.0 + d)
            .collect();
        for i in 0..n {
            if !(dphi[i].is_finite() && dphi[i] > 0.0) {
                return Err(Error::GaugeBreakdown {
                    detail: format!(
                        "phi' = {:.6e} at node {i}, t = {:.6}",
                        dphi[i], snap.t
                    ),
                });
            }
            if i > 0 && s[i] + delta[i] <= s[i - 1] + delta[i - 1] {
                return Err(Error::GaugeBreakdown {
                    detail: format!("phi not increasing between nodes {} and {i}", i - 1),
                });
            }
        }

        let gh = &snap.metric;
        let mut a = vec![0.0; n];
        let mut b = vec![0.0; n];
        for i in 0..n {
            let phi = s[i] + delta[i];
            if grid.is_pole(i) {
                // W vanishes at poles, so delta is exactly zero there and the
                // pole values transport unchanged apart from the lapse factor.
                a[i] = gh.a[i] * dphi[i];
                b[i] = 0.0;
            } else {
                a[i] = interp_cubic(s0, h, &gh.a, phi) * dphi[i];
                b[i] = interp_cubic(s0, h, &gh.b, phi);
            }
        }
        let metric = SymmetricMetric {
            grid: grid.clone(),
            m: template.m,
            kappa: template.kappa,
            a,
            b,
            scalar_target: template.scalar_target,
        };
        out_states.push(make_state(snap.t, metric, elliptic_tol)?);
    }

    Ok(Trajectory {
        snapshots: out_states,
        w_fields: None,
        halt: traj.halt.clone(),
        background: g0.clone(),
        dt: traj.dt,
        mode: StepMode::Crf,
        config: traj.config.clone(),
    })
}

/// Compare the scalar invariants of two trajectories snapshot by snapshot.
/// Both must live on the same grid and share snapshot times; the comparison
/// runs over the common prefix so a halted leg can still be inspected.
pub fn compare_scalar_invariants(
    left: &Trajectory,
    right: &Trajectory,
) -> Result<Vec<GaugeAgreementRow>> {
    let gl = &left.background.grid;
    let gr = &right.background.grid;
    if gl.n_points != gr.n_points || gl.family != gr.family || gl.spacing != gr.spacing {
        return Err(Error::GridMismatch);
    }
    let band = gl.trusted_band();
    let len = left.snapshots.len().min(right.snapshots.len());
    let mut rows = Vec::with_capacity(len);
    for k in 0..len {
        let (a, b) = (&left.snapshots[k], &right.snapshots[k]);
        if (a.t - b.t).abs() > 1e-10 {
            return Err(Error::Config {
                rule: "gauge-compare",
                message: format!("snapshot times diverge at index {k}: {} vs {}", a.t, b.t),
            });
        }
        let dr: Vec<f64> = a
            .curv
            .scalar
            .iter()
            .zip(&b.curv.scalar)
            .map(|(&x, &y)| x - y)
            .collect();
        let drm: Vec<f64> = a
            .curv
            .norm_rm_sq
            .iter()
            .zip(&b.curv.norm_rm_sq)
            .map(|(&x, &y)| x - y)
            .collect();
        rows.push(GaugeAgreementRow {
            t: a.t,
            r_discrepancy: sup_abs_on(&band, &dr),
            rm_sq_discrepancy: sup_abs_on(&band, &drm),
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{FlowConfig, GridSpec, TimeSpec};
    use crate::flow::{run_flow_with_mode, StepMode};
    use crate::perturb::{PerturbParams, PerturbProfile};

    fn perturbed_cfg(n_points: usize, t_end: f64) -> FlowConfig {
        let mut cfg = FlowConfig::ah_default();
        cfg.grid = GridSpec {
            extent: 6.0,
            n_points,
        };
        cfg.time = TimeSpec {
            t_end,
            cfl_sigma: 0.2,
            snapshot_interval: t_end / 4.0,
        };
        cfg.normalize = false;
        cfg.perturbation = PerturbParams {
            amplitude: 0.02,
            profile: PerturbProfile::CosineMix,
            decay_rate: 2.0,
            seed: 21,
        };
        cfg
    }

    #[test]
    fn pullback_of_reference_run_is_identity() {
        // Unperturbed background: W stays at the drift floor, so phi barely
        // moves and the reconstruction must reproduce the run itself.
        let mut cfg = perturbed_cfg(201, 0.02);
        cfg.perturbation = PerturbParams {
            amplitude: 0.0,
            profile: PerturbProfile::None,
            decay_rate: 2.0,
            seed: 0,
        };
        let traj = run_flow_with_mode(&cfg, StepMode::Dcrf).unwrap();
        assert!(traj.halt.is_none());
        let back = gauge_pullback(&traj, &traj.background.clone()).unwrap();
        for (orig, rec) in traj.snapshots.iter().zip(&back.snapshots) {
            for i in 0..201 {
                assert!((orig.metric.a[i] - rec.metric.a[i]).abs() < 1e-7);
                assert!((orig.metric.b[i] - rec.metric.b[i]).abs() < 1e-7 * orig.metric.b[i].max(1.0));
            }
        }
    }

    #[test]
    fn pullback_reconstructs_the_direct_run() {
        // The two legs share initial data; the DCRF leg moves by an O(1e-2)
        // gauge motion on top of the physical evolution. Pulling it back must
        // cancel that motion: the reconstructed scalar profiles land close to
        // the direct CRF leg, far below the raw gauge discrepancy. This is
        // also the sign test for the generator: the wrong sign doubles the
        // gauge motion instead of cancelling it.
        let cfg = perturbed_cfg(201, 0.02);
        let dcrf = run_flow_with_mode(&cfg, StepMode::Dcrf).unwrap();
        let crf = run_flow_with_mode(&cfg, StepMode::Crf).unwrap();
        assert!(dcrf.halt.is_none() && crf.halt.is_none());

        let raw = compare_scalar_invariants(&dcrf, &crf).unwrap();
        let back = gauge_pullback(&dcrf, &dcrf.background.clone()).unwrap();
        let rec = compare_scalar_invariants(&back, &crf).unwrap();

        let raw_last = raw.last().unwrap();
        let rec_last = rec.last().unwrap();
        println!(
            "gauge discrepancy at t = {:.3}: raw {:.3e} -> pulled back {:.3e}",
            raw_last.t, raw_last.r_discrepancy, rec_last.r_discrepancy
        );
        assert!(raw_last.r_discrepancy > 1e-5, "gauge motion too small to test");
        assert!(
            rec_last.r_discrepancy < 0.25 * raw_last.r_discrepancy,
            "pull-back failed to cancel the gauge motion: {:.3e} vs raw {:.3e}",
            rec_last.r_discrepancy,
            raw_last.r_discrepancy
        );
        assert!(rec_last.rm_sq_discrepancy < 0.25 * raw_last.rm_sq_discrepancy);
    }

    #[test]
    fn scalar_curvature_is_invariant_through_the_map() {
        // R is a scalar: the reconstructed profile at s must match the DCRF
        // profile evaluated at phi(s) to interpolation accuracy. Checked
        // against cubic interpolation of R_h rather than against the direct
        // run, isolating the pull-back map itself.
        let cfg = perturbed_cfg(201, 0.02);
        let dcrf = run_flow_with_mode(&cfg, StepMode::Dcrf).unwrap();
        let back = gauge_pullback(&dcrf, &dcrf.background.clone()).unwrap();
        let grid = &dcrf.background.grid;
        let band = grid.trusted_band();
        let last = dcrf.snapshots.len() - 1;
        // Recover phi from the b-profiles: b_rec(s) = b_h(phi(s)) and b_h is
        // strictly monotone on the AH ball, so phi = b_h^{-1}(b_rec); rather
        // than inverting, evaluate R_h at phi via the same interpolation the
        // map used internally and compare through delta reconstructed from
        // the two a-profiles. Simplest faithful check: re-integrate delta.
        let w = dcrf.w_fields.as_ref().unwrap();
        let s = &grid.s_values;
        let mut delta = vec![0.0; grid.n_points];
        for k in 1..=last {
            let dt = dcrf.snapshots[k].t - dcrf.snapshots[k - 1].t;
            for i in 0..grid.n_points {
                let eval = |d: f64, theta: f64| -> f64 {
                    let wa = interp_linear(s[0], grid.spacing, &w[k - 1], s[i] + d);
                    let wb = interp_linear(s[0], grid.spacing, &w[k], s[i] + d);
                    -((1.0 - theta) * wa + theta * wb)
                };
                let k1 = eval(delta[i], 0.0);
                let k2 = eval(delta[i] + 0.5 * dt * k1, 0.5);
                let k3 = eval(delta[i] + 0.5 * dt * k2, 0.5);
                let k4 = eval(delta[i] + dt * k3, 1.0);
                delta[i] += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            }
        }
        let r_h = &dcrf.snapshots[last].curv.scalar;
        let r_rec = &back.snapshots[last].curv.scalar;
        let mut worst = 0.0_f64;
        for &i in &band {
            let expect = interp_cubic(s[0], grid.spacing, r_h, s[i] + delta[i]);
            worst = worst.max((r_rec[i] - expect).abs());
        }
        println!("pull-back scalar transport error: {worst:.3e}");
        assert!(worst < 5e-4, "worst {worst:.3e}");
    }

    #[test]
    fn non_monotone_map_is_detected() {
        let cfg = perturbed_cfg(101, 0.02);
        let mut traj = run_flow_with_mode(&cfg, StepMode::Dcrf).unwrap();
        // Overwrite the stored fields with an artificial steep profile whose
        // integrated displacement folds the coordinate over.
        let s = traj.background.grid.s_values.clone();
        let steep: Vec<f64> = s.iter().map(|&x| 80.0 * (x - 3.0).tanh()).collect();
        if let Some(w) = traj.w_fields.as_mut() {
            for field in w.iter_mut() {
                field.copy_from_slice(&steep);
            }
        }
        let err = gauge_pullback(&traj, &traj.background.clone()).unwrap_err();
        assert!(matches!(err, Error::GaugeBreakdown { .. }), "got {err:?}");
    }

    #[test]
    fn pullback_requires_a_dcrf_trajectory() {
        let cfg = perturbed_cfg(101, 0.01);
        let crf = run_flow_with_mode(&cfg, StepMode::Crf).unwrap();
        let err = gauge_pullback(&crf, &crf.background.clone()).unwrap_err();
        assert!(matches!(err, Error::NotApplicable { .. }));
    }
}
