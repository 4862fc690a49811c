//! Second fundamental form of the constant-s slices in the compactified
//! picture.
//!
//! With x = e^(-s) as boundary-defining function, the compactified metric has
//! radial component a^2 and tangential component bbar^2 = x^2 b^2. The slices
//! are totally geodesic at the boundary exactly when the x-derivatives of
//! both components vanish as x -> 0; the per-slice quantity reported here is
//! half the larger of the two logarithmic x-derivatives, and its linear-in-x
//! extrapolation to x = 0 is the boundary verdict.

use crate::error::{Error, Result};
use crate::grid::GridFamily;
use crate::metric::SymmetricMetric;
use crate::norms::linfit;
use crate::stencil::Parity;

#[derive(Clone, Debug)]
pub struct TTensorReport {
    pub t_sup_per_slice: Vec<f64>,
    pub boundary_limit: f64,
    pub totally_geodesic: bool,
}

/// Default verdict tolerance: a comfortable multiple of the scheme's own
/// second-order error floor.
pub fn default_t_tolerance(spacing: f64) -> f64 {
    10.0 * spacing * spacing
}

/// Build the slice report for an asymptotically hyperbolic metric. `tol`
/// defaults to 10 h^2 when not given.
pub fn t_tensor_report(g: &SymmetricMetric, tol: Option<f64>) -> Result<TTensorReport> {
    if g.grid.family != GridFamily::AhBall {
        return Err(Error::NotApplicable {
            detail: "slice geometry at the conformal boundary needs the AH family".into(),
        });
    }
    let n = g.grid.n_points;
    let db = g.grid.d1(&g.b, g.b_parity());
    let da = g.grid.d1(&g.a, Parity::Even);

    let mut t_sup = vec![0.0; n];
    for i in 0..n {
        let s = g.grid.s_values[i];
        // d/dx = -e^s d/ds, so d(a^2)/dx = -2 e^s a a' and
        // d(bbar^2)/dx = 2 e^(-s) b (b - b').
        let tau_a = (2.0 * s.exp() * g.a[i] * da[i]).abs() / (g.a[i] * g.a[i]);
        let tau_b = if g.grid.is_pole(i) {
            // The slice through the pole is a point; no shape operator there.
            0.0
        } else {
            let bbar_sq = (-2.0 * s).exp() * g.b[i] * g.b[i];
            (2.0 * (-s).exp() * g.b[i] * (g.b[i] - db[i])).abs() / bbar_sq
        };
        t_sup[i] = 0.5 * tau_a.max(tau_b);
    }

    // Linear fit in x over the outer window [s_max - 2, s_max - 1],
    // extrapolated to the boundary x = 0.
    let lo = g.grid.s_max() - 2.0;
    let hi = g.grid.s_max() - 1.0;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for i in 0..n {
        let s = g.grid.s_values[i];
        if s >= lo - 1e-12 && s <= hi + 1e-12 {
            xs.push((-s).exp());
            ys.push(t_sup[i]);
        }
    }
    if xs.len() < 8 {
        return Err(Error::FitUndefined {
            detail: format!("only {} slices in the boundary window", xs.len()),
        });
    }
    let (boundary_limit, _) = linfit(&xs, &ys);
    let tol = tol.unwrap_or_else(|| default_t_tolerance(g.grid.spacing));
    Ok(TTensorReport {
        t_sup_per_slice: t_sup,
        boundary_limit,
        totally_geodesic: boundary_limit.abs() <= tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::build_background;
    use crate::perturb::{apply_perturbation, PerturbParams, PerturbProfile};

    #[test]
    fn hyperbolic_background_is_totally_geodesic() {
        let g = build_background(GridFamily::AhBall, 3, 1.0, 8.0, 401, None).unwrap();
        let rep = t_tensor_report(&g, None).unwrap();
        // Analytically t_sup = 1/sinh(s) -> 2x: linear through zero.
        assert!(rep.totally_geodesic, "limit {:.3e}", rep.boundary_limit);
        assert!(rep.boundary_limit.abs() < 1e-5);
        let i = 350;
        let s = g.grid.s_values[i];
        assert!(
            (rep.t_sup_per_slice[i] - 1.0 / s.sinh()).abs() < 1e-6,
            "slice value {} vs {}",
            rep.t_sup_per_slice[i],
            1.0 / s.sinh()
        );
    }

    #[test]
    fn slow_decay_perturbation_breaks_the_verdict() {
        let bg = build_background(GridFamily::AhBall, 3, 1.0, 8.0, 401, None).unwrap();
        let g = apply_perturbation(
            &bg,
            &PerturbParams {
                amplitude: 0.02,
                profile: PerturbProfile::Pure,
                decay_rate: 1.0,
                seed: 1,
            },
        )
        .unwrap();
        let rep = t_tensor_report(&g, None).unwrap();
        assert!(
            !rep.totally_geodesic,
            "O(x) tail must leave a finite limit, got {:.3e}",
            rep.boundary_limit
        );
    }

    #[test]
    fn fast_decay_perturbation_keeps_the_verdict() {
        let bg = build_background(GridFamily::AhBall, 3, 1.0, 8.0, 401, None).unwrap();
        let g = apply_perturbation(
            &bg,
            &PerturbParams {
                amplitude: 0.02,
                profile: PerturbProfile::Pure,
                decay_rate: 2.0,
                seed: 1,
            },
        )
        .unwrap();
        let rep = t_tensor_report(&g, None).unwrap();
        assert!(
            rep.totally_geodesic,
            "O(x^2) tail vanishes at the boundary, got {:.3e}",
            rep.boundary_limit
        );
    }

    #[test]
    fn closed_family_is_rejected() {
        let g = build_background(GridFamily::Closed, 2, 1.0, std::f64::consts::PI, 101, Some(1.0))
            .unwrap();
        assert!(matches!(
            t_tensor_report(&g, None),
            Err(Error::NotApplicable { .. })
        ));
    }
}
