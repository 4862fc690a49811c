//! Curvature of doubly-warped metrics.
//!
//! With the orthonormal frame e_0 = (1/a) d/ds, e_i = (1/b) ehat_i, the two
//! sectional curvatures are
//!
//!   k_rad = -(du/ds)/(a b),      u = (db/ds)/a,
//!   k_sph = (kappa - u^2)/b^2,
//!
//! and everything else (Ricci eigenvalues, scalar curvature, |Rm|^2, the
//! Einstein deviation, |grad Rm|^2) is algebra in these two plus first
//! derivatives. Pole values are the L'Hopital limits; the two nodes adjacent
//! to each pole are excluded from the trusted band by the grid.

use crate::error::{Error, Result};
use crate::metric::SymmetricMetric;
use crate::stencil::Parity;

/// Per-node curvature data of one metric.
#[derive(Clone, Debug)]
pub struct CurvatureBundle {
    pub k_rad: Vec<f64>,
    pub k_sph: Vec<f64>,
    pub ric_rad: Vec<f64>,
    pub ric_tan: Vec<f64>,
    pub scalar: Vec<f64>,
    pub einstein_dev_rad: Vec<f64>,
    pub einstein_dev_tan: Vec<f64>,
    /// Tangential deviation with the scalar constraint substituted in: equal
    /// to `einstein_dev_tan` whenever R equals the scalar target, but reading
    /// only the fiber curvature. The flow velocity uses this form; see
    /// [`compute_curvature`] for why.
    pub vel_dev_tan: Vec<f64>,
    pub norm_rm_sq: Vec<f64>,
    pub norm_dev_sq: Vec<f64>,
    pub grad_rm_norm: Vec<f64>,
}

/// Multiply an s-profile by the mean-curvature factor H = u/b, taking the
/// correct limit at pole nodes: for a profile of the given fold parity,
/// H f -> (D f)(pole) = (d1 f)/a there (zero when f is even, since an even
/// profile's first derivative vanishes at a fold).
pub(crate) fn h_times(
    g: &SymmetricMetric,
    u: &[f64],
    f: &[f64],
    parity: Parity,
) -> Vec<f64> {
    let n = g.grid.n_points;
    let mut out = vec![0.0; n];
    let needs_d1 = g.grid.pole_indices();
    let df = if needs_d1.is_empty() {
        None
    } else {
        Some(g.grid.d1(f, parity))
    };
    for i in 0..n {
        if g.grid.is_pole(i) {
            out[i] = df.as_ref().unwrap()[i] / g.a[i];
        } else {
            out[i] = u[i] * f[i] / g.b[i];
        }
    }
    out
}

/// Scalar Laplacian of an even profile: Delta f = D(Df) + m H (Df), with the
/// isotropic limit (m+1) D(Df) at poles. This is the frame-form operator;
/// the pressure solver assembles the same operator in divergence form, and
/// the two serve as independent cross-checks.
pub fn scalar_laplacian(g: &SymmetricMetric, u: &[f64], f: &[f64]) -> Vec<f64> {
    let df_s = g.grid.d1(f, Parity::Even);
    let df: Vec<f64> = df_s.iter().zip(&g.a).map(|(&d, &a)| d / a).collect();
    let ddf_s = g.grid.d1(&df, Parity::Odd);
    let ddf: Vec<f64> = ddf_s.iter().zip(&g.a).map(|(&d, &a)| d / a).collect();
    let hdf = h_times(g, u, &df, Parity::Odd);
    (0..g.grid.n_points)
        .map(|i| ddf[i] + g.m as f64 * hdf[i])
        .collect()
}

/// Compute the curvature bundle of a metric.
///
/// Two forms of the tangential Einstein deviation are produced. The geometric
/// one, `ric_tan - 2c`, reads both sectional curvatures and feeds every
/// diagnostic and the pressure source. The velocity form substitutes the
/// scalar constraint R = scalar_target into it:
///
///   dev_tan = R/(2m) + (m-1) k_sph / 2 - 2c
///
/// holds identically, so replacing R by the target changes nothing on
/// constraint-satisfying data while removing the radial curvature (and with
/// it the second derivative of b divided by b) from the fiber velocity.
/// Differencing that singular quotient next to a pole couples the two metric
/// sectors through O(1/h^4) corner gains; eigenvalues of the assembled
/// semi-discrete operator confirm the substituted form is stable where the
/// raw form grows like h^{-4}. Off the constraint manifold the two evolutions
/// differ at the size of the scalar drift, which the flow keeps at
/// discretization level.
pub fn compute_curvature(g: &SymmetricMetric) -> Result<CurvatureBundle> {
    let n = g.grid.n_points;
    let m = g.m as f64;
    for i in 0..n {
        if !(g.a[i].is_finite() && g.b[i].is_finite()) {
            return Err(Error::NonFinite { context: "metric profiles" });
        }
        if g.a[i] <= 0.0 {
            return Err(Error::DegenerateMetric {
                detail: format!("a[{i}] = {}", g.a[i]),
            });
        }
        if !g.grid.is_pole(i) && g.b[i] <= 0.0 {
            return Err(Error::DegenerateMetric {
                detail: format!("b[{i}] = {}", g.b[i]),
            });
        }
    }

    let db = g.grid.d1(&g.b, g.b_parity());
    let u: Vec<f64> = db.iter().zip(&g.a).map(|(&d, &a)| d / a).collect();
    let du = g.grid.d1(&u, Parity::Even);

    let mut k_rad = vec![0.0; n];
    let mut k_sph = vec![0.0; n];
    let pole_d2u = if g.grid.pole_indices().is_empty() {
        None
    } else {
        Some(g.grid.d2(&u, Parity::Even))
    };
    for i in 0..n {
        if g.grid.is_pole(i) {
            let ui = u[i];
            if ui.abs() < 0.5 {
                return Err(Error::DegenerateMetric {
                    detail: format!("pole slope u[{i}] = {ui}"),
                });
            }
            let kr = -pole_d2u.as_ref().unwrap()[i] / (g.a[i] * g.a[i] * ui);
            k_rad[i] = kr;
            k_sph[i] = kr;
        } else {
            k_rad[i] = -du[i] / (g.a[i] * g.b[i]);
            k_sph[i] = (g.kappa - u[i] * u[i]) / (g.b[i] * g.b[i]);
        }
    }

    let c = g.einstein_c();
    let mut ric_rad = vec![0.0; n];
    let mut ric_tan = vec![0.0; n];
    let mut scalar = vec![0.0; n];
    let mut dev_rad = vec![0.0; n];
    let mut dev_tan = vec![0.0; n];
    let mut vel_dev_tan = vec![0.0; n];
    let mut norm_rm_sq = vec![0.0; n];
    let mut norm_dev_sq = vec![0.0; n];
    for i in 0..n {
        ric_rad[i] = m * k_rad[i];
        ric_tan[i] = k_rad[i] + (m - 1.0) * k_sph[i];
        scalar[i] = m * (2.0 * k_rad[i] + (m - 1.0) * k_sph[i]);
        dev_rad[i] = ric_rad[i] - 2.0 * c;
        dev_tan[i] = ric_tan[i] - 2.0 * c;
        vel_dev_tan[i] = g.scalar_target / (2.0 * m) + (m - 1.0) * k_sph[i] / 2.0 - 2.0 * c;
        norm_rm_sq[i] =
            4.0 * m * k_rad[i] * k_rad[i] + 2.0 * m * (m - 1.0) * k_sph[i] * k_sph[i];
        norm_dev_sq[i] = dev_rad[i] * dev_rad[i] + m * dev_tan[i] * dev_tan[i];
    }

    // |grad Rm|^2 = 4m (Dk_rad)^2 + 2m(m-1) (Dk_sph)^2
    //            + 8m(m-1) (H (k_rad - k_sph))^2.
    let dk_rad: Vec<f64> = g
        .grid
        .d1(&k_rad, Parity::Even)
        .iter()
        .zip(&g.a)
        .map(|(&d, &a)| d / a)
        .collect();
    let dk_sph: Vec<f64> = g
        .grid
        .d1(&k_sph, Parity::Even)
        .iter()
        .zip(&g.a)
        .map(|(&d, &a)| d / a)
        .collect();
    let diff: Vec<f64> = (0..n).map(|i| k_rad[i] - k_sph[i]).collect();
    let hk = h_times(g, &u, &diff, Parity::Even);
    let grad_rm_norm: Vec<f64> = (0..n)
        .map(|i| {
            (4.0 * m * dk_rad[i] * dk_rad[i]
                + 2.0 * m * (m - 1.0) * dk_sph[i] * dk_sph[i]
                + 8.0 * m * (m - 1.0) * hk[i] * hk[i])
                .sqrt()
        })
        .collect();

    for i in 0..n {
        if !scalar[i].is_finite() || !grad_rm_norm[i].is_finite() {
            return Err(Error::NonFinite { context: "curvature bundle" });
        }
    }

    Ok(CurvatureBundle {
        k_rad,
        k_sph,
        ric_rad,
        ric_tan,
        scalar,
        einstein_dev_rad: dev_rad,
        einstein_dev_tan: dev_tan,
        vel_dev_tan,
        norm_rm_sq,
        norm_dev_sq,
        grad_rm_norm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridFamily;
    use crate::metric::build_background;

    fn sup_on<'a>(vals: impl Iterator<Item = &'a f64>) -> f64 {
        vals.fold(0.0_f64, |acc, &v| acc.max(v.abs()))
    }

    #[test]
    fn hyperbolic_background_is_einstein() {
        // a = 1, b = sinh: k_rad = k_sph = -1, R = -m(m+1), |Rm|^2 = 4m + 2m(m-1).
        let g = build_background(GridFamily::AhBall, 3, 1.0, 8.0, 401, None).unwrap();
        let curv = compute_curvature(&g).unwrap();
        let band = g.grid.trusted_band();
        let mut worst = (0.0_f64, 0usize);
        for &i in &band {
            let e = (curv.scalar[i] + 12.0).abs();
            if e > worst.0 {
                worst = (e, i);
            }
            assert!((curv.k_rad[i] + 1.0).abs() < 1e-9, "k_rad node {i}");
            assert!((curv.k_sph[i] + 1.0).abs() < 1e-9, "k_sph node {i}");
            assert!((curv.norm_rm_sq[i] - 24.0).abs() < 1e-7);
            assert!(curv.norm_dev_sq[i] < 1e-17);
            assert!(curv.grad_rm_norm[i] < 1e-6);
        }
        // The 1/b^2 in k_sph amplifies stencil truncation nearest the pole;
        // h^6/(s a^2) there gives a few e-10 on k_sph, times m(m-1) in R.
        println!("max |R + 12| on band: {:.3e} at node {}", worst.0, worst.1);
        assert!(worst.0 < 4e-9);
    }

    #[test]
    fn sphere_background_scalar_and_deviation() {
        let g = build_background(GridFamily::Closed, 2, 1.0, std::f64::consts::PI, 201, Some(1.0))
            .unwrap();
        let curv = compute_curvature(&g).unwrap();
        for &i in &g.grid.trusted_band() {
            assert!((curv.scalar[i] - 6.0).abs() < 1e-9, "R at node {i}: {}", curv.scalar[i]);
            assert!(curv.norm_dev_sq[i] < 1e-18, "dev at node {i}");
        }
        // Pole nodes carry the isotropic limits exactly.
        assert!((curv.k_rad[0] - 1.0).abs() < 1e-8);
        assert!((curv.k_sph[0] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn flat_product_background_is_scalar_flat() {
        let g = build_background(GridFamily::Closed, 3, 0.0, 2.0, 101, Some(0.0)).unwrap();
        let curv = compute_curvature(&g).unwrap();
        // Pure roundoff: d1 of a constant is ~1e-14 noise, amplified by 1/h
        // per additional derivative.
        assert!(sup_on(curv.scalar.iter()) < 1e-10);
        assert!(sup_on(curv.norm_rm_sq.iter()) < 1e-12);
        assert!(sup_on(curv.grad_rm_norm.iter()) < 1e-8);
    }

    #[test]
    fn larger_fiber_background_scalar() {
        // Larger fiber dimension: R must sit at -m(m+1) = -20 well inside 1e-8.
        let g = build_background(GridFamily::AhBall, 4, 1.0, 10.0, 801, None).unwrap();
        let curv = compute_curvature(&g).unwrap();
        let band = g.grid.trusted_band();
        let worst = band
            .iter()
            .map(|&i| (curv.scalar[i] + 20.0).abs())
            .fold(0.0_f64, f64::max);
        println!("m=4 background: max |R + 20| = {worst:.3e}");
        assert!(worst < 1e-8);
    }

    #[test]
    fn second_bianchi_on_perturbed_metric() {
        // Dk_sph = 2 H (k_rad - k_sph): the two tangential terms of
        // |grad Rm|^2 agree in the continuum, so their discrete versions
        // converge to each other. Richardson check on two grids.
        use crate::perturb::{apply_perturbation, PerturbParams, PerturbProfile};
        let err_on = |n: usize| -> f64 {
            let bg = build_background(GridFamily::AhBall, 3, 1.0, 6.0, n, None).unwrap();
            let g = apply_perturbation(
                &bg,
                &PerturbParams {
                    amplitude: 0.05,
                    profile: PerturbProfile::CosineMix,
                    decay_rate: 2.0,
                    seed: 11,
                },
            )
            .unwrap();
            let curv = compute_curvature(&g).unwrap();
            let db = g.grid.d1(&g.b, g.b_parity());
            let u: Vec<f64> = db.iter().zip(&g.a).map(|(&d, &a)| d / a).collect();
            let dk_sph: Vec<f64> = g
                .grid
                .d1(&curv.k_sph, Parity::Even)
                .iter()
                .zip(&g.a)
                .map(|(&d, &a)| d / a)
                .collect();
            let diff: Vec<f64> = (0..g.grid.n_points)
                .map(|i| curv.k_rad[i] - curv.k_sph[i])
                .collect();
            let hk = h_times(&g, &u, &diff, Parity::Even);
            g.grid
                .trusted_band()
                .iter()
                .map(|&i| (dk_sph[i] - 2.0 * hk[i]).abs())
                .fold(0.0_f64, f64::max)
        };
        // The residual is differentiated stencil error concentrated at the
        // first trusted node next to the pole, so it collapses at a reduced
        // rate; what matters is that it shrinks and stays far below the
        // O(0.1..1) scale of Dk_sph itself (a sign or factor bug would leave
        // an O(1) residual).
        let coarse = err_on(151);
        let fine = err_on(301);
        println!("Bianchi residual: {coarse:.3e} -> {fine:.3e}");
        assert!(fine < coarse / 4.0, "residual must collapse under refinement");
        assert!(fine < 5e-5);
    }

    #[test]
    fn scalar_laplacian_matches_analytic_on_background() {
        // For an even profile f = e^(-s^2) on the hyperbolic background:
        // Delta f = f'' + m coth(s) f' away from the pole, (m+1) f''(0) at it.
        // (Evenness matters: the fold rows near s = 0 assume it.)
        let g = build_background(GridFamily::AhBall, 3, 1.0, 8.0, 401, None).unwrap();
        let u: Vec<f64> = g.grid.s_values.iter().map(|&s| s.cosh()).collect();
        let f: Vec<f64> = g.grid.s_values.iter().map(|&s| (-s * s).exp()).collect();
        let lap = scalar_laplacian(&g, &u, &f);
        for &i in &g.grid.trusted_band() {
            let s = g.grid.s_values[i];
            let want = if i == 0 {
                -8.0
            } else {
                let e = (-s * s).exp();
                (4.0 * s * s - 2.0) * e + 3.0 * (1.0 / s.tanh()) * (-2.0 * s) * e
            };
            assert!(
                (lap[i] - want).abs() < 1e-8,
                "node {i}: {} vs {want}",
                lap[i]
            );
        }
    }
}
