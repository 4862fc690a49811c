use crflow_core::*;

fn main() {
    let n: usize = std::env::args().nth(1).unwrap().parse().unwrap();
    let g0 = build_background(crflow_core::GridFamily::AhBall, 3, 1.0, 8.0, n, None).unwrap();
    let params = PerturbParams {
        amplitude: 0.02,
        profile: PerturbProfile::CosineMix,
        decay_rate: 2.0,
        seed: 42,
    };
    let g = apply_perturbation(&g0, &params).unwrap();
    let curv = compute_curvature(&g).unwrap();
    let band = g.grid.trusted_band();
    let dev_raw = band.iter().fold(0.0_f64, |m, &i| m.max(curv.norm_dev_sq[i].sqrt()));
    let a_diff = band.iter().fold(0.0_f64, |m, &i| m.max((g.a[i] - g0.a[i]).abs()));
    let (gn, w) = conformal_normalize(&g, 1e-12).unwrap();
    let curvn = compute_curvature(&gn).unwrap();
    let dev_n = band.iter().fold(0.0_f64, |m, &i| m.max(curvn.norm_dev_sq[i].sqrt()));
    let r_n = band.iter().fold(0.0_f64, |m, &i| m.max((curvn.scalar[i] - gn.scalar_target).abs()));
    let w_span = w.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    println!("N={n}: raw |dev|={dev_raw:.3e} a-diff={a_diff:.3e}  normalized |dev|={dev_n:.3e} |R-Rt|={r_n:.3e} w in [{:.6},{:.6}]", w_span.0, w_span.1);
}
