//! Weighted norms, decay-rate fits, and small interpolation helpers shared by
//! the diagnostics and gauge layers.

use crate::error::{Error, Result};
use crate::grid::{GridFamily, RadialGrid};

/// Supremum of |f| over all nodes.
pub fn sup_abs(f: &[f64]) -> f64 {
    f.iter().fold(0.0_f64, |acc, &v| acc.max(v.abs()))
}

/// Supremum of |f| over a set of node indices.
pub fn sup_abs_on(band: &[usize], f: &[f64]) -> f64 {
    band.iter().fold(0.0_f64, |acc, &i| acc.max(f[i].abs()))
}

/// Weighted supremum sup e^(mu s) |f| over the trusted band. Only meaningful
/// on the asymptotically hyperbolic family, where the weight measures decay
/// toward the conformal boundary.
pub fn weighted_sup_norm(grid: &RadialGrid, f: &[f64], mu: f64) -> Result<f64> {
    if grid.family != GridFamily::AhBall {
        return Err(Error::NotApplicable {
            detail: "weighted norms are defined for the asymptotically hyperbolic family".into(),
        });
    }
    if f.len() != grid.n_points {
        return Err(Error::GridMismatch);
    }
    let mut sup = 0.0_f64;
    for &i in &grid.trusted_band() {
        sup = sup.max((mu * grid.s_values[i]).exp() * f[i].abs());
    }
    Ok(sup)
}

/// Least-squares line y = intercept + slope * x.
pub fn linfit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (&xi, &yi) in x.iter().zip(y) {
        sxx += (xi - mx) * (xi - mx);
        sxy += (xi - mx) * (yi - my);
    }
    let slope = sxy / sxx;
    (my - slope * mx, slope)
}

/// Fit an exponential decay rate: the least-squares slope of -log f against s
/// over the nodes inside the window. The field must be strictly positive
/// there; a sign change means there is no decay rate to speak of.
pub fn decay_rate_fit(grid: &RadialGrid, f: &[f64], window: (f64, f64)) -> Result<f64> {
    if f.len() != grid.n_points {
        return Err(Error::GridMismatch);
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (i, &s) in grid.s_values.iter().enumerate() {
        if s >= window.0 - 1e-12 && s <= window.1 + 1e-12 {
            if f[i] <= 0.0 {
                return Err(Error::FitUndefined {
                    detail: format!("field is {} at s = {s:.4}", f[i]),
                });
            }
            xs.push(s);
            ys.push(-f[i].ln());
        }
    }
    if xs.len() < 8 {
        return Err(Error::FitUndefined {
            detail: format!("only {} nodes in fit window", xs.len()),
        });
    }
    Ok(linfit(&xs, &ys).1)
}

/// Fitted convergence order: least-squares slope of log(err) against log(h).
pub fn fit_order(h: &[f64], err: &[f64]) -> f64 {
    let xs: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let ys: Vec<f64> = err.iter().map(|v| v.max(1e-300).ln()).collect();
    linfit(&xs, &ys).1
}

/// Cubic Lagrange interpolation of a profile sampled on the uniform grid
/// starting at s0 with spacing h, evaluated at x. The 4-node window is
/// clamped inside the grid, so evaluation degrades gracefully at the ends.
pub fn interp_cubic(s0: f64, h: f64, f: &[f64], x: f64) -> f64 {
    let n = f.len();
    debug_assert!(n >= 4);
    let t = (x - s0) / h;
    let i = (t.floor() as isize).clamp(0, n as isize - 2) as usize;
    let lo = i.saturating_sub(1).min(n - 4);
    let mut acc = 0.0;
    for j in lo..lo + 4 {
        let mut w = 1.0;
        for k in lo..lo + 4 {
            if k != j {
                w *= (t - k as f64) / (j as f64 - k as f64);
            }
        }
        acc += w * f[j];
    }
    acc
}

/// Linear interpolation on the same uniform layout.
pub fn interp_linear(s0: f64, h: f64, f: &[f64], x: f64) -> f64 {
    let n = f.len();
    let t = ((x - s0) / h).clamp(0.0, (n - 1) as f64);
    let i = (t.floor() as usize).min(n - 2);
    let frac = t - i as f64;
    f[i] * (1.0 - frac) + f[i + 1] * frac
}
