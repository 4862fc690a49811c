//! Doubly-warped metrics `g = a(s)^2 ds^2 + b(s)^2 ghat_kappa` and the model
//! backgrounds.

use crate::error::{Error, Result};
use crate::grid::{Edge, GridFamily, RadialGrid};
use crate::stencil::Parity;

/// A symmetric doubly-warped metric on a radial grid.
///
/// `m` is the fiber dimension (the manifold has dimension m + 1), `kappa`
/// the fiber curvature (1: round sphere fiber, 0: flat fiber), and
/// `scalar_target` the constant scalar curvature the flow pins: `-m(m+1)`
/// for the AH family, `2(m+1)c` for closed models.
#[derive(Clone, Debug, PartialEq)]
pub struct SymmetricMetric {
    pub grid: RadialGrid,
    pub m: usize,
    pub kappa: f64,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub scalar_target: f64,
}

impl SymmetricMetric {
    /// Manifold dimension n = m + 1.
    pub fn n_dim(&self) -> usize {
        self.m + 1
    }

    /// The constant c with scalar_target = 2 n c. For the AH family this is
    /// -m/2.
    pub fn einstein_c(&self) -> f64 {
        self.scalar_target / (2.0 * self.n_dim() as f64)
    }

    /// Reflection parity of the warping profile b about the fold edges:
    /// odd at poles, even at reflection planes.
    pub fn b_parity(&self) -> Parity {
        match self.grid.left {
            Edge::Pole => Parity::Odd,
            _ => Parity::Even,
        }
    }

    /// u = b'/a, the normalized slope entering every curvature formula.
    pub fn u_profile(&self) -> Vec<f64> {
        let db = self.grid.d1(&self.b, self.b_parity());
        db.iter().zip(&self.a).map(|(&d, &a)| d / a).collect()
    }

    /// Structural checks: positive lapse, positive warping away from poles,
    /// exact zeros at poles, and pole regularity |u| = 1 to discretization
    /// accuracy.
    pub fn validate(&self) -> Result<()> {
        let n = self.grid.n_points;
        if self.a.len() != n || self.b.len() != n {
            return Err(Error::GridMismatch);
        }
        for (i, &a) in self.a.iter().enumerate() {
            if !(a.is_finite() && a > 0.0) {
                return Err(Error::DegenerateMetric {
                    detail: format!("a[{i}] = {a}"),
                });
            }
        }
        for i in 0..n {
            let b = self.b[i];
            if !b.is_finite() {
                return Err(Error::NonFinite { context: "metric profile b" });
            }
            if self.grid.is_pole(i) {
                if b != 0.0 {
                    return Err(Error::DegenerateMetric {
                        detail: format!("b[{i}] = {b} at a pole (must be exactly 0)"),
                    });
                }
            } else if b <= 0.0 {
                return Err(Error::DegenerateMetric {
                    detail: format!("b[{i}] = {b} at an interior node"),
                });
            }
        }
        let u = self.u_profile();
        for i in self.grid.pole_indices() {
            let defect = (u[i].abs() - 1.0).abs();
            if defect > 1e-2 {
                return Err(Error::DegenerateMetric {
                    detail: format!("pole regularity |u| - 1 = {defect:.3e} at node {i}"),
                });
            }
        }
        Ok(())
    }
}

/// Build an unperturbed model background.
///
/// * `AhBall`: a = 1, b = sinh(s) on [0, extent]; scalar target -m(m+1);
///   `c` must be None.
/// * `Closed`, kappa = 1: a = 1, b = sin(s) on [0, pi] (extent must equal pi
///   to a loose tolerance and is snapped to it); requires `c`.
/// * `Closed`, kappa = 0: a = 1, b = 1 on [0, extent]; requires `c`.
pub fn build_background(
    family: GridFamily,
    m: usize,
    kappa: f64,
    extent: f64,
    n_points: usize,
    c: Option<f64>,
) -> Result<SymmetricMetric> {
    if m < 2 {
        return Err(Error::Config {
            rule: "fiber-dimension",
            message: format!("need m >= 2, got {m}"),
        });
    }
    let n = (m + 1) as f64;
    match family {
        GridFamily::AhBall => {
            if c.is_some() {
                return Err(Error::Config {
                    rule: "ah-no-c",
                    message: "the AH family fixes c = -m/2; do not pass one".into(),
                });
            }
            let grid = RadialGrid::new(family, kappa, extent, n_points)?;
            let a = vec![1.0; n_points];
            let b: Vec<f64> = grid.s_values.iter().map(|&s| s.sinh()).collect();
            Ok(SymmetricMetric {
                grid,
                m,
                kappa,
                a,
                b,
                scalar_target: -(m as f64) * n,
            })
        }
        GridFamily::Closed => {
            let c = c.ok_or_else(|| Error::Config {
                rule: "closed-needs-c",
                message: "closed family requires the constant c".into(),
            })?;
            let scalar_target = 2.0 * n * c;
            if kappa == 1.0 {
                if (extent - std::f64::consts::PI).abs() > 1e-3 {
                    return Err(Error::Config {
                        rule: "sphere-extent",
                        message: format!(
                            "kappa = 1 closed model lives on [0, pi]; got extent {extent}"
                        ),
                    });
                }
                let grid = RadialGrid::new(family, kappa, std::f64::consts::PI, n_points)?;
                let a = vec![1.0; n_points];
                let mut b: Vec<f64> = grid.s_values.iter().map(|&s| s.sin()).collect();
                // sin(pi) is ~1e-16, not 0; poles must be exact.
                b[0] = 0.0;
                b[n_points - 1] = 0.0;
                Ok(SymmetricMetric {
                    grid,
                    m,
                    kappa,
                    a,
                    b,
                    scalar_target,
                })
            } else {
                let grid = RadialGrid::new(family, kappa, extent, n_points)?;
                Ok(SymmetricMetric {
                    grid,
                    m,
                    kappa,
                    a: vec![1.0; n_points],
                    b: vec![1.0; n_points],
                    scalar_target,
                })
            }
        }
    }
}
