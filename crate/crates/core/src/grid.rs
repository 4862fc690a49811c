//! Uniform radial grids for the symmetry-reduced models.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::stencil::{DiffPlan, EdgeRule, Parity, EDGE_ZONE};

/// Which model geometry the radial coordinate parametrizes.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum GridFamily {
    /// Asymptotically hyperbolic ball: pole at s = 0, truncation at s_max.
    AhBall,
    /// Closed model: poles at both ends (kappa = 1) or reflection planes at
    /// both ends (kappa = 0).
    Closed,
}

/// Geometric role of a grid endpoint.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Edge {
    /// Rotational pole: b = 0 there, profiles close by parity.
    Pole,
    /// Reflection plane of the flat closed model: b stays positive, profiles
    /// close by tensor parity.
    Reflection,
    /// Truncated AH end: one-sided stencils, Dirichlet pressure row.
    Truncation,
}

/// A uniform grid on [0, extent] together with its differentiation plan.
#[derive(Clone, Debug)]
pub struct RadialGrid {
    pub family: GridFamily,
    pub n_points: usize,
    pub spacing: f64,
    pub s_values: Vec<f64>,
    pub left: Edge,
    pub right: Edge,
    plan: Arc<DiffPlan>,
}

impl PartialEq for RadialGrid {
    fn eq(&self, other: &Self) -> bool {
        self.family == other.family
            && self.n_points == other.n_points
            && self.spacing == other.spacing
            && self.left == other.left
            && self.right == other.right
    }
}

impl RadialGrid {
    /// Build a grid for the given family. `kappa` selects the closed
    /// sub-family (1: poles at both ends, 0: reflection planes at both ends)
    /// and must be 1 for `AhBall`.
    pub fn new(family: GridFamily, kappa: f64, extent: f64, n_points: usize) -> Result<RadialGrid> {
        if !(extent.is_finite() && extent > 0.0) {
            return Err(Error::Config {
                rule: "grid-extent",
                message: format!("extent must be positive and finite, got {extent}"),
            });
        }
        if n_points < 2 * EDGE_ZONE + 7 {
            return Err(Error::Config {
                rule: "grid-points",
                message: format!(
                    "grid needs at least {} nodes, got {n_points}",
                    2 * EDGE_ZONE + 7
                ),
            });
        }
        let (left, right) = match (family, kappa) {
            (GridFamily::AhBall, k) if k == 1.0 => (Edge::Pole, Edge::Truncation),
            (GridFamily::AhBall, k) => {
                return Err(Error::Config {
                    rule: "family-kappa",
                    message: format!("AH ball requires kappa = 1, got {k}"),
                });
            }
            (GridFamily::Closed, k) if k == 1.0 => (Edge::Pole, Edge::Pole),
            (GridFamily::Closed, k) if k == 0.0 => (Edge::Reflection, Edge::Reflection),
            (GridFamily::Closed, k) => {
                return Err(Error::Config {
                    rule: "family-kappa",
                    message: format!("closed family requires kappa in {{0, 1}}, got {k}"),
                });
            }
        };
        let spacing = extent / (n_points - 1) as f64;
        let s_values: Vec<f64> = (0..n_points).map(|i| i as f64 * spacing).collect();
        let rule = match right {
            Edge::Truncation => EdgeRule::OneSided,
            _ => EdgeRule::Fold,
        };
        let plan = Arc::new(DiffPlan::new(n_points, spacing, rule)?);
        Ok(RadialGrid {
            family,
            n_points,
            spacing,
            s_values,
            left,
            right,
            plan,
        })
    }

    pub fn s_max(&self) -> f64 {
        *self.s_values.last().unwrap()
    }

    /// First derivative of a per-node profile; `parity` is the profile's
    /// reflection parity about the fold edges.
    pub fn d1(&self, f: &[f64], parity: Parity) -> Vec<f64> {
        self.plan.diff(f, 1, parity)
    }

    /// Second derivative of a per-node profile.
    pub fn d2(&self, f: &[f64], parity: Parity) -> Vec<f64> {
        self.plan.diff(f, 2, parity)
    }

    /// Indices of nodes where pointwise invariants are asserted: the two
    /// nodes adjacent to each pole are excluded (b -> 0 amplifies roundoff),
    /// and on an AH grid everything within one unit of the truncation is
    /// excluded as boundary-affected.
    pub fn trusted_band(&self) -> Vec<usize> {
        let n = self.n_points;
        let mut band = Vec::with_capacity(n);
        for i in 0..n {
            if self.left == Edge::Pole && (i == 1 || i == 2) {
                continue;
            }
            match self.right {
                Edge::Pole if i == n - 2 || i == n - 3 => continue,
                Edge::Truncation if self.s_values[i] > self.s_max() - 1.0 + 1e-12 => continue,
                _ => {}
            }
            band.push(i);
        }
        band
    }

    /// True when a profile index sits at a pole node.
    pub fn is_pole(&self, i: usize) -> bool {
        (i == 0 && self.left == Edge::Pole) || (i == self.n_points - 1 && self.right == Edge::Pole)
    }

    pub fn pole_indices(&self) -> Vec<usize> {
        let mut v = Vec::new();
        if self.left == Edge::Pole {
            v.push(0);
        }
        if self.right == Edge::Pole {
            v.push(self.n_points - 1);
        }
        v
    }
}
