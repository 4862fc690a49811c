//! The pressure equation.
//!
//! Both flow families couple the metric to a scalar pressure through a linear
//! elliptic problem on the radial line:
//!
//!   AH:     (-Delta + (m+1)) p = |dev|^2 / m,
//!   closed: ((n-1) Delta + 2nc) p = -|dev|^2,      n = m+1.
//!
//! Delta is discretized in divergence form, (1/w) d/ds (mu dp/ds) with
//! mu = b^m/a and cell volumes from Simpson quadrature of w = a b^m. The
//! Simpson volumes matter: near a pole w ~ s^m varies by large factors across
//! one cell, and plain w_i h cell volumes make the first interior row
//! inconsistent by an O(1) factor. Pole rows encode the (m+1)-fold isotropic
//! limit, reflection rows a zero flux, and the AH outer row a homogeneous
//! Dirichlet condition.

use crate::curvature::CurvatureBundle;
use crate::error::{Error, Result};
use crate::grid::{Edge, GridFamily};
use crate::metric::SymmetricMetric;
use crate::stencil::Parity;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// How a boundary row of the operator is closed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundaryRow {
    /// Pole regularity: the row is the isotropic limit (m+1) p'' written as a
    /// mirrored second difference.
    PoleMirror,
    /// Reflection symmetry: zero flux through the plane.
    ReflectionMirror,
    /// Homogeneous Dirichlet value at the truncation radius.
    Dirichlet,
}

/// Tridiagonal operator rows. `sub[i]` couples to node i-1 (zero at i = 0),
/// `sup[i]` to node i+1 (zero at i = n-1).
#[derive(Clone, Debug)]
pub struct EllipticOperator {
    pub diag: Vec<f64>,
    pub sub: Vec<f64>,
    pub sup: Vec<f64>,
    pub bc_inner: BoundaryRow,
    pub bc_outer: BoundaryRow,
    pub shift: f64,
}

impl EllipticOperator {
    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let n = self.len();
        let mut out = vec![0.0; n];
        for i in 0..n {
            let mut acc = self.diag[i] * v[i];
            if i > 0 {
                acc += self.sub[i] * v[i - 1];
            }
            if i + 1 < n {
                acc += self.sup[i] * v[i + 1];
            }
            out[i] = acc;
        }
        out
    }

    pub fn apply_transpose(&self, v: &[f64]) -> Vec<f64> {
        let n = self.len();
        let mut out = vec![0.0; n];
        for i in 0..n {
            let mut acc = self.diag[i] * v[i];
            if i > 0 {
                acc += self.sup[i - 1] * v[i - 1];
            }
            if i + 1 < n {
                acc += self.sub[i + 1] * v[i + 1];
            }
            out[i] = acc;
        }
        out
    }

    fn transposed_bands(&self) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let n = self.len();
        let mut sub_t = vec![0.0; n];
        let mut sup_t = vec![0.0; n];
        for i in 1..n {
            sub_t[i] = self.sup[i - 1];
        }
        for i in 0..n - 1 {
            sup_t[i] = self.sub[i + 1];
        }
        (sub_t, self.diag.clone(), sup_t)
    }
}

/// Pressure and its first three frame derivatives D = (1/a) d/ds.
#[derive(Clone, Debug)]
pub struct PressureField {
    pub p: Vec<f64>,
    pub dp: Vec<f64>,
    pub d2p: Vec<f64>,
    pub d3p: Vec<f64>,
    pub solve_residual: f64,
}

impl PressureField {
    pub fn zero(n: usize) -> Self {
        PressureField {
            p: vec![0.0; n],
            dp: vec![0.0; n],
            d2p: vec![0.0; n],
            d3p: vec![0.0; n],
            solve_residual: 0.0,
        }
    }
}

/// Half-node flux coefficients mu_{i+1/2} = b^m/a from midpoint-averaged
/// profiles, length n-1.
fn half_node_flux(g: &SymmetricMetric) -> Vec<f64> {
    let n = g.grid.n_points;
    (0..n - 1)
        .map(|i| {
            let am = 0.5 * (g.a[i] + g.a[i + 1]);
            let bm = 0.5 * (g.b[i] + g.b[i + 1]);
            bm.powi(g.m as i32) / am
        })
        .collect()
}

/// Per-node cell volumes: Simpson quadrature of w = a b^m over the dual cell
/// (half cells at the ends). Entries at pole nodes are never used by the
/// operator rows but are filled with the half-cell value for completeness.
pub(crate) fn volume_weights(g: &SymmetricMetric) -> Vec<f64> {
    let n = g.grid.n_points;
    let h = g.grid.spacing;
    let w_node: Vec<f64> = (0..n).map(|i| g.a[i] * g.b[i].powi(g.m as i32)).collect();
    let w_half: Vec<f64> = (0..n - 1)
        .map(|i| {
            let am = 0.5 * (g.a[i] + g.a[i + 1]);
            let bm = 0.5 * (g.b[i] + g.b[i + 1]);
            am * bm.powi(g.m as i32)
        })
        .collect();
    let mut vol = vec![0.0; n];
    for i in 1..n - 1 {
        vol[i] = h * (w_half[i - 1] + 4.0 * w_node[i] + w_half[i]) / 6.0;
    }
    vol[0] = 0.25 * h * (w_node[0] + w_half[0]);
    vol[n - 1] = 0.25 * h * (w_node[n - 1] + w_half[n - 2]);
    vol
}

/// Rows of the scalar Laplacian itself. Boundary rows follow the grid's edge
/// kinds; a truncation edge gets a zero row (the caller overwrites it).
pub(crate) fn laplacian_rows(g: &SymmetricMetric) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let n = g.grid.n_points;
    let h = g.grid.spacing;
    let m = g.m as f64;
    let mu = half_node_flux(g);
    let vol = volume_weights(g);
    let mut sub = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut sup = vec![0.0; n];
    for i in 1..n - 1 {
        sub[i] = mu[i - 1] / (h * vol[i]);
        sup[i] = mu[i] / (h * vol[i]);
        diag[i] = -(sub[i] + sup[i]);
    }
    match g.grid.left {
        Edge::Pole => {
            let k = 2.0 * (m + 1.0) / (g.a[0] * g.a[0] * h * h);
            diag[0] = -k;
            sup[0] = k;
        }
        Edge::Reflection => {
            let k = mu[0] / (h * vol[0]);
            diag[0] = -k;
            sup[0] = k;
        }
        Edge::Truncation => {}
    }
    match g.grid.right {
        Edge::Pole => {
            let k = 2.0 * (m + 1.0) / (g.a[n - 1] * g.a[n - 1] * h * h);
            diag[n - 1] = -k;
            sub[n - 1] = k;
        }
        Edge::Reflection => {
            let k = mu[n - 2] / (h * vol[n - 1]);
            diag[n - 1] = -k;
            sub[n - 1] = k;
        }
        Edge::Truncation => {}
    }
    (sub, diag, sup)
}

fn edge_row(edge: Edge) -> BoundaryRow {
    match edge {
        Edge::Pole => BoundaryRow::PoleMirror,
        Edge::Reflection => BoundaryRow::ReflectionMirror,
        Edge::Truncation => BoundaryRow::Dirichlet,
    }
}

/// Assemble the family's pressure operator. For the closed family with a
/// nonnegative shift the smallest singular value is probed and the assembly
/// refuses when it falls below 1e-8 of the operator norm (the shift has
/// collided with the Laplacian spectrum).
pub fn assemble_operator(g: &SymmetricMetric) -> Result<EllipticOperator> {
    let n = g.grid.n_points;
    let (mut sub, mut diag, mut sup) = laplacian_rows(g);
    let op = match g.grid.family {
        GridFamily::AhBall => {
            let shift = (g.m + 1) as f64;
            for i in 0..n {
                sub[i] = -sub[i];
                sup[i] = -sup[i];
                diag[i] = -diag[i] + shift;
            }
            sub[n - 1] = 0.0;
            diag[n - 1] = 1.0;
            sup[n - 1] = 0.0;
            EllipticOperator {
                diag,
                sub,
                sup,
                bc_inner: edge_row(g.grid.left),
                bc_outer: edge_row(g.grid.right),
                shift,
            }
        }
        GridFamily::Closed => {
            let nd = (g.m + 1) as f64;
            let shift = 2.0 * nd * g.einstein_c();
            let scale = nd - 1.0;
            for i in 0..n {
                sub[i] *= scale;
                sup[i] *= scale;
                diag[i] = scale * diag[i] + shift;
            }
            EllipticOperator {
                diag,
                sub,
                sup,
                bc_inner: edge_row(g.grid.left),
                bc_outer: edge_row(g.grid.right),
                shift,
            }
        }
    };
    if g.grid.family == GridFamily::Closed && op.shift >= 0.0 {
        probe_near_singularity(&op)?;
    }
    Ok(op)
}

/// Right-hand side of the pressure equation for the metric's family. The AH
/// outer row is zeroed to match its Dirichlet closure.
pub fn pressure_source(g: &SymmetricMetric, curv: &CurvatureBundle) -> Vec<f64> {
    let n = g.grid.n_points;
    let mut src = vec![0.0; n];
    match g.grid.family {
        GridFamily::AhBall => {
            let m = g.m as f64;
            for i in 0..n {
                src[i] = curv.norm_dev_sq[i] / m;
            }
            src[n - 1] = 0.0;
        }
        GridFamily::Closed => {
            for i in 0..n {
                src[i] = -curv.norm_dev_sq[i];
            }
        }
    }
    src
}

/// Direct tridiagonal solve with the residual recomputed and checked, and the
/// first three frame derivatives attached.
pub fn solve_pressure(
    op: &EllipticOperator,
    source: &[f64],
    g: &SymmetricMetric,
    tol: f64,
) -> Result<PressureField> {
    if source.len() != op.len() || g.grid.n_points != op.len() {
        return Err(Error::GridMismatch);
    }
    let p = solve_tridiag_pivoted(&op.sub, &op.diag, &op.sup, source)?;
    let applied = op.apply(&p);
    let mut residual = 0.0_f64;
    let mut src_sup = 0.0_f64;
    for i in 0..p.len() {
        residual = residual.max((applied[i] - source[i]).abs());
        src_sup = src_sup.max(source[i].abs());
    }
    if !residual.is_finite() {
        return Err(Error::NonFinite { context: "pressure solve" });
    }
    if residual > tol * src_sup.max(1.0) {
        return Err(Error::ResidualTooLarge { residual, tol });
    }
    let dp: Vec<f64> = g
        .grid
        .d1(&p, Parity::Even)
        .iter()
        .zip(&g.a)
        .map(|(&d, &a)| d / a)
        .collect();
    let d2p: Vec<f64> = g
        .grid
        .d1(&dp, Parity::Odd)
        .iter()
        .zip(&g.a)
        .map(|(&d, &a)| d / a)
        .collect();
    let d3p: Vec<f64> = g
        .grid
        .d1(&d2p, Parity::Even)
        .iter()
        .zip(&g.a)
        .map(|(&d, &a)| d / a)
        .collect();
    Ok(PressureField {
        p,
        dp,
        d2p,
        d3p,
        solve_residual: residual,
    })
}

/// Source, assembly, and solve in one step, with the zero-source
/// short-circuit: an Einstein metric has |dev|^2 = 0 to roundoff and its
/// pressure is identically zero, with no need to assemble (or probe) the
/// operator at all.
pub fn solve_pressure_for(
    g: &SymmetricMetric,
    curv: &CurvatureBundle,
    tol: f64,
) -> Result<PressureField> {
    let source = pressure_source(g, curv);
    if source.iter().fold(0.0_f64, |acc, &v| acc.max(v.abs())) < 1e-13 {
        return Ok(PressureField::zero(g.grid.n_points));
    }
    let op = assemble_operator(g)?;
    solve_pressure(&op, &source, g, tol)
}

/// Verdict and suprema for the uniform pressure-derivative bound.
#[derive(Clone, Copy, Debug)]
pub struct PressureBoundsReport {
    pub within: bool,
    pub suprema: [f64; 4],
}

/// Check sup |p|, |Dp|, |D^2 p|, |D^3 p| against a single constant.
pub fn verify_pressure_bounds(p: &PressureField, k_tilde: f64) -> PressureBoundsReport {
    let sup = |v: &[f64]| v.iter().fold(0.0_f64, |acc, &x| acc.max(x.abs()));
    let suprema = [sup(&p.p), sup(&p.dp), sup(&p.d2p), sup(&p.d3p)];
    PressureBoundsReport {
        within: suprema.iter().all(|&s| s <= k_tilde),
        suprema,
    }
}

/// Tridiagonal solve with partial pivoting (row swaps between adjacent rows,
/// producing one extra superdiagonal of fill-in). Stable for the indefinite
/// operators the closed family can produce.
pub(crate) fn solve_tridiag_pivoted(
    sub: &[f64],
    diag: &[f64],
    sup: &[f64],
    rhs: &[f64],
) -> Result<Vec<f64>> {
    let n = diag.len();
    if n < 2 {
        return Err(Error::SolverBreakdown {
            detail: "system too small".into(),
        });
    }
    let dl: Vec<f64> = sub.to_vec();
    let mut d: Vec<f64> = diag.to_vec();
    let mut du: Vec<f64> = sup.to_vec();
    let mut du2 = vec![0.0; n];
    let mut b: Vec<f64> = rhs.to_vec();

    for i in 0..n - 1 {
        if d[i].abs() >= dl[i + 1].abs() {
            if d[i] == 0.0 {
                return Err(Error::SolverBreakdown {
                    detail: format!("zero pivot at row {i}"),
                });
            }
            let f = dl[i + 1] / d[i];
            d[i + 1] -= f * du[i];
            b[i + 1] -= f * b[i];
        } else {
            let f = d[i] / dl[i + 1];
            let du_i = du[i];
            d[i] = dl[i + 1];
            du[i] = d[i + 1];
            d[i + 1] = du_i - f * d[i + 1];
            if i + 2 < n {
                du2[i] = du[i + 1];
                du[i + 1] = -f * du2[i];
            }
            b.swap(i, i + 1);
            b[i + 1] -= f * b[i];
        }
    }
    if d[n - 1] == 0.0 {
        return Err(Error::SolverBreakdown {
            detail: "zero pivot at last row".into(),
        });
    }

    let mut x = b;
    x[n - 1] /= d[n - 1];
    if n >= 2 {
        x[n - 2] = (x[n - 2] - du[n - 2] * x[n - 1]) / d[n - 2];
    }
    for i in (0..n.saturating_sub(2)).rev() {
        x[i] = (x[i] - du[i] * x[i + 1] - du2[i] * x[i + 2]) / d[i];
    }
    for &v in &x {
        if !v.is_finite() {
            return Err(Error::SolverBreakdown {
                detail: "non-finite solution".into(),
            });
        }
    }
    Ok(x)
}

/// Estimate the operator norm (power iteration on A^T A) and the smallest
/// singular value (inverse iteration on A^T A, one forward and one transposed
/// solve per sweep), both from seeded deterministic starts. Refuse when the
/// ratio drops below 1e-8.
fn probe_near_singularity(op: &EllipticOperator) -> Result<()> {
    let n = op.len();
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let normalize = |v: &mut [f64]| {
        let s = norm(v);
        if s > 0.0 {
            for x in v.iter_mut() {
                *x /= s;
            }
        }
    };

    let mut rng = ChaCha8Rng::seed_from_u64(0x51_6D_41);
    let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    normalize(&mut v);
    for _ in 0..60 {
        let mut w = op.apply_transpose(&op.apply(&v));
        normalize(&mut w);
        v = w;
    }
    let op_norm = norm(&op.apply(&v));

    let (sub_t, diag_t, sup_t) = op.transposed_bands();
    let mut u: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    normalize(&mut u);
    for _ in 0..40 {
        let y = match solve_tridiag_pivoted(&sub_t, &diag_t, &sup_t, &u) {
            Ok(y) => y,
            Err(_) => {
                return Err(Error::NearSingularOperator {
                    sigma_min: 0.0,
                    op_norm,
                    near_kernel: u,
                });
            }
        };
        let z = match solve_tridiag_pivoted(&op.sub, &op.diag, &op.sup, &y) {
            Ok(z) => z,
            Err(_) => {
                return Err(Error::NearSingularOperator {
                    sigma_min: 0.0,
                    op_norm,
                    near_kernel: u,
                });
            }
        };
        let s = norm(&z);
        if !s.is_finite() || s == 0.0 {
            return Err(Error::NearSingularOperator {
                sigma_min: 0.0,
                op_norm,
                near_kernel: u,
            });
        }
        u = z;
        normalize(&mut u);
    }
    let sigma_min = norm(&op.apply(&u));
    if sigma_min <= 1e-8 * op_norm {
        return Err(Error::NearSingularOperator {
            sigma_min,
            op_norm,
            near_kernel: u,
        });
    }
    Ok(())
}
