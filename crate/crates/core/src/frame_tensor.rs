//! Covariant tensors of the symmetric geometry in the adapted orthonormal
//! frame e_0 = (1/a) d/ds, e_1..e_m tangent to the fiber.
//!
//! A rotation-invariant covariant tensor is determined by its frame
//! components T[A], A in {0..m}^rank, and each component is a single radial
//! profile (component functions are constant along fibers because both the
//! tensor and the frame transform equivariantly). This module stores the
//! full component array without exploiting isotropy, so higher derivatives
//! need no new index bookkeeping: the price is (m+1)^rank profiles, which at
//! rank 6 and m = 3 is a few thousand vectors.
//!
//! The covariant derivative of an invariant tensor closes over this
//! representation. Writing H = u/b for the mean-curvature factor of the
//! fiber and D = (1/a) d/ds, the adapted-frame connection is
//! nabla_{e_q} e_0 = H e_q and nabla_{e_q} e_j = -H delta_{qj} e_0 plus
//! fiber-internal terms that vanish when evaluated on invariant component
//! functions in a fiber-synchronous frame, so
//!
//!   (nabla T)[0, A] = D T[A],
//!   (nabla T)[q, A] = sum_{k: A_k = 0} (-H) T[A | k -> q]
//!                   + sum_{k: A_k = q} (+H) T[A | k -> 0].
//!
//! Component parity across a fold edge counts radial slots: e_0 flips under
//! the reflection isometry while the fiber frame is fixed, so T[A] is even
//! exactly when A contains an even number of zeros. The H factor at a pole
//! node is the L'Hopital limit computed by the curvature module.

use crate::curvature::{h_times, CurvatureBundle};
use crate::error::{Error, Result};
use crate::metric::SymmetricMetric;
use crate::stencil::Parity;

/// Dense frame-component array of one invariant covariant tensor.
#[derive(Clone, Debug)]
pub struct FrameTensor {
    /// Number of slots.
    pub rank: usize,
    /// m + 1: the frame index range.
    pub dim: usize,
    /// Component profiles, indexed by the base-(m+1) encoding of the index
    /// word (first slot is the most significant digit).
    comps: Vec<Vec<f64>>,
    n: usize,
}

impl FrameTensor {
    pub fn zeros(rank: usize, dim: usize, n: usize) -> Self {
        let words = dim.pow(rank as u32);
        FrameTensor {
            rank,
            dim,
            comps: vec![vec![0.0; n]; words],
            n,
        }
    }

    pub fn n_points(&self) -> usize {
        self.n
    }

    fn flat(&self, word: &[usize]) -> usize {
        debug_assert_eq!(word.len(), self.rank);
        word.iter().fold(0, |acc, &w| acc * self.dim + w)
    }

    pub fn component(&self, word: &[usize]) -> &[f64] {
        &self.comps[self.flat(word)]
    }

    pub fn component_mut(&mut self, word: &[usize]) -> &mut [f64] {
        let idx = self.flat(word);
        &mut self.comps[idx]
    }

    /// Fold parity of the component at a flat index: even iff the number of
    /// radial (zero) slots is even.
    fn parity_of(&self, mut flat: usize) -> Parity {
        let mut zeros = 0usize;
        for _ in 0..self.rank {
            if flat % self.dim == 0 {
                zeros += 1;
            }
            flat /= self.dim;
        }
        if zeros % 2 == 0 {
            Parity::Even
        } else {
            Parity::Odd
        }
    }

    /// Pointwise squared norm: the frame is orthonormal, so contracting all
    /// slots with the metric is the plain sum of squared components.
    pub fn norm_sq_per_node(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for comp in &self.comps {
            for (o, &v) in out.iter_mut().zip(comp) {
                *o += v * v;
            }
        }
        out
    }

    /// The Riemann tensor as a rank-4 frame tensor. Only two independent
    /// sectional curvatures exist in this symmetry class:
    /// R[0i0j] = k_rad delta_ij and R[ijkl] = k_sph (delta_ik delta_jl -
    /// delta_il delta_jk), extended by the Riemann symmetries; components
    /// with an odd number of radial slots vanish.
    pub fn riemann(g: &SymmetricMetric, curv: &CurvatureBundle) -> Self {
        let m = g.m;
        let dim = m + 1;
        let n = g.grid.n_points;
        let mut t = FrameTensor::zeros(4, dim, n);
        // Radial-pair components: all placements of (0, i) within each
        // antisymmetric pair, with the sign of the pair orientation.
        for i in 1..dim {
            for (a, b, c, d, sign) in [
                (0, i, 0, i, 1.0),
                (0, i, i, 0, -1.0),
                (i, 0, 0, i, -1.0),
                (i, 0, i, 0, 1.0),
            ] {
                let comp = t.component_mut(&[a, b, c, d]);
                for (x, &k) in comp.iter_mut().zip(&curv.k_rad) {
                    *x = sign * k;
                }
            }
        }
        // Tangential components.
        for i in 1..dim {
            for j in 1..dim {
                if i == j {
                    continue;
                }
                for (a, b, c, d, sign) in [
                    (i, j, i, j, 1.0),
                    (i, j, j, i, -1.0),
                ] {
                    let comp = t.component_mut(&[a, b, c, d]);
                    for (x, &k) in comp.iter_mut().zip(&curv.k_sph) {
                        *x = sign * k;
                    }
                }
            }
        }
        t
    }

    /// Covariant derivative, returned with the derivative slot first:
    /// out[w, A] = (nabla_{e_w} T)(e_A).
    pub fn covariant_derivative(&self, g: &SymmetricMetric) -> Result<FrameTensor> {
        if g.grid.n_points != self.n {
            return Err(Error::GridMismatch);
        }
        let dim = self.dim;
        let n = self.n;
        let u = g.u_profile();

        // Radial derivative and H-multiple of every component, computed once.
        let mut d_comp: Vec<Vec<f64>> = Vec::with_capacity(self.comps.len());
        let mut h_comp: Vec<Vec<f64>> = Vec::with_capacity(self.comps.len());
        for (flat, comp) in self.comps.iter().enumerate() {
            let parity = self.parity_of(flat);
            let ds = g.grid.d1(comp, parity);
            d_comp.push(ds.iter().zip(&g.a).map(|(&d, &a)| d / a).collect());
            h_comp.push(h_times(g, &u, comp, parity));
        }

        let mut out = FrameTensor::zeros(self.rank + 1, dim, n);
        let words = self.comps.len();
        let mut word = vec![0usize; self.rank];
        for flat in 0..words {
            // Decode the source word once per component.
            let mut rem = flat;
            for k in (0..self.rank).rev() {
                word[k] = rem % dim;
                rem /= dim;
            }
            // w = 0: radial derivative.
            {
                let mut target = Vec::with_capacity(self.rank + 1);
                target.push(0);
                target.extend_from_slice(&word);
                let dst = out.component_mut(&target);
                dst.copy_from_slice(&d_comp[flat]);
            }
            // w = q: connection terms scatter into neighbor words. This loop
            // gathers instead: for the target word (q, A), the sources are
            // the words A with one slot swapped between 0 and q.
        }

        let mut target = vec![0usize; self.rank + 1];
        let mut src = vec![0usize; self.rank];
        for tflat in 0..out.comps.len() {
            let mut rem = tflat;
            for k in (0..=self.rank).rev() {
                target[k] = rem % dim;
                rem /= dim;
            }
            let q = target[0];
            if q == 0 {
                continue;
            }
            let a = &target[1..];
            let mut acc = vec![0.0; n];
            for k in 0..self.rank {
                if a[k] == 0 {
                    // The source word has q in slot k where the target has 0.
                    src.copy_from_slice(a);
                    src[k] = q;
                    let s = self.flat_of(&src);
                    for (o, &v) in acc.iter_mut().zip(&h_comp[s]) {
                        *o -= v;
                    }
                } else if a[k] == q {
                    src.copy_from_slice(a);
                    src[k] = 0;
                    let s = self.flat_of(&src);
                    for (o, &v) in acc.iter_mut().zip(&h_comp[s]) {
                        *o += v;
                    }
                }
            }
            out.comps[tflat] = acc;
        }
        Ok(out)
    }

    fn flat_of(&self, word: &[usize]) -> usize {
        word.iter().fold(0, |acc, &w| acc * self.dim + w)
    }
}

/// Per-node |nabla^2 Rm|, the second covariant derivative norm used by the
/// t-weighted smoothing diagnostics. Both derivatives run through the same
/// stencil and pole-limit machinery as every other field.
pub fn grad2_rm_norm(g: &SymmetricMetric, curv: &CurvatureBundle) -> Result<Vec<f64>> {
    let rm = FrameTensor::riemann(g, curv);
    let d1 = rm.covariant_derivative(g)?;
    let d2 = d1.covariant_derivative(g)?;
    Ok(d2.norm_sq_per_node().iter().map(|v| v.sqrt()).collect())
}
