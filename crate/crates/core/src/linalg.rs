//! Minimal dense LU with partial pivoting, for the one place the code needs a
//! general direct solve (the normalizer's finite-difference Jacobian). Row
//! major, factor once, solve many.

use crate::error::{Error, Result};

pub(crate) struct DenseLu {
    n: usize,
    a: Vec<f64>,
    piv: Vec<usize>,
}

impl DenseLu {
    /// Factor a row-major n x n matrix in place.
    pub(crate) fn factor(mut a: Vec<f64>, n: usize) -> Result<DenseLu> {
        debug_assert_eq!(a.len(), n * n);
        let mut piv = vec![0usize; n];
        for k in 0..n {
            let mut p = k;
            let mut best = a[k * n + k].abs();
            for r in k + 1..n {
                let v = a[r * n + k].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if best == 0.0 || !best.is_finite() {
                return Err(Error::SolverBreakdown {
                    detail: format!("dense LU pivot {best} at column {k}"),
                });
            }
            piv[k] = p;
            if p != k {
                for j in 0..n {
                    a.swap(k * n + j, p * n + j);
                }
            }
            let pivot = a[k * n + k];
            for r in k + 1..n {
                let f = a[r * n + k] / pivot;
                a[r * n + k] = f;
                if f != 0.0 {
                    let (head, tail) = a.split_at_mut(r * n);
                    let krow = &head[k * n + k + 1..k * n + n];
                    let rrow = &mut tail[k + 1..n];
                    for (rv, kv) in rrow.iter_mut().zip(krow) {
                        *rv -= f * kv;
                    }
                }
            }
        }
        Ok(DenseLu { n, a, piv })
    }

    pub(crate) fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x = rhs.to_vec();
        // The stored multipliers are swapped along with their rows during
        // factorization, so they refer to final row positions: the whole
        // permutation must be applied to the right-hand side before the
        // forward sweep, not interleaved with it.
        for k in 0..n {
            x.swap(k, self.piv[k]);
        }
        for k in 0..n {
            let xk = x[k];
            if xk != 0.0 {
                for r in k + 1..n {
                    x[r] -= self.a[r * n + k] * xk;
                }
            }
        }
        for k in (0..n).rev() {
            let mut acc = x[k];
            for j in k + 1..n {
                acc -= self.a[k * n + j] * x[j];
            }
            x[k] = acc / self.a[k * n + k];
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn lu_solves_random_systems() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..5 {
            let n = 30;
            let a: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let x_true: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut rhs = vec![0.0; n];
            for i in 0..n {
                for j in 0..n {
                    rhs[i] += a[i * n + j] * x_true[j];
                }
            }
            let lu = DenseLu::factor(a.clone(), n).unwrap();
            let x = lu.solve(&rhs);
            // Partial pivoting promises a small residual; the forward error
            // additionally carries the sample's condition number, so it gets
            // a looser bound.
            let scale = a.iter().fold(0.0_f64, |acc, &v| acc.max(v.abs()))
                * x.iter().fold(1.0_f64, |acc, &v| acc.max(v.abs()))
                * n as f64;
            for i in 0..n {
                let mut r = -rhs[i];
                for j in 0..n {
                    r += a[i * n + j] * x[j];
                }
                assert!(r.abs() <= 1e-13 * scale, "residual {r:.3e} at row {i}");
                assert!((x[i] - x_true[i]).abs() < 1e-7, "entry {i}: {:.3e}", x[i] - x_true[i]);
            }
        }
    }

    #[test]
    fn singular_matrix_is_refused() {
        let a = vec![1.0, 2.0, 2.0, 4.0];
        assert!(DenseLu::factor(a, 2).is_err());
    }

    #[test]
    fn heavy_pivoting_permutation_is_applied_correctly() {
        // A cyclic-shift matrix with small diagonal fill forces a row swap
        // at every elimination step; the factors then refer to final row
        // positions, which the solve must respect for all of them at once.
        let n = 8;
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            a[i * n + (i + 1) % n] = 1.0;
            a[i * n + i] += 1e-3;
        }
        let x_true: Vec<f64> = (0..n).map(|i| (i as f64) - 3.5).collect();
        let mut rhs = vec![0.0; n];
        for i in 0..n {
            for j in 0..n {
                rhs[i] += a[i * n + j] * x_true[j];
            }
        }
        let lu = DenseLu::factor(a, n).unwrap();
        let x = lu.solve(&rhs);
        for i in 0..n {
            assert!(
                (x[i] - x_true[i]).abs() < 1e-10,
                "entry {i}: got {}, want {}",
                x[i],
                x_true[i]
            );
        }
    }
}
