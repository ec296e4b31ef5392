//! LU factorization with partial pivoting and a 1-norm condition estimate.

use nalgebra::{DMatrix, DVector};

use crate::graph::C64;

pub(crate) struct Lu {
    /// Packed factors: strict lower part is `L` (unit diagonal), upper part is `U`.
    lu: DMatrix<C64>,
    /// Row `k` of the factored matrix came from row `perm[k]` of the input.
    perm: Vec<usize>,
    norm1: f64,
}

impl Lu {
    pub fn new(mut a: DMatrix<C64>) -> Self {
        let n = a.nrows();
        debug_assert!(a.is_square());
        let norm1 = one_norm(&a);
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (piv, _) = (k..n)
                .map(|i| (i, a[(i, k)].norm()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if piv != k {
                a.swap_rows(k, piv);
                perm.swap(k, piv);
            }
            let pivot = a[(k, k)];
            if pivot == C64::default() {
                continue;
            }
            for i in k + 1..n {
                a[(i, k)] /= pivot;
            }
            for j in k + 1..n {
                let akj = a[(k, j)];
                if akj == C64::default() {
                    continue;
                }
                for i in k + 1..n {
                    let lik = a[(i, k)];
                    a[(i, j)] -= lik * akj;
                }
            }
        }
        Self { lu: a, perm, norm1 }
    }

    pub fn dim(&self) -> usize {
        self.lu.nrows()
    }

    fn has_zero_pivot(&self) -> bool {
        (0..self.dim()).any(|k| self.lu[(k, k)] == C64::default())
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut DVector<C64>) {
        let n = self.dim();
        let mut x: DVector<C64> = DVector::from_fn(n, |k, _| b[self.perm[k]]);
        for j in 0..n {
            let xj = x[j];
            if xj == C64::default() {
                continue;
            }
            for i in j + 1..n {
                x[i] -= self.lu[(i, j)] * xj;
            }
        }
        for j in (0..n).rev() {
            x[j] /= self.lu[(j, j)];
            let xj = x[j];
            for i in 0..j {
                x[i] -= self.lu[(i, j)] * xj;
            }
        }
        b.copy_from(&x);
    }

    /// Solves `A^H x = b` in place.
    pub fn solve_adjoint_in_place(&self, b: &mut DVector<C64>) {
        // A = P^T L U, so A^H = U^H L^H P.
        let n = self.dim();
        let mut y = b.clone();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= self.lu[(k, i)].conj() * y[k];
            }
            y[i] = s / self.lu[(i, i)].conj();
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..n {
                s -= self.lu[(k, i)].conj() * y[k];
            }
            y[i] = s;
        }
        for k in 0..n {
            b[self.perm[k]] = y[k];
        }
    }

    /// Reciprocal condition number in the 1-norm, using Higham's estimate of `||A^-1||_1`.
    pub fn rcond(&self) -> f64 {
        let n = self.dim();
        if n == 0 {
            return 1.0;
        }
        if self.has_zero_pivot() || self.norm1 == 0.0 {
            return 0.0;
        }
        let inv_norm = self.inverse_norm1_estimate();
        if !inv_norm.is_finite() || inv_norm == 0.0 {
            return 0.0;
        }
        1.0 / (self.norm1 * inv_norm)
    }

    fn inverse_norm1_estimate(&self) -> f64 {
        let n = self.dim();
        let mut x = DVector::from_element(n, C64::new(1.0 / n as f64, 0.0));
        let mut estimate = 0.0_f64;
        let mut last_j = usize::MAX;
        for _ in 0..5 {
            let mut y = x.clone();
            self.solve_in_place(&mut y);
            let y_norm: f64 = y.iter().map(|z| z.norm()).sum();
            if y_norm <= estimate {
                break;
            }
            estimate = y_norm;
            let mut z = y.map(|v| if v.norm() > 0.0 { v / v.norm() } else { C64::new(1.0, 0.0) });
            self.solve_adjoint_in_place(&mut z);
            let (j, zmax) = z
                .iter()
                .enumerate()
                .map(|(i, v)| (i, v.norm()))
                .fold((0, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            let ztx = z.dotc(&x).re;
            if zmax <= ztx || j == last_j {
                break;
            }
            last_j = j;
            x.fill(C64::default());
            x[j] = C64::new(1.0, 0.0);
        }
        // Alternating test vector guards against the iteration stalling.
        let mut alt = DVector::from_fn(n, |i, _| {
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            let frac = if n > 1 { i as f64 / (n - 1) as f64 } else { 0.0 };
            C64::new(sign * (1.0 + frac), 0.0)
        });
        self.solve_in_place(&mut alt);
        let alt_est = 2.0 * alt.iter().map(|z| z.norm()).sum::<f64>() / (3.0 * n as f64);
        estimate.max(alt_est)
    }
}

pub(crate) fn one_norm(a: &DMatrix<C64>) -> f64 {
    a.column_iter()
        .map(|col| col.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}
