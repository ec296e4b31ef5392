//! Complex Schur decomposition `A = Z T Z^H` by Householder reduction to
//! Hessenberg form followed by single-shift QR sweeps with Givens rotations.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::graph::C64;

/// Sweeps allowed per eigenvalue before giving up.
const SWEEPS_PER_EIGENVALUE: usize = 60;

pub(crate) struct Schur {
    pub t: DMatrix<C64>,
    pub z: DMatrix<C64>,
}

pub(crate) fn schur(a: &DMatrix<C64>) -> Result<Schur> {
    let n = a.nrows();
    let mut t = a.clone();
    let mut z = DMatrix::<C64>::identity(n, n);
    hessenberg(&mut t, &mut z);
    qr_iterate(&mut t, &mut z)?;
    Ok(Schur { t, z })
}

fn hessenberg(h: &mut DMatrix<C64>, z: &mut DMatrix<C64>) {
    let n = h.nrows();
    for k in 0..n.saturating_sub(2) {
        let m = n - k - 1;
        let mut v: DVector<C64> = DVector::from_fn(m, |i, _| h[(k + 1 + i, k)]);
        let alpha = v.norm();
        if alpha == 0.0 {
            continue;
        }
        let x0 = v[0];
        let phase = if x0.norm() > 0.0 { x0 / x0.norm() } else { C64::new(1.0, 0.0) };
        v[0] += phase * alpha;
        let tau = 2.0 / v.norm_squared();

        for j in k..n {
            let s: C64 = (0..m).map(|i| v[i].conj() * h[(k + 1 + i, j)]).sum();
            if s == C64::default() {
                continue;
            }
            for i in 0..m {
                h[(k + 1 + i, j)] -= v[i] * s * tau;
            }
        }
        reflect_columns(h, &v, k + 1, tau);
        reflect_columns(z, &v, k + 1, tau);

        h[(k + 1, k)] = -phase * alpha;
        for i in k + 2..n {
            h[(i, k)] = C64::default();
        }
    }
}

/// `M <- M (I - tau v v^H)` acting on columns `offset..offset+len(v)`.
fn reflect_columns(m: &mut DMatrix<C64>, v: &DVector<C64>, offset: usize, tau: f64) {
    for r in 0..m.nrows() {
        let s: C64 = (0..v.len()).map(|i| m[(r, offset + i)] * v[i]).sum();
        if s == C64::default() {
            continue;
        }
        for i in 0..v.len() {
            m[(r, offset + i)] -= s * v[i].conj() * tau;
        }
    }
}

/// Rotation `G = [[c, s], [-conj(s), c]]` with `G [x; y] = [r; 0]`.
fn givens(x: C64, y: C64) -> (f64, C64) {
    if y == C64::default() {
        return (1.0, C64::default());
    }
    if x == C64::default() {
        return (0.0, C64::new(1.0, 0.0));
    }
    let ax = x.norm();
    let norm = ax.hypot(y.norm());
    (ax / norm, (x / ax) * y.conj() / norm)
}

fn rotate_rows(m: &mut DMatrix<C64>, k: usize, c: f64, s: C64, cols: std::ops::Range<usize>) {
    for j in cols {
        let p = m[(k, j)];
        let q = m[(k + 1, j)];
        m[(k, j)] = p * c + s * q;
        m[(k + 1, j)] = -s.conj() * p + q * c;
    }
}

fn rotate_cols(m: &mut DMatrix<C64>, k: usize, c: f64, s: C64, rows: std::ops::Range<usize>) {
    for i in rows {
        let p = m[(i, k)];
        let q = m[(i, k + 1)];
        m[(i, k)] = p * c + s.conj() * q;
        m[(i, k + 1)] = -s * p + q * c;
    }
}

fn qr_iterate(h: &mut DMatrix<C64>, z: &mut DMatrix<C64>) -> Result<()> {
    let n = h.nrows();
    if n == 0 {
        return Ok(());
    }
    let eps = f64::EPSILON;
    let small = f64::MIN_POSITIVE * (n as f64) / eps;
    let scale = h.norm().max(small);
    let budget = SWEEPS_PER_EIGENVALUE * n;
    let mut sweeps = 0usize;
    let mut since_deflation = 0usize;
    let mut hi = n - 1;

    loop {
        // Find the start of the active unreduced block ending at `hi`.
        let mut lo = hi;
        while lo > 0 {
            let sub = h[(lo, lo - 1)].norm();
            let mut diag = h[(lo - 1, lo - 1)].norm() + h[(lo, lo)].norm();
            if diag == 0.0 {
                diag = scale;
            }
            if sub <= eps * diag || sub <= small {
                h[(lo, lo - 1)] = C64::default();
                break;
            }
            lo -= 1;
        }
        if lo == hi {
            if hi == 0 {
                return Ok(());
            }
            hi -= 1;
            since_deflation = 0;
            continue;
        }

        sweeps += 1;
        since_deflation += 1;
        if sweeps > budget {
            return Err(Error::ConvergenceFailure { iterations: sweeps });
        }

        let shift = if since_deflation % 20 == 10 {
            h[(lo, lo)] + 0.75 * h[(lo + 1, lo)].re.abs()
        } else if since_deflation.is_multiple_of(20) {
            h[(hi, hi)] + 0.75 * h[(hi, hi - 1)].re.abs()
        } else {
            wilkinson_shift(h[(hi - 1, hi - 1)], h[(hi - 1, hi)], h[(hi, hi - 1)], h[(hi, hi)])
        };

        let mut x = h[(lo, lo)] - shift;
        let mut y = h[(lo + 1, lo)];
        for k in lo..hi {
            if k > lo {
                x = h[(k, k - 1)];
                y = h[(k + 1, k - 1)];
            }
            let (c, s) = givens(x, y);
            let first_col = if k > lo { k - 1 } else { lo };
            rotate_rows(h, k, c, s, first_col..n);
            if k > lo {
                h[(k + 1, k - 1)] = C64::default();
            }
            rotate_cols(h, k, c, s, 0..(k + 3).min(hi + 1));
            rotate_cols(z, k, c, s, 0..n);
        }
    }
}

/// Eigenvalue of the trailing 2x2 block `[[a, b], [c, d]]` closest to `d`.
fn wilkinson_shift(a: C64, b: C64, c: C64, d: C64) -> C64 {
    let half = (a - d) * 0.5;
    let disc = (half * half + b * c).sqrt();
    let mid = (a + d) * 0.5;
    let l1 = mid + disc;
    let l2 = mid - disc;
    if (l1 - d).norm() <= (l2 - d).norm() {
        l1
    } else {
        l2
    }
}

/// Right eigenvectors of the upper triangular `t`, as columns.
pub(crate) fn triangular_eigenvectors(t: &DMatrix<C64>) -> DMatrix<C64> {
    let n = t.nrows();
    let eps = f64::EPSILON;
    let floor = (eps * t.norm()).max(f64::MIN_POSITIVE * n as f64 / eps);
    let mut vecs = DMatrix::<C64>::zeros(n, n);
    for i in 0..n {
        let lambda = t[(i, i)];
        let mut y = DVector::<C64>::zeros(n);
        y[i] = C64::new(1.0, 0.0);
        for j in (0..i).rev() {
            let s: C64 = (j + 1..=i).map(|l| t[(j, l)] * y[l]).sum();
            let mut d = t[(j, j)] - lambda;
            if d.norm() < floor {
                d = C64::new(floor, 0.0);
            }
            y[j] = -s / d;
            let big = y.iter().map(|z| z.norm()).fold(0.0, f64::max);
            if big > 1e100 {
                y /= C64::new(big, 0.0);
            }
        }
        vecs.set_column(i, &y);
    }
    vecs
}
