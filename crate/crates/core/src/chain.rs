//! Finite uniform chain `H = -sum_i (|i><i+1| + h.c.)` cut into a left
//! branch, a center and a right branch.
//!
//! Sites are numbered `1..=N` in the formulas below and `0..N` in memory.
//! With `k = n pi / (N + 1)` the full chain has `E = -2 cos k` and
//! `f(j) = sqrt(2 / (N + 1)) sin(k j)`. Cutting after `N_a` sites and after
//! `N_a + N_c` sites leaves root potentials
//!
//! ```text
//! V_A = -sin(k N_a) / sin(k (N_a + 1))
//! V_B = -sin(k (N_a + N_c + 1)) / sin(k (N_a + N_c))
//! ```

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::graph::{Branch, GraphSpec, HamiltonianMatrix, Partition, C64};

/// Smallest `|sin|` accepted as a denominator of a root potential.
pub const DENOMINATOR_TOL: f64 = 1e-12;

pub fn open_chain(n: usize) -> GraphSpec {
    let mut g = GraphSpec::new(n);
    for i in 0..n.saturating_sub(1) {
        g.add_hopping(i, i + 1, -1.0);
    }
    g
}

/// Chain of `n_a + n_c + n_b` sites split as branch a, center, branch b.
pub fn chain_partition(n_a: usize, n_c: usize, n_b: usize) -> Result<(GraphSpec, Partition)> {
    if n_a == 0 || n_c == 0 || n_b == 0 {
        return Err(Error::InvalidParameter(format!("segment lengths must be positive, got ({n_a}, {n_c}, {n_b})")));
    }
    let n = n_a + n_c + n_b;
    let spec = open_chain(n);
    let a = Branch::from_graph(&spec, (0..n_a).collect(), n_a);
    let b = Branch::from_graph(&spec, (n_a + n_c..n).collect(), n_a + n_c - 1);
    Ok((spec, Partition::new((n_a..n_a + n_c).collect(), vec![a, b])))
}

/// Analytic eigenpair `n` (1-based) of the open `N`-site chain.
pub fn chain_eigenpair(n_sites: usize, mode: usize) -> Result<(f64, DVector<f64>)> {
    if mode == 0 || mode > n_sites {
        return Err(Error::IndexOutOfRange { index: mode, len: n_sites });
    }
    let k = mode as f64 * PI / (n_sites + 1) as f64;
    let norm = (2.0 / (n_sites + 1) as f64).sqrt();
    let f = DVector::from_fn(n_sites, |j, _| norm * (k * (j + 1) as f64).sin());
    Ok((-2.0 * k.cos(), f))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainPartitionParams {
    pub n_a: usize,
    pub n_c: usize,
    pub n_b: usize,
    pub k: f64,
}

impl ChainPartitionParams {
    pub fn new(n_a: usize, n_c: usize, n_b: usize, k: f64) -> Result<Self> {
        if n_a == 0 || n_c == 0 || n_b == 0 {
            return Err(Error::InvalidParameter(format!("segment lengths must be positive, got ({n_a}, {n_c}, {n_b})")));
        }
        if !(k > 0.0 && k < PI) {
            return Err(Error::InvalidParameter(format!("wavenumber {k} outside (0, pi)")));
        }
        Ok(Self { n_a, n_c, n_b, k })
    }

    /// Parameters tied to the full-chain eigenstate with mode number `mode`.
    pub fn for_mode(n_a: usize, n_c: usize, n_b: usize, mode: usize) -> Result<Self> {
        let n = n_a + n_c + n_b;
        if mode == 0 || mode > n {
            return Err(Error::IndexOutOfRange { index: mode, len: n });
        }
        Self::new(n_a, n_c, n_b, mode as f64 * PI / (n + 1) as f64)
    }

    pub fn n_sites(&self) -> usize {
        self.n_a + self.n_c + self.n_b
    }

    pub fn energy(&self) -> f64 {
        -2.0 * self.k.cos()
    }
}

pub fn chain_root_potentials(params: &ChainPartitionParams) -> Result<(f64, f64)> {
    root_potentials(params.k, params.n_a, params.n_c)
}

fn root_potentials(k: f64, n_a: usize, n_c: usize) -> Result<(f64, f64)> {
    let (den_a, den_b) = denominators(k, n_a, n_c)?;
    let v_a = -(k * n_a as f64).sin() / den_a;
    let v_b = -(k * (n_a + n_c + 1) as f64).sin() / den_b;
    Ok((v_a, v_b))
}

/// `(sin(k (N_a + 1)), sin(k (N_a + N_c)))`, rejecting vanishing values.
fn denominators(k: f64, n_a: usize, n_c: usize) -> Result<(f64, f64)> {
    let den_a = (k * (n_a + 1) as f64).sin();
    if den_a.abs() < DENOMINATOR_TOL {
        return Err(Error::PotentialUndefined { which: "V_A", denominator: den_a });
    }
    let den_b = (k * (n_a + n_c) as f64).sin();
    if den_b.abs() < DENOMINATOR_TOL {
        return Err(Error::PotentialUndefined { which: "V_B", denominator: den_b });
    }
    Ok((den_a, den_b))
}

/// Center chain of `n_c` sites with `v_a` on its first and `v_b` on its last site.
pub fn chain_effective_matrix(n_c: usize, v_a: f64, v_b: f64) -> HamiltonianMatrix {
    let mut m = DMatrix::<f64>::zeros(n_c, n_c);
    for i in 0..n_c.saturating_sub(1) {
        m[(i, i + 1)] = -1.0;
        m[(i + 1, i)] = -1.0;
    }
    if n_c > 0 {
        m[(0, 0)] += v_a;
        m[(n_c - 1, n_c - 1)] += v_b;
    }
    HamiltonianMatrix::from_real(m)
}

/// `sin(kappa (N_c + 1)) + (V_A + V_B) sin(kappa N_c) + V_A V_B sin(kappa (N_c - 1))`.
///
/// Zeros give the eigenvalues `E = -2 cos kappa` of [`chain_effective_matrix`].
pub fn chain_secular_residual(kappa: C64, n_c: usize, v_a: f64, v_b: f64) -> C64 {
    let nc = n_c as f64;
    (kappa * (nc + 1.0)).sin() + (kappa * nc).sin() * (v_a + v_b) + (kappa * (nc - 1.0)).sin() * (v_a * v_b)
}

/// The secular residual with the root potentials of wavenumber `k` substituted:
///
/// ```text
/// sin k / (sin(k (N_a + 1)) sin(k (N_a + N_c)))
///     * (sin(k (N_c - 1)) sin(kappa N_c) - sin(k N_c) sin(kappa (N_c - 1)))
///   + 2 sin(kappa N_c) (cos kappa - cos k)
/// ```
///
/// It vanishes at `kappa = k`.
pub fn chain_combined_secular_residual(k: f64, kappa: C64, n_a: usize, n_c: usize) -> Result<C64> {
    let (den_a, den_b) = denominators(k, n_a, n_c)?;
    let nc = n_c as f64;
    let prefactor = k.sin() / (den_a * den_b);
    let bracket = (kappa * nc).sin() * (k * (nc - 1.0)).sin() - (kappa * (nc - 1.0)).sin() * (k * nc).sin();
    Ok(bracket * prefactor + (kappa * nc).sin() * (kappa.cos() - k.cos()) * 2.0)
}

/// Plane-wave amplitudes of `f(j) = A e^{i kappa j} + B e^{-i kappa j}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetheAmplitudes {
    pub a: C64,
    pub b: C64,
    pub kappa: C64,
}

impl BetheAmplitudes {
    /// Amplitude at 1-based site `j`.
    pub fn evaluate(&self, j: usize) -> C64 {
        let phase = C64::i() * self.kappa * j as f64;
        self.a * phase.exp() + self.b * (-phase).exp()
    }
}

/// Eigenvector of [`chain_effective_matrix`] for eigenvalue `-2 cos k`,
/// `f(j) ∝ sin(k (N_a + j))` for `j = 1..=N_c`.
///
/// Amplitudes use `A = 1`, `B = -e^{-2 i k N_a}`. The returned vector is
/// scaled to max-abs entry 1 with its first nonzero entry positive.
pub fn chain_restricted_eigenvector(k: f64, n_a: usize, n_c: usize) -> Result<(BetheAmplitudes, DVector<f64>)> {
    denominators(k, n_a, n_c)?;
    let amplitudes = BetheAmplitudes {
        a: C64::new(1.0, 0.0),
        b: -(C64::i() * (-2.0 * k * n_a as f64)).exp(),
        kappa: C64::new(k, 0.0),
    };
    let f = DVector::from_fn(n_c, |j, _| (k * (n_a + j + 1) as f64).sin());
    Ok((amplitudes, normalize_max(f)))
}

/// Scale to max-abs entry 1 with the first non-negligible entry positive.
pub fn normalize_max(f: DVector<f64>) -> DVector<f64> {
    let max = f.amax();
    if max == 0.0 {
        return f;
    }
    let first = f.iter().copied().find(|x| x.abs() > 1e-12 * max).unwrap_or(max);
    f * (first.signum() / max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_hamiltonian;
    use std::f64::consts::{FRAC_PI_4, SQRT_2};

    #[test]
    fn fifteen_site_mode_four() {
        let (e, f) = chain_eigenpair(15, 4).unwrap();
        assert!((e + SQRT_2).abs() < 1e-14);
        assert!((f.norm() - 1.0).abs() < 1e-14);
        // center sites 6..=9 carry -(sqrt2, 1, 0, -1)/4 up to sign
        let center: Vec<f64> = (5..9).map(|j| f[j]).collect();
        let expected = [SQRT_2 / 4.0, 0.25, 0.0, -0.25];
        for (got, want) in center.iter().zip(expected) {
            assert!((got.abs() - want.abs()).abs() < 1e-14);
        }
    }

    #[test]
    fn three_site_middle_mode() {
        let (e, f) = chain_eigenpair(3, 2).unwrap();
        assert!(e.abs() < 1e-15);
        assert!((f[0] + f[2]).abs() < 1e-15 && f[1].abs() < 1e-15);
        assert!(chain_eigenpair(3, 0).is_err());
        assert!(chain_eigenpair(3, 4).is_err());
    }

    #[test]
    fn eigenpairs_satisfy_matrix_equation() {
        for n in 1..=12 {
            let h = build_hamiltonian(&open_chain(n)).unwrap().matrix().map(|z| z.re);
            for mode in 1..=n {
                let (e, f) = chain_eigenpair(n, mode).unwrap();
                assert!((&h * &f - &f * e).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn worked_example_potentials() {
        let p = ChainPartitionParams::new(5, 4, 6, FRAC_PI_4).unwrap();
        let (v_a, v_b) = chain_root_potentials(&p).unwrap();
        assert!((v_a + SQRT_2 / 2.0).abs() < 1e-12);
        assert!((v_b + SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn nodal_cut_has_no_potential() {
        let p = ChainPartitionParams::new(3, 4, 4, FRAC_PI_4).unwrap();
        assert!(matches!(chain_root_potentials(&p), Err(Error::PotentialUndefined { which: "V_A", .. })));
    }

    #[test]
    fn secular_residual_factorizes() {
        let (v_a, v_b) = (-SQRT_2 / 2.0, -SQRT_2);
        for x in [0.1, 0.7, 1.3, 2.9] {
            let kappa = C64::new(x, 0.0);
            let lhs = chain_secular_residual(kappa, 4, v_a, v_b);
            let rhs = (4.0 * x).sin() * (2.0 * x.cos() - 1.5 * SQRT_2);
            assert!((lhs.re - rhs).abs() < 1e-13 && lhs.im.abs() < 1e-15);
        }
        assert!(chain_secular_residual(C64::new(FRAC_PI_4, 0.0), 4, v_a, v_b).norm() < 1e-14);
    }

    #[test]
    fn secular_residual_open_chain_limit() {
        for n_c in 1..6 {
            for m in 1..=n_c {
                let kappa = C64::new(m as f64 * PI / (n_c + 1) as f64, 0.0);
                assert!(chain_secular_residual(kappa, n_c, 0.0, 0.0).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn combined_residual_vanishes_at_k() {
        let r = chain_combined_secular_residual(FRAC_PI_4, C64::new(FRAC_PI_4, 0.0), 5, 4).unwrap();
        assert!(r.norm() < 1e-12);
        let off = chain_combined_secular_residual(FRAC_PI_4, C64::new(FRAC_PI_4 / 2.0, 0.0), 5, 4).unwrap();
        assert!(off.norm() > 1e-3);
        assert!(chain_combined_secular_residual(FRAC_PI_4, C64::new(0.3, 0.0), 3, 4).is_err());
    }

    #[test]
    fn restricted_eigenvector_of_worked_example() {
        let (amps, f) = chain_restricted_eigenvector(FRAC_PI_4, 5, 4).unwrap();
        let expected = DVector::from_vec(vec![1.0, 1.0 / SQRT_2, 0.0, -1.0 / SQRT_2]);
        assert!((&f - expected).norm() < 1e-14);
        // B/A = -e^{-2ikN_a}; the plane waves reproduce f up to a global phase
        let ratio = amps.evaluate(1) / f[0];
        for j in 0..4 {
            assert!((amps.evaluate(j + 1) - ratio * f[j]).norm() < 1e-12);
        }
    }

    #[test]
    fn partition_layout() {
        let (spec, p) = chain_partition(5, 4, 6).unwrap();
        assert_eq!(spec.n_nodes, 15);
        assert_eq!(p.center, vec![5, 6, 7, 8]);
        assert_eq!(p.branches[0].root, 5);
        assert_eq!(p.branches[1].root, 8);
        assert!(crate::graph::validate_partition(&spec, &p).is_valid());
        assert!(chain_partition(0, 4, 6).is_err());
    }
}
