//! Ring scattering center of `2N` sites fed by two semi-infinite leads.
//!
//! Ring sites are `1..=2N` in the formulas (`0..2N` in memory). Sites `1`
//! and `N + 1` carry the on-site potential `-V` and attach to the input and
//! output lead through a hopping `-sqrt(2)`. Leads are uniform chains with
//! hopping `-1`. At incident energy `E = V = -2 cos k` the leads reduce to
//! the root potentials `-2 e^{-ik}` (input) and `-2 e^{ik}` (output), and
//! the center matrix becomes PT symmetric with gain and loss `±2i sin k`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::graph::{build_hamiltonian, GraphSpec, HamiltonianMatrix, C64};
use crate::numerics::{eig_general, refine_clusters, EigenCluster, Spectrum};

/// Threshold on `||P conj(M) P - M||_max` for [`pt_check`].
pub const PT_TOL: f64 = 1e-12;
/// Eigenvalues closer than this are merged into one cluster before refinement.
pub const CLUSTER_TOL: f64 = 1e-4;
/// Lead coupling to the ring.
pub const LEAD_COUPLING: f64 = -std::f64::consts::SQRT_2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RingParams {
    /// Half the number of ring sites.
    pub n: usize,
    pub k: f64,
}

impl RingParams {
    pub fn new(n: usize, k: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("ring half-size must be positive".into()));
        }
        if !(k > 0.0 && k < PI) {
            return Err(Error::InvalidParameter(format!("wavenumber {k} outside (0, pi)")));
        }
        Ok(Self { n, k })
    }

    /// Incident energy, equal to the potential on the two lead sites.
    pub fn v(&self) -> f64 {
        -2.0 * self.k.cos()
    }

    pub fn ring_size(&self) -> usize {
        2 * self.n
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LeadSide {
    Input,
    Output,
}

/// `-2 e^{-ik}` for the input lead, `-2 e^{ik}` for the output lead.
pub fn lead_self_energy(k: f64, side: LeadSide) -> C64 {
    let phase = match side {
        LeadSide::Input => -k,
        LeadSide::Output => k,
    };
    -2.0 * C64::from_polar(1.0, phase)
}

/// Exact scattering state at `E = V`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatteringState {
    pub params: RingParams,
    /// Ring amplitudes, sites `1..=2N` stored at `0..2N`.
    pub center: DVector<C64>,
}

impl ScatteringState {
    /// Input lead amplitude at site `l <= -1`: `e^{ik(l+1)}`.
    pub fn input_lead(&self, l: i64) -> C64 {
        C64::from_polar(1.0, self.params.k * (l + 1) as f64)
    }

    /// Output lead amplitude at site `l >= 1`: `e^{ik(l+N+1)}`.
    pub fn output_lead(&self, l: i64) -> C64 {
        C64::from_polar(1.0, self.params.k * (l + self.params.n as i64 + 1) as f64)
    }

    /// Ring amplitude at 1-based site `l`.
    pub fn ring(&self, l: usize) -> C64 {
        self.center[l - 1]
    }
}

pub fn ring_scattering_state(params: RingParams) -> ScatteringState {
    let size = params.ring_size();
    let center = DVector::from_fn(size, |i, _| {
        let l = i + 1;
        let l = if l <= params.n + 1 { l } else { size + 2 - l };
        C64::from_polar(FRAC_1_SQRT_2, params.k * l as f64)
    });
    ScatteringState { params, center }
}

/// Ring with hoppings `-1` and `-V` on the two lead sites, leads removed.
pub fn ring_center_graph(params: RingParams) -> GraphSpec {
    let size = params.ring_size();
    let mut g = GraphSpec::new(size);
    match size {
        // The wraparound edge of a 2-site ring coincides with the direct one.
        2 => g.add_hopping(0, 1, -2.0),
        _ => {
            for i in 0..size {
                g.add_hopping(i, (i + 1) % size, -1.0);
            }
        }
    }
    g.add_onsite(0, -params.v());
    g.add_onsite(params.n, -params.v());
    g
}

/// Center matrix with `+2i sin k` at site 1 and `-2i sin k` at site `N + 1`.
pub fn ring_effective_hamiltonian(params: RingParams) -> HamiltonianMatrix {
    let size = params.ring_size();
    let mut m = DMatrix::<C64>::zeros(size, size);
    for i in 0..size {
        let j = (i + 1) % size;
        m[(i, j)] -= C64::new(1.0, 0.0);
        m[(j, i)] -= C64::new(1.0, 0.0);
    }
    let gain = C64::new(0.0, 2.0 * params.k.sin());
    m[(0, 0)] += gain;
    m[(params.n, params.n)] -= gain;
    HamiltonianMatrix::new(m)
}

/// `{-2 cos(j pi / N)` twice for `j = 1..N-1`} plus `{V, -V}`, sorted ascending.
pub fn ring_analytic_spectrum(params: RingParams) -> Vec<f64> {
    let n = params.n as f64;
    let mut values: Vec<f64> = (1..params.n).flat_map(|j| [-2.0 * (j as f64 * PI / n).cos(); 2]).collect();
    values.push(params.v());
    values.push(-params.v());
    values.sort_by(f64::total_cmp);
    values
}

/// Eigen-decomposition of [`ring_effective_hamiltonian`].
///
/// At `k = j pi / N` the levels `±V` collide with band values and the matrix
/// becomes defective. Near-coincident eigenvalues are replaced by their
/// cluster mean and the cluster's eigenvectors by an orthonormal null-space
/// basis; the returned clusters tell which levels were merged.
pub fn ring_effective_spectrum(params: RingParams) -> Result<(Spectrum, Vec<EigenCluster>)> {
    let m = ring_effective_hamiltonian(params);
    let raw = eig_general(&m)?;
    refine_clusters(&m, &raw, CLUSTER_TOL)
}

/// `sin(kappa N) (sin^2 kappa - sin^2 k)`.
pub fn ring_secular_residual(kappa: f64, k: f64, n: usize) -> f64 {
    (kappa * n as f64).sin() * (kappa.sin().powi(2) - k.sin().powi(2))
}

/// Permutation reflecting ring sites about the axis through `axis_site`
/// (0-based) and its antipode, `j -> 2 axis - j (mod size)`.
pub fn mirror_permutation(size: usize, axis_site: usize) -> Vec<usize> {
    (0..size).map(|j| (2 * axis_site + 2 * size - j) % size).collect()
}

/// Parity about the axis between `axis_site` and its antipode:
/// `j -> 2 axis + N - j (mod 2N)`, which swaps the two lead sites when
/// `axis_site` is the first of them.
pub fn parity_permutation(size: usize, axis_site: usize) -> Vec<usize> {
    let half = size / 2;
    (0..size).map(|j| (2 * axis_site + half + 2 * size - j) % size).collect()
}

/// True when `P conj(M) P = M` within [`PT_TOL`] for the parity of
/// [`parity_permutation`].
pub fn pt_check(m: &HamiltonianMatrix, axis_site: usize) -> Result<bool> {
    Ok(pt_deviation(m, axis_site)? < PT_TOL)
}

/// `||P conj(M) P - M||_max`.
pub fn pt_deviation(m: &HamiltonianMatrix, axis_site: usize) -> Result<f64> {
    let size = m.nrows();
    if m.ncols() != size {
        return Err(Error::DimensionMismatch { expected: size, found: m.ncols() });
    }
    if size == 0 || !size.is_multiple_of(2) {
        return Err(Error::DimensionMismatch { expected: size + size % 2, found: size });
    }
    if axis_site >= size {
        return Err(Error::IndexOutOfRange { index: axis_site, len: size });
    }
    Ok(permuted_deviation(m.matrix(), &parity_permutation(size, axis_site), true))
}

/// `||P M P - M||_max`, with `M` conjugated first when `conjugate` is set.
pub fn permuted_deviation(m: &DMatrix<C64>, perm: &[usize], conjugate: bool) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let mut v = m[(perm[i], perm[j])];
            if conjugate {
                v = v.conj();
            }
            worst = worst.max((v - m[(i, j)]).norm());
        }
    }
    worst
}

/// Assembles the full ring plus `lead_len` sites on each lead as one graph.
///
/// Node order: ring sites `0..2N`, input lead sites `-1, -2, ...`, then output
/// lead sites `1, 2, ...`.
pub fn ring_with_leads(params: RingParams, lead_len: usize) -> GraphSpec {
    let size = params.ring_size();
    let ring = ring_center_graph(params);
    let mut g = GraphSpec::new(size + 2 * lead_len);
    for h in ring.hoppings {
        g.add_hopping(h.i, h.j, h.t);
    }
    for o in ring.onsites {
        g.add_onsite(o.i, o.v);
    }
    let input = |l: usize| size + l;
    let output = |l: usize| size + lead_len + l;
    if lead_len > 0 {
        g.add_hopping(0, input(0), LEAD_COUPLING);
        g.add_hopping(params.n, output(0), LEAD_COUPLING);
    }
    for l in 0..lead_len.saturating_sub(1) {
        g.add_hopping(input(l), input(l + 1), -1.0);
        g.add_hopping(output(l), output(l + 1), -1.0);
    }
    g
}

/// Largest `|(H f - E f)_r|` over rows whose neighbours all lie inside the
/// truncated graph of [`ring_with_leads`].
pub fn scattering_row_residual(params: RingParams, lead_len: usize) -> Result<f64> {
    let spec = ring_with_leads(params, lead_len);
    let h = build_hamiltonian(&spec)?;
    let state = ring_scattering_state(params);
    let size = params.ring_size();
    let f = DVector::from_fn(spec.n_nodes, |i, _| {
        if i < size {
            state.center[i]
        } else if i < size + lead_len {
            state.input_lead(-((i - size) as i64) - 1)
        } else {
            state.output_lead((i - size - lead_len) as i64 + 1)
        }
    });
    let r = h.matrix() * &f - &f * C64::new(params.v(), 0.0);
    let interior = |i: usize| {
        i < size || (i < size + lead_len && i + 1 < size + lead_len) || (i >= size + lead_len && i + 1 < size + 2 * lead_len)
    };
    Ok((0..spec.n_nodes).filter(|&i| interior(i)).map(|i| r[i].norm()).fold(0.0, f64::max))
}

/// Largest `|found_i - expected_i|` after sorting both by real part.
///
/// `None` when the lengths differ.
pub fn max_pairing_error(found: &[C64], expected: &[f64]) -> Option<f64> {
    if found.len() != expected.len() {
        return None;
    }
    let mut f = found.to_vec();
    f.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    let mut e = expected.to_vec();
    e.sort_by(f64::total_cmp);
    Some(f.iter().zip(&e).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max))
}

/// Numerical spectrum of the effective ring matrix checked against the
/// closed forms.
#[derive(Debug, Clone)]
pub struct RingCheck {
    pub spectrum: Spectrum,
    pub clusters: Vec<EigenCluster>,
    pub analytic: Vec<f64>,
    /// `None` if the multisets have different sizes.
    pub pairing_error: Option<f64>,
    pub max_imag: f64,
    pub pt_deviation: f64,
    /// Max-norm distance of the unit `e^{ikj}` profile from the computed
    /// eigenspace of `V`, which is the phase-aligned difference when that
    /// eigenspace is one-dimensional.
    pub plus_vector_error: f64,
}

impl RingCheck {
    pub fn defective_clusters(&self) -> usize {
        self.clusters.iter().filter(|c| c.is_defective()).count()
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.pairing_error.is_some_and(|e| e <= tol)
            && self.max_imag <= tol
            && self.pt_deviation < PT_TOL
            && self.plus_vector_error <= tol
    }
}

pub fn ring_check(params: RingParams) -> Result<RingCheck> {
    let m = ring_effective_hamiltonian(params);
    let (spectrum, clusters) = ring_effective_spectrum(params)?;
    let analytic = ring_analytic_spectrum(params);
    let pairing_error = max_pairing_error(&spectrum.eigenvalues, &analytic);
    let pt = pt_deviation(&m, 0)?;

    let v = C64::new(params.v(), 0.0);
    let cluster = clusters
        .iter()
        .min_by(|a, b| (a.mean - v).norm().total_cmp(&(b.mean - v).norm()))
        .ok_or(Error::InvalidParameter("empty spectrum".into()))?;
    let rank = cluster.geometric_multiplicity.clamp(1, cluster.indices.len());
    let basis = DMatrix::from_fn(m.dim(), rank, |r, c| spectrum.eigenvectors[(r, cluster.indices[c])]);
    let q = basis.qr().q();
    let f = ring_scattering_state(params).center;
    let f = &f / C64::new(f.norm(), 0.0);
    let residual = &f - &q * (q.adjoint() * &f);
    let plus_vector_error = residual.iter().map(|z| z.norm()).fold(0.0, f64::max);

    Ok(RingCheck { max_imag: spectrum.max_imag(), spectrum, clusters, analytic, pairing_error, pt_deviation: pt, plus_vector_error })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Branch, Partition};
    use crate::partition::branch_self_energy;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, FRAC_PI_4};

    #[test]
    fn lead_values() {
        assert!((lead_self_energy(FRAC_PI_2, LeadSide::Input) - C64::new(0.0, 2.0)).norm() < 1e-15);
        for k in [0.1, 0.9, 2.0, 3.0] {
            let a = lead_self_energy(k, LeadSide::Input);
            let b = lead_self_energy(k, LeadSide::Output);
            assert!((a.conj() - b).norm() < 1e-15);
        }
    }

    /// Self-energy of an `len`-site lead by the continued fraction
    /// `G_1 = 1 / (E - G_2)`, `G_len = 1 / E`.
    fn continued_fraction_lead(e: C64, len: usize) -> C64 {
        let mut g = C64::default();
        for _ in 0..len {
            g = (e - g).inv();
        }
        g * LEAD_COUPLING * LEAD_COUPLING
    }

    #[test]
    fn long_truncated_lead_approaches_closed_form() {
        let eta = 1e-3;
        for k in [PI / 5.0, FRAC_PI_4, FRAC_PI_3] {
            let e = -2.0 * k.cos();
            let plus = continued_fraction_lead(C64::new(e, eta), 20000);
            let minus = continued_fraction_lead(C64::new(e, -eta), 20000);
            assert!((plus - lead_self_energy(k, LeadSide::Output)).norm() < 5e-3);
            assert!((minus - lead_self_energy(k, LeadSide::Input)).norm() < 5e-3);
        }
    }

    #[test]
    fn continued_fraction_matches_dense_branch() {
        let len = 40;
        let mut g = GraphSpec::new(len);
        for i in 0..len - 1 {
            g.add_hopping(i, i + 1, -1.0);
        }
        let h = build_hamiltonian(&g).unwrap();
        let e = C64::new(0.7, 0.05);
        let dense = branch_self_energy(&h, &[(0, C64::new(LEAD_COUPLING, 0.0))], e).unwrap();
        assert!((dense - continued_fraction_lead(e, len)).norm() < 1e-12);
    }

    #[test]
    fn scattering_state_shape() {
        let p = RingParams::new(3, 0.7).unwrap();
        let s = ring_scattering_state(p);
        assert!((s.ring(1) - C64::from_polar(FRAC_1_SQRT_2, 0.7)).norm() < 1e-15);
        assert!((s.input_lead(-1) - C64::new(1.0, 0.0)).norm() < 1e-15);
        assert_eq!(s.ring(p.n + 2), s.ring(p.n));
        for l in 1..=p.ring_size() {
            assert!((s.ring(l).norm() - FRAC_1_SQRT_2).abs() < 1e-15);
            assert_eq!(s.ring(l), s.ring((2 * p.ring_size() + 2 - l - 1) % p.ring_size() + 1));
        }
    }

    #[test]
    fn scattering_state_solves_row_equations() {
        for n in 1..=6 {
            for k in [0.3, FRAC_PI_4, 1.2, FRAC_PI_2, 2.5] {
                let r = scattering_row_residual(RingParams::new(n, k).unwrap(), 50).unwrap();
                assert!(r < 1e-12, "N={n} k={k}: {r}");
            }
        }
    }

    #[test]
    fn effective_matrix_small_case() {
        let m = ring_effective_hamiltonian(RingParams::new(2, FRAC_PI_3).unwrap());
        let s3 = 3f64.sqrt();
        let diag = [C64::new(0.0, s3), C64::default(), C64::new(0.0, -s3), C64::default()];
        for (i, d) in diag.iter().enumerate() {
            assert!((m.get(i, i) - d).norm() < 1e-14);
        }
        assert_eq!(m.get(0, 3), C64::new(-1.0, 0.0));
        assert!(!m.is_hermitian());
    }

    #[test]
    fn center_graph_with_potentials() {
        let p = RingParams { n: 2, k: (-0.25f64).acos() };
        let h = build_hamiltonian(&ring_center_graph(p)).unwrap();
        let diag: Vec<f64> = (0..4).map(|i| h.get(i, i).re).collect();
        for (got, want) in diag.iter().zip([-0.5, 0.0, -0.5, 0.0]) {
            assert!((got - want).abs() < 1e-14);
        }
        for i in 0..4 {
            assert_eq!(h.get(i, (i + 1) % 4), C64::new(-1.0, 0.0));
        }
    }

    #[test]
    fn assembly_route_matches_closed_form() {
        for n in 1..=5 {
            for k in [0.4, FRAC_PI_3, 2.2] {
                let p = RingParams::new(n, k).unwrap();
                let mut m = build_hamiltonian(&ring_center_graph(p)).unwrap().into_matrix();
                m[(0, 0)] += lead_self_energy(k, LeadSide::Input);
                m[(n, n)] += lead_self_energy(k, LeadSide::Output);
                let closed = ring_effective_hamiltonian(p);
                let diff = (m - closed.matrix()).iter().map(|z| z.norm()).fold(0.0, f64::max);
                assert!(diff < 1e-12);
            }
        }
    }

    #[test]
    fn small_ring_spectrum() {
        let (s, _) = ring_effective_spectrum(RingParams::new(2, FRAC_PI_3).unwrap()).unwrap();
        let mut re = s.real_parts();
        re.sort_by(f64::total_cmp);
        for (got, want) in re.iter().zip([-1.0, 0.0, 0.0, 1.0]) {
            assert!((got - want).abs() < 1e-9, "{re:?}");
        }
        assert!(s.max_imag() < 1e-9);
    }

    #[test]
    fn checks_pass_including_exceptional_points() {
        for n in 1..=8 {
            for k in [0.3, PI / n as f64, FRAC_PI_3, 2.0] {
                if k >= PI {
                    continue;
                }
                let c = ring_check(RingParams::new(n, k).unwrap()).unwrap();
                assert!(c.passes(1e-9), "N={n} k={k}: {c:?}");
            }
        }
    }

    #[test]
    fn pairing_error_sorts_first() {
        let found = [C64::new(1.0, 0.0), C64::new(-1.0, 1e-12)];
        assert!(max_pairing_error(&found, &[-1.0, 1.0]).unwrap() < 2e-12);
        assert!(max_pairing_error(&found, &[1.0]).is_none());
    }

    #[test]
    fn analytic_spectrum_counts() {
        let v = ring_analytic_spectrum(RingParams::new(4, 0.5).unwrap());
        assert_eq!(v.len(), 8);
    }

    #[test]
    fn secular_residual_zeros() {
        let k = 0.9;
        assert_eq!(ring_secular_residual(k, k, 5), 0.0);
        for n in 2..8 {
            for j in 1..n {
                assert!(ring_secular_residual(j as f64 * PI / n as f64, k, n).abs() < 1e-14);
            }
        }
        assert!(ring_secular_residual(k / 2.0 + 0.1, k, 5).abs() > 1e-6);
    }

    #[test]
    fn pt_symmetry() {
        for n in 1..=6 {
            let p = RingParams::new(n, 1.1).unwrap();
            assert!(pt_check(&ring_effective_hamiltonian(p), 0).unwrap());
        }
        let p = RingParams::new(3, 1.1).unwrap();
        let mut gain_only = ring_effective_hamiltonian(p).into_matrix();
        gain_only[(3, 3)] = C64::new(0.0, 2.0 * 1.1f64.sin());
        assert!(!pt_check(&HamiltonianMatrix::new(gain_only), 0).unwrap());
        let real = build_hamiltonian(&ring_center_graph(p)).unwrap();
        assert!(pt_check(&real, 0).unwrap());
        assert!(pt_check(&HamiltonianMatrix::new(DMatrix::zeros(3, 3)), 0).is_err());
        assert!(pt_check(&HamiltonianMatrix::new(DMatrix::zeros(2, 4)), 0).is_err());
    }

    #[test]
    fn parity_swaps_lead_sites() {
        let perm = parity_permutation(8, 0);
        assert_eq!(perm[0], 4);
        assert_eq!(perm[4], 0);
        // P|j> = |N+2-j> in 1-based labels
        for j in 1..=8usize {
            assert_eq!(perm[j - 1] + 1, (4 + 2 + 16 - j - 1) % 8 + 1);
        }
        let mirror = mirror_permutation(8, 0);
        assert_eq!(mirror[0], 0);
        assert_eq!(mirror[4], 4);
        assert_eq!(mirror[1], 7);
    }

    #[test]
    fn mirror_commutes_with_effective_matrix() {
        let p = RingParams::new(5, 0.8).unwrap();
        let m = ring_effective_hamiltonian(p);
        assert!(permuted_deviation(m.matrix(), &mirror_permutation(10, 0), false) < 1e-15);
    }

    #[test]
    fn partition_route_with_lead_roots() {
        // Branch self-energy of a lead stand-in reproduces the value fed in.
        let p = RingParams::new(2, 1.0).unwrap();
        let mut spec = ring_center_graph(p);
        spec.n_nodes += 2;
        spec.add_hopping(0, 4, LEAD_COUPLING);
        spec.add_hopping(2, 5, LEAD_COUPLING);
        let part = Partition::new(
            vec![0, 1, 2, 3],
            vec![Branch::from_graph(&spec, vec![4], 0), Branch::from_graph(&spec, vec![5], 2)],
        );
        let proj = crate::partition::Projection::new(&spec, &part).unwrap();
        let se = proj.self_energies(C64::new(0.3, 0.0)).unwrap();
        assert!((se[0].value - C64::new(2.0 / 0.3, 0.0)).norm() < 1e-12);
    }
}
