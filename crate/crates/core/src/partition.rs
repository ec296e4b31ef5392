//! Projection of a partitioned graph onto its center.
//!
//! Each branch couples to the center through a single root node, so eliminating
//! it leaves one energy-dependent scalar on the diagonal at that root:
//!
//! ```text
//! Sigma(E) = sum_{j,j'} g_j conj(g_j') [(E - H_branch)^-1]_{j j'}
//! ```
//!
//! where `g_j = H[root][j]`. The projected center matrix is
//! `Hbar_c(E) = H_c + sum_b Sigma_b(E) |root_b><root_b|`, and every full
//! eigenpair `(E, f)` with nonsingular branches satisfies
//! `Hbar_c(E) f_c = E f_c`.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::graph::{build_hamiltonian, extract_block, validate_partition, GraphSpec, HamiltonianMatrix, Partition, C64};
use crate::numerics::{self, eig_hermitian, resolvent_solve};

/// Residual tolerance for a consistent eigenpair.
pub const DEFAULT_RESIDUAL_TOL: f64 = 1e-8;
/// Root amplitudes below this fraction of `||f||` count as nodes.
pub const ROOT_AMPLITUDE_TOL: f64 = 1e-8;
/// Absolute floor on the root amplitude used as a divisor.
const MIN_ROOT_AMPLITUDE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelfEnergy {
    pub root: usize,
    pub energy: C64,
    pub value: C64,
}

/// `sum_{j,j'} g_j conj(g_j') [(E - H_branch)^-1]_{j j'}` via one linear solve.
///
/// `couplings` index into the rows of `h_branch`.
pub fn branch_self_energy(h_branch: &HamiltonianMatrix, couplings: &[(usize, C64)], energy: C64) -> Result<C64> {
    let rhs = coupling_column(h_branch.dim(), couplings)?;
    let x = resolvent_solve(h_branch, energy, &rhs)?;
    Ok(couplings.iter().map(|&(j, g)| g * x[j]).sum())
}

/// The column `H_ac e_root`, whose entries are `conj(g_j)`.
fn coupling_column(n: usize, couplings: &[(usize, C64)]) -> Result<DVector<C64>> {
    let mut col = DVector::<C64>::zeros(n);
    for &(j, g) in couplings {
        if j >= n {
            return Err(Error::IndexOutOfRange { index: j, len: n });
        }
        col[j] += g.conj();
    }
    Ok(col)
}

/// Root potential from amplitudes: `(sum_j g_j f_branch[j]) / f_root`.
pub fn self_energy_from_state(couplings: &[(usize, C64)], f_branch: &[C64], f_root: C64) -> Result<C64> {
    if f_root.norm() <= MIN_ROOT_AMPLITUDE {
        return Err(Error::ZeroRootAmplitude { amplitude: f_root.norm() });
    }
    let mut sum = C64::default();
    for &(j, g) in couplings {
        let f = f_branch.get(j).ok_or(Error::IndexOutOfRange { index: j, len: f_branch.len() })?;
        sum += g * f;
    }
    Ok(sum / f_root)
}

#[derive(Debug, Clone)]
struct BranchBlock {
    sites: Vec<usize>,
    root: usize,
    /// Position of the root inside the center list.
    root_pos: usize,
    h: HamiltonianMatrix,
    /// `(local site, H[root][site])`
    couplings: Vec<(usize, C64)>,
}

impl BranchBlock {
    fn coupling_column(&self) -> DVector<C64> {
        coupling_column(self.h.dim(), &self.couplings).expect("local indices are in range")
    }
}

/// A validated graph plus partition with the blocks needed for projection.
#[derive(Debug, Clone)]
pub struct Projection {
    full: HamiltonianMatrix,
    center: Vec<usize>,
    h_center: HamiltonianMatrix,
    branches: Vec<BranchBlock>,
}

impl Projection {
    pub fn new(spec: &GraphSpec, partition: &Partition) -> Result<Self> {
        let full = build_hamiltonian(spec)?;
        let report = validate_partition(spec, partition);
        if !report.is_valid() {
            return Err(Error::InvalidPartition(report));
        }
        let center = partition.center.clone();
        let h_center = extract_block(&full, &center, &center)?;
        let pos: HashMap<usize, usize> = center.iter().enumerate().map(|(i, &n)| (n, i)).collect();
        let branches = partition
            .branches
            .iter()
            .map(|b| {
                let h = extract_block(&full, &b.sites, &b.sites)?;
                let couplings = b
                    .sites
                    .iter()
                    .enumerate()
                    .map(|(local, &s)| (local, full.get(b.root, s)))
                    .filter(|(_, g)| *g != C64::default())
                    .collect();
                Ok(BranchBlock { sites: b.sites.clone(), root: b.root, root_pos: pos[&b.root], h, couplings })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { full, center, h_center, branches })
    }

    pub fn full_hamiltonian(&self) -> &HamiltonianMatrix {
        &self.full
    }

    pub fn center_hamiltonian(&self) -> &HamiltonianMatrix {
        &self.h_center
    }

    pub fn center(&self) -> &[usize] {
        &self.center
    }

    pub fn branch_count(&self) -> usize {
        self.branches.len()
    }

    /// Branch Hamiltonian block in the branch's site order.
    pub fn branch_hamiltonian(&self, branch: usize) -> &HamiltonianMatrix {
        &self.branches[branch].h
    }

    /// Couplings of a branch as `(local site, H[root][site])`.
    pub fn branch_couplings(&self, branch: usize) -> &[(usize, C64)] {
        &self.branches[branch].couplings
    }

    /// One self-energy per branch, in partition order.
    pub fn self_energies(&self, energy: C64) -> Result<Vec<SelfEnergy>> {
        self.branches
            .iter()
            .enumerate()
            .map(|(i, b)| {
                let value = branch_self_energy(&b.h, &b.couplings, energy).map_err(|e| branch_error(e, i, b.root))?;
                Ok(SelfEnergy { root: b.root, energy, value })
            })
            .collect()
    }

    /// `Hbar_c(E)` in center order.
    pub fn effective_hamiltonian(&self, energy: C64) -> Result<HamiltonianMatrix> {
        let mut m = self.h_center.matrix().clone();
        for (b, se) in self.branches.iter().zip(self.self_energies(energy)?) {
            m[(b.root_pos, b.root_pos)] += se.value;
        }
        Ok(HamiltonianMatrix::new(m))
    }

    /// Full-graph vector with branch amplitudes `(E - H_b)^-1 H_bc f_c` and
    /// center entries copied from `f_center`.
    pub fn reconstruct(&self, energy: C64, f_center: &DVector<C64>) -> Result<DVector<C64>> {
        if f_center.len() != self.center.len() {
            return Err(Error::DimensionMismatch { expected: self.center.len(), found: f_center.len() });
        }
        let mut full = DVector::<C64>::zeros(self.full.dim());
        for (i, &node) in self.center.iter().enumerate() {
            full[node] = f_center[i];
        }
        for (i, b) in self.branches.iter().enumerate() {
            let rhs = b.coupling_column() * f_center[b.root_pos];
            let amps = resolvent_solve(&b.h, energy, &rhs).map_err(|e| branch_error(e, i, b.root))?;
            for (local, &site) in b.sites.iter().enumerate() {
                full[site] = amps[local];
            }
        }
        Ok(full)
    }

    pub fn verify(&self, tol: f64) -> Result<ConsistencyReport> {
        let spectrum = eig_hermitian(&self.full)?;
        let mut entries = Vec::with_capacity(spectrum.len());
        for k in 0..spectrum.len() {
            let energy = spectrum.eigenvalues[k].re;
            let f = spectrum.eigenvector(k);
            let norm = f.norm();
            let nodal = self.branches.iter().any(|b| f[b.root].norm() < ROOT_AMPLITUDE_TOL * norm);
            let (status, residual) = if nodal {
                (ConsistencyStatus::SkippedZeroRootAmplitude, None)
            } else {
                match self.effective_hamiltonian(C64::new(energy, 0.0)) {
                    Ok(hbar) => {
                        let fc = DVector::from_fn(self.center.len(), |i, _| f[self.center[i]]);
                        let r = (hbar.matrix() * &fc - &fc * C64::new(energy, 0.0)).norm() / fc.norm();
                        let status = if r <= tol { ConsistencyStatus::Consistent } else { ConsistencyStatus::Inconsistent };
                        (status, Some(r))
                    }
                    Err(Error::SingularBranch { .. }) => (ConsistencyStatus::SkippedSingularBranch, None),
                    Err(e) => return Err(e),
                }
            };
            entries.push(ConsistencyEntry { index: k, energy, residual, status });
        }
        Ok(ConsistencyReport { entries, tolerance: tol })
    }

    /// Real energies `E` in `[e_min, e_max]` at which `E` is an eigenvalue of `Hbar_c(E)`.
    ///
    /// Between branch poles the eigenvalues of `E - Hbar_c(E)` increase
    /// strictly with `E`, so the number of negative ones only drops, and each
    /// drop marks a root. Drops inside a grid cell are located by bisection on
    /// that count. Windows of `10 tol` around coupled branch eigenvalues are
    /// skipped; a root sitting exactly on a pole (zero root amplitude) is
    /// detected separately by pinning the root amplitude to zero.
    pub fn center_eigenvalues(&self, e_min: f64, e_max: f64, grid: usize, tol: f64) -> Result<CenterEigenvalues> {
        if e_min.is_nan() || e_max.is_nan() || e_min >= e_max || grid == 0 || tol.is_nan() || tol <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "need e_min < e_max, grid > 0, tol > 0 (got {e_min}, {e_max}, {grid}, {tol})"
            )));
        }
        if !self.full.is_hermitian() {
            return Err(Error::NotHermitian { deviation: self.full.hermitian_deviation() });
        }
        let window = 10.0 * tol;
        let poles = self.coupled_poles(e_min - window, e_max + window)?;
        let scale = self.h_center.frobenius_norm().max(1.0);
        let accept = (1e3 * tol).max(1e-9) * scale;

        let mut cache: HashMap<u64, usize> = HashMap::new();
        let mut count = |e: f64| -> Result<usize> {
            if let Some(&c) = cache.get(&e.to_bits()) {
                return Ok(c);
            }
            let c = self.count_above(e, tol)?;
            cache.insert(e.to_bits(), c);
            Ok(c)
        };

        let step = (e_max - e_min) / grid as f64;
        let mut energies = Vec::new();
        let mut advisories = Vec::new();
        for cell in 0..grid {
            let a = e_min + step * cell as f64;
            let b = if cell + 1 == grid { e_max } else { e_min + step * (cell + 1) as f64 };
            let mut cell_roots = Vec::new();
            for (lo, hi) in subtract_windows(a, b, &poles, window) {
                let (c_lo, c_hi) = (count(lo)?, count(hi)?);
                if c_lo <= c_hi {
                    continue;
                }
                for m in 1..=(c_lo - c_hi) {
                    let target = c_lo - m;
                    let (mut l, mut h) = (lo, hi);
                    for _ in 0..100 {
                        if h - l <= tol {
                            break;
                        }
                        let mid = 0.5 * (l + h);
                        if count(mid)? <= target {
                            h = mid;
                        } else {
                            l = mid;
                        }
                    }
                    let root = 0.5 * (l + h);
                    if poles.iter().all(|p| (root - p.energy).abs() > 2.0 * window) {
                        cell_roots.push(root);
                    }
                }
            }
            let distinct = dedup_sorted(cell_roots, tol);
            if distinct.len() > 1 {
                advisories.push(GridAdvisory { cell: (a, b), roots: distinct.len() });
            }
            energies.extend(distinct);
        }

        let mut pole_energies: Vec<f64> = poles.iter().map(|p| p.energy).filter(|&p| p >= e_min && p <= e_max).collect();
        pole_energies.sort_by(f64::total_cmp);
        for p in dedup_sorted(pole_energies, window) {
            if let Some(s) = self.pinned_min_singular(p, &poles, window)? {
                if s <= accept {
                    energies.push(p);
                }
            }
        }

        energies.sort_by(f64::total_cmp);
        Ok(CenterEigenvalues { energies: dedup_sorted(energies, tol), advisories })
    }

    /// Branch eigenvalues in `[lo, hi]` whose eigenspace overlaps the coupling vector.
    fn coupled_poles(&self, lo: f64, hi: f64) -> Result<Vec<Pole>> {
        let mut poles = Vec::new();
        for (i, b) in self.branches.iter().enumerate() {
            let spectrum = eig_hermitian(&b.h)?;
            let col = b.coupling_column();
            let threshold = (1e-10 * col.norm()).powi(2);
            for members in numerics::cluster_indices(&spectrum.eigenvalues, 1e-9) {
                let energy = members.iter().map(|&k| spectrum.eigenvalues[k].re).sum::<f64>() / members.len() as f64;
                if energy < lo || energy > hi {
                    continue;
                }
                let residue: f64 = members.iter().map(|&k| spectrum.eigenvector(k).dotc(&col).norm_sqr()).sum();
                if residue > threshold {
                    poles.push(Pole { energy, branch: i });
                }
            }
        }
        Ok(poles)
    }

    /// Real diagonal self-energies at real `e`; exact for Hermitian branches.
    fn real_center_matrix(&self, e: f64, skip: &[usize]) -> Result<DMatrix<f64>> {
        let mut m = self.h_center.matrix().map(|z| z.re);
        for (i, b) in self.branches.iter().enumerate() {
            if skip.contains(&i) {
                continue;
            }
            let se = branch_self_energy(&b.h, &b.couplings, C64::new(e, 0.0)).map_err(|err| branch_error(err, i, b.root))?;
            m[(b.root_pos, b.root_pos)] += se.re;
        }
        Ok(m)
    }

    /// Number of eigenvalues of `Hbar_c(e)` above `e`. Energies that hit a
    /// decoupled branch eigenvalue are nudged off it in growing steps.
    fn count_above(&self, e: f64, tol: f64) -> Result<usize> {
        let unit = tol.max(1e-10);
        let mut last = None;
        for nudge in [0.0, 0.25, -0.25, 10.0, -10.0, 100.0, -100.0] {
            let x = e + nudge * unit;
            match self.real_center_matrix(x, &[]) {
                Ok(m) => return Ok(numerics::hermitian_eigenvalues(&m).iter().filter(|&&l| l > x).count()),
                Err(err @ Error::SingularBranch { .. }) => last = Some(err),
                Err(err) => return Err(err),
            }
        }
        Err(last.expect("at least one attempt"))
    }

    /// Smallest `|eigenvalue|` of `p - Hbar_c(p)` with the roots of every
    /// branch that has a pole at `p` removed from the center.
    fn pinned_min_singular(&self, p: f64, poles: &[Pole], window: f64) -> Result<Option<f64>> {
        let polar: Vec<usize> = poles.iter().filter(|q| (q.energy - p).abs() <= window).map(|q| q.branch).collect();
        let mut pinned: Vec<usize> = polar.iter().map(|&b| self.branches[b].root_pos).collect();
        pinned.sort_unstable();
        pinned.dedup();
        let keep: Vec<usize> = (0..self.center.len()).filter(|i| !pinned.contains(i)).collect();
        if keep.is_empty() {
            return Ok(None);
        }
        let skip: Vec<usize> = self
            .branches
            .iter()
            .enumerate()
            .filter(|(i, b)| polar.contains(i) || pinned.contains(&b.root_pos))
            .map(|(i, _)| i)
            .collect();
        let m = match self.real_center_matrix(p, &skip) {
            Ok(m) => m,
            Err(Error::SingularBranch { .. }) => return Ok(None),
            Err(e) => return Err(e),
        };
        let reduced = DMatrix::from_fn(keep.len(), keep.len(), |r, c| m[(keep[r], keep[c])]);
        let eigs = numerics::hermitian_eigenvalues(&reduced);
        Ok(eigs.iter().map(|l| (p - l).abs()).reduce(f64::min))
    }
}

#[derive(Debug, Clone, Copy)]
struct Pole {
    energy: f64,
    branch: usize,
}

fn branch_error(e: Error, branch: usize, root: usize) -> Error {
    match e {
        Error::SingularResolvent { rcond } => Error::SingularBranch { branch, root, rcond },
        other => other,
    }
}

/// `[a, b]` minus the union of `[p - w, p + w]`, as closed sub-intervals.
fn subtract_windows(a: f64, b: f64, poles: &[Pole], w: f64) -> Vec<(f64, f64)> {
    let mut cuts: Vec<(f64, f64)> = poles
        .iter()
        .map(|p| (p.energy - w, p.energy + w))
        .filter(|&(lo, hi)| hi > a && lo < b)
        .collect();
    cuts.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut out = Vec::new();
    let mut start = a;
    for (lo, hi) in cuts {
        if lo > start {
            out.push((start, lo));
        }
        start = start.max(hi);
    }
    if start < b {
        out.push((start, b));
    }
    out
}

fn dedup_sorted(mut values: Vec<f64>, tol: f64) -> Vec<f64> {
    values.sort_by(f64::total_cmp);
    let mut out: Vec<f64> = Vec::with_capacity(values.len());
    for v in values {
        if out.last().is_none_or(|&last| v - last > tol) {
            out.push(v);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConsistencyStatus {
    Consistent,
    /// Residual above tolerance: the projection failed to reproduce this pair.
    Inconsistent,
    SkippedZeroRootAmplitude,
    SkippedSingularBranch,
}

impl ConsistencyStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            ConsistencyStatus::Consistent => "Consistent",
            ConsistencyStatus::Inconsistent => "Inconsistent",
            ConsistencyStatus::SkippedZeroRootAmplitude => "SkippedZeroRootAmplitude",
            ConsistencyStatus::SkippedSingularBranch => "SkippedSingularBranch",
        }
    }

    pub fn is_skipped(self) -> bool {
        matches!(self, ConsistencyStatus::SkippedZeroRootAmplitude | ConsistencyStatus::SkippedSingularBranch)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyEntry {
    /// Position in the ascending full spectrum.
    pub index: usize,
    pub energy: f64,
    /// `||Hbar_c(E) f_c - E f_c|| / ||f_c||`, absent for skipped pairs.
    pub residual: Option<f64>,
    pub status: ConsistencyStatus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyReport {
    pub entries: Vec<ConsistencyEntry>,
    pub tolerance: f64,
}

impl ConsistencyReport {
    pub fn all_consistent(&self) -> bool {
        self.entries.iter().all(|e| e.status != ConsistencyStatus::Inconsistent)
    }

    pub fn max_residual(&self) -> f64 {
        self.entries.iter().filter_map(|e| e.residual).fold(0.0, f64::max)
    }

    pub fn count(&self, status: ConsistencyStatus) -> usize {
        self.entries.iter().filter(|e| e.status == status).count()
    }
}

/// Several distinct roots were found inside one grid cell.
#[derive(Debug, Clone, PartialEq)]
pub struct GridAdvisory {
    pub cell: (f64, f64),
    pub roots: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CenterEigenvalues {
    pub energies: Vec<f64>,
    /// Grid-too-coarse notices; the roots were still resolved.
    pub advisories: Vec<GridAdvisory>,
}

pub fn effective_hamiltonian(spec: &GraphSpec, p: &Partition, energy: C64) -> Result<HamiltonianMatrix> {
    Projection::new(spec, p)?.effective_hamiltonian(energy)
}

pub fn reconstruct_branch_amplitudes(spec: &GraphSpec, p: &Partition, energy: C64, f_center: &DVector<C64>) -> Result<DVector<C64>> {
    Projection::new(spec, p)?.reconstruct(energy, f_center)
}

pub fn verify_projection(spec: &GraphSpec, p: &Partition) -> Result<ConsistencyReport> {
    Projection::new(spec, p)?.verify(DEFAULT_RESIDUAL_TOL)
}

pub fn find_center_eigenvalues(spec: &GraphSpec, p: &Partition, e_min: f64, e_max: f64, grid: usize, tol: f64) -> Result<CenterEigenvalues> {
    Projection::new(spec, p)?.center_eigenvalues(e_min, e_max, grid, tol)
}
