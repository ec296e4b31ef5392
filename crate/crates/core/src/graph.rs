//! Tight-binding graphs, their partitions into a center plus branches, and
//! dense Hamiltonian assembly.
//!
//! Matrix elements are stored as they appear in `H`: a hopping `(i, j, t)`
//! puts `t` at `H[i][j]` and `conj(t)` at `H[j][i]`. Model constructors that
//! follow the `-J` hopping convention apply the sign themselves.

use std::collections::HashSet;
use std::fmt;

use nalgebra::{Complex, DMatrix};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;

/// Tolerance on `max |H - H^dagger|` below which a matrix is flagged Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Tolerance used when comparing declared branch couplings against the graph.
const COUPLING_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hopping {
    pub i: usize,
    pub j: usize,
    pub t: C64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Onsite {
    pub i: usize,
    pub v: C64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GraphSpec {
    pub n_nodes: usize,
    pub hoppings: Vec<Hopping>,
    pub onsites: Vec<Onsite>,
}

impl GraphSpec {
    pub fn new(n_nodes: usize) -> Self {
        Self {
            n_nodes,
            hoppings: Vec::new(),
            onsites: Vec::new(),
        }
    }

    pub fn with_hopping(mut self, i: usize, j: usize, t: impl Into<C64>) -> Self {
        self.add_hopping(i, j, t);
        self
    }

    pub fn with_onsite(mut self, i: usize, v: impl Into<C64>) -> Self {
        self.add_onsite(i, v);
        self
    }

    pub fn add_hopping(&mut self, i: usize, j: usize, t: impl Into<C64>) {
        self.hoppings.push(Hopping { i, j, t: t.into() });
    }

    pub fn add_onsite(&mut self, i: usize, v: impl Into<C64>) {
        self.onsites.push(Onsite { i, v: v.into() });
    }

    /// Checks index ranges, self loops and duplicate (unordered) edges.
    pub fn validate(&self) -> Result<()> {
        let n = self.n_nodes;
        if n == 0 {
            return Err(Error::InvalidParameter("graph has no nodes".into()));
        }
        let mut seen = HashSet::with_capacity(self.hoppings.len());
        for h in &self.hoppings {
            for idx in [h.i, h.j] {
                if idx >= n {
                    return Err(Error::IndexOutOfRange { index: idx, len: n });
                }
            }
            if h.i == h.j {
                return Err(Error::SelfLoop { node: h.i });
            }
            let key = (h.i.min(h.j), h.i.max(h.j));
            if !seen.insert(key) {
                return Err(Error::DuplicateEdge { i: key.0, j: key.1 });
            }
        }
        for o in &self.onsites {
            if o.i >= n {
                return Err(Error::IndexOutOfRange { index: o.i, len: n });
            }
        }
        Ok(())
    }

    /// The matrix element `H[i][j]` implied by the hopping list (zero when absent).
    pub fn element(&self, i: usize, j: usize) -> C64 {
        self.hoppings
            .iter()
            .find_map(|h| {
                if h.i == i && h.j == j {
                    Some(h.t)
                } else if h.i == j && h.j == i {
                    Some(h.t.conj())
                } else {
                    None
                }
            })
            .unwrap_or_default()
    }
}

/// Dense complex matrix plus a cached Hermiticity flag.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianMatrix {
    matrix: DMatrix<C64>,
    hermitian: bool,
}

impl HamiltonianMatrix {
    pub fn new(matrix: DMatrix<C64>) -> Self {
        let hermitian = matrix.is_square() && hermitian_deviation(&matrix) < HERMITIAN_TOL;
        Self { matrix, hermitian }
    }

    pub fn from_real(matrix: DMatrix<f64>) -> Self {
        Self::new(matrix.map(|x| C64::new(x, 0.0)))
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.matrix
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn nrows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.matrix.ncols()
    }

    /// Side length; only meaningful for square matrices.
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.matrix[(i, j)]
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.matrix.norm()
    }

    pub fn hermitian_deviation(&self) -> f64 {
        hermitian_deviation(&self.matrix)
    }
}

fn hermitian_deviation(m: &DMatrix<C64>) -> f64 {
    if !m.is_square() {
        return f64::INFINITY;
    }
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn build_hamiltonian(spec: &GraphSpec) -> Result<HamiltonianMatrix> {
    spec.validate()?;
    let n = spec.n_nodes;
    let mut h = DMatrix::<C64>::zeros(n, n);
    for hop in &spec.hoppings {
        h[(hop.i, hop.j)] = hop.t;
        h[(hop.j, hop.i)] = hop.t.conj();
    }
    for o in &spec.onsites {
        h[(o.i, o.i)] += o.v;
    }
    Ok(HamiltonianMatrix::new(h))
}

/// Submatrix `H[rows][cols]` in the given node order.
pub fn extract_block(h: &HamiltonianMatrix, rows: &[usize], cols: &[usize]) -> Result<HamiltonianMatrix> {
    let m = h.matrix();
    for &r in rows {
        if r >= m.nrows() {
            return Err(Error::IndexOutOfRange { index: r, len: m.nrows() });
        }
    }
    for &c in cols {
        if c >= m.ncols() {
            return Err(Error::IndexOutOfRange { index: c, len: m.ncols() });
        }
    }
    let block = DMatrix::from_fn(rows.len(), cols.len(), |a, b| m[(rows[a], cols[b])]);
    Ok(HamiltonianMatrix::new(block))
}

/// A branch subgraph hanging off a single root node of the center.
///
/// `couplings` holds `(branch_site, g)` where `g` is the matrix element
/// `H[root][branch_site]` (an entry of `H_ca`), so `H[branch_site][root] = conj(g)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub sites: Vec<usize>,
    pub root: usize,
    pub couplings: Vec<(usize, C64)>,
}

impl Branch {
    pub fn new(sites: Vec<usize>, root: usize, couplings: Vec<(usize, C64)>) -> Self {
        Self { sites, root, couplings }
    }

    /// Builds a branch whose couplings are read off the graph's hoppings to `root`.
    pub fn from_graph(spec: &GraphSpec, sites: Vec<usize>, root: usize) -> Self {
        let couplings = sites
            .iter()
            .filter_map(|&s| {
                let g = spec.element(root, s);
                (g != C64::default()).then_some((s, g))
            })
            .collect();
        Self { sites, root, couplings }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Partition {
    pub center: Vec<usize>,
    pub branches: Vec<Branch>,
}

impl Partition {
    pub fn new(center: Vec<usize>, branches: Vec<Branch>) -> Self {
        Self { center, branches }
    }

    /// Node order `(branch_0, center, branch_1, branch_2, ...)`, which puts
    /// the Hamiltonian into its block form with zero branch-branch blocks.
    pub fn block_order(&self) -> Vec<usize> {
        let mut order = Vec::new();
        let mut branches = self.branches.iter();
        if let Some(first) = branches.next() {
            order.extend_from_slice(&first.sites);
        }
        order.extend_from_slice(&self.center);
        for b in branches {
            order.extend_from_slice(&b.sites);
        }
        order
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// A partition list names a node the graph does not have.
    UnknownNode { node: usize },
    /// Node is assigned to `count` parts instead of exactly one.
    CoverageGap { node: usize, count: usize },
    /// Declared root is not a member of the center.
    RootOutsideCenter { branch: usize, root: usize },
    /// A branch site couples to a center node other than the branch root.
    SingleRootViolation { branch: usize, site: usize, center_node: usize },
    /// An edge joins sites of two different branches.
    BranchCrossCoupling { branch_a: usize, branch_b: usize, i: usize, j: usize },
    /// A declared coupling names a site outside the branch.
    CouplingOutsideBranch { branch: usize, site: usize },
    /// A declared coupling disagrees with the graph's `H[root][site]`.
    CouplingMismatch { branch: usize, site: usize, declared: C64, actual: C64 },
}

impl fmt::Display for Violation {
    // 1-based labels, matching how the models number their sites.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Violation::UnknownNode { node } => write!(f, "unknown node {}", node + 1),
            Violation::CoverageGap { node, count } => {
                write!(f, "node {} assigned {} times (expected once)", node + 1, count)
            }
            Violation::RootOutsideCenter { branch, root } => {
                write!(f, "branch {}: root {} is not in the center", branch + 1, root + 1)
            }
            Violation::SingleRootViolation { branch, site, center_node } => write!(
                f,
                "branch {}: site {} couples to non-root center node {}",
                branch + 1,
                site + 1,
                center_node + 1
            ),
            Violation::BranchCrossCoupling { branch_a, branch_b, i, j } => write!(
                f,
                "edge {}-{} couples branch {} to branch {}",
                i + 1,
                j + 1,
                branch_a + 1,
                branch_b + 1
            ),
            Violation::CouplingOutsideBranch { branch, site } => {
                write!(f, "branch {}: coupling site {} is not a branch site", branch + 1, site + 1)
            }
            Violation::CouplingMismatch { branch, site, declared, actual } => write!(
                f,
                "branch {}: coupling at site {} declared {declared} but graph has {actual}",
                branch + 1,
                site + 1
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PartitionReport {
    pub violations: Vec<Violation>,
}

impl PartitionReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for PartitionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "valid");
        }
        for (n, v) in self.violations.iter().enumerate() {
            if n > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Owner {
    Center,
    Branch(usize),
}

pub fn validate_partition(spec: &GraphSpec, p: &Partition) -> PartitionReport {
    let n = spec.n_nodes;
    let mut violations = Vec::new();
    let mut count = vec![0usize; n];
    let mut owner: Vec<Option<Owner>> = vec![None; n];

    let mut assign = |node: usize, who: Owner, violations: &mut Vec<Violation>| {
        if node >= n {
            violations.push(Violation::UnknownNode { node });
        } else {
            count[node] += 1;
            owner[node].get_or_insert(who);
        }
    };
    for &c in &p.center {
        assign(c, Owner::Center, &mut violations);
    }
    for (b, branch) in p.branches.iter().enumerate() {
        for &s in &branch.sites {
            assign(s, Owner::Branch(b), &mut violations);
        }
    }
    for (node, &c) in count.iter().enumerate() {
        if c != 1 {
            violations.push(Violation::CoverageGap { node, count: c });
        }
    }

    let center: HashSet<usize> = p.center.iter().copied().collect();
    for (b, branch) in p.branches.iter().enumerate() {
        if !center.contains(&branch.root) {
            violations.push(Violation::RootOutsideCenter { branch: b, root: branch.root });
        }
    }

    for h in &spec.hoppings {
        if h.t == C64::default() || h.i >= n || h.j >= n {
            continue;
        }
        match (owner[h.i], owner[h.j]) {
            (Some(Owner::Branch(a)), Some(Owner::Branch(b))) if a != b => {
                violations.push(Violation::BranchCrossCoupling {
                    branch_a: a.min(b),
                    branch_b: a.max(b),
                    i: h.i,
                    j: h.j,
                });
            }
            (Some(Owner::Branch(b)), Some(Owner::Center)) | (Some(Owner::Center), Some(Owner::Branch(b))) => {
                let (site, c) = if owner[h.i] == Some(Owner::Center) { (h.j, h.i) } else { (h.i, h.j) };
                if c != p.branches[b].root {
                    violations.push(Violation::SingleRootViolation { branch: b, site, center_node: c });
                }
            }
            _ => {}
        }
    }

    for (b, branch) in p.branches.iter().enumerate() {
        let sites: HashSet<usize> = branch.sites.iter().copied().collect();
        for &(site, _) in &branch.couplings {
            if !sites.contains(&site) {
                violations.push(Violation::CouplingOutsideBranch { branch: b, site });
            }
        }
        for &site in &branch.sites {
            if site >= n || branch.root >= n {
                continue;
            }
            let declared: C64 = branch
                .couplings
                .iter()
                .filter(|(s, _)| *s == site)
                .map(|(_, g)| *g)
                .sum();
            let actual = spec.element(branch.root, site);
            if (declared - actual).norm() > COUPLING_TOL {
                violations.push(Violation::CouplingMismatch { branch: b, site, declared, actual });
            }
        }
    }

    PartitionReport { violations }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn chain(n: usize) -> GraphSpec {
        let mut g = GraphSpec::new(n);
        for i in 0..n - 1 {
            g.add_hopping(i, i + 1, -1.0);
        }
        g
    }

    #[test]
    fn open_three_chain() {
        let h = build_hamiltonian(&chain(3)).unwrap();
        let expected = DMatrix::from_row_slice(3, 3, &[0.0, -1.0, 0.0, -1.0, 0.0, -1.0, 0.0, -1.0, 0.0]);
        assert_eq!(h.matrix(), &expected.map(c));
        assert!(h.is_hermitian());
    }

    #[test]
    fn four_site_ring_with_potentials() {
        let v = 0.5;
        let mut g = GraphSpec::new(4);
        for i in 0..4 {
            g.add_hopping(i, (i + 1) % 4, -1.0);
        }
        g.add_onsite(0, -v);
        g.add_onsite(2, -v);
        let h = build_hamiltonian(&g).unwrap();
        let diag: Vec<f64> = (0..4).map(|i| h.get(i, i).re).collect();
        assert_eq!(diag, vec![-0.5, 0.0, -0.5, 0.0]);
        for i in 0..4 {
            assert_eq!(h.get(i, (i + 1) % 4), c(-1.0));
            assert_eq!(h.get((i + 1) % 4, i), c(-1.0));
        }
    }

    #[test]
    fn complex_hopping_is_conjugated() {
        let g = GraphSpec::new(2).with_hopping(0, 1, C64::new(0.3, 0.4));
        let h = build_hamiltonian(&g).unwrap();
        assert_eq!(h.get(0, 1), C64::new(0.3, 0.4));
        assert_eq!(h.get(1, 0), C64::new(0.3, -0.4));
        assert!(h.is_hermitian());
    }

    #[test]
    fn onsite_terms_accumulate() {
        let g = GraphSpec::new(1).with_onsite(0, 1.0).with_onsite(0, C64::new(0.5, 2.0));
        let h = build_hamiltonian(&g).unwrap();
        assert_eq!(h.get(0, 0), C64::new(1.5, 2.0));
        assert!(!h.is_hermitian());
    }

    #[test]
    fn assembly_errors() {
        let g = GraphSpec::new(2).with_hopping(0, 5, -1.0);
        assert_eq!(build_hamiltonian(&g), Err(Error::IndexOutOfRange { index: 5, len: 2 }));
        let g = chain(3).with_hopping(1, 0, 2.0);
        assert_eq!(build_hamiltonian(&g), Err(Error::DuplicateEdge { i: 0, j: 1 }));
        let g = GraphSpec::new(2).with_hopping(1, 1, 1.0);
        assert_eq!(build_hamiltonian(&g), Err(Error::SelfLoop { node: 1 }));
        let g = GraphSpec::new(2).with_onsite(2, 1.0);
        assert!(matches!(build_hamiltonian(&g), Err(Error::IndexOutOfRange { .. })));
    }

    fn fifteen_site() -> (GraphSpec, Partition) {
        let g = chain(15);
        let a = Branch::from_graph(&g, (0..5).collect(), 5);
        let b = Branch::from_graph(&g, (9..15).collect(), 8);
        (g, Partition::new((5..9).collect(), vec![a, b]))
    }

    #[test]
    fn blocks_of_fifteen_site_chain() {
        let (g, p) = fifteen_site();
        let h = build_hamiltonian(&g).unwrap();

        let hc = extract_block(&h, &p.center, &p.center).unwrap();
        assert_eq!(hc.nrows(), 4);
        for i in 0..4usize {
            for j in 0..4 {
                let expected = if i.abs_diff(j) == 1 { -1.0 } else { 0.0 };
                assert_eq!(hc.get(i, j), c(expected));
            }
        }

        let ab = extract_block(&h, &p.branches[0].sites, &p.branches[1].sites).unwrap();
        assert!(ab.matrix().iter().all(|z| *z == C64::default()));

        // Only the root's row of H_ca is populated.
        let hca = extract_block(&h, &p.center, &p.branches[0].sites).unwrap();
        for r in 0..4 {
            let row_nonzero = (0..5).any(|s| hca.get(r, s) != C64::default());
            assert_eq!(row_nonzero, p.center[r] == p.branches[0].root);
        }

        assert!(matches!(extract_block(&h, &[15], &[0]), Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn fifteen_site_partition_is_valid() {
        let (g, p) = fifteen_site();
        let report = validate_partition(&g, &p);
        assert!(report.is_valid(), "{report}");
        assert_eq!(p.branches[0].couplings, vec![(4, c(-1.0))]);
        assert_eq!(p.branches[1].couplings, vec![(9, c(-1.0))]);
    }

    #[test]
    fn single_root_violation() {
        // Branch {0} hangs off node 1 but also touches node 2.
        let g = chain(3).with_hopping(0, 2, -1.0);
        let p = Partition::new(vec![1, 2], vec![Branch::from_graph(&g, vec![0], 1)]);
        let report = validate_partition(&g, &p);
        assert_eq!(
            report.violations,
            vec![Violation::SingleRootViolation { branch: 0, site: 0, center_node: 2 }]
        );
    }

    #[test]
    fn cross_coupling_violation() {
        let g = chain(3).with_hopping(0, 2, -0.5);
        let p = Partition::new(
            vec![1],
            vec![Branch::from_graph(&g, vec![0], 1), Branch::from_graph(&g, vec![2], 1)],
        );
        let report = validate_partition(&g, &p);
        assert_eq!(
            report.violations,
            vec![Violation::BranchCrossCoupling { branch_a: 0, branch_b: 1, i: 0, j: 2 }]
        );
    }

    #[test]
    fn coverage_and_coupling_violations() {
        let g = chain(4);
        let p = Partition::new(
            vec![1, 2],
            vec![Branch::new(vec![0, 1], 3, vec![(0, c(-1.0)), (5, c(1.0))])],
        );
        let v = validate_partition(&g, &p).violations;
        assert!(v.contains(&Violation::CoverageGap { node: 1, count: 2 }));
        assert!(v.contains(&Violation::CoverageGap { node: 3, count: 0 }));
        assert!(v.contains(&Violation::RootOutsideCenter { branch: 0, root: 3 }));
        assert!(v.contains(&Violation::CouplingOutsideBranch { branch: 0, site: 5 }));
        assert!(v.contains(&Violation::CouplingMismatch {
            branch: 0,
            site: 0,
            declared: c(-1.0),
            actual: c(0.0)
        }));

        let p = Partition::new(vec![0, 7], vec![]);
        let v = validate_partition(&g, &p).violations;
        assert!(v.contains(&Violation::UnknownNode { node: 7 }));
    }

    #[test]
    fn block_order_gives_zero_cross_blocks() {
        let (g, p) = fifteen_site();
        let order = p.block_order();
        assert_eq!(order.len(), 15);
        let h = build_hamiltonian(&g).unwrap();
        let permuted = extract_block(&h, &order, &order).unwrap();
        // rows of branch a (0..5) against columns of branch b (9..15)
        for r in 0..5 {
            for col in 9..15 {
                assert_eq!(permuted.get(r, col), C64::default());
                assert_eq!(permuted.get(col, r), C64::default());
            }
        }
    }
}
