//! Dense complex linear algebra: resolvent solves and eigendecompositions.

mod lu;
mod schur;

use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::graph::{HamiltonianMatrix, C64, HERMITIAN_TOL};

/// Reciprocal condition number below which `E - H` is treated as singular.
pub const RCOND_THRESHOLD: f64 = 1e-12;

/// Eigenvalues with eigenvectors stored as matching columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub eigenvalues: Vec<C64>,
    pub eigenvectors: DMatrix<C64>,
    pub hermitian_input: bool,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn eigenvector(&self, i: usize) -> DVector<C64> {
        self.eigenvectors.column(i).into_owned()
    }

    pub fn real_parts(&self) -> Vec<f64> {
        self.eigenvalues.iter().map(|z| z.re).collect()
    }

    pub fn max_imag(&self) -> f64 {
        self.eigenvalues.iter().map(|z| z.im.abs()).fold(0.0, f64::max)
    }

    /// Largest `||M v - lambda v||_2` over all pairs.
    pub fn max_residual(&self, m: &HamiltonianMatrix) -> f64 {
        (0..self.len())
            .map(|i| {
                let v = self.eigenvector(i);
                (m.matrix() * &v - &v * self.eigenvalues[i]).norm()
            })
            .fold(0.0, f64::max)
    }
}

/// Solves `(E I - H) X = V` for every column of `V`.
pub fn resolvent_apply(h: &HamiltonianMatrix, energy: C64, v: &DMatrix<C64>) -> Result<DMatrix<C64>> {
    let n = h.dim();
    if !h.matrix().is_square() {
        return Err(Error::DimensionMismatch { expected: h.nrows(), found: h.ncols() });
    }
    if v.nrows() != n {
        return Err(Error::DimensionMismatch { expected: n, found: v.nrows() });
    }
    let lu = resolvent_lu(h, energy)?;
    let mut x = v.clone();
    for mut col in x.column_iter_mut() {
        let mut b = col.clone_owned();
        lu.solve_in_place(&mut b);
        col.copy_from(&b);
    }
    Ok(x)
}

/// Single right-hand side variant of [`resolvent_apply`].
pub fn resolvent_solve(h: &HamiltonianMatrix, energy: C64, v: &DVector<C64>) -> Result<DVector<C64>> {
    if v.len() != h.dim() {
        return Err(Error::DimensionMismatch { expected: h.dim(), found: v.len() });
    }
    let lu = resolvent_lu(h, energy)?;
    let mut x = v.clone();
    lu.solve_in_place(&mut x);
    Ok(x)
}

/// Reciprocal 1-norm condition estimate of `E I - H`.
pub fn resolvent_rcond(h: &HamiltonianMatrix, energy: C64) -> f64 {
    lu::Lu::new(shifted(h, energy)).rcond()
}

fn shifted(h: &HamiltonianMatrix, energy: C64) -> DMatrix<C64> {
    let n = h.dim();
    DMatrix::from_diagonal_element(n, n, energy) - h.matrix()
}

fn resolvent_lu(h: &HamiltonianMatrix, energy: C64) -> Result<lu::Lu> {
    let lu = lu::Lu::new(shifted(h, energy));
    let rcond = lu.rcond();
    if rcond < RCOND_THRESHOLD {
        return Err(Error::SingularResolvent { rcond });
    }
    Ok(lu)
}

pub fn eig_hermitian(h: &HamiltonianMatrix) -> Result<Spectrum> {
    if !h.matrix().is_square() {
        return Err(Error::DimensionMismatch { expected: h.nrows(), found: h.ncols() });
    }
    let deviation = h.hermitian_deviation();
    if deviation >= HERMITIAN_TOL {
        return Err(Error::NotHermitian { deviation });
    }
    let n = h.dim();
    if n == 0 {
        return Ok(Spectrum { eigenvalues: vec![], eigenvectors: DMatrix::zeros(0, 0), hermitian_input: true });
    }
    // Symmetrize so the solver sees an exactly Hermitian matrix.
    let m = (h.matrix() + h.matrix().adjoint()) * C64::new(0.5, 0.0);
    let eig = SymmetricEigen::try_new(m, f64::EPSILON, 0).ok_or(Error::ConvergenceFailure { iterations: 0 })?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues = order.iter().map(|&i| C64::new(eig.eigenvalues[i], 0.0)).collect();
    let eigenvectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok(Spectrum { eigenvalues, eigenvectors, hermitian_input: true })
}

/// Ascending eigenvalues of the symmetric part of a real square matrix.
pub fn hermitian_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let mut values: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
    values.sort_by(f64::total_cmp);
    values
}

/// Eigenvalues and unit right eigenvectors of a general square matrix,
/// sorted by real part and then imaginary part.
pub fn eig_general(m: &HamiltonianMatrix) -> Result<Spectrum> {
    if !m.matrix().is_square() {
        return Err(Error::DimensionMismatch { expected: m.nrows(), found: m.ncols() });
    }
    let n = m.dim();
    let decomposition = schur::schur(m.matrix())?;
    let y = schur::triangular_eigenvectors(&decomposition.t);
    let vectors = &decomposition.z * y;

    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<C64> = (0..n).map(|i| decomposition.t[(i, i)]).collect();
    order.sort_by(|&a, &b| complex_order(diag[a], diag[b]));
    let eigenvalues = order.iter().map(|&i| diag[i]).collect();
    let mut eigenvectors = DMatrix::<C64>::zeros(n, n);
    for (c, &i) in order.iter().enumerate() {
        let v = vectors.column(i);
        let norm = v.norm();
        eigenvectors.set_column(c, &(v / C64::new(norm, 0.0)));
    }
    Ok(Spectrum { eigenvalues, eigenvectors, hermitian_input: m.is_hermitian() })
}

pub(crate) fn complex_order(a: C64, b: C64) -> Ordering {
    a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im))
}

/// A group of computed eigenvalues that lie within the clustering tolerance
/// of each other.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenCluster {
    pub mean: C64,
    /// Positions in the spectrum, ascending.
    pub indices: Vec<usize>,
    /// Dimension of the numerical null space of `M - mean I`.
    pub geometric_multiplicity: usize,
}

impl EigenCluster {
    pub fn algebraic_multiplicity(&self) -> usize {
        self.indices.len()
    }

    pub fn is_defective(&self) -> bool {
        self.geometric_multiplicity < self.indices.len()
    }
}

/// Replaces each cluster of nearly equal eigenvalues by the cluster mean and
/// its eigenvectors by an orthonormal basis of the null space of `M - mean I`.
///
/// Individual eigenvalues of a defective cluster are perturbed by roughly
/// `eps^(1/m)`, while the mean of the cluster stays accurate to `eps`. When
/// the null space is smaller than the cluster, its basis vectors are reused
/// for the remaining slots.
pub fn refine_clusters(m: &HamiltonianMatrix, spectrum: &Spectrum, cluster_tol: f64) -> Result<(Spectrum, Vec<EigenCluster>)> {
    let n = spectrum.len();
    if m.dim() != n {
        return Err(Error::DimensionMismatch { expected: m.dim(), found: n });
    }
    let scale = m.frobenius_norm().max(1.0);
    let null_tol = 1e-10 * scale;
    let mut out = spectrum.clone();
    let mut clusters = Vec::new();

    for members in cluster_indices(&spectrum.eigenvalues, cluster_tol) {
        let mean = members.iter().map(|&i| spectrum.eigenvalues[i]).sum::<C64>() / C64::new(members.len() as f64, 0.0);
        let (basis, smallest) = null_space_with_gap(m, mean, null_tol);
        if members.len() > 1 && smallest > null_tol {
            // Close but distinct eigenvalues: the mean is not an eigenvalue.
            for i in members {
                let geometric = null_space(m, spectrum.eigenvalues[i], null_tol).ncols();
                clusters.push(EigenCluster { mean: spectrum.eigenvalues[i], indices: vec![i], geometric_multiplicity: geometric });
            }
            continue;
        }
        let geometric = basis.ncols();
        if members.len() > 1 {
            for (slot, &i) in members.iter().enumerate() {
                out.eigenvalues[i] = mean;
                if geometric > 0 {
                    out.eigenvectors.set_column(i, &basis.column(slot % geometric));
                }
            }
        }
        clusters.push(EigenCluster { mean, indices: members, geometric_multiplicity: geometric });
    }
    Ok((out, clusters))
}

/// Groups indices of `values` by single-linkage distance below `tol`.
pub(crate) fn cluster_indices(values: &[C64], tol: f64) -> Vec<Vec<usize>> {
    let n = values.len();
    let mut label: Vec<usize> = (0..n).collect();
    fn find(label: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while label[r] != r {
            r = label[r];
        }
        label[i] = r;
        r
    }
    for i in 0..n {
        for j in i + 1..n {
            if (values[i] - values[j]).norm() < tol {
                let (a, b) = (find(&mut label, i), find(&mut label, j));
                if a != b {
                    label[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut root_slot = vec![usize::MAX; n];
    for i in 0..n {
        let r = find(&mut label, i);
        if root_slot[r] == usize::MAX {
            root_slot[r] = groups.len();
            groups.push(Vec::new());
        }
        groups[root_slot[r]].push(i);
    }
    groups
}

/// Orthonormal basis (columns) of `{v : ||(M - lambda I) v|| <= tol ||v||}`
/// from the SVD. Always contains at least the smallest singular direction.
pub fn null_space(m: &HamiltonianMatrix, lambda: C64, tol: f64) -> DMatrix<C64> {
    null_space_with_gap(m, lambda, tol).0
}

/// [`null_space`] together with the smallest singular value of `M - lambda I`.
fn null_space_with_gap(m: &HamiltonianMatrix, lambda: C64, tol: f64) -> (DMatrix<C64>, f64) {
    let n = m.dim();
    let a = m.matrix() - DMatrix::from_diagonal_element(n, n, lambda);
    let svd = a.svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| svd.singular_values[x].total_cmp(&svd.singular_values[y]));
    let keep = order.iter().take_while(|&&i| svd.singular_values[i] <= tol).count().max(1);
    let smallest = order.first().map_or(0.0, |&i| svd.singular_values[i]);
    (DMatrix::from_fn(n, keep, |r, c| v_t[(order[c], r)].conj()), smallest)
}

/// Distance between the spans of two sets of column vectors, measured as
/// `||P_a - P_b||_2` for the orthogonal projectors onto each span.
pub fn subspace_distance(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    let pa = projector(a);
    let pb = projector(b);
    (pa - pb).singular_values().amax()
}

fn projector(vectors: &DMatrix<C64>) -> DMatrix<C64> {
    let q = vectors.clone().qr().q();
    &q * q.adjoint()
}
