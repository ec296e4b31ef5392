use thiserror::Error;

use crate::graph::PartitionReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("node index {index} out of range for {len} nodes")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("duplicate edge between nodes {i} and {j}")]
    DuplicateEdge { i: usize, j: usize },

    #[error("hopping from node {node} to itself; use an on-site term instead")]
    SelfLoop { node: usize },

    #[error("resolvent is singular (reciprocal condition {rcond:.3e})")]
    SingularResolvent { rcond: f64 },

    #[error("resolvent of branch {branch} (root {root}) is singular (reciprocal condition {rcond:.3e})")]
    SingularBranch { branch: usize, root: usize, rcond: f64 },

    #[error("matrix is not Hermitian (max |H - H^dagger| = {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("eigenvalue iteration did not converge after {iterations} sweeps")]
    ConvergenceFailure { iterations: usize },

    #[error("root amplitude {amplitude:.3e} is too small to divide by")]
    ZeroRootAmplitude { amplitude: f64 },

    #[error("root potential {which} is undefined: sin denominator = {denominator:.3e}")]
    PotentialUndefined { which: &'static str, denominator: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid partition: {0}")]
    InvalidPartition(PartitionReport),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}
