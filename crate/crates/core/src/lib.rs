//! Löwdin partitioning for tight-binding graphs.
//!
//! A graph is split into a center and branches that each attach to the
//! center through one root node. Eliminating a branch leaves an
//! energy-dependent on-site potential at its root; the projected center
//! Hamiltonian reproduces every full eigenpair whose root amplitudes are
//! nonzero. The [`chain`] and [`ring`] modules hold two exactly solvable
//! models: a finite chain cut into three pieces, and a ring scattering
//! center fed by semi-infinite leads.

pub mod chain;
pub mod cli;
pub mod error;
pub mod format;
pub mod graph;
pub mod numerics;
pub mod partition;
pub mod ring;

pub use error::{Error, Result};
pub use graph::{build_hamiltonian, extract_block, validate_partition, Branch, GraphSpec, HamiltonianMatrix, Partition, C64};
pub use numerics::{eig_general, eig_hermitian, resolvent_apply, Spectrum};
pub use partition::{
    branch_self_energy, effective_hamiltonian, find_center_eigenvalues, reconstruct_branch_amplitudes, self_energy_from_state,
    verify_projection, ConsistencyReport, ConsistencyStatus, Projection, SelfEnergy,
};
