//! Matrix-product methods for open chains.
//!
//! The density operator is stored as a real matrix-product operator in the
//! normalized Pauli basis and evolved with second-order TEBD, each gate the
//! exact exponential of a 16×16 bond superoperator. Quantum trajectories use
//! complex matrix-product states evolved under the non-Hermitian effective
//! Hamiltonian.

mod chain;
mod checkpoint;
mod gates;
mod mpo;
mod mps;
pub mod pauli;
mod sweep;
mod tebd;

pub use chain::{Chain, TruncationPolicy};
pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use gates::{
    bond_generator, build_trotter_gates, merged_sequence, site_generator, Layer, TrotterOrder,
    TrotterSchedule,
};
pub use mpo::{entropy_of_schmidt, product_mpo, Correlation, VectorizedMpo, SINGULAR_DENOMINATOR, TRACE_COLLAPSE};
pub use mps::{mps_trajectory_run, run_mps_trajectory, NonHermitianGates, TrajectoryMps};
pub use sweep::{correlation_features, mpo_sweep, quadratic_vertex, CorrelationFeatures, MpoPoint, MpoSweepOptions};
pub use tebd::{evolve_to_ness_mpo, tebd_evolve, tebd_step, NessOptions, NessReport, TruncationReport};
