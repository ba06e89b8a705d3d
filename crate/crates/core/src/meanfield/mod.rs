//! Single-site mean-field treatment: the lattice density matrix is kept as a
//! product of 2×2 site density matrices, each evolving under a local
//! Liouvillian whose drive is renormalized by the neighbors' coherences.

mod fit;
mod master;
mod product;
mod sweep;

pub use fit::{fit_density_oscillations, FitWindow, OscillationFit};
pub use master::{
    effective_driving, evolve_to_ness, local_liouvillian, mean_field_step, ConvergenceReport,
    MeanFieldOptions,
};
pub use product::{haar_qubit, ProductState};
pub use sweep::{
    locate_transition, scan_bistability, sweep_detuning, BistabilityRecord, SweepDirection,
    SweepGrid, SweepRecord, SweepResult, SweepSpec, Transition, ANCHOR_AGREEMENT,
    MIN_TRANSITION_JUMP,
};
