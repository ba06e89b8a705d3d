//! Nonequilibrium steady states of the coherently driven, dissipative XY
//! lattice of two-level systems.
//!
//! The crate computes steady states at four levels of fidelity:
//!
//! - [`meanfield`]: the factorized product-density-matrix ansatz, evolved
//!   under self-consistent single-site Liouvillians, with detuning sweeps to
//!   expose mean-field hysteresis (1D chains and 2D rectangles);
//! - [`trajectories`]: Monte Carlo wave functions restricted to product pure
//!   states;
//! - [`tensor`]: a vectorized matrix-product-operator TEBD engine for 1D
//!   chains, plus matrix-product-state quantum trajectories and correlated
//!   observables;
//! - [`dense`]: a brute-force Liouvillian for a handful of sites, used as the
//!   reference oracle for everything above.
//!
//! [`cqed`] checks the dispersive circuit-QED construction that realizes the
//! model with transmon qubits coupled through shared resonators.
//!
//! Conventions used throughout: the local basis is `|0⟩` (down, index 0) and
//! `|1⟩` (up, index 1); `σ⁻ = |0⟩⟨1|`; `n = σ⁺σ⁻ = |1⟩⟨1|`; matrices are
//! indexed `m[a][b] = ⟨a|m|b⟩`. Multi-site operators order site 0 as the most
//! significant tensor factor.

pub mod cqed;
pub mod dense;
pub mod error;
pub mod lattice;
pub mod linalg;
pub mod meanfield;
pub mod tensor;
pub mod trajectories;

pub use error::{Error, Result};
pub use lattice::{Lattice, LocalOp, ModelParams};

/// Double-precision complex scalar.
pub type C64 = num_complex::Complex64;
