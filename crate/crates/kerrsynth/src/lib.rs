//! Qubit-mediated synthesis of nonlinear oscillator gates in truncated Fock
//! space.
//!
//! A single geometric cycle of two commuting qubit-oscillator couplings
//! produces, conditioned on the qubit state, an operator pair (O1, O2) whose
//! repeated O1 branch converges to exp(i T A B) — a self-Kerr or cross-Kerr
//! unitary depending on the choice of A and B. This crate builds the cycle,
//! evolves states deterministically (qubit traced out and reinitialized each
//! round) or conditionally (post-selected on the qubit ground state), applies
//! photon loss between rounds, and evaluates fidelity, success probability,
//! Wigner negativity, and entanglement measures.

pub mod channel;
pub mod error;
pub mod fock;
pub mod gate;
pub mod metrics;
pub mod parallel;

pub use channel::{apply_damping, conditional_evolve, deterministic_step, evolve, LossSpec};
pub use error::{Error, Result};
pub use fock::{coherent_ket, DensityMatrix, FockSpace, Ket, Operator, C64};
pub use gate::{
    conditional_ops, geometric_cycle, repeated_conditional, target_unitary, GateSpec, KerrKind,
    KerrSpec,
};
pub use metrics::{
    conditional_fidelity, cross_kerr_scan, deterministic_fidelity, gaussian_negativity,
    negative_regions, negativity, negativity_report, quadrature_moments, success_probability,
    support_bound, wigner, GridParams, MomentData, NegativityReport, ScanRow, WignerGrid,
};
