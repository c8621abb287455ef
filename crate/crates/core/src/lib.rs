//! Quench dynamics of long-range interacting spin-1/2 Ising and XY models.
//!
//! The crate pairs a discrete truncated Wigner (DTWA) Monte-Carlo engine
//! with two exact references, a closed-form solution of the Ising quench
//! and matrix-free state-vector propagation for small systems, plus the
//! light-cone analysis used to compare them.
//!
//! All runs start from the `+x` product state and evolve under
//! `H = sum_{i<j} J_ij [ J⊥ (sx_i sx_j + sy_i sy_j) + Jz sz_i sz_j ]`, with
//! either the Ising (`J⊥ = 0`) or XY (`Jz = 0`) couplings of [`lattice`].
//! Times are measured in units of `1/J`.

pub mod analysis;
pub mod dtwa;
pub mod error;
pub mod lattice;
pub mod observables;
pub mod oracle_ed;
pub mod oracle_ising;

pub use error::{Error, Result};
pub use lattice::{Axis, Couplings, Lattice, Model};
pub use observables::{
    Component, CorrelationRequest, Estimate, ObservableRequest, ObservableSeries,
};
