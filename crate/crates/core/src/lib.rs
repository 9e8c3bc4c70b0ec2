//! Simulation of modular many-body quantum sensors.
//!
//! The crate covers the modular transverse XY chain (free-fermion ground
//! states, quantum Fisher information, transfer-matrix critical fields,
//! finite-size scaling, global sensing) and the modular SSH chain (Bloch
//! bands, per-band fidelity susceptibility, half-filling QFI, topological
//! index), plus the sweep/CSV/SVG orchestration behind the `sensor` CLI.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ed;
pub mod error;
pub mod global;
pub mod linalg;
pub mod optim;
pub mod orchestrator;
pub mod par;
pub mod phase;
pub mod qfi;
pub mod scaling;
pub mod ssh;
pub mod xy;

pub use error::{Error, Result};
