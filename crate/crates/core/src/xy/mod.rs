//! Free-fermion description of the modular transverse XY chain.

pub mod bdg;
pub mod bloch;
pub mod spec;

pub use bdg::{build_bdg_matrix, decompose, diagonalize_bdg, BdGMatrix, BogoliubovDecomposition};
pub use bloch::{bloch_bdg, bloch_energies, momenta, qfi_bloch, BlochQfi};
pub use spec::{Boundary, Field, Parameter, XYChainSpec};
