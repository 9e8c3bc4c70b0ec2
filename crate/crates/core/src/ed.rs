//! Exact diagonalization of the spin-½ modular XY chain, used as an
//! independent check of the free-fermion results for small `N`.
//!
//! Basis states are bit strings with bit `i` set when spin `i` points up
//! (`σᶻ = +1`). The Hamiltonian conserves `Π = ∏σᶻ`, so it can be built in a
//! single parity block.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::eigh;
use crate::qfi::{ground_sector, qfi_finite_difference, QfiMethod, QfiResult};
use crate::xy::{Boundary, Parameter, XYChainSpec};

pub const MAX_SITES: usize = 12;

/// Ground states closer than this are treated as degenerate.
pub const DEGENERACY_GAP: f64 = 1e-10;

/// Which part of the Hilbert space to diagonalize.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sector {
    Full,
    /// Eigenspace of `∏σᶻ` with eigenvalue `+1` or `−1`.
    Parity(i8),
}

/// Dense spin Hamiltonian
/// `H = −½ Σ J_{i,i+1}((1+γ)σˣσˣ + (1−γ)σʸσʸ) + Σ h_i σᶻ_i`
/// restricted to `basis`.
#[derive(Debug, Clone)]
pub struct SpinHamiltonian {
    pub matrix: DMatrix<f64>,
    pub basis: Vec<u32>,
    pub sector: Sector,
    pub spec: XYChainSpec,
}

fn parity_of(state: u32, n: usize) -> i8 {
    let down = n as u32 - state.count_ones();
    if down.is_multiple_of(2) {
        1
    } else {
        -1
    }
}

/// Full `2^N × 2^N` Hamiltonian.
pub fn build_spin_hamiltonian(spec: &XYChainSpec) -> Result<SpinHamiltonian> {
    build_sector_hamiltonian(spec, Sector::Full)
}

pub fn build_sector_hamiltonian(spec: &XYChainSpec, sector: Sector) -> Result<SpinHamiltonian> {
    let n = spec.n_sites;
    if n > MAX_SITES {
        return Err(Error::Size {
            n_sites: n,
            max: MAX_SITES,
        });
    }
    if let Sector::Parity(p) = sector {
        if p != 1 && p != -1 {
            return Err(Error::validation("parity must be +1 or -1"));
        }
    }
    let bonds = spec.build_couplings()?;
    let fields = spec.fields();
    let gamma = spec.anisotropy;

    let basis: Vec<u32> = (0..(1u32 << n))
        .filter(|&s| match sector {
            Sector::Full => true,
            Sector::Parity(p) => parity_of(s, n) == p,
        })
        .collect();
    let mut index = vec![usize::MAX; 1 << n];
    for (i, &s) in basis.iter().enumerate() {
        index[s as usize] = i;
    }

    let dim = basis.len();
    let mut m = DMatrix::zeros(dim, dim);
    for (col, &s) in basis.iter().enumerate() {
        let diag: f64 = (0..n)
            .map(|i| if s >> i & 1 == 1 { fields[i] } else { -fields[i] })
            .sum();
        m[(col, col)] += diag;
        for (j, &coupling) in bonds.iter().enumerate() {
            let k = (j + 1) % n;
            let flipped = s ^ (1 << j) ^ (1 << k);
            let aligned = (s >> j & 1) == (s >> k & 1);
            // σˣσˣ gives +1, σʸσʸ gives −1 for aligned and +1 for opposite spins
            let amp = if aligned {
                -coupling * gamma
            } else {
                -coupling
            };
            let row = index[flipped as usize];
            m[(row, col)] += amp;
        }
    }
    Ok(SpinHamiltonian {
        matrix: m,
        basis,
        sector,
        spec: spec.clone(),
    })
}

impl SpinHamiltonian {
    /// `∏σᶻ` applied to the basis.
    pub fn parity_diagonal(&self) -> Vec<i8> {
        let n = self.spec.n_sites;
        self.basis.iter().map(|&s| parity_of(s, n)).collect()
    }

    /// `max |[H, Π]|`.
    pub fn parity_commutator(&self) -> f64 {
        let p = self.parity_diagonal();
        let mut worst: f64 = 0.0;
        for c in 0..self.matrix.ncols() {
            for r in 0..self.matrix.nrows() {
                let x = self.matrix[(r, c)] * (p[c] as f64 - p[r] as f64);
                worst = worst.max(x.abs());
            }
        }
        worst
    }
}

/// Lowest eigenpair of a sector plus its gap to the next level.
#[derive(Debug, Clone)]
pub struct EdGroundState {
    pub energy: f64,
    pub gap: f64,
    pub state: DVector<f64>,
}

pub fn ground_state(spec: &XYChainSpec, sector: Sector) -> Result<EdGroundState> {
    let h = build_sector_hamiltonian(spec, sector)?;
    let (vals, vecs) = eigh(h.matrix)?;
    let gap = vals.get(1).map(|e| e - vals[0]).unwrap_or(f64::INFINITY);
    Ok(EdGroundState {
        energy: vals[0],
        gap,
        state: vecs.column(0).into_owned(),
    })
}

/// `1 − |⟨a|b⟩|` for normalized real vectors, computed from the component of
/// `b` orthogonal to `a`.
pub fn infidelity(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let ov = a.dot(b);
    let s2 = (b - a * ov).norm_squared().clamp(0.0, 1.0);
    let f = (1.0 - s2).sqrt();
    s2 / (1.0 + f)
}

fn checked_ground(spec: &XYChainSpec, sector: Sector) -> Result<DVector<f64>> {
    let g = ground_state(spec, sector)?;
    if g.gap < DEGENERACY_GAP {
        return Err(Error::Degenerate {
            gap: g.gap,
            threshold: DEGENERACY_GAP,
        });
    }
    Ok(g.state)
}

/// Centered fidelity estimate `8(1 − |⟨ψ(λ−ε/2)|ψ(λ+ε/2)⟩|)/ε²`.
fn fidelity_qfi(spec: &XYChainSpec, p: Parameter, sector: Sector, eps: f64) -> Result<f64> {
    let x = spec.parameter(p);
    let lo = checked_ground(&spec.with_parameter(p, x - eps / 2.0), sector)?;
    let hi = checked_ground(&spec.with_parameter(p, x + eps / 2.0), sector)?;
    Ok(8.0 * infidelity(&lo, &hi) / (eps * eps))
}

/// Ground-state QFI by exact diagonalization, with the same step and
/// Richardson refinement as [`crate::qfi::qfi_finite_difference`].
pub fn qfi_ed(
    spec: &XYChainSpec,
    p: Parameter,
    step: Option<f64>,
    sector: Sector,
) -> Result<QfiResult> {
    let eps = crate::qfi::resolve_step(spec.parameter(p), step)?;
    let coarse = fidelity_qfi(spec, p, sector, eps)?;
    let fine = fidelity_qfi(spec, p, sector, eps / 2.0)?;
    Ok(QfiResult::richardson(
        coarse,
        fine,
        eps / 2.0,
        p,
        QfiMethod::ExactDiagonalization,
        spec,
        false,
    ))
}

/// Free-fermion and exact QFI of the same closed spin ring.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleComparison {
    pub free_fermion: f64,
    pub exact: f64,
    /// Fermionic boundary condition of the ground-state sector.
    pub sector: Boundary,
}

impl OracleComparison {
    pub fn relative_error(&self) -> f64 {
        (self.free_fermion - self.exact).abs() / self.exact.abs()
    }
}

/// QFI of a spin ring from the overlap route in its ground-state sector and
/// from exact diagonalization of the matching parity block.
pub fn compare_with_free_fermion(spin_ring: &XYChainSpec, p: Parameter) -> Result<OracleComparison> {
    if spin_ring.boundary != Boundary::Periodic {
        return Err(Error::validation("the oracle compares periodic spin rings"));
    }
    let sector = ground_sector(spin_ring)?;
    let ff = qfi_finite_difference(&spin_ring.clone().with_boundary(sector.boundary), p, None)?;
    let ed = qfi_ed(spin_ring, p, None, Sector::Parity(sector.spin_parity))?;
    Ok(OracleComparison { free_fermion: ff.value, exact: ed.value, sector: sector.boundary })
}
