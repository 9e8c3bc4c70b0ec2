//! Cell-momentum decomposition of closed modular chains.
//!
//! A closed chain of `l` identical cells commutes with translation by one
//! cell, so `H̃` splits into `l` Hermitian blocks of size `2r × 2r` labelled by
//! `q = (2πk + θ)/l`, with `θ = 0` for periodic and `θ = π` for antiperiodic
//! fermions. The positive-energy projector, and with it the ground-state
//! fidelity metric, is a direct sum over these blocks.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::bdg::GAP_CLOSED;
use super::spec::{Boundary, Parameter, XYChainSpec};
use crate::error::{Error, Result};
use crate::linalg::eigh;

fn check(spec: &XYChainSpec) -> Result<()> {
    spec.validate()?;
    if !spec.boundary.is_closed() {
        return Err(Error::validation("momentum blocks need a closed chain"));
    }
    if !spec.field_is_cell_periodic() {
        return Err(Error::validation("momentum blocks need a cell-periodic field"));
    }
    Ok(())
}

/// Allowed cell momenta.
pub fn momenta(spec: &XYChainSpec) -> Vec<f64> {
    let twist = match spec.boundary {
        Boundary::Antiperiodic => PI,
        _ => 0.0,
    };
    let l = spec.n_cells as f64;
    (0..spec.n_cells)
        .map(|k| (2.0 * PI * k as f64 + twist) / l)
        .collect()
}

/// `2r × 2r` block of `H̃` at cell momentum `q`.
pub fn bloch_bdg(spec: &XYChainSpec, q: f64) -> Result<DMatrix<Complex64>> {
    check(spec)?;
    let r = spec.cell_size;
    let fields = spec.fields();
    let gamma = spec.anisotropy;
    let mut a = DMatrix::<Complex64>::zeros(r, r);
    let mut b = DMatrix::<Complex64>::zeros(r, r);
    for s in 0..r {
        a[(s, s)] += Complex64::new(fields[s], 0.0);
    }
    // bond s -> s+1 inside the cell, and r-1 -> 0 of the next cell
    for s in 0..r {
        let (t, hop_cells, coupling) = if s + 1 < r {
            (s + 1, 0.0, spec.intra_coupling)
        } else {
            (0, 1.0, spec.inter_coupling)
        };
        let phase = Complex64::from_polar(1.0, q * hop_cells);
        let hop = -coupling / 2.0;
        let pair = -gamma * coupling / 2.0;
        a[(s, t)] += phase * hop;
        a[(t, s)] += phase.conj() * hop;
        b[(s, t)] += phase * pair;
        b[(t, s)] -= phase.conj() * pair;
    }
    let mut m = DMatrix::<Complex64>::zeros(2 * r, 2 * r);
    m.view_mut((0, 0), (r, r)).copy_from(&a);
    m.view_mut((0, r), (r, r)).copy_from(&b);
    m.view_mut((r, 0), (r, r)).copy_from(&(-&b));
    m.view_mut((r, r), (r, r)).copy_from(&(-&a));
    Ok(m)
}

/// Positive quasiparticle energies collected from every block, ascending.
pub fn bloch_energies(spec: &XYChainSpec) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(spec.n_sites);
    for q in momenta(spec) {
        let (vals, _) = eigh(bloch_bdg(spec, q)?)?;
        out.extend(vals.into_iter().filter(|&e| e > 0.0));
    }
    out.sort_by(f64::total_cmp);
    Ok(out)
}

/// `∂H̃_q/∂λ`. Every entry is affine in each parameter, so a unit-width
/// central difference is exact.
fn block_derivative(spec: &XYChainSpec, p: Parameter, q: f64) -> Result<DMatrix<Complex64>> {
    let x = spec.parameter(p);
    let up = bloch_bdg(&spec.with_parameter(p, x + 0.5), q)?;
    let down = bloch_bdg(&spec.with_parameter(p, x - 0.5), q)?;
    Ok(up - down)
}

/// Fidelity-metric QFI of the positive-energy projector from first-order
/// perturbation theory, summed over momentum blocks:
/// `Q = Σ_q 2 Σ_{n>0, m<0} |⟨m|∂H̃_q|n⟩|² / (E_n − E_m)²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochQfi {
    pub value: f64,
    pub min_energy: f64,
    pub gap_closed: bool,
}

pub fn qfi_bloch(spec: &XYChainSpec, p: Parameter) -> Result<BlochQfi> {
    check(spec)?;
    let mut total = 0.0;
    let mut min_energy = f64::INFINITY;
    let mut n_positive = 0;
    for q in momenta(spec) {
        let h = bloch_bdg(spec, q)?;
        let dh = block_derivative(spec, p, q)?;
        let (vals, vecs) = eigh(h)?;
        let rotated = vecs.adjoint() * dh * &vecs;
        let split = vals.partition_point(|&e| e <= 0.0);
        n_positive += vals.len() - split;
        min_energy = vals.iter().map(|e| e.abs()).fold(min_energy, f64::min);
        for n in split..vals.len() {
            for m in 0..split {
                let de = vals[n] - vals[m];
                total += 2.0 * rotated[(m, n)].norm_sqr() / (de * de);
            }
        }
    }
    if n_positive != spec.n_sites {
        return Err(Error::numerical(
            format!("{n_positive} positive modes for {} sites", spec.n_sites),
            format!("momentum blocks of {:?}", spec.boundary),
        ));
    }
    Ok(BlochQfi {
        value: total,
        min_energy,
        gap_closed: min_energy < GAP_CLOSED,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::xy::bdg::decompose;

    #[test]
    fn blocks_are_hermitian() {
        let spec = XYChainSpec::new(12, 3)
            .unwrap()
            .with_inter_coupling(0.4)
            .with_anisotropy(0.3)
            .with_field(0.2);
        for q in momenta(&spec) {
            let m = bloch_bdg(&spec, q).unwrap();
            assert!((&m - m.adjoint()).norm() < 1e-15);
        }
    }

    #[test]
    fn spectrum_matches_real_space() {
        for boundary in [Boundary::Periodic, Boundary::Antiperiodic] {
            for r in 1..=3 {
                let spec = XYChainSpec::new(6 * r, r)
                    .unwrap()
                    .with_inter_coupling(0.45)
                    .with_anisotropy(0.35)
                    .with_field(0.3)
                    .with_boundary(boundary);
                let real = decompose(&spec).unwrap().energies;
                let bloch = bloch_energies(&spec).unwrap();
                assert_eq!(real.len(), bloch.len());
                for (a, b) in real.iter().zip(&bloch) {
                    assert!((a - b).abs() < 1e-12, "{boundary:?} r={r}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn open_chain_is_rejected() {
        let spec = XYChainSpec::uniform(6).unwrap().with_boundary(Boundary::Open);
        assert!(qfi_bloch(&spec, Parameter::Field).is_err());
    }
}
