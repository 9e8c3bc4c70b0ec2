//! Modular SSH chain: Bloch bands, per-band fidelity susceptibility with
//! respect to the intra-cell coupling `J₂`, the half-filling sum, gap
//! closings, and a topological index.
//!
//! A cell holds `r` dimers (`2r` sites). Bonds alternate `J₁ = 1`, `J₂`,
//! `J₁`, ..., `J₁` inside the cell and the last site couples to the first
//! site of the next cell with `J`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{eigh, fix_phase};
use crate::optim::golden_section;
use crate::par::{self, Execution};

/// Bands closer than this are treated as touching.
pub const DEGENERACY: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SshChainSpec {
    pub dimers_per_cell: usize,
    pub j1: f64,
    pub j2: f64,
    pub inter_coupling: f64,
    pub n_cells: usize,
}

impl SshChainSpec {
    pub fn new(dimers_per_cell: usize, j2: f64, inter_coupling: f64, n_cells: usize) -> Result<Self> {
        let s = SshChainSpec { dimers_per_cell, j1: 1.0, j2, inter_coupling, n_cells };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dimers_per_cell == 0 || self.n_cells == 0 {
            return Err(Error::validation("SSH chain needs at least one dimer per cell and one cell"));
        }
        for (name, v) in [("J1", self.j1), ("J2", self.j2), ("J", self.inter_coupling)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::validation(format!("{name} must be positive and finite, got {v}")));
            }
        }
        Ok(())
    }

    pub fn n_sites(&self) -> usize {
        2 * self.dimers_per_cell * self.n_cells
    }

    pub fn bands(&self) -> usize {
        2 * self.dimers_per_cell
    }

    pub fn with_j2(mut self, j2: f64) -> Self {
        self.j2 = j2;
        self
    }

    pub fn with_inter_coupling(mut self, j: f64) -> Self {
        self.inter_coupling = j;
        self
    }

    pub fn with_cells(mut self, n_cells: usize) -> Self {
        self.n_cells = n_cells;
        self
    }

    /// `p_k = 2πk/l`.
    pub fn momenta(&self) -> Vec<f64> {
        let l = self.n_cells as f64;
        (0..self.n_cells).map(|k| 2.0 * PI * k as f64 / l).collect()
    }

    /// Coupling on the bond from cell site `s` to `s + 1`.
    fn intra_bond(&self, s: usize) -> f64 {
        if s.is_multiple_of(2) {
            self.j1
        } else {
            self.j2
        }
    }
}

/// `2r × 2r` Bloch Hamiltonian with the inter-cell bond in the corner.
pub fn build_bloch(spec: &SshChainSpec, p: f64) -> DMatrix<Complex64> {
    let m = spec.bands();
    let mut h = DMatrix::<Complex64>::zeros(m, m);
    for s in 0..m - 1 {
        let t = Complex64::new(spec.intra_bond(s), 0.0);
        h[(s, s + 1)] = t;
        h[(s + 1, s)] = t;
    }
    let corner = Complex64::from_polar(spec.inter_coupling, -p);
    h[(0, m - 1)] += corner;
    h[(m - 1, 0)] += corner.conj();
    h
}

/// `∂H/∂J₂`, independent of momentum.
pub fn bloch_derivative_j2(spec: &SshChainSpec) -> DMatrix<Complex64> {
    let m = spec.bands();
    let mut d = DMatrix::<Complex64>::zeros(m, m);
    for s in (1..m - 1).step_by(2) {
        d[(s, s + 1)] = Complex64::new(1.0, 0.0);
        d[(s + 1, s)] = Complex64::new(1.0, 0.0);
    }
    d
}

/// `Γ = diag(+1, −1, +1, ...)`.
pub fn chiral_operator(bands: usize) -> DMatrix<Complex64> {
    DMatrix::from_fn(bands, bands, |i, k| {
        if i == k {
            Complex64::new(if i % 2 == 0 { 1.0 } else { -1.0 }, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

/// Off-diagonal block `h(p)` (even rows, odd columns) of the Bloch matrix.
pub fn chiral_block(spec: &SshChainSpec, p: f64) -> DMatrix<Complex64> {
    let h = build_bloch(spec, p);
    let r = spec.dimers_per_cell;
    DMatrix::from_fn(r, r, |a, b| h[(2 * a, 2 * b + 1)])
}

#[derive(Debug, Clone, PartialEq)]
pub struct BandsAt {
    pub p: f64,
    pub energies: Vec<f64>,
    /// Columns are eigenvectors, largest component real positive.
    pub vectors: DMatrix<Complex64>,
}

pub fn bands_at(spec: &SshChainSpec, p: f64) -> Result<BandsAt> {
    let (energies, mut vectors) = eigh(build_bloch(spec, p))?;
    for mut col in vectors.column_iter_mut() {
        let mut v: DVector<Complex64> = col.clone_owned();
        fix_phase(&mut v);
        col.copy_from(&v);
    }
    Ok(BandsAt { p, energies, vectors })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BandStructure {
    pub spec: SshChainSpec,
    pub points: Vec<BandsAt>,
}

impl BandStructure {
    /// Lowest `r` bands are filled at half filling.
    pub fn occupied(&self) -> std::ops::Range<usize> {
        0..self.spec.dimers_per_cell
    }
}

pub fn band_structure(spec: &SshChainSpec, momenta: &[f64], exec: Execution) -> Result<BandStructure> {
    spec.validate()?;
    let points = par::map(momenta, exec, |&p| bands_at(spec, p)).into_iter().collect::<Result<Vec<_>>>()?;
    Ok(BandStructure { spec: *spec, points })
}

/// Positive branches `ω₁ ≤ ω₂` of the two-dimer spectrum, with `J₀ ≡ J₂`.
pub fn closed_form_omegas(j0: f64, j: f64, p: f64) -> (f64, f64) {
    let s = j0 * j0 + j * j + 2.0;
    let c = 1.0 + j0 * j0 * j * j - 2.0 * j0 * j * p.cos();
    let d = (s * s - 4.0 * c).max(0.0).sqrt();
    (((s - d) / 2.0).max(0.0).sqrt(), ((s + d) / 2.0).sqrt())
}

/// Unnormalized two-dimer vector `(α, β, γ, δ)` for parameter `Ω`, and its
/// derivative with respect to `J₀` along the branch `Ω(J₀)`.
///
/// The vector solves `H v = −Ω v`; since `Γ` maps it onto the `+Ω` state,
/// both share the same fidelity susceptibility.
pub fn closed_form_vector(j0: f64, j: f64, p: f64, omega: f64, d_omega: f64) -> ([Complex64; 4], [Complex64; 4]) {
    let e = Complex64::from_polar(1.0, -p);
    let w2 = omega * omega;
    let dw2 = 2.0 * omega * d_omega;
    let v = [
        j * (w2 - j0 * j0) * e + j0,
        -omega * (j0 + j * e),
        Complex64::new(w2 - 1.0, 0.0) + j * j0 * e,
        Complex64::new(omega * (1.0 + j0 * j0 - w2), 0.0),
    ];
    let dv = [
        j * (dw2 - 2.0 * j0) * e + 1.0,
        -d_omega * (j0 + j * e) - omega,
        Complex64::new(dw2, 0.0) + j * e,
        Complex64::new(d_omega * (1.0 + j0 * j0 - w2) + omega * (2.0 * j0 - dw2), 0.0),
    ];
    (v, dv)
}

/// `dΩ/dJ₀` on the branch `upper` (ω₂) or lower (ω₁), for `Ω = ±ω`.
pub fn closed_form_d_omega(j0: f64, j: f64, p: f64, omega: f64, upper: bool) -> f64 {
    let s = j0 * j0 + j * j + 2.0;
    let c = 1.0 + j0 * j0 * j * j - 2.0 * j0 * j * p.cos();
    let d = (s * s - 4.0 * c).sqrt();
    let ds = 2.0 * j0;
    let dc = 2.0 * j0 * j * j - 2.0 * j * p.cos();
    let dd = (2.0 * s * ds - 4.0 * dc) / (2.0 * d);
    let dw2 = if upper { (ds + dd) / 2.0 } else { (ds - dd) / 2.0 };
    dw2 / (2.0 * omega)
}

/// Fidelity susceptibility of band `i` (ascending order, `r = 2` only) from
/// the closed-form eigenvectors.
pub fn closed_form_band_susceptibility(j0: f64, j: f64, p: f64, band: usize) -> Result<f64> {
    let (w1, w2) = closed_form_omegas(j0, j, p);
    let (omega, upper) = match band {
        0 => (-w2, true),
        1 => (-w1, false),
        2 => (w1, false),
        3 => (w2, true),
        _ => return Err(Error::validation("two-dimer chain has 4 bands")),
    };
    // the closed-form vector at Ω is the eigenvector of −Ω
    let omega = -omega;
    let d_omega = closed_form_d_omega(j0, j, p, omega, upper);
    let (v, dv) = closed_form_vector(j0, j, p, omega, d_omega);
    let norm2: f64 = v.iter().map(|x| x.norm_sqr()).sum();
    if !(norm2 > 1e-20) {
        return Err(Error::numerical("closed-form eigenvector vanishes", format!("J0={j0} J={j} p={p}")));
    }
    let n2 = 1.0 / norm2;
    let grad: f64 = dv.iter().map(|x| x.norm_sqr()).sum();
    let overlap: Complex64 = v.iter().zip(&dv).map(|(a, b)| a.conj() * b).sum();
    Ok(n2 * grad - n2 * n2 * overlap.norm_sqr())
}

/// Fidelity susceptibility `⟨∂ψ|∂ψ⟩ − |⟨ψ|∂ψ⟩|²` of every band with respect
/// to `J₂` at momentum `p`, from first-order perturbation theory.
pub fn band_susceptibilities(spec: &SshChainSpec, p: f64) -> Result<BandSusceptibility> {
    let bands = bands_at(spec, p)?;
    let dh = bloch_derivative_j2(spec);
    let rotated = bands.vectors.adjoint() * dh * &bands.vectors;
    let m = spec.bands();
    let mut chi = vec![0.0; m];
    let mut degenerate = false;
    for i in 0..m {
        for k in 0..m {
            if k == i {
                continue;
            }
            let de = bands.energies[i] - bands.energies[k];
            if de.abs() < DEGENERACY {
                degenerate = true;
                continue;
            }
            chi[i] += rotated[(k, i)].norm_sqr() / (de * de);
        }
    }
    Ok(BandSusceptibility { p, chi, degenerate })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandSusceptibility {
    pub p: f64,
    /// Raw fidelity susceptibility per band; the QFI is four times this.
    pub chi: Vec<f64>,
    /// Some band touches another within [`DEGENERACY`]; its value is partial.
    pub degenerate: bool,
}

/// Band susceptibility from central differences of the eigenvector, step
/// `δ = 1e-6 · max(1, J₂)` unless given.
pub fn band_susceptibility_fd(spec: &SshChainSpec, p: f64, band: usize, step: Option<f64>) -> Result<f64> {
    if band >= spec.bands() {
        return Err(Error::validation(format!("band {band} out of range")));
    }
    let d = step.unwrap_or(1e-6 * spec.j2.max(1.0));
    let psi = bands_at(spec, p)?.vectors.column(band).clone_owned();
    // parallel-transport gauge: neighbours are rotated onto the center
    // vector, which stays well defined when component magnitudes tie
    let aligned = |j2: f64| -> Result<DVector<Complex64>> {
        let v = bands_at(&spec.with_j2(j2), p)?.vectors.column(band).clone_owned();
        let o = psi.dotc(&v);
        if o.norm() < 0.5 {
            return Err(Error::numerical("band reordered inside the difference stencil", format!("p={p} band={band}")));
        }
        Ok(v * (o.conj() / o.norm()))
    };
    let plus = aligned(spec.j2 + d)?;
    let minus = aligned(spec.j2 - d)?;
    let dpsi = (plus - minus) / Complex64::new(2.0 * d, 0.0);
    let overlap = psi.dotc(&dpsi);
    Ok(dpsi.norm_squared() - overlap.norm_sqr())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HalfFillingQfi {
    /// `4 Σ_k Σ_{i occupied} χ_i(p_k)`.
    pub qfi: f64,
    /// The `p = π` term, present for every even number of cells.
    pub zone_edge: f64,
    /// A sampled momentum where an occupied band touches another band.
    pub divergence: Option<f64>,
}

/// Half-filling QFI: per-band susceptibilities of the `r` lowest bands summed
/// over the `l` crystal momenta, times four.
pub fn half_filling_qfi(spec: &SshChainSpec, exec: Execution) -> Result<HalfFillingQfi> {
    spec.validate()?;
    if spec.n_cells < 2 {
        return Err(Error::validation("half-filling sum needs at least 2 cells"));
    }
    let ps = spec.momenta();
    let per_p = par::map(&ps, exec, |&p| band_susceptibilities(spec, p))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let r = spec.dimers_per_cell;
    let mut total = 0.0;
    let mut zone_edge = 0.0;
    let mut divergence = None;
    for s in &per_p {
        let occupied: f64 = s.chi[..r].iter().sum();
        total += occupied;
        if (s.p - PI).abs() < 1e-12 {
            zone_edge += 4.0 * occupied;
        }
        if s.degenerate && divergence.is_none() {
            divergence = Some(s.p);
        }
    }
    Ok(HalfFillingQfi { qfi: 4.0 * total, zone_edge, divergence })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindingResult {
    /// Composite index `|w| + 2 z`.
    pub index: i64,
    /// Chiral winding of `det h(p)`.
    pub winding: i64,
    /// Bond-centered Zak parity of the lowest band (0 or 1).
    pub zak_parity: i64,
    /// Largest distance of a raw invariant from its nearest integer.
    pub residual: f64,
    pub j2: f64,
    pub inter_coupling: f64,
    pub dimers_per_cell: usize,
    pub samples: usize,
}

fn zone_samples(samples: usize) -> Vec<f64> {
    (0..samples).map(|k| -PI + 2.0 * PI * k as f64 / samples as f64).collect()
}

/// Winding number of `det h(p)` around the Brillouin zone.
/// Returns the raw winding and, if the gap closes on the grid, the momentum
/// where it is smallest.
pub fn chiral_winding(spec: &SshChainSpec, samples: usize) -> Result<(f64, Option<f64>)> {
    let mut min_gap = f64::INFINITY;
    let mut min_p = 0.0;
    let mut phase = 0.0;
    let ps = zone_samples(samples);
    let dets: Vec<Complex64> = ps.iter().map(|&p| chiral_block(spec, p).determinant()).collect();
    for (k, &p) in ps.iter().enumerate() {
        let e = bands_at(spec, p)?.energies;
        let gap = e.iter().map(|x| x.abs()).fold(f64::INFINITY, f64::min);
        if gap < min_gap {
            min_gap = gap;
            min_p = p;
        }
        let next = dets[(k + 1) % samples];
        phase += (next / dets[k]).arg();
    }
    Ok((phase / (2.0 * PI), (min_gap <= 1e-8).then_some(min_p)))
}

/// Berry phase of the lowest band over the zone, in units of `π`.
fn lowest_band_zak(spec: &SshChainSpec, samples: usize) -> Result<(f64, Option<f64>)> {
    let ps = zone_samples(samples);
    let mut vecs = Vec::with_capacity(samples);
    let mut min_gap = f64::INFINITY;
    let mut min_p = 0.0;
    for &p in &ps {
        let b = bands_at(spec, p)?;
        let gap = b.energies[1] - b.energies[0];
        if gap < min_gap {
            min_gap = gap;
            min_p = p;
        }
        vecs.push(b.vectors.column(0).clone_owned());
    }
    let mut w = Complex64::new(1.0, 0.0);
    for k in 0..samples {
        w *= vecs[k].dotc(&vecs[(k + 1) % samples]);
    }
    Ok((-w.arg() / PI, (min_gap <= 1e-8).then_some(min_p)))
}

/// Topological index of the half-filled chain: the chiral winding `w` of
/// `det h(p)` plus twice the bond-centered Zak parity `z` of the lowest band.
///
/// For one dimer per cell this is the usual SSH winding. With two dimers the
/// winding alone only separates `J·J₂ ≷ 1`; the Zak parity of the lowest
/// band flips at `J = J₂`, where the two lower bands touch at `p = π`.
pub fn winding_number(spec: &SshChainSpec, samples: usize) -> Result<WindingResult> {
    spec.validate()?;
    if samples < 8 {
        return Err(Error::validation("winding needs at least 8 momentum samples"));
    }
    let (w_raw, closed) = chiral_winding(spec, samples)?;
    if let Some(momentum) = closed {
        return Err(Error::GapClosed { momentum });
    }
    let (zak_raw, closed) = lowest_band_zak(spec, samples)?;
    if let Some(momentum) = closed {
        return Err(Error::GapClosed { momentum });
    }
    let winding = w_raw.round();
    // the Bloch gauge puts every orbital at the cell origin; shift to the
    // cell-bond center by π
    let atomic = zak_raw.rem_euclid(2.0);
    let atomic_parity = atomic.round().rem_euclid(2.0);
    let zak_residual = (atomic - atomic.round()).abs();
    let zak_parity = if spec.dimers_per_cell > 1 { 1 - atomic_parity as i64 } else { 0 };
    let residual = (w_raw - winding).abs().max(zak_residual);
    Ok(WindingResult {
        index: winding.abs() as i64 + 2 * zak_parity,
        winding: winding as i64,
        zak_parity,
        residual,
        j2: spec.j2,
        inter_coupling: spec.inter_coupling,
        dimers_per_cell: spec.dimers_per_cell,
        samples,
    })
}

/// Smallest gap between bands `i` and `i + 1` over the zone.
pub fn min_band_gap(spec: &SshChainSpec, lower: usize, samples: usize) -> Result<(f64, f64)> {
    let gap_at = |p: f64| -> f64 {
        bands_at(spec, p).map(|b| b.energies[lower + 1] - b.energies[lower]).unwrap_or(f64::INFINITY)
    };
    let ps = zone_samples(samples);
    let step = 2.0 * PI / samples as f64;
    let (k, _) = ps
        .iter()
        .map(|&p| gap_at(p))
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .ok_or_else(|| Error::validation("no momentum samples"))?;
    let (p, g) = golden_section(gap_at, ps[k] - step, ps[k] + step, 1e-12);
    let p = (p + PI).rem_euclid(2.0 * PI) - PI;
    Ok((g, p))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapClosing {
    pub j: f64,
    /// Index of the lower of the two touching bands.
    pub lower_band: usize,
    pub momentum: f64,
    pub gap: f64,
    /// The touching pair straddles zero energy.
    pub zero_energy: bool,
}

/// Values of `J` in `[lo, hi]` where some pair of adjacent bands touches.
pub fn gap_closings(spec: &SshChainSpec, interval: (f64, f64), scan: usize, samples: usize) -> Result<Vec<GapClosing>> {
    spec.validate()?;
    let (lo, hi) = interval;
    if !(lo > 0.0 && lo < hi) || scan < 3 {
        return Err(Error::validation("gap-closing scan needs 0 < lo < hi and at least 3 points"));
    }
    let m = spec.bands();
    let js: Vec<f64> = (0..scan).map(|i| lo * (hi / lo).powf(i as f64 / (scan - 1) as f64)).collect();
    let mut out = Vec::new();
    for lower in 0..m - 1 {
        let g = |j: f64| min_band_gap(&spec.with_inter_coupling(j), lower, samples).map(|x| x.0).unwrap_or(f64::INFINITY);
        let vals: Vec<f64> = js.iter().map(|&j| g(j)).collect();
        for i in 1..scan - 1 {
            if vals[i] <= vals[i - 1] && vals[i] <= vals[i + 1] {
                let (j, gap) = golden_section(g, js[i - 1], js[i + 1], 1e-10);
                if gap < 1e-6 {
                    let (_, p) = min_band_gap(&spec.with_inter_coupling(j), lower, samples)?;
                    out.push(GapClosing { j, lower_band: lower, momentum: p, gap, zero_energy: lower + 1 == m / 2 });
                }
            }
        }
    }
    out.sort_by(|a, b| a.j.total_cmp(&b.j).then(a.lower_band.cmp(&b.lower_band)));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two(j2: f64, j: f64) -> SshChainSpec {
        SshChainSpec::new(2, j2, j, 8).unwrap()
    }

    #[test]
    fn two_dimer_matrix_matches_layout() {
        let h = build_bloch(&two(0.7, 1.3), 0.4);
        let e = Complex64::from_polar(1.3, -0.4);
        assert_eq!(h[(0, 1)], Complex64::new(1.0, 0.0));
        assert_eq!(h[(1, 2)], Complex64::new(0.7, 0.0));
        assert_eq!(h[(2, 3)], Complex64::new(1.0, 0.0));
        assert_eq!(h[(0, 3)], e);
        assert_eq!(h[(3, 0)], e.conj());
    }

    #[test]
    fn zero_momentum_corner_is_real() {
        let h = build_bloch(&two(0.7, 1.3), 0.0);
        assert_eq!(h[(0, 3)], Complex64::new(1.3, 0.0));
    }

    #[test]
    fn opposite_momenta_are_conjugate() {
        let s = SshChainSpec::new(3, 1.7, 0.6, 4).unwrap();
        let a = build_bloch(&s, 0.9);
        let b = build_bloch(&s, -0.9);
        assert!((a.conjugate() - b).norm() < 1e-15);
    }

    #[test]
    fn bands_come_in_pairs() {
        let s = SshChainSpec::new(3, 1.7, 0.6, 4).unwrap();
        let e = bands_at(&s, 1.1).unwrap().energies;
        for i in 0..3 {
            assert!((e[i] + e[5 - i]).abs() < 1e-10);
        }
    }

    #[test]
    fn outer_bands_touch_at_zone_edge() {
        let (w1, w2) = closed_form_omegas(2.0, 2.0, PI);
        assert!((w1 - 5f64.sqrt()).abs() < 1e-12 && (w2 - 5f64.sqrt()).abs() < 1e-12);
        let e = bands_at(&two(2.0, 2.0), PI).unwrap().energies;
        assert!((e[3] - 5f64.sqrt()).abs() < 1e-7 && (e[2] - 5f64.sqrt()).abs() < 1e-7);
    }

    #[test]
    fn zero_mode_at_inverse_coupling() {
        let e = bands_at(&two(2.0, 0.5), 0.0).unwrap().energies;
        assert!(e[2].abs() < 1e-7);
    }

    #[test]
    fn one_dimer_is_plain_ssh() {
        assert_eq!(winding_number(&SshChainSpec::new(1, 1.0, 2.0, 4).unwrap(), 401).unwrap().index, 1);
        assert_eq!(winding_number(&SshChainSpec::new(1, 1.0, 0.5, 4).unwrap(), 401).unwrap().index, 0);
    }

    #[test]
    fn finite_difference_matches_perturbation() {
        let s = two(1.6, 0.8);
        let pert = band_susceptibilities(&s, 0.7).unwrap();
        for band in 0..4 {
            let fd = band_susceptibility_fd(&s, 0.7, band, None).unwrap();
            assert!((fd - pert.chi[band]).abs() < 1e-6 * pert.chi[band].max(1.0), "{band}: {fd} {}", pert.chi[band]);
        }
    }

    #[test]
    fn closed_gap_blocks_winding() {
        assert!(matches!(winding_number(&two(2.0, 0.5), 400), Err(Error::GapClosed { .. })));
    }
}
