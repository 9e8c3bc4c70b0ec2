//! Real-space Bogoliubov-de Gennes form of the modular XY chain.

use nalgebra::{DMatrix, DVector};

use super::spec::{Boundary, XYChainSpec};
use crate::error::{Error, Result};
use crate::linalg::{eigh, fix_sign};

/// Smallest quasiparticle energy below which the gap is treated as closed.
pub const GAP_CLOSED: f64 = 1e-12;

/// `H̃ = [[A, B], [−B, −A]]` with `A` symmetric and `B` antisymmetric, acting
/// on the Nambu vector `(c₁ … c_N, c₁† … c_N†)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BdGMatrix {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
}

impl BdGMatrix {
    pub fn n_sites(&self) -> usize {
        self.a.nrows()
    }

    /// The assembled `2N × 2N` matrix.
    pub fn full(&self) -> DMatrix<f64> {
        let n = self.n_sites();
        let mut m = DMatrix::zeros(2 * n, 2 * n);
        m.view_mut((0, 0), (n, n)).copy_from(&self.a);
        m.view_mut((0, n), (n, n)).copy_from(&self.b);
        m.view_mut((n, 0), (n, n)).copy_from(&(-&self.b));
        m.view_mut((n, n), (n, n)).copy_from(&(-&self.a));
        m
    }
}

/// Assemble the BdG matrix of a chain.
///
/// `A_jj = h_j`, `A_{j,j+1} = −J_{j,j+1}/2`, `B_{j,j+1} = −γ J_{j,j+1}/2`.
/// The wrap-around bond of an antiperiodic chain enters with flipped sign.
pub fn build_bdg_matrix(spec: &XYChainSpec) -> Result<BdGMatrix> {
    let bonds = spec.build_couplings()?;
    let n = spec.n_sites;
    let gamma = spec.anisotropy;
    let mut a = DMatrix::from_diagonal(&DVector::from_vec(spec.fields()));
    let mut b = DMatrix::zeros(n, n);
    for (j, &coupling) in bonds.iter().enumerate() {
        let k = (j + 1) % n;
        let sign = if k == 0 && spec.boundary == Boundary::Antiperiodic {
            -1.0
        } else {
            1.0
        };
        let hop = -sign * coupling / 2.0;
        let pair = -sign * gamma * coupling / 2.0;
        a[(j, k)] += hop;
        a[(k, j)] += hop;
        b[(j, k)] += pair;
        b[(k, j)] -= pair;
    }
    Ok(BdGMatrix { a, b })
}

/// Positive-energy half of the BdG spectrum.
///
/// Column `k` of the stacked matrix `[U; V]` is the eigenvector of `H̃` with
/// eigenvalue `energies[k] ≥ 0`; its partner at `−energies[k]` is `[V; U]`.
/// The many-body ground state is the vacuum of these modes, with energy
/// `−Σ energies`.
#[derive(Debug, Clone)]
pub struct BogoliubovDecomposition {
    pub u: DMatrix<f64>,
    pub v: DMatrix<f64>,
    pub energies: Vec<f64>,
    /// Largest `|λ_i + λ_{2N−1−i}|` over the sorted full spectrum.
    pub pairing_residual: f64,
}

impl BogoliubovDecomposition {
    pub fn n_sites(&self) -> usize {
        self.u.nrows()
    }

    /// `[U; V]` as a `2N × N` matrix with orthonormal columns.
    pub fn stacked(&self) -> DMatrix<f64> {
        let n = self.n_sites();
        let mut x = DMatrix::zeros(2 * n, n);
        x.view_mut((0, 0), (n, n)).copy_from(&self.u);
        x.view_mut((n, 0), (n, n)).copy_from(&self.v);
        x
    }

    pub fn ground_energy(&self) -> f64 {
        -self.energies.iter().sum::<f64>()
    }

    pub fn min_energy(&self) -> f64 {
        self.energies.first().copied().unwrap_or(f64::INFINITY)
    }

    pub fn gap_closed(&self) -> bool {
        self.min_energy() < GAP_CLOSED
    }

    /// `‖UᵀU + VᵀV − I‖_max`.
    pub fn orthonormality_residual(&self) -> f64 {
        let n = self.n_sites();
        let g = self.u.transpose() * &self.u + self.v.transpose() * &self.v;
        (g - DMatrix::<f64>::identity(n, n)).amax()
    }

    /// Fermion parity `∏(1 − 2c†c)` of the quasiparticle vacuum: `+1` even,
    /// `−1` odd.
    ///
    /// The Majorana pairs `c + c†` and `−i(c − c†)` are rotated by `U + V` and
    /// `U − V`; the vacuum parity is the product of the two determinants.
    pub fn vacuum_parity(&self) -> i8 {
        let plus = (&self.u + &self.v).determinant();
        let minus = (&self.u - &self.v).determinant();
        if plus * minus >= 0.0 {
            1
        } else {
            -1
        }
    }
}

/// Diagonalize `H̃` and keep the positive-energy eigenvectors.
///
/// Columns are ordered by ascending energy. Each column is sign-fixed so that
/// its largest-magnitude entry is positive; columns with equal energy (to
/// within `1e-10`) are then ordered lexicographically.
pub fn diagonalize_bdg(m: &BdGMatrix) -> Result<BogoliubovDecomposition> {
    let n = m.n_sites();
    let full = m.full();
    let scale = full.amax().max(1.0);
    let (values, vectors) = eigh(full)?;
    let pairing_residual = (0..n)
        .map(|i| (values[i] + values[2 * n - 1 - i]).abs())
        .fold(0.0, f64::max);
    if pairing_residual > 1e-8 * scale {
        return Err(Error::numerical(
            format!("BdG spectrum not paired (residual {pairing_residual:.3e})"),
            crate::linalg::fingerprint(&m.full()),
        ));
    }

    let mut cols: Vec<(f64, DVector<f64>)> = (n..2 * n)
        .map(|k| {
            let mut c = vectors.column(k).into_owned();
            fix_sign(&mut c);
            (values[k].max(0.0), c)
        })
        .collect();
    // Levels closer than `tie` form one degenerate group: its vectors are
    // ordered lexicographically for a reproducible basis and share the mean
    // energy, so the list stays sorted.
    let tie = 1e-10 * scale;
    cols.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut start = 0;
    while start < cols.len() {
        let mut end = start + 1;
        while end < cols.len() && cols[end].0 - cols[start].0 <= tie {
            end += 1;
        }
        if end - start > 1 {
            let group = &mut cols[start..end];
            let mean = group.iter().map(|c| c.0).sum::<f64>() / group.len() as f64;
            group.sort_by(|(_, va), (_, vb)| {
                va.iter()
                    .zip(vb.iter())
                    .map(|(x, y)| x.total_cmp(y))
                    .find(|o| o.is_ne())
                    .unwrap_or(std::cmp::Ordering::Equal)
            });
            group.iter_mut().for_each(|c| c.0 = mean);
        }
        start = end;
    }

    let mut u = DMatrix::zeros(n, n);
    let mut v = DMatrix::zeros(n, n);
    let mut energies = Vec::with_capacity(n);
    for (k, (e, c)) in cols.into_iter().enumerate() {
        u.set_column(k, &c.rows(0, n));
        v.set_column(k, &c.rows(n, n));
        energies.push(e);
    }
    Ok(BogoliubovDecomposition {
        u,
        v,
        energies,
        pairing_residual,
    })
}

/// Build and diagonalize in one step.
pub fn decompose(spec: &XYChainSpec) -> Result<BogoliubovDecomposition> {
    diagonalize_bdg(&build_bdg_matrix(spec)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::xy::spec::Boundary;

    fn uniform(n: usize, h: f64, gamma: f64, boundary: Boundary) -> XYChainSpec {
        XYChainSpec::uniform(n)
            .unwrap()
            .with_field(h)
            .with_anisotropy(gamma)
            .with_boundary(boundary)
    }

    #[test]
    fn uniform_entries() {
        let m = build_bdg_matrix(&uniform(4, 0.7, 1.0, Boundary::Open)).unwrap();
        for j in 0..4 {
            assert_eq!(m.a[(j, j)], 0.7);
        }
        for j in 0..3 {
            assert_eq!(m.a[(j, j + 1)], -0.5);
            assert_eq!(m.a[(j + 1, j)], -0.5);
            assert_eq!(m.b[(j, j + 1)], -0.5);
            assert_eq!(m.b[(j + 1, j)], 0.5);
        }
        assert_eq!(m.a[(0, 3)], 0.0);
    }

    #[test]
    fn isotropic_has_no_pairing() {
        let m = build_bdg_matrix(&uniform(6, 0.3, 0.0, Boundary::Periodic)).unwrap();
        assert!(m.b.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn modular_bond_entries() {
        let gamma = 0.3;
        let spec = XYChainSpec::new(4, 2)
            .unwrap()
            .with_inter_coupling(0.4)
            .with_anisotropy(gamma)
            .with_boundary(Boundary::Periodic);
        let m = build_bdg_matrix(&spec).unwrap();
        assert_eq!(m.a[(1, 2)], -0.2);
        assert!((m.b[(1, 2)] + 0.2 * gamma).abs() < 1e-16);
        assert!((m.b[(2, 1)] - 0.2 * gamma).abs() < 1e-16);
        assert_eq!(m.a[(3, 0)], -0.2);
        assert!((m.b[(3, 0)] + 0.2 * gamma).abs() < 1e-16);
    }

    #[test]
    fn antiperiodic_flips_wrap_bond_only() {
        let p = build_bdg_matrix(&uniform(5, 0.2, 0.5, Boundary::Periodic)).unwrap();
        let ap = build_bdg_matrix(&uniform(5, 0.2, 0.5, Boundary::Antiperiodic)).unwrap();
        assert_eq!(ap.a[(4, 0)], -p.a[(4, 0)]);
        assert_eq!(ap.b[(4, 0)], -p.b[(4, 0)]);
        assert_eq!(ap.b[(0, 4)], -p.b[(0, 4)]);
        assert_eq!(ap.a[(1, 2)], p.a[(1, 2)]);
    }

    #[test]
    fn blocks_have_required_symmetry() {
        let spec = XYChainSpec::new(9, 3)
            .unwrap()
            .with_inter_coupling(0.6)
            .with_anisotropy(0.4)
            .with_field_profile((0..9).map(|i| 0.1 * i as f64).collect());
        let m = build_bdg_matrix(&spec).unwrap();
        assert_eq!(m.a.transpose(), m.a);
        assert_eq!(m.b.transpose(), -&m.b);
        let full = m.full();
        assert_eq!(full.transpose(), full);
    }

    #[test]
    fn strong_field_limit() {
        let h = 1e3;
        let d = decompose(&uniform(8, h, 0.7, Boundary::Antiperiodic)).unwrap();
        for &e in &d.energies {
            assert!((e - h).abs() < 1.0, "{e}");
        }
        assert!((d.ground_energy() / (-8.0 * h) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn gauge_is_deterministic() {
        let spec = uniform(10, 0.4, 0.6, Boundary::Antiperiodic);
        let d1 = decompose(&spec).unwrap();
        let d2 = decompose(&spec).unwrap();
        assert_eq!(d1.u, d2.u);
        assert_eq!(d1.v, d2.v);
        for k in 0..10 {
            let col = d1.stacked().column(k).into_owned();
            let big = col.iter().copied().max_by(|a, b| a.abs().total_cmp(&b.abs())).unwrap();
            assert!(big > 0.0);
        }
    }
}
