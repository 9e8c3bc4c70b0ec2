//! Small dense linear-algebra helpers shared by the free-fermion, exact
//! diagonalization and band-structure code.

use nalgebra::{ComplexField, DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

const EIGEN_EPS: f64 = 1e-15;
const EIGEN_MAX_ITER: usize = 10_000;

/// Short identifier of a matrix for error messages: shape, Frobenius norm and
/// a hash prefix of the raw entries.
pub fn fingerprint<T: ComplexField<RealField = f64>>(m: &DMatrix<T>) -> String {
    let mut hasher = Sha256::new();
    for x in m.iter() {
        hasher.update(x.clone().real().to_le_bytes());
        hasher.update(x.clone().imaginary().to_le_bytes());
    }
    let digest = hasher.finalize();
    let hex: String = digest.iter().take(6).map(|b| format!("{b:02x}")).collect();
    format!("{}x{} |m|={:.6e} #{}", m.nrows(), m.ncols(), m.norm(), hex)
}

/// Hermitian eigendecomposition with eigenvalues sorted ascending.
/// Columns of the returned matrix are the matching eigenvectors.
pub fn eigh<T>(m: DMatrix<T>) -> Result<(Vec<f64>, DMatrix<T>)>
where
    T: ComplexField<RealField = f64>,
{
    let fp = fingerprint(&m);
    let n = m.nrows();
    let eig = SymmetricEigen::try_new(m, EIGEN_EPS, EIGEN_MAX_ITER)
        .ok_or_else(|| Error::numerical("Hermitian eigensolver did not converge", fp.clone()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::numerical("non-finite eigenvalue", fp));
    }
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])].clone());
    Ok((values, vectors))
}

/// Flip the sign of a real column so its largest-magnitude entry is positive.
pub fn fix_sign(col: &mut DVector<f64>) {
    if let Some(big) = col.iter().copied().max_by(|a, b| a.abs().total_cmp(&b.abs())) {
        if big < 0.0 {
            col.neg_mut();
        }
    }
}

/// Rotate a complex column so its largest-magnitude entry is real positive.
pub fn fix_phase(col: &mut DVector<Complex64>) {
    let big = col
        .iter()
        .copied()
        .max_by(|a, b| a.norm_sqr().total_cmp(&b.norm_sqr()));
    if let Some(z) = big {
        let n = z.norm();
        if n > 0.0 {
            let phase = z.conj() / n;
            col.iter_mut().for_each(|x| *x *= phase);
        }
    }
}

/// `Σ ln cos²θ_i` over the principal angles between the column spaces of two
/// matrices with orthonormal columns.
///
/// The squared sines are the eigenvalues of `Yᴴ Y` with `Y = (1 − X₁X₁ᴴ) X₂`,
/// which keeps full relative precision when the subspaces nearly coincide.
pub fn log_cos_sq_sum<T>(x1: &DMatrix<T>, x2: &DMatrix<T>) -> Result<f64>
where
    T: ComplexField<RealField = f64>,
{
    if x1.shape() != x2.shape() {
        return Err(Error::validation(format!(
            "subspace shapes differ: {:?} vs {:?}",
            x1.shape(),
            x2.shape()
        )));
    }
    let proj = x1.adjoint() * x2;
    let y = x2 - x1 * &proj;
    let gram = y.adjoint() * &y;
    let (sines_sq, _) = eigh(gram)?;
    let mut acc = 0.0;
    for s2 in sines_sq {
        let s2 = s2.clamp(0.0, 1.0);
        if s2 >= 1.0 {
            return Ok(f64::NEG_INFINITY);
        }
        acc += (-s2).ln_1p();
    }
    Ok(acc)
}

/// Orthogonal (unitary) polar factor of a square matrix, plus its smallest
/// singular value.
pub fn polar_factor<T>(m: DMatrix<T>) -> Result<(DMatrix<T>, f64)>
where
    T: ComplexField<RealField = f64>,
{
    let fp = fingerprint(&m);
    let svd = m
        .try_svd(true, true, EIGEN_EPS, EIGEN_MAX_ITER)
        .ok_or_else(|| Error::numerical("SVD did not converge", fp.clone()))?;
    let u = svd.u.ok_or_else(|| Error::numerical("SVD missing U", fp.clone()))?;
    let v_t = svd.v_t.ok_or_else(|| Error::numerical("SVD missing Vᵀ", fp))?;
    let smin = svd.singular_values.iter().copied().fold(f64::INFINITY, f64::min);
    Ok((u * v_t, smin))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigh_sorts_ascending() {
        let m = DMatrix::from_row_slice(3, 3, &[2.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 0.5]);
        let (vals, vecs) = eigh(m.clone()).unwrap();
        assert_eq!(vals, vec![-1.0, 0.5, 2.0]);
        for (k, &v) in vals.iter().enumerate() {
            let col = vecs.column(k);
            assert!((&m * col - col * v).norm() < 1e-14);
        }
    }

    #[test]
    fn identical_subspaces_have_zero_angle() {
        let x = DMatrix::<f64>::identity(4, 2);
        assert_eq!(log_cos_sq_sum(&x, &x).unwrap(), 0.0);
    }

    #[test]
    fn rotated_plane_gives_cos_squared() {
        let t: f64 = 0.3;
        let x1 = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let x2 = DMatrix::from_column_slice(2, 1, &[t.cos(), t.sin()]);
        let got = log_cos_sq_sum(&x1, &x2).unwrap();
        assert!((got - (t.cos().powi(2)).ln()).abs() < 1e-14);
    }

    #[test]
    fn phase_fix_makes_dominant_entry_real() {
        let mut v = DVector::from_vec(vec![
            Complex64::new(0.1, 0.0),
            Complex64::new(0.0, -0.9),
        ]);
        fix_phase(&mut v);
        assert!(v[1].im.abs() < 1e-15 && v[1].re > 0.0);
    }
}
