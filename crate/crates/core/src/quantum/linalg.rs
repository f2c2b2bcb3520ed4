//! Small dense complex linear-algebra helpers shared by the simulator.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const I: C64 = C64 { re: 0.0, im: 1.0 };

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[inline]
pub fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

pub fn max_asymmetry(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn hermitize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * re(0.5)
}

pub fn check_finite(m: &CMatrix) -> Result<()> {
    if m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite)
    }
}

pub fn trace(m: &CMatrix) -> C64 {
    m.diagonal().iter().copied().sum()
}

/// Eigendecomposition of a Hermitian matrix; the input is symmetrized first.
/// Eigenvalues come back in ascending order.
pub fn eigh(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let eig = SymmetricEigen::new(hermitize(m));
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = CMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    (values, vectors)
}

/// Rebuild `V f(λ) V†` from an eigendecomposition.
pub fn from_spectrum(values: &[f64], vectors: &CMatrix, f: impl Fn(f64) -> C64) -> CMatrix {
    let n = values.len();
    let mut scaled = vectors.clone();
    for (j, &v) in values.iter().enumerate() {
        let s = f(v);
        for i in 0..n {
            scaled[(i, j)] *= s;
        }
    }
    scaled * vectors.adjoint()
}

/// Euclidean projection of a spectrum onto `{λ ≥ 0, Σλ = 1}`: a common shift, then clipping.
pub fn project_spectrum(values: &[f64]) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut shift = 0.0;
    let mut acc = 0.0;
    for (k, v) in sorted.iter().enumerate() {
        acc += v;
        let mu = (acc - 1.0) / (k + 1) as f64;
        if v - mu > 0.0 {
            shift = mu;
        }
    }
    values.iter().map(|v| (v - shift).max(0.0)).collect()
}

/// `exp(-i H t)` for Hermitian `H`.
pub fn expm_hermitian(h: &CMatrix, t: f64) -> CMatrix {
    let (values, vectors) = eigh(h);
    from_spectrum(&values, &vectors, |e| C64::from_polar(1.0, -e * t))
}

/// Square root of a positive semidefinite matrix. Eigenvalues below `-tol` are an error,
/// small negative ones are treated as zero.
pub fn sqrtm_psd(m: &CMatrix, tol: f64) -> Result<CMatrix> {
    let (values, vectors) = eigh(m);
    if let Some(&min) = values.first() {
        if min < -tol {
            return Err(Error::NotPsd(min));
        }
    }
    Ok(from_spectrum(&values, &vectors, |e| re(e.max(0.0).sqrt())))
}

/// Unitary factor of the polar decomposition `M = W P`.
pub fn polar_unitary(m: &CMatrix) -> CMatrix {
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("svd u");
    let v_t = svd.v_t.expect("svd v_t");
    u * v_t
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

pub fn kron_all(factors: &[CMatrix]) -> CMatrix {
    factors
        .iter()
        .fold(CMatrix::identity(1, 1), |acc, f| acc.kronecker(f))
}

/// Column-stacking vectorization, matching nalgebra's column-major storage.
pub fn vec_col(m: &CMatrix) -> CVector {
    CVector::from_column_slice(m.as_slice())
}

pub fn unvec_col(v: &CVector, dim: usize) -> CMatrix {
    CMatrix::from_column_slice(dim, dim, v.as_slice())
}

pub fn frobenius(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Largest absolute eigenvalue bound via the maximum absolute row sum.
pub fn inf_norm(m: &CMatrix) -> f64 {
    (0..m.nrows())
        .map(|i| m.row(i).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expm_of_pauli_x_is_rotation() {
        let x = CMatrix::from_row_slice(2, 2, &[re(0.0), re(1.0), re(1.0), re(0.0)]);
        let u = expm_hermitian(&x, 0.3);
        assert!((u[(0, 0)] - re(0.3f64.cos())).norm() < 1e-14);
        assert!((u[(0, 1)] - c(0.0, -(0.3f64.sin()))).norm() < 1e-14);
    }

    #[test]
    fn sqrtm_rejects_negative() {
        let m = CMatrix::from_diagonal(&CVector::from_vec(vec![re(1.0), re(-0.5)]));
        assert!(matches!(sqrtm_psd(&m, 1e-9), Err(Error::NotPsd(_))));
    }

    #[test]
    fn spectrum_projection() {
        let p = project_spectrum(&[0.7, 0.4, -0.1]);
        assert!((p[0] - 0.65).abs() < 1e-15 && (p[1] - 0.35).abs() < 1e-15 && p[2] == 0.0);
        assert_eq!(project_spectrum(&[0.5, 0.5]), vec![0.5, 0.5]);
    }

    #[test]
    fn vec_matches_kron_identity() {
        // vec(A X B) = (B^T ⊗ A) vec(X)
        let a = CMatrix::from_fn(2, 2, |i, j| c(i as f64 + 0.5, j as f64));
        let b = CMatrix::from_fn(2, 2, |i, j| c(j as f64 - 1.0, 0.3 * i as f64));
        let x = CMatrix::from_fn(2, 2, |i, j| c((i * 2 + j) as f64, 1.0));
        let lhs = vec_col(&(&a * &x * &b));
        let rhs = kron(&b.transpose(), &a) * vec_col(&x);
        assert!((lhs - rhs).norm() < 1e-12);
    }
}
