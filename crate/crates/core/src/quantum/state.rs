use super::linalg::{check_finite, eigh, hermitize, max_asymmetry, re, CMatrix, CVector, C64};
use super::operator::Operator;
use super::space::HilbertSpec;
use crate::error::{Error, Result};

pub const HERMITIAN_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-9;
pub const PSD_TOL: f64 = 1e-9;

/// Min eigenvalue below which a numerically evolved state is rejected.
pub const REPAIR_PSD_TOL: f64 = 1e-6;

/// A validated density matrix: Hermitian, unit trace, positive semidefinite.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: CMatrix,
    space: HilbertSpec,
}

impl DensityMatrix {
    pub fn new(matrix: CMatrix, space: HilbertSpec) -> Result<Self> {
        let dim = space.total();
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(Error::Dimension {
                expected: dim,
                found: matrix.nrows(),
            });
        }
        check_finite(&matrix)?;
        let asym = max_asymmetry(&matrix);
        if asym > HERMITIAN_TOL {
            return Err(Error::NotHermitian(asym));
        }
        let tr = matrix.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::InvalidTrace(tr.re));
        }
        let (values, _) = eigh(&matrix);
        if values[0] < -PSD_TOL {
            return Err(Error::NotPsd(values[0]));
        }
        Ok(Self { matrix, space })
    }

    /// Accept a numerically propagated state: symmetrize, check positivity to
    /// [`REPAIR_PSD_TOL`], and fix the trace to one. Eigenvalues are never clipped.
    pub fn repaired(matrix: CMatrix, space: HilbertSpec) -> Result<Self> {
        check_finite(&matrix)?;
        let mut m = hermitize(&matrix);
        let tr = m.trace().re;
        if (tr - 1.0).abs() > 1e-5 {
            return Err(Error::InvalidTrace(tr));
        }
        let (values, _) = eigh(&m);
        if values[0] < -REPAIR_PSD_TOL {
            return Err(Error::NotPsd(values[0]));
        }
        m /= re(tr);
        Ok(Self { matrix: m, space })
    }

    pub fn from_pure(ket: &CVector, space: HilbertSpec) -> Result<Self> {
        let norm = ket.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::input("state vector has zero or non-finite norm"));
        }
        let k = ket / re(norm);
        Self::new(hermitize(&(&k * k.adjoint())), space)
    }

    pub fn basis(space: &HilbertSpec, levels: &[usize]) -> Self {
        let d = space.total();
        let mut m = CMatrix::zeros(d, d);
        let k = space.index(levels);
        m[(k, k)] = re(1.0);
        Self {
            matrix: m,
            space: space.clone(),
        }
    }

    pub fn maximally_mixed(space: &HilbertSpec) -> Self {
        let d = space.total();
        Self {
            matrix: CMatrix::identity(d, d) / re(d as f64),
            space: space.clone(),
        }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn space(&self) -> &HilbertSpec {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn purity(&self) -> f64 {
        (&self.matrix * &self.matrix).trace().re
    }

    pub fn expectation(&self, op: &Operator) -> Result<C64> {
        self.space.ensure_same(op.space())?;
        Ok((&self.matrix * op.matrix()).trace())
    }

    pub fn population(&self, index: usize) -> f64 {
        self.matrix[(index, index)].re
    }

    /// Reduced state on the listed subsystems (kept in their original order).
    pub fn partial_trace(&self, keep: &[usize]) -> Result<Self> {
        let reduced = partial_trace(&self.matrix, &self.space, keep)?;
        let dims = keep.iter().map(|&k| self.space.dims()[k]).collect();
        let space = HilbertSpec::new(dims)?;
        Ok(Self {
            matrix: hermitize(&reduced),
            space,
        })
    }

    /// Conjugate by a unitary (or any operator) without revalidating positivity.
    pub fn conjugate(&self, u: &CMatrix) -> Result<Self> {
        if u.nrows() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                found: u.nrows(),
            });
        }
        Self::repaired(u * &self.matrix * u.adjoint(), self.space.clone())
    }
}

/// Partial trace of an arbitrary matrix over all subsystems not listed in `keep`.
pub fn partial_trace(m: &CMatrix, space: &HilbertSpec, keep: &[usize]) -> Result<CMatrix> {
    let dims = space.dims();
    if keep.iter().any(|&k| k >= dims.len()) {
        return Err(Error::input(format!("cannot keep subsystems {keep:?}")));
    }
    let kept_dims: Vec<usize> = keep.iter().map(|&k| dims[k]).collect();
    let kept_total: usize = kept_dims.iter().product();
    let kept_index = |levels: &[usize]| {
        keep.iter()
            .zip(&kept_dims)
            .fold(0, |acc, (&k, &d)| acc * d + levels[k])
    };
    let traced: Vec<usize> = (0..dims.len()).filter(|k| !keep.contains(k)).collect();
    let mut out = CMatrix::zeros(kept_total, kept_total);
    let d = space.total();
    for i in 0..d {
        let li = space.levels(i);
        for j in 0..d {
            let lj = space.levels(j);
            if traced.iter().all(|&t| li[t] == lj[t]) {
                out[(kept_index(&li), kept_index(&lj))] += m[(i, j)];
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::linalg::c;

    #[test]
    fn validation_rejects_bad_states() {
        let space = HilbertSpec::qubits(1);
        let bad_trace = CMatrix::identity(2, 2);
        assert!(matches!(
            DensityMatrix::new(bad_trace, space.clone()),
            Err(Error::InvalidTrace(_))
        ));
        let non_herm = CMatrix::from_row_slice(2, 2, &[re(0.5), re(0.1), re(0.0), re(0.5)]);
        assert!(matches!(
            DensityMatrix::new(non_herm, space.clone()),
            Err(Error::NotHermitian(_))
        ));
        let negative = CMatrix::from_row_slice(2, 2, &[re(1.2), re(0.0), re(0.0), re(-0.2)]);
        assert!(matches!(
            DensityMatrix::new(negative, space),
            Err(Error::NotPsd(_))
        ));
    }

    #[test]
    fn partial_trace_of_bell_is_mixed() {
        let space = HilbertSpec::qubits(2);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let ket = CVector::from_vec(vec![re(s), re(0.0), re(0.0), re(s)]);
        let bell = DensityMatrix::from_pure(&ket, space).unwrap();
        let a = bell.partial_trace(&[0]).unwrap();
        assert!((a.matrix()[(0, 0)] - re(0.5)).norm() < 1e-14);
        assert!(a.matrix()[(0, 1)].norm() < 1e-14);
        assert!((a.purity() - 0.5).abs() < 1e-14);
    }

    #[test]
    fn partial_trace_keeps_order() {
        let space = HilbertSpec::new(vec![2, 3]).unwrap();
        let ket = CVector::from_fn(6, |k, _| if k == space.index(&[1, 2]) { c(1.0, 0.0) } else { re(0.0) });
        let rho = DensityMatrix::from_pure(&ket, space).unwrap();
        let b = rho.partial_trace(&[1]).unwrap();
        assert_eq!(b.matrix()[(2, 2)], re(1.0));
        let a = rho.partial_trace(&[0]).unwrap();
        assert_eq!(a.matrix()[(1, 1)], re(1.0));
    }
}
