use std::ops::{Add, Mul};

use super::linalg::{check_finite, kron_all, max_asymmetry, re, CMatrix, C64};
use super::space::HilbertSpec;
use crate::error::{Error, Result};

/// Square complex matrix acting on a tensor-product space.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    matrix: CMatrix,
    space: HilbertSpec,
}

impl Operator {
    pub fn new(matrix: CMatrix, space: HilbertSpec) -> Result<Self> {
        let dim = space.total();
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(Error::Dimension {
                expected: dim,
                found: matrix.nrows().max(matrix.ncols()),
            });
        }
        check_finite(&matrix)?;
        Ok(Self { matrix, space })
    }

    pub fn zeros(space: &HilbertSpec) -> Self {
        let d = space.total();
        Self {
            matrix: CMatrix::zeros(d, d),
            space: space.clone(),
        }
    }

    pub fn identity(space: &HilbertSpec) -> Self {
        let d = space.total();
        Self {
            matrix: CMatrix::identity(d, d),
            space: space.clone(),
        }
    }

    /// Lift a single-subsystem matrix into the full space.
    pub fn embed(local: &CMatrix, subsystem: usize, space: &HilbertSpec) -> Result<Self> {
        let dims = space.dims();
        if subsystem >= dims.len() {
            return Err(Error::input(format!("no subsystem {subsystem}")));
        }
        if local.nrows() != dims[subsystem] || local.ncols() != dims[subsystem] {
            return Err(Error::Dimension {
                expected: dims[subsystem],
                found: local.nrows(),
            });
        }
        let factors: Vec<CMatrix> = dims
            .iter()
            .enumerate()
            .map(|(k, &d)| {
                if k == subsystem {
                    local.clone()
                } else {
                    CMatrix::identity(d, d)
                }
            })
            .collect();
        Operator::new(kron_all(&factors), space.clone())
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

    pub fn adjoint(&self) -> Self {
        Self {
            matrix: self.matrix.adjoint(),
            space: self.space.clone(),
        }
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        max_asymmetry(&self.matrix) <= tol
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            matrix: &self.matrix * s,
            space: self.space.clone(),
        }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.scale(re(s))
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }
}

impl Add for &Operator {
    type Output = Operator;
    fn add(self, rhs: &Operator) -> Operator {
        assert_eq!(self.space, rhs.space, "operator spaces differ");
        Operator {
            matrix: &self.matrix + &rhs.matrix,
            space: self.space.clone(),
        }
    }
}

impl Mul for &Operator {
    type Output = Operator;
    fn mul(self, rhs: &Operator) -> Operator {
        assert_eq!(self.space, rhs.space, "operator spaces differ");
        Operator {
            matrix: &self.matrix * &rhs.matrix,
            space: self.space.clone(),
        }
    }
}

/// Truncated annihilation operator on `levels` Fock states.
pub fn destroy(levels: usize) -> CMatrix {
    let mut m = CMatrix::zeros(levels, levels);
    for n in 1..levels {
        m[(n - 1, n)] = re((n as f64).sqrt());
    }
    m
}

pub fn number(levels: usize) -> CMatrix {
    CMatrix::from_fn(levels, levels, |i, j| if i == j { re(i as f64) } else { re(0.0) })
}
