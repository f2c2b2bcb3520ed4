use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default cap on the total Hilbert-space dimension.
pub const DEFAULT_DIMENSION_CAP: usize = 512;

/// Ordered tensor-product structure, e.g. `[3, 3, 2, 2]` for two qutrit
/// transmons followed by two truncated cable modes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HilbertSpec {
    dims: Vec<usize>,
}

impl HilbertSpec {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        Self::with_cap(dims, DEFAULT_DIMENSION_CAP)
    }

    pub fn with_cap(dims: Vec<usize>, cap: usize) -> Result<Self> {
        if dims.is_empty() || dims.contains(&0) {
            return Err(Error::input(format!("invalid subsystem dimensions {dims:?}")));
        }
        let dim = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .unwrap_or(usize::MAX);
        if dim > cap {
            return Err(Error::SpaceTooLarge { dim, cap });
        }
        Ok(Self { dims })
    }

    pub fn qubits(n: usize) -> Self {
        Self { dims: vec![2; n] }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn total(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn subsystems(&self) -> usize {
        self.dims.len()
    }

    /// Flat index of a product basis state; the first subsystem is most significant.
    pub fn index(&self, levels: &[usize]) -> usize {
        debug_assert_eq!(levels.len(), self.dims.len());
        levels
            .iter()
            .zip(&self.dims)
            .fold(0, |acc, (&l, &d)| acc * d + l)
    }

    pub fn levels(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0; self.dims.len()];
        for (slot, &d) in out.iter_mut().zip(&self.dims).rev() {
            *slot = index % d;
            index /= d;
        }
        out
    }

    pub fn ensure_same(&self, other: &HilbertSpec) -> Result<()> {
        if self.dims != other.dims {
            return Err(Error::Dimension {
                expected: self.total(),
                found: other.total(),
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_roundtrip() {
        let s = HilbertSpec::new(vec![3, 3, 2, 2]).unwrap();
        assert_eq!(s.total(), 36);
        for k in 0..s.total() {
            assert_eq!(s.index(&s.levels(k)), k);
        }
        assert_eq!(s.index(&[1, 0, 0, 0]), 12);
    }

    #[test]
    fn cap_is_enforced() {
        assert!(matches!(
            HilbertSpec::new(vec![3, 3, 3, 3, 3, 3]),
            Err(Error::SpaceTooLarge { dim: 729, cap: 512 })
        ));
        assert!(HilbertSpec::with_cap(vec![3; 6], 1000).is_ok());
        assert!(HilbertSpec::new(vec![2, 0]).is_err());
    }
}
