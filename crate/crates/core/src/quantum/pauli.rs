use super::linalg::{c, kron, re, CMatrix};
use super::operator::Operator;
use super::space::HilbertSpec;
use crate::error::{Error, Result};

/// Two-qubit Pauli labels in basis order; the left character acts on the control.
pub const PAULI_LABELS: [&str; 16] = [
    "II", "IX", "IY", "IZ", "XI", "XX", "XY", "XZ", "YI", "YX", "YY", "YZ", "ZI", "ZX", "ZY", "ZZ",
];

pub fn pauli_1q(ch: char) -> Result<CMatrix> {
    let z = re(0.0);
    let o = re(1.0);
    let m = match ch {
        'I' => [o, z, z, o],
        'X' => [z, o, o, z],
        'Y' => [z, c(0.0, -1.0), c(0.0, 1.0), z],
        'Z' => [o, z, z, -o],
        _ => return Err(Error::input(format!("invalid Pauli character {ch:?}"))),
    };
    Ok(CMatrix::from_row_slice(2, 2, &m))
}

/// `P1 ⊗ P2` for a two-character label such as `"ZX"`.
pub fn pauli_embed(label: &str) -> Result<Operator> {
    let chars: Vec<char> = label.chars().collect();
    if chars.len() != 2 {
        return Err(Error::input(format!("Pauli label {label:?} must have length 2")));
    }
    let m = kron(&pauli_1q(chars[0])?, &pauli_1q(chars[1])?);
    Operator::new(m, HilbertSpec::qubits(2))
}

/// All sixteen two-qubit Paulis as matrices, in [`PAULI_LABELS`] order.
pub fn pauli_basis() -> Vec<CMatrix> {
    PAULI_LABELS
        .iter()
        .map(|l| pauli_embed(l).expect("valid label").into_matrix())
        .collect()
}

pub fn pauli_index(label: &str) -> Option<usize> {
    PAULI_LABELS.iter().position(|&l| l == label)
}

/// Coefficients `Tr(P M)/4` of a 4×4 matrix in the Pauli basis.
pub fn pauli_decompose(m: &CMatrix) -> Result<Vec<f64>> {
    if m.nrows() != 4 || m.ncols() != 4 {
        return Err(Error::Dimension {
            expected: 4,
            found: m.nrows(),
        });
    }
    Ok(pauli_basis()
        .iter()
        .map(|p| (p * m).trace().re / 4.0)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zx_blocks() {
        let zx = pauli_embed("ZX").unwrap().into_matrix();
        assert_eq!(zx[(0, 1)], re(1.0));
        assert_eq!(zx[(1, 0)], re(1.0));
        assert_eq!(zx[(2, 3)], re(-1.0));
        assert_eq!(zx[(3, 2)], re(-1.0));
        assert_eq!(zx[(0, 0)], re(0.0));
    }

    #[test]
    fn identity_label() {
        assert_eq!(pauli_embed("II").unwrap().into_matrix(), CMatrix::identity(4, 4));
    }

    #[test]
    fn invalid_labels() {
        assert!(pauli_embed("XQ").is_err());
        assert!(pauli_embed("X").is_err());
        assert!(pauli_embed("XYZ").is_err());
    }
}
