use super::linalg::{eigh, from_spectrum, project_spectrum, hermitize, kron, max_asymmetry, re, unvec_col, vec_col, CMatrix, C64};
use super::pauli::pauli_basis;
use crate::error::{Error, Result};

/// Chi matrix of a two-qubit channel, `E(ρ) = Σ χ_mn P_m ρ P_n†` over the
/// unnormalized Pauli basis in `PAULI_LABELS` order. Trace-preserving maps have `Tr χ = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessMatrix {
    chi: CMatrix,
}

/// Result of projecting a reconstructed chi matrix onto the PSD cone.
#[derive(Debug, Clone)]
pub struct Projection {
    pub chi: ProcessMatrix,
    pub min_eigenvalue: f64,
    /// Set when the raw reconstruction was badly non-physical (min eigenvalue < -0.1).
    pub suspicious: bool,
}

impl ProcessMatrix {
    /// Validates shape, Hermiticity (1e-8) and unit trace (1e-6).
    pub fn new(chi: CMatrix) -> Result<Self> {
        if chi.nrows() != 16 || chi.ncols() != 16 {
            return Err(Error::Dimension {
                expected: 16,
                found: chi.nrows(),
            });
        }
        let asym = max_asymmetry(&chi);
        if asym > 1e-8 {
            return Err(Error::NotHermitian(asym));
        }
        let tr = chi.trace();
        if (tr.re - 1.0).abs() > 1e-6 || tr.im.abs() > 1e-6 {
            return Err(Error::InvalidTrace(tr.re));
        }
        Ok(Self { chi: hermitize(&chi) })
    }

    /// Raw chi of an arbitrary 4×4 superoperator (column stacking); no trace check.
    pub fn chi_from_superoperator(s: &CMatrix) -> Result<CMatrix> {
        if s.nrows() != 16 || s.ncols() != 16 {
            return Err(Error::Dimension {
                expected: 16,
                found: s.nrows(),
            });
        }
        let basis = pauli_basis();
        let mut chi = CMatrix::zeros(16, 16);
        for (n, pn) in basis.iter().enumerate() {
            let pn_conj = pn.map(|z| z.conj());
            for (m, pm) in basis.iter().enumerate() {
                let b = kron(&pn_conj, pm);
                // Tr(B† S) = Σ_ij conj(B_ij) S_ij
                chi[(m, n)] = b
                    .iter()
                    .zip(s.iter())
                    .map(|(bij, sij)| bij.conj() * sij)
                    .sum::<C64>()
                    / 16.0;
            }
        }
        Ok(chi)
    }

    pub fn from_superoperator(s: &CMatrix) -> Result<Self> {
        Self::new(Self::chi_from_superoperator(s)?)
    }

    pub fn from_unitary(u: &CMatrix) -> Result<Self> {
        if u.nrows() != 4 || u.ncols() != 4 {
            return Err(Error::Dimension {
                expected: 4,
                found: u.nrows(),
            });
        }
        let coeffs: Vec<C64> = pauli_basis().iter().map(|p| (p * u).trace() / 4.0).collect();
        let chi = CMatrix::from_fn(16, 16, |m, n| coeffs[m] * coeffs[n].conj());
        Self::new(chi)
    }

    /// `χ = (1-p) χ_U + p I/16`, the unitary followed by full two-qubit depolarization.
    pub fn depolarized(u: &CMatrix, p: f64) -> Result<Self> {
        if !(0.0..=16.0 / 15.0).contains(&p) {
            return Err(Error::input(format!("depolarizing parameter {p} out of range")));
        }
        let base = Self::from_unitary(u)?;
        Self::new(base.chi * re(1.0 - p) + CMatrix::identity(16, 16) * re(p / 16.0))
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.chi
    }

    pub fn superoperator(&self) -> CMatrix {
        let basis = pauli_basis();
        let mut s = CMatrix::zeros(16, 16);
        for (m, pm) in basis.iter().enumerate() {
            for (n, pn) in basis.iter().enumerate() {
                let w = self.chi[(m, n)];
                if w.norm() > 0.0 {
                    s += kron(&pn.map(|z| z.conj()), pm) * w;
                }
            }
        }
        s
    }

    pub fn apply(&self, rho: &CMatrix) -> Result<CMatrix> {
        if rho.nrows() != 4 || rho.ncols() != 4 {
            return Err(Error::Dimension {
                expected: 4,
                found: rho.nrows(),
            });
        }
        Ok(unvec_col(&(self.superoperator() * vec_col(rho)), 4))
    }

    /// Nearest (Frobenius) PSD unit-trace matrix to a raw chi: the eigenvalues are
    /// shifted by a common offset and clipped at zero so that they sum to one.
    pub fn project_psd(raw: &CMatrix) -> Result<Projection> {
        if raw.nrows() != 16 || raw.ncols() != 16 {
            return Err(Error::Dimension {
                expected: 16,
                found: raw.nrows(),
            });
        }
        let (values, vectors) = eigh(raw);
        let min_eigenvalue = values[0];
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        let projected = project_spectrum(&values);
        let chi = from_spectrum(&projected, &vectors, re);
        Ok(Projection {
            chi: Self::new(chi)?,
            min_eigenvalue,
            suspicious: min_eigenvalue < -0.1,
        })
    }
}
