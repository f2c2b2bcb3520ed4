use super::linalg::{eigh, sqrtm_psd};
use super::process::ProcessMatrix;
use super::state::{DensityMatrix, PSD_TOL};
use crate::error::{Error, Result};

/// Uhlmann fidelity `(Tr √(√ρ σ √ρ))²`.
pub fn state_fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(Error::Dimension {
            expected: rho.dim(),
            found: sigma.dim(),
        });
    }
    // a pure argument reduces the Uhlmann formula to an overlap, without the square
    // roots of vanishing eigenvalues
    if (rho.purity() - 1.0).abs() < 1e-12 || (sigma.purity() - 1.0).abs() < 1e-12 {
        return Ok((rho.matrix() * sigma.matrix()).trace().re.clamp(0.0, 1.0));
    }
    let sr = sqrtm_psd(rho.matrix(), PSD_TOL)?;
    let inner = &sr * sigma.matrix() * &sr;
    let (values, _) = eigh(&inner);
    if values[0] < -1e-8 {
        return Err(Error::NotPsd(values[0]));
    }
    let root: f64 = values.iter().map(|v| v.max(0.0).sqrt()).sum();
    Ok((root * root).clamp(0.0, 1.0))
}

/// `Tr(χ χ_ideal)` for trace-normalized process matrices.
pub fn process_fidelity(chi: &ProcessMatrix, chi_ideal: &ProcessMatrix) -> Result<f64> {
    for m in [chi, chi_ideal] {
        let tr = m.matrix().trace();
        if (tr.re - 1.0).abs() > 1e-6 || tr.im.abs() > 1e-6 {
            return Err(Error::InvalidTrace(tr.re));
        }
    }
    Ok((chi.matrix() * chi_ideal.matrix()).trace().re)
}
