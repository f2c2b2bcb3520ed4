use std::f64::consts::TAU;

use super::dressed::DressedBasis;
use super::frame::rotating_frame;
use super::hamiltonian::SystemOperators;
use super::model::{DeviceModel, DriveSettings, PauliCoefficients};
use crate::error::{Error, Result};
use crate::quantum::linalg::{eigh, polar_unitary, re, CMatrix};
use crate::quantum::pauli::pauli_1q;

/// Drive periods in the averaging window.
pub const AVERAGE_PERIODS: f64 = 100.0;
/// Trapezoid intervals per drive period.
pub const POINTS_PER_PERIOD: usize = 16;

/// Target-qubit Hamiltonians conditioned on the control state, in the dressed
/// computational frame rotating with the drive.
#[derive(Debug, Clone)]
pub struct ConditionalBlocks {
    pub control_zero: CMatrix,
    pub control_one: CMatrix,
}

/// Time-averaged rotating-frame Hamiltonian (frame at the drive carrier).
pub fn averaged_hamiltonian(model: &DeviceModel, drive: &DriveSettings) -> Result<CMatrix> {
    drive.validate()?;
    let gen = rotating_frame(model, drive, drive.frequency, false)?;
    let period = TAU / drive.frequency;
    let n = (AVERAGE_PERIODS as usize) * POINTS_PER_PERIOD;
    Ok(gen.time_average(AVERAGE_PERIODS * period, n))
}

/// Block-diagonalize `h` against the undriven dressed computational states.
///
/// For each control state the two eigenvectors of `h` with the largest weight in
/// span{|s,0̃⟩, |s,1̃⟩} are selected; the unitary polar factor of their overlap with
/// that span maps their energies onto a 2×2 target Hamiltonian.
pub fn conditional_blocks(h: &CMatrix, basis: &DressedBasis) -> Result<ConditionalBlocks> {
    let (values, vectors) = eigh(h);
    let comp = basis.computational();
    let mut taken: Vec<usize> = Vec::new();
    let mut blocks = Vec::with_capacity(2);
    for s in 0..2 {
        let refs = [comp[2 * s], comp[2 * s + 1]];
        let d = CMatrix::from_fn(h.nrows(), 2, |i, j| basis.vectors[(i, refs[j])]);
        let overlaps = d.adjoint() * &vectors;
        let weight = |k: usize| overlaps[(0, k)].norm_sqr() + overlaps[(1, k)].norm_sqr();
        let mut order: Vec<usize> = (0..values.len()).filter(|k| !taken.contains(k)).collect();
        order.sort_by(|&a, &b| weight(b).total_cmp(&weight(a)).then(a.cmp(&b)));
        let chosen = [order[0], order[1]];
        for &k in &chosen {
            if weight(k) < 0.5 {
                return Err(Error::input(format!(
                    "drive hybridizes the control-{s} block with other states (weight {:.3})",
                    weight(k)
                )));
            }
        }
        taken.extend(chosen);
        let m = CMatrix::from_fn(2, 2, |i, j| overlaps[(i, chosen[j])]);
        let w = polar_unitary(&m);
        let e = CMatrix::from_fn(2, 2, |i, j| if i == j { re(values[chosen[i]]) } else { re(0.0) });
        blocks.push(&w * e * w.adjoint());
    }
    let control_one = blocks.pop().expect("two blocks");
    let control_zero = blocks.pop().expect("two blocks");
    Ok(ConditionalBlocks {
        control_zero,
        control_one,
    })
}

/// Coefficients of the effective CR Hamiltonian `Σ ω_P P` on {IX, IY, IZ, ZX, ZY, ZZ}.
///
/// The rotating-frame Hamiltonian is averaged over 100 drive periods and the
/// cable-mediated interaction is folded into the two-qubit subspace by
/// block-diagonalization in the dressed basis; drive leakage through the cable
/// appears in the IX/IY rates.
pub fn effective_pauli_coefficients(model: &DeviceModel, drive: &DriveSettings) -> Result<PauliCoefficients> {
    let ops = SystemOperators::new(model)?;
    let basis = DressedBasis::with_operators(model, &ops)?;
    let h = averaged_hamiltonian(model, drive)?;
    coefficients_from_blocks(&conditional_blocks(&h, &basis)?)
}

pub fn coefficients_from_blocks(blocks: &ConditionalBlocks) -> Result<PauliCoefficients> {
    let read = |h: &CMatrix, p: char| -> Result<f64> { Ok((pauli_1q(p)? * h).trace().re / 2.0) };
    let mut v = [0.0; 6];
    for (k, p) in ['X', 'Y', 'Z'].into_iter().enumerate() {
        let h0 = read(&blocks.control_zero, p)?;
        let h1 = read(&blocks.control_one, p)?;
        v[k] = (h0 + h1) / 2.0;
        v[k + 3] = (h0 - h1) / 2.0;
    }
    let c = PauliCoefficients::from_array(v);
    if !c.is_finite() {
        return Err(Error::NonFinite);
    }
    Ok(c)
}
