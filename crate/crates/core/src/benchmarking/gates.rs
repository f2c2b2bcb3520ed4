use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4};

use crate::calibration::CnotPulseParams;
use crate::device::{DeviceModel, Transmon};
use crate::error::{Error, Result};
use crate::pulse::Simulator;
use crate::quantum::linalg::{c, kron, re, unvec_col, vec_col, CMatrix};
use crate::quantum::{DensityMatrix, HilbertSpec};

/// `U(θ) = exp[−iπ(X cos θ + Y sin θ)/4]` with θ = kπ/4.
pub fn xeb_gate(k: u8) -> CMatrix {
    let theta = FRAC_PI_4 * (k % 8) as f64;
    let s = c(0.0, -FRAC_1_SQRT_2);
    CMatrix::from_row_slice(
        2,
        2,
        &[
            re(FRAC_1_SQRT_2),
            s * c(theta.cos(), -theta.sin()),
            s * c(theta.cos(), theta.sin()),
            re(FRAC_1_SQRT_2),
        ],
    )
}

/// Virtual `Rz(φ) = diag(e^{−iφ/2}, e^{iφ/2})`.
pub fn rz(phi: f64) -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[c(0.0, -phi / 2.0).exp(), re(0.0), re(0.0), c(0.0, phi / 2.0).exp()])
}

pub fn cnot_unitary() -> CMatrix {
    let mut u = CMatrix::zeros(4, 4);
    for (i, j) in [(0, 0), (1, 1), (2, 3), (3, 2)] {
        u[(i, j)] = re(1.0);
    }
    u
}

fn unitary_superoperator(u: &CMatrix) -> CMatrix {
    // vec(UρU†) = (U* ⊗ U) vec(ρ) for column stacking
    kron(&u.conjugate(), u)
}

/// Kraus operators of free relaxation for `duration` ns.
fn idle_kraus(t: &Transmon, duration: f64) -> Vec<CMatrix> {
    let gamma = t.t1.map_or(0.0, |t1| 1.0 - (-duration / t1).exp());
    let d = (-duration * t.dephasing_rate()).exp();
    let mut out = Vec::new();
    let damp = [
        CMatrix::from_row_slice(2, 2, &[re(1.0), re(0.0), re(0.0), re((1.0 - gamma).sqrt())]),
        CMatrix::from_row_slice(2, 2, &[re(0.0), re(gamma.sqrt()), re(0.0), re(0.0)]),
    ];
    let z = CMatrix::from_row_slice(2, 2, &[re(1.0), re(0.0), re(0.0), re(-1.0)]);
    let dephase = [CMatrix::identity(2, 2) * re(((1.0 + d) / 2.0).sqrt()), z * re(((1.0 - d) / 2.0).sqrt())];
    for a in &damp {
        for b in &dephase {
            let k = b * a;
            if k.norm() > 0.0 {
                out.push(k);
            }
        }
    }
    out
}

/// Gate-level executor for two-qubit circuits: single-qubit layers are exact rotations
/// followed by free relaxation of both qubits, the CNOT is a 16×16 superoperator.
#[derive(Debug, Clone)]
pub struct GateSet {
    cnot: CMatrix,
    idle: Vec<CMatrix>,
}

impl GateSet {
    pub fn ideal() -> Self {
        Self {
            cnot: unitary_superoperator(&cnot_unitary()),
            idle: Vec::new(),
        }
    }

    /// Column-stacked superoperator of the entangling gate, perfect single-qubit layers.
    pub fn from_superoperator(s: CMatrix) -> Result<Self> {
        if s.nrows() != 16 || s.ncols() != 16 {
            return Err(Error::Dimension {
                expected: 16,
                found: s.nrows(),
            });
        }
        Ok(Self {
            cnot: s,
            idle: Vec::new(),
        })
    }

    /// CNOT simulated at pulse level with `params`. With `noise`, single-qubit layers of
    /// length `single_duration` ns relax with the device T1/T2.
    pub fn from_device(sim: &Simulator, params: &CnotPulseParams, noise: bool, single_duration: f64) -> Result<Self> {
        let cnot = sim.superoperator(&params.schedule()?, noise)?;
        let mut g = Self::from_superoperator(cnot)?;
        if noise {
            g = g.with_idle(sim.model(), single_duration)?;
        }
        Ok(g)
    }

    /// Relaxation after every single-qubit layer.
    pub fn with_idle(mut self, model: &DeviceModel, duration: f64) -> Result<Self> {
        if !(duration >= 0.0 && duration.is_finite()) {
            return Err(Error::input("single-qubit gate duration must be non-negative"));
        }
        if !model.has_noise() || duration == 0.0 {
            self.idle.clear();
            return Ok(self);
        }
        let (kc, kt) = (idle_kraus(&model.control, duration), idle_kraus(&model.target, duration));
        self.idle = kc.iter().flat_map(|a| kt.iter().map(move |b| kron(a, b))).collect();
        Ok(self)
    }

    /// Follow the CNOT by two-qubit depolarizing noise `ρ → (1−p)ρ + p I/4`.
    pub fn with_depolarizing(mut self, p: f64) -> Result<Self> {
        if !(0.0..=16.0 / 15.0).contains(&p) {
            return Err(Error::input(format!("depolarizing parameter {p} out of range")));
        }
        let id = vec_col(&CMatrix::identity(4, 4));
        let replace = &id * id.adjoint() * re(0.25);
        let dep = CMatrix::identity(16, 16) * re(1.0 - p) + replace * re(p);
        self.cnot = dep * &self.cnot;
        Ok(self)
    }

    pub fn cnot_superoperator(&self) -> &CMatrix {
        &self.cnot
    }

    pub fn apply_cnot(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        let v = &self.cnot * vec_col(rho.matrix());
        DensityMatrix::repaired(unvec_col(&v, 4), HilbertSpec::qubits(2))
    }

    /// `u[0] ⊗ u[1]` then relaxation.
    pub fn apply_layer(&self, rho: &DensityMatrix, u: [&CMatrix; 2]) -> Result<DensityMatrix> {
        let rho = rho.conjugate(&kron(u[0], u[1]))?;
        if self.idle.is_empty() {
            return Ok(rho);
        }
        let m = rho.matrix();
        let out = self
            .idle
            .iter()
            .fold(CMatrix::zeros(4, 4), |acc, k| acc + k * m * k.adjoint());
        DensityMatrix::repaired(out, HilbertSpec::qubits(2))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::linalg::expm_hermitian;
    use crate::quantum::pauli::pauli_1q;

    #[test]
    fn xeb_gate_matches_exponential() {
        for k in 0..8u8 {
            let th = FRAC_PI_4 * k as f64;
            let h = (pauli_1q('X').unwrap() * re(th.cos()) + pauli_1q('Y').unwrap() * re(th.sin())) * re(FRAC_PI_4);
            assert!((xeb_gate(k) - expm_hermitian(&h, 1.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn idle_kraus_is_complete() {
        let t = Transmon {
            t1: Some(20_000.0),
            t2: Some(15_000.0),
            ..Transmon::ideal(30.0, -2.5)
        };
        let sum = idle_kraus(&t, 40.0)
            .iter()
            .fold(CMatrix::zeros(2, 2), |acc, k| acc + k.adjoint() * k);
        assert!((sum - CMatrix::identity(2, 2)).norm() < 1e-12);
    }
}
