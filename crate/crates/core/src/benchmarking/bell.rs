use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2};

use nalgebra::{Matrix4, Vector4};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::gates::{rz, xeb_gate, GateSet};
use crate::error::{Error, Result};
use crate::pulse::readout::{measure, Axis, MeasurementConfig, Shots};
use crate::pulse::rng::derive_seed;
use crate::quantum::fidelity::state_fidelity;
use crate::quantum::linalg::{kron, re, CMatrix, CVector};
use crate::quantum::{DensityMatrix, HilbertSpec};
use crate::tomography::{state_tomography, StateTomography};

pub fn phi_plus() -> DensityMatrix {
    let h = re(FRAC_1_SQRT_2);
    let ket = CVector::from_column_slice(&[h, re(0.0), re(0.0), h]);
    DensityMatrix::from_pure(&ket, HilbertSpec::qubits(2)).expect("normalized")
}

/// Hadamard on the control (`Rz(π/2) X90 Rz(π/2)`, Z rotations virtual), then CNOT.
pub fn prepare_bell(gates: &GateSet, cfg: &MeasurementConfig) -> Result<DensityMatrix> {
    let id = CMatrix::identity(2, 2);
    let z = kron(&rz(FRAC_PI_2), &id);
    let mut rho = cfg.prepared_ground().conjugate(&z)?;
    rho = gates.apply_layer(&rho, [&xeb_gate(0), &id])?;
    rho = rho.conjugate(&z)?;
    gates.apply_cnot(&rho)
}

#[derive(Debug, Clone, Serialize)]
pub struct BellTomography {
    pub tomography: StateTomography,
    /// Fidelity of the reconstructed state with |Φ⁺⟩.
    pub fidelity: f64,
}

pub fn prepare_bell_and_tomography(gates: &GateSet, cfg: &MeasurementConfig, seed: u64) -> Result<BellTomography> {
    let rho = prepare_bell(gates, cfg)?;
    let tomography = state_tomography(&rho, cfg, seed)?;
    let fidelity = state_fidelity(&tomography.state, &phi_plus())?;
    Ok(BellTomography { tomography, fidelity })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChshPoint {
    /// Equatorial angle of b; a = x, a⊥ = y, b⊥ = b + π/2.
    pub theta: f64,
    pub raw: f64,
    pub corrected: f64,
    pub stderr_raw: f64,
    pub stderr_corrected: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChshResult {
    pub points: Vec<ChshPoint>,
    pub max_raw: f64,
    pub max_corrected: f64,
}

/// Value and shot-noise variance of the linear estimator `w·f` of a multinomial `f`.
fn linear_estimate(w: &[f64; 4], f: &[f64; 4], shots: Option<u64>) -> (f64, f64) {
    let e: f64 = w.iter().zip(f).map(|(a, b)| a * b).sum();
    let var = shots.map_or(0.0, |n| {
        let second: f64 = w.iter().zip(f).map(|(a, b)| a * a * b).sum();
        (second - e * e).max(0.0) / n as f64
    });
    (e, var)
}

/// `S(θ) = E(a,b) + E(a,b⊥) + E(a⊥,b) − E(a⊥,b⊥)` over `angles`. Raw correlators use the
/// observed frequencies; corrected ones invert the confusion matrices as calibrated on
/// the thermal ground state, and each corrected correlator is clamped to [−1, 1].
pub fn chsh_scan(state: &DensityMatrix, angles: &[f64], cfg: &MeasurementConfig, seed: u64) -> Result<ChshResult> {
    if angles.is_empty() {
        return Err(Error::input("CHSH scan needs at least one angle"));
    }
    let parity = [1.0, -1.0, -1.0, 1.0];
    let corrected_weights = match &cfg.readout {
        Some(r) => {
            let m: Matrix4<f64> = r.as_calibrated().joint();
            let inv = m
                .try_inverse()
                .ok_or_else(|| Error::Singular("confusion matrix".into()))?;
            let w = inv * Vector4::from_column_slice(&parity);
            [w[0], w[1], w[2], w[3]]
        }
        None => parity,
    };
    let shots = match cfg.shots {
        Shots::Analytic => None,
        Shots::Finite(n) => Some(n),
    };
    let settings = [(0.0, 0.0, 1.0), (0.0, FRAC_PI_2, 1.0), (FRAC_PI_2, 0.0, 1.0), (FRAC_PI_2, FRAC_PI_2, -1.0)];
    let points = angles
        .par_iter()
        .enumerate()
        .map(|(i, &theta)| {
            let mut p = ChshPoint {
                theta,
                raw: 0.0,
                corrected: 0.0,
                stderr_raw: 0.0,
                stderr_corrected: 0.0,
            };
            let (mut var_raw, mut var_corr) = (0.0, 0.0);
            for (s, &(alpha, offset, sign)) in settings.iter().enumerate() {
                let axes = [Axis::Equatorial(alpha), Axis::Equatorial(theta + offset)];
                let f = measure(state, axes, cfg, derive_seed(seed, &[i as u64, s as u64]))?.observed;
                let (e, v) = linear_estimate(&parity, &f, shots);
                let (ec, vc) = linear_estimate(&corrected_weights, &f, shots);
                p.raw += sign * e;
                p.corrected += sign * ec.clamp(-1.0, 1.0);
                var_raw += v;
                var_corr += vc;
            }
            p.stderr_raw = var_raw.sqrt();
            p.stderr_corrected = var_corr.sqrt();
            Ok(p)
        })
        .collect::<Result<Vec<_>>>()?;
    let max = |g: fn(&ChshPoint) -> f64| points.iter().map(|p| g(p).abs()).fold(0.0, f64::max);
    Ok(ChshResult {
        max_raw: max(|p| p.raw),
        max_corrected: max(|p| p.corrected),
        points,
    })
}
