use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use super::hamiltonian::{hamiltonian_tomography, RabiSource, TomoFitResult};
use crate::device::{DriveSettings, PauliCoefficients, Qubit};
use crate::error::{Error, Result};
use crate::pulse::readout::MeasurementConfig;
use crate::pulse::rng::derive_seed;
use crate::pulse::Simulator;

/// Default CR amplitudes, 0 to 60 MHz in 5 MHz steps (rad/ns).
pub fn default_amplitude_grid() -> Vec<f64> {
    (0..=12).map(|k| TAU * 5e-3 * k as f64).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    /// Drive amplitude (rad/ns).
    pub amplitude: f64,
    pub fit: Option<TomoFitResult>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub phase: f64,
    pub rows: Vec<SweepRow>,
    /// Amplitude at which |ω_ZX| first reaches the requested rate, by linear interpolation.
    pub working_point: Option<f64>,
}

impl SweepResult {
    /// `amplitude_mhz` then the six rates and their errors, all in MHz (rate / 2π).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("amplitude_mhz");
        for l in PauliCoefficients::LABELS {
            out.push_str(&format!(",{}_mhz", l.to_lowercase()));
        }
        for l in PauliCoefficients::LABELS {
            out.push_str(&format!(",{}_err_mhz", l.to_lowercase()));
        }
        out.push('\n');
        let mhz = |v: f64| v / TAU * 1e3;
        for r in &self.rows {
            out.push_str(&format!("{}", mhz(r.amplitude)));
            match &r.fit {
                Some(f) => {
                    for v in f.coefficients.to_array() {
                        out.push_str(&format!(",{}", mhz(v)));
                    }
                    for v in f.stderr {
                        out.push_str(&format!(",{}", mhz(v)));
                    }
                }
                None => out.push_str(&",NaN".repeat(12)),
            }
            out.push('\n');
        }
        out
    }
}

/// Hamiltonian tomography at each amplitude with the CR drive at `phase` and no
/// cancellation tone. Fit failures are recorded per row.
pub fn cr_parameter_sweep(
    sim: &Simulator,
    amplitudes: &[f64],
    phase: f64,
    times: &[f64],
    cfg: &MeasurementConfig,
    seed: u64,
    target_zx: Option<f64>,
) -> Result<SweepResult> {
    if amplitudes.is_empty() {
        return Err(Error::input("amplitude grid is empty"));
    }
    let frequency = sim.frequency(Qubit::Target);
    let rows: Vec<SweepRow> = amplitudes
        .par_iter()
        .enumerate()
        .map(|(k, &amplitude)| {
            let drive = DriveSettings {
                control_amplitude: amplitude.abs(),
                control_phase: if amplitude < 0.0 { phase + std::f64::consts::PI } else { phase },
                target_amplitude: 0.0,
                target_phase: 0.0,
                frequency,
                drag: 0.0,
            };
            let source = RabiSource::Device {
                sim,
                drive,
                noise: sim.model().has_noise(),
            };
            match hamiltonian_tomography(&source, times, cfg, derive_seed(seed, &[k as u64])) {
                Ok(fit) => SweepRow {
                    amplitude,
                    fit: Some(fit),
                    error: None,
                },
                Err(e) => SweepRow {
                    amplitude,
                    fit: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    let working_point = target_zx.and_then(|target| crossing(&rows, target.abs()));
    Ok(SweepResult {
        phase,
        rows,
        working_point,
    })
}

fn crossing(rows: &[SweepRow], target: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|r| r.fit.as_ref().map(|f| (r.amplitude, f.coefficients.zx.abs())))
        .collect();
    for w in pts.windows(2) {
        let ((a0, z0), (a1, z1)) = (w[0], w[1]);
        if (z0 - target) * (z1 - target) <= 0.0 && z1 != z0 {
            return Some(a0 + (target - z0) * (a1 - a0) / (z1 - z0));
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(a: f64, zx: f64) -> SweepRow {
        SweepRow {
            amplitude: a,
            fit: Some(TomoFitResult {
                coefficients: PauliCoefficients {
                    zx,
                    ..Default::default()
                },
                stderr: [0.0; 6],
                residual: 0.0,
                converged: true,
            }),
            error: None,
        }
    }

    #[test]
    fn working_point_interpolates() {
        let rows = vec![row(0.0, 0.0), row(1.0, 0.2), row(2.0, 0.6)];
        assert!((crossing(&rows, 0.4).unwrap() - 1.5).abs() < 1e-12);
        assert!(crossing(&rows, 0.7).is_none());
    }
}
