use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use crate::device::{DriveSettings, PauliCoefficients};
use crate::error::{Error, Result};
use crate::fit::{levenberg_marquardt, LmOptions};
use crate::pulse::readout::{measure, Axis, MeasurementConfig};
use crate::pulse::rng::derive_seed;
use crate::pulse::{Carrier, Channel, PulseSchedule, Shape, Simulator, DEFAULT_DT};
use crate::quantum::linalg::{expm_hermitian, kron, CMatrix};
use crate::quantum::pauli::pauli_1q;
use crate::quantum::DensityMatrix;

/// Ramp of the flat-top pulse used for Hamiltonian tomography (ns).
pub const TOMOGRAPHY_RAMP: f64 = 10.0;

/// Default tomography grid: 0 to 1600 ns in 16 ns steps.
pub fn default_time_grid() -> Vec<f64> {
    (0..=100).map(|k| 16.0 * k as f64).collect()
}

/// Target Bloch vectors after CR drives of increasing length, for one control state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlochTrajectory {
    /// Prepared control state, 0 or 1.
    pub control: u8,
    pub times: Vec<f64>,
    pub points: Vec<[f64; 3]>,
    /// Shots per measurement setting, `None` in analytic mode.
    pub shots: Option<u64>,
}

/// Target-qubit Bloch vector from the outcome distributions of X, Y and Z settings
/// on the target (any control axis).
pub fn bloch_vector(x: &[f64; 4], y: &[f64; 4], z: &[f64; 4]) -> [f64; 3] {
    let target = |p: &[f64; 4]| (p[0] + p[2]) - (p[1] + p[3]);
    [target(x), target(y), target(z)]
}

/// Target Bloch vector of a two-qubit state measured along X, Y, Z.
pub fn measure_target_bloch(rho: &DensityMatrix, cfg: &MeasurementConfig, seed: u64) -> Result<[f64; 3]> {
    let mut dists = [[0.0; 4]; 3];
    for (k, axis) in [Axis::X, Axis::Y, Axis::Z].into_iter().enumerate() {
        dists[k] = measure(rho, [Axis::Z, axis], cfg, derive_seed(seed, &[k as u64]))?.estimate;
    }
    Ok(bloch_vector(&dists[0], &dists[1], &dists[2]))
}

/// Where the CR Rabi trajectories come from.
#[derive(Debug, Clone)]
pub enum RabiSource<'a> {
    /// Pulse-level simulation of the device under flat-top drives.
    Device {
        sim: &'a Simulator,
        drive: DriveSettings,
        noise: bool,
    },
    /// Exact evolution under `H = Σ ω_P P` on two qubits.
    Planted(PauliCoefficients),
}

/// The flat-top CR (and cancellation) pulse whose area matches a rectangular drive
/// of length `t`: duration `t + ramp`.
pub fn rabi_schedule(sim: &Simulator, drive: &DriveSettings, t: f64, ramp: f64) -> Result<PulseSchedule> {
    let mut s = PulseSchedule::new(DEFAULT_DT);
    if t == 0.0 {
        return Ok(s);
    }
    if t < ramp {
        return Err(Error::input(format!("tomography time {t} ns is shorter than the ramp {ramp} ns")));
    }
    let carrier = if (drive.frequency - sim.frequency(crate::device::Qubit::Target)).abs() < 1e-12 {
        Carrier::Target
    } else {
        Carrier::Fixed {
            frequency: drive.frequency,
        }
    };
    let shape = |amplitude: f64, phase: f64, drag: f64| Shape::FlatTop {
        amplitude,
        phase,
        duration: t + ramp,
        ramp,
        drag,
        carrier,
    };
    if drive.control_amplitude > 0.0 {
        s.pulse(Channel::ControlDrive, 0.0, shape(drive.control_amplitude, drive.control_phase, drive.drag));
    }
    if drive.target_amplitude > 0.0 {
        s.pulse(Channel::TargetDrive, 0.0, shape(drive.target_amplitude, drive.target_phase, 0.0));
    }
    Ok(s)
}

fn prepared(cfg: &MeasurementConfig, control: u8) -> Result<DensityMatrix> {
    let ground = cfg.prepared_ground();
    if control == 0 {
        return Ok(ground);
    }
    let x = kron(&pauli_1q('X')?, &CMatrix::identity(2, 2));
    ground.conjugate(&x)
}

/// CR Rabi experiment: for each control preparation and each time, drive, then
/// measure the target along X, Y and Z.
pub fn cr_rabi_experiment(
    source: &RabiSource,
    times: &[f64],
    cfg: &MeasurementConfig,
    seed: u64,
) -> Result<[BlochTrajectory; 2]> {
    if times.is_empty() {
        return Err(Error::input("time grid is empty"));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) || times[0] < 0.0 {
        return Err(Error::input("time grid must be non-negative and strictly increasing"));
    }
    let preps = [prepared(cfg, 0)?, prepared(cfg, 1)?];
    let planted_h = match source {
        RabiSource::Planted(c) => Some(c.hamiltonian()),
        RabiSource::Device { .. } => None,
    };
    let points: Vec<[[f64; 3]; 2]> = times
        .par_iter()
        .enumerate()
        .map(|(k, &t)| -> Result<[[f64; 3]; 2]> {
            let states: Vec<DensityMatrix> = match source {
                RabiSource::Device { sim, drive, noise } => {
                    let s = rabi_schedule(sim, drive, t, TOMOGRAPHY_RAMP)?;
                    sim.run_many(&s, &preps, *noise)?.into_iter().map(|o| o.state).collect()
                }
                RabiSource::Planted(_) => {
                    let u = expm_hermitian(planted_h.as_ref().expect("planted"), t);
                    preps.iter().map(|p| p.conjugate(&u)).collect::<Result<_>>()?
                }
            };
            let mut out = [[0.0; 3]; 2];
            for (s, rho) in states.iter().enumerate() {
                out[s] = measure_target_bloch(rho, cfg, derive_seed(seed, &[s as u64, k as u64]))?;
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let shots = match cfg.shots {
        crate::pulse::Shots::Analytic => None,
        crate::pulse::Shots::Finite(n) => Some(n),
    };
    let traj = |s: usize| BlochTrajectory {
        control: s as u8,
        times: times.to_vec(),
        points: points.iter().map(|p| p[s]).collect(),
        shots,
    };
    Ok([traj(0), traj(1)])
}

/// Six-parameter fit result; rates in rad/ns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TomoFitResult {
    pub coefficients: PauliCoefficients,
    /// Standard errors in the order IX, IY, IZ, ZX, ZY, ZZ.
    pub stderr: [f64; 6],
    /// RMS of all Bloch-component residuals.
    pub residual: f64,
    pub converged: bool,
}

/// Bloch vector after rotating `(0,0,1)` by `|Ω| t` about `Ω`.
pub fn precess(omega: [f64; 3], t: f64) -> [f64; 3] {
    let w = (omega[0].powi(2) + omega[1].powi(2) + omega[2].powi(2)).sqrt();
    if w == 0.0 {
        return [0.0, 0.0, 1.0];
    }
    let n = [omega[0] / w, omega[1] / w, omega[2] / w];
    let (s, c) = (w * t).sin_cos();
    // r = z cos θ + (n × z) sin θ + n (n·z)(1 - cos θ)
    [
        n[1] * s + n[0] * n[2] * (1.0 - c),
        -n[0] * s + n[1] * n[2] * (1.0 - c),
        c + n[2] * n[2] * (1.0 - c),
    ]
}

/// Angular frequency of the strongest spectral line of `z(t)`, scanning a grid
/// eight times finer than the record length resolves.
fn dominant_frequency(times: &[f64], z: &[f64]) -> f64 {
    let n = times.len();
    let span = times[n - 1] - times[0];
    if n < 3 || span <= 0.0 {
        return 0.0;
    }
    let mean = z.iter().sum::<f64>() / n as f64;
    let min_step = times.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    let f_max = 0.5 / min_step;
    let df = 1.0 / (8.0 * span);
    let bins = (f_max / df).floor() as usize;
    let mut best = (0.0, 0.0);
    for k in 1..=bins {
        let w = TAU * k as f64 * df;
        let (mut re, mut im) = (0.0, 0.0);
        for (t, v) in times.iter().zip(z) {
            let (s, c) = (w * t).sin_cos();
            re += (v - mean) * c;
            im += (v - mean) * s;
        }
        let power = re * re + im * im;
        if power > best.1 {
            best = (w, power);
        }
    }
    let signal: f64 = z.iter().map(|v| (v - mean).powi(2)).sum();
    if signal < 1e-20 {
        0.0
    } else {
        best.0
    }
}

struct AxisFit {
    omega: [f64; 3],
    cov: [f64; 3],
    cost: f64,
    converged: bool,
}

fn fit_trajectory(traj: &BlochTrajectory) -> Result<AxisFit> {
    let times = &traj.times;
    let data = &traj.points;
    let residuals = |p: &[f64]| -> Vec<f64> {
        let mut r = Vec::with_capacity(3 * times.len());
        for (t, d) in times.iter().zip(data) {
            let m = precess([p[0], p[1], p[2]], *t);
            r.extend((0..3).map(|k| m[k] - d[k]));
        }
        r
    };
    let z: Vec<f64> = data.iter().map(|p| p[2]).collect();
    let w = dominant_frequency(times, &z);
    let n = z.len() as f64;
    let nz = (z.iter().sum::<f64>() / n).clamp(0.0, 1.0).sqrt();
    let (mut ux, mut uy) = (0.0, 0.0);
    for (t, d) in times.iter().zip(data) {
        let s = (w * t).sin();
        ux += s * d[0];
        uy += s * d[1];
    }
    // (x, y) ≈ sin(wt) (n_y, -n_x) for a mostly transverse axis
    let norm = (ux * ux + uy * uy).sqrt();
    let (ax, ay) = if norm > 0.0 { (-uy / norm, ux / norm) } else { (1.0, 0.0) };
    let opts = LmOptions::default();
    let mut best: Option<AxisFit> = None;
    for scale in [1.0, 0.98, 1.02, 0.95] {
        for sign in [1.0, -1.0] {
            let nzs = sign * nz.min(0.999);
            let tr = (1.0 - nzs * nzs).sqrt();
            let wg = w * scale;
            let p0 = [wg * tr * ax, wg * tr * ay, wg * nzs];
            let floor = wg.max(1e-4);
            let fit = levenberg_marquardt(&residuals, &p0, &[floor; 3], &opts)?;
            if best.as_ref().is_none_or(|b| fit.cost < b.cost) {
                let cov = match &fit.covariance {
                    Some(c) => [c[(0, 0)], c[(1, 1)], c[(2, 2)]],
                    None => [f64::NAN; 3],
                };
                best = Some(AxisFit {
                    omega: [fit.params[0], fit.params[1], fit.params[2]],
                    cov,
                    cost: fit.cost,
                    converged: fit.converged,
                });
            }
        }
    }
    Ok(best.expect("at least one start"))
}

/// Fit both trajectories to constant precession about
/// `Ω_s = 2 (ω_IX + z_s ω_ZX, ω_IY + z_s ω_ZY, ω_IZ + z_s ω_ZZ)` with `z_0 = +1`, `z_1 = -1`.
/// The cost separates per control state, so each trajectory is fitted on its own
/// (eight starts seeded from the dominant line of `Z_s(t)`) and the six rates are
/// recombined.
pub fn fit_hamiltonian_tomography(traj0: &BlochTrajectory, traj1: &BlochTrajectory) -> Result<TomoFitResult> {
    for t in [traj0, traj1] {
        if t.times.len() < 3 || t.times.len() != t.points.len() {
            return Err(Error::input("trajectories need at least three points and matching lengths"));
        }
        if t.points.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::input("trajectory contains non-finite points"));
        }
    }
    if traj0.times.len() != traj1.times.len() {
        return Err(Error::input("trajectories must share the same grid length"));
    }
    let f0 = fit_trajectory(traj0)?;
    let f1 = fit_trajectory(traj1)?;
    let mut v = [0.0; 6];
    let mut err = [0.0; 6];
    for k in 0..3 {
        v[k] = (f0.omega[k] + f1.omega[k]) / 4.0;
        v[k + 3] = (f0.omega[k] - f1.omega[k]) / 4.0;
        let e = (f0.cov[k] + f1.cov[k]).max(0.0).sqrt() / 4.0;
        err[k] = e;
        err[k + 3] = e;
    }
    let count = 3 * (traj0.times.len() + traj1.times.len());
    Ok(TomoFitResult {
        coefficients: PauliCoefficients::from_array(v),
        stderr: err,
        residual: ((f0.cost + f1.cost) / count as f64).sqrt(),
        converged: f0.converged && f1.converged,
    })
}

/// Rabi experiment followed by the fit.
pub fn hamiltonian_tomography(
    source: &RabiSource,
    times: &[f64],
    cfg: &MeasurementConfig,
    seed: u64,
) -> Result<TomoFitResult> {
    let [t0, t1] = cr_rabi_experiment(source, times, cfg, seed)?;
    fit_hamiltonian_tomography(&t0, &t1)
}

/// `time_ns,x0,y0,z0,x1,y1,z1`.
pub fn trajectories_csv(traj0: &BlochTrajectory, traj1: &BlochTrajectory) -> String {
    let mut out = String::from("time_ns,x0,y0,z0,x1,y1,z1\n");
    for ((t, a), b) in traj0.times.iter().zip(&traj0.points).zip(&traj1.points) {
        out.push_str(&format!("{t},{},{},{},{},{},{}\n", a[0], a[1], a[2], b[0], b[1], b[2]));
    }
    out
}
