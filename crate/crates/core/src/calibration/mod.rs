//! Staged CNOT calibration: CR phase, rough cancellation, repeated-gate fine
//! tuning and the control frame change.

mod refine;
mod stages;

use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use crate::device::model::wrap_phase;
use crate::device::{DriveSettings, Qubit};
use crate::error::{Error, Result};
use crate::pulse::readout::{measure, Axis, MeasurementConfig, Shots};
use crate::pulse::{Carrier, Channel, PulseSchedule, Shape, Simulator, DEFAULT_DT};
use crate::quantum::linalg::{kron, re, CMatrix};
use crate::quantum::DensityMatrix;
use crate::tomography::hamiltonian::{default_time_grid, hamiltonian_tomography, RabiSource, TomoFitResult};

pub use refine::{refine_1d, Refined};
pub use stages::{
    calibrate_cancellation_rough, calibrate_cnot, calibrate_cr_phase, calibrate_frame_change, fine_calibrate,
    gate_process_fidelity, CalibrationOutcome, PhaseCalibration,
};

/// Pulse parameters of the native CNOT: one CR flat-top on the control at the target
/// frequency, a simultaneous cancellation tone on the target, then a virtual Z on
/// the control. Rates in rad/ns, times in ns.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CnotPulseParams {
    pub amplitude: f64,
    pub phase: f64,
    pub duration: f64,
    pub ramp: f64,
    /// DRAG coefficient of the CR drive (ns).
    pub drag: f64,
    pub cancel_amplitude: f64,
    pub cancel_phase: f64,
    /// Virtual Z applied to the control after the pulses.
    pub frame_change: f64,
}

impl Default for CnotPulseParams {
    fn default() -> Self {
        Self {
            amplitude: TAU * 0.040,
            phase: 0.0,
            duration: 190.0,
            ramp: 30.0,
            drag: 0.0,
            cancel_amplitude: 0.0,
            cancel_phase: 0.0,
            frame_change: 0.0,
        }
    }
}

impl CnotPulseParams {
    pub fn validate(&self) -> Result<()> {
        let mut errors = Vec::new();
        let fields = [
            ("amplitude", self.amplitude),
            ("phase", self.phase),
            ("duration", self.duration),
            ("ramp", self.ramp),
            ("drag", self.drag),
            ("cancel_amplitude", self.cancel_amplitude),
            ("cancel_phase", self.cancel_phase),
            ("frame_change", self.frame_change),
        ];
        for (name, v) in fields {
            if !v.is_finite() {
                errors.push(format!("{name} must be finite"));
            }
        }
        if !(self.duration > 0.0) {
            errors.push("duration must be positive".into());
        }
        if !(self.ramp >= 0.0 && 2.0 * self.ramp <= self.duration) {
            errors.push("ramp must be non-negative and at most half the duration".into());
        }
        if self.amplitude < 0.0 || self.cancel_amplitude < 0.0 {
            errors.push("amplitudes must be non-negative".into());
        }
        for (name, p) in [
            ("phase", self.phase),
            ("cancel_phase", self.cancel_phase),
            ("frame_change", self.frame_change),
        ] {
            if !(0.0..TAU).contains(&p) {
                errors.push(format!("{name} must lie in [0, 2π)"));
            }
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errors))
        }
    }

    /// Wrap the three phases into `[0, 2π)`.
    pub fn normalized(mut self) -> Self {
        self.phase = wrap_phase(self.phase);
        self.cancel_phase = wrap_phase(self.cancel_phase);
        self.frame_change = wrap_phase(self.frame_change);
        self
    }

    pub fn schedule(&self) -> Result<PulseSchedule> {
        self.validate()?;
        let mut s = PulseSchedule::new(DEFAULT_DT);
        let flat = |amplitude, phase, drag| Shape::FlatTop {
            amplitude,
            phase,
            duration: self.duration,
            ramp: self.ramp,
            drag,
            carrier: Carrier::Target,
        };
        s.pulse(Channel::ControlDrive, 0.0, flat(self.amplitude, self.phase, self.drag));
        if self.cancel_amplitude > 0.0 {
            s.pulse(Channel::TargetDrive, 0.0, flat(self.cancel_amplitude, self.cancel_phase, 0.0));
        }
        if self.frame_change != 0.0 {
            s.frame_change(Channel::ControlDrive, self.duration, self.frame_change);
        }
        s.validate()?;
        Ok(s)
    }

    /// Flat-top area divided by amplitude.
    pub fn effective_duration(&self) -> f64 {
        self.duration - self.ramp
    }
}

/// One evaluated point of a scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub values: Vec<f64>,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementStep {
    pub iteration: usize,
    /// Gate repetitions used by the objective.
    pub repetitions: usize,
    pub parameter: String,
    pub value: f64,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub stage: String,
    /// Names of the scanned dimensions, in `ScanPoint::values` order.
    pub parameters: Vec<String>,
    pub grid: Vec<ScanPoint>,
    pub chosen: Vec<f64>,
    pub history: Vec<RefinementStep>,
    pub converged: bool,
}

impl CalibrationReport {
    fn new(stage: &str, parameters: &[&str]) -> Self {
        Self {
            stage: stage.into(),
            parameters: parameters.iter().map(|s| s.to_string()).collect(),
            grid: Vec::new(),
            chosen: Vec::new(),
            history: Vec::new(),
            converged: true,
        }
    }
}

/// What the calibration drives: CR tomography and repeated application of the gate.
pub trait GateBackend: Sync {
    /// Hamiltonian tomography of the CR drive alone (no cancellation) at `phase`.
    fn cr_tomography(
        &self,
        params: &CnotPulseParams,
        phase: f64,
        times: &[f64],
        cfg: &MeasurementConfig,
        seed: u64,
    ) -> Result<TomoFitResult>;

    /// Two-qubit states after `repetitions` back-to-back gates.
    fn apply(&self, params: &CnotPulseParams, repetitions: usize, inputs: &[DensityMatrix]) -> Result<Vec<DensityMatrix>>;
}

/// The pulse-level simulator as a calibration backend.
pub struct DeviceBackend<'a> {
    pub sim: &'a Simulator,
    pub noise: bool,
}

impl GateBackend for DeviceBackend<'_> {
    fn cr_tomography(
        &self,
        params: &CnotPulseParams,
        phase: f64,
        times: &[f64],
        cfg: &MeasurementConfig,
        seed: u64,
    ) -> Result<TomoFitResult> {
        let drive = DriveSettings {
            control_amplitude: params.amplitude,
            control_phase: phase,
            target_amplitude: 0.0,
            target_phase: 0.0,
            frequency: self.sim.frequency(Qubit::Target),
            drag: params.drag,
        };
        let source = RabiSource::Device {
            sim: self.sim,
            drive,
            noise: self.noise,
        };
        hamiltonian_tomography(&source, times, cfg, seed)
    }

    fn apply(&self, params: &CnotPulseParams, repetitions: usize, inputs: &[DensityMatrix]) -> Result<Vec<DensityMatrix>> {
        let s = params.schedule()?;
        Ok(self
            .sim
            .run_repeated(&s, repetitions, inputs, self.noise)?
            .into_iter()
            .map(|o| o.state)
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationOptions {
    pub measurement: MeasurementConfig,
    pub seed: u64,
    pub phase_points: usize,
    /// Time grid for the CR phase tomography (ns).
    pub tomography_times: Vec<f64>,
    /// CR phase scan fails if the fitted |ω_ZX| envelope is below this (rad/ns).
    pub min_cr_rate: f64,
    /// Rough cancellation grid: amplitudes (rad/ns) and number of phases over [0, 2π).
    pub cancel_amplitudes: Vec<f64>,
    pub cancel_phases: usize,
    /// Odd gate counts of the fine loops.
    pub repetitions: Vec<usize>,
    /// Extra passes of the three fine loops at the largest count.
    pub final_passes: usize,
    /// Steps of the fine scans at one repetition; divided by N for larger counts.
    pub amplitude_step: f64,
    pub drag_step: f64,
    pub cancel_amplitude_step: f64,
    pub cancel_phase_step: f64,
    /// Grid points on each side of the current value.
    pub half_width: usize,
    pub refinement_rounds: usize,
    /// Run QPT of the final gate.
    pub verify: bool,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        Self {
            measurement: MeasurementConfig::analytic(),
            seed: 0,
            phase_points: 24,
            tomography_times: default_time_grid().into_iter().filter(|t| *t <= 800.0).collect(),
            min_cr_rate: TAU * 1e-5,
            cancel_amplitudes: (0..=20).map(|k| TAU * 1e-4 * k as f64).collect(),
            cancel_phases: 16,
            repetitions: vec![1, 3, 5, 11],
            final_passes: 2,
            amplitude_step: TAU * 4e-4,
            drag_step: 0.5,
            cancel_amplitude_step: TAU * 2e-5,
            cancel_phase_step: 0.1,
            half_width: 3,
            refinement_rounds: 2,
            verify: true,
        }
    }
}

impl CalibrationOptions {
    /// Stage objectives below this are at the sampling floor and are left alone.
    pub fn threshold(&self) -> f64 {
        match self.measurement.shots {
            Shots::Analytic => 1e-12,
            Shots::Finite(n) => 4.0 / (n as f64).sqrt(),
        }
    }
}

/// Single-qubit preparations used by the calibration circuits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Prep {
    Zero,
    One,
    Plus,
}

impl Prep {
    fn unitary(self) -> CMatrix {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        match self {
            Prep::Zero => CMatrix::identity(2, 2),
            Prep::One => CMatrix::from_row_slice(2, 2, &[re(0.0), re(1.0), re(1.0), re(0.0)]),
            Prep::Plus => CMatrix::from_row_slice(2, 2, &[re(h), re(h), re(h), re(-h)]),
        }
    }
}

/// Product preparation on top of the (possibly thermal) ground state.
pub fn prepare(cfg: &MeasurementConfig, control: Prep, target: Prep) -> Result<DensityMatrix> {
    cfg.prepared_ground().conjugate(&kron(&control.unitary(), &target.unitary()))
}

/// ⟨σ⟩ of one qubit along `axis` (qubit 0 = control).
pub(crate) fn single_expectation(
    rho: &DensityMatrix,
    qubit: usize,
    axis: Axis,
    cfg: &MeasurementConfig,
    seed: u64,
) -> Result<f64> {
    let axes = if qubit == 0 { [axis, Axis::Z] } else { [Axis::Z, axis] };
    let p = measure(rho, axes, cfg, seed)?.estimate;
    Ok(if qubit == 0 {
        p[0] + p[1] - p[2] - p[3]
    } else {
        p[0] + p[2] - p[1] - p[3]
    })
}
