use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

use super::refine::{parabola_vertex, refine_1d};
use super::{
    prepare, single_expectation, CalibrationOptions, CalibrationReport, CnotPulseParams, GateBackend, Prep,
    RefinementStep, ScanPoint,
};
use crate::device::model::wrap_phase;
use crate::error::{Error, Result};
use crate::pulse::readout::{measure, Axis};
use crate::pulse::rng::derive_seed;
use crate::quantum::fidelity::process_fidelity;
use crate::quantum::linalg::{re, CMatrix};
use crate::quantum::{DensityMatrix, ProcessMatrix};
use crate::tomography::hamiltonian::TomoFitResult;
use crate::tomography::quantum_process_tomography;

const PHASE_STAGE: u64 = 1;
const CANCEL_STAGE: u64 = 2;
const FINE_STAGE: u64 = 3;
const FRAME_STAGE: u64 = 4;
const VERIFY_STAGE: u64 = 5;

fn calibration_error(stage: &str, reason: impl Into<String>) -> Error {
    Error::Calibration {
        stage: stage.into(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseCalibration {
    /// Phase φ₀ at which ω_ZX is maximal and ω_ZY vanishes.
    pub phase: f64,
    /// Fitted envelope A of ω_ZX(φ) = A cos(φ − φ₀).
    pub rate: f64,
    pub phase_stderr: f64,
    /// Tomography repeated at φ₀.
    pub at_phase: TomoFitResult,
    pub report: CalibrationReport,
}

/// Scan the CR phase, fit `ω_ZX = A cos(φ − φ₀)` and `ω_ZY = −A sin(φ − φ₀)` jointly
/// (the sign of the ZY branch follows from the drive `Ω cos(ωt + φ)`), and re-run
/// tomography at φ₀ to check ω_ZY there.
pub fn calibrate_cr_phase(
    backend: &dyn GateBackend,
    params: &CnotPulseParams,
    opts: &CalibrationOptions,
) -> Result<PhaseCalibration> {
    let m = opts.phase_points;
    if m < 3 {
        return Err(Error::input("phase scan needs at least three points"));
    }
    let phases: Vec<f64> = (0..m).map(|k| TAU * k as f64 / m as f64).collect();
    let fits: Vec<TomoFitResult> = phases
        .par_iter()
        .enumerate()
        .map(|(k, &phi)| {
            backend.cr_tomography(
                params,
                phi,
                &opts.tomography_times,
                &opts.measurement,
                derive_seed(opts.seed, &[PHASE_STAGE, k as u64]),
            )
        })
        .collect::<Result<_>>()?;
    // ZX = a cos φ + b sin φ, ZY = −a sin φ + b cos φ: the normal equations are diagonal.
    let (mut a, mut b) = (0.0, 0.0);
    for (phi, f) in phases.iter().zip(&fits) {
        let (zx, zy) = (f.coefficients.zx, f.coefficients.zy);
        a += zx * phi.cos() - zy * phi.sin();
        b += zx * phi.sin() + zy * phi.cos();
    }
    a /= m as f64;
    b /= m as f64;
    let ssr: f64 = phases
        .iter()
        .zip(&fits)
        .map(|(phi, f)| {
            let rx = f.coefficients.zx - (a * phi.cos() + b * phi.sin());
            let ry = f.coefficients.zy - (-a * phi.sin() + b * phi.cos());
            rx * rx + ry * ry
        })
        .sum();
    let s = (ssr / (2 * m - 2) as f64).sqrt();
    let rate = a.hypot(b);
    if rate < opts.min_cr_rate {
        return Err(calibration_error(
            "cr_phase",
            format!("ZX envelope {rate:.3e} rad/ns is below {:.3e}: no CR effect", opts.min_cr_rate),
        ));
    }
    let phase = wrap_phase(b.atan2(a));
    let phase_stderr = s / ((m as f64).sqrt() * rate);
    let at_phase = backend.cr_tomography(
        params,
        phase,
        &opts.tomography_times,
        &opts.measurement,
        derive_seed(opts.seed, &[PHASE_STAGE, m as u64]),
    )?;

    let mut report = CalibrationReport::new("cr_phase", &["phase"]);
    for (k, (phi, f)) in phases.iter().zip(&fits).enumerate() {
        report.grid.push(ScanPoint {
            values: vec![*phi],
            objective: f.coefficients.zx,
        });
        report.history.push(RefinementStep {
            iteration: k,
            repetitions: 0,
            parameter: "zy".into(),
            value: *phi,
            objective: f.coefficients.zy,
        });
    }
    let zy = at_phase.coefficients.zy;
    let zy_err = at_phase.stderr[4].hypot(s);
    report.history.push(RefinementStep {
        iteration: m,
        repetitions: 0,
        parameter: "zy".into(),
        value: phase,
        objective: zy,
    });
    report.chosen = vec![phase];
    report.converged = zy.abs() <= (3.0 * zy_err).max(0.02 * at_phase.coefficients.zx.abs());
    Ok(PhaseCalibration {
        phase,
        rate,
        phase_stderr,
        at_phase,
        report,
    })
}

/// Target population of `|1⟩` (`excited`) or `|0⟩` after `n` gates on a prepared product.
fn target_population(
    backend: &dyn GateBackend,
    params: &CnotPulseParams,
    n: usize,
    preps: (Prep, Prep),
    excited: bool,
    opts: &CalibrationOptions,
    seed: u64,
) -> Result<f64> {
    let input = prepare(&opts.measurement, preps.0, preps.1)?;
    let out = backend.apply(params, n, std::slice::from_ref(&input))?.pop().expect("one state");
    let p = measure(&out, [Axis::Z, Axis::Z], &opts.measurement, seed)?.estimate;
    Ok(if excited { p[1] + p[3] } else { p[0] + p[2] })
}

/// Grid scan of the cancellation tone minimizing target excitation after one CR pulse
/// with the control in |0⟩, refined by quadratic interpolation along each axis.
pub fn calibrate_cancellation_rough(
    backend: &dyn GateBackend,
    params: &CnotPulseParams,
    opts: &CalibrationOptions,
) -> Result<(f64, f64, CalibrationReport)> {
    let amps = &opts.cancel_amplitudes;
    let np = opts.cancel_phases;
    if amps.len() < 3 || np < 3 {
        return Err(Error::input("cancellation grid needs at least 3 amplitudes and 3 phases"));
    }
    if amps.windows(2).any(|w| !(w[1] > w[0])) || amps[0] < 0.0 {
        return Err(Error::input("cancellation amplitudes must be non-negative and increasing"));
    }
    let phases: Vec<f64> = (0..np).map(|k| TAU * k as f64 / np as f64).collect();
    let objective = |amp: f64, phase: f64, seed: u64| {
        let p = CnotPulseParams {
            cancel_amplitude: amp,
            cancel_phase: wrap_phase(phase),
            frame_change: 0.0,
            ..*params
        };
        target_population(backend, &p, 1, (Prep::Zero, Prep::Zero), true, opts, seed)
    };
    let cells: Vec<(usize, usize)> = (0..amps.len()).flat_map(|i| (0..np).map(move |j| (i, j))).collect();
    let values: Vec<f64> = cells
        .par_iter()
        .map(|&(i, j)| objective(amps[i], phases[j], derive_seed(opts.seed, &[CANCEL_STAGE, i as u64, j as u64])))
        .collect::<Result<_>>()?;
    let at = |i: usize, j: usize| values[i * np + j];
    let (best_cell, &best_value) = values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty grid");
    let (i, j) = cells[best_cell];
    if i + 1 == amps.len() {
        return Err(calibration_error(
            "cancellation_rough",
            "minimum on the largest scanned amplitude: widen the grid",
        ));
    }
    let mut amp = amps[i];
    let mut phase = phases[j];
    if i > 0 {
        let (lo, hi) = (amps[i] - amps[i - 1], amps[i + 1] - amps[i]);
        let h = lo.min(hi);
        amp += parabola_vertex(at(i - 1, j), at(i, j), at(i + 1, j), h);
        let step = TAU / np as f64;
        phase += parabola_vertex(at(i, (j + np - 1) % np), at(i, j), at(i, (j + 1) % np), step);
    }
    let refined = objective(amp, phase, derive_seed(opts.seed, &[CANCEL_STAGE, u64::MAX]))?;
    let mut report = CalibrationReport::new("cancellation_rough", &["cancel_amplitude", "cancel_phase"]);
    for (&(i, j), &v) in cells.iter().zip(&values) {
        report.grid.push(ScanPoint {
            values: vec![amps[i], phases[j]],
            objective: v,
        });
    }
    report.history.push(RefinementStep {
        iteration: 0,
        repetitions: 1,
        parameter: "cancel_amplitude,cancel_phase".into(),
        value: amp,
        objective: refined,
    });
    if refined > best_value {
        amp = amps[i];
        phase = phases[j];
    }
    let phase = if amp == 0.0 { 0.0 } else { wrap_phase(phase) };
    report.chosen = vec![amp, phase];
    Ok((amp, phase, report))
}

/// Getter and setter of one tuned parameter.
type Access = (fn(&CnotPulseParams) -> f64, fn(&mut CnotPulseParams, f64));

struct Fine<'a> {
    backend: &'a dyn GateBackend,
    opts: &'a CalibrationOptions,
    report: CalibrationReport,
    iteration: usize,
}

#[derive(Clone, Copy)]
enum Loop {
    /// Control |0⟩: target excitation.
    Cancel,
    /// Control |1⟩: target left unflipped.
    Flip,
    /// Control |1⟩, target |+⟩: ⟨Z⟩² of the target, set by the tilt of the rotation axis.
    Tilt,
}

impl Fine<'_> {
    fn objective(&self, p: &CnotPulseParams, lp: Loop, n: usize, seed: u64) -> Result<f64> {
        let (b, opts) = (self.backend, self.opts);
        match lp {
            Loop::Cancel => target_population(b, p, n, (Prep::Zero, Prep::Zero), true, opts, seed),
            Loop::Flip => target_population(b, p, n, (Prep::One, Prep::Zero), false, opts, seed),
            Loop::Tilt => {
                let input = prepare(&opts.measurement, Prep::One, Prep::Plus)?;
                let out = b.apply(p, n, std::slice::from_ref(&input))?.pop().expect("one state");
                Ok(single_expectation(&out, 1, Axis::Z, &opts.measurement, seed)?.powi(2))
            }
        }
    }

    fn record(&mut self, p: &CnotPulseParams, objective: f64) {
        self.report.grid.push(ScanPoint {
            values: vec![p.cancel_amplitude, p.cancel_phase, p.amplitude, p.drag],
            objective,
        });
    }

    /// One parabolic refinement of the parameter read by `get` and written by `set`.
    #[allow(clippy::too_many_arguments)]
    fn tune(
        &mut self,
        params: &mut CnotPulseParams,
        lp: Loop,
        n: usize,
        name: &str,
        (get, set): Access,
        step: f64,
        lower: Option<f64>,
    ) -> Result<()> {
        self.iteration += 1;
        let base_seed = derive_seed(self.opts.seed, &[FINE_STAGE, self.iteration as u64]);
        let current = self.objective(params, lp, n, derive_seed(base_seed, &[0]))?;
        if current < self.opts.threshold() {
            self.report.history.push(RefinementStep {
                iteration: self.iteration,
                repetitions: n,
                parameter: name.into(),
                value: get(params),
                objective: current,
            });
            return Ok(());
        }
        let start = *params;
        let counter = std::sync::atomic::AtomicU64::new(1);
        let evaluated = std::sync::Mutex::new(Vec::new());
        let f = |x: f64| -> Result<f64> {
            let mut p = start;
            set(&mut p, x);
            let k = counter.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
            let v = self.objective(&p, lp, n, derive_seed(base_seed, &[k]))?;
            evaluated.lock().expect("scan log").push((p, v));
            Ok(v)
        };
        let r = refine_1d(&f, get(params), step, self.opts.half_width, self.opts.refinement_rounds, lower)?;
        for (p, v) in evaluated.into_inner().expect("scan log") {
            self.record(&p, v);
        }
        if r.objective < current {
            set(params, r.value);
        }
        self.report.history.push(RefinementStep {
            iteration: self.iteration,
            repetitions: n,
            parameter: name.into(),
            value: get(params),
            objective: r.objective.min(current),
        });
        Ok(())
    }

    fn pass(&mut self, params: &mut CnotPulseParams, n: usize) -> Result<()> {
        let o = self.opts;
        let nf = n as f64;
        let cancel_amplitude: Access = (|p: &CnotPulseParams| p.cancel_amplitude, |p: &mut CnotPulseParams, x| p.cancel_amplitude = x);
        let cancel_phase: Access = (|p: &CnotPulseParams| p.cancel_phase, |p: &mut CnotPulseParams, x| p.cancel_phase = x);
        // the tone cancels a drive-induced term, so it follows the CR amplitude
        let amplitude: Access = (|p: &CnotPulseParams| p.amplitude, |p: &mut CnotPulseParams, x: f64| {
            if p.amplitude > 0.0 {
                p.cancel_amplitude *= x / p.amplitude;
            }
            p.amplitude = x;
        });
        let drag: Access = (|p: &CnotPulseParams| p.drag, |p: &mut CnotPulseParams, x| p.drag = x);
        self.tune(params, Loop::Cancel, n, "cancel_amplitude", cancel_amplitude, o.cancel_amplitude_step / nf, Some(0.0))?;
        self.tune(params, Loop::Cancel, n, "cancel_phase", cancel_phase, o.cancel_phase_step / nf, None)?;
        params.cancel_phase = wrap_phase(params.cancel_phase);
        self.tune(params, Loop::Flip, n, "amplitude", amplitude, o.amplitude_step / nf, Some(0.0))?;
        self.tune(params, Loop::Tilt, n, "drag", drag, o.drag_step / nf, None)?;
        Ok(())
    }
}

fn relative_change(a: &CnotPulseParams, b: &CnotPulseParams) -> f64 {
    let pairs = [
        (a.cancel_amplitude, b.cancel_amplitude),
        (a.cancel_phase, b.cancel_phase),
        (a.amplitude, b.amplitude),
        (a.drag, b.drag),
    ];
    pairs
        .iter()
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(1e-12))
        .fold(0.0, f64::max)
}

/// Repeated-gate error amplification. For each gate count N: (a) cancellation amplitude
/// and phase against target excitation with the control in |0⟩, (b) CR amplitude
/// against the unflipped population with the control in |1⟩, (c) DRAG against the
/// target ⟨Z⟩ after the control-|1⟩ rotation acts on |+⟩. Scan steps shrink as 1/N.
pub fn fine_calibrate(
    backend: &dyn GateBackend,
    params: &CnotPulseParams,
    opts: &CalibrationOptions,
) -> Result<(CnotPulseParams, CalibrationReport)> {
    if opts.repetitions.is_empty() || opts.repetitions.iter().any(|n| n % 2 == 0) {
        return Err(Error::input("fine calibration needs a non-empty list of odd gate counts"));
    }
    let mut p = *params;
    let mut fine = Fine {
        backend,
        opts,
        report: CalibrationReport::new("fine", &["cancel_amplitude", "cancel_phase", "amplitude", "drag"]),
        iteration: 0,
    };
    for &n in &opts.repetitions {
        fine.pass(&mut p, n)?;
    }
    let n_max = *opts.repetitions.iter().max().expect("non-empty");
    let mut change = f64::INFINITY;
    for _ in 0..opts.final_passes {
        let before = p;
        fine.pass(&mut p, n_max)?;
        change = relative_change(&before, &p);
        if change < 1e-4 {
            break;
        }
    }
    let mut report = fine.report;
    report.converged = opts.final_passes == 0 || change < 1e-3;
    report.chosen = vec![p.cancel_amplitude, p.cancel_phase, p.amplitude, p.drag];
    Ok((p.normalized(), report))
}

/// Conditional phase φ of the gate `|0⟩⟨0|⊗I + e^{iφ}|1⟩⟨1|⊗X`, read from the control
/// after one gate on |+⟩|+⟩. Returns φ and the parameters with the frame change −φ.
pub fn calibrate_frame_change(
    backend: &dyn GateBackend,
    params: &CnotPulseParams,
    opts: &CalibrationOptions,
) -> Result<(f64, CnotPulseParams, CalibrationReport)> {
    let bare = CnotPulseParams {
        frame_change: 0.0,
        ..*params
    };
    let input = prepare(&opts.measurement, Prep::Plus, Prep::Plus)?;
    let out = backend.apply(&bare, 1, std::slice::from_ref(&input))?.pop().expect("one state");
    let seed = |k: u64| derive_seed(opts.seed, &[FRAME_STAGE, k]);
    let x = single_expectation(&out, 0, Axis::X, &opts.measurement, seed(0))?;
    let y = single_expectation(&out, 0, Axis::Y, &opts.measurement, seed(1))?;
    let z = single_expectation(&out, 0, Axis::Z, &opts.measurement, seed(2))?;
    // an ideal gate leaves the control pure on the equator
    let radius = x.hypot(y);
    if z.abs() > 0.1 || radius < 0.9 {
        return Err(calibration_error(
            "frame_change",
            format!("control Bloch vector (r = {radius:.3}, z = {z:.3}) is not on the equator; earlier stages did not converge"),
        ));
    }
    let phi = y.atan2(x);
    let calibrated = CnotPulseParams {
        frame_change: wrap_phase(-phi),
        ..*params
    };
    let mut report = CalibrationReport::new("frame_change", &["frame_change"]);
    report.grid.push(ScanPoint {
        values: vec![calibrated.frame_change],
        objective: 1.0 - radius,
    });
    report.chosen = vec![calibrated.frame_change];
    Ok((phi, calibrated, report))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationOutcome {
    pub params: CnotPulseParams,
    pub phase: PhaseCalibration,
    pub conditional_phase: f64,
    pub reports: Vec<CalibrationReport>,
    /// QPT process fidelity of the final gate against the ideal CNOT.
    pub process_fidelity: Option<f64>,
}

fn cnot() -> CMatrix {
    let mut u = CMatrix::zeros(4, 4);
    for (i, j) in [(0, 0), (1, 1), (2, 3), (3, 2)] {
        u[(i, j)] = re(1.0);
    }
    u
}

/// QPT of one gate with the given parameters, against the ideal CNOT.
pub fn gate_process_fidelity(
    backend: &dyn GateBackend,
    params: &CnotPulseParams,
    opts: &CalibrationOptions,
) -> Result<f64> {
    let exec = |rho: &DensityMatrix| -> Result<DensityMatrix> {
        Ok(backend.apply(params, 1, std::slice::from_ref(rho))?.pop().expect("one state"))
    };
    let qpt = quantum_process_tomography(&exec, &opts.measurement, derive_seed(opts.seed, &[VERIFY_STAGE]))?;
    process_fidelity(&qpt.projected, &ProcessMatrix::from_unitary(&cnot())?)
}

/// All stages in order. Between the phase scan and the cancellation scan the CR
/// amplitude is rescaled from the measured ω_ZX so that `4 ω_ZX (duration − ramp) = π`.
pub fn calibrate_cnot(
    backend: &dyn GateBackend,
    initial: &CnotPulseParams,
    opts: &CalibrationOptions,
) -> Result<CalibrationOutcome> {
    initial.validate()?;
    let mut p = *initial;
    let phase = calibrate_cr_phase(backend, &p, opts)?;
    p.phase = phase.phase;
    let zx = phase.at_phase.coefficients.zx;
    if zx <= 0.0 {
        return Err(calibration_error("cr_amplitude", "ω_ZX at the calibrated phase is not positive"));
    }
    let before = p.amplitude;
    p.amplitude *= PI / (4.0 * zx * p.effective_duration());
    let mut amp_report = CalibrationReport::new("cr_amplitude", &["amplitude"]);
    amp_report.grid.push(ScanPoint {
        values: vec![before],
        objective: zx,
    });
    amp_report.chosen = vec![p.amplitude];

    let (ca, cp, rough) = calibrate_cancellation_rough(backend, &p, opts)?;
    p.cancel_amplitude = ca;
    p.cancel_phase = cp;
    let (fine_params, fine) = fine_calibrate(backend, &p, opts)?;
    let (conditional_phase, p, frame) = calibrate_frame_change(backend, &fine_params, opts)?;
    let process_fidelity = if opts.verify {
        Some(gate_process_fidelity(backend, &p, opts)?)
    } else {
        None
    };
    Ok(CalibrationOutcome {
        params: p,
        reports: vec![phase.report.clone(), amp_report, rough, fine, frame],
        phase,
        conditional_phase,
        process_fidelity,
    })
}
