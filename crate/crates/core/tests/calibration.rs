use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use remote_cnot::calibration::*;
use remote_cnot::device::model::wrap_phase;
use remote_cnot::device::{DeviceModel, PauliCoefficients};
use remote_cnot::pulse::readout::{measure, Axis, MeasurementConfig};
use remote_cnot::pulse::Simulator;
use remote_cnot::quantum::linalg::{c, expm_hermitian, kron, CMatrix};
use remote_cnot::quantum::{pauli_embed, DensityMatrix};
use remote_cnot::tomography::hamiltonian::{hamiltonian_tomography, RabiSource, TomoFitResult};
use remote_cnot::Error;

/// Effective-Hamiltonian stand-in for the device: a CR term of strength `k·A` at phase
/// `phi0`, crosstalk IX/IY of strength `cross·A` at `phi1`, a target tone adding
/// `(a/2)(cos p X − sin p Y)`, a control-|1⟩ tilt `tilt·(β − beta0)(IZ − ZZ)` and a ZI shift.
#[derive(Clone, Copy)]
struct Planted {
    k: f64,
    phi0: f64,
    cross: f64,
    phi1: f64,
    tilt: f64,
    beta0: f64,
    zi: f64,
}

const T_EFF: f64 = 160.0;

impl Planted {
    fn new(phi0: f64) -> Self {
        Self {
            k: PI / (4.0 * T_EFF * TAU * 0.04),
            phi0,
            cross: 0.0,
            phi1: 0.0,
            tilt: 0.0,
            beta0: 0.0,
            zi: 0.0,
        }
    }

    /// ZI rate giving conditional phase `phi` for the ideal gate.
    fn with_conditional_phase(mut self, phi: f64) -> Self {
        self.zi = (phi - FRAC_PI_2) / (2.0 * T_EFF);
        self
    }

    fn cr_coefficients(&self, amplitude: f64, phase: f64) -> PauliCoefficients {
        let d = self.tilt;
        PauliCoefficients {
            ix: self.cross * amplitude * (phase - self.phi1).cos(),
            iy: -self.cross * amplitude * (phase - self.phi1).sin(),
            iz: d,
            zx: self.k * amplitude * (phase - self.phi0).cos(),
            zy: -self.k * amplitude * (phase - self.phi0).sin(),
            zz: -d,
        }
    }

    fn gate(&self, p: &CnotPulseParams) -> CMatrix {
        let mut co = self.cr_coefficients(p.amplitude, p.phase);
        co.ix += 0.5 * p.cancel_amplitude * p.cancel_phase.cos();
        co.iy -= 0.5 * p.cancel_amplitude * p.cancel_phase.sin();
        let d = self.tilt * (p.drag - self.beta0);
        co.iz = d;
        co.zz = -d;
        let h = co.hamiltonian() + pauli_embed("ZI").unwrap().matrix() * c(self.zi, 0.0);
        let u = expm_hermitian(&h, p.effective_duration());
        let mut frame = CMatrix::identity(2, 2);
        frame[(1, 1)] = c(0.0, p.frame_change).exp();
        kron(&frame, &CMatrix::identity(2, 2)) * u
    }

    /// Parameters that make the gate exactly CNOT up to a global phase.
    fn ideal(&self) -> CnotPulseParams {
        let amplitude = PI / (4.0 * self.k * T_EFF);
        let co = self.cr_coefficients(amplitude, self.phi0);
        // tone must bring the control-|0⟩ block to zero: (a/2)e^{-ip} = −(ix + zx) − i iy
        let (x, y) = (-(co.ix + co.zx), co.iy);
        CnotPulseParams {
            amplitude,
            phase: wrap_phase(self.phi0),
            duration: T_EFF + 30.0,
            ramp: 30.0,
            drag: self.beta0,
            cancel_amplitude: 2.0 * x.hypot(y),
            cancel_phase: wrap_phase(y.atan2(x)),
            frame_change: wrap_phase(-(FRAC_PI_2 + 2.0 * self.zi * T_EFF)),
        }
    }
}

impl GateBackend for Planted {
    fn cr_tomography(
        &self,
        params: &CnotPulseParams,
        phase: f64,
        times: &[f64],
        cfg: &MeasurementConfig,
        seed: u64,
    ) -> remote_cnot::Result<TomoFitResult> {
        let mut co = self.cr_coefficients(params.amplitude, phase);
        let d = self.tilt * (params.drag - self.beta0);
        co.iz = d;
        co.zz = -d;
        hamiltonian_tomography(&RabiSource::Planted(co), times, cfg, seed)
    }

    fn apply(
        &self,
        params: &CnotPulseParams,
        repetitions: usize,
        inputs: &[DensityMatrix],
    ) -> remote_cnot::Result<Vec<DensityMatrix>> {
        let g = self.gate(params);
        let mut u = CMatrix::identity(4, 4);
        for _ in 0..repetitions {
            u = &g * u;
        }
        inputs.iter().map(|rho| rho.conjugate(&u)).collect()
    }
}

fn realistic() -> Planted {
    Planted {
        cross: 0.8 * Planted::new(0.0).k,
        phi1: 0.7 + PI + 0.3,
        tilt: TAU * 1e-4,
        beta0: 1.5,
        ..Planted::new(0.7)
    }
    .with_conditional_phase(-0.4)
}

fn cnot() -> CMatrix {
    let mut u = CMatrix::zeros(4, 4);
    for (i, j) in [(0, 0), (1, 1), (2, 3), (3, 2)] {
        u[(i, j)] = c(1.0, 0.0);
    }
    u
}

fn quick() -> CalibrationOptions {
    CalibrationOptions {
        tomography_times: (1..=25).map(|k| 32.0 * k as f64).collect(),
        ..CalibrationOptions::default()
    }
}

fn planted_fidelity(b: &Planted, p: &CnotPulseParams) -> f64 {
    let g = b.gate(p);
    let overlap = (cnot().adjoint() * g).trace();
    overlap.norm_sqr() / 16.0
}

fn target_excited(b: &Planted, p: &CnotPulseParams, n: usize, control: Prep, target: Prep) -> f64 {
    let cfg = MeasurementConfig::analytic();
    let out = b.apply(p, n, &[prepare(&cfg, control, target).unwrap()]).unwrap().pop().unwrap();
    let q = measure(&out, [Axis::Z, Axis::Z], &cfg, 0).unwrap().estimate;
    q[1] + q[3]
}

#[test]
fn planted_oracle_is_cnot() {
    let b = realistic();
    assert!((planted_fidelity(&b, &b.ideal()) - 1.0).abs() < 1e-12);
}

#[test]
fn phase_recovered_from_planted_scan() {
    let b = Planted::new(0.7);
    let r = calibrate_cr_phase(&b, &CnotPulseParams::default(), &quick()).unwrap();
    assert!((r.phase - 0.7).abs() < 1e-6, "{}", r.phase);
    assert!((r.rate - b.k * TAU * 0.04).abs() < 1e-6 * r.rate);
    assert!(r.report.converged);
    assert!(r.at_phase.coefficients.zy.abs() < 0.02 * r.at_phase.coefficients.zx);
    assert_eq!(r.report.grid.len(), 24);
}

#[test]
fn phase_follows_shifts_of_the_device_phase() {
    let opts = quick();
    let p = CnotPulseParams::default();
    let base = calibrate_cr_phase(&Planted::new(0.2), &p, &opts).unwrap().phase;
    for delta in [0.5, 2.0, -1.3] {
        let shifted = calibrate_cr_phase(&Planted::new(0.2 + delta), &p, &opts).unwrap().phase;
        let diff = wrap_phase(shifted - base - delta);
        assert!(diff.min(TAU - diff) < 1e-6, "delta {delta}: {shifted}");
    }
}

#[test]
fn phase_with_finite_shots() {
    let b = Planted::new(4.0);
    let opts = CalibrationOptions {
        measurement: MeasurementConfig::shots(2000),
        seed: 5,
        ..quick()
    };
    let r = calibrate_cr_phase(&b, &CnotPulseParams::default(), &opts).unwrap();
    let err = wrap_phase(r.phase - 4.0 + PI) - PI;
    assert!(err.abs() < 1f64.to_radians(), "{err}");
    assert!(err.abs() < 5.0 * r.phase_stderr.max(1e-4), "{err} vs {}", r.phase_stderr);
}

#[test]
fn no_cross_resonance_is_reported() {
    let b = Planted { k: 0.0, ..Planted::new(0.0) };
    let err = calibrate_cr_phase(&b, &CnotPulseParams::default(), &quick()).unwrap_err();
    assert!(matches!(err, Error::Calibration { ref stage, .. } if stage == "cr_phase"), "{err}");
}

#[test]
fn rough_cancellation_without_crosstalk_is_zero() {
    let b = Planted { k: 0.0, ..Planted::new(0.0) };
    let (amp, phase, _) = calibrate_cancellation_rough(&b, &CnotPulseParams::default(), &quick()).unwrap();
    assert_eq!(amp, 0.0);
    assert_eq!(phase, 0.0);
}

#[test]
fn rough_cancellation_removes_planted_ix() {
    // pure single-qubit drive on the target, no ZX
    let b = Planted {
        k: 0.0,
        cross: TAU * 0.33e-3 / (TAU * 0.04),
        phi1: 0.4,
        ..Planted::new(0.0)
    };
    let p = CnotPulseParams::default();
    let opts = quick();
    let (amp, phase, report) = calibrate_cancellation_rough(&b, &p, &opts).unwrap();
    let tuned = CnotPulseParams {
        cancel_amplitude: amp,
        cancel_phase: phase,
        ..p
    };
    let before = target_excited(&b, &p, 1, Prep::Zero, Prep::Zero);
    let after = target_excited(&b, &tuned, 1, Prep::Zero, Prep::Zero);
    assert!(before > 0.05);
    assert!(after < 1e-3 * before, "{after} vs {before}");
    let grid_min = report.grid.iter().map(|s| s.objective).fold(f64::INFINITY, f64::min);
    assert!(after <= grid_min + 1e-15);
    assert_eq!(report.grid.len(), opts.cancel_amplitudes.len() * opts.cancel_phases);
}

#[test]
fn rough_cancellation_rejects_a_grid_that_is_too_small() {
    let b = Planted {
        k: 0.0,
        cross: TAU * 1.5e-3 / (TAU * 0.04),
        ..Planted::new(0.0)
    };
    let err = calibrate_cancellation_rough(&b, &CnotPulseParams::default(), &quick()).unwrap_err();
    assert!(matches!(err, Error::Calibration { .. }), "{err}");
}

#[test]
fn fine_loops_leave_perfect_parameters_alone() {
    let b = realistic();
    let ideal = b.ideal();
    let (p, report) = fine_calibrate(&b, &ideal, &quick()).unwrap();
    assert!(report.converged);
    for (x, y) in [
        (p.amplitude, ideal.amplitude),
        (p.drag, ideal.drag),
        (p.cancel_amplitude, ideal.cancel_amplitude),
        (p.cancel_phase, ideal.cancel_phase),
    ] {
        assert!((x - y).abs() <= 1e-9 * y.abs().max(1.0), "{x} vs {y}");
    }
}

#[test]
fn fine_loops_recover_amplitude_error() {
    let b = realistic();
    let ideal = b.ideal();
    let start = CnotPulseParams {
        amplitude: 1.02 * ideal.amplitude,
        ..ideal
    };
    let (p, report) = fine_calibrate(&b, &start, &quick()).unwrap();
    let rel = (p.amplitude / ideal.amplitude - 1.0).abs();
    assert!(rel < 5e-4, "{rel}");
    assert!(report.history.iter().any(|s| s.repetitions == 11));
    let tuned = CnotPulseParams {
        frame_change: ideal.frame_change,
        ..p
    };
    assert!(planted_fidelity(&b, &tuned) > planted_fidelity(&b, &start));
}

#[test]
fn fine_loops_fix_drag_and_cancellation() {
    let b = realistic();
    let ideal = b.ideal();
    let start = CnotPulseParams {
        drag: ideal.drag + 0.8,
        cancel_amplitude: 0.9 * ideal.cancel_amplitude,
        cancel_phase: wrap_phase(ideal.cancel_phase + 0.05),
        ..ideal
    };
    let (p, _) = fine_calibrate(&b, &start, &quick()).unwrap();
    assert!((p.drag - ideal.drag).abs() < 1e-2, "{}", p.drag);
    assert!((p.cancel_amplitude / ideal.cancel_amplitude - 1.0).abs() < 1e-3);
    let f0 = planted_fidelity(&b, &start);
    let f1 = planted_fidelity(&b, &p);
    assert!(1.0 - f1 < 1e-5 && f1 > f0, "{f0} -> {f1}");
}

#[test]
fn fine_loops_need_odd_counts() {
    let b = realistic();
    let opts = CalibrationOptions {
        repetitions: vec![1, 2],
        ..quick()
    };
    assert!(matches!(fine_calibrate(&b, &b.ideal(), &opts), Err(Error::InvalidInput(_))));
}

#[test]
fn repeated_gates_amplify_rotation_errors() {
    // control-|1⟩ rotation angle π(1 + ε) needs a ZX error of 2ε with fixed cancellation
    let b = Planted::new(0.0);
    let eps = 0.01;
    let ideal = b.ideal();
    let p = CnotPulseParams {
        amplitude: (1.0 + 2.0 * eps) * ideal.amplitude,
        ..ideal
    };
    for n in [1, 3, 5] {
        let unflipped = 1.0 - target_excited(&b, &p, n, Prep::One, Prep::Zero);
        let expected = (n as f64 * eps * PI / 2.0).sin().powi(2);
        assert!((unflipped - expected).abs() < 1e-12, "N={n}: {unflipped} vs {expected}");
    }
}

#[test]
fn frame_change_recovers_planted_phase() {
    let opts = quick();
    for phi in [0.3, 0.0, -2.0, 2.9] {
        let b = realistic().with_conditional_phase(phi);
        let mut p = b.ideal();
        p.frame_change = 1.234;
        let (found, tuned, _) = calibrate_frame_change(&b, &p, &opts).unwrap();
        let err = wrap_phase(found - phi + PI) - PI;
        assert!(err.abs() < 2e-3, "{phi}: {found}");
        assert!((tuned.frame_change - wrap_phase(-phi)).abs() < 2e-3 || phi == 0.0);
        if phi == 0.0 {
            let d = tuned.frame_change;
            assert!(d.min(TAU - d) < 1e-9, "{d}");
        }
        assert!(1.0 - planted_fidelity(&b, &tuned) < 1e-9);
    }
}

#[test]
fn frame_change_rejects_a_broken_gate() {
    let b = realistic();
    // CR phase off by a quarter turn: ZY instead of ZX entangles |+⟩|+⟩
    let p = CnotPulseParams {
        phase: wrap_phase(b.ideal().phase + FRAC_PI_2),
        ..b.ideal()
    };
    let err = calibrate_frame_change(&b, &p, &quick()).unwrap_err();
    assert!(matches!(err, Error::Calibration { ref stage, .. } if stage == "frame_change"), "{err}");
}

#[test]
fn full_pipeline_on_planted_device_is_idempotent() {
    let b = realistic();
    let opts = quick();
    let first = calibrate_cnot(&b, &CnotPulseParams::default(), &opts).unwrap();
    assert!(first.process_fidelity.unwrap() > 0.99999, "{:?}", first.process_fidelity);
    let second = calibrate_cnot(&b, &first.params, &opts).unwrap();
    let (a, s) = (first.params, second.params);
    for (x, y) in [
        (a.amplitude, s.amplitude),
        (a.drag, s.drag),
        (a.cancel_amplitude, s.cancel_amplitude),
        (a.phase + 1.0, s.phase + 1.0),
        (a.cancel_phase, s.cancel_phase),
        (a.frame_change, s.frame_change),
    ] {
        assert!((x - y).abs() <= 1e-3 * x.abs().max(1e-2), "{x} vs {y}");
    }
    let stages: Vec<&str> = first.reports.iter().map(|r| r.stage.as_str()).collect();
    assert_eq!(stages, ["cr_phase", "cr_amplitude", "cancellation_rough", "fine", "frame_change"]);
}

#[test]
fn invalid_initial_parameters_are_rejected() {
    let b = realistic();
    let p = CnotPulseParams {
        ramp: 120.0,
        ..CnotPulseParams::default()
    };
    assert!(matches!(calibrate_cnot(&b, &p, &quick()), Err(Error::Config(_))));
    let p = CnotPulseParams {
        phase: 7.0,
        amplitude: f64::NAN,
        ..CnotPulseParams::default()
    };
    match p.validate() {
        Err(Error::Config(list)) => assert_eq!(list.len(), 2, "{list:?}"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn params_json_round_trip() {
    let p = realistic().ideal();
    let text = serde_json::to_string(&p).unwrap();
    let back: CnotPulseParams = serde_json::from_str(&text).unwrap();
    assert_eq!(p, back);
}

#[test]
fn refine_never_returns_worse_than_its_grid() {
    let f = |x: f64| Ok((x - 0.123).abs().sqrt() + 0.1 * (5.0 * x).sin());
    let r = refine_1d(&f, 0.0, 0.05, 3, 3, None).unwrap();
    let min = r.points.iter().map(|p| p.objective).fold(f64::INFINITY, f64::min);
    assert_eq!(r.objective, min);
}

struct DeviceRun {
    model: DeviceModel,
    sim: Simulator,
    outcome: CalibrationOutcome,
    elapsed: Duration,
}

fn device_run() -> &'static DeviceRun {
    static RUN: OnceLock<DeviceRun> = OnceLock::new();
    RUN.get_or_init(|| {
        let model = DeviceModel::default_device().without_decoherence();
        let sim = Simulator::new(&model).unwrap();
        let start = Instant::now();
        let outcome = calibrate_cnot(
            &DeviceBackend { sim: &sim, noise: false },
            &CnotPulseParams::default(),
            &CalibrationOptions::default(),
        )
        .unwrap();
        DeviceRun {
            model,
            sim,
            outcome,
            elapsed: start.elapsed(),
        }
    })
}

#[test]
fn device_calibration_reaches_high_fidelity() {
    let run = device_run();
    let f = run.outcome.process_fidelity.unwrap();
    println!("process fidelity {f:.6} after {:.1} s", run.elapsed.as_secs_f64());
    assert!(f >= 0.999, "{f}");
    assert!(run.elapsed < Duration::from_secs(300), "{:?}", run.elapsed);
    assert!(run.outcome.reports.iter().all(|r| r.converged));
}

#[test]
fn device_phase_is_zero_and_cancels_zy() {
    let run = device_run();
    let ph = &run.outcome.phase;
    let d = ph.phase.min(TAU - ph.phase);
    assert!(d < 1f64.to_radians(), "{}", ph.phase);
    let co = ph.at_phase.coefficients;
    assert!(co.zy.abs() < 0.02 * co.zx.abs(), "{co:?}");
}

#[test]
fn device_model_is_untouched() {
    let run = device_run();
    assert_eq!(run.sim.model(), &run.model);
    assert_eq!(run.model, DeviceModel::default_device().without_decoherence());
}

#[test]
fn outcome_json_round_trip() {
    let run = device_run();
    let text = serde_json::to_string(&run.outcome).unwrap();
    let back: CalibrationOutcome = serde_json::from_str(&text).unwrap();
    assert_eq!(back.params, run.outcome.params);
    assert_eq!(back.reports.len(), run.outcome.reports.len());
}
