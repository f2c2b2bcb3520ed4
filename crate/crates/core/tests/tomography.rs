use std::f64::consts::{FRAC_1_SQRT_2, TAU};

use remote_cnot::device::effective::effective_pauli_coefficients;
use remote_cnot::device::{DeviceModel, DriveSettings, PauliCoefficients};
use remote_cnot::pulse::readout::{expected_frequencies, Axis};
use remote_cnot::pulse::rng::rng;
use remote_cnot::pulse::{MeasurementConfig, Simulator};
use remote_cnot::quantum::fidelity::process_fidelity;
use remote_cnot::quantum::linalg::{c, frobenius, re, CMatrix, CVector};
use remote_cnot::quantum::{DensityMatrix, HilbertSpec, ProcessMatrix};
use remote_cnot::tomography::hamiltonian::{default_time_grid, measure_target_bloch};
use remote_cnot::tomography::state::{chi_json, state_tomography};
use remote_cnot::tomography::*;
use rand::Rng;

fn mhz(v: f64) -> f64 {
    TAU * v * 1e-3
}

fn cnot() -> CMatrix {
    let mut u = CMatrix::zeros(4, 4);
    for (i, j) in [(0, 0), (1, 1), (2, 3), (3, 2)] {
        u[(i, j)] = re(1.0);
    }
    u
}

/// Control in |0⟩, target in `a|0⟩ + (b + ic)|1⟩`.
fn target_state([a, b, cc]: [f64; 3]) -> DensityMatrix {
    let v = CVector::from_column_slice(&[re(a), c(b, cc), re(0.0), re(0.0)]);
    DensityMatrix::from_pure(&v, HilbertSpec::qubits(2)).unwrap()
}

fn planted(coeffs: PauliCoefficients, times: &[f64]) -> [BlochTrajectory; 2] {
    cr_rabi_experiment(&RabiSource::Planted(coeffs), times, &MeasurementConfig::analytic(), 1).unwrap()
}

fn uniform_grid(n: usize, step: f64) -> Vec<f64> {
    (0..n).map(|k| step * k as f64).collect()
}

#[test]
fn bloch_vector_of_basis_and_plus_states() {
    let cfg = MeasurementConfig::analytic();
    let zero = target_state([1.0, 0.0, 0.0]);
    let r = measure_target_bloch(&zero, &cfg, 0).unwrap();
    assert!((r[0]).abs() < 1e-12 && r[1].abs() < 1e-12 && (r[2] - 1.0).abs() < 1e-12);
    let plus = target_state([FRAC_1_SQRT_2, FRAC_1_SQRT_2, 0.0]);
    let r = measure_target_bloch(&plus, &cfg, 0).unwrap();
    assert!((r[0] - 1.0).abs() < 1e-12 && r[1].abs() < 1e-12 && r[2].abs() < 1e-12);
}

fn random_target(seed: u64) -> (DensityMatrix, [f64; 3]) {
    let mut g = rng(seed);
    let z: f64 = g.random_range(-1.0..1.0);
    let phi: f64 = g.random_range(0.0..TAU);
    let s = (1.0 - z * z).sqrt();
    let (th2c, th2s) = (((1.0 + z) / 2.0).sqrt(), ((1.0 - z) / 2.0).sqrt());
    let rho = target_state([th2c, th2s * phi.cos(), th2s * phi.sin()]);
    (rho, [s * phi.cos(), s * phi.sin(), z])
}

#[test]
fn bloch_vector_of_random_state_within_shot_bound() {
    let cfg = MeasurementConfig::shots(10_000);
    for seed in 0..20 {
        let (rho, exact) = random_target(seed);
        let r = measure_target_bloch(&rho, &cfg, 100 + seed).unwrap();
        for k in 0..3 {
            let sigma = ((1.0 - exact[k] * exact[k]) / 10_000.0).sqrt().max(1e-4);
            assert!((r[k] - exact[k]).abs() < 3.5 * sigma, "seed {seed} axis {k}: {r:?} vs {exact:?}");
        }
    }
}

#[test]
fn bloch_vector_is_unbiased() {
    let (rho, exact) = random_target(7);
    let shots = 500;
    let cfg = MeasurementConfig::shots(shots);
    let n = 200;
    let samples: Vec<[f64; 3]> = (0..n).map(|s| measure_target_bloch(&rho, &cfg, s).unwrap()).collect();
    for k in 0..3 {
        let mean = samples.iter().map(|r| r[k]).sum::<f64>() / n as f64;
        let var = samples.iter().map(|r| (r[k] - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let se = (var / n as f64).sqrt();
        assert!((mean - exact[k]).abs() < 3.0 * se, "axis {k}: {mean} vs {} (se {se})", exact[k]);
    }
}

#[test]
fn planted_zx_closed_form() {
    let w = mhz(0.5);
    let coeffs = PauliCoefficients {
        zx: w,
        ..Default::default()
    };
    let times = uniform_grid(60, 20.0);
    let [t0, t1] = planted(coeffs, &times);
    for (k, &t) in times.iter().enumerate() {
        let (a, b) = (t0.points[k], t1.points[k]);
        assert!((a[2] - (2.0 * w * t).cos()).abs() < 1e-10);
        assert!((b[2] - (-2.0 * w * t).cos()).abs() < 1e-10);
        assert!((a[1] + (2.0 * w * t).sin()).abs() < 1e-10);
        assert!((a[1] + b[1]).abs() < 1e-10);
        assert!(a[0].abs() < 1e-10 && b[0].abs() < 1e-10);
    }
}

fn typical_coefficients() -> PauliCoefficients {
    PauliCoefficients::from_array([0.8, 0.1, 0.05, 1.2, 0.15, 0.08].map(mhz))
}

#[test]
fn planted_coefficients_recovered() {
    let truth = typical_coefficients();
    let [t0, t1] = planted(truth, &default_time_grid());
    let fit = fit_hamiltonian_tomography(&t0, &t1).unwrap();
    assert!(fit.converged);
    assert!(fit.residual < 1e-6, "residual {}", fit.residual);
    for (got, want) in fit.coefficients.to_array().iter().zip(truth.to_array()) {
        assert!((got - want).abs() < 5e-3 * want.abs(), "{got} vs {want}");
    }
    assert!(fit.stderr.iter().all(|e| *e >= 0.0));
}

#[test]
fn swapping_trajectories_negates_conditional_terms() {
    let [t0, t1] = planted(typical_coefficients(), &default_time_grid());
    let a = fit_hamiltonian_tomography(&t0, &t1).unwrap().coefficients.to_array();
    let b = fit_hamiltonian_tomography(&t1, &t0).unwrap().coefficients.to_array();
    for k in 0..3 {
        assert!((a[k] - b[k]).abs() < 1e-9, "{k}");
        assert!((a[k + 3] + b[k + 3]).abs() < 1e-9, "{k}");
    }
}

#[test]
fn flat_trajectories_fit_to_zero() {
    let [t0, t1] = planted(PauliCoefficients::default(), &default_time_grid());
    let fit = fit_hamiltonian_tomography(&t0, &t1).unwrap();
    assert!(fit.coefficients.to_array().iter().all(|v| v.abs() < 1e-9), "{:?}", fit.coefficients);
    assert!(fit.residual < 1e-9);
}

#[test]
fn noisy_planted_fit_is_close() {
    let truth = typical_coefficients();
    let cfg = MeasurementConfig::shots(2000);
    let fit = hamiltonian_tomography(&RabiSource::Planted(truth), &default_time_grid(), &cfg, 5).unwrap();
    for ((got, want), err) in fit.coefficients.to_array().iter().zip(truth.to_array()).zip(fit.stderr) {
        assert!((got - want).abs() < 5.0 * err + 1e-5, "{got} vs {want} ± {err}");
    }
}

#[test]
fn trajectory_norms_stay_in_ball() {
    let cfg = MeasurementConfig::shots(2000);
    let [t0, t1] =
        cr_rabi_experiment(&RabiSource::Planted(typical_coefficients()), &default_time_grid(), &cfg, 3).unwrap();
    let sigma = (3.0f64 / 2000.0).sqrt();
    for p in t0.points.iter().chain(&t1.points) {
        let n = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
        assert!(n <= 1.0 + 3.0 * sigma, "{n}");
    }
}

#[test]
fn zero_drive_on_device_is_static() {
    let model = DeviceModel::default_device().without_decoherence();
    let sim = Simulator::new(&model).unwrap();
    let drive = DriveSettings::cross_resonance(&model, 0.0, 0.0).unwrap();
    let source = RabiSource::Device {
        sim: &sim,
        drive,
        noise: false,
    };
    let times = uniform_grid(11, 100.0);
    let [t0, t1] = cr_rabi_experiment(&source, &times, &MeasurementConfig::analytic(), 0).unwrap();
    for p in t0.points.iter().chain(&t1.points) {
        assert!((p[2] - 1.0).abs() < 1e-9 && p[0].abs() < 1e-9 && p[1].abs() < 1e-9, "{p:?}");
    }
}

#[test]
fn device_fit_matches_effective_coefficients() {
    let model = DeviceModel::default_device().without_decoherence();
    let sim = Simulator::new(&model).unwrap();
    for amp in [20.0, 40.0] {
        let drive = DriveSettings::cross_resonance(&model, mhz(amp), 0.0).unwrap();
        let expected = effective_pauli_coefficients(&model, &drive).unwrap();
        let source = RabiSource::Device {
            sim: &sim,
            drive,
            noise: false,
        };
        let fit = hamiltonian_tomography(&source, &default_time_grid(), &MeasurementConfig::analytic(), 0).unwrap();
        for (k, (got, want)) in fit.coefficients.to_array().iter().zip(expected.to_array()).enumerate() {
            if want.abs() > 1e-4 {
                assert!(
                    (got - want).abs() < 0.02 * want.abs(),
                    "{amp} MHz {}: fit {got} vs effective {want}",
                    PauliCoefficients::LABELS[k]
                );
            }
        }
    }
}

#[test]
fn sweep_zero_row_and_odd_symmetry() {
    let model = DeviceModel::default_device().without_decoherence();
    let sim = Simulator::new(&model).unwrap();
    let a = mhz(25.0);
    let res = cr_parameter_sweep(
        &sim,
        &[-a, 0.0, a],
        0.0,
        &default_time_grid(),
        &MeasurementConfig::analytic(),
        0,
        None,
    )
    .unwrap();
    let row = |k: usize| res.rows[k].fit.as_ref().unwrap().coefficients;
    assert!(row(1).to_array().iter().all(|v| v.abs() < 1e-6), "{:?}", row(1));
    assert!(row(2).zx.abs() > 1e-3);
    assert!((row(0).zx + row(2).zx).abs() < 1e-3 * row(2).zx.abs());
    let csv = res.to_csv();
    assert_eq!(csv.lines().count(), 4);
    assert!(csv.starts_with("amplitude_mhz,ix_mhz"));
}

#[test]
fn sweep_zx_grows_on_small_amplitudes() {
    let model = DeviceModel::default_device().without_decoherence();
    let sim = Simulator::new(&model).unwrap();
    let grid: Vec<f64> = (0..=6).map(|k| mhz(5.0 * k as f64)).collect();
    let res = cr_parameter_sweep(&sim, &grid, 0.0, &default_time_grid(), &MeasurementConfig::analytic(), 0, Some(mhz(0.5)))
        .unwrap();
    let zx: Vec<f64> = res.rows.iter().map(|r| r.fit.as_ref().unwrap().coefficients.zx.abs()).collect();
    assert!(zx.windows(2).all(|w| w[1] > w[0]), "{zx:?}");
    let wp = res.working_point.expect("crossing inside the grid");
    assert!(wp > grid[0] && wp < grid[6]);
}

fn identity_executor(rho: &DensityMatrix) -> remote_cnot::Result<DensityMatrix> {
    Ok(rho.clone())
}

#[test]
fn qpt_identity_channel() {
    let res = quantum_process_tomography(&identity_executor, &MeasurementConfig::analytic(), 0).unwrap();
    let chi = res.projected.matrix();
    assert!((chi[(0, 0)].re - 1.0).abs() < 1e-10);
    assert!(frobenius(&(chi - CMatrix::from_fn(16, 16, |i, j| re((i == 0 && j == 0) as u8 as f64)))) < 1e-10);
    assert!(!res.suspicious);
    assert!(frobenius(&(&res.raw - chi)) < 1e-10);
}

#[test]
fn qpt_ideal_cnot() {
    let u = cnot();
    let exec = |rho: &DensityMatrix| rho.conjugate(&u);
    let res = quantum_process_tomography(&exec, &MeasurementConfig::analytic(), 0).unwrap();
    let f = process_fidelity(&res.projected, &ProcessMatrix::from_unitary(&u).unwrap()).unwrap();
    assert!((f - 1.0).abs() < 1e-10, "{f}");
}

#[test]
fn qpt_depolarized_cnot() {
    let u = cnot();
    let p = 0.0133;
    let channel = ProcessMatrix::depolarized(&u, p).unwrap();
    let exec = |rho: &DensityMatrix| DensityMatrix::repaired(channel.apply(rho.matrix())?, HilbertSpec::qubits(2));
    let ideal = ProcessMatrix::from_unitary(&u).unwrap();
    let expected = (1.0 - p) + p / 16.0;
    let analytic = quantum_process_tomography(&exec, &MeasurementConfig::analytic(), 0).unwrap();
    let f = process_fidelity(&analytic.projected, &ideal).unwrap();
    assert!((f - expected).abs() < 1e-9, "{f}");
    // 1e-3 needs more than 1e4 shots per setting once the PSD projection bias is counted
    let sampled = quantum_process_tomography(&exec, &MeasurementConfig::shots(1_000_000), 11).unwrap();
    let f = process_fidelity(&sampled.projected, &ideal).unwrap();
    assert!((f - expected).abs() < 1e-3, "{f} vs {expected}");
}

#[test]
fn qpt_raw_approaches_projected_with_shots() {
    let u = cnot();
    let exec = |rho: &DensityMatrix| rho.conjugate(&u);
    let dist = |shots: u64| {
        let r = quantum_process_tomography(&exec, &MeasurementConfig::shots(shots), 2).unwrap();
        frobenius(&(&r.raw - r.projected.matrix()))
    };
    let (coarse, fine) = (dist(1_000), dist(100_000));
    assert!(fine < coarse, "{fine} vs {coarse}");
    assert!(fine < 0.05);
}

#[test]
fn state_tomography_of_bell_state() {
    let h = re(FRAC_1_SQRT_2);
    let ket = CVector::from_column_slice(&[h, re(0.0), re(0.0), h]);
    let bell = DensityMatrix::from_pure(&ket, HilbertSpec::qubits(2)).unwrap();
    let st = state_tomography(&bell, &MeasurementConfig::analytic(), 0).unwrap();
    assert!(frobenius(&(st.state.matrix() - bell.matrix())) < 1e-10);
    let p = expected_frequencies(&bell, [Axis::X, Axis::X], None).unwrap();
    assert!((p[0] + p[3] - 1.0).abs() < 1e-12);
}

#[test]
fn chi_json_shape() {
    let v = chi_json(ProcessMatrix::from_unitary(&cnot()).unwrap().matrix());
    assert_eq!(v["real"].as_array().unwrap().len(), 16);
    assert_eq!(v["imag"][3].as_array().unwrap().len(), 16);
}
