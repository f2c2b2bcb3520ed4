use std::path::{Path, PathBuf};
use std::process::Command as Process;

use remote_cnot::calibration::CnotPulseParams;
use remote_cnot_cli::config::PulseConfig;
use remote_cnot_cli::{run, CliError, Command, GateChoice, RunConfig, RunManifest, Status};

fn config_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn binary() -> Process {
    Process::new(env!("CARGO_BIN_EXE_remote-cnot"))
}

/// Parameters from a noiseless calibration of the default device.
fn calibrated() -> CnotPulseParams {
    CnotPulseParams {
        amplitude: 0.2547222999865716,
        phase: 6.280527349807797,
        duration: 190.0,
        ramp: 30.0,
        drag: 3.110110735418396,
        cancel_amplitude: 0.0026458400215470692,
        cancel_phase: 3.1389347618846735,
        frame_change: 0.3938247320985285,
    }
}

fn small(name: &str, dir: &Path) -> RunConfig {
    let mut cfg = RunConfig::load(&config_path(name), &[]).unwrap();
    cfg.output.dir = dir.to_path_buf();
    cfg.pulse = PulseConfig::from_params(&calibrated(), true);
    let x = &mut cfg.experiment;
    x.sweep.amplitudes_mhz = vec![0.0, 20.0, 40.0];
    x.sweep.phase = Some(calibrated().phase);
    x.xeb.depths = vec![2, 5, 10];
    x.xeb.circuits = 4;
    x.xeb.resamples = 200;
    x.chsh.angles = 8;
    cfg
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

fn manifest(dir: &Path, command: &str) -> RunManifest {
    serde_json::from_str(&read(dir, &RunManifest::file_name(command))).unwrap()
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let out = binary().arg("teleport").output().unwrap();
    assert_eq!(out.status.code(), Some(remote_cnot_cli::EXIT_USAGE));
}

#[test]
fn config_errors_exit_with_their_own_status() {
    let out = binary().arg("xeb").env_remove("REMOTE_CNOT_CONFIG").output().unwrap();
    assert_eq!(out.status.code(), Some(remote_cnot_cli::EXIT_CONFIG));
    let out = binary()
        .args(["xeb", "--config"])
        .arg(config_path("ideal.toml"))
        .args(["--set", "experiment.xeb.shot=5", "--set", "device.colour=1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(remote_cnot_cli::EXIT_CONFIG));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("experiment.xeb.shot") && err.contains("device.colour"), "{err}");
}

#[test]
fn config_path_from_environment() {
    let out = binary()
        .args(["xeb", "--print-config"])
        .env("REMOTE_CNOT_CONFIG", config_path("paper-like.toml"))
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let cfg = RunConfig::parse(&text, &[]).unwrap();
    assert_eq!(cfg.device.control.t1_ns, Some(35_000.0));
}

#[test]
fn stage_failure_keeps_earlier_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small("ideal.toml", dir.path());
    cfg.pulse = PulseConfig::from_params(
        &CnotPulseParams {
            amplitude: 0.0,
            ..CnotPulseParams::default()
        },
        false,
    );
    cfg.experiment.calibrate.phase_points = 4;
    let err = run(Command::All, &cfg, None).unwrap_err();
    assert!(matches!(err, CliError::Stage { ref stage, .. } if stage == "calibrate"), "{err}");
    assert_eq!(err.exit_code(), remote_cnot_cli::EXIT_STAGE);
    let m = manifest(dir.path(), "all");
    assert_eq!(m.status, Status::Failed);
    assert_eq!(m.stages.len(), 2);
    assert_eq!(m.stages[0].status, Status::Success);
    assert_eq!(m.stages[1].status, Status::Failed);
    assert!(m.stages[1].error.is_some());
    for f in m.outputs() {
        assert!(dir.path().join(f).exists(), "{f}");
    }
}

#[test]
fn missing_parameters_fail_the_stage() {
    let dir = tempfile::tempdir().unwrap();
    let out = binary()
        .arg("qpt")
        .arg("--config")
        .arg(config_path("ideal.toml"))
        .arg("--set")
        .arg(format!("output.dir={:?}", dir.path().display().to_string()))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(remote_cnot_cli::EXIT_STAGE));
    assert_eq!(manifest(dir.path(), "qpt").status, Status::Failed);
}

#[test]
fn ideal_gate_xeb_scores_one() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small("paper-like.toml", dir.path());
    cfg.experiment.gate = GateChoice::Ideal;
    run(Command::Xeb, &cfg, None).unwrap();
    let s: serde_json::Value = serde_json::from_str(&read(dir.path(), "xeb_summary.json")).unwrap();
    let f = s["f_cnot"].as_f64().unwrap();
    let err = s["stderr"].as_f64().unwrap();
    assert!((f - 1.0).abs() < 4.0 * err.max(1e-3), "{f} ± {err}");
}

#[test]
fn figure_files_follow_their_column_contracts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small("ideal.toml", dir.path());
    for c in [Command::Sweep, Command::Qpt, Command::Xeb, Command::Bell, Command::Chsh] {
        let m = run(c, &cfg, None).unwrap();
        assert_eq!(m.status, Status::Success);
    }
    let fig2 = read(dir.path(), "fig2_cr_parameters.csv");
    assert!(fig2.lines().all(|l| l.split(',').count() == 7));
    assert_eq!(fig2.lines().count(), 4);

    let fig3b = read(dir.path(), "fig3b_xeb.csv");
    assert_eq!(fig3b.lines().next(), Some("series,depth,fidelity,fit"));
    for s in ["reference", "interleaved"] {
        assert_eq!(fig3b.lines().filter(|l| l.starts_with(s)).count(), 3);
    }
    let circuits = read(dir.path(), "xeb_circuits.csv");
    assert_eq!(circuits.lines().count(), 1 + 2 * 3 * 4);

    let fig4b = read(dir.path(), "fig4b_chsh.csv");
    assert!(fig4b.lines().any(|l| l.starts_with("classical_limit") && l.split(',').nth(2) == Some("2")));
    assert!(fig4b.lines().any(|l| l.starts_with("quantum_limit")));
    assert_eq!(fig4b.lines().filter(|l| l.starts_with("scan")).count(), 8);

    let qpt: serde_json::Value = serde_json::from_str(&read(dir.path(), "qpt.json")).unwrap();
    assert!(qpt["process_fidelity"].as_f64().unwrap() > 0.999);
    assert_eq!(read(dir.path(), "fig3a_qpt_chi.csv").lines().count(), 257);
    let bell: serde_json::Value = serde_json::from_str(&read(dir.path(), "bell.json")).unwrap();
    assert!(bell["fidelity"].as_f64().unwrap() > 0.999);
    assert_eq!(read(dir.path(), "fig4a_bell_density.csv").lines().count(), 17);
}

#[test]
fn outputs_do_not_depend_on_worker_count() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for (dir, threads) in [(&a, 1), (&b, 3)] {
        let cfg = small("paper-like.toml", dir.path());
        run(Command::Xeb, &cfg, Some(threads)).unwrap();
        run(Command::Chsh, &cfg, Some(threads)).unwrap();
    }
    for f in ["xeb_summary.json", "xeb_circuits.csv", "fig3b_xeb.csv", "fig4b_chsh.csv", "chsh.json"] {
        assert_eq!(read(a.path(), f), read(b.path(), f), "{f}");
    }
    assert_eq!(manifest(a.path(), "xeb").config_hash, manifest(b.path(), "xeb").config_hash);
}
