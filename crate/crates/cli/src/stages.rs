use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use remote_cnot::benchmarking::{
    chsh_scan, cnot_unitary, interleaved_xeb, prepare_bell, prepare_bell_and_tomography, GateSet, XebConfig,
};
use remote_cnot::calibration::{calibrate_cnot, calibrate_cr_phase, CalibrationOptions, CnotPulseParams, DeviceBackend};
use remote_cnot::device::DeviceModel;
use remote_cnot::pulse::rng::derive_seed;
use remote_cnot::pulse::Simulator;
use remote_cnot::quantum::{process_fidelity, DensityMatrix, ProcessMatrix, PAULI_LABELS};
use remote_cnot::tomography::state::chi_json;
use remote_cnot::tomography::{cr_parameter_sweep, quantum_process_tomography};
use remote_cnot::Error;
use serde::Serialize;
use serde_json::json;

use crate::config::{measurement, GateChoice, PulseConfig, RunConfig};
use crate::manifest::{now_ms, RunManifest, StageRecord, Status};
use crate::{plot, CliError};

/// Calibrated parameters, in the units of the `[pulse]` section.
pub const PARAMS_FILE: &str = "cnot_params.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, clap::Subcommand)]
pub enum Command {
    /// CR Pauli rates against drive amplitude
    Sweep,
    /// Staged CNOT calibration
    Calibrate,
    /// Process tomography of the calibrated CNOT
    Qpt,
    /// Interleaved cross-entropy benchmarking
    Xeb,
    /// Bell-state preparation and tomography
    Bell,
    /// CHSH correlation scan
    Chsh,
    /// Every stage in order, feeding calibrated parameters forward
    All,
}

impl Command {
    pub const STAGES: [Command; 6] = [
        Command::Sweep,
        Command::Calibrate,
        Command::Qpt,
        Command::Xeb,
        Command::Bell,
        Command::Chsh,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Sweep => "sweep",
            Command::Calibrate => "calibrate",
            Command::Qpt => "qpt",
            Command::Xeb => "xeb",
            Command::Bell => "bell",
            Command::Chsh => "chsh",
            Command::All => "all",
        }
    }

    fn stages(self) -> Vec<Command> {
        match self {
            Command::All => Self::STAGES.to_vec(),
            c => vec![c],
        }
    }

    /// Seed path of the stage, the same whether run alone or inside `all`.
    fn seed_index(self) -> u64 {
        Self::STAGES.iter().position(|&c| c == self).map_or(0, |k| k as u64 + 1)
    }
}

/// Run `command` with `threads` workers (rayon's default when `None`). The manifest
/// is rewritten after every stage, so a failure leaves the finished outputs listed.
pub fn run(command: Command, cfg: &RunConfig, threads: Option<usize>) -> Result<RunManifest, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        if n == 0 {
            return Err(CliError::Config(vec!["threads must be positive".into()]));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::Config(vec![format!("cannot start worker pool: {e}")]))?;
    pool.install(|| run_in_pool(command, cfg))
}

fn run_in_pool(command: Command, cfg: &RunConfig) -> Result<RunManifest, CliError> {
    let dir = cfg.output.dir.clone();
    std::fs::create_dir_all(&dir).map_err(|source| CliError::Io {
        path: dir.clone(),
        source,
    })?;
    let model = cfg.model().map_err(|e| CliError::Config(vec![e.to_string()]))?;
    let mut manifest = RunManifest::new(command.name(), cfg.hash(), cfg.seed);
    manifest.write(&dir)?;
    let mut ctx = Context {
        cfg,
        model,
        dir: dir.clone(),
        params: None,
        gates: None,
    };
    for stage in command.stages() {
        let mut record = StageRecord {
            name: stage.name().into(),
            status: Status::Running,
            outputs: Vec::new(),
            summary: None,
            error: None,
            started_unix_ms: now_ms(),
            finished_unix_ms: None,
        };
        let result = ctx.run_stage(stage, &mut record.outputs);
        record.finished_unix_ms = Some(now_ms());
        let failure = match result {
            Ok(summary) => {
                record.status = Status::Success;
                record.summary = Some(summary);
                None
            }
            Err(source) => {
                record.status = Status::Failed;
                record.error = Some(source.to_string());
                Some(source)
            }
        };
        manifest.stages.push(record);
        if let Some(source) = failure {
            manifest.status = Status::Failed;
            manifest.finished_unix_ms = Some(now_ms());
            manifest.write(&dir)?;
            return Err(CliError::Stage {
                stage: stage.name().into(),
                source,
            });
        }
        manifest.write(&dir)?;
    }
    manifest.status = Status::Success;
    manifest.finished_unix_ms = Some(now_ms());
    manifest.write(&dir)?;
    Ok(manifest)
}

struct Context<'a> {
    cfg: &'a RunConfig,
    model: DeviceModel,
    dir: PathBuf,
    params: Option<CnotPulseParams>,
    gates: Option<GateSet>,
}

fn write_file(dir: &Path, outputs: &mut Vec<String>, name: &str, contents: &str) -> remote_cnot::Result<()> {
    std::fs::write(dir.join(name), contents)?;
    outputs.push(name.into());
    Ok(())
}

fn write_json(dir: &Path, outputs: &mut Vec<String>, name: &str, value: &impl Serialize) -> remote_cnot::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_file(dir, outputs, name, &text)
}

fn missing_params() -> Error {
    Error::InvalidInput(format!(
        "no calibrated CNOT parameters: run `calibrate` first, or set pulse.calibrated = true, or provide {PARAMS_FILE}"
    ))
}

impl Context<'_> {
    fn seed(&self, stage: Command) -> u64 {
        derive_seed(self.cfg.seed, &[stage.seed_index()])
    }

    fn calibration_options(&self, seed: u64) -> CalibrationOptions {
        let c = &self.cfg.experiment.calibrate;
        CalibrationOptions {
            measurement: measurement(&self.model, c.shots, true),
            seed,
            phase_points: c.phase_points,
            repetitions: c.repetitions.clone(),
            final_passes: c.final_passes,
            refinement_rounds: c.refinement_rounds,
            verify: c.verify,
            ..CalibrationOptions::default()
        }
    }

    /// Device used by the sweep and the calibration, with or without T1/T2.
    fn simulator(&self, noise: bool) -> remote_cnot::Result<Simulator> {
        if noise {
            Simulator::new(&self.model)
        } else {
            Simulator::new(&self.model.without_decoherence())
        }
    }

    /// This run's calibration, else a calibrated `[pulse]` section, else the params file.
    fn params(&mut self) -> remote_cnot::Result<CnotPulseParams> {
        if let Some(p) = self.params {
            return Ok(p);
        }
        let p = if self.cfg.pulse.calibrated {
            self.cfg.pulse.params()
        } else {
            let path = self.dir.join(PARAMS_FILE);
            if !path.exists() {
                return Err(missing_params());
            }
            let pulse: PulseConfig = serde_json::from_str(&std::fs::read_to_string(path)?)?;
            pulse.params()
        };
        p.validate()?;
        self.params = Some(p);
        Ok(p)
    }

    fn gates(&mut self) -> remote_cnot::Result<&GateSet> {
        if self.gates.is_none() {
            let x = &self.cfg.experiment;
            let mut g = match x.gate {
                GateChoice::Ideal => GateSet::ideal(),
                GateChoice::Device => {
                    let params = self.params()?;
                    let sim = Simulator::new(&self.model)?;
                    GateSet::from_device(&sim, &params, self.model.has_noise(), x.single_gate_ns)?
                }
            };
            if x.depolarizing > 0.0 {
                g = g.with_depolarizing(x.depolarizing)?;
            }
            self.gates = Some(g);
        }
        Ok(self.gates.as_ref().expect("set above"))
    }

    fn run_stage(&mut self, stage: Command, out: &mut Vec<String>) -> remote_cnot::Result<String> {
        let seed = self.seed(stage);
        match stage {
            Command::Sweep => self.sweep(seed, out),
            Command::Calibrate => self.calibrate(seed, out),
            Command::Qpt => self.qpt(seed, out),
            Command::Xeb => self.xeb(seed, out),
            Command::Bell => self.bell(seed, out),
            Command::Chsh => self.chsh(seed, out),
            Command::All => unreachable!("expanded into stages"),
        }
    }

    fn sweep(&mut self, seed: u64, out: &mut Vec<String>) -> remote_cnot::Result<String> {
        let s = &self.cfg.experiment.sweep;
        let sim = self.simulator(s.noise)?;
        let cfg = measurement(&self.model, s.shots, true);
        let phase = match s.phase {
            Some(p) => p,
            None => {
                let opts = CalibrationOptions {
                    measurement: cfg.clone(),
                    ..self.calibration_options(derive_seed(seed, &[0]))
                };
                let backend = DeviceBackend { sim: &sim, noise: s.noise };
                calibrate_cr_phase(&backend, &self.cfg.pulse.params(), &opts)?.phase
            }
        };
        let amplitudes: Vec<f64> = s.amplitudes_mhz.iter().map(|a| TAU * a * 1e-3).collect();
        let result = cr_parameter_sweep(&sim, &amplitudes, phase, &s.times_ns, &cfg, derive_seed(seed, &[1]), None)?;
        write_json(&self.dir, out, "sweep.json", &result)?;
        write_file(&self.dir, out, "fig2_cr_parameters.csv", &plot::cr_parameters(&result))?;
        let failed = result.rows.iter().filter(|r| r.fit.is_none()).count();
        Ok(format!("{} amplitudes at phase {phase:.4} rad, {failed} failed fits", result.rows.len()))
    }

    fn calibrate(&mut self, seed: u64, out: &mut Vec<String>) -> remote_cnot::Result<String> {
        let c = &self.cfg.experiment.calibrate;
        let sim = self.simulator(c.noise)?;
        let backend = DeviceBackend { sim: &sim, noise: c.noise };
        let outcome = calibrate_cnot(&backend, &self.cfg.pulse.params(), &self.calibration_options(seed))?;
        let pulse = PulseConfig::from_params(&outcome.params, true);
        write_json(&self.dir, out, PARAMS_FILE, &pulse)?;
        write_json(&self.dir, out, "calibration.json", &outcome)?;
        // later stages read the same rounded values a separate run would load
        self.params = Some(pulse.params());
        self.gates = None;
        Ok(match outcome.process_fidelity {
            Some(f) => format!("process fidelity {f:.5}"),
            None => "parameters written".into(),
        })
    }

    fn qpt(&mut self, seed: u64, out: &mut Vec<String>) -> remote_cnot::Result<String> {
        let cfg = measurement(&self.model, self.cfg.experiment.qpt.shots, true);
        let gates = self.gates()?;
        let exec = |rho: &DensityMatrix| gates.apply_cnot(rho);
        let qpt = quantum_process_tomography(&exec, &cfg, seed)?;
        let ideal = ProcessMatrix::from_unitary(&cnot_unitary())?;
        let fp = process_fidelity(&qpt.projected, &ideal)?;
        let favg = (4.0 * fp + 1.0) / 5.0;
        // unbiased under shot noise, unlike the projected value
        let fp_raw = (&qpt.raw * ideal.matrix()).trace().re;
        let summary = json!({
            "process_fidelity": fp,
            "process_fidelity_unprojected": fp_raw,
            "average_gate_fidelity": favg,
            "min_eigenvalue": qpt.min_eigenvalue,
            "suspicious": qpt.suspicious,
            "labels": PAULI_LABELS,
            "chi": chi_json(qpt.projected.matrix()),
            "chi_raw": chi_json(&qpt.raw),
        });
        write_json(&self.dir, out, "qpt.json", &summary)?;
        write_file(&self.dir, out, "fig3a_qpt_chi.csv", &plot::chi_elements(qpt.projected.matrix()))?;
        Ok(format!("process fidelity {fp:.5} (unprojected {fp_raw:.5}), average gate fidelity {favg:.5}"))
    }

    fn xeb(&mut self, seed: u64, out: &mut Vec<String>) -> remote_cnot::Result<String> {
        let x = &self.cfg.experiment.xeb;
        let cfg = XebConfig {
            depths: x.depths.clone(),
            circuits: x.circuits,
            measurement: measurement(&self.model, x.shots, false),
            seed,
        };
        let resamples = x.resamples;
        let r = interleaved_xeb(self.gates()?, &cfg, resamples)?;
        let summary = json!({
            "p_ref": r.reference.fit.p,
            "p_ref_stderr": r.reference.fit.p_stderr,
            "p_int": r.interleaved.fit.p,
            "p_int_stderr": r.interleaved.fit.p_stderr,
            "ratio": r.cnot.ratio,
            "f_cnot": r.cnot.fidelity,
            "stderr": r.stderr,
            "physical": r.cnot.physical,
            "resamples": r.resamples,
            "seed": r.seed,
        });
        write_json(&self.dir, out, "xeb_summary.json", &summary)?;
        write_file(&self.dir, out, "xeb_circuits.csv", &plot::xeb_circuits(&r))?;
        write_file(&self.dir, out, "fig3b_xeb.csv", &plot::xeb_decay(&r))?;
        Ok(format!("F_CNOT {:.5} ± {:.5}", r.cnot.fidelity, r.stderr))
    }

    fn bell(&mut self, seed: u64, out: &mut Vec<String>) -> remote_cnot::Result<String> {
        let cfg = measurement(&self.model, self.cfg.experiment.bell.shots, true);
        let b = prepare_bell_and_tomography(self.gates()?, &cfg, seed)?;
        let rho = b.tomography.state.matrix();
        let summary = json!({
            "fidelity": b.fidelity,
            "density": chi_json(rho),
            "pauli_expectations": b.tomography.expectations,
            "labels": PAULI_LABELS,
        });
        write_json(&self.dir, out, "bell.json", &summary)?;
        write_file(&self.dir, out, "fig4a_bell_density.csv", &plot::density_elements(rho))?;
        Ok(format!("state fidelity {:.5}", b.fidelity))
    }

    fn chsh(&mut self, seed: u64, out: &mut Vec<String>) -> remote_cnot::Result<String> {
        let c = &self.cfg.experiment.chsh;
        let cfg = measurement(&self.model, c.shots, false);
        let angles: Vec<f64> = (0..c.angles).map(|k| TAU * k as f64 / c.angles as f64).collect();
        let state = prepare_bell(self.gates()?, &cfg)?;
        let r = chsh_scan(&state, &angles, &cfg, seed)?;
        write_json(&self.dir, out, "chsh.json", &r)?;
        write_file(&self.dir, out, "fig4b_chsh.csv", &plot::chsh_figure(&r))?;
        Ok(format!("max |S| raw {:.3}, corrected {:.3}", r.max_raw, r.max_corrected))
    }
}
