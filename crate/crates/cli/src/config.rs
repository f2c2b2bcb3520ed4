use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use remote_cnot::calibration::{CalibrationOptions, CnotPulseParams};
use remote_cnot::device::{DeviceConfig, DeviceModel};
use remote_cnot::pulse::readout::{MeasurementConfig, ReadoutModel};
use remote_cnot::tomography::hamiltonian::default_time_grid;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use toml::{Table, Value};

use crate::CliError;

/// Environment variable consulted when no `--config` is given.
pub const CONFIG_ENV: &str = "REMOTE_CNOT_CONFIG";

const SECTIONS: [&str; 4] = ["output", "device", "pulse", "experiment"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub output: OutputConfig,
    pub device: DeviceConfig,
    pub pulse: PulseConfig,
    pub experiment: ExperimentConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: "results".into() }
    }
}

/// Starting point of the calibration, or a finished gate when `calibrated` is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PulseConfig {
    pub amplitude_mhz: f64,
    pub phase: f64,
    pub duration_ns: f64,
    pub ramp_ns: f64,
    pub drag_ns: f64,
    pub cancel_amplitude_mhz: f64,
    pub cancel_phase: f64,
    pub frame_change: f64,
    pub calibrated: bool,
}

impl Default for PulseConfig {
    fn default() -> Self {
        Self::from_params(&CnotPulseParams::default(), false)
    }
}

fn mhz(rate: f64) -> f64 {
    rate / TAU * 1e3
}

fn rad_per_ns(mhz: f64) -> f64 {
    TAU * mhz * 1e-3
}

impl PulseConfig {
    pub fn from_params(p: &CnotPulseParams, calibrated: bool) -> Self {
        Self {
            amplitude_mhz: mhz(p.amplitude),
            phase: p.phase,
            duration_ns: p.duration,
            ramp_ns: p.ramp,
            drag_ns: p.drag,
            cancel_amplitude_mhz: mhz(p.cancel_amplitude),
            cancel_phase: p.cancel_phase,
            frame_change: p.frame_change,
            calibrated,
        }
    }

    pub fn params(&self) -> CnotPulseParams {
        CnotPulseParams {
            amplitude: rad_per_ns(self.amplitude_mhz),
            phase: self.phase,
            duration: self.duration_ns,
            ramp: self.ramp_ns,
            drag: self.drag_ns,
            cancel_amplitude: rad_per_ns(self.cancel_amplitude_mhz),
            cancel_phase: self.cancel_phase,
            frame_change: self.frame_change,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GateChoice {
    /// Pulse-level CNOT from the device simulator.
    Device,
    /// Perfect CNOT, no device simulation.
    Ideal,
}

/// Shot counts of 0 mean exact expectation values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub gate: GateChoice,
    /// Two-qubit depolarizing probability added after every CNOT.
    pub depolarizing: f64,
    /// Duration of a single-qubit layer, for relaxation between CNOTs (ns).
    pub single_gate_ns: f64,
    pub sweep: SweepConfig,
    pub calibrate: CalibrateConfig,
    pub qpt: QptConfig,
    pub xeb: XebSection,
    pub bell: BellConfig,
    pub chsh: ChshConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            gate: GateChoice::Device,
            depolarizing: 0.0,
            single_gate_ns: 30.0,
            sweep: SweepConfig::default(),
            calibrate: CalibrateConfig::default(),
            qpt: QptConfig::default(),
            xeb: XebSection::default(),
            bell: BellConfig::default(),
            chsh: ChshConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub amplitudes_mhz: Vec<f64>,
    pub times_ns: Vec<f64>,
    pub shots: u64,
    /// Include T1/T2 in the tomography runs.
    pub noise: bool,
    /// CR phase of the sweep; calibrated from the pulse section when absent.
    pub phase: Option<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            amplitudes_mhz: (0..=12).map(|k| 5.0 * k as f64).collect(),
            times_ns: default_time_grid(),
            shots: 0,
            noise: false,
            phase: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CalibrateConfig {
    pub shots: u64,
    pub noise: bool,
    pub phase_points: usize,
    pub repetitions: Vec<usize>,
    pub final_passes: usize,
    pub refinement_rounds: usize,
    pub verify: bool,
}

impl Default for CalibrateConfig {
    fn default() -> Self {
        let d = CalibrationOptions::default();
        Self {
            shots: 0,
            noise: false,
            phase_points: d.phase_points,
            repetitions: d.repetitions,
            final_passes: d.final_passes,
            refinement_rounds: d.refinement_rounds,
            verify: d.verify,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QptConfig {
    pub shots: u64,
}

impl Default for QptConfig {
    fn default() -> Self {
        Self { shots: 2000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct XebSection {
    pub depths: Vec<usize>,
    pub circuits: usize,
    pub shots: u64,
    pub resamples: usize,
}

impl Default for XebSection {
    fn default() -> Self {
        let d = remote_cnot::benchmarking::XebConfig::default();
        Self {
            depths: d.depths,
            circuits: d.circuits,
            shots: 2000,
            resamples: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BellConfig {
    pub shots: u64,
}

impl Default for BellConfig {
    fn default() -> Self {
        Self { shots: 2000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChshConfig {
    /// Equally spaced angles over [0, 2π).
    pub angles: usize,
    pub shots: u64,
}

impl Default for ChshConfig {
    fn default() -> Self {
        Self { angles: 32, shots: 2000 }
    }
}

/// Exact or sampled measurement with the device's readout and preparation model.
pub fn measurement(model: &DeviceModel, shots: u64, correct: bool) -> MeasurementConfig {
    let base = if shots == 0 {
        MeasurementConfig::analytic()
    } else {
        MeasurementConfig::shots(shots)
    };
    base.with_readout(ReadoutModel::from_model(model), correct)
}

impl RunConfig {
    /// Defaults everywhere; only used as a template since the seed is mandatory.
    pub fn template(seed: u64) -> Self {
        Self {
            seed,
            output: OutputConfig::default(),
            device: DeviceConfig::default(),
            pulse: PulseConfig::default(),
            experiment: ExperimentConfig::default(),
        }
    }

    /// Read `path`, apply `key=value` overrides and validate.
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(vec![format!("cannot read {}: {e}", path.display())]))?;
        Self::parse(&text, overrides)
    }

    pub fn parse(text: &str, overrides: &[String]) -> Result<Self, CliError> {
        let mut table: Table = text
            .parse()
            .map_err(|e: toml::de::Error| CliError::Config(vec![e.to_string()]))?;
        let mut errors = Vec::new();
        for o in overrides {
            if let Err(e) = apply_override(&mut table, o) {
                errors.push(e);
            }
        }
        check_keys(&table, &schema(), "", &mut errors);
        if !table.contains_key("seed") {
            errors.push("missing key `seed`".into());
        }
        for s in SECTIONS {
            if !table.contains_key(s) {
                errors.push(format!("missing section [{s}]"));
            }
        }
        if !errors.is_empty() {
            return Err(CliError::Config(errors));
        }
        // section by section so that every type error is reported
        for (key, value) in &table {
            let r = match key.as_str() {
                "seed" => value.clone().try_into::<u64>().map(drop),
                "output" => value.clone().try_into::<OutputConfig>().map(drop),
                "device" => value.clone().try_into::<DeviceConfig>().map(drop),
                "pulse" => value.clone().try_into::<PulseConfig>().map(drop),
                _ => value.clone().try_into::<ExperimentConfig>().map(drop),
            };
            if let Err(e) = r {
                errors.push(format!("{key}: {}", e.to_string().trim()));
            }
        }
        if !errors.is_empty() {
            return Err(CliError::Config(errors));
        }
        let cfg: RunConfig = Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Config(vec![e.to_string()]))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let mut errors = Vec::new();
        if let Err(e) = self.device.to_model() {
            errors.extend(config_messages("device", e));
        }
        if let Err(e) = self.pulse.params().validate() {
            errors.extend(config_messages("pulse", e));
        }
        let x = &self.experiment;
        if !(0.0..=1.0).contains(&x.depolarizing) {
            errors.push("experiment.depolarizing must lie in [0, 1]".into());
        }
        if !(x.single_gate_ns >= 0.0 && x.single_gate_ns.is_finite()) {
            errors.push("experiment.single_gate_ns must be non-negative".into());
        }
        if x.sweep.amplitudes_mhz.is_empty() {
            errors.push("experiment.sweep.amplitudes_mhz is empty".into());
        }
        if x.sweep.times_ns.len() < 7 {
            errors.push("experiment.sweep.times_ns needs at least 7 points".into());
        }
        if x.calibrate.phase_points < 3 {
            errors.push("experiment.calibrate.phase_points must be at least 3".into());
        }
        if x.calibrate.repetitions.is_empty() || x.calibrate.repetitions.iter().any(|n| n % 2 == 0) {
            errors.push("experiment.calibrate.repetitions must be odd gate counts".into());
        }
        if x.xeb.depths.len() < 3 || x.xeb.depths.contains(&0) {
            errors.push("experiment.xeb.depths needs at least three positive depths".into());
        }
        if x.xeb.circuits == 0 {
            errors.push("experiment.xeb.circuits must be positive".into());
        }
        if x.xeb.resamples < 100 {
            errors.push("experiment.xeb.resamples must be at least 100".into());
        }
        if x.chsh.angles == 0 {
            errors.push("experiment.chsh.angles must be positive".into());
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(CliError::Config(errors))
        }
    }

    pub fn model(&self) -> remote_cnot::Result<DeviceModel> {
        self.device.to_model()
    }

    /// SHA-256 of the resolved configuration without the output section, keys sorted.
    pub fn hash(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(map) = v.as_object_mut() {
            map.remove("output");
        }
        let digest = Sha256::digest(v.to_string().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}

fn config_messages(section: &str, e: remote_cnot::Error) -> Vec<String> {
    match e {
        remote_cnot::Error::Config(list) => list.into_iter().map(|m| format!("{section}: {m}")).collect(),
        other => vec![format!("{section}: {other}")],
    }
}

/// Every key the config accepts, with optional fields filled in.
fn schema() -> Table {
    let mut t = RunConfig::template(0);
    for q in [&mut t.device.control, &mut t.device.target] {
        q.t1_ns = Some(1.0);
        q.t2_ns = Some(1.0);
    }
    t.device.cable.first_mode = Some(1);
    t.experiment.sweep.phase = Some(0.0);
    match Value::try_from(&t).expect("config serializes") {
        Value::Table(t) => t,
        _ => unreachable!("struct serializes to a table"),
    }
}

fn check_keys(table: &Table, schema: &Table, prefix: &str, errors: &mut Vec<String>) {
    for (k, v) in table {
        let path = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match schema.get(k) {
            None => errors.push(format!("unknown key `{path}`")),
            Some(Value::Table(s)) => match v {
                Value::Table(t) => check_keys(t, s, &path, errors),
                _ => errors.push(format!("`{path}` must be a table")),
            },
            Some(_) => {}
        }
    }
}

/// `a.b.c=value`; the value is read as a TOML literal, or as a bare string.
pub fn apply_override(table: &mut Table, spec: &str) -> Result<(), String> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| format!("override `{spec}` is not of the form key=value"))?;
    let keys: Vec<&str> = path.trim().split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(format!("override `{spec}` has an empty key"));
    }
    let raw = raw.trim();
    let value = match format!("v = {raw}").parse::<Table>() {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => Value::String(raw.to_string()),
    };
    let (last, parents) = keys.split_last().expect("non-empty path");
    let mut cur = table;
    for k in parents {
        let entry = cur.entry(k.to_string()).or_insert_with(|| Value::Table(Table::new()));
        cur = match entry {
            Value::Table(t) => t,
            _ => return Err(format!("override `{spec}`: `{k}` is not a table")),
        };
    }
    cur.insert(last.to_string(), value);
    Ok(())
}
