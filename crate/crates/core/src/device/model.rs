use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::quantum::space::{HilbertSpec, DEFAULT_DIMENSION_CAP};

/// One transmon. Frequencies are angular (rad/ns), times in ns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transmon {
    pub frequency: f64,
    pub anharmonicity: f64,
    pub t1: Option<f64>,
    pub t2: Option<f64>,
    /// `readout[i][j]` = P(report j | true i).
    pub readout: [[f64; 2]; 2],
    pub thermal_population: f64,
}

impl Transmon {
    pub fn ideal(frequency: f64, anharmonicity: f64) -> Self {
        Self {
            frequency,
            anharmonicity,
            t1: None,
            t2: None,
            readout: [[1.0, 0.0], [0.0, 1.0]],
            thermal_population: 0.0,
        }
    }

    fn validate(&self, name: &str, errors: &mut Vec<String>) {
        if !(self.frequency.is_finite() && self.frequency > 0.0) {
            errors.push(format!("{name}.frequency must be positive"));
        }
        if !self.anharmonicity.is_finite() {
            errors.push(format!("{name}.anharmonicity must be finite"));
        }
        for (k, v) in [("t1", self.t1), ("t2", self.t2)] {
            if let Some(v) = v {
                if !(v.is_finite() && v > 0.0) {
                    errors.push(format!("{name}.{k} must be positive"));
                }
            }
        }
        if let (Some(t1), Some(t2)) = (self.t1, self.t2) {
            if t2 > 2.0 * t1 * (1.0 + 1e-12) {
                errors.push(format!("{name}: T2 = {t2} exceeds 2*T1 = {}", 2.0 * t1));
            }
        }
        for (i, row) in self.readout.iter().enumerate() {
            if row.iter().any(|p| !(0.0..=1.0).contains(p)) || (row[0] + row[1] - 1.0).abs() > 1e-9 {
                errors.push(format!("{name}.readout row {i} is not a probability distribution"));
            }
        }
        if !(0.0..=0.1).contains(&self.thermal_population) {
            errors.push(format!("{name}.thermal_population must lie in [0, 0.1]"));
        }
    }

    /// Pure dephasing rate `1/T2 - 1/(2 T1)`, zero when T2 is absent.
    pub fn dephasing_rate(&self) -> f64 {
        match self.t2 {
            Some(t2) => {
                let relax = self.t1.map_or(0.0, |t1| 1.0 / (2.0 * t1));
                (1.0 / t2 - relax).max(0.0)
            }
            None => 0.0,
        }
    }

    pub fn has_noise(&self) -> bool {
        self.t1.is_some() || self.t2.is_some()
    }
}

/// A standing-wave mode of the interconnect cable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CableMode {
    pub index: u32,
    pub frequency: f64,
    pub g_control: f64,
    pub g_target: f64,
    pub alpha_control: f64,
    pub alpha_target: f64,
    pub truncation: usize,
}

impl CableMode {
    /// `(-1)^n`, the sign of the target coupling for the n-th half-wave mode.
    pub fn parity(&self) -> f64 {
        if self.index.is_multiple_of(2) {
            1.0
        } else {
            -1.0
        }
    }

    fn validate(&self, k: usize, errors: &mut Vec<String>) {
        if self.index == 0 {
            errors.push(format!("mode {k}: index must be positive"));
        }
        if !(self.frequency.is_finite() && self.frequency > 0.0) {
            errors.push(format!("mode {k}: frequency must be positive"));
        }
        if self.truncation < 2 {
            errors.push(format!("mode {k}: truncation must be at least 2"));
        }
        for (name, v) in [
            ("g_control", self.g_control),
            ("g_target", self.g_target),
            ("alpha_control", self.alpha_control),
            ("alpha_target", self.alpha_target),
        ] {
            if !v.is_finite() {
                errors.push(format!("mode {k}: {name} must be finite"));
            }
        }
    }
}

/// Frequencies `2π n v / (2L)` of `count` consecutive half-wave modes starting at `first`.
pub fn cable_mode_frequencies(length: f64, phase_velocity: f64, first: u32, count: usize) -> Result<Vec<f64>> {
    if !(length > 0.0 && length.is_finite()) {
        return Err(Error::input("cable length must be positive"));
    }
    if !(phase_velocity > 0.0 && phase_velocity.is_finite()) {
        return Err(Error::input("phase velocity must be positive"));
    }
    if first == 0 {
        return Err(Error::input("mode numbering starts at 1"));
    }
    let spacing = TAU * phase_velocity / (2.0 * length);
    Ok((0..count).map(|k| (first as f64 + k as f64) * spacing).collect())
}

/// Lowest mode number such that the top mode of a `count`-mode window is the
/// first one at or above `upper` (rad/ns).
pub fn bracketing_first_mode(length: f64, phase_velocity: f64, upper: f64, count: usize) -> u32 {
    let spacing = TAU * phase_velocity / (2.0 * length);
    let top = (upper / spacing).ceil().max(1.0) as i64;
    (top - count as i64 + 1).max(1) as u32
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceModel {
    pub control: Transmon,
    pub target: Transmon,
    pub modes: Vec<CableMode>,
    /// Levels kept per transmon (2 or 3).
    pub levels: usize,
    pub dimension_cap: usize,
}

impl DeviceModel {
    pub fn validate(&self) -> Result<()> {
        let mut errors = Vec::new();
        self.control.validate("control", &mut errors);
        self.target.validate("target", &mut errors);
        for (k, m) in self.modes.iter().enumerate() {
            m.validate(k, &mut errors);
        }
        if !(self.levels == 2 || self.levels == 3) {
            errors.push(format!("levels must be 2 or 3, got {}", self.levels));
        }
        if (self.control.frequency - self.target.frequency).abs() < 1e-9 {
            errors.push("control and target frequencies must differ".into());
        }
        if !errors.is_empty() {
            return Err(Error::Config(errors));
        }
        self.space().map(|_| ())
    }

    /// Transmons first (control, target), then cable modes in list order.
    pub fn space(&self) -> Result<HilbertSpec> {
        let mut dims = vec![self.levels, self.levels];
        dims.extend(self.modes.iter().map(|m| m.truncation));
        HilbertSpec::with_cap(dims, self.dimension_cap)
    }

    pub fn transmon(&self, q: Qubit) -> &Transmon {
        match q {
            Qubit::Control => &self.control,
            Qubit::Target => &self.target,
        }
    }

    pub fn has_noise(&self) -> bool {
        self.control.has_noise() || self.target.has_noise()
    }

    /// Copy with decoherence removed, readout and preparation left untouched.
    pub fn without_decoherence(&self) -> Self {
        let mut m = self.clone();
        for q in [&mut m.control, &mut m.target] {
            q.t1 = None;
            q.t2 = None;
        }
        m
    }

    /// A small two-mode device used across the tests and as the shipped default.
    pub fn default_device() -> Self {
        DeviceConfig::default().to_model().expect("default device is valid")
    }
}

impl Default for DeviceModel {
    fn default() -> Self {
        Self::default_device()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Qubit {
    Control,
    Target,
}

impl Qubit {
    pub fn subsystem(self) -> usize {
        match self {
            Qubit::Control => 0,
            Qubit::Target => 1,
        }
    }
}

/// Constant drive parameters for the cross-resonance configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriveSettings {
    pub control_amplitude: f64,
    pub control_phase: f64,
    pub target_amplitude: f64,
    pub target_phase: f64,
    /// Shared carrier, normally the dressed target frequency.
    pub frequency: f64,
    /// DRAG coefficient (ns); only acts on time-dependent envelopes.
    pub drag: f64,
}

impl DriveSettings {
    pub fn cross_resonance(model: &DeviceModel, amplitude: f64, phase: f64) -> Result<Self> {
        Ok(Self {
            control_amplitude: amplitude,
            control_phase: phase,
            target_amplitude: 0.0,
            target_phase: 0.0,
            frequency: super::dressed::DressedBasis::new(model)?.frequency(Qubit::Target),
            drag: 0.0,
        })
    }

    pub fn with_cancellation(mut self, amplitude: f64, phase: f64) -> Self {
        self.target_amplitude = amplitude;
        self.target_phase = phase;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let mut errors = Vec::new();
        if !(self.control_amplitude >= 0.0 && self.target_amplitude >= 0.0) {
            errors.push("drive amplitudes must be non-negative".to_string());
        }
        for (name, p) in [("control_phase", self.control_phase), ("target_phase", self.target_phase)] {
            if !p.is_finite() {
                errors.push(format!("{name} must be finite"));
            }
        }
        if !(self.frequency.is_finite() && self.frequency > 0.0) {
            errors.push("drive frequency must be positive".to_string());
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errors))
        }
    }
}

/// Wrap a phase into `[0, 2π)`.
pub fn wrap_phase(phi: f64) -> f64 {
    let w = phi.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// The six rates of `H = Σ ω_P P` over {IX, IY, IZ, ZX, ZY, ZZ}, in rad/ns.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PauliCoefficients {
    pub ix: f64,
    pub iy: f64,
    pub iz: f64,
    pub zx: f64,
    pub zy: f64,
    pub zz: f64,
}

impl PauliCoefficients {
    pub const LABELS: [&'static str; 6] = ["IX", "IY", "IZ", "ZX", "ZY", "ZZ"];

    pub fn from_array(v: [f64; 6]) -> Self {
        Self {
            ix: v[0],
            iy: v[1],
            iz: v[2],
            zx: v[3],
            zy: v[4],
            zz: v[5],
        }
    }

    pub fn to_array(&self) -> [f64; 6] {
        [self.ix, self.iy, self.iz, self.zx, self.zy, self.zz]
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    /// Values divided by 2π·1e-3, i.e. in MHz.
    pub fn to_mhz(&self) -> [f64; 6] {
        self.to_array().map(|v| v / TAU * 1e3)
    }

    pub fn hamiltonian(&self) -> crate::quantum::CMatrix {
        let mut h = crate::quantum::CMatrix::zeros(4, 4);
        for (label, w) in Self::LABELS.iter().zip(self.to_array()) {
            h += crate::quantum::pauli_embed(label).expect("valid label").matrix() * crate::quantum::linalg::re(w);
        }
        h
    }
}

/// Human-facing device description with frequencies in GHz (converted by `to_model`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DeviceConfig {
    pub levels: usize,
    pub dimension_cap: usize,
    pub control: TransmonConfig,
    pub target: TransmonConfig,
    pub cable: CableConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransmonConfig {
    pub frequency_ghz: f64,
    pub anharmonicity_ghz: f64,
    #[serde(default)]
    pub t1_ns: Option<f64>,
    #[serde(default)]
    pub t2_ns: Option<f64>,
    /// P(read 1 | prepared 0) and P(read 0 | prepared 1).
    #[serde(default)]
    pub readout_error: [f64; 2],
    #[serde(default)]
    pub thermal_population: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CableConfig {
    pub length_m: f64,
    pub phase_velocity_m_per_ns: f64,
    pub mode_count: usize,
    /// First mode number; when absent the window's top mode is the first above the upper qubit.
    pub first_mode: Option<u32>,
    pub g_control_ghz: f64,
    pub g_target_ghz: f64,
    pub alpha_control: f64,
    pub alpha_target: f64,
    pub truncation: usize,
}

impl Default for DeviceConfig {
    fn default() -> Self {
        Self {
            levels: 3,
            dimension_cap: DEFAULT_DIMENSION_CAP,
            control: TransmonConfig {
                frequency_ghz: 4.80,
                anharmonicity_ghz: -0.40,
                t1_ns: None,
                t2_ns: None,
                readout_error: [0.0, 0.0],
                thermal_population: 0.0,
            },
            target: TransmonConfig {
                frequency_ghz: 4.50,
                anharmonicity_ghz: -0.40,
                t1_ns: None,
                t2_ns: None,
                readout_error: [0.0, 0.0],
                thermal_population: 0.0,
            },
            cable: CableConfig::default(),
        }
    }
}

impl Default for CableConfig {
    fn default() -> Self {
        Self {
            length_m: 0.30,
            phase_velocity_m_per_ns: 0.20,
            mode_count: 2,
            first_mode: None,
            g_control_ghz: 0.030,
            g_target_ghz: 0.030,
            alpha_control: 0.01,
            alpha_target: 0.01,
            truncation: 2,
        }
    }
}

impl TransmonConfig {
    fn to_transmon(&self) -> Transmon {
        let [e0, e1] = self.readout_error;
        Transmon {
            frequency: TAU * self.frequency_ghz,
            anharmonicity: TAU * self.anharmonicity_ghz,
            t1: self.t1_ns,
            t2: self.t2_ns,
            readout: [[1.0 - e0, e0], [e1, 1.0 - e1]],
            thermal_population: self.thermal_population,
        }
    }
}

impl DeviceConfig {
    pub fn to_model(&self) -> Result<DeviceModel> {
        let c = &self.cable;
        let mut errors = Vec::new();
        for (name, e) in [("control", &self.control), ("target", &self.target)] {
            if e.readout_error.iter().any(|p| !(0.0..=1.0).contains(p)) {
                errors.push(format!("{name}.readout_error entries must lie in [0, 1]"));
            }
        }
        if !errors.is_empty() {
            return Err(Error::Config(errors));
        }
        let upper = TAU * self.control.frequency_ghz.max(self.target.frequency_ghz);
        let modes = if c.mode_count == 0 {
            Vec::new()
        } else {
            let first = c.first_mode.unwrap_or_else(|| {
                bracketing_first_mode(c.length_m, c.phase_velocity_m_per_ns, upper, c.mode_count)
            });
            cable_mode_frequencies(c.length_m, c.phase_velocity_m_per_ns, first, c.mode_count)
                .map_err(|e| Error::Config(vec![e.to_string()]))?
                .into_iter()
                .enumerate()
                .map(|(k, frequency)| CableMode {
                    index: first + k as u32,
                    frequency,
                    g_control: TAU * c.g_control_ghz,
                    g_target: TAU * c.g_target_ghz,
                    alpha_control: c.alpha_control,
                    alpha_target: c.alpha_target,
                    truncation: c.truncation,
                })
                .collect()
        };
        let model = DeviceModel {
            control: self.control.to_transmon(),
            target: self.target.to_transmon(),
            modes,
            levels: self.levels,
            dimension_cap: self.dimension_cap,
        };
        model.validate()?;
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_modes_bracket_control() {
        let m = DeviceModel::default_device();
        assert_eq!(m.modes.len(), 2);
        assert_eq!(m.modes[0].index, 14);
        assert!(m.modes[0].frequency < m.control.frequency);
        assert!(m.modes[1].frequency > m.control.frequency);
        assert_eq!(m.modes[1].parity(), -1.0);
        assert_eq!(m.space().unwrap().total(), 36);
    }

    #[test]
    fn validation_lists_every_problem() {
        let mut m = DeviceModel::default_device();
        m.target.frequency = m.control.frequency;
        m.control.t1 = Some(10.0);
        m.control.t2 = Some(30.0);
        m.target.readout = [[0.9, 0.2], [0.0, 1.0]];
        match m.validate() {
            Err(Error::Config(errs)) => assert_eq!(errs.len(), 3, "{errs:?}"),
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn zero_length_rejected() {
        assert!(cable_mode_frequencies(0.0, 0.2, 1, 3).is_err());
    }

    #[test]
    fn wrap_phase_range() {
        assert!((wrap_phase(-0.5) - (TAU - 0.5)).abs() < 1e-15);
        assert_eq!(wrap_phase(TAU), 0.0);
    }
}
