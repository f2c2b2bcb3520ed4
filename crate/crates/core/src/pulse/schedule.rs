use serde::{Deserialize, Serialize};

use super::envelope::{make_cosine_envelope, make_cr_envelope, sample_count, Envelope, DEFAULT_DT};
use crate::device::Qubit;
use crate::error::{Error, Result};

/// Drive line. Frame changes on a channel rotate that qubit's frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Channel {
    ControlDrive,
    TargetDrive,
}

impl Channel {
    pub fn qubit(self) -> Qubit {
        match self {
            Channel::ControlDrive => Qubit::Control,
            Channel::TargetDrive => Qubit::Target,
        }
    }
}

/// Carrier of a pulse, resolved against the device at simulation time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Carrier {
    /// Dressed 0-1 frequency of the control qubit.
    Control,
    /// Dressed 0-1 frequency of the target qubit (the CR carrier).
    Target,
    /// Explicit angular frequency (rad/ns).
    Fixed { frequency: f64 },
}

/// Named pulse shapes. Amplitudes are rad/ns, times ns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "kebab-case")]
pub enum Shape {
    FlatTop {
        amplitude: f64,
        phase: f64,
        duration: f64,
        ramp: f64,
        drag: f64,
        carrier: Carrier,
    },
    Cosine {
        amplitude: f64,
        phase: f64,
        duration: f64,
        drag: f64,
        carrier: Carrier,
    },
}

impl Shape {
    pub fn duration(&self) -> f64 {
        match self {
            Shape::FlatTop { duration, .. } | Shape::Cosine { duration, .. } => *duration,
        }
    }

    pub fn carrier(&self) -> Carrier {
        match self {
            Shape::FlatTop { carrier, .. } | Shape::Cosine { carrier, .. } => *carrier,
        }
    }

    /// Sample the shape with the carrier already resolved to `carrier` (rad/ns).
    pub fn sample(&self, dt: f64, carrier: f64) -> Result<Envelope> {
        match *self {
            Shape::FlatTop {
                amplitude,
                phase,
                duration,
                ramp,
                drag,
                ..
            } => make_cr_envelope(amplitude, phase, duration, ramp, drag, dt, carrier),
            Shape::Cosine {
                amplitude,
                phase,
                duration,
                drag,
                ..
            } => make_cosine_envelope(amplitude, phase, duration, drag, dt, carrier),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "entry", rename_all = "kebab-case")]
pub enum Entry {
    Pulse { channel: Channel, start: f64, pulse: Shape },
    /// Virtual Z: rotates the qubit frame by `phase` at `time`, taking no time.
    FrameChange { channel: Channel, time: f64, phase: f64 },
}

impl Entry {
    fn end(&self) -> f64 {
        match self {
            Entry::Pulse { start, pulse, .. } => start + pulse.duration(),
            Entry::FrameChange { time, .. } => *time,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseSchedule {
    pub dt: f64,
    pub entries: Vec<Entry>,
}

impl Default for PulseSchedule {
    fn default() -> Self {
        Self::new(DEFAULT_DT)
    }
}

impl PulseSchedule {
    pub fn new(dt: f64) -> Self {
        Self { dt, entries: Vec::new() }
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.entries.iter().map(Entry::end).fold(0.0, f64::max)
    }

    pub fn pulse(&mut self, channel: Channel, start: f64, pulse: Shape) -> &mut Self {
        self.entries.push(Entry::Pulse { channel, start, pulse });
        self
    }

    pub fn frame_change(&mut self, channel: Channel, time: f64, phase: f64) -> &mut Self {
        self.entries.push(Entry::FrameChange { channel, time, phase });
        self
    }

    /// Append `other` so that it starts when this schedule ends.
    pub fn then(&mut self, other: &PulseSchedule) -> Result<&mut Self> {
        if (other.dt - self.dt).abs() > 1e-12 {
            return Err(Error::input("cannot join schedules with different sample periods"));
        }
        let offset = self.duration();
        for e in &other.entries {
            self.entries.push(match e.clone() {
                Entry::Pulse { channel, start, pulse } => Entry::Pulse {
                    channel,
                    start: start + offset,
                    pulse,
                },
                Entry::FrameChange { channel, time, phase } => Entry::FrameChange {
                    channel,
                    time: time + offset,
                    phase,
                },
            });
        }
        Ok(self)
    }

    /// `other` repeated `n` times back to back.
    pub fn repeated(other: &PulseSchedule, n: usize) -> Result<Self> {
        let mut s = Self::new(other.dt);
        for _ in 0..n {
            s.then(other)?;
        }
        Ok(s)
    }

    /// Checks grid alignment, finiteness, and that pulses on one channel do not overlap.
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::input("sample period must be positive"));
        }
        let mut spans: Vec<(Channel, f64, f64)> = Vec::new();
        for (k, e) in self.entries.iter().enumerate() {
            match e {
                Entry::Pulse { channel, start, pulse } => {
                    if !(start.is_finite() && *start >= 0.0) {
                        return Err(Error::input(format!("entry {k}: start must be non-negative")));
                    }
                    sample_count(*start, self.dt)?;
                    let d = pulse.duration();
                    if !(d > 0.0 && d.is_finite()) {
                        return Err(Error::input(format!("entry {k}: pulse duration must be positive")));
                    }
                    spans.push((*channel, *start, start + d));
                }
                Entry::FrameChange { time, phase, .. } => {
                    if !(time.is_finite() && *time >= 0.0 && phase.is_finite()) {
                        return Err(Error::input(format!("entry {k}: frame change must have finite time and phase")));
                    }
                    sample_count(*time, self.dt)?;
                }
            }
        }
        for (i, a) in spans.iter().enumerate() {
            for b in &spans[i + 1..] {
                if a.0 == b.0 && a.1 < b.2 - 1e-9 && b.1 < a.2 - 1e-9 {
                    return Err(Error::input(format!(
                        "pulses on {:?} overlap ([{}, {}] and [{}, {}])",
                        a.0, a.1, a.2, b.1, b.2
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: Self = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }
}
