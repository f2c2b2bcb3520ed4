use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};

/// Largest drive amplitude accepted by the envelope builders (rad/ns, 2π·250 MHz).
pub const MAX_AMPLITUDE: f64 = TAU * 0.25;

/// Default sample period (ns).
pub const DEFAULT_DT: f64 = 0.5;

/// Sampled drive waveform. Sample `k` holds the value on `[k dt, (k+1) dt)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub dt: f64,
    pub i: Vec<f64>,
    pub q: Vec<f64>,
    /// Carrier (rad/ns).
    pub carrier: f64,
    pub phase: f64,
}

impl Envelope {
    pub fn new(dt: f64, i: Vec<f64>, q: Vec<f64>, carrier: f64, phase: f64) -> Result<Self> {
        if i.len() != q.len() {
            return Err(Error::input("I and Q sample counts differ"));
        }
        if !(dt > 0.0) {
            return Err(Error::input("sample period must be positive"));
        }
        if i.iter().chain(&q).any(|v| !v.is_finite() || v.abs() > MAX_AMPLITUDE) {
            return Err(Error::input("envelope sample is non-finite or exceeds the amplitude limit"));
        }
        Ok(Self { dt, i, q, carrier, phase })
    }

    pub fn len(&self) -> usize {
        self.i.len()
    }

    pub fn is_empty(&self) -> bool {
        self.i.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.dt * self.i.len() as f64
    }

    /// Midpoint-rule area of the in-phase quadrature.
    pub fn area(&self) -> f64 {
        self.i.iter().sum::<f64>() * self.dt
    }
}

pub(crate) fn sample_count(duration: f64, dt: f64) -> Result<usize> {
    let n = (duration / dt).round();
    if (n * dt - duration).abs() > 1e-9 * duration.max(1.0) {
        return Err(Error::input(format!(
            "duration {duration} ns is not a multiple of the sample period {dt} ns"
        )));
    }
    Ok(n as usize)
}

/// Central-difference derivative with zero padding outside the pulse.
pub fn derivative(samples: &[f64], dt: f64) -> Vec<f64> {
    let n = samples.len();
    (0..n)
        .map(|k| {
            let prev = if k == 0 { 0.0 } else { samples[k - 1] };
            let next = if k + 1 == n { 0.0 } else { samples[k + 1] };
            (next - prev) / (2.0 * dt)
        })
        .collect()
}

/// Flat-top pulse with raised-cosine ramps of length `ramp` and DRAG quadrature
/// `Q = drag · dI/dt`.
pub fn make_cr_envelope(
    amplitude: f64,
    phase: f64,
    duration: f64,
    ramp: f64,
    drag: f64,
    dt: f64,
    carrier: f64,
) -> Result<Envelope> {
    if !(ramp > 0.0) || duration < 2.0 * ramp - 1e-12 {
        return Err(Error::input(format!(
            "flat-top pulse needs duration >= 2 * ramp > 0 (duration {duration}, ramp {ramp})"
        )));
    }
    if !(amplitude.abs() <= MAX_AMPLITUDE) {
        return Err(Error::input(format!("amplitude {amplitude} exceeds the limit {MAX_AMPLITUDE}")));
    }
    let n = sample_count(duration, dt)?;
    let m = sample_count(ramp, dt)?;
    let shape = |k: usize| -> f64 {
        let t = (k as f64 + 0.5) * dt;
        if k < m {
            0.5 * (1.0 - (PI * t / ramp).cos())
        } else if k >= n - m {
            0.5 * (1.0 - (PI * (duration - t) / ramp).cos())
        } else {
            1.0
        }
    };
    let i: Vec<f64> = (0..n).map(|k| amplitude * shape(k)).collect();
    let q = if drag == 0.0 {
        vec![0.0; n]
    } else {
        derivative(&i, dt).into_iter().map(|d| drag * d).collect()
    };
    Envelope::new(dt, i, q, carrier, phase)
}

/// Full raised-cosine pulse, the native single-qubit rotation shape.
pub fn make_cosine_envelope(amplitude: f64, phase: f64, duration: f64, drag: f64, dt: f64, carrier: f64) -> Result<Envelope> {
    if !(amplitude.abs() <= MAX_AMPLITUDE) {
        return Err(Error::input(format!("amplitude {amplitude} exceeds the limit {MAX_AMPLITUDE}")));
    }
    let n = sample_count(duration, dt)?;
    if n == 0 {
        return Err(Error::input("pulse duration must be positive"));
    }
    let i: Vec<f64> = (0..n)
        .map(|k| {
            let t = (k as f64 + 0.5) * dt;
            amplitude * 0.5 * (1.0 - (TAU * t / duration).cos())
        })
        .collect();
    let q = if drag == 0.0 {
        vec![0.0; n]
    } else {
        derivative(&i, dt).into_iter().map(|d| drag * d).collect()
    };
    Envelope::new(dt, i, q, carrier, phase)
}
