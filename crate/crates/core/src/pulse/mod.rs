//! Drive envelopes, pulse schedules, pulse-level simulation and measurement sampling.

pub mod envelope;
pub mod readout;
pub mod rng;
pub mod schedule;
pub mod simulate;

pub use envelope::{make_cosine_envelope, make_cr_envelope, Envelope, DEFAULT_DT, MAX_AMPLITUDE};
pub use readout::{
    apply_readout_correction, born_probabilities, correlators, measure, sample_measurement, Axis, Corrected, Measured,
    MeasurementConfig, ReadoutModel, ShotRecord, Shots,
};
pub use schedule::{Carrier, Channel, Entry, PulseSchedule, Shape};
pub use simulate::{simulate_schedule, Diagnostics, Outcome, Simulator};
