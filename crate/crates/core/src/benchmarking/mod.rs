//! Interleaved XEB, Bell-state tomography and the CHSH scan on a gate-level executor.

pub mod bell;
pub mod gates;
pub mod xeb;

pub use bell::{chsh_scan, phi_plus, prepare_bell, prepare_bell_and_tomography, BellTomography, ChshPoint, ChshResult};
pub use gates::{cnot_unitary, rz, xeb_gate, GateSet};
pub use xeb::{
    bootstrap_stderr, cnot_fidelity_from_xeb, fit_decay, interleaved_xeb, linear_xeb, run_circuit, run_xeb,
    sample_xeb_circuit, xeb_fidelity, CnotXeb, DecayFit, InterleavedXeb, XebCircuit, XebConfig, XebDepth, XebResult,
};
