//! Hamiltonian tomography of the CR drive, the amplitude sweep, and two-qubit state
//! and process tomography.

pub mod hamiltonian;
pub mod state;
pub mod sweep;

pub use hamiltonian::{
    bloch_vector, cr_rabi_experiment, fit_hamiltonian_tomography, hamiltonian_tomography, BlochTrajectory, RabiSource,
    TomoFitResult,
};
pub use state::{quantum_process_tomography, state_tomography, QptResult, StateTomography};
pub use sweep::{cr_parameter_sweep, SweepResult, SweepRow};
