//! Cable-coupled two-transmon device: Hamiltonians, rotating frame, dressed basis
//! and the effective cross-resonance coefficients.

pub mod dressed;
pub mod effective;
pub mod frame;
pub mod hamiltonian;
pub mod model;

pub use dressed::DressedBasis;
pub use effective::effective_pauli_coefficients;
pub use frame::{rotating_frame, FrameGenerator};
pub use hamiltonian::{build_system_hamiltonian, SystemOperators};
pub use model::{
    cable_mode_frequencies, CableMode, DeviceConfig, DeviceModel, DriveSettings, PauliCoefficients, Qubit,
    Transmon,
};
