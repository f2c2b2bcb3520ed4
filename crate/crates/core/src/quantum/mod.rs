//! States, operators, propagation and fidelity measures on small tensor-product spaces.

pub mod evolve;
pub mod fidelity;
pub mod linalg;
pub mod operator;
pub mod pauli;
pub mod process;
pub mod space;
pub mod state;

pub use evolve::{evolve, evolve_matrix, propagator};
pub use fidelity::{process_fidelity, state_fidelity};
pub use linalg::{CMatrix, CVector, C64};
pub use operator::Operator;
pub use pauli::{pauli_embed, PAULI_LABELS};
pub use process::ProcessMatrix;
pub use space::HilbertSpec;
pub use state::DensityMatrix;
