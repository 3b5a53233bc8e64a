//! Robust control-pulse synthesis and validation for exchange-coupled spin
//! qubits.

pub mod errgeo;
pub mod experiments;
pub mod error;
pub mod linalg;
pub mod model;
pub mod noise;
pub mod optimize;
pub mod propagate;
pub mod pulse;
pub mod statevector;

pub use error::{Error, Result};
pub use linalg::{Operator, Pauli, PauliString, C64};
pub use model::{CrosstalkReport, LatticeModel, TwoQubitModel};
pub use propagate::{gate_fidelity, Hamiltonian, TimeGrid, Trajectory};
pub use pulse::{CosinePulse, Gate, PulseLibraryEntry, PulseParams, Waveform};
