//! Compile quantum channels given as Kraus operators into circuits.
//!
//! A channel `ρ ↦ Σ M_k ρ M_k†` is turned into either one Stinespring
//! isometry, or one dilated unitary per (grouped) Kraus operator whose
//! outputs are combined by a CSWAP mixer and post-selected on the dilation
//! ancilla. The crate also costs those circuits analytically and checks
//! them with a density-matrix simulator.

pub mod channel;
pub mod circuit;
pub mod cli;
pub mod costmodel;
pub mod dilation;
pub mod formats;
pub mod linalg;
pub mod simulator;
pub mod state;

pub use channel::{apply_channel, validate_cptp, KrausSet};
pub use circuit::{assemble_simulation_circuit, Circuit, Gate, GateKind, MixMode};
pub use dilation::DilationMethod;
pub use linalg::{CMatrix, C64};
pub use state::DensityMatrix;
