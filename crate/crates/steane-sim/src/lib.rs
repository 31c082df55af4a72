//! Monte-Carlo stabilizer simulation of Steane-type and flag-based quantum
//! error correction.
//!
//! The crate simulates repetition codes (distances 3 and 5, bit-flip and
//! phase-flip) and the seven-qubit color code under an experimentally
//! informed Pauli noise model, and estimates logical fidelities over many
//! rounds of syndrome extraction.
//!
//! Module map:
//! - [`pauli`]: symplectic Pauli operators.
//! - [`codes`]: stabilizer codes, syndromes, lookup-table decoders.
//! - [`circuit`]: timed Clifford circuit IR with classical feed-forward.
//! - [`builders`]: circuit builders for encoding, GHZ auxiliaries, Steane
//!   and flag syndrome-extraction cycles, and whole experiments.
//! - [`noise`]: the effective noise model and per-instruction fault samplers.
//! - [`engine`]: per-shot tableau simulation and deterministic parallel
//!   Monte-Carlo sampling.
//! - [`protocol`]: syndrome reconstruction, flag resolution, Pauli-frame
//!   tracking and logical evaluation, plus the exhaustive single-fault
//!   tolerance checker.
//! - [`stats`]: fidelity estimates with Wilson score intervals.
//! - [`experiment`]: experiment configs, figure presets, runners and
//!   result emission.

pub mod builders;
pub mod circuit;
pub mod codes;
pub mod engine;
pub mod experiment;
pub mod noise;
pub mod pauli;
pub mod protocol;
pub mod stats;

pub use circuit::{Circuit, Instruction, QubitRole, RecordId};
pub use codes::{DecodeTable, StabilizerCode, StabilizerFamily, Syndrome};
pub use engine::{run_many, run_shot, ShotOutcome};
pub use experiment::{ExperimentConfig, ExperimentResult};
pub use noise::NoiseModel;
pub use pauli::{Pauli, PauliString};
