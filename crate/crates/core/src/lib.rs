//! A virtual machine for measurement-based quantum patterns and for
//! networks of agents that run distributed patterns over shared
//! entanglement and classical channels.
//!
//! Patterns are read from s-expressions ([`sexpr`], [`command`],
//! [`pattern`]), composed into larger patterns ([`compose`]) and executed on
//! a tangle-based state ([`state`], [`interp`]). Networks ([`network`]) add
//! agents, channels and a round-robin scheduler. [`library`] builds the
//! standard protocols and [`program`] loads definition files.

pub mod command;
pub mod compose;
pub mod interp;
pub mod library;
pub mod network;
pub mod pattern;
pub mod program;
pub mod sexpr;
pub mod state;

pub use command::{Command, QubitName, QubitRef, Signal};
pub use interp::{run_pattern, run_sequence, Branch, Mode, RunResult, RuntimeError};
pub use network::{compile_network, init_network, run_network, NetworkDef, NetworkError};
pub use pattern::{assemble, validate_pattern, Pattern};
pub use state::QuantumState;
