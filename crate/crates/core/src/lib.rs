//! Preferential attachment multigraphs and synchronous k-choice local
//! majority dynamics.
//!
//! The crate is split along the lines of the experiment it supports:
//!
//! * [`pa_graph`] grows `PA_t(m, δ)` multigraphs (loops and parallel edges
//!   kept) and reads/writes them as plain text.
//! * [`threshold`] holds the closed-form numerics: binomial majority tails,
//!   the critical bias `α*`, the tree envelope and the convergence schedule.
//! * [`dynamics`] runs the majority protocol (and the voter baseline) on a
//!   graph.
//! * [`structure`] computes ball, truncated-ball and core statistics.
//! * [`harness`] sweeps parameter grids with reproducible per-trial seeds.
//!
//! All randomness flows from explicit `u64` seeds through ChaCha8, so every
//! result is reproducible bit for bit.

pub mod dynamics;
pub mod error;
pub mod harness;
pub mod pa_graph;
pub mod stats;
pub mod structure;
pub mod threshold;

pub use error::{Error, Result};
pub use pa_graph::{PaGraph, PaParams};
