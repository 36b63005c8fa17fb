//! Discrete-event simulation of proof-of-work Sybil defenses.
//!
//! The crate models ToGCom (entrance puzzles priced by a sliding join window
//! and a good-join-rate estimator, plus periodic purges), the comparison
//! defenses CCom, GMCom, SybilControl and REMP, and three heuristics layered
//! on ToGCom. Runs are deterministic for a given seed.

pub mod adversary;
pub mod analysis;
pub mod baselines;
pub mod churn;
pub mod config;
pub mod engine;
pub mod error;
pub mod experiments;
pub mod heuristics;
pub mod initialization;
pub mod togcom;

pub use adversary::{AdversaryConfig, Strategy};
pub use churn::{ChurnKind, ChurnTrace, TraceEvent};
pub use engine::{run, Defense, SimConfig, SimResult, Simulation};
pub use error::{Error, Result};
