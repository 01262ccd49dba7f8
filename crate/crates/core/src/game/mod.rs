//! The constrained game played out directly: lattice backward induction,
//! Monte Carlo under given strategies, and equilibrium diagnostics.

pub mod diagnostics;
pub mod lattice;
pub mod montecarlo;
pub mod strategy;

pub use diagnostics::{martingale_diagnostic, saddle_check, DriftReport, SaddleReport};
pub use lattice::{lattice_value, LatticeConfig};
pub use montecarlo::{simulate_value, Outcome, SimulationReport};
pub use strategy::{optimal_strategy, Rule, StrategyPair};
