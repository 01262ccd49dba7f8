//! Pricing of perpetual convertible bonds when the holder may convert and the
//! issuer may call only at the arrival times of a Poisson process.
//!
//! * [`params`]: parameters, regimes, characteristic exponents, bounds.
//! * [`analytic`]: closed-form constrained and classical prices.
//! * [`boundary`]: the Case III conversion boundary and pasting checks.
//! * [`ode`]: finite-difference solution of the penalized ODE, used as an
//!   independent oracle for the closed forms.
//! * [`game`]: lattice backward induction and Monte Carlo play of the game.
//! * [`asymptotics`]: behaviour as the intensity grows, and the boundary table.

// `!(x > 0.0)` style guards are deliberate: they reject NaN too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod asymptotics;
pub mod boundary;
pub mod error;
pub mod format;
pub mod game;
pub mod ode;
pub mod params;

pub use analytic::{
    build_classical_solution, build_constrained_solution, price_classical, price_constrained,
    AnalyticSolution, ClassicalSolution,
};
pub use asymptotics::{
    boundary_sweep, rate_check_case1, rate_check_case2, reproduce_table1, RateReport, SweepRow,
    Table1,
};
pub use boundary::{
    boundary_residual, solve_conversion_boundary, verify_smooth_pasting, BoundaryRoot,
    PastingReport,
};
pub use error::{Error, Result};
pub use game::{
    lattice_value, martingale_diagnostic, optimal_strategy, saddle_check, simulate_value,
    LatticeConfig, Rule, SimulationReport, StrategyPair,
};
pub use ode::{compare_to_analytic, solve_penalized_ode, ErrorReport, GridSolution};
pub use params::{
    bounds, classify_regime, exponents, threshold_sbar, Exponents, ModelParams, RawParams, Regime,
};
