use std::fmt;

use serde::{Deserialize, Serialize};

use crate::boundary::solve_conversion_boundary;
use crate::error::{Error, Result};
use crate::params::{classify_regime, threshold_sbar, ModelParams, Regime};

/// Stopping rule for one player, consulted only at Poisson arrivals.
///
/// Every rule fires at `T_M`, the first arrival after the spot has reached
/// `s_bar`, so the game always ends there at the latest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", content = "level")]
pub enum Rule {
    StopAtFirstArrival,
    StopAtTM,
    /// Fires at the first arrival with spot at or above the level.
    ThresholdConvert(f64),
    /// Never stops before `T_M`.
    NeverBeforeTM,
}

impl Rule {
    /// Whether the rule stops at arrival `index` (`index >= 1`). Index 0 is
    /// the start of the game, where nobody may stop.
    pub fn fires(&self, index: u64, spot: f64, at_tm: bool) -> bool {
        if index == 0 {
            return false;
        }
        match *self {
            Rule::StopAtFirstArrival => true,
            Rule::StopAtTM | Rule::NeverBeforeTM => at_tm,
            Rule::ThresholdConvert(x) => at_tm || spot >= x,
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rule::StopAtFirstArrival => write!(f, "stop-at-first-arrival"),
            Rule::StopAtTM => write!(f, "stop-at-tm"),
            Rule::ThresholdConvert(x) => write!(f, "threshold-convert({x})"),
            Rule::NeverBeforeTM => write!(f, "never-before-tm"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrategyPair {
    pub firm: Rule,
    pub investor: Rule,
}

impl fmt::Display for StrategyPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "firm={} investor={}", self.firm, self.investor)
    }
}

/// Equilibrium pair for the regime of `p`.
pub fn optimal_strategy(p: &ModelParams) -> Result<StrategyPair> {
    Ok(match classify_regime(p) {
        Regime::CaseI => StrategyPair {
            firm: Rule::StopAtTM,
            investor: Rule::StopAtTM,
        },
        Regime::CaseII => StrategyPair {
            firm: Rule::StopAtFirstArrival,
            investor: Rule::StopAtTM,
        },
        Regime::CaseIII => StrategyPair {
            firm: Rule::StopAtTM,
            investor: Rule::ThresholdConvert(solve_conversion_boundary(p)?),
        },
    })
}

/// Level the threshold deviations are scaled from: `x*` in Case III, `s_bar`
/// otherwise.
pub fn reference_level(p: &ModelParams) -> Result<f64> {
    match classify_regime(p) {
        Regime::CaseIII => solve_conversion_boundary(p),
        _ => Ok(threshold_sbar(p)),
    }
}

/// Parses `optimal` or a deviation name such as `investor:never-before-tm`,
/// `firm:stop-at-first-arrival` or `investor:threshold:1.5` (a multiple of the
/// reference level).
pub fn parse_strategy(p: &ModelParams, name: &str) -> Result<StrategyPair> {
    let optimal = optimal_strategy(p)?;
    if name == "optimal" {
        return Ok(optimal);
    }
    let bad = || Error::Config(format!("unknown strategy '{name}'"));
    let (player, rest) = name.split_once(':').ok_or_else(bad)?;
    let rule = match rest {
        "stop-at-first-arrival" => Rule::StopAtFirstArrival,
        "stop-at-tm" => Rule::StopAtTM,
        "never-before-tm" => Rule::NeverBeforeTM,
        _ => {
            let m: f64 = rest
                .strip_prefix("threshold:")
                .and_then(|m| m.parse().ok())
                .filter(|m: &f64| *m > 0.0)
                .ok_or_else(bad)?;
            Rule::ThresholdConvert(m * reference_level(p)?)
        }
    };
    match player {
        "firm" => Ok(StrategyPair {
            firm: rule,
            ..optimal
        }),
        "investor" => Ok(StrategyPair {
            investor: rule,
            ..optimal
        }),
        _ => Err(bad()),
    }
}
