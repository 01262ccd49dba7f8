//! Equilibrium checks by simulation: unilateral deviations under common random
//! numbers, and the drift of the discounted value along play.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::montecarlo::SimulationReport;
use super::montecarlo::{check_inputs, mean_and_se, simulate_paths, summarize, Game, RngSteps};
use super::strategy::{optimal_strategy, reference_level, Rule, StrategyPair};
use crate::analytic::build_constrained_solution;
use crate::error::Result;
use crate::format::num;
use crate::params::ModelParams;

/// Paired-difference threshold, in standard errors.
pub const SE_BAND: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Player {
    Firm,
    Investor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Deviation {
    pub player: Player,
    pub rule: Rule,
    #[serde(with = "num")]
    pub estimate: f64,
    /// Deviation estimate minus the optimal-pair estimate.
    #[serde(with = "num")]
    pub difference: f64,
    #[serde(with = "num")]
    pub paired_se: f64,
    /// Investor: `difference <= 3 se`. Firm: `difference >= -3 se`.
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaddleReport {
    pub optimal: SimulationReport,
    pub deviations: Vec<Deviation>,
}

impl SaddleReport {
    pub fn passed(&self) -> bool {
        self.deviations.iter().all(|d| d.holds)
    }
}

/// Investor deviations: first arrival, never before `T_M`, thresholds at half
/// and one and a half times the reference level. Firm deviations: first
/// arrival, never before `T_M`.
pub fn deviation_roster(p: &ModelParams) -> Result<Vec<(Player, Rule)>> {
    let x = reference_level(p)?;
    Ok(vec![
        (Player::Investor, Rule::StopAtFirstArrival),
        (Player::Investor, Rule::NeverBeforeTM),
        (Player::Investor, Rule::ThresholdConvert(0.5 * x)),
        (Player::Investor, Rule::ThresholdConvert(1.5 * x)),
        (Player::Firm, Rule::StopAtFirstArrival),
        (Player::Firm, Rule::NeverBeforeTM),
    ])
}

pub fn saddle_check(p: &ModelParams, s0: f64, n_paths: usize, seed: u64) -> Result<SaddleReport> {
    let optimal_pair = optimal_strategy(p)?;
    let base = simulate_paths(p, s0, &optimal_pair, n_paths, seed)?;
    let optimal = summarize(p, s0, &optimal_pair, seed, &base);
    let mut deviations = Vec::new();
    for (player, rule) in deviation_roster(p)? {
        let strat = match player {
            Player::Firm => StrategyPair {
                firm: rule,
                ..optimal_pair
            },
            Player::Investor => StrategyPair {
                investor: rule,
                ..optimal_pair
            },
        };
        let dev = simulate_paths(p, s0, &strat, n_paths, seed)?;
        let (estimate, _) = mean_and_se(dev.iter().map(|r| r.payoff));
        let (difference, paired_se) =
            mean_and_se(dev.iter().zip(&base).map(|(d, b)| d.payoff - b.payoff));
        let band = SE_BAND * paired_se;
        let holds = match player {
            Player::Investor => difference <= band,
            Player::Firm => difference >= -band,
        } || difference == 0.0;
        deviations.push(Deviation {
            player,
            rule,
            estimate,
            difference,
            paired_se,
            holds,
        });
    }
    Ok(SaddleReport {
        optimal,
        deviations,
    })
}

/// Direction the drift should take under a given play.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriftSign {
    Zero,
    NonPositive,
    NonNegative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftRow {
    pub label: String,
    pub strategy: StrategyPair,
    pub expected: DriftSign,
    #[serde(with = "num")]
    pub mean_increment: f64,
    #[serde(with = "num")]
    pub std_error: f64,
    #[serde(with = "num")]
    pub t_stat: f64,
    pub n_increments: u64,
    /// `Zero`: `|t| < 3`. Otherwise the drift has the expected sign within
    /// 3 standard errors.
    pub consistent: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftReport {
    #[serde(with = "num")]
    pub s0: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub rows: Vec<DriftRow>,
}

impl DriftReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.consistent)
    }
}

#[derive(Default, Clone, Copy)]
struct Moments {
    n: u64,
    sum: f64,
    sum_sq: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }

    fn merge(self, o: Moments) -> Moments {
        Moments {
            n: self.n + o.n,
            sum: self.sum + o.sum,
            sum_sq: self.sum_sq + o.sum_sq,
        }
    }
}

/// Increments of `G_n = coupons(0, T_n) + e^{-r T_n} X_n` between arrivals,
/// where `X_n = v(S_{T_n})` while the game continues and the realised leg
/// at the stop, pooled across all paths and steps.
pub fn drift_row(
    p: &ModelParams,
    s0: f64,
    label: &str,
    strat: &StrategyPair,
    expected: DriftSign,
    n_paths: usize,
    seed: u64,
) -> Result<DriftRow> {
    check_inputs(s0, n_paths)?;
    let sol = build_constrained_solution(p)?;
    let game = Game::new(p);
    let r = p.r();
    let per_path: Vec<Moments> = (0..n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let mut steps = RngSteps::new(p.lambda(), seed, i);
            let mut m = Moments::default();
            let mut prev = sol.value(s0);
            let result = game.play_path(s0, strat, &mut steps, |t, s| {
                let g = game.coupons(t) + (-r * t).exp() * sol.value(s);
                m.push(g - prev);
                prev = g;
            });
            m.push(result.payoff - prev);
            m
        })
        .collect();
    let total = per_path
        .into_iter()
        .fold(Moments::default(), Moments::merge);
    let n = total.n as f64;
    let mean = total.sum / n;
    let var = ((total.sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
    let std_error = (var / n).sqrt();
    let t_stat = if std_error > 0.0 {
        mean / std_error
    } else {
        0.0
    };
    let consistent = match expected {
        DriftSign::Zero => t_stat.abs() < SE_BAND,
        DriftSign::NonPositive => t_stat < SE_BAND,
        DriftSign::NonNegative => t_stat > -SE_BAND,
    };
    Ok(DriftRow {
        label: label.to_string(),
        strategy: *strat,
        expected,
        mean_increment: mean,
        std_error,
        t_stat,
        n_increments: total.n,
        consistent,
    })
}

/// Optimal play plus one genuine deviation per player. The investor holds
/// on until `T_M` when the optimum converts at a threshold and converts at
/// the first arrival otherwise; the firm calls at the first arrival unless
/// that is already optimal, in which case it waits until `T_M`.
pub fn martingale_diagnostic(
    p: &ModelParams,
    s0: f64,
    n_paths: usize,
    seed: u64,
) -> Result<DriftReport> {
    let opt = optimal_strategy(p)?;
    let investor = match opt.investor {
        Rule::ThresholdConvert(_) => Rule::NeverBeforeTM,
        _ => Rule::StopAtFirstArrival,
    };
    let firm = match opt.firm {
        Rule::StopAtFirstArrival => Rule::NeverBeforeTM,
        _ => Rule::StopAtFirstArrival,
    };
    let plays = [
        ("optimal".to_string(), opt, DriftSign::Zero),
        (
            format!("investor:{investor}"),
            StrategyPair { investor, ..opt },
            DriftSign::NonPositive,
        ),
        (
            format!("firm:{firm}"),
            StrategyPair { firm, ..opt },
            DriftSign::NonNegative,
        ),
    ];
    let rows = plays
        .iter()
        .map(|(label, strat, sign)| drift_row(p, s0, label, strat, *sign, n_paths, seed))
        .collect::<Result<Vec<_>>>()?;
    Ok(DriftReport {
        s0,
        n_paths,
        seed,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn case_three_saddle_holds() {
        let p = ModelParams::table1(1.0, 0.02).unwrap();
        let r = saddle_check(&p, 1.0, 50_000, 5).unwrap();
        assert_eq!(r.deviations.len(), 6);
        assert!(r.passed(), "{r:#?}");
    }

    #[test]
    fn case_two_firm_waiting_costs_the_firm() {
        let p = ModelParams::table1(1.0, 0.06).unwrap();
        let r = saddle_check(&p, 1.0, 50_000, 5).unwrap();
        let wait = r
            .deviations
            .iter()
            .find(|d| d.player == Player::Firm && d.rule == Rule::NeverBeforeTM)
            .unwrap();
        assert!(wait.difference > 3.0 * wait.paired_se, "{wait:?}");
    }

    #[test]
    fn drift_signs() {
        let p = ModelParams::table1(1.0, 0.02).unwrap();
        let r = martingale_diagnostic(&p, 1.0, 20_000, 9).unwrap();
        assert!(r.passed(), "{r:#?}");
    }

    #[test]
    fn low_volatility_smoke() {
        let p = ModelParams::table1(1.0, 0.02)
            .unwrap()
            .with_sigma(1e-3)
            .unwrap();
        let opt = optimal_strategy(&p).unwrap();
        let row = drift_row(&p, 1.0, "optimal", &opt, DriftSign::Zero, 5000, 1).unwrap();
        assert!(row.t_stat.abs() < 3.0, "{row:?}");
        assert!(row.mean_increment.abs() < 1e-3, "{row:?}");
    }
}
