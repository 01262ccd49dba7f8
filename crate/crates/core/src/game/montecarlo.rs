//! Monte Carlo play of the constrained game.
//!
//! The spot is only needed at Poisson arrivals, so paths jump from one arrival
//! to the next with an exact log-normal step. Whether `s_bar` was touched in
//! between is decided with the Brownian-bridge crossing probability, which is
//! exact for drifted Brownian motion in log space, so no monitoring grid is
//! needed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::strategy::StrategyPair;
use crate::error::{Error, Result};
use crate::format::num;
use crate::params::{bounds, threshold_sbar, upper_bound, ModelParams};

/// Discounted tail `e^{-r T_max} U` left out by the horizon cap.
pub const HORIZON_TOL: f64 = 1e-4;
pub const MIN_PATHS: usize = 1000;

/// Gap to the next arrival, a standard normal for the log step, and a uniform
/// for the bridge test. Three draws per arrival whatever the strategy, so
/// paths stay aligned across strategies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub dt: f64,
    pub z: f64,
    pub u: f64,
}

pub trait StepSource {
    fn next_step(&mut self) -> Step;
}

pub struct RngSteps {
    rng: ChaCha8Rng,
    gap: Exp<f64>,
}

impl RngSteps {
    /// Stream `path` of the generator seeded by `seed`.
    pub fn new(lambda: f64, seed: u64, path: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(path);
        RngSteps {
            rng,
            gap: Exp::new(lambda).expect("positive intensity"),
        }
    }
}

impl StepSource for RngSteps {
    fn next_step(&mut self) -> Step {
        let dt = self.gap.sample(&mut self.rng);
        let z = StandardNormal.sample(&mut self.rng);
        let u = self.rng.random::<f64>();
        Step { dt, z, u }
    }
}

impl<I: Iterator<Item = Step>> StepSource for I {
    fn next_step(&mut self) -> Step {
        self.next().expect("step source exhausted")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Convert,
    Call,
    Truncated,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathResult {
    /// Discounted coupons plus discounted terminal leg.
    pub payoff: f64,
    pub outcome: Outcome,
    pub stop_time: f64,
    pub arrivals: u64,
}

/// Per-parameter quantities shared by all paths.
#[derive(Debug, Clone, Copy)]
pub struct Game {
    pub params: ModelParams,
    pub sbar: f64,
    pub horizon: f64,
    ln_sbar: f64,
    nu: f64,
}

impl Game {
    pub fn new(p: &ModelParams) -> Self {
        let sbar = threshold_sbar(p);
        Game {
            params: *p,
            sbar,
            horizon: (upper_bound(p) / HORIZON_TOL).ln().max(0.0) / p.r(),
            ln_sbar: sbar.ln(),
            nu: p.log_drift(),
        }
    }

    /// `c (1 - e^{-r t}) / r`.
    pub fn coupons(&self, t: f64) -> f64 {
        -(-self.params.r() * t).exp_m1() * self.params.c() / self.params.r()
    }

    /// Value assigned at the horizon to a path still running.
    pub fn terminal_value(&self, s: f64) -> f64 {
        let (l, u) = bounds(&self.params, s);
        (self.params.c() / self.params.r()).clamp(l, l.max(u))
    }

    /// Plays one path. `on_arrival(t, s)` is called at every arrival where
    /// neither player stops.
    pub fn play_path<S: StepSource, F: FnMut(f64, f64)>(
        &self,
        s0: f64,
        strat: &StrategyPair,
        steps: &mut S,
        mut on_arrival: F,
    ) -> PathResult {
        let p = &self.params;
        let sigma = p.sigma();
        let mut t = 0.0;
        let mut x = s0.ln();
        let mut crossed = s0 >= self.sbar;
        let mut index = 0u64;
        loop {
            let step = steps.next_step();
            let t_next = t + step.dt;
            if t_next > self.horizon {
                let t = self.horizon;
                return PathResult {
                    payoff: self.coupons(t) + (-p.r() * t).exp() * self.terminal_value(x.exp()),
                    outcome: Outcome::Truncated,
                    stop_time: t,
                    arrivals: index,
                };
            }
            let x_next = x + self.nu * step.dt + sigma * step.dt.sqrt() * step.z;
            if !crossed {
                crossed = x_next >= self.ln_sbar || {
                    let hit = (-2.0 * (self.ln_sbar - x) * (self.ln_sbar - x_next)
                        / (sigma * sigma * step.dt))
                        .exp();
                    step.u < hit
                };
            }
            t = t_next;
            x = x_next;
            index += 1;
            let s = x.exp();
            let (leg, outcome) = if strat.investor.fires(index, s, crossed) {
                (p.gamma() * s, Outcome::Convert)
            } else if strat.firm.fires(index, s, crossed) {
                (p.k(), Outcome::Call)
            } else {
                on_arrival(t, s);
                continue;
            };
            return PathResult {
                payoff: self.coupons(t) + (-p.r() * t).exp() * leg,
                outcome,
                stop_time: t,
                arrivals: index,
            };
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub strategy: StrategyPair,
    #[serde(with = "num")]
    pub s0: f64,
    #[serde(with = "num")]
    pub estimate: f64,
    #[serde(with = "num")]
    pub std_error: f64,
    pub n_paths: usize,
    #[serde(with = "num")]
    pub frac_convert: f64,
    #[serde(with = "num")]
    pub frac_call: f64,
    #[serde(with = "num")]
    pub frac_truncated: f64,
    #[serde(with = "num")]
    pub horizon: f64,
    pub seed: u64,
}

pub(crate) fn check_inputs(s0: f64, n_paths: usize) -> Result<()> {
    if n_paths == 0 {
        return Err(Error::Seed("zero paths requested".into()));
    }
    if n_paths < MIN_PATHS {
        return Err(Error::Config(format!(
            "need at least {MIN_PATHS} paths (got {n_paths})"
        )));
    }
    if !(s0.is_finite() && s0 > 0.0) {
        return Err(Error::Domain(vec![format!(
            "s0 must be positive (got {s0})"
        )]));
    }
    Ok(())
}

/// Per-path results in path order. Path `i` uses stream `i` of `seed`, so the
/// output does not depend on how work is split across threads.
pub fn simulate_paths(
    p: &ModelParams,
    s0: f64,
    strat: &StrategyPair,
    n_paths: usize,
    seed: u64,
) -> Result<Vec<PathResult>> {
    check_inputs(s0, n_paths)?;
    let game = Game::new(p);
    Ok((0..n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let mut steps = RngSteps::new(p.lambda(), seed, i);
            game.play_path(s0, strat, &mut steps, |_, _| {})
        })
        .collect())
}

/// Sample mean and `std / sqrt(n)`.
pub fn mean_and_se(xs: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = xs.clone().count() as f64;
    let mean = xs.clone().sum::<f64>() / n;
    if n < 2.0 {
        return (mean, f64::NAN);
    }
    let var = xs.map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

pub fn summarize(
    p: &ModelParams,
    s0: f64,
    strat: &StrategyPair,
    seed: u64,
    paths: &[PathResult],
) -> SimulationReport {
    let n = paths.len();
    let (estimate, std_error) = mean_and_se(paths.iter().map(|r| r.payoff));
    let frac = |o: Outcome| paths.iter().filter(|r| r.outcome == o).count() as f64 / n as f64;
    SimulationReport {
        strategy: *strat,
        s0,
        estimate,
        std_error,
        n_paths: n,
        frac_convert: frac(Outcome::Convert),
        frac_call: frac(Outcome::Call),
        frac_truncated: frac(Outcome::Truncated),
        horizon: Game::new(p).horizon,
        seed,
    }
}

pub fn simulate_value(
    p: &ModelParams,
    s0: f64,
    strat: &StrategyPair,
    n_paths: usize,
    seed: u64,
) -> Result<SimulationReport> {
    let paths = simulate_paths(p, s0, strat, n_paths, seed)?;
    Ok(summarize(p, s0, strat, seed, &paths))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::build_constrained_solution;
    use crate::game::strategy::{optimal_strategy, Rule};
    use crate::params::lower_bound;

    fn pair(firm: Rule, investor: Rule) -> StrategyPair {
        StrategyPair { firm, investor }
    }

    #[test]
    fn guards() {
        let p = ModelParams::table1(1.0, 0.02).unwrap();
        let s = optimal_strategy(&p).unwrap();
        assert!(matches!(
            simulate_value(&p, 1.0, &s, 0, 1),
            Err(Error::Seed(_))
        ));
        assert!(matches!(
            simulate_value(&p, 1.0, &s, 10, 1),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            simulate_value(&p, -1.0, &s, 1000, 1),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn tie_pays_the_conversion_leg() {
        let p = ModelParams::table1(1.0, 0.02).unwrap();
        let game = Game::new(&p);
        let both = pair(Rule::StopAtFirstArrival, Rule::StopAtFirstArrival);
        let mut steps = std::iter::once(Step {
            dt: 0.5,
            z: 0.0,
            u: 1.0,
        });
        let r = game.play_path(1.0, &both, &mut steps, |_, _| panic!("game should end"));
        let s1 = (p.log_drift() * 0.5).exp();
        assert_eq!(r.outcome, Outcome::Convert);
        assert_eq!(r.arrivals, 1);
        assert!(
            (r.payoff - (game.coupons(0.5) + (-p.r() * 0.5).exp() * p.gamma() * s1)).abs() < 1e-15
        );

        let call_only = pair(Rule::StopAtFirstArrival, Rule::NeverBeforeTM);
        let mut steps = std::iter::once(Step {
            dt: 0.5,
            z: 0.0,
            u: 1.0,
        });
        let r = game.play_path(1.0, &call_only, &mut steps, |_, _| {});
        assert_eq!(r.outcome, Outcome::Call);
        assert!((r.payoff - (game.coupons(0.5) + (-p.r() * 0.5).exp() * p.k())).abs() < 1e-15);
    }

    #[test]
    fn bridge_crossing_settles_at_next_arrival() {
        let p = ModelParams::table1(1.0, 0.04).unwrap();
        let game = Game::new(&p);
        let wait = pair(Rule::StopAtTM, Rule::StopAtTM);
        // endpoints below s_bar, u = 0 forces the crossing
        let mut steps = [Step {
            dt: 1.0,
            z: 0.0,
            u: 0.0,
        }]
        .into_iter();
        let r = game.play_path(1.2, &wait, &mut steps, |_, _| panic!());
        assert_eq!((r.outcome, r.arrivals), (Outcome::Convert, 1));
        // u = 1 never crosses; the second step ends above s_bar
        let mut seen = Vec::new();
        let mut steps = [
            Step {
                dt: 1.0,
                z: 0.0,
                u: 1.0,
            },
            Step {
                dt: 1.0,
                z: 5.0,
                u: 1.0,
            },
        ]
        .into_iter();
        let r = game.play_path(1.2, &wait, &mut steps, |t, s| seen.push((t, s)));
        assert_eq!((r.outcome, r.arrivals), (Outcome::Convert, 2));
        assert_eq!(seen.len(), 1);
    }

    #[test]
    fn horizon_truncation_uses_clamp_value() {
        let p = ModelParams::table1(1.0, 0.04).unwrap();
        let game = Game::new(&p);
        let wait = pair(Rule::StopAtTM, Rule::StopAtTM);
        let mut steps = std::iter::once(Step {
            dt: 1e6,
            z: 0.0,
            u: 1.0,
        });
        let r = game.play_path(1.0, &wait, &mut steps, |_, _| {});
        assert_eq!(r.outcome, Outcome::Truncated);
        assert_eq!(r.stop_time, game.horizon);
        assert!((-p.r() * game.horizon).exp() * upper_bound(&p) <= HORIZON_TOL * (1.0 + 1e-12));
    }

    #[test]
    fn above_threshold_first_arrival_gives_lower_bound() {
        let p = ModelParams::table1(1.0, 0.02).unwrap();
        let both = pair(Rule::StopAtFirstArrival, Rule::StopAtFirstArrival);
        let s0 = 1.4;
        let r = simulate_value(&p, s0, &both, 100_000, 7).unwrap();
        let l = lower_bound(&p, s0);
        assert!((r.estimate - l).abs() < 3.0 * r.std_error, "{r:?} vs {l}");
        assert_eq!(r.frac_convert, 1.0);
    }

    #[test]
    fn optimal_play_attains_case_three_price() {
        let p = ModelParams::table1(1.0, 0.02).unwrap();
        let sol = build_constrained_solution(&p).unwrap();
        let r = simulate_value(&p, 1.0, &optimal_strategy(&p).unwrap(), 100_000, 11).unwrap();
        let v = sol.value(1.0);
        assert!((r.estimate - v).abs() < 3.0 * r.std_error, "{r:?} vs {v}");
        let total = r.frac_convert + r.frac_call + r.frac_truncated;
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn reports_do_not_depend_on_thread_count() {
        let p = ModelParams::table1(1.0, 0.02).unwrap();
        let s = optimal_strategy(&p).unwrap();
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| simulate_value(&p, 1.0, &s, 5000, 3).unwrap())
        };
        let a = run(1);
        let b = run(4);
        assert_eq!(a.estimate.to_bits(), b.estimate.to_bits());
        assert_eq!(a, b);
        let c = simulate_value(&p, 1.0, &s, 5000, 4).unwrap();
        assert_ne!(a.estimate, c.estimate);
    }
}
