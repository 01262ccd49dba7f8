use std::fs;
use std::path::Path;

use cbond_core::analytic::{build_constrained_solution, AnalyticSolution};
use cbond_core::asymptotics::{
    boundary_sweep, figure_data, reproduce_table1, sweep_monotonicity_violations, TABLE1_NOTE,
};
use cbond_core::boundary::{locate_conversion_boundary, pasting_report};
use cbond_core::format::json_num;
use cbond_core::game::diagnostics::{martingale_diagnostic, saddle_check, Player};
use cbond_core::game::lattice::{lattice_value, LatticeConfig};
use cbond_core::game::montecarlo::simulate_value;
use cbond_core::game::strategy::parse_strategy;
use cbond_core::ode::{
    compare_to_analytic, convergence_study, default_s_min, solve_penalized_ode_with, LeftBoundary,
};
use cbond_core::params::{bounds, classify_regime, threshold_sbar, ModelParams, RawParams, Regime};
use serde::Deserialize;
use serde_json::{json, Value};

use crate::args::{Command, Format, LeftCondition, OutArgs, ParamArgs};
use crate::output::{emit, Cell, Report, Table};
use crate::Failure;

type Outcome = Result<(), Failure>;

fn read_json<T: serde::de::DeserializeOwned>(path: &Path, what: &str) -> Result<T, Failure> {
    let text = fs::read_to_string(path).map_err(|e| {
        Failure::Io(std::io::Error::new(
            e.kind(),
            format!("cannot read {what} {}: {e}", path.display()),
        ))
    })?;
    serde_json::from_str(&text)
        .map_err(|e| Failure::Usage(format!("invalid {what} {}: {e}", path.display())))
}

/// Accepts the envelope written by `price --dump-solution` or a bare object.
fn load_solution(path: &Path) -> Result<AnalyticSolution, Failure> {
    let mut v: Value = read_json(path, "solution")?;
    if let Some(inner) = v.get_mut("result") {
        v = inner.take();
    }
    let sol: AnalyticSolution = serde_json::from_value(v)
        .map_err(|e| Failure::Usage(format!("invalid solution {}: {e}", path.display())))?;
    // re-validate so a hand-edited file cannot smuggle in bad parameters
    sol.params.raw().validate()?;
    Ok(sol)
}

/// Keys missing from a config file fall back to the defaults.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PartialParams {
    r: Option<f64>,
    q: Option<f64>,
    sigma: Option<f64>,
    lambda: Option<f64>,
    c: Option<f64>,
    #[serde(rename = "K")]
    k: Option<f64>,
    gamma: Option<f64>,
}

/// Defaults, then file values, then inline flags.
pub fn resolve_params(a: &ParamArgs) -> Result<ModelParams, Failure> {
    let mut raw: RawParams = ModelParams::table1(1.0, 0.02)
        .expect("valid defaults")
        .raw();
    let file = match &a.config {
        Some(path) => read_json::<PartialParams>(path, "config")?,
        None => PartialParams::default(),
    };
    let layers = [
        (&mut raw.r, file.r, a.r),
        (&mut raw.q, file.q, a.q),
        (&mut raw.sigma, file.sigma, a.sigma),
        (&mut raw.lambda, file.lambda, a.lambda),
        (&mut raw.c, file.c, a.c),
        (&mut raw.k, file.k, a.k),
        (&mut raw.gamma, file.gamma, a.gamma),
    ];
    for (slot, from_file, inline) in layers {
        if let Some(v) = inline.or(from_file) {
            *slot = v;
        }
    }
    Ok(raw.validate()?)
}

fn config(p: &ModelParams, knobs: Value) -> Value {
    let mut c = json!({ "params": p.raw() });
    if let (Some(m), Value::Object(k)) = (c.as_object_mut(), knobs) {
        m.extend(k);
    }
    c
}

fn regime_cell(r: Regime) -> Cell {
    Cell::Text(r.to_string())
}

pub fn run(cmd: Command) -> Outcome {
    match cmd {
        Command::Price {
            params,
            s0,
            dump_solution,
            solution,
            out,
        } => {
            let sol: AnalyticSolution = match &solution {
                Some(path) => load_solution(path)?,
                None => build_constrained_solution(&resolve_params(&params)?)?,
            };
            let p = sol.params;
            let cfg = config(
                &p,
                json!({ "s0": s0, "solution": solution, "dump_solution": dump_solution }),
            );
            if dump_solution {
                let mut table = Table::new(&["regime", "sbar", "x_star", "coeff_a", "u_upper"]);
                table.push(vec![
                    regime_cell(sol.regime),
                    sol.sbar.into(),
                    sol.x_star.into(),
                    sol.coeff_a.into(),
                    sol.u_upper.into(),
                ]);
                let mut report = Report::new("price", cfg, table);
                report.json = Some(serde_json::to_value(&sol).expect("serializable"));
                // a csv dump could not be read back
                let out = OutArgs {
                    format: Some(Format::Json),
                    ..out
                };
                emit(&report, &out)?;
                return Ok(());
            }
            let mut table = Table::new(&["s0", "regime", "value", "lower", "upper", "x_star"]);
            for &s in &s0 {
                if !(s.is_finite() && s > 0.0) {
                    return Err(Failure::Domain(format!("s0 must be positive (got {s})")));
                }
                let (l, u) = bounds(&p, s);
                table.push(vec![
                    s.into(),
                    regime_cell(sol.regime),
                    sol.value(s).into(),
                    l.into(),
                    u.into(),
                    sol.x_star.into(),
                ]);
            }
            let mut report = Report::new("price", cfg, table);
            if s0.len() == 1 {
                let s = s0[0];
                let (l, u) = bounds(&p, s);
                report.json = Some(json!({
                    "regime": sol.regime.to_string(),
                    "s0": json_num(s),
                    "value": json_num(sol.value(s)),
                    "bounds": [json_num(l), json_num(u)],
                    "x_star": json_num(sol.x_star),
                }));
            }
            emit(&report, &out)?;
        }
        Command::Boundary {
            params,
            lambdas,
            coupons,
            out,
        } => {
            let p = resolve_params(&params)?;
            let lambdas = lambdas.unwrap_or_else(|| vec![p.lambda()]);
            let coupons = coupons.unwrap_or_else(|| vec![p.c()]);
            let mut table = Table::new(&[
                "lambda",
                "c",
                "x_star",
                "residual",
                "residual_scale",
                "sign_changes",
                "derivative_mismatch",
                "derivative_at_boundary",
                "derivative_below_gamma",
                "lower_convex",
                "upper_concave",
                "upper_curvature_min",
                "upper_curvature_max",
                "below_conversion_payoff",
                "passed",
                "note",
            ]);
            let mut failures = Vec::new();
            for &l in &lambdas {
                for &c in &coupons {
                    let q = p.with_lambda(l)?.with_coupon(c)?;
                    match locate_conversion_boundary(&q) {
                        Ok(root) => {
                            let rep = pasting_report(&q, root.x_star);
                            if let Some(f) = rep.failure() {
                                failures.push(cbond_core::Error::PastingViolation(format!(
                                    "lambda={l} c={c}: {f}"
                                )));
                            }
                            let (cmin, cmax) = rep
                                .upper_curvature_range
                                .map_or((None, None), |(a, b)| (Some(a), Some(b)));
                            table.push(vec![
                                l.into(),
                                c.into(),
                                root.x_star.into(),
                                root.residual.into(),
                                root.residual_scale.into(),
                                Cell::Int(root.sign_changes as u64),
                                rep.derivative_mismatch.into(),
                                rep.derivative_at_boundary.into(),
                                rep.derivative_below_gamma.into(),
                                rep.lower_convex.into(),
                                rep.upper_concave.into(),
                                cmin.into(),
                                cmax.into(),
                                rep.below_conversion_payoff.into(),
                                rep.passed().into(),
                                rep.failure().unwrap_or_default().into(),
                            ]);
                        }
                        Err(e) => {
                            let mut row = vec![l.into(), c.into()];
                            row.extend((0..13).map(|_| Cell::Empty));
                            row.push(e.to_string().into());
                            table.push(row);
                            failures.push(e);
                        }
                    }
                }
            }
            let cfg = config(&p, json!({ "lambdas": lambdas, "coupons": coupons }));
            emit(&Report::new("boundary", cfg, table), &out)?;
            if let Some(e) = failures.into_iter().next() {
                return Err(e.into());
            }
        }
        Command::OdeCheck {
            params,
            nodes,
            s_min,
            left,
            out,
        } => {
            let p = resolve_params(&params)?;
            let s_min = s_min.unwrap_or_else(|| default_s_min(&p));
            let left = match left {
                LeftCondition::Asymptotic => LeftBoundary::Asymptotic,
                LeftCondition::Dirichlet => LeftBoundary::Dirichlet,
            };
            let sol = build_constrained_solution(&p)?;
            let n = nodes as usize;
            let grid = solve_penalized_ode_with(&p, n, s_min, left)?;
            let err = compare_to_analytic(&grid, &sol)?;
            let study = convergence_study(&p, &sol, n, s_min, left)?;
            let mut table = Table::new(&["node", "analytic", "grid", "abs_error"]);
            for (s, v) in grid.nodes.iter().zip(&grid.values) {
                let a = sol.value(*s);
                table.push(vec![
                    (*s).into(),
                    a.into(),
                    (*v).into(),
                    (v - a).abs().into(),
                ]);
            }
            let cfg = config(
                &p,
                json!({ "nodes": nodes, "s_min": json_num(s_min), "left": format!("{left:?}") }),
            );
            let mut report = Report::new("ode-check", cfg, table);
            report.notes.push(format!(
                "sup_error={:.6e} l2_error={:.6e} iterations={} residual_norm={:.3e} truncation_bound={:.3e}",
                err.sup_error,
                err.l2_error,
                grid.iterations,
                grid.residual_norm,
                err.truncation_bound
            ));
            report.notes.push(format!(
                "refined to {} nodes: sup_error={:.6e} order={}",
                study.n_nodes,
                study.sup_error,
                study.order.map_or("n/a".into(), |o| format!("{o:.4}"))
            ));
            report.json = Some(json!({
                "error": err,
                "refined": study,
                "iterations": grid.iterations,
                "residual_norm": json_num(grid.residual_norm),
            }));
            emit(&report, &out)?;
        }
        Command::Simulate {
            params,
            s0,
            paths,
            seed,
            strategy,
            out,
        } => {
            let p = resolve_params(&params)?;
            let strat = parse_strategy(&p, &strategy)?;
            let rep = simulate_value(&p, s0, &strat, paths as usize, seed)?;
            let mut table = Table::new(&[
                "strategy",
                "estimate",
                "std_error",
                "frac_convert",
                "frac_call",
                "frac_truncated",
            ]);
            table.push(vec![
                strategy.clone().into(),
                rep.estimate.into(),
                rep.std_error.into(),
                rep.frac_convert.into(),
                rep.frac_call.into(),
                rep.frac_truncated.into(),
            ]);
            let cfg = config(
                &p,
                json!({ "s0": json_num(s0), "paths": paths, "seed": seed, "strategy": strategy }),
            );
            let mut report = Report::new("simulate", cfg, table);
            report.notes.push(format!("seed={seed} rules: {strat}"));
            report.json = Some(serde_json::to_value(&rep).expect("serializable"));
            emit(&report, &out)?;
        }
        Command::Saddle {
            params,
            s0,
            paths,
            seed,
            out,
        } => {
            let p = resolve_params(&params)?;
            let rep = saddle_check(&p, s0, paths as usize, seed)?;
            let mut table = Table::new(&[
                "player",
                "rule",
                "estimate",
                "difference",
                "paired_se",
                "holds",
            ]);
            table.push(vec![
                "optimal".into(),
                rep.optimal.strategy.to_string().into(),
                rep.optimal.estimate.into(),
                0.0.into(),
                Cell::Empty,
                true.into(),
            ]);
            for d in &rep.deviations {
                let player = match d.player {
                    Player::Firm => "firm",
                    Player::Investor => "investor",
                };
                table.push(vec![
                    player.into(),
                    d.rule.to_string().into(),
                    d.estimate.into(),
                    d.difference.into(),
                    d.paired_se.into(),
                    d.holds.into(),
                ]);
            }
            let cfg = config(
                &p,
                json!({ "s0": json_num(s0), "paths": paths, "seed": seed }),
            );
            let mut report = Report::new("saddle", cfg, table);
            report.notes.push(format!(
                "seed={seed} optimal std_error={} saddle {}",
                rep.optimal.std_error,
                if rep.passed() { "holds" } else { "violated" }
            ));
            report.json = Some(serde_json::to_value(&rep).expect("serializable"));
            emit(&report, &out)?;
        }
        Command::Drift {
            params,
            s0,
            paths,
            seed,
            out,
        } => {
            let p = resolve_params(&params)?;
            let rep = martingale_diagnostic(&p, s0, paths as usize, seed)?;
            let mut table = Table::new(&[
                "play",
                "expected",
                "mean_increment",
                "std_error",
                "t_stat",
                "n_increments",
                "consistent",
            ]);
            for r in &rep.rows {
                table.push(vec![
                    r.label.clone().into(),
                    format!("{:?}", r.expected).to_lowercase().into(),
                    r.mean_increment.into(),
                    r.std_error.into(),
                    r.t_stat.into(),
                    Cell::Int(r.n_increments),
                    r.consistent.into(),
                ]);
            }
            let cfg = config(
                &p,
                json!({ "s0": json_num(s0), "paths": paths, "seed": seed }),
            );
            let mut report = Report::new("drift", cfg, table);
            report.notes.push(format!("seed={seed}"));
            report.json = Some(serde_json::to_value(&rep).expect("serializable"));
            emit(&report, &out)?;
        }
        Command::Lattice {
            params,
            s0,
            dt,
            tol,
            out,
        } => {
            let p = resolve_params(&params)?;
            let cfg_l = LatticeConfig::for_params(&p, dt, tol)?;
            let v = lattice_value(&p, &cfg_l, s0)?;
            let exact = build_constrained_solution(&p)?.value(s0);
            let mut table = Table::new(&["s0", "lattice", "closed_form", "abs_error"]);
            table.push(vec![
                s0.into(),
                v.into(),
                exact.into(),
                (v - exact).abs().into(),
            ]);
            let cfg = config(&p, json!({ "s0": json_num(s0), "lattice": cfg_l }));
            emit(&Report::new("lattice", cfg, table), &out)?;
        }
        Command::Sweep {
            params,
            lambdas,
            coupons,
            out,
        } => {
            let p = resolve_params(&params)?;
            let rows = boundary_sweep(&p, &lambdas, &coupons);
            let mut table = Table::new(&[
                "lambda",
                "c",
                "x_star_lambda",
                "s_bar_lambda",
                "limit_target",
                "gap",
                "error",
            ]);
            for r in &rows {
                table.push(vec![
                    r.lambda.into(),
                    r.c.into(),
                    r.x_star_lambda.into(),
                    r.s_bar_lambda.into(),
                    r.limit_target.into(),
                    r.gap.into(),
                    r.error.clone().map_or(Cell::Empty, Cell::Text),
                ]);
            }
            let violations = sweep_monotonicity_violations(&rows);
            let cfg = config(&p, json!({ "lambdas": lambdas, "coupons": coupons }));
            let mut report = Report::new("sweep", cfg, table);
            report.notes.push(if violations.is_empty() {
                "monotone in lambda within every column".into()
            } else {
                format!("monotonicity violations: {}", violations.join("; "))
            });
            emit(&report, &out)?;
        }
        Command::Table1 { out } => {
            let t = reproduce_table1()?;
            let mut columns = vec!["row".to_string()];
            columns.extend(t.coupons.iter().map(|c| format!("c={c}")));
            let mut table = Table {
                columns,
                rows: Vec::new(),
            };
            let mut push = |label: String, xs: &[f64]| {
                let mut row: Vec<Cell> = vec![label.into()];
                row.extend(xs.iter().map(|&x| Cell::Num(x)));
                table.rows.push(row);
            };
            for (l, row) in t.lambdas.iter().zip(&t.cells) {
                push(format!("lambda={l}"), row);
            }
            push("x*".into(), &t.x_star);
            push("s_bar".into(), &t.s_bar);
            push("limit".into(), &t.limit);
            let p = ModelParams::table1(1.0, t.coupons[0])?;
            let cfg = config(&p, json!({ "lambdas": t.lambdas, "coupons": t.coupons }));
            let mut report = Report::new("table1", cfg, table);
            report.notes.push(TABLE1_NOTE.into());
            let mismatches = t.mismatches();
            report.notes.push(if mismatches.is_empty() {
                "all cells within 1e-3 of the reference values".into()
            } else {
                format!("mismatches: {}", mismatches.join("; "))
            });
            report.json = Some(serde_json::to_value(&t).expect("serializable"));
            emit(&report, &out)?;
            t.verify()?;
        }
        Command::FigureData {
            params,
            lambdas,
            s_max,
            points,
            out,
        } => {
            let p = resolve_params(&params)?;
            if s_max.is_nan() || s_max <= 0.0 {
                return Err(Failure::Usage(format!(
                    "--s-max must be positive (got {s_max})"
                )));
            }
            let spots: Vec<f64> = (1..=points)
                .map(|i| s_max * i as f64 / points as f64)
                .collect();
            let fd = figure_data(&p, &lambdas, &spots)?;
            let mut columns = vec!["s".to_string()];
            columns.extend(fd.lambdas.iter().map(|l| format!("v_lambda={l}")));
            columns.push("v_classical".into());
            columns.push("markers".into());
            let mut table = Table {
                columns,
                rows: Vec::new(),
            };
            for (k, &s) in fd.spots.iter().enumerate() {
                let prev = if k == 0 { 0.0 } else { fd.spots[k - 1] };
                let mut row: Vec<Cell> = vec![s.into()];
                row.extend(fd.values.iter().map(|v| Cell::Num(v[k])));
                row.push(fd.classical[k].into());
                let mut marks: Vec<String> = fd
                    .boundaries
                    .iter()
                    .filter(|(_, x)| *x > prev && *x <= s)
                    .map(|(l, _)| format!("boundary_lambda={l}"))
                    .collect();
                if fd.classical_boundary > prev && fd.classical_boundary <= s {
                    marks.push("boundary_classical".into());
                }
                row.push(marks.join(";").into());
                table.rows.push(row);
            }
            let cfg = config(
                &p,
                json!({ "lambdas": lambdas, "s_max": json_num(s_max), "points": points }),
            );
            let mut report = Report::new("figure-data", cfg, table);
            report.notes.push(format!(
                "regime {}; s_bar at lambda={}: {}",
                classify_regime(&p),
                p.lambda(),
                threshold_sbar(&p)
            ));
            emit(&report, &out)?;
        }
    }
    Ok(())
}
