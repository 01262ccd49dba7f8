//! Frozen input/output examples. Expected values are either published
//! table entries or plain arithmetic written out here, never library output.

use cbond_core::analytic::build_constrained_solution;
use cbond_core::boundary::{boundary_residual, pasting_report};
use cbond_core::game::montecarlo::simulate_value;
use cbond_core::ode::{default_s_min, solve_penalized_ode_with, LeftBoundary};
use cbond_core::params::{classical_sbar, lower_bound, upper_bound};
use cbond_core::{
    classify_regime, compare_to_analytic, exponents, lattice_value, optimal_strategy,
    rate_check_case1, rate_check_case2, reproduce_table1, solve_conversion_boundary,
    solve_penalized_ode, threshold_sbar, Error, LatticeConfig, ModelParams, RawParams, Regime,
    Rule,
};

fn table(lambda: f64, c: f64) -> ModelParams {
    ModelParams::table1(lambda, c).unwrap()
}

fn raw() -> RawParams {
    RawParams {
        r: 0.05,
        q: 0.03,
        sigma: 0.2,
        lambda: 1.0,
        c: 0.02,
        k: 1.0,
        gamma: 0.8,
    }
}

#[test]
fn parameter_validation() {
    assert!(raw().validate().is_ok());
    let mut bad = raw();
    bad.r = 0.03;
    assert!(matches!(bad.validate(), Err(Error::Domain(_))));
    let mut bad = raw();
    bad.gamma = 0.0;
    assert!(matches!(bad.validate(), Err(Error::Domain(_))));
}

#[test]
fn exponents_by_hand() {
    let e = exponents(&table(1.0, 0.02));
    // drift r - q - sigma^2/2 vanishes, so alpha = sqrt(2r)/sigma
    let alpha = (2.0f64 * 0.05).sqrt() / 0.2;
    assert!((e.alpha_plus - alpha).abs() < 1e-12);
    assert!((e.alpha_plus - 1.58114).abs() < 1e-5);
    let beta = (2.0f64 * 1.05).sqrt() / 0.2;
    assert!((e.beta_plus - beta).abs() < 1e-12);
    assert!((e.beta_plus - 7.2457).abs() < 1e-4);
    assert!((e.beta_minus + 7.2457).abs() < 1e-4);
    // the classical coupon threshold (alpha-1)/alpha rK
    assert!(((alpha - 1.0) / alpha * 0.05 - 0.0184).abs() < 1e-4);
}

#[test]
fn call_threshold_and_bounds_by_hand() {
    let p = table(1.0, 0.02);
    assert!((threshold_sbar(&p) - 1.03 / 1.05 * 1.25).abs() < 1e-12);
    assert!((threshold_sbar(&table(1.0, 0.03)) - 1.2262).abs() < 5e-5);
    assert!((threshold_sbar(&table(1e9, 0.02)) - 1.25).abs() < 1e-9);
    let l = lower_bound(&p, 1.0);
    assert!((l - (0.02 / 1.05 + 0.8 / 1.03)).abs() < 1e-12);
    assert!((l - 0.795747).abs() < 1e-6);
    assert!((upper_bound(&p) - 1.02 / 1.05).abs() < 1e-12);
    let sbar = threshold_sbar(&p);
    assert!((lower_bound(&p, sbar) - upper_bound(&p)).abs() < 1e-12);
}

#[test]
fn regimes() {
    assert_eq!(classify_regime(&table(1.0, 0.04)), Regime::CaseI);
    assert_eq!(classify_regime(&table(1.0, 0.06)), Regime::CaseII);
    assert_eq!(classify_regime(&table(1.0, 0.02)), Regime::CaseIII);
    assert_eq!(classify_regime(&table(1.0, 0.03)), Regime::CaseIII);
}

#[test]
fn case_one_coefficient_by_hand() {
    let p = table(1.0, 0.04);
    let sol = build_constrained_solution(&p).unwrap();
    let alpha = (2.0f64 * 0.05).sqrt() / 0.2;
    let sbar = 1.03 / 1.05 * 1.25;
    let a = (1.0 / 1.05) * (0.01 / 0.05) * f64::powf(sbar, -alpha);
    assert!((sol.coeff_a - a).abs() < 1e-12 * a);
    assert!((sol.value(sbar) - 1.04 / 1.05).abs() < 1e-12);
    // small spots approach the perpetual coupon c/r
    assert!((sol.value(1e-8) - 0.8).abs() < 1e-9);
}

#[test]
fn case_two_is_flat() {
    let sol = build_constrained_solution(&table(1.0, 0.06)).unwrap();
    let u: f64 = 1.06 / 1.05;
    assert!((u - 1.009524).abs() < 1e-6);
    for s in [1e-6, 0.3, 1.0, 1.2] {
        assert!((sol.value(s) - u).abs() < 1e-12);
    }
}

#[test]
fn case_three_signs_and_pasting_value() {
    let sol = build_constrained_solution(&table(1.0, 0.02)).unwrap();
    assert!(sol.coeff_a > 0.0);
    assert!(sol.coeff_b_plus.unwrap() < 0.0);
    assert!(sol.coeff_b_minus.unwrap() > 0.0);
    let x = sol.x_star;
    assert!((sol.value(x) - 0.8 * x).abs() < 1e-12);
    assert!((sol.value(sol.sbar) - upper_bound(&sol.params)).abs() < 1e-10);
    assert!((sol.value(1e-8) - 0.4).abs() < 1e-9);
}

#[test]
fn published_boundary_cells() {
    for (lambda, c, want) in [
        (1.0, 0.005, 0.2932),
        (100.0, 0.015, 1.0059),
        (1.0, 0.030, 1.2262),
        (100.0, 0.010, 0.6706),
        (1e4, 0.020, 1.2500),
        (1.0, 0.025, 1.2012),
        (100.0, 0.030, 1.2498),
    ] {
        let x = solve_conversion_boundary(&table(lambda, c)).unwrap();
        assert!(
            (x - want).abs() < 1e-3,
            "lambda={lambda} c={c}: {x} vs {want}"
        );
    }
    // c = qK pins the boundary to s_bar
    let p = table(1.0, 0.03);
    let x = solve_conversion_boundary(&p).unwrap();
    assert!((x - threshold_sbar(&p)).abs() < 1e-4);
}

#[test]
fn residual_brackets_published_root() {
    let p = table(1e4, 0.005);
    let a = boundary_residual(&p, 0.3396 - 5e-4).unwrap();
    let b = boundary_residual(&p, 0.3396 + 5e-4).unwrap();
    assert!(a * b < 0.0);
}

#[test]
fn column_monotone_toward_classical_boundary() {
    let alpha = (2.0f64 * 0.05).sqrt() / 0.2;
    let x_classical = alpha / (alpha - 1.0) * 0.005 / (0.8 * 0.05);
    assert!((x_classical - 0.3401).abs() < 1e-4);
    let col: Vec<f64> = [1.0, 100.0, 1e4]
        .iter()
        .map(|&l| solve_conversion_boundary(&table(l, 0.005)).unwrap())
        .collect();
    assert!(col[0] < col[1] && col[1] < col[2] && col[2] < x_classical);
    let t = reproduce_table1().unwrap();
    assert!((t.x_star[2] - 1.0203).abs() < 1e-4);
    assert!((t.limit[3] - 1.25).abs() < 1e-12);
}

#[test]
fn pasting_checks_at_reference_cell() {
    let p = table(1.0, 0.02);
    let x = solve_conversion_boundary(&p).unwrap();
    let rep = pasting_report(&p, x);
    assert!(rep.derivative_mismatch.unwrap() <= 1e-8);
    assert!(rep.derivative_below_gamma);
    assert!(rep.lower_convex);
    assert!(rep.below_conversion_payoff);
    // negative control: a 1% shift breaks the derivative match
    let off = pasting_report(&p, 1.01 * x);
    assert!(off.derivative_mismatch.unwrap() > 1e-8);
}

/// The upper piece bends upward. The finite-difference oracle, which knows
/// nothing about the closed form, shows the same sign, so the concavity
/// claim for this piece cannot hold.
#[test]
fn upper_piece_curvature_agrees_with_grid_oracle() {
    let p = table(1.0, 0.02);
    let sol = build_constrained_solution(&p).unwrap();
    let rep = pasting_report(&p, sol.x_star);
    assert!(!rep.upper_concave);
    let (lo, hi) = rep.upper_curvature_range.unwrap();
    assert!(hi > 0.0 && lo < hi);

    let g = solve_penalized_ode(&p, 4001, default_s_min(&p)).unwrap();
    let s = 0.5 * (sol.x_star + sol.sbar);
    let h = 0.01;
    let grid_curv =
        (g.interpolate(s + h) - 2.0 * g.interpolate(s) + g.interpolate(s - h)) / (h * h);
    let exact = sol.second_derivative(s);
    assert!(exact > 0.0 && grid_curv > 0.0, "{exact} {grid_curv}");
    assert!((grid_curv - exact).abs() < 0.05 * exact.abs().max(1e-3));
}

#[test]
fn classical_limits() {
    let sbar = classical_sbar(&table(1.0, 0.005));
    assert_eq!(sbar, 1.25);
    let classical = cbond_core::build_classical_solution(&table(1.0, 0.06));
    assert!((classical.value(0.5) - 1.0).abs() < 1e-12);
    let classical = cbond_core::build_classical_solution(&table(1.0, 0.04));
    assert!((classical.value(1e-9) - 0.8).abs() < 1e-8);
}

#[test]
fn ode_oracle_matches_closed_form() {
    let p = table(1.0, 0.04);
    let sol = build_constrained_solution(&p).unwrap();
    let g = solve_penalized_ode(&p, 2000, default_s_min(&p)).unwrap();
    assert!(compare_to_analytic(&g, &sol).unwrap().sup_error <= 1e-4);

    let p = table(1.0, 0.06);
    let g = solve_penalized_ode(&p, 500, default_s_min(&p)).unwrap();
    assert!(g.values.iter().all(|v| (v - 1.06 / 1.05).abs() < 1e-8));

    // the grid locates the boundary on its own
    let p = table(1.0, 0.02);
    let g =
        solve_penalized_ode_with(&p, 2000, default_s_min(&p), LeftBoundary::Asymptotic).unwrap();
    let x = solve_conversion_boundary(&p).unwrap();
    let k = g
        .nodes
        .iter()
        .zip(&g.values)
        .position(|(s, v)| *s > 0.5 && v - 0.8 * s < -1e-9)
        .unwrap();
    assert!(g.nodes[k - 1] <= x + 1e-12 && x <= g.nodes[k] + 1e-12);

    let other = build_constrained_solution(&table(2.0, 0.02)).unwrap();
    assert!(matches!(
        compare_to_analytic(&g, &other),
        Err(Error::ParamMismatch(_))
    ));
}

#[test]
fn equilibrium_rules_by_regime() {
    let s = optimal_strategy(&table(1.0, 0.04)).unwrap();
    assert_eq!((s.firm, s.investor), (Rule::StopAtTM, Rule::StopAtTM));
    let s = optimal_strategy(&table(1.0, 0.06)).unwrap();
    assert_eq!(s.firm, Rule::StopAtFirstArrival);
    let p = table(1.0, 0.02);
    let s = optimal_strategy(&p).unwrap();
    assert_eq!(
        s.investor,
        Rule::ThresholdConvert(solve_conversion_boundary(&p).unwrap())
    );
}

#[test]
fn lattice_examples() {
    let p = table(1.0, 0.06);
    let cfg = LatticeConfig::for_params(&p, 1e-2, 1e-4).unwrap();
    assert!((lattice_value(&p, &cfg, 1.0).unwrap() - 1.06 / 1.05).abs() < 2e-3);
    let p = table(1.0, 0.04);
    let cfg = LatticeConfig::for_params(&p, 5e-3, 1e-4).unwrap();
    let exact = build_constrained_solution(&p).unwrap().value(1.0);
    assert!((lattice_value(&p, &cfg, 1.0).unwrap() - exact).abs() < 5e-3);
    // lambda dt = 0.5
    let p = table(50.0, 0.02);
    let cfg = LatticeConfig::for_params(&p, 1e-2, 1e-4).unwrap();
    assert!(matches!(
        lattice_value(&p, &cfg, 1.0),
        Err(Error::Config(_))
    ));
}

#[test]
fn first_arrival_game_above_threshold() {
    let p = table(1.0, 0.02);
    let s0 = 1.6;
    let both = cbond_core::StrategyPair {
        firm: Rule::StopAtFirstArrival,
        investor: Rule::StopAtFirstArrival,
    };
    let rep = simulate_value(&p, s0, &both, 40_000, 3).unwrap();
    let want = 0.02 / 1.05 + 1.0 / 1.03 * 0.8 * s0;
    assert!((rep.estimate - want).abs() < 3.0 * rep.std_error, "{rep:?}");
}

#[test]
fn rate_slopes_by_hand() {
    let r1 = rate_check_case1(&table(1.0, 0.04)).unwrap();
    let x1 = r1.rows.iter().find(|r| r.quantity == "x1").unwrap();
    assert!((x1.closed_form + 0.025).abs() < 1e-15);
    let r2 = rate_check_case2(&table(1.0, 0.06)).unwrap();
    assert!((r2.rows[0].closed_form - 0.01).abs() < 1e-15);
    let e = |h: f64| r2.rows.iter().find(|r| r.h == h).unwrap().rel_error;
    let ratio = e(1e-3) / e(1e-4);
    assert!((ratio - 10.0).abs() < 1.0, "{ratio}");
}
