//! Behaviour as the arrival intensity grows: boundary sweeps, the reference
//! boundary table, first-order rates in `h = 1/lambda`, and convergence of
//! prices to the unconstrained ones.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::{build_classical_solution, build_constrained_solution, max_gap};
use crate::boundary::solve_conversion_boundary;
use crate::error::{Error, Result};
use crate::format::num;
use crate::params::{
    classical_coupon_threshold, classical_sbar, classify_regime, exponents, threshold_sbar,
    ModelParams, Regime,
};

pub const TABLE1_LAMBDAS: [f64; 3] = [1.0, 100.0, 10000.0];
pub const TABLE1_COUPONS: [f64; 6] = [0.005, 0.010, 0.015, 0.020, 0.025, 0.030];
pub const TABLE1_GAMMA: f64 = 0.8;
/// Published boundary values, one row per intensity.
pub const TABLE1_REFERENCE: [[f64; 6]; 3] = [
    [0.2932, 0.5863, 0.8784, 1.1179, 1.2012, 1.2262],
    [0.3353, 0.6706, 1.0059, 1.2474, 1.2495, 1.2498],
    [0.3396, 0.6792, 1.0188, 1.2500, 1.2500, 1.2500],
];
pub const TABLE1_X_STAR: [f64; 6] = [0.3401, 0.6802, 1.0203, 1.3604, 1.7005, 2.0406];
pub const TABLE1_SBAR: f64 = 1.25;
/// `(alpha-1)/alpha r K` at the table parameters, to 4 decimals.
pub const TABLE1_COUPON_THRESHOLD: f64 = 0.0184;
pub const TABLE1_TOL: f64 = 1e-3;
pub const TABLE1_NOTE: &str = "gamma = 0.8: the reference table's caption lists gamma = 1, \
but its s_bar = 1.2500 = K/gamma and its x* row both require gamma = 0.8";

/// Limit of `x^{*,lambda}` as `lambda` grows: the unconstrained boundary
/// `alpha/(alpha-1) c/(gamma r)` below the coupon threshold, `K/gamma` above.
pub fn limit_target(p: &ModelParams) -> f64 {
    let alpha = exponents(p).alpha_plus;
    if p.c() <= classical_coupon_threshold(p) {
        alpha / (alpha - 1.0) * p.c() / (p.gamma() * p.r())
    } else {
        classical_sbar(p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    #[serde(with = "num")]
    pub lambda: f64,
    #[serde(with = "num")]
    pub c: f64,
    #[serde(with = "num::option")]
    pub x_star_lambda: Option<f64>,
    #[serde(with = "num")]
    pub s_bar_lambda: f64,
    #[serde(with = "num")]
    pub limit_target: f64,
    #[serde(with = "num::option")]
    pub gap: Option<f64>,
    /// Set when the row could not be solved.
    pub error: Option<String>,
}

/// Boundary for every `(lambda, c)` pair, sorted by coupon then intensity.
/// A failing pair gives a row with `error` set instead of aborting.
pub fn boundary_sweep(template: &ModelParams, lambdas: &[f64], coupons: &[f64]) -> Vec<SweepRow> {
    let mut cs = coupons.to_vec();
    cs.sort_by(f64::total_cmp);
    let mut ls = lambdas.to_vec();
    ls.sort_by(f64::total_cmp);
    let pairs: Vec<(f64, f64)> = cs
        .iter()
        .flat_map(|&c| ls.iter().map(move |&l| (l, c)))
        .collect();
    pairs
        .par_iter()
        .map(|&(lambda, c)| sweep_row(template, lambda, c))
        .collect()
}

fn sweep_row(template: &ModelParams, lambda: f64, c: f64) -> SweepRow {
    let failed = |e: Error, s_bar_lambda: f64, limit: f64| SweepRow {
        lambda,
        c,
        x_star_lambda: None,
        s_bar_lambda,
        limit_target: limit,
        gap: None,
        error: Some(e.to_string()),
    };
    let p = match template.with_lambda(lambda).and_then(|p| p.with_coupon(c)) {
        Ok(p) => p,
        Err(e) => return failed(e, f64::NAN, f64::NAN),
    };
    let (sbar, limit) = (threshold_sbar(&p), limit_target(&p));
    if classify_regime(&p) != Regime::CaseIII {
        let e = Error::Domain(vec![format!("c = {c} is not in Case III")]);
        return failed(e, sbar, limit);
    }
    match solve_conversion_boundary(&p) {
        Ok(x) => SweepRow {
            lambda,
            c,
            x_star_lambda: Some(x),
            s_bar_lambda: sbar,
            limit_target: limit,
            gap: Some((x - limit).abs()),
            error: None,
        },
        Err(e) => failed(e, sbar, limit),
    }
}

/// Violations of "gap non-increasing and `x^{*,lambda}` non-decreasing in
/// `lambda`" within each coupon column, with `1e-9` slack.
pub fn sweep_monotonicity_violations(rows: &[SweepRow]) -> Vec<String> {
    let mut out = Vec::new();
    for w in rows.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        if a.c != b.c {
            continue;
        }
        if let (Some(xa), Some(xb), Some(ga), Some(gb)) =
            (a.x_star_lambda, b.x_star_lambda, a.gap, b.gap)
        {
            if xb < xa - 1e-9 || gb > ga + 1e-9 {
                out.push(format!(
                    "c={}: lambda {} -> {} gives x {xa} -> {xb}, gap {ga} -> {gb}",
                    a.c, a.lambda, b.lambda
                ));
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table1 {
    #[serde(with = "num")]
    pub gamma: f64,
    pub note: String,
    pub lambdas: Vec<f64>,
    pub coupons: Vec<f64>,
    /// `cells[i][j]` is the boundary at `lambdas[i]`, `coupons[j]`.
    pub cells: Vec<Vec<f64>>,
    /// `alpha/(alpha-1) c/(gamma r)` for every coupon, as printed in the
    /// reference even where it exceeds `s_bar`.
    pub x_star: Vec<f64>,
    pub s_bar: Vec<f64>,
    /// Large-intensity limit: `x_star` below the coupon threshold, `s_bar`
    /// above it.
    pub limit: Vec<f64>,
}

impl Table1 {
    /// Cells further than the tolerance from the reference values.
    pub fn mismatches(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut check = |label: String, got: f64, want: f64| {
            if !((got - want).abs() <= TABLE1_TOL) {
                out.push(format!("{label}: got {got:.6}, expected {want:.4}"));
            }
        };
        for (i, row) in self.cells.iter().enumerate() {
            for (j, &x) in row.iter().enumerate() {
                check(
                    format!("lambda={} c={}", self.lambdas[i], self.coupons[j]),
                    x,
                    TABLE1_REFERENCE[i][j],
                );
            }
        }
        for (j, &x) in self.x_star.iter().enumerate() {
            check(format!("x* c={}", self.coupons[j]), x, TABLE1_X_STAR[j]);
        }
        for (j, &x) in self.s_bar.iter().enumerate() {
            check(format!("s_bar c={}", self.coupons[j]), x, TABLE1_SBAR);
        }
        for (j, &x) in self.limit.iter().enumerate() {
            let want = if self.coupons[j] <= TABLE1_COUPON_THRESHOLD {
                TABLE1_X_STAR[j]
            } else {
                TABLE1_SBAR
            };
            check(format!("limit c={}", self.coupons[j]), x, want);
        }
        out
    }

    pub fn verify(&self) -> Result<()> {
        let m = self.mismatches();
        if m.is_empty() {
            Ok(())
        } else {
            Err(Error::Mismatch(m))
        }
    }

    /// Rows `lambda=...`, `x*`, `s_bar`; one column per coupon.
    pub fn to_csv(&self) -> String {
        use crate::format::csv_num;
        let mut out = format!("# {}\n", self.note);
        out.push_str("row");
        for c in &self.coupons {
            out.push_str(&format!(",c={}", csv_num(*c)));
        }
        out.push('\n');
        let mut line = |label: String, xs: &[f64]| {
            out.push_str(&label);
            for x in xs {
                out.push(',');
                out.push_str(&csv_num(*x));
            }
            out.push('\n');
        };
        for (l, row) in self.lambdas.iter().zip(&self.cells) {
            line(format!("lambda={}", csv_num(*l)), row);
        }
        line("x*".into(), &self.x_star);
        line("s_bar".into(), &self.s_bar);
        line("limit".into(), &self.limit);
        out
    }
}

/// Boundary table at `K = 1, r = 0.05, q = 0.03, sigma = 0.2, gamma = 0.8`.
pub fn reproduce_table1() -> Result<Table1> {
    let template = ModelParams::table1(1.0, TABLE1_COUPONS[0])?;
    let rows = boundary_sweep(&template, &TABLE1_LAMBDAS, &TABLE1_COUPONS);
    let mut cells = vec![vec![f64::NAN; TABLE1_COUPONS.len()]; TABLE1_LAMBDAS.len()];
    for row in &rows {
        let i = TABLE1_LAMBDAS
            .iter()
            .position(|&l| l == row.lambda)
            .expect("lambda");
        let j = TABLE1_COUPONS
            .iter()
            .position(|&c| c == row.c)
            .expect("coupon");
        cells[i][j] = match (row.x_star_lambda, &row.error) {
            (Some(x), _) => x,
            (None, Some(e)) => {
                return Err(Error::Mismatch(vec![format!(
                    "lambda={} c={}: {e}",
                    row.lambda, row.c
                )]))
            }
            (None, None) => unreachable!("row without value or error"),
        };
    }
    let mut x_star = Vec::new();
    let mut s_bar = Vec::new();
    let mut limit = Vec::new();
    for &c in &TABLE1_COUPONS {
        let p = template.with_coupon(c)?;
        let alpha = exponents(&p).alpha_plus;
        x_star.push(alpha / (alpha - 1.0) * c / (p.gamma() * p.r()));
        s_bar.push(classical_sbar(&p));
        limit.push(limit_target(&p));
    }
    Ok(Table1 {
        gamma: TABLE1_GAMMA,
        note: TABLE1_NOTE.into(),
        lambdas: TABLE1_LAMBDAS.to_vec(),
        coupons: TABLE1_COUPONS.to_vec(),
        cells,
        x_star,
        s_bar,
        limit,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub quantity: String,
    #[serde(with = "num")]
    pub h: f64,
    /// `(f(h) - f(0)) / h`.
    #[serde(with = "num")]
    pub finite_difference: f64,
    #[serde(with = "num")]
    pub closed_form: f64,
    #[serde(with = "num")]
    pub rel_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub regime: Regime,
    pub rows: Vec<RateRow>,
    /// Least-squares slope of `ln |x1_h - s_bar|` against `ln h` (Case I).
    #[serde(with = "num::option")]
    pub loglog_slope: Option<f64>,
}

impl RateReport {
    /// Rows at `h` whose relative error exceeds `tol`.
    pub fn failures_at(&self, h: f64, tol: f64) -> Vec<&RateRow> {
        self.rows
            .iter()
            .filter(|r| r.h == h && !(r.rel_error <= tol))
            .collect()
    }
}

pub const RATE_STEPS: [f64; 3] = [1e-2, 1e-3, 1e-4];

fn at_h(p: &ModelParams, h: f64) -> Result<ModelParams> {
    p.with_lambda(1.0 / h)
}

fn rate_rows(
    name: &str,
    closed_form: f64,
    f0: f64,
    f: impl Fn(f64) -> Result<f64>,
) -> Result<Vec<RateRow>> {
    RATE_STEPS
        .iter()
        .map(|&h| {
            let fd = (f(h)? - f0) / h;
            Ok(RateRow {
                quantity: name.to_string(),
                h,
                finite_difference: fd,
                closed_form,
                rel_error: ((fd - closed_form) / closed_form).abs(),
            })
        })
        .collect()
}

fn require(p: &ModelParams, regime: Regime) -> Result<()> {
    let got = classify_regime(p);
    if got == regime {
        Ok(())
    } else {
        Err(Error::Domain(vec![format!(
            "expected Case {regime} parameters, got Case {got}"
        )]))
    }
}

/// Log-spaced steps in `[1e-4, 1e-1]`, four per decade.
pub fn slope_steps() -> Vec<f64> {
    (0..=12)
        .map(|i| 10f64.powf(-4.0 + 0.25 * i as f64))
        .collect()
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let cov: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let var: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    cov / var
}

/// `x1_h -> s_bar` at rate `h` with slope `-(r-q) s_bar`; `A1_h` with slope
/// `[(alpha-1) r - alpha q] A1`; `v1_h(s)` for `s >= s_bar` with slope
/// `c - q gamma s` (checked at `s = 1.2 s_bar`).
pub fn rate_check_case1(p: &ModelParams) -> Result<RateReport> {
    require(p, Regime::CaseI)?;
    let (r, q, c, gamma) = (p.r(), p.q(), p.c(), p.gamma());
    let sbar = classical_sbar(p);
    let alpha = exponents(p).alpha_plus;
    let a1 = build_classical_solution(p).coeff;
    let s = 1.2 * sbar;

    let mut rows = rate_rows("x1", -(r - q) * sbar, sbar, |h| {
        Ok(threshold_sbar(&at_h(p, h)?))
    })?;
    rows.extend(rate_rows(
        "A1",
        ((alpha - 1.0) * r - alpha * q) * a1,
        a1,
        |h| Ok(build_constrained_solution(&at_h(p, h)?)?.coeff_a),
    )?);
    rows.extend(rate_rows(
        &format!("v1(s={})", crate::format::sig(s, 6)),
        c - q * gamma * s,
        gamma * s,
        |h| Ok(build_constrained_solution(&at_h(p, h)?)?.value(s)),
    )?);

    let hs = slope_steps();
    let gaps = hs
        .iter()
        .map(|&h| Ok((threshold_sbar(&at_h(p, h)?) - sbar).abs()))
        .collect::<Result<Vec<f64>>>()?;
    Ok(RateReport {
        regime: Regime::CaseI,
        rows,
        loglog_slope: Some(loglog_slope(&hs, &gaps)),
    })
}

/// `v2_h = (c h + K)/(r h + 1)` below `s_bar`, slope `c - r K` at `h = 0`.
pub fn rate_check_case2(p: &ModelParams) -> Result<RateReport> {
    require(p, Regime::CaseII)?;
    let s = 0.5 * classical_sbar(p);
    let rows = rate_rows("v2", p.c() - p.r() * p.k(), p.k(), |h| {
        Ok(build_constrained_solution(&at_h(p, h)?)?.value(s))
    })?;
    Ok(RateReport {
        regime: Regime::CaseII,
        rows,
        loglog_slope: None,
    })
}

/// Empirical slope of `ln |x^{*,1/h} - limit|` against `ln h` in Case III.
/// Reported only; no target rate is known.
pub fn case_three_rate(p: &ModelParams) -> Result<f64> {
    require(p, Regime::CaseIII)?;
    let limit = limit_target(p);
    let hs = slope_steps();
    let gaps = hs
        .iter()
        .map(|&h| Ok((solve_conversion_boundary(&at_h(p, h)?)? - limit).abs()))
        .collect::<Result<Vec<f64>>>()?;
    Ok(loglog_slope(&hs, &gaps))
}

pub const PRICE_LAMBDAS: [f64; 5] = [1.0, 10.0, 100.0, 1e3, 1e4];

/// 50 spots `0.04, 0.08, ..., 2.0` scaled by `K`.
pub fn price_grid(p: &ModelParams) -> Vec<f64> {
    (1..=50).map(|i| 0.04 * i as f64 * p.k()).collect()
}

/// `max_s |v^lambda(s) - v(s)|` over `grid` for each intensity.
pub fn price_convergence(
    p: &ModelParams,
    lambdas: &[f64],
    grid: &[f64],
) -> Result<Vec<(f64, f64)>> {
    let classical = build_classical_solution(p);
    lambdas
        .iter()
        .map(|&l| {
            let q = p.with_lambda(l)?;
            let sol = build_constrained_solution(&q)?;
            let mut cl = classical.clone();
            cl.params = q;
            Ok((l, max_gap(&sol, &cl, grid)?))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FigureData {
    pub spots: Vec<f64>,
    pub lambdas: Vec<f64>,
    /// `values[i][k]`: constrained price at `lambdas[i]`, `spots[k]`.
    pub values: Vec<Vec<f64>>,
    pub classical: Vec<f64>,
    /// `(lambda, x^{*,lambda} or s_bar^lambda)`.
    pub boundaries: Vec<(f64, f64)>,
    pub classical_boundary: f64,
}

impl FigureData {
    /// One row per spot: `s`, a column per intensity, the classical price,
    /// and a marker column naming the boundaries crossed in that cell.
    pub fn to_csv(&self) -> String {
        use crate::format::csv_num;
        let mut out = String::from("s");
        for l in &self.lambdas {
            out.push_str(&format!(",v_lambda={}", csv_num(*l)));
        }
        out.push_str(",v_classical,markers\n");
        for (k, &s) in self.spots.iter().enumerate() {
            out.push_str(&csv_num(s));
            for row in &self.values {
                out.push(',');
                out.push_str(&csv_num(row[k]));
            }
            out.push(',');
            out.push_str(&csv_num(self.classical[k]));
            let prev = if k == 0 { 0.0 } else { self.spots[k - 1] };
            let mut marks: Vec<String> = self
                .boundaries
                .iter()
                .filter(|(_, x)| *x > prev && *x <= s)
                .map(|(l, _)| format!("boundary_lambda={}", csv_num(*l)))
                .collect();
            if self.classical_boundary > prev && self.classical_boundary <= s {
                marks.push("boundary_classical".into());
            }
            out.push(',');
            out.push_str(&marks.join(";"));
            out.push('\n');
        }
        out
    }
}

pub fn figure_data(p: &ModelParams, lambdas: &[f64], spots: &[f64]) -> Result<FigureData> {
    let classical = build_classical_solution(p);
    let mut values = Vec::new();
    let mut boundaries = Vec::new();
    for &l in lambdas {
        let sol = build_constrained_solution(&p.with_lambda(l)?)?;
        values.push(spots.iter().map(|&s| sol.value(s)).collect());
        boundaries.push((l, sol.x_star));
    }
    Ok(FigureData {
        spots: spots.to_vec(),
        lambdas: lambdas.to_vec(),
        values,
        classical: spots.iter().map(|&s| classical.value(s)).collect(),
        boundaries,
        classical_boundary: classical.x3,
    })
}
