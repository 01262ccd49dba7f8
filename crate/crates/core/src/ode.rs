//! Finite-difference oracle for the penalized ODE
//! `-L0 v = c + lambda (gamma s - v)^+ - lambda (v - K)^+` on `(s_min, s_bar)`,
//! with `v(s_bar) = U`.
//!
//! The grid is uniform in `z = ln s`, where `L0` has constant coefficients
//! `sigma^2/2 d_zz + (r - q - sigma^2/2) d_z - r`. The two penalty terms are
//! handled by policy iteration: freeze the sets `{v < gamma s}` and `{v > K}`,
//! solve the linear tridiagonal system, repeat until the sets stop changing.
//!
//! Nothing here uses the closed-form solution.

use serde::{Deserialize, Serialize};

use crate::analytic::AnalyticSolution;
use crate::error::{Error, Result};
use crate::params::{classify_regime, exponents, threshold_sbar, upper_bound, ModelParams, Regime};

pub const MIN_NODES: usize = 100;
pub const MAX_POLICY_ITERATIONS: usize = 200;
pub const UPDATE_TOL: f64 = 1e-10;
/// Largest `dz * sqrt(2 lambda) / sigma` at which the interface correction is applied.
pub const LAYER_RESOLUTION: f64 = 0.5;

/// Condition imposed at `s_min`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LeftBoundary {
    /// `v(s_min) = c/r` (Cases I/III) or `U` (Case II).
    Dirichlet,
    /// Bounded-solution condition `v_z = alpha (v - c/r)` (Cases I/III), i.e.
    /// `v - c/r` behaves like `s^alpha` near zero; Case II keeps `v = U`.
    Asymptotic,
}

/// `s_bar * e^-6`.
pub fn default_s_min(p: &ModelParams) -> f64 {
    threshold_sbar(p) * (-6.0f64).exp()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSolution {
    pub params: ModelParams,
    pub regime: Regime,
    pub left: LeftBoundary,
    /// Spot values, log-spaced on `[s_min, s_bar]`.
    pub nodes: Vec<f64>,
    pub values: Vec<f64>,
    pub iterations: usize,
    /// Sup-norm of the discrete nonlinear residual at the returned values.
    pub residual_norm: f64,
}

impl GridSolution {
    pub fn s_min(&self) -> f64 {
        self.nodes[0]
    }

    pub fn step(&self) -> f64 {
        (self.nodes[1] / self.nodes[0]).ln()
    }

    /// Linear interpolation in `ln s`.
    pub fn interpolate(&self, s: f64) -> f64 {
        let z0 = self.nodes[0].ln();
        let dz = self.step();
        let n = self.nodes.len();
        let t = ((s.ln() - z0) / dz).clamp(0.0, (n - 1) as f64);
        let i = (t.floor() as usize).min(n - 2);
        let w = t - i as f64;
        self.values[i] * (1.0 - w) + self.values[i + 1] * w
    }
}

/// Solves `a_i x_{i-1} + b_i x_i + c_i x_{i+1} = d_i` (Thomas algorithm).
/// `a[0]` and `c[n-1]` are ignored.
pub fn solve_tridiagonal(a: &[f64], b: &[f64], c: &[f64], d: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut cp = vec![0.0; n];
    let mut dp = vec![0.0; n];
    cp[0] = c[0] / b[0];
    dp[0] = d[0] / b[0];
    for i in 1..n {
        let m = b[i] - a[i] * cp[i - 1];
        cp[i] = if i + 1 < n { c[i] / m } else { 0.0 };
        dp[i] = (d[i] - a[i] * dp[i - 1]) / m;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = dp[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = dp[i] - cp[i] * x[i + 1];
    }
    x
}

/// Off-diagonal weights of `L0` on the `z` grid: `(lower, upper, central)`.
/// Central differences, falling back to upwinding for the drift when the
/// central scheme loses monotonicity.
fn stencil(p: &ModelParams, dz: f64) -> (f64, f64, bool) {
    let diff = 0.5 * p.sigma() * p.sigma() / (dz * dz);
    let nu = p.log_drift();
    let half = nu / (2.0 * dz);
    if diff >= half.abs() {
        (diff - half, diff + half, true)
    } else if nu > 0.0 {
        (diff, diff + nu / dz, false)
    } else {
        (diff - nu / dz, diff, false)
    }
}

struct Problem {
    lower: f64,
    upper: f64,
    r: f64,
    lambda: f64,
    c: f64,
    gamma: f64,
    k: f64,
    alpha: f64,
    dz: f64,
    left: LeftBoundary,
    left_value: f64,
    right_value: f64,
    sigma2: f64,
    nu: f64,
    central: bool,
}

impl Problem {
    /// `-L0 v - c - lambda (gamma s - v)^+ + lambda (v - K)^+` at interior node `i`.
    fn residual(&self, s: &[f64], v: &[f64], i: usize) -> f64 {
        let l0 = self.lower * v[i - 1] + self.upper * v[i + 1]
            - (self.lower + self.upper + self.r) * v[i];
        -l0 - self.c - self.lambda * (self.gamma * s[i] - v[i]).max(0.0)
            + self.lambda * (v[i] - self.k).max(0.0)
    }

    /// Where a penalty switches on between two nodes, `v'''` jumps by
    /// `-+ 2 lambda |g'(xi)| / sigma^2` (`g = gamma s - v` or `v - K`), and the
    /// central differences of the two neighbouring nodes pick up an O(dz)
    /// error. Returns the per-node correction to subtract from the operator.
    /// Skipped when the penalty boundary layer, of width
    /// `sigma / sqrt(2 lambda)`, is not resolved by the grid.
    fn interface_corrections(&self, s: &[f64], v: &[f64]) -> Vec<f64> {
        let n = v.len();
        let mut corr = vec![0.0; n];
        if !self.central || self.dz * (2.0 * self.lambda / self.sigma2).sqrt() > LAYER_RESOLUTION {
            return corr;
        }
        let h = self.dz;
        let mut add = |g: &dyn Fn(usize) -> f64, sign: f64| {
            for i in 0..n - 1 {
                let (g0, g1) = (g(i), g(i + 1));
                if (g0 > 0.0) == (g1 > 0.0) {
                    continue;
                }
                let b = h * g0 / (g0 - g1);
                let a = h - b;
                let slope = ((g1 - g0) / h).abs();
                let jump = sign * 2.0 * self.lambda * slope / self.sigma2;
                if i > 0 {
                    corr[i] += jump
                        * a.powi(3)
                        * (0.5 * self.sigma2 / (6.0 * h * h) + self.nu / (12.0 * h));
                }
                if i + 1 < n - 1 {
                    corr[i + 1] += jump
                        * b.powi(3)
                        * (0.5 * self.sigma2 / (6.0 * h * h) - self.nu / (12.0 * h));
                }
            }
        };
        add(&|i| self.gamma * s[i] - v[i], -1.0);
        add(&|i| v[i] - self.k, 1.0);
        corr
    }

    fn left_ghost(&self, v0: f64, v1: f64) -> f64 {
        v1 - 2.0 * self.dz * self.alpha * (v0 - self.c / self.r)
    }

    fn nonlinear_residual(&self, s: &[f64], v: &[f64]) -> f64 {
        let n = v.len();
        let corr = self.interface_corrections(s, v);
        let mut worst = (v[n - 1] - self.right_value).abs();
        for (i, e) in corr.iter().enumerate().take(n - 1).skip(1) {
            worst = worst.max((self.residual(s, v, i) + e).abs());
        }
        match self.left {
            LeftBoundary::Dirichlet => worst.max((v[0] - self.left_value).abs()),
            LeftBoundary::Asymptotic => {
                let ghost = self.left_ghost(v[0], v[1]);
                let ext = [ghost, v[0], v[1]];
                let s_ext = [s[0], s[0], s[1]];
                worst.max(self.residual(&s_ext, &ext, 1).abs())
            }
        }
    }

    /// Linear system for frozen active sets.
    fn solve_frozen(&self, s: &[f64], convert: &[bool], call: &[bool], corr: &[f64]) -> Vec<f64> {
        let n = s.len();
        let mut a = vec![0.0; n];
        let mut b = vec![0.0; n];
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        let diag = self.lower + self.upper + self.r;
        for i in 0..n {
            let mut bi = diag;
            let mut di = self.c - corr[i];
            if convert[i] {
                bi += self.lambda;
                di += self.lambda * self.gamma * s[i];
            }
            if call[i] {
                bi += self.lambda;
                di += self.lambda * self.k;
            }
            a[i] = -self.lower;
            b[i] = bi;
            c[i] = -self.upper;
            d[i] = di;
        }
        match self.left {
            LeftBoundary::Dirichlet => {
                b[0] = 1.0;
                c[0] = 0.0;
                d[0] = self.left_value;
            }
            LeftBoundary::Asymptotic => {
                // ghost v_{-1} = v_1 - 2 dz alpha (v_0 - c/r) substituted into row 0
                let g = 2.0 * self.dz * self.alpha;
                b[0] += self.lower * g;
                d[0] += self.lower * g * self.c / self.r;
                c[0] = -(self.upper + self.lower);
            }
        }
        a[n - 1] = 0.0;
        b[n - 1] = 1.0;
        d[n - 1] = self.right_value;
        solve_tridiagonal(&a, &b, &c, &d)
    }
}

/// Solves the penalized ODE with the asymptotic left condition. With the
/// Dirichlet value the error stalls at `|A| s_min^alpha` instead of
/// shrinking with the grid.
pub fn solve_penalized_ode(p: &ModelParams, n_nodes: usize, s_min: f64) -> Result<GridSolution> {
    solve_penalized_ode_with(p, n_nodes, s_min, LeftBoundary::Asymptotic)
}

pub fn solve_penalized_ode_with(
    p: &ModelParams,
    n_nodes: usize,
    s_min: f64,
    left: LeftBoundary,
) -> Result<GridSolution> {
    let sbar = threshold_sbar(p);
    if n_nodes < MIN_NODES {
        return Err(Error::Config(format!(
            "need at least {MIN_NODES} nodes (got {n_nodes})"
        )));
    }
    if !(s_min > 0.0 && s_min < sbar) {
        return Err(Error::Config(format!(
            "s_min must lie in (0, {sbar}) (got {s_min})"
        )));
    }
    let regime = classify_regime(p);
    let z0 = s_min.ln();
    let dz = (sbar.ln() - z0) / (n_nodes - 1) as f64;
    let mut s: Vec<f64> = (0..n_nodes).map(|i| (z0 + i as f64 * dz).exp()).collect();
    s[0] = s_min;
    s[n_nodes - 1] = sbar;
    let (lower, upper, central) = stencil(p, dz);
    let u = upper_bound(p);
    let (left, left_value) = match regime {
        Regime::CaseII => (LeftBoundary::Dirichlet, u),
        _ => (left, p.c() / p.r()),
    };
    let prob = Problem {
        lower,
        upper,
        r: p.r(),
        lambda: p.lambda(),
        c: p.c(),
        gamma: p.gamma(),
        k: p.k(),
        alpha: exponents(p).alpha_plus,
        dz,
        left,
        left_value,
        right_value: u,
        sigma2: p.sigma() * p.sigma(),
        nu: p.log_drift(),
        central,
    };

    let mut convert = vec![false; n_nodes];
    let mut call = vec![false; n_nodes];
    let mut corr = vec![0.0; n_nodes];
    let mut v = prob.solve_frozen(&s, &convert, &call, &corr);
    let mut last_update = f64::INFINITY;
    for iteration in 1..=MAX_POLICY_ITERATIONS {
        let mut changed = false;
        for i in 0..n_nodes {
            let cv = p.gamma() * s[i] > v[i];
            let cl = v[i] > p.k();
            changed |= cv != convert[i] || cl != call[i];
            convert[i] = cv;
            call[i] = cl;
        }
        corr = prob.interface_corrections(&s, &v);
        let next = prob.solve_frozen(&s, &convert, &call, &corr);
        last_update = next
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        v = next;
        if !changed && last_update < UPDATE_TOL {
            let residual_norm = prob.nonlinear_residual(&s, &v);
            return Ok(GridSolution {
                params: *p,
                regime,
                left,
                nodes: s,
                values: v,
                iterations: iteration,
                residual_norm,
            });
        }
    }
    Err(Error::NoConvergence {
        iterations: MAX_POLICY_ITERATIONS,
        last_residual: last_update,
    })
}

/// Grid-versus-closed-form comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub n_nodes: usize,
    pub sup_error: f64,
    /// `sqrt(sum e_i^2 dz)` over interior nodes.
    pub l2_error: f64,
    /// Spot where the sup error is attained.
    pub worst_node: f64,
    /// `|A| s_min^alpha`: size of the term a Dirichlet value `c/r` at `s_min`
    /// neglects (zero in Case II).
    pub truncation_bound: f64,
    /// `log2(sup_coarse / sup_fine)` when produced by [`convergence_study`].
    pub order: Option<f64>,
    pub coarse_sup_error: Option<f64>,
}

pub fn compare_to_analytic(g: &GridSolution, sol: &AnalyticSolution) -> Result<ErrorReport> {
    if g.params != sol.params {
        return Err(Error::ParamMismatch(format!(
            "grid built for {:?}, closed form for {:?}",
            g.params.raw(),
            sol.params.raw()
        )));
    }
    let n = g.nodes.len();
    let dz = g.step();
    let mut sup = 0.0f64;
    let mut worst = g.nodes[0];
    let mut sq = 0.0;
    for i in 1..n - 1 {
        let e = (g.values[i] - sol.value(g.nodes[i])).abs();
        if e > sup {
            sup = e;
            worst = g.nodes[i];
        }
        sq += e * e * dz;
    }
    let truncation_bound = match sol.regime {
        Regime::CaseII => 0.0,
        _ => sol.coeff_a.abs() * (sol.exponents.alpha_plus * g.s_min().ln()).exp(),
    };
    Ok(ErrorReport {
        n_nodes: n,
        sup_error: sup,
        l2_error: sq.sqrt(),
        worst_node: worst,
        truncation_bound,
        order: None,
        coarse_sup_error: None,
    })
}

/// Errors below this are rounding noise and carry no order information.
pub const ORDER_FLOOR: f64 = 1e-12;

/// Solves on `n_coarse` and `2 n_coarse - 1` nodes (the fine grid contains the
/// coarse one) and estimates the order from the two sup errors.
pub fn convergence_study(
    p: &ModelParams,
    sol: &AnalyticSolution,
    n_coarse: usize,
    s_min: f64,
    left: LeftBoundary,
) -> Result<ErrorReport> {
    let coarse = solve_penalized_ode_with(p, n_coarse, s_min, left)?;
    let fine = solve_penalized_ode_with(p, 2 * n_coarse - 1, s_min, left)?;
    let ec = compare_to_analytic(&coarse, sol)?;
    let mut ef = compare_to_analytic(&fine, sol)?;
    if ec.sup_error > ORDER_FLOOR && ef.sup_error > ORDER_FLOOR {
        ef.order = Some((ec.sup_error / ef.sup_error).log2());
    }
    ef.coarse_sup_error = Some(ec.sup_error);
    Ok(ef)
}
