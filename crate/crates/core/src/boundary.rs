//! Case III conversion boundary `x*`.
//!
//! Continuity, smooth pasting and the value `U` at `s_bar` reduce to one
//! algebraic equation in `x`. In polynomial form it carries
//! `x^(beta+ - beta-)`, which overflows once `lambda` reaches `1e4`. The
//! solver works with the equivalent form
//!
//! ```text
//! [y^D - 1] [(alpha - lambda/(q+lambda)) gamma x - alpha c/r - beta+ m(x)] - D m(x) = 0
//! y = x / s_bar,  D = beta+ - beta-,  m(x) = q gamma x/(q+lambda) - c/(r+lambda)
//! ```
//!
//! where `y <= 1`, so `y^D` can only underflow.

use serde::{Deserialize, Serialize};

use crate::analytic::AnalyticSolution;
use crate::error::{Error, Result};
use crate::params::{classify_regime, exponents, threshold_sbar, ModelParams, Regime};

/// Number of log-spaced probes used to bracket the root in `y`.
pub const PROBES: usize = 64;
/// Smallest probed `y = x / s_bar`.
pub const MIN_RATIO: f64 = 1e-12;
/// Target bracket width in `y`.
pub const RATIO_TOL: f64 = 1e-13;
/// Relative tolerance of the pasting checks.
pub const PASTING_TOL: f64 = 1e-8;

/// Coefficients of `C1 x^(D+1) + C2 x^D + C3 x + C4 = 0`.
///
/// `C3` and `C4` contain the factor `s_bar^D`; they are stored divided by it
/// (`c3_scaled`, `c4_scaled`), with `ln(s_bar^D)` in `log_scale`, so that the
/// struct stays finite for every `lambda`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryCoefficients {
    pub c1: f64,
    pub c2: f64,
    pub c3_scaled: f64,
    pub c4_scaled: f64,
    pub log_scale: f64,
}

impl BoundaryCoefficients {
    /// Unscaled `C3`, `C4` (may be infinite for large `lambda`).
    pub fn c3(&self) -> f64 {
        self.c3_scaled * self.log_scale.exp()
    }

    pub fn c4(&self) -> f64 {
        self.c4_scaled * self.log_scale.exp()
    }

    /// Polynomial divided by `s_bar^D`, evaluated with plain powers.
    pub fn scaled_polynomial(&self, p: &ModelParams, x: f64) -> f64 {
        let e = exponents(p);
        let delta = e.beta_plus - e.beta_minus;
        let sbar = threshold_sbar(p);
        let y_pow = (x / sbar).powf(delta);
        y_pow * (self.c1 * x + self.c2) + self.c3_scaled * x + self.c4_scaled
    }
}

pub fn boundary_coefficients(p: &ModelParams) -> BoundaryCoefficients {
    let e = exponents(p);
    let (r, q, lam, c, gamma) = (p.r(), p.q(), p.lambda(), p.c(), p.gamma());
    let alpha = e.alpha_plus;
    let w = lam / (q + lam);
    let v = q / (q + lam);
    BoundaryCoefficients {
        c1: (alpha - w - v * e.beta_plus) * gamma,
        c2: -(alpha * c / r - c / (r + lam) * e.beta_plus),
        c3_scaled: -(alpha - w - v * e.beta_minus) * gamma,
        c4_scaled: alpha * c / r - c / (r + lam) * e.beta_minus,
        log_scale: (e.beta_plus - e.beta_minus) * threshold_sbar(p).ln(),
    }
}

/// Residual pieces at `x`: the value and a magnitude used to scale tolerances.
fn residual_parts(p: &ModelParams, x: f64) -> (f64, f64) {
    let e = exponents(p);
    let (r, q, lam, c, gamma) = (p.r(), p.q(), p.lambda(), p.c(), p.gamma());
    let alpha = e.alpha_plus;
    let delta = e.beta_plus - e.beta_minus;
    let y = x / threshold_sbar(p);
    let m = q / (q + lam) * gamma * x - c / (r + lam);
    let linear = (alpha - lam / (q + lam)) * gamma * x;
    let constant = alpha * c / r;
    let second = linear - constant - e.beta_plus * m;
    let first = (delta * y.ln()).exp_m1();
    let value = first * second - delta * m;
    let scale = [linear, constant, e.beta_plus * m, delta * m]
        .iter()
        .fold(0.0f64, |acc, t| acc.max(t.abs()));
    (value, scale)
}

/// Rearranged free-boundary residual at `x` in `(0, s_bar]`.
pub fn boundary_residual(p: &ModelParams, x: f64) -> Result<f64> {
    let sbar = threshold_sbar(p);
    if !(x > 0.0 && x <= sbar) {
        return Err(Error::Domain(vec![format!(
            "boundary candidate must lie in (0, {sbar}] (got {x})"
        )]));
    }
    Ok(residual_parts(p, x).0)
}

/// Solved boundary with diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryRoot {
    pub x_star: f64,
    pub residual: f64,
    /// Tolerance scale for `residual` (largest term of the equation).
    pub residual_scale: f64,
    /// Final bracket width in `x`.
    pub bracket_width: f64,
    /// Sign changes seen on the probe grid; the root is unique when this is 1.
    pub sign_changes: usize,
}

/// Probe grid `y_i`, log-spaced on `[MIN_RATIO, 1]`.
fn probes() -> impl Iterator<Item = f64> {
    let lo = MIN_RATIO.ln();
    (0..PROBES).map(move |i| {
        if i == PROBES - 1 {
            1.0
        } else {
            (lo * (1.0 - i as f64 / (PROBES - 1) as f64)).exp()
        }
    })
}

/// Brackets `[y_lo, y_hi]` (in `y = x / s_bar`) over which the residual changes
/// sign, scanning the probe grid from small to large `y`. A right endpoint at
/// which the residual vanishes to rounding counts as a sign change.
pub fn bracket_roots(p: &ModelParams) -> Vec<(f64, f64)> {
    let sbar = threshold_sbar(p);
    let eval = |y: f64| {
        let (f, scale) = residual_parts(p, y * sbar);
        if f.abs() <= 1e-13 * scale {
            0.0
        } else {
            f
        }
    };
    let ys: Vec<f64> = probes().collect();
    let fs: Vec<f64> = ys.iter().map(|&y| eval(y)).collect();
    let mut out = Vec::new();
    for i in 0..ys.len() - 1 {
        let (a, b) = (fs[i], fs[i + 1]);
        let last = i + 1 == ys.len() - 1;
        if (a > 0.0 && b < 0.0) || (a < 0.0 && b > 0.0) || (a != 0.0 && b == 0.0 && last) {
            out.push((ys[i], ys[i + 1]));
        }
    }
    out
}

/// Illinois-style false position with bisection fallback on `[a, b]`,
/// `f(a) f(b) <= 0`. Returns the final bracket.
fn refine<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let mut fa = f(a);
    let mut fb = f(b);
    if fa == 0.0 {
        return (a, a);
    }
    if fb == 0.0 {
        return (b, b);
    }
    let mut side = 0i8;
    let mut slow_steps = 0;
    for _ in 0..400 {
        let width = b - a;
        if width <= tol {
            break;
        }
        let mut x = if slow_steps >= 2 {
            slow_steps = 0;
            0.5 * (a + b)
        } else {
            (a * fb - b * fa) / (fb - fa)
        };
        if !(x > a && x < b) {
            x = 0.5 * (a + b);
            if !(x > a && x < b) {
                break;
            }
        }
        let fx = f(x);
        if fx == 0.0 {
            return (x, x);
        }
        if (fx > 0.0) == (fb > 0.0) {
            b = x;
            fb = fx;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        } else {
            a = x;
            fa = fx;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        }
        if b - a > 0.5 * width {
            slow_steps += 1;
        } else {
            slow_steps = 0;
        }
    }
    (a, b)
}

/// Solves for `x*` and reports diagnostics.
pub fn locate_conversion_boundary(p: &ModelParams) -> Result<BoundaryRoot> {
    if classify_regime(p) != Regime::CaseIII {
        return Err(Error::Domain(vec![format!(
            "conversion boundary exists only for c <= qK (c={}, qK={})",
            p.c(),
            p.q() * p.k()
        )]));
    }
    let sbar = threshold_sbar(p);
    let brackets = bracket_roots(p);
    let &(lo, hi) = brackets.first().ok_or_else(|| {
        Error::Bracket(format!(
            "residual keeps one sign on [{:e}, 1] x s_bar (c={}, lambda={})",
            MIN_RATIO,
            p.c(),
            p.lambda()
        ))
    })?;
    if brackets.len() > 1 {
        log::warn!(
            "free-boundary residual changes sign {} times (c={}, lambda={}); taking the smallest root",
            brackets.len(),
            p.c(),
            p.lambda()
        );
    }
    let raw = |y: f64| residual_parts(p, y * sbar).0;
    let (end_value, end_scale) = residual_parts(p, sbar);
    let (a, b) = if hi == 1.0 && end_value.abs() <= 1e-13 * end_scale {
        // c = qK: the residual vanishes at s_bar itself
        (1.0, 1.0)
    } else {
        refine(raw, lo, hi, RATIO_TOL * 1e-2)
    };
    let fa = residual_parts(p, a * sbar).0.abs();
    let fb = residual_parts(p, b * sbar).0.abs();
    let y = if fa <= fb { a } else { b };
    let x_star = (y * sbar).min(sbar);
    let (residual, residual_scale) = residual_parts(p, x_star);
    Ok(BoundaryRoot {
        x_star,
        residual,
        residual_scale,
        bracket_width: (b - a) * sbar,
        sign_changes: brackets.len(),
    })
}

/// `x*` in `(0, s_bar]` for Case III parameters.
pub fn solve_conversion_boundary(p: &ModelParams) -> Result<f64> {
    locate_conversion_boundary(p).map(|root| root.x_star)
}

/// Outcome of the smooth-pasting and verification checks at a candidate `x*`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PastingReport {
    pub x_star: f64,
    /// `|v'(x-) - v'(x+)| / max(|v'(x-)|, |v'(x+)|)`; `None` when the upper piece
    /// is empty (`x* = s_bar`) and there is nothing to paste.
    pub derivative_mismatch: Option<f64>,
    /// `v'(x*-)`, which must stay below `gamma`.
    pub derivative_at_boundary: f64,
    pub derivative_below_gamma: bool,
    pub lower_convex: bool,
    pub upper_concave: bool,
    /// Smallest and largest sampled `v''` on `(x*, s_bar)`; `None` when the
    /// upper piece is empty.
    pub upper_curvature_range: Option<(f64, f64)>,
    /// `v(s) <= gamma s` on `(x*, s_bar]`.
    pub below_conversion_payoff: bool,
}

impl PastingReport {
    /// First failed check, if any.
    pub fn failure(&self) -> Option<String> {
        if let Some(m) = self.derivative_mismatch {
            if !(m <= PASTING_TOL) {
                return Some(format!("derivative mismatch {m:e} exceeds {PASTING_TOL:e}"));
            }
        }
        if !self.derivative_below_gamma {
            return Some(format!(
                "v'(x*) = {} is not below gamma",
                self.derivative_at_boundary
            ));
        }
        if !self.lower_convex {
            return Some("value is not convex below x*".into());
        }
        if !self.upper_concave {
            return Some("value is not concave on (x*, s_bar)".into());
        }
        if !self.below_conversion_payoff {
            return Some("value exceeds gamma s on (x*, s_bar]".into());
        }
        None
    }

    pub fn passed(&self) -> bool {
        self.failure().is_none()
    }
}

/// Runs every pasting check at `x_star` without failing.
pub fn pasting_report(p: &ModelParams, x_star: f64) -> PastingReport {
    let sol = AnalyticSolution::case_three(p, x_star);
    let x = sol.x_star;
    let gamma = p.gamma();
    let left = sol.lower_piece_derivative(x);
    let derivative_mismatch = (!sol.is_degenerate()).then(|| {
        let right = sol.upper_piece_derivative(x);
        (left - right).abs() / left.abs().max(right.abs()).max(f64::MIN_POSITIVE)
    });
    const SAMPLES: usize = 100;
    let lower_convex = sol.coeff_a > 0.0
        && (1..=SAMPLES).all(|i| sol.second_derivative(x * i as f64 / (SAMPLES + 1) as f64) > 0.0);
    let upper_points =
        || (1..=SAMPLES).map(move |i| x + (sol.sbar - x) * i as f64 / SAMPLES as f64);
    let upper_curvature_range = (!sol.is_degenerate()).then(|| {
        upper_points()
            .filter(|&s| s < sol.sbar)
            .map(|s| sol.second_derivative(s))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), d| {
                (lo.min(d), hi.max(d))
            })
    });
    let upper_concave = upper_curvature_range.is_none_or(|(_, hi)| hi < 0.0);
    let below_conversion_payoff = sol.is_degenerate()
        || upper_points().all(|s| sol.value(s) - gamma * s <= 1e-12 * (gamma * s));
    PastingReport {
        x_star: x,
        derivative_mismatch,
        derivative_at_boundary: left,
        derivative_below_gamma: left < gamma,
        lower_convex,
        upper_concave,
        upper_curvature_range,
        below_conversion_payoff,
    }
}

/// Like [`pasting_report`], failing with the first violated check.
pub fn verify_smooth_pasting(p: &ModelParams, x_star: f64) -> Result<PastingReport> {
    let report = pasting_report(p, x_star);
    match report.failure() {
        None => Ok(report),
        Some(msg) => Err(Error::PastingViolation(msg)),
    }
}
