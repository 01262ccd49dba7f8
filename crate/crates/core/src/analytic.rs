//! Closed-form prices for the Poisson-constrained bond and for the classical
//! (continuously exercisable) convertible.
//!
//! Below the threshold `s_bar` the constrained price solves
//! `-L0 v = c + lambda (gamma s - v)^+ - lambda (v - K)^+` with
//! `L0 = sigma^2 s^2 / 2 d_ss + (r - q) s d_s - r`; above it the price is the
//! lower bound `L(s)`.
//!
//! All powers are evaluated as ratios with base at most one
//! (`(s / s_bar)^alpha`, `(s / x)^beta_minus` for `s >= x`, ...) so that the
//! exponents `beta_plus ~ -beta_minus ~ 1e3` met at `lambda = 1e4` cannot
//! overflow. The raw coefficients `B+`, `B-` are only reported, never used
//! for pricing.

use serde::{Deserialize, Serialize};

use crate::boundary;
use crate::error::{Error, Result};
use crate::format::num;
use crate::params::{
    classical_sbar, classify_regime, exponents, threshold_sbar, upper_bound, Exponents,
    ModelParams, Regime,
};

/// Piecewise closed-form price of the constrained bond.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticSolution {
    pub params: ModelParams,
    pub regime: Regime,
    #[serde(with = "num")]
    pub sbar: f64,
    pub exponents: Exponents,
    /// `A` of `A s^alpha + c/r` (Cases I and III); zero in Case II.
    #[serde(with = "num")]
    pub coeff_a: f64,
    /// `B+` of the upper Case III piece, `None` outside Case III, for a
    /// degenerate boundary, or when the value is not representable.
    #[serde(with = "num::option")]
    pub coeff_b_plus: Option<f64>,
    #[serde(with = "num::option")]
    pub coeff_b_minus: Option<f64>,
    /// Conversion boundary in Case III; equals `sbar` otherwise.
    #[serde(with = "num")]
    pub x_star: f64,
    /// `U = (c + lambda K) / (r + lambda)`.
    #[serde(with = "num")]
    pub u_upper: f64,
    /// `L(s) = l_intercept + l_slope * s`.
    #[serde(with = "num")]
    pub l_intercept: f64,
    #[serde(with = "num")]
    pub l_slope: f64,
    /// `gamma x - L(x)` at the boundary, the amplitude of the upper piece.
    #[serde(with = "num")]
    pub boundary_gap: f64,
}

/// Builds the constrained solution, solving for the conversion boundary in
/// Case III.
pub fn build_constrained_solution(p: &ModelParams) -> Result<AnalyticSolution> {
    match classify_regime(p) {
        Regime::CaseIII => {
            let x = boundary::solve_conversion_boundary(p)?;
            Ok(AnalyticSolution::case_three(p, x))
        }
        _ => Ok(AnalyticSolution::without_boundary(p)),
    }
}

/// Price at spot `s`.
pub fn price_constrained(sol: &AnalyticSolution, s: f64) -> f64 {
    sol.value(s)
}

impl AnalyticSolution {
    fn skeleton(p: &ModelParams) -> Self {
        let sbar = threshold_sbar(p);
        let lam = p.lambda();
        AnalyticSolution {
            params: *p,
            regime: classify_regime(p),
            sbar,
            exponents: exponents(p),
            coeff_a: 0.0,
            coeff_b_plus: None,
            coeff_b_minus: None,
            x_star: sbar,
            u_upper: upper_bound(p),
            l_intercept: p.c() / (p.r() + lam),
            l_slope: lam / (p.q() + lam) * p.gamma(),
            boundary_gap: 0.0,
        }
    }

    fn without_boundary(p: &ModelParams) -> Self {
        let mut sol = Self::skeleton(p);
        if sol.regime == Regime::CaseI {
            let lam = p.lambda();
            let r = p.r();
            sol.coeff_a = lam / (r + lam) * (r * p.k() - p.c()) / r
                * (-sol.exponents.alpha_plus * sol.sbar.ln()).exp();
        }
        sol
    }

    /// Case III solution for a given boundary `x` in `(0, sbar]`.
    ///
    /// Used both with the solved boundary and, by the pasting checks, with
    /// perturbed ones.
    pub fn case_three(p: &ModelParams, x: f64) -> Self {
        let mut sol = Self::skeleton(p);
        sol.regime = Regime::CaseIII;
        let x = x.min(sol.sbar);
        sol.x_star = x;
        let c_r = p.c() / p.r();
        let alpha = sol.exponents.alpha_plus;
        sol.coeff_a = (p.gamma() * x - c_r) * (-alpha * x.ln()).exp();
        sol.boundary_gap = p.gamma() * x - sol.lower(x);
        if x < sol.sbar {
            let Exponents {
                beta_plus: bp,
                beta_minus: bm,
                ..
            } = sol.exponents;
            let ln_sbar = sol.sbar.ln();
            let ln_y = (x / sol.sbar).ln();
            // ln|x^b+ - sbar^(b+ - b-) x^b-| = b+ ln sbar + b- ln y + ln(1 - y^(b+ - b-))
            let ln_tail = (-((bp - bm) * ln_y).exp_m1()).ln();
            let m = sol.boundary_gap;
            let b_plus = -m * (-(bp * ln_sbar + bm * ln_y + ln_tail)).exp();
            let b_minus = m * (-(bm * ln_sbar + bm * ln_y + ln_tail)).exp();
            let representable = |b: f64| (b.is_finite() && b != 0.0).then_some(b);
            sol.coeff_b_plus = representable(b_plus);
            sol.coeff_b_minus = representable(b_minus);
        }
        sol
    }

    /// `L(s)`.
    pub fn lower(&self, s: f64) -> f64 {
        self.l_intercept + self.l_slope * s
    }

    fn c_over_r(&self) -> f64 {
        self.params.c() / self.params.r()
    }

    /// True when the Case III upper piece `(x*, sbar)` is empty.
    pub fn is_degenerate(&self) -> bool {
        self.regime != Regime::CaseIII || self.x_star >= self.sbar
    }

    /// Value at spot `s > 0`.
    pub fn value(&self, s: f64) -> f64 {
        if s >= self.sbar {
            return self.lower(s);
        }
        match self.regime {
            Regime::CaseII => self.u_upper,
            Regime::CaseI => {
                let alpha = self.exponents.alpha_plus;
                self.c_over_r()
                    + (self.u_upper - self.c_over_r()) * (alpha * (s / self.sbar).ln()).exp()
            }
            Regime::CaseIII => {
                if s < self.x_star || self.is_degenerate() {
                    self.lower_piece(s)
                } else {
                    self.lower(s) + self.boundary_gap * self.upper_shape(s)
                }
            }
        }
    }

    /// `A s^alpha + c/r` written relative to the point where it equals `gamma x`.
    fn lower_piece(&self, s: f64) -> f64 {
        let alpha = self.exponents.alpha_plus;
        let (anchor, anchor_value) = match self.regime {
            Regime::CaseI => (self.sbar, self.u_upper),
            _ => (self.x_star, self.params.gamma() * self.x_star),
        };
        self.c_over_r() + (anchor_value - self.c_over_r()) * (alpha * (s / anchor).ln()).exp()
    }

    /// Powers `(s/x)^b- (s/sbar)^(b+ - b-)` and `(s/x)^b-` of the upper piece and
    /// the normaliser `(x/sbar)^(b+ - b-) - 1`.
    fn upper_terms(&self, s: f64) -> (f64, f64, f64) {
        let Exponents {
            beta_plus: bp,
            beta_minus: bm,
            ..
        } = self.exponents;
        let delta = bp - bm;
        let n = (bm * (s / self.x_star).ln()).exp();
        let p = (bm * (s / self.x_star).ln() + delta * (s / self.sbar).ln()).exp();
        let norm = (delta * (self.x_star / self.sbar).ln()).exp_m1();
        (p, n, norm)
    }

    /// Shape of the upper piece: 1 at `x*`, 0 at `sbar`.
    fn upper_shape(&self, s: f64) -> f64 {
        let Exponents {
            beta_plus: bp,
            beta_minus: bm,
            ..
        } = self.exponents;
        let n = (bm * (s / self.x_star).ln()).exp();
        let num = ((bp - bm) * (s / self.sbar).ln()).exp_m1();
        let den = ((bp - bm) * (self.x_star / self.sbar).ln()).exp_m1();
        n * num / den
    }

    /// First derivative; one-sided from the left at `x*` (see
    /// [`Self::upper_piece_derivative`] for the right limit).
    pub fn derivative(&self, s: f64) -> f64 {
        if s >= self.sbar {
            return self.l_slope;
        }
        let alpha = self.exponents.alpha_plus;
        match self.regime {
            Regime::CaseII => 0.0,
            Regime::CaseI => alpha * (self.value(s) - self.c_over_r()) / s,
            Regime::CaseIII => {
                if s <= self.x_star || self.is_degenerate() {
                    alpha * (self.lower_piece(s) - self.c_over_r()) / s
                } else {
                    self.upper_piece_derivative(s)
                }
            }
        }
    }

    /// Derivative of the lower Case III piece `A s^alpha + c/r`.
    pub fn lower_piece_derivative(&self, s: f64) -> f64 {
        self.exponents.alpha_plus * (self.lower_piece(s) - self.c_over_r()) / s
    }

    /// Derivative of the upper Case III piece, valid on `[x*, sbar)`.
    pub fn upper_piece_derivative(&self, s: f64) -> f64 {
        let (p, n, norm) = self.upper_terms(s);
        let Exponents {
            beta_plus: bp,
            beta_minus: bm,
            ..
        } = self.exponents;
        self.l_slope + self.boundary_gap * (bp * p - bm * n) / (s * norm)
    }

    /// Second derivative of whichever piece contains `s` (left piece at `x*`).
    pub fn second_derivative(&self, s: f64) -> f64 {
        if s >= self.sbar {
            return 0.0;
        }
        let alpha = self.exponents.alpha_plus;
        let power_term = |v: f64| alpha * (alpha - 1.0) * (v - self.c_over_r()) / (s * s);
        match self.regime {
            Regime::CaseII => 0.0,
            Regime::CaseI => power_term(self.value(s)),
            Regime::CaseIII => {
                if s <= self.x_star || self.is_degenerate() {
                    power_term(self.lower_piece(s))
                } else {
                    let (p, n, norm) = self.upper_terms(s);
                    let Exponents {
                        beta_plus: bp,
                        beta_minus: bm,
                        ..
                    } = self.exponents;
                    self.boundary_gap * (bp * (bp - 1.0) * p - bm * (bm - 1.0) * n) / (s * s * norm)
                }
            }
        }
    }
}

/// Price of the convertible when both sides may stop at any time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassicalSolution {
    pub params: ModelParams,
    pub regime: Regime,
    /// `K / gamma`.
    #[serde(with = "num")]
    pub sbar: f64,
    #[serde(with = "num")]
    pub alpha: f64,
    /// `A1` (Case I) or `A3` (Case III); zero in Case II.
    #[serde(with = "num")]
    pub coeff: f64,
    /// Spot above which the bond is worth `gamma s`.
    #[serde(with = "num")]
    pub x3: f64,
}

pub fn build_classical_solution(p: &ModelParams) -> ClassicalSolution {
    let regime = classify_regime(p);
    let sbar = classical_sbar(p);
    let alpha = exponents(p).alpha_plus;
    let (r, c, k, gamma) = (p.r(), p.c(), p.k(), p.gamma());
    let (x3, coeff) = match regime {
        Regime::CaseI => (sbar, (r * k - c) / r * (-alpha * sbar.ln()).exp()),
        Regime::CaseII => (sbar, 0.0),
        Regime::CaseIII => {
            let x3 = if c <= (alpha - 1.0) / alpha * r * k {
                (alpha / (alpha - 1.0) * c / (gamma * r)).min(sbar)
            } else {
                sbar
            };
            (x3, (gamma * x3 - c / r) * (-alpha * x3.ln()).exp())
        }
    };
    ClassicalSolution {
        params: *p,
        regime,
        sbar,
        alpha,
        coeff,
        x3,
    }
}

pub fn price_classical(sol: &ClassicalSolution, s: f64) -> f64 {
    sol.value(s)
}

impl ClassicalSolution {
    pub fn value(&self, s: f64) -> f64 {
        let gamma = self.params.gamma();
        if s >= self.x3 {
            return gamma * s;
        }
        let c_r = self.params.c() / self.params.r();
        match self.regime {
            Regime::CaseII => self.params.k(),
            _ => c_r + (gamma * self.x3 - c_r) * (self.alpha * (s / self.x3).ln()).exp(),
        }
    }
}

/// Maximum absolute price difference between two solutions on `grid`.
pub fn max_gap(a: &AnalyticSolution, b: &ClassicalSolution, grid: &[f64]) -> Result<f64> {
    if a.params.raw().c != b.params.raw().c || a.params.k() != b.params.k() {
        return Err(Error::ParamMismatch(
            "constrained and classical solutions use different contracts".into(),
        ));
    }
    Ok(grid
        .iter()
        .map(|&s| (a.value(s) - b.value(s)).abs())
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::bounds;

    fn sol(lambda: f64, c: f64) -> AnalyticSolution {
        build_constrained_solution(&ModelParams::table1(lambda, c).unwrap()).unwrap()
    }

    /// `-L0 v - c` from the stored derivatives, with the penalty active on the
    /// side dictated by the regime. Returns a relative residual.
    fn ode_residual(sol: &AnalyticSolution, s: f64) -> f64 {
        let p = &sol.params;
        let v = sol.value(s);
        let d1 = sol.derivative(s);
        let d2 = sol.second_derivative(s);
        let diffusion = 0.5 * p.sigma() * p.sigma() * s * s * d2;
        let drift = (p.r() - p.q()) * s * d1;
        let lam = p.lambda();
        let penalty = lam * (p.gamma() * s - v).max(0.0) - lam * (v - p.k()).max(0.0);
        let res = -(diffusion + drift - p.r() * v) - p.c() - penalty;
        let scale = [diffusion, drift, p.r() * v, p.c(), penalty]
            .iter()
            .fold(0.0f64, |m, t| m.max(t.abs()));
        res.abs() / scale
    }

    #[test]
    fn case_one_coefficient_and_boundary() {
        let s = sol(1.0, 0.04);
        assert_eq!(s.regime, Regime::CaseI);
        let expected_a =
            (1.0 / 1.05) * (0.01 / 0.05) * (1.03f64 / 1.05 * 1.25).powf(-s.exponents.alpha_plus);
        assert!((s.coeff_a - expected_a).abs() < 1e-14);
        assert!(s.coeff_a > 0.0);
        assert!((s.value(s.sbar) - s.u_upper).abs() < 1e-12);
        let below = s.value(s.sbar * (1.0 - 1e-13));
        assert!((below - s.u_upper).abs() < 1e-11);
        // A s^alpha + c/r from the raw coefficient
        let x = 0.9;
        assert!((s.value(x) - (s.coeff_a * x.powf(s.exponents.alpha_plus) + 0.8)).abs() < 1e-13);
    }

    #[test]
    fn case_two_constant() {
        let s = sol(1.0, 0.06);
        assert_eq!(s.regime, Regime::CaseII);
        assert!((s.value(0.5) - 1.06 / 1.05).abs() < 1e-15);
        assert!((s.value(0.5) - 1.009524).abs() < 1e-6);
        assert!(s.value(0.5) >= 1.0);
        assert_eq!(s.value(1e-9), s.u_upper);
    }

    #[test]
    fn case_three_signs_and_boundary_values() {
        let s = sol(1.0, 0.02);
        assert_eq!(s.regime, Regime::CaseIII);
        assert!(s.coeff_a > 0.0);
        assert!(s.coeff_b_plus.unwrap() < 0.0);
        assert!(s.coeff_b_minus.unwrap() > 0.0);
        assert!(s.x_star > 0.0 && s.x_star <= s.sbar);
        let g = 0.8 * s.x_star;
        assert!((s.value(s.x_star) - g).abs() < 1e-13);
        assert!((s.value(s.x_star * (1.0 - 1e-12)) - g).abs() < 1e-11);
        assert!((s.value(s.sbar) - s.u_upper).abs() < 1e-12);
        assert!((s.value(s.sbar * (1.0 - 1e-12)) - s.u_upper).abs() < 1e-10);
    }

    #[test]
    fn case_three_raw_coefficients_reproduce_upper_piece() {
        let s = sol(1.0, 0.02);
        let (bp, bm) = (s.coeff_b_plus.unwrap(), s.coeff_b_minus.unwrap());
        let e = s.exponents;
        for t in [0.1, 0.4, 0.8] {
            let x = s.x_star + t * (s.sbar - s.x_star);
            let raw = bp * x.powf(e.beta_plus) + bm * x.powf(e.beta_minus) + s.lower(x);
            assert!((raw - s.value(x)).abs() < 1e-12, "{raw} vs {}", s.value(x));
        }
    }

    #[test]
    fn small_spot_limits() {
        assert!((sol(1.0, 0.04).value(1e-12) - 0.8).abs() < 1e-12);
        assert!((sol(1.0, 0.02).value(1e-12) - 0.4).abs() < 1e-12);
        let s2 = sol(1.0, 0.06);
        assert_eq!(s2.value(1e-12), s2.u_upper);
    }

    #[test]
    fn above_threshold_is_lower_bound() {
        for c in [0.02, 0.04, 0.06] {
            let s = sol(1.0, c);
            for spot in [s.sbar, 1.5, 3.0] {
                assert_eq!(s.value(spot), bounds(&s.params, spot).0);
            }
        }
    }

    #[test]
    fn ode_satisfied_by_every_branch() {
        for (lambda, c) in [
            (1.0, 0.04),
            (1.0, 0.06),
            (1.0, 0.02),
            (100.0, 0.005),
            (1e4, 0.01),
            (0.1, 0.025),
        ] {
            let s = sol(lambda, c);
            for i in 1..=100 {
                let spot = s.sbar * i as f64 / 101.0;
                if (spot - s.x_star).abs() < 1e-9 {
                    continue;
                }
                let res = ode_residual(&s, spot);
                assert!(res <= 1e-8, "lambda={lambda} c={c} s={spot} residual={res}");
            }
        }
    }

    #[test]
    fn regime_price_facts() {
        let s1 = sol(1.0, 0.04);
        let s2 = sol(1.0, 0.06);
        let s3 = sol(1.0, 0.02);
        for i in 1..200 {
            let t = i as f64 / 200.0;
            let x1 = t * s1.sbar;
            assert!(s1.value(x1) > 0.8 * x1 && s1.value(x1) < 1.0);
            assert!(s2.value(t * s2.sbar) >= 1.0);
            assert!(s3.value(t * s3.sbar) < 1.0);
        }
    }

    #[test]
    fn classical_reference_values() {
        let p = ModelParams::table1(1.0, 0.005).unwrap();
        let c = build_classical_solution(&p);
        assert!((c.x3 - 0.3401).abs() < 5e-5);
        let c = build_classical_solution(&p.with_coupon(0.02).unwrap());
        assert_eq!(c.x3, 1.25);
        let threshold = crate::params::classical_coupon_threshold(&p);
        let c = build_classical_solution(&p.with_coupon(threshold).unwrap());
        assert!((c.x3 - 1.25).abs() < 1e-12);
    }

    #[test]
    fn classical_continuity_and_limits() {
        let base = ModelParams::table1(1.0, 0.005).unwrap();
        for coupon in [0.005, 0.02, 0.04, 0.06] {
            let c = build_classical_solution(&base.with_coupon(coupon).unwrap());
            let left = c.value(c.x3 * (1.0 - 1e-12));
            assert!((left - 0.8 * c.x3).abs() < 1e-10, "coupon {coupon}: {left}");
            if c.regime == Regime::CaseII {
                assert_eq!(c.value(1.0), 1.0);
            } else {
                assert!((c.value(1e-12) - coupon / 0.05).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn serialization_round_trip() {
        let s = sol(1e4, 0.02);
        let text = serde_json::to_string(&s).unwrap();
        let back: AnalyticSolution = serde_json::from_str(&text).unwrap();
        assert_eq!(back, s);
        for spot in [0.1, 1.0, 1.2499, 2.0] {
            assert_eq!(back.value(spot).to_bits(), s.value(spot).to_bits());
        }
    }
}
