//! Market and contract parameters, coupon regimes, characteristic exponents
//! and the a-priori price bounds shared by every solver.
//!
//! The stock follows `dS = (r - q) S dt + sigma S dW` under the pricing
//! measure. The bond pays coupons at rate `c`, the firm may call at `K`, the
//! holder may convert into `gamma` shares, and both may act only at the
//! arrival times of a Poisson process with intensity `lambda`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Unvalidated parameter record, as read from a JSON config file.
///
/// Exactly the seven keys below are accepted; anything else is rejected.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawParams {
    pub r: f64,
    pub q: f64,
    pub sigma: f64,
    pub lambda: f64,
    pub c: f64,
    #[serde(rename = "K")]
    pub k: f64,
    pub gamma: f64,
}

impl RawParams {
    /// Checks every constraint and reports all violations at once.
    pub fn validate(&self) -> Result<ModelParams> {
        let mut violations = Vec::new();
        let all = [
            ("r", self.r),
            ("q", self.q),
            ("sigma", self.sigma),
            ("lambda", self.lambda),
            ("c", self.c),
            ("K", self.k),
            ("gamma", self.gamma),
        ];
        for (name, value) in all {
            if !value.is_finite() {
                violations.push(format!("{name} must be finite (got {value})"));
            }
        }
        if !(self.q > 0.0) {
            violations.push(format!("q must be > 0 (got {})", self.q));
        }
        if !(self.r > self.q) {
            violations.push(format!("r must exceed q (got r={}, q={})", self.r, self.q));
        }
        for (name, value) in [
            ("sigma", self.sigma),
            ("lambda", self.lambda),
            ("c", self.c),
            ("K", self.k),
        ] {
            if !(value > 0.0) {
                violations.push(format!("{name} must be > 0 (got {value})"));
            }
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            violations.push(format!("gamma must lie in (0, 1] (got {})", self.gamma));
        }
        if violations.is_empty() {
            Ok(ModelParams(*self))
        } else {
            Err(Error::Domain(violations))
        }
    }
}

/// Validated model parameters: `r > q > 0`, `sigma, lambda, c, K > 0`,
/// `0 < gamma <= 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(transparent)]
pub struct ModelParams(RawParams);

impl<'de> Deserialize<'de> for ModelParams {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        RawParams::deserialize(d)?
            .validate()
            .map_err(serde::de::Error::custom)
    }
}

impl ModelParams {
    pub fn new(
        r: f64,
        q: f64,
        sigma: f64,
        lambda: f64,
        c: f64,
        k: f64,
        gamma: f64,
    ) -> Result<Self> {
        RawParams {
            r,
            q,
            sigma,
            lambda,
            c,
            k,
            gamma,
        }
        .validate()
    }

    /// The market used for the boundary convergence table:
    /// `K = 1, r = 0.05, q = 0.03, sigma = 0.2, gamma = 0.8`.
    ///
    /// The table's printed values (`s_bar = 1.25`, the `x*` row) are only
    /// consistent with `gamma = 0.8`, not with the `gamma = 1` of its caption.
    pub fn table1(lambda: f64, c: f64) -> Result<Self> {
        Self::new(0.05, 0.03, 0.2, lambda, c, 1.0, 0.8)
    }

    pub fn r(&self) -> f64 {
        self.0.r
    }
    pub fn q(&self) -> f64 {
        self.0.q
    }
    pub fn sigma(&self) -> f64 {
        self.0.sigma
    }
    pub fn lambda(&self) -> f64 {
        self.0.lambda
    }
    pub fn c(&self) -> f64 {
        self.0.c
    }
    pub fn k(&self) -> f64 {
        self.0.k
    }
    pub fn gamma(&self) -> f64 {
        self.0.gamma
    }

    pub fn raw(&self) -> RawParams {
        self.0
    }

    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        RawParams { lambda, ..self.0 }.validate()
    }

    pub fn with_coupon(&self, c: f64) -> Result<Self> {
        RawParams { c, ..self.0 }.validate()
    }

    pub fn with_sigma(&self, sigma: f64) -> Result<Self> {
        RawParams { sigma, ..self.0 }.validate()
    }

    /// Drift of `ln S`: `r - q - sigma^2 / 2`.
    pub fn log_drift(&self) -> f64 {
        self.r() - self.q() - 0.5 * self.sigma() * self.sigma()
    }

    /// Same market with every currency amount (`c`, `K`) multiplied by `kappa`.
    pub fn rescaled(&self, kappa: f64) -> Result<Self> {
        RawParams {
            c: self.0.c * kappa,
            k: self.0.k * kappa,
            ..self.0
        }
        .validate()
    }
}

/// Coupon regime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regime {
    /// `qK < c < rK`: nobody acts before the price reaches the trivial region.
    CaseI,
    /// `c >= rK`: the firm calls at the first arrival.
    CaseII,
    /// `c <= qK`: the holder converts above a free boundary.
    CaseIII,
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Regime::CaseI => "I",
            Regime::CaseII => "II",
            Regime::CaseIII => "III",
        })
    }
}

/// `c = rK` belongs to Case II and `c = qK` to Case III.
pub fn classify_regime(p: &ModelParams) -> Regime {
    let c = p.c();
    if c >= p.r() * p.k() {
        Regime::CaseII
    } else if c <= p.q() * p.k() {
        Regime::CaseIII
    } else {
        Regime::CaseI
    }
}

/// Roots of the characteristic quadratics `sigma^2/2 b^2 + nu b - rho = 0` with
/// `rho = r` (alpha) and `rho = r + lambda` (beta).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Exponents {
    pub alpha_plus: f64,
    pub alpha_minus: f64,
    pub beta_plus: f64,
    pub beta_minus: f64,
}

/// Roots `(plus, minus)` of `sigma^2/2 b^2 + nu b - rho = 0`, `rho > 0`.
///
/// The root without cancellation is computed directly and the other one from
/// the product `-2 rho / sigma^2`.
pub fn quadratic_roots(nu: f64, sigma: f64, rho: f64) -> (f64, f64) {
    let s2 = sigma * sigma;
    let disc = (nu * nu + 2.0 * rho * s2).sqrt();
    if nu >= 0.0 {
        let minus = -(nu + disc) / s2;
        let plus = 2.0 * rho / (nu + disc);
        (plus, minus)
    } else {
        let plus = (disc - nu) / s2;
        let minus = -2.0 * rho / (disc - nu);
        (plus, minus)
    }
}

pub fn exponents(p: &ModelParams) -> Exponents {
    let nu = p.log_drift();
    let (alpha_plus, alpha_minus) = quadratic_roots(nu, p.sigma(), p.r());
    let (beta_plus, beta_minus) = quadratic_roots(nu, p.sigma(), p.r() + p.lambda());
    Exponents {
        alpha_plus,
        alpha_minus,
        beta_plus,
        beta_minus,
    }
}

/// Price above which both players stop at the first arrival:
/// `(q + lambda) / (r + lambda) * K / gamma`.
pub fn threshold_sbar(p: &ModelParams) -> f64 {
    (p.q() + p.lambda()) / (p.r() + p.lambda()) * p.k() / p.gamma()
}

/// `K / gamma`, the limit of [`threshold_sbar`] as `lambda -> inf`.
pub fn classical_sbar(p: &ModelParams) -> f64 {
    p.k() / p.gamma()
}

/// Value of stopping at the first arrival for both players, seen from spot `s`.
pub fn lower_bound(p: &ModelParams, s: f64) -> f64 {
    p.c() / (p.r() + p.lambda()) + p.lambda() / (p.q() + p.lambda()) * p.gamma() * s
}

/// Value of a call at the first arrival.
pub fn upper_bound(p: &ModelParams) -> f64 {
    (p.c() + p.lambda() * p.k()) / (p.r() + p.lambda())
}

/// `(L(s), U)`: the game value lies in `[L(s), max(L(s), U)]`.
pub fn bounds(p: &ModelParams, s: f64) -> (f64, f64) {
    (lower_bound(p, s), upper_bound(p))
}

/// Coupon level `(alpha - 1) / alpha * rK` separating the two limits of the
/// conversion boundary as `lambda -> inf`.
pub fn classical_coupon_threshold(p: &ModelParams) -> f64 {
    let alpha = exponents(p).alpha_plus;
    (alpha - 1.0) / alpha * p.r() * p.k()
}
