//! Backward induction for the discounted game on a trinomial log-price lattice.
//!
//! Each time step hosts an arrival with probability `1 - e^{-lambda dt}`. At an
//! arrival the value becomes `min(K, max(W, gamma s))`, with `W` the
//! continuation value; otherwise it is `W`. The top node sits at `s_bar` and is
//! absorbing with value `U`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format::num;
use crate::params::{bounds, threshold_sbar, upper_bound, ModelParams};

/// Log-price span covered below `s_bar`.
pub const SPAN: f64 = 6.0;
/// Upper limit on the per-step arrival probability scale `lambda dt`.
pub const MAX_LAMBDA_DT: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeConfig {
    #[serde(with = "num")]
    pub dt: f64,
    pub n_time: usize,
    pub n_space: usize,
    /// `T_max = dt * n_time`.
    #[serde(with = "num")]
    pub horizon_cap: f64,
    /// Bound required on `e^{-r T_max} K`.
    #[serde(with = "num")]
    pub tol: f64,
}

impl LatticeConfig {
    /// Smallest horizon meeting `tol`, and space step `sigma sqrt(3 dt)`.
    pub fn for_params(p: &ModelParams, dt: f64, tol: f64) -> Result<Self> {
        if !(dt > 0.0 && tol > 0.0) {
            return Err(Error::Config(format!(
                "dt and tol must be positive (got {dt}, {tol})"
            )));
        }
        let n_time = ((p.k() / tol).ln().max(0.0) / p.r() / dt).ceil().max(1.0) as usize;
        let dz = p.sigma() * (3.0 * dt).sqrt();
        let n_space = ((SPAN / dz).ceil() as usize + 1).max(3);
        Ok(LatticeConfig {
            dt,
            n_time,
            n_space,
            horizon_cap: n_time as f64 * dt,
            tol,
        })
    }

    pub fn validate(&self, p: &ModelParams) -> Result<()> {
        let mut problems = Vec::new();
        if !(self.dt > 0.0) || self.n_time == 0 {
            problems.push(format!(
                "need dt > 0 and n_time > 0 (got {}, {})",
                self.dt, self.n_time
            ));
        }
        if p.lambda() * self.dt >= MAX_LAMBDA_DT {
            problems.push(format!(
                "lambda*dt = {} must stay below {MAX_LAMBDA_DT}",
                p.lambda() * self.dt
            ));
        }
        if (self.dt * self.n_time as f64 - self.horizon_cap).abs() > 1e-9 * self.horizon_cap {
            problems.push(format!(
                "dt*n_time = {} differs from horizon_cap = {}",
                self.dt * self.n_time as f64,
                self.horizon_cap
            ));
        }
        let tail = (-p.r() * self.horizon_cap).exp() * p.k();
        if tail > self.tol {
            problems.push(format!(
                "truncation bound {tail} exceeds tolerance {}",
                self.tol
            ));
        }
        if self.n_space < 3 {
            problems.push("need at least 3 space nodes".into());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems.join("; ")))
        }
    }

    fn dz(&self) -> f64 {
        SPAN / (self.n_space - 1) as f64
    }
}

/// Value at `(0, s0)` for `s0` in `[s_bar e^-SPAN, s_bar)`.
pub fn lattice_value(p: &ModelParams, cfg: &LatticeConfig, s0: f64) -> Result<f64> {
    cfg.validate(p)?;
    let sbar = threshold_sbar(p);
    let dz = cfg.dz();
    let z_top = sbar.ln();
    let z_bottom = z_top - SPAN;
    if !(s0 > 0.0 && s0 < sbar && s0.ln() >= z_bottom) {
        return Err(Error::Domain(vec![format!(
            "s0 = {s0} outside the lattice range [{}, {sbar})",
            z_bottom.exp()
        )]));
    }
    let dt = cfg.dt;
    let nu = p.log_drift();
    let second = (p.sigma() * p.sigma() * dt + nu * nu * dt * dt) / (dz * dz);
    let first = nu * dt / dz;
    let pu = 0.5 * (second + first);
    let pd = 0.5 * (second - first);
    let pm = 1.0 - pu - pd;
    if pu < 0.0 || pd < 0.0 || pm < 0.0 {
        return Err(Error::Config(format!(
            "trinomial probabilities ({pd}, {pm}, {pu}) not all non-negative; use a wider space step"
        )));
    }

    let n = cfg.n_space;
    let top = n - 1;
    let spot: Vec<f64> = (0..n)
        .map(|j| (z_top - (top - j) as f64 * dz).exp())
        .collect();
    let u = upper_bound(p);
    let mut v: Vec<f64> = spot
        .iter()
        .map(|&s| {
            let (l, up) = bounds(p, s);
            (p.c() / p.r()).clamp(l, l.max(up))
        })
        .collect();
    v[top] = u;
    let disc = (-p.r() * dt).exp();
    let coupon = -(-p.r() * dt).exp_m1() * p.c() / p.r();
    let arrival = -(-p.lambda() * dt).exp_m1();
    let (gamma, k) = (p.gamma(), p.k());
    let mut next = v.clone();
    for _ in 0..cfg.n_time {
        for j in 0..top {
            let down = v[j.saturating_sub(1)];
            let w = disc * (pu * v[j + 1] + pm * v[j] + pd * down) + coupon;
            next[j] = (1.0 - arrival) * w + arrival * k.min(w.max(gamma * spot[j]));
        }
        next[top] = u;
        std::mem::swap(&mut v, &mut next);
    }

    let t = (s0.ln() - z_bottom) / dz;
    let j = (t.floor() as usize).min(top - 1);
    let w = t - j as f64;
    Ok(v[j] * (1.0 - w) + v[j + 1] * w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::build_constrained_solution;

    #[test]
    fn config_guards() {
        let p = ModelParams::table1(1.0, 0.04).unwrap();
        let mut cfg = LatticeConfig::for_params(&p, 0.5, 1e-4).unwrap();
        assert!(matches!(
            lattice_value(&p, &cfg, 1.0),
            Err(Error::Config(_))
        ));
        cfg = LatticeConfig::for_params(&p, 0.01, 1e-4).unwrap();
        cfg.horizon_cap /= 2.0;
        cfg.n_time /= 2;
        cfg.horizon_cap = cfg.n_time as f64 * cfg.dt;
        assert!(matches!(
            lattice_value(&p, &cfg, 1.0),
            Err(Error::Config(_))
        ));
        let cfg = LatticeConfig::for_params(&p, 0.01, 1e-4).unwrap();
        assert!(matches!(
            lattice_value(&p, &cfg, 2.0),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn case_two_is_flat() {
        let p = ModelParams::table1(1.0, 0.06).unwrap();
        let cfg = LatticeConfig::for_params(&p, 2.5e-3, 1e-4).unwrap();
        let v = lattice_value(&p, &cfg, 1.0).unwrap();
        assert!((v - upper_bound(&p)).abs() < 2e-3, "{v}");
    }

    #[test]
    fn matches_closed_form_in_cases_one_and_three() {
        for c in [0.04, 0.02] {
            let p = ModelParams::table1(1.0, c).unwrap();
            let cfg = LatticeConfig::for_params(&p, 2.5e-3, 1e-4).unwrap();
            let v = lattice_value(&p, &cfg, 1.0).unwrap();
            let exact = build_constrained_solution(&p).unwrap().value(1.0);
            assert!((v - exact).abs() < 5e-3, "c={c}: {v} vs {exact}");
        }
    }

    #[test]
    fn halving_dt_shrinks_the_gap() {
        let p = ModelParams::table1(1.0, 0.02).unwrap();
        let exact = build_constrained_solution(&p).unwrap().value(1.0);
        let gap = |dt| {
            let cfg = LatticeConfig::for_params(&p, dt, 1e-4).unwrap();
            (lattice_value(&p, &cfg, 1.0).unwrap() - exact).abs()
        };
        assert!(gap(5e-3) > gap(2.5e-3));
    }
}
