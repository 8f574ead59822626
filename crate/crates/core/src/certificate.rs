//! Algebraic stability conditions, their closed-form lower bounds and the
//! settling-window estimate.
//!
//! Conditions written with a strict inequality fail at zero slack. The
//! margin condition `(ϖ1+ϖ2)τ - ϖ1θ̲ + ϖ2(θ̄-θ̲) <= -φ` is non-strict and is
//! accepted up to [`NONSTRICT_TOL`] of floating-point noise.

use serde::{Deserialize, Serialize};

use crate::error::CertificateError;
use crate::schedule::SpanStats;

/// Absolute tolerance for non-strict conditions, relative to the size of
/// the terms compared.
pub const NONSTRICT_TOL: f64 = 1e-12;

/// Offset added to `α1 + α2` when choosing `ϖ2`.
pub const MARGIN_EPSILON: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlantBounds {
    pub alpha1: f64,
    pub alpha2: f64,
    pub tau_bound: f64,
}

impl PlantBounds {
    pub fn new(alpha1: f64, alpha2: f64, tau_bound: f64) -> Result<Self, CertificateError> {
        if !(alpha2 >= 0.0 && tau_bound >= 0.0 && alpha1.is_finite()) {
            return Err(CertificateError::InvalidParameter(format!(
                "plant bounds need alpha2 >= 0 and tau >= 0, got ({alpha1}, {alpha2}, {tau_bound})"
            )));
        }
        Ok(Self {
            alpha1,
            alpha2,
            tau_bound,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlGains {
    pub alpha3: f64,
    pub alpha4: f64,
}

impl ControlGains {
    pub fn new(alpha3: f64, alpha4: f64) -> Result<Self, CertificateError> {
        if !(alpha3 >= 0.0 && alpha4 >= 0.0) {
            return Err(CertificateError::InvalidParameter(format!(
                "gains must be nonnegative, got ({alpha3}, {alpha4})"
            )));
        }
        Ok(Self { alpha3, alpha4 })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoPhaseMargins {
    pub varpi1: f64,
    pub varpi2: f64,
    pub phi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionCheck {
    pub name: &'static str,
    pub satisfied: bool,
    pub slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificate {
    pub conditions: Vec<ConditionCheck>,
    pub sigma_star: Option<f64>,
    /// Phase-II window count `⌈1/φ⌉`; `None` when `φ <= 0`.
    pub window_count: Option<u64>,
    /// Upper estimate of `T2 - T1`: `⌈1/φ⌉·θ̄`.
    pub settling_bound_increment: Option<f64>,
}

impl Certificate {
    pub fn satisfied(&self) -> bool {
        self.conditions.iter().all(|c| c.satisfied)
    }

    pub fn condition(&self, name: &str) -> Option<&ConditionCheck> {
        self.conditions.iter().find(|c| c.name == name)
    }
}

/// Closed-form lower bounds for the control design.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LowerBounds {
    pub sigma_low: f64,
    pub alpha3_low: f64,
    pub varpi1_low: f64,
    pub alpha4_low: f64,
}

fn sigma_residual(sigma: f64, m1: f64, m2: f64, tau: f64) -> f64 {
    sigma - m1 + m2 * (sigma * tau).exp()
}

/// Unique positive root of `σ - m1 + m2·e^{στ} = 0`.
///
/// The left side is strictly increasing with a negative value at zero when
/// `m1 > m2 >= 0`, so the root is bracketed and refined by bisection down
/// to adjacent floating-point values.
pub fn solve_sigma(m1: f64, m2: f64, tau: f64) -> Result<f64, CertificateError> {
    if !(m2 >= 0.0 && tau >= 0.0 && m1.is_finite() && m2.is_finite() && tau.is_finite()) {
        return Err(CertificateError::InvalidParameter(format!(
            "solve_sigma needs m2 >= 0 and tau >= 0, got ({m1}, {m2}, {tau})"
        )));
    }
    if m1 <= m2 {
        return Err(CertificateError::NoPositiveRoot { m1, m2 });
    }
    if m2 == 0.0 {
        return Ok(m1);
    }

    let g = |s: f64| sigma_residual(s, m1, m2, tau);
    let mut lo = 0.0;
    let mut hi = m1;
    while g(hi) < 0.0 {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..2100 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(if g(lo).abs() <= g(hi).abs() { lo } else { hi })
}

/// Closed-form bounds `σ̲`, `α̲3`, `ϖ̲1`, `α̲4`.
pub fn lower_bounds(plant: &PlantBounds, stats: &SpanStats, gamma_bar: f64) -> Result<LowerBounds, CertificateError> {
    let PlantBounds {
        alpha1,
        alpha2,
        tau_bound: tau,
    } = *plant;
    let SpanStats { theta_low, theta_high } = *stats;
    if tau >= theta_low {
        return Err(CertificateError::DelayTooLarge { tau, theta_low });
    }
    if !(0.0..1.0).contains(&gamma_bar) {
        return Err(CertificateError::InvalidParameter(format!(
            "gamma_bar must lie in [0, 1), got {gamma_bar}"
        )));
    }
    let drift = alpha1 + alpha2;
    let sigma_low = drift * (theta_high - theta_low) / (theta_low - tau);
    let alpha3_low = (sigma_low + alpha1 + alpha2 * (sigma_low * tau).exp()) / (1.0 - gamma_bar);
    let varpi1_low = drift * (tau + theta_high - theta_low) / (theta_low - tau);
    let alpha4_low = alpha2 + varpi1_low;
    Ok(LowerBounds {
        sigma_low,
        alpha3_low,
        varpi1_low,
        alpha4_low,
    })
}

/// Adaptive-law exponent bound `(1-γ̄)·α̲3 - α1`.
pub fn theorem2_eta_bound(plant: &PlantBounds, stats: &SpanStats, gamma_bar: f64) -> Result<f64, CertificateError> {
    let lb = lower_bounds(plant, stats, gamma_bar)?;
    Ok((1.0 - gamma_bar) * lb.alpha3_low - plant.alpha1)
}

fn nonstrict(slack: f64, scale: f64) -> bool {
    slack >= -NONSTRICT_TOL * scale.max(1.0)
}

/// Evaluates every condition of the constant-gain theorem with its slack.
///
/// Slack is positive when the condition holds with room to spare.
pub fn check_theorem1(
    plant: &PlantBounds,
    gains: &ControlGains,
    margins: &TwoPhaseMargins,
    stats: &SpanStats,
    gamma_bar: f64,
) -> Certificate {
    let PlantBounds {
        alpha1,
        alpha2,
        tau_bound: tau,
    } = *plant;
    let SpanStats { theta_low, theta_high } = *stats;
    let TwoPhaseMargins { varpi1, varpi2, phi } = *margins;
    let drift = alpha1 + alpha2;
    let effective = (1.0 - gamma_bar) * gains.alpha3;

    let mut conditions = Vec::with_capacity(6);
    let s15 = effective - drift;
    conditions.push(ConditionCheck {
        name: "gain_dominates_drift",
        satisfied: s15 > 0.0,
        slack: s15,
    });

    let sigma_star = solve_sigma(effective - alpha1, alpha2, tau).ok();
    let (s16, ok16) = match sigma_star {
        Some(sigma) => {
            let s = sigma * (theta_low - tau) - drift * (theta_high - theta_low);
            (s, s > 0.0)
        }
        None => (f64::NEG_INFINITY, false),
    };
    conditions.push(ConditionCheck {
        name: "phase1_rate",
        satisfied: ok16,
        slack: s16,
    });

    let s17 = gains.alpha4 - alpha2 - varpi1;
    conditions.push(ConditionCheck {
        name: "alpha4_margin",
        satisfied: s17 > 0.0,
        slack: s17,
    });

    let s18 = varpi2 - drift;
    conditions.push(ConditionCheck {
        name: "rest_margin",
        satisfied: s18 > 0.0,
        slack: s18,
    });

    let lhs = (varpi1 + varpi2) * tau - varpi1 * theta_low + varpi2 * (theta_high - theta_low);
    let s19 = -phi - lhs;
    let scale = varpi1.abs().max(varpi2.abs()) * theta_high.max(1.0);
    conditions.push(ConditionCheck {
        name: "window_decrease",
        satisfied: nonstrict(s19, scale),
        slack: s19,
    });

    conditions.push(ConditionCheck {
        name: "phi_positive",
        satisfied: phi > 0.0,
        slack: phi,
    });

    let window_count = (phi > 0.0).then(|| (1.0 / phi).ceil() as u64);
    Certificate {
        conditions,
        sigma_star,
        window_count,
        settling_bound_increment: window_count.map(|w| w as f64 * theta_high),
    }
}

/// Exponential-decay condition for the scalar comparison inequality
/// `ṗ <= -m1 p + m2 p(t-τ)` on control spans and `ṗ <= m3 p + m2 p(t-τ)` on
/// rest spans. Returns the verdict and `σ` when it exists.
pub fn check_lemma1(m1: f64, m2: f64, m3: f64, stats: &SpanStats, tau: f64) -> (bool, Option<f64>) {
    match solve_sigma(m1, m2, tau) {
        Ok(sigma) => {
            let s = sigma * (stats.theta_low - tau) - (m2 + m3) * (stats.theta_high - stats.theta_low);
            (s > 0.0, Some(sigma))
        }
        Err(_) => (false, None),
    }
}

/// Picks Phase-II margins for the given gains.
///
/// `ϖ2` sits just above `α1 + α2`; `ϖ1` is the midpoint of the interval
/// allowed by the `α4` margin and the window-decrease condition, and `φ` is
/// the decrease that choice guarantees.
pub fn suggest_margins(
    plant: &PlantBounds,
    gains: &ControlGains,
    stats: &SpanStats,
) -> Result<TwoPhaseMargins, CertificateError> {
    let PlantBounds {
        alpha1,
        alpha2,
        tau_bound: tau,
    } = *plant;
    let SpanStats { theta_low, theta_high } = *stats;
    if tau >= theta_low {
        return Err(CertificateError::DelayTooLarge { tau, theta_low });
    }
    let varpi2 = (alpha1 + alpha2 + MARGIN_EPSILON).max(MARGIN_EPSILON);
    let reach = tau + theta_high - theta_low;
    let low = (varpi2 * reach / (theta_low - tau)).max(0.0);
    let high = gains.alpha4 - alpha2;
    if !(high > low) {
        return Err(CertificateError::Infeasible(format!(
            "varpi1 interval ({low}, {high}) is empty"
        )));
    }
    let varpi1 = 0.5 * (low + high);
    let phi = varpi1 * (theta_low - tau) - varpi2 * reach;
    if !(phi > 0.0) {
        return Err(CertificateError::Infeasible(format!("decrease {phi} is not positive")));
    }
    Ok(TwoPhaseMargins { varpi1, varpi2, phi })
}
