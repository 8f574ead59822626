//! Intermittent quantized controllers.
//!
//! Both controllers apply `u_i = -sgn(q(e_i)) (α3 |q(e_i)| + α4)` during
//! control spans and nothing during rest spans; the adaptive one lets
//! `α3`, `α4` grow along the control spans.

use serde::{Deserialize, Serialize};

use crate::certificate::ControlGains;
use crate::engine::{BoundaryKind, Mode};
use crate::error::QuantizerError;
use crate::quantizer::LevelTable;

/// Threshold below which the windowed supremum counts as zero.
pub const DEFAULT_ZERO_TOL: f64 = 1e-9;

/// Writes the quantized sign-type force for error `e` with gains
/// `(alpha3, alpha4)`.
pub fn quantized_force(
    table: &LevelTable,
    alpha3: f64,
    alpha4: f64,
    e: &[f64],
    out: &mut [f64],
) -> Result<(), QuantizerError> {
    for (u, &ei) in out.iter_mut().zip(e) {
        let q = table.quantize(ei)?;
        *u = if q == 0.0 {
            0.0
        } else {
            -q.signum() * (alpha3 * q.abs() + alpha4)
        };
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstantController {
    pub gains: ControlGains,
    pub quantizer: LevelTable,
}

impl ConstantController {
    pub fn new(gains: ControlGains, quantizer: LevelTable) -> Self {
        Self { gains, quantizer }
    }

    pub fn control_force(&self, mode: Mode, e: &[f64], out: &mut [f64]) -> Result<(), QuantizerError> {
        match mode {
            Mode::Rest => {
                out.fill(0.0);
                Ok(())
            }
            Mode::Control => quantized_force(&self.quantizer, self.gains.alpha3, self.gains.alpha4, e, out),
        }
    }
}

/// Update-law constants of the adaptive controller.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdaptiveLaw {
    pub mu1: f64,
    pub mu2: f64,
    pub mu3: f64,
    pub eta: f64,
    #[serde(default = "default_zero_tol")]
    pub zero_tol: f64,
}

fn default_zero_tol() -> f64 {
    DEFAULT_ZERO_TOL
}

impl AdaptiveLaw {
    pub fn validate(&self) -> Result<(), String> {
        let all = [
            ("mu1", self.mu1),
            ("mu2", self.mu2),
            ("mu3", self.mu3),
            ("eta", self.eta),
        ];
        if let Some((name, v)) = all.iter().find(|(_, v)| !(*v > 0.0 && v.is_finite())) {
            return Err(format!("{name} must be positive, got {v}"));
        }
        if !(self.zero_tol >= 0.0) {
            return Err("zero_tol must be nonnegative".into());
        }
        Ok(())
    }
}

/// Current adaptive gains. While `latched` the values are held and the
/// applied force is zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveGains {
    pub alpha3: f64,
    pub alpha4: f64,
    pub latched: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveController {
    pub law: AdaptiveLaw,
    pub initial: ControlGains,
    pub quantizer: LevelTable,
}

impl AdaptiveController {
    pub fn new(law: AdaptiveLaw, initial: ControlGains, quantizer: LevelTable) -> Self {
        Self {
            law,
            initial,
            quantizer,
        }
    }

    /// Gain derivatives `(α̇3, α̇4)` at time `t` inside a control span, given
    /// the windowed supremum of `‖e‖∞` and `‖q(e)‖∞`.
    pub fn gain_rates(&self, t: f64, sup_window: f64, q_inf: f64) -> (f64, f64) {
        let law = &self.law;
        if sup_window > 1.0 {
            (law.mu1 * (law.eta * t).exp() * q_inf, 0.0)
        } else if sup_window <= law.zero_tol {
            (0.0, 0.0)
        } else {
            (law.mu2 * q_inf, law.mu3)
        }
    }

    /// Explicit-Euler gain increments over `dt`.
    pub fn adaptive_step(&self, t: f64, dt: f64, sup_window: f64, q_inf: f64) -> (f64, f64) {
        let (r3, r4) = self.gain_rates(t, sup_window, q_inf);
        (dt * r3, dt * r4)
    }

    /// Latches the gains at the end of a control span and releases them,
    /// unchanged, at the end of the following rest span.
    pub fn adaptive_reset(&self, kind: BoundaryKind, gains: &mut AdaptiveGains) {
        gains.latched = kind == BoundaryKind::CtsEnd;
    }

    pub fn start_gains(&self) -> AdaptiveGains {
        AdaptiveGains {
            alpha3: self.initial.alpha3,
            alpha4: self.initial.alpha4,
            latched: false,
        }
    }

    pub fn control_force(&self, gains: &AdaptiveGains, e: &[f64], out: &mut [f64]) -> Result<(), QuantizerError> {
        if gains.latched {
            out.fill(0.0);
            return Ok(());
        }
        quantized_force(&self.quantizer, gains.alpha3, gains.alpha4, e, out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Controller {
    None,
    Constant(ConstantController),
    Adaptive(AdaptiveController),
}

impl Controller {
    pub fn quantizer(&self) -> Option<&LevelTable> {
        match self {
            Controller::None => None,
            Controller::Constant(c) => Some(&c.quantizer),
            Controller::Adaptive(c) => Some(&c.quantizer),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantizer::{build_levels, QuantizerSpec, SIMULATION_MAX_LEVELS};

    fn table() -> LevelTable {
        build_levels(&QuantizerSpec::reference_example(SIMULATION_MAX_LEVELS), 100.0).unwrap()
    }

    fn law() -> AdaptiveLaw {
        AdaptiveLaw {
            mu1: 0.01,
            mu2: 0.01,
            mu3: 0.01,
            eta: 0.2,
            zero_tol: DEFAULT_ZERO_TOL,
        }
    }

    #[test]
    fn constant_force_values() {
        let c = ConstantController::new(ControlGains::new(0.04, 0.08).unwrap(), table());
        let mut u = [0.0; 3];
        c.control_force(Mode::Control, &[2.5, 0.0, -2.5], &mut u).unwrap();
        assert!((u[0] + 0.16).abs() < 1e-15);
        assert_eq!(u[1], 0.0);
        assert!((u[2] - 0.16).abs() < 1e-15);
        c.control_force(Mode::Rest, &[2.5, 1.0, -2.5], &mut u).unwrap();
        assert_eq!(u, [0.0; 3]);
    }

    #[test]
    fn force_out_of_range_is_an_error() {
        let c = ConstantController::new(ControlGains::new(1.0, 1.0).unwrap(), table());
        let mut u = [0.0];
        assert!(c.control_force(Mode::Control, &[1e9], &mut u).is_err());
    }

    #[test]
    fn adaptive_increments() {
        let c = AdaptiveController::new(law(), ControlGains::new(0.0, 0.0).unwrap(), table());
        assert_eq!(c.adaptive_step(0.0, 1.0, 2.0, 1.0), (0.01, 0.0));
        assert_eq!(c.adaptive_step(3.0, 1.0, 0.0, 0.0), (0.0, 0.0));
        let (d3, d4) = c.adaptive_step(3.0, 1.0, 0.5, 0.55125);
        assert!((d3 - 0.0055125).abs() < 1e-15);
        assert!((d4 - 0.01).abs() < 1e-15);
        // Phase I rate grows like e^{ηt}
        let (r0, _) = c.gain_rates(0.0, 2.0, 1.0);
        let (r5, _) = c.gain_rates(5.0, 2.0, 1.0);
        assert!((r5 / r0 - 1f64.exp()).abs() < 1e-12);
    }

    #[test]
    fn latch_holds_values() {
        let c = AdaptiveController::new(law(), ControlGains::new(0.0, 0.0).unwrap(), table());
        let mut g = c.start_gains();
        assert_eq!((g.alpha3, g.alpha4), (0.0, 0.0));
        g.alpha3 = 5.0;
        c.adaptive_reset(BoundaryKind::CtsEnd, &mut g);
        let mut u = [1.0];
        c.control_force(&g, &[2.0], &mut u).unwrap();
        assert_eq!(u, [0.0]);
        c.adaptive_reset(BoundaryKind::RtsEnd, &mut g);
        assert_eq!(g.alpha3, 5.0);
        assert!(!g.latched);
    }

    #[test]
    fn law_validation() {
        assert!(law().validate().is_ok());
        assert!(AdaptiveLaw { mu2: 0.0, ..law() }.validate().is_err());
        let parsed: AdaptiveLaw = toml::from_str("mu1 = 0.01\nmu2 = 0.01\nmu3 = 0.01\neta = 0.2").unwrap();
        assert_eq!(parsed, law());
    }
}
