//! Open-loop plants whose synchronization or stabilization error is driven to
//! zero by the intermittent controllers.
//!
//! A plant integrates some state (the error itself, or a master/slave pair)
//! and exposes the monitored error plus the hooks a closed loop needs: where
//! the control enters and how to pin one error component to zero.

mod delay;
mod nn;

pub use delay::{DelayFn, DelaySpec};
pub use nn::{
    derive_alpha12, nn_error_rhs, paper_nn, reference_network_spec, MasterOnly, MasterSlavePair, NetworkSpec, NeuralNet,
};

use serde::{Deserialize, Serialize};

use crate::engine::Past;
use crate::error::SimError;

/// Scalar activation functions for the neural network plants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    /// `(|x + 1| - |x - 1|) / 2`
    Saturation,
    Tanh,
    Identity,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Saturation => ((x + 1.0).abs() - (x - 1.0).abs()) / 2.0,
            Activation::Tanh => x.tanh(),
            Activation::Identity => x,
        }
    }

    /// Smallest global Lipschitz constant.
    pub fn lipschitz(self) -> f64 {
        1.0
    }
}

/// A plant as seen by a closed loop.
///
/// `drift` writes the uncontrolled derivative of the first `state_dim`
/// components; the closed loop then adds the control through `inject`.
pub trait ErrorPlant: Send + Sync {
    fn state_dim(&self) -> usize;

    fn error_dim(&self) -> usize;

    fn delay_bound(&self) -> f64;

    fn initial_state(&self) -> Vec<f64>;

    fn drift(&self, past: &Past<'_>, out: &mut [f64]) -> Result<(), SimError>;

    fn error(&self, state: &[f64], out: &mut [f64]);

    /// Adds the control vector `u` (one entry per error component) to a
    /// state derivative.
    fn inject(&self, u: &[f64], deriv: &mut [f64]);

    /// Error-space rate corresponding to a state derivative.
    fn error_rate(&self, deriv: &[f64], out: &mut [f64]);

    /// Moves `state` so that error component `i` is exactly zero.
    fn clamp_error(&self, state: &mut [f64], i: usize);
}

/// One delayed term `gain · e_i(t - τ_i(t))` of a generic plant.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayTerm {
    pub gain: f64,
    pub delay: DelayFn,
}

/// `ė_i = α1 e_i + Σ_m gain_m e_i(t - τ_i^m(t)) + u_i`, componentwise.
///
/// Delays are evaluated with `i` the 1-based component and `j` the 1-based
/// term index.
#[derive(Debug, Clone, PartialEq)]
pub struct GenericDelayPlant {
    alpha1: f64,
    terms: Vec<DelayTerm>,
    init: Vec<f64>,
}

impl GenericDelayPlant {
    pub fn new(alpha1: f64, terms: Vec<DelayTerm>, init: Vec<f64>) -> Result<Self, String> {
        if init.is_empty() {
            return Err("plant needs at least one component".into());
        }
        if !alpha1.is_finite() {
            return Err(format!("alpha1 must be finite, got {alpha1}"));
        }
        if let Some(t) = terms.iter().find(|t| !(t.gain >= 0.0 && t.gain.is_finite())) {
            return Err(format!("delayed gains must be nonnegative, got {}", t.gain));
        }
        Ok(Self { alpha1, terms, init })
    }

    pub fn alpha1(&self) -> f64 {
        self.alpha1
    }

    /// Aggregate delayed gain reported to the certificate.
    pub fn alpha2(&self) -> f64 {
        self.terms.iter().map(|t| t.gain).sum()
    }

    pub fn terms(&self) -> &[DelayTerm] {
        &self.terms
    }

    pub fn dim(&self) -> usize {
        self.init.len()
    }
}

/// Derivative of the generic plant under control `u`.
pub fn generic_rhs(plant: &GenericDelayPlant, past: &Past<'_>, u: &[f64], out: &mut [f64]) -> Result<(), SimError> {
    let t = past.time();
    let e = past.state();
    for i in 0..plant.dim() {
        let mut d = plant.alpha1 * e[i] + u[i];
        for (m, term) in plant.terms.iter().enumerate() {
            let tau = term.delay.eval(i + 1, m + 1, t)?;
            d += term.gain * past.value(i, t - tau)?;
        }
        out[i] = d;
    }
    Ok(())
}

impl ErrorPlant for GenericDelayPlant {
    fn state_dim(&self) -> usize {
        self.dim()
    }

    fn error_dim(&self) -> usize {
        self.dim()
    }

    fn delay_bound(&self) -> f64 {
        self.terms.iter().map(|t| t.delay.bound()).fold(0.0, f64::max)
    }

    fn initial_state(&self) -> Vec<f64> {
        self.init.clone()
    }

    fn drift(&self, past: &Past<'_>, out: &mut [f64]) -> Result<(), SimError> {
        let zero = vec![0.0; self.dim()];
        generic_rhs(self, past, &zero, out)
    }

    fn error(&self, state: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&state[..self.dim()]);
    }

    fn inject(&self, u: &[f64], deriv: &mut [f64]) {
        for (d, ui) in deriv.iter_mut().zip(u) {
            *d += ui;
        }
    }

    fn error_rate(&self, deriv: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&deriv[..self.dim()]);
    }

    fn clamp_error(&self, state: &mut [f64], i: usize) {
        state[i] = 0.0;
    }
}
