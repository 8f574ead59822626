//! A plant wired to a controller, ready for [`integrate`](crate::engine::integrate).
//!
//! With the adaptive controller the two gains are appended to the plant
//! state and integrated with the same Runge–Kutta stages.
//!
//! The sign term of the controller makes the closed loop discontinuous on
//! `e_i = 0`. Finished control steps are corrected: when a component
//! crosses or leaves zero within a step and the uncontrolled drift of that
//! component is dominated by `α4`, the component is placed exactly on the
//! surface, where the Filippov solution slides.

use crate::controllers::{AdaptiveGains, Controller};
use crate::engine::{norm_inf, DelaySystem, Mode, Past, StepView};
use crate::error::SimError;
use crate::plants::ErrorPlant;

pub struct ClosedLoop<P> {
    plant: P,
    controller: Controller,
}

impl<P: ErrorPlant> ClosedLoop<P> {
    pub fn new(plant: P, controller: Controller) -> Self {
        Self { plant, controller }
    }

    pub fn plant(&self) -> &P {
        &self.plant
    }

    pub fn controller(&self) -> &Controller {
        &self.controller
    }

    /// Plant state followed by the starting gains when adaptive.
    pub fn initial_state(&self) -> Vec<f64> {
        let mut s = self.plant.initial_state();
        if let Controller::Adaptive(c) = &self.controller {
            s.push(c.initial.alpha3);
            s.push(c.initial.alpha4);
        }
        s
    }

    fn adaptive_gains(&self, state: &[f64], mode: Mode) -> AdaptiveGains {
        let sd = self.plant.state_dim();
        AdaptiveGains {
            alpha3: state[sd],
            alpha4: state[sd + 1],
            latched: mode == Mode::Rest,
        }
    }

    fn force(&self, state: &[f64], mode: Mode, e: &[f64], u: &mut [f64]) -> Result<(), SimError> {
        match &self.controller {
            Controller::None => u.fill(0.0),
            Controller::Constant(c) => c.control_force(mode, e, u)?,
            Controller::Adaptive(c) => c.control_force(&self.adaptive_gains(state, mode), e, u)?,
        }
        Ok(())
    }

    /// Sign-term amplitude in force at the start of a step, if any.
    fn sign_gain(&self, start: &[f64]) -> Option<f64> {
        match &self.controller {
            Controller::None => None,
            Controller::Constant(c) => Some(c.gains.alpha4),
            Controller::Adaptive(_) => Some(start[self.plant.state_dim() + 1]),
        }
    }
}

impl<P: ErrorPlant> DelaySystem for ClosedLoop<P> {
    fn dim(&self) -> usize {
        let extra = if matches!(self.controller, Controller::Adaptive(_)) {
            2
        } else {
            0
        };
        self.plant.state_dim() + extra
    }

    fn error_dim(&self) -> usize {
        self.plant.error_dim()
    }

    fn delay_bound(&self) -> f64 {
        self.plant.delay_bound()
    }

    fn derivative(&self, past: &Past<'_>, mode: Mode, out: &mut [f64]) -> Result<(), SimError> {
        let sd = self.plant.state_dim();
        let state = past.state();
        self.plant.drift(past, &mut out[..sd])?;
        let mut e = vec![0.0; self.plant.error_dim()];
        self.plant.error(&state[..sd], &mut e);
        let mut u = vec![0.0; e.len()];
        self.force(state, mode, &e, &mut u)?;
        self.plant.inject(&u, &mut out[..sd]);

        if let Controller::Adaptive(c) = &self.controller {
            let (r3, r4) = match mode {
                Mode::Rest => (0.0, 0.0),
                Mode::Control => {
                    let sup = past.sup_norm(self.plant.delay_bound(), norm_inf(&e));
                    let mut q_inf = 0.0f64;
                    for &ei in &e {
                        q_inf = q_inf.max(c.quantizer.quantize(ei)?.abs());
                    }
                    c.gain_rates(past.time(), sup, q_inf)
                }
            };
            out[sd] = r3;
            out[sd + 1] = r4;
        }
        Ok(())
    }

    fn error(&self, state: &[f64], out: &mut [f64]) {
        self.plant.error(&state[..self.plant.state_dim()], out);
    }

    fn control(&self, past: &Past<'_>, mode: Mode, out: &mut [f64]) -> Result<(), SimError> {
        let state = past.state();
        let mut e = vec![0.0; self.plant.error_dim()];
        self.error(state, &mut e);
        self.force(state, mode, &e, out)
    }

    fn gains(&self, state: &[f64]) -> Option<(f64, f64)> {
        match &self.controller {
            Controller::None => None,
            Controller::Constant(c) => Some((c.gains.alpha3, c.gains.alpha4)),
            Controller::Adaptive(_) => {
                let sd = self.plant.state_dim();
                Some((state[sd], state[sd + 1]))
            }
        }
    }

    fn correct_step(&self, step: &StepView<'_>, end: &mut [f64]) -> Result<(), SimError> {
        if step.mode != Mode::Control {
            return Ok(());
        }
        let Some(alpha4) = self.sign_gain(step.start) else {
            return Ok(());
        };
        let ed = self.plant.error_dim();
        let mut e0 = vec![0.0; ed];
        self.error(step.start, &mut e0);
        let mut later = vec![vec![0.0; ed]; 4];
        for (buf, s) in later.iter_mut().zip(step.stages.iter().copied().chain([&*end])) {
            self.error(s, buf);
        }
        let mut drift_rate: Option<Vec<f64>> = None;
        for i in 0..ed {
            let crossed = if e0[i] == 0.0 {
                later.iter().any(|e| e[i] != 0.0)
            } else {
                later.iter().any(|e| e[i] * e0[i] <= 0.0)
            };
            if !crossed {
                continue;
            }
            if drift_rate.is_none() {
                let sd = self.plant.state_dim();
                let mut deriv = vec![0.0; sd];
                self.plant
                    .drift(&Past::new(step.history, step.t, step.start), &mut deriv)?;
                let mut rate = vec![0.0; ed];
                self.plant.error_rate(&deriv, &mut rate);
                drift_rate = Some(rate);
            }
            if drift_rate.as_ref().is_some_and(|r| r[i].abs() < alpha4) {
                self.plant.clamp_error(end, i);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certificate::ControlGains;
    use crate::controllers::{AdaptiveController, AdaptiveLaw, ConstantController};
    use crate::engine::{integrate, SimConfig};
    use crate::plants::{DelaySpec, DelayTerm, GenericDelayPlant};
    use crate::quantizer::{build_levels, QuantizerSpec, SIMULATION_MAX_LEVELS};
    use crate::schedule::AicSchedule;

    fn table() -> crate::quantizer::LevelTable {
        build_levels(&QuantizerSpec::reference_example(SIMULATION_MAX_LEVELS), 100.0).unwrap()
    }

    fn scalar_plant(alpha1: f64, init: f64) -> GenericDelayPlant {
        let delay = DelaySpec::Constant { value: 0.2 }.compile().unwrap();
        GenericDelayPlant::new(alpha1, vec![DelayTerm { gain: 0.1, delay }], vec![init]).unwrap()
    }

    #[test]
    fn sign_control_reaches_zero_exactly() {
        let ctl = ConstantController::new(ControlGains::new(5.0, 2.0).unwrap(), table());
        let sys = ClosedLoop::new(scalar_plant(0.5, 1.0), Controller::Constant(ctl));
        let sched = AicSchedule::periodic(0.8, 1.0, 20).unwrap();
        let traj = integrate(&sys, &sched, &sys.initial_state(), &SimConfig::new(1e-3, 10.0)).unwrap();
        let last = traj.len() - 1;
        assert_eq!(traj.error(last)[0], 0.0);
        assert!(traj.norm_inf.contains(&0.0));
    }

    #[test]
    fn weak_sign_gain_does_not_slide() {
        // drift 0.5·e + 0.1·e(t - 0.2) is not dominated near e = 0 with a
        // delayed value of 1, so no clamping may happen while it is large
        let ctl = ConstantController::new(ControlGains::new(0.0, 0.01).unwrap(), table());
        let sys = ClosedLoop::new(scalar_plant(0.5, 1.0), Controller::Constant(ctl));
        let sched = AicSchedule::periodic(0.8, 1.0, 3).unwrap();
        let traj = integrate(&sys, &sched, &sys.initial_state(), &SimConfig::new(1e-3, 2.0)).unwrap();
        assert!(traj.norm_inf.iter().all(|&n| n > 1.0 - 1e-12));
    }

    #[test]
    fn adaptive_gains_are_monotone_and_frozen_in_rest() {
        let law = AdaptiveLaw {
            mu1: 0.5,
            mu2: 0.5,
            mu3: 0.5,
            eta: 0.2,
            zero_tol: 1e-9,
        };
        let ctl = AdaptiveController::new(law, ControlGains::new(0.0, 0.0).unwrap(), table());
        let sys = ClosedLoop::new(scalar_plant(0.2, 2.0), Controller::Adaptive(ctl));
        assert_eq!(sys.dim(), 3);
        let sched = AicSchedule::periodic(0.8, 1.0, 10).unwrap();
        let traj = integrate(&sys, &sched, &sys.initial_state(), &SimConfig::new(1e-3, 6.0)).unwrap();
        let g: Vec<(f64, f64)> = traj.gains.iter().map(|g| g.unwrap()).collect();
        assert!(g.windows(2).all(|w| w[1].0 >= w[0].0 && w[1].1 >= w[0].1));
        for k in 1..traj.len() {
            if !traj.in_cts[k] && !traj.in_cts[k - 1] {
                assert_eq!(g[k], g[k - 1]);
            }
            if !traj.in_cts[k] {
                assert!(traj.control(k).iter().all(|&u| u == 0.0));
            }
        }
        assert!(g.last().unwrap().0 > 0.0);
    }

    #[test]
    fn zero_error_is_a_fixed_point() {
        let ctl = ConstantController::new(ControlGains::new(5.0, 2.0).unwrap(), table());
        let sys = ClosedLoop::new(scalar_plant(0.5, 0.0), Controller::Constant(ctl));
        let sched = AicSchedule::periodic(0.8, 1.0, 5).unwrap();
        let traj = integrate(&sys, &sched, &sys.initial_state(), &SimConfig::new(1e-3, 4.0)).unwrap();
        assert!(traj.norm_inf.iter().all(|&n| n == 0.0));
        assert!(traj.controls.iter().all(|&u| u == 0.0));
    }
}
