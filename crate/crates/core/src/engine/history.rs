use std::collections::VecDeque;

use crate::error::SimError;

/// Sliding record of past states used for delayed lookups.
///
/// Before time zero the state equals the constant initial history. Between
/// stored samples values come from the cubic through the four nearest
/// samples, with stencils that never straddle a marked break (a sample where
/// the derivative may jump). Nothing is extrapolated.
#[derive(Debug, Clone)]
pub struct HistoryBuffer {
    dim: usize,
    initial: Vec<f64>,
    initial_norm: f64,
    times: VecDeque<f64>,
    states: VecDeque<f64>,
    norms: VecDeque<f64>,
    breaks: VecDeque<bool>,
    span: f64,
}

/// Relative slack for lookups that land on the newest sample up to rounding.
const TIME_EPS: f64 = 1e-12;

impl HistoryBuffer {
    /// `span` is the duration retained behind the newest sample.
    pub fn new(initial: &[f64], initial_norm: f64, span: f64) -> Self {
        let mut h = Self {
            dim: initial.len(),
            initial: initial.to_vec(),
            initial_norm,
            times: VecDeque::new(),
            states: VecDeque::new(),
            norms: VecDeque::new(),
            breaks: VecDeque::new(),
            span,
        };
        h.push(0.0, initial, initial_norm);
        h
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn first_time(&self) -> f64 {
        self.times[0]
    }

    pub fn last_time(&self) -> f64 {
        *self.times.back().expect("history holds at least one sample")
    }

    pub fn last_state(&self) -> impl Iterator<Item = f64> + '_ {
        let n = self.times.len() - 1;
        self.states.range(n * self.dim..(n + 1) * self.dim).copied()
    }

    fn state_at(&self, k: usize, c: usize) -> f64 {
        self.states[k * self.dim + c]
    }

    /// Appends a sample and drops samples older than the retained span,
    /// always keeping one sample at or before the span start.
    pub fn push(&mut self, t: f64, state: &[f64], norm: f64) {
        debug_assert_eq!(state.len(), self.dim);
        debug_assert!(self.times.back().is_none_or(|&last| t > last));
        self.times.push_back(t);
        self.states.extend(state.iter().copied());
        self.norms.push_back(norm);
        self.breaks.push_back(self.times.len() == 1);
        let keep_from = t - self.span;
        while self.times.len() > 2 && self.times[1] <= keep_from {
            self.times.pop_front();
            self.norms.pop_front();
            self.breaks.pop_front();
            self.states.drain(..self.dim);
        }
    }

    /// Marks the newest sample as a point where the derivative may jump.
    pub fn mark_break(&mut self) {
        if let Some(b) = self.breaks.back_mut() {
            *b = true;
        }
    }

    fn covered(&self, at: f64) -> Result<(), SimError> {
        let (from, to) = (self.first_time(), self.last_time());
        if at > 0.0 && (at < from || at > to + TIME_EPS * to.abs().max(1.0)) {
            return Err(SimError::HistoryGap { at, from, to });
        }
        Ok(())
    }

    /// Interpolated value of component `c` at time `at`.
    pub fn lookup(&self, c: usize, at: f64) -> Result<f64, SimError> {
        if at <= 0.0 {
            return Ok(self.initial[c]);
        }
        self.covered(at)?;
        let k = self.times.partition_point(|&s| s < at);
        if k >= self.times.len() {
            return Ok(self.state_at(self.times.len() - 1, c));
        }
        if k == 0 || self.times[k] == at {
            return Ok(self.state_at(k, c));
        }
        let (first, last) = self.stencil(k);
        let mut value = 0.0;
        for i in first..=last {
            let mut weight = 1.0;
            for j in first..=last {
                if j != i {
                    weight *= (at - self.times[j]) / (self.times[i] - self.times[j]);
                }
            }
            value += weight * self.state_at(i, c);
        }
        Ok(value)
    }

    /// Up to four consecutive sample indices around the interval
    /// `(times[k-1], times[k])` that stay within one smooth piece.
    fn stencil(&self, k: usize) -> (usize, usize) {
        let reach_lo = k.saturating_sub(3);
        let reach_hi = (k + 2).min(self.times.len() - 1);
        let lo = (reach_lo..k).rev().find(|&i| self.breaks[i]).unwrap_or(reach_lo);
        let hi = (k..=reach_hi).find(|&i| self.breaks[i]).unwrap_or(reach_hi);
        if hi - lo < 3 {
            return (lo, hi);
        }
        let first = k.saturating_sub(2).clamp(lo, hi - 3);
        (first, first + 3)
    }

    /// Largest interpolated monitor norm over `[from, last_time]`.
    pub fn sup_norm_since(&self, from: f64) -> f64 {
        let mut best = if from <= 0.0 { self.initial_norm } else { 0.0 };
        let k = self.times.partition_point(|&s| s < from);
        if k > 0 && k < self.times.len() {
            let (t0, t1) = (self.times[k - 1], self.times[k]);
            let w = (from - t0) / (t1 - t0);
            best = best.max(self.norms[k - 1] * (1.0 - w) + self.norms[k] * w);
        }
        self.norms.range(k.min(self.norms.len())..).fold(best, |a, &b| a.max(b))
    }
}

/// View of the past plus the state being evaluated at time `t`.
///
/// Lookups between the newest stored sample and `t` interpolate towards the
/// current state, so delays shorter than a step never read unknown values.
#[derive(Debug, Clone, Copy)]
pub struct Past<'a> {
    history: &'a HistoryBuffer,
    t: f64,
    state: &'a [f64],
}

impl<'a> Past<'a> {
    pub fn new(history: &'a HistoryBuffer, t: f64, state: &'a [f64]) -> Self {
        Self { history, t, state }
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn state(&self) -> &'a [f64] {
        self.state
    }

    pub fn history(&self) -> &'a HistoryBuffer {
        self.history
    }

    /// Component `c` at time `at <= t`.
    pub fn value(&self, c: usize, at: f64) -> Result<f64, SimError> {
        let last = self.history.last_time();
        if at <= last || at <= 0.0 {
            return self.history.lookup(c, at);
        }
        if at > self.t + TIME_EPS * self.t.abs().max(1.0) {
            return Err(SimError::HistoryGap {
                at,
                from: self.history.first_time(),
                to: self.t,
            });
        }
        if self.t <= last {
            return Ok(self.state[c]);
        }
        let prev = self.history.lookup(c, last)?;
        let w = ((at - last) / (self.t - last)).min(1.0);
        Ok(prev * (1.0 - w) + self.state[c] * w)
    }

    /// Windowed supremum of the monitor norm over `[t - tau, t]`, given the
    /// monitor norm of the current state.
    pub fn sup_norm(&self, tau: f64, current_norm: f64) -> f64 {
        self.history.sup_norm_since(self.t - tau).max(current_norm)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn initial_history_is_constant() {
        let h = HistoryBuffer::new(&[3.0, -1.0], 3.0, 1.0);
        assert_eq!(h.lookup(0, -0.4).unwrap(), 3.0);
        assert_eq!(h.lookup(1, 0.0).unwrap(), -1.0);
    }

    #[test]
    fn interpolates_and_prunes() {
        let mut h = HistoryBuffer::new(&[0.0], 0.0, 0.5);
        for k in 1..=100 {
            let t = k as f64 * 0.01;
            h.push(t, &[t], t);
        }
        assert!((h.lookup(0, 0.755).unwrap() - 0.755).abs() < 1e-12);
        assert!(h.first_time() <= 0.5 && h.first_time() > 0.45);
        assert!(matches!(h.lookup(0, 0.2), Err(SimError::HistoryGap { .. })));
        assert!(matches!(h.lookup(0, 1.5), Err(SimError::HistoryGap { .. })));
        assert!((h.sup_norm_since(0.6) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn past_interpolates_towards_current_state() {
        let mut h = HistoryBuffer::new(&[0.0], 0.0, 1.0);
        h.push(1.0, &[1.0], 1.0);
        let cur = [3.0];
        let p = Past::new(&h, 2.0, &cur);
        assert_eq!(p.value(0, 1.5).unwrap(), 2.0);
        assert_eq!(p.value(0, 0.5).unwrap(), 0.5);
        assert!(p.value(0, 2.5).is_err());
        assert_eq!(p.sup_norm(1.5, 3.0), 3.0);
    }

    #[test]
    fn sup_norm_includes_initial_history() {
        let mut h = HistoryBuffer::new(&[2.0], 2.0, 1.0);
        h.push(0.1, &[0.1], 0.1);
        assert_eq!(h.sup_norm_since(-0.4), 2.0);
        // interpolated left endpoint at 0.05 is 1.05
        assert!((h.sup_norm_since(0.05) - 1.05).abs() < 1e-12);
    }

    #[test]
    fn cubic_lookup_is_exact_for_cubics_and_respects_breaks() {
        let f = |t: f64| 1.0 - 2.0 * t + 0.5 * t * t - t * t * t;
        let mut h = HistoryBuffer::new(&[f(0.0)], 0.0, 10.0);
        for k in 1..=10 {
            let t = k as f64 * 0.1;
            h.push(t, &[f(t)], 0.0);
        }
        for at in [0.03, 0.37, 0.55, 0.96] {
            assert!((h.lookup(0, at).unwrap() - f(at)).abs() < 1e-13, "at {at}");
        }

        let kink = |t: f64| (t - 0.5).abs();
        let mut h = HistoryBuffer::new(&[kink(0.0)], 0.0, 10.0);
        for k in 1..=10 {
            let t = k as f64 * 0.1;
            h.push(t, &[kink(t)], 0.0);
            if k == 5 {
                h.mark_break();
            }
        }
        for at in [0.42, 0.47, 0.53, 0.58] {
            assert!((h.lookup(0, at).unwrap() - kink(at)).abs() < 1e-13, "at {at}");
        }
    }
}
