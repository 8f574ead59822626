//! Aperiodically intermittent control schedules.
//!
//! Boundaries `t_0 = 0 < t_1 < t_2 < ...` split time into windows
//! `[t_{2k}, t_{2k+2})`, each made of a closed control span `[t_{2k}, t_{2k+1}]`
//! followed by an open rest span `(t_{2k+1}, t_{2k+2})`.

use serde::{Deserialize, Serialize};

use crate::error::ScheduleError;

/// Infimum of control-span lengths and supremum of window lengths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpanStats {
    pub theta_low: f64,
    pub theta_high: f64,
}

impl SpanStats {
    pub fn new(theta_low: f64, theta_high: f64) -> Result<Self, ScheduleError> {
        if !(theta_low > 0.0 && theta_low <= theta_high && theta_high.is_finite()) {
            return Err(ScheduleError::Invalid(format!(
                "span stats need 0 < theta_low <= theta_high, got ({theta_low}, {theta_high})"
            )));
        }
        Ok(Self { theta_low, theta_high })
    }
}

/// Small-delay assumption: the delay bound must be strictly below the
/// shortest control span.
pub fn validate_delay(stats: &SpanStats, tau_bound: f64) -> bool {
    tau_bound < stats.theta_low
}

/// Rule used to extend a schedule beyond its stored prefix.
#[derive(Debug, Clone, PartialEq)]
pub enum Generator {
    /// `t_{2k+1} - t_{2k} = 0.8 + 0.1 sin k`, `t_{2k+2} - t_{2k} = 1 + 0.1 sin k`.
    Reference,
    Periodic {
        cts: f64,
        window: f64,
    },
    /// Fixed list, cannot be extended.
    Explicit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AicSchedule {
    boundaries: Vec<f64>,
    generator: Generator,
}

/// Window index and whether the instant falls in that window's control span.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Location {
    pub window: usize,
    pub in_cts: bool,
}

/// The reference schedule with `k_max` complete windows: `t_0 = 0`,
/// `t_1 = 0.8`, `t_2 = 1` and for `k >= 2`
/// `t_{2k-1} = k - 0.2 + 0.1 Σ_{l<k} sin l`, `t_{2k} = k + 0.1 Σ_{l<k} sin l`.
pub fn paper_schedule(k_max: usize) -> AicSchedule {
    let k_max = k_max.max(1);
    let mut b = Vec::with_capacity(2 * k_max + 1);
    b.push(0.0);
    let mut partial = 0.0;
    for k in 1..=k_max {
        if k >= 2 {
            partial += ((k - 1) as f64).sin();
        }
        let kf = k as f64;
        b.push(kf - 0.2 + 0.1 * partial);
        b.push(kf + 0.1 * partial);
    }
    AicSchedule {
        boundaries: b,
        generator: Generator::Reference,
    }
}

impl AicSchedule {
    /// Schedule from an explicit boundary list.
    pub fn explicit(boundaries: Vec<f64>) -> Result<Self, ScheduleError> {
        if boundaries.len() < 2 {
            return Err(ScheduleError::Invalid("need at least two boundaries".into()));
        }
        if boundaries[0] != 0.0 {
            return Err(ScheduleError::Invalid(format!(
                "first boundary must be 0, got {}",
                boundaries[0]
            )));
        }
        if let Some(w) = boundaries.windows(2).find(|w| !(w[1] > w[0]) || !w[1].is_finite()) {
            return Err(ScheduleError::Invalid(format!(
                "boundaries must be strictly increasing: {} then {}",
                w[0], w[1]
            )));
        }
        Ok(Self {
            boundaries,
            generator: Generator::Explicit,
        })
    }

    pub fn periodic(cts: f64, window: f64, k_max: usize) -> Result<Self, ScheduleError> {
        if !(cts > 0.0 && window > cts && window.is_finite()) {
            return Err(ScheduleError::Invalid(format!(
                "periodic schedule needs 0 < cts < window, got ({cts}, {window})"
            )));
        }
        let mut s = Self {
            boundaries: vec![0.0],
            generator: Generator::Periodic { cts, window },
        };
        s.grow_windows(k_max.max(1));
        Ok(s)
    }

    fn grow_windows(&mut self, windows: usize) {
        while self.complete_windows() < windows {
            let k = self.complete_windows();
            match self.generator {
                Generator::Reference => {
                    *self = paper_schedule(windows.max(2 * k));
                    return;
                }
                Generator::Periodic { cts, window } => {
                    let start = window * k as f64;
                    self.boundaries.push(start + cts);
                    self.boundaries.push(window * (k + 1) as f64);
                }
                Generator::Explicit => return,
            }
        }
    }

    /// Extends the stored prefix until its last boundary reaches `t`.
    /// Explicit schedules are returned unchanged.
    pub fn extended_to(&self, t: f64) -> Self {
        let mut s = self.clone();
        while s.last() < t && s.generator != Generator::Explicit {
            let want = (s.complete_windows() * 2).max(1);
            s.grow_windows(want);
        }
        s
    }

    pub fn boundaries(&self) -> &[f64] {
        &self.boundaries
    }

    pub fn generator(&self) -> &Generator {
        &self.generator
    }

    pub fn last(&self) -> f64 {
        *self.boundaries.last().expect("schedule is never empty")
    }

    pub fn complete_windows(&self) -> usize {
        (self.boundaries.len() - 1) / 2
    }

    /// Statistics the generator guarantees over all windows, when known.
    pub fn declared_stats(&self) -> Option<SpanStats> {
        match self.generator {
            Generator::Reference => Some(SpanStats {
                theta_low: 0.7,
                theta_high: 1.1,
            }),
            Generator::Periodic { cts, window } => Some(SpanStats {
                theta_low: cts,
                theta_high: window,
            }),
            Generator::Explicit => None,
        }
    }

    /// Realized statistics over the first `k_max` complete windows.
    pub fn compute_stats(&self, k_max: usize) -> Result<SpanStats, ScheduleError> {
        let available = self.complete_windows();
        if k_max == 0 || k_max > available {
            return Err(ScheduleError::InsufficientWindows {
                requested: k_max,
                available,
            });
        }
        let b = &self.boundaries;
        let (mut low, mut high) = (f64::INFINITY, f64::NEG_INFINITY);
        for k in 0..k_max {
            low = low.min(b[2 * k + 1] - b[2 * k]);
            high = high.max(b[2 * k + 2] - b[2 * k]);
        }
        SpanStats::new(low, high)
    }

    /// Declared statistics if the generator provides them, otherwise the
    /// realized statistics of every stored window.
    pub fn stats(&self) -> Result<SpanStats, ScheduleError> {
        match self.declared_stats() {
            Some(s) => Ok(s),
            None => self.compute_stats(self.complete_windows()),
        }
    }

    /// Human-readable notes for every stored window whose spans violate the
    /// declared statistics.
    pub fn declared_mismatches(&self) -> Vec<String> {
        let Some(declared) = self.declared_stats() else {
            return Vec::new();
        };
        let b = &self.boundaries;
        let tol = 1e-12;
        let mut notes = Vec::new();
        for k in 0..self.complete_windows() {
            let cts = b[2 * k + 1] - b[2 * k];
            let window = b[2 * k + 2] - b[2 * k];
            if cts < declared.theta_low - tol {
                notes.push(format!(
                    "window {k}: control span {cts} below declared theta_low {}",
                    declared.theta_low
                ));
            }
            if window > declared.theta_high + tol {
                notes.push(format!(
                    "window {k}: window length {window} above declared theta_high {}",
                    declared.theta_high
                ));
            }
        }
        notes
    }

    /// Window containing `t`; control spans are closed so `t_{2k+1}` is
    /// reported as control time.
    pub fn locate(&self, t: f64) -> Result<Location, ScheduleError> {
        let b = &self.boundaries;
        if !(t >= 0.0 && t < self.last()) {
            return Err(ScheduleError::OutOfSchedule(t));
        }
        // index of the last boundary <= t
        let i = b.partition_point(|&x| x <= t) - 1;
        let window = i / 2;
        let in_cts = i % 2 == 0 || t == b[i];
        Ok(Location { window, in_cts })
    }

    /// Start of window `k`, `t_{2k}`.
    pub fn window_start(&self, k: usize) -> Option<f64> {
        self.boundaries.get(2 * k).copied()
    }

    /// End of the control span of window `k`, `t_{2k+1}`.
    pub fn cts_end(&self, k: usize) -> Option<f64> {
        self.boundaries.get(2 * k + 1).copied()
    }
}
