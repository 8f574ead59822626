//! Fixed-step integration of delay differential equations whose right-hand
//! side switches at intermittent-control boundaries.
//!
//! Steps are classical fourth-order Runge–Kutta of nominal size `h`, clipped
//! so that every schedule boundary is a step endpoint. Delayed values come
//! from [`HistoryBuffer`] interpolation, including at intermediate stage
//! times.

mod diagnostics;
mod history;

pub use diagnostics::{
    detect_phase1_end, detect_settling, sup_norm_window, window_decrease_audit, AuditEntry, WindowAudit,
};
pub use history::{HistoryBuffer, Past};

use serde::{Deserialize, Serialize};

use crate::error::SimError;
use crate::schedule::AicSchedule;

/// Whether the controller acts during a step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Control,
    Rest,
}

/// Which kind of span a boundary closes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryKind {
    CtsEnd,
    RtsEnd,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub step: f64,
    pub t_end: f64,
    #[serde(default = "default_settle_tol")]
    pub settle_tol: f64,
    #[serde(default = "default_stride")]
    pub record_stride: usize,
}

fn default_settle_tol() -> f64 {
    1e-3
}

fn default_stride() -> usize {
    1
}

impl SimConfig {
    pub fn new(step: f64, t_end: f64) -> Self {
        Self {
            step,
            t_end,
            settle_tol: default_settle_tol(),
            record_stride: 1,
        }
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.record_stride = stride;
        self
    }

    pub fn validate(&self, delay_bound: f64) -> Result<(), SimError> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(SimError::InvalidConfig(format!(
                "step must be positive, got {}",
                self.step
            )));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(SimError::InvalidConfig(format!(
                "t_end must be positive, got {}",
                self.t_end
            )));
        }
        if !(self.settle_tol > 0.0) {
            return Err(SimError::InvalidConfig("settle_tol must be positive".into()));
        }
        if self.record_stride == 0 {
            return Err(SimError::InvalidConfig("record_stride must be at least 1".into()));
        }
        if delay_bound > 0.0 && self.step > delay_bound / 4.0 * (1.0 + 1e-12) {
            return Err(SimError::InvalidConfig(format!(
                "step {} exceeds a quarter of the delay bound {delay_bound}",
                self.step
            )));
        }
        Ok(())
    }
}

/// One completed step, handed to [`DelaySystem::correct_step`].
pub struct StepView<'a> {
    pub t: f64,
    pub dt: f64,
    pub mode: Mode,
    pub start: &'a [f64],
    /// States at which stages two to four were evaluated.
    pub stages: [&'a [f64]; 3],
    pub history: &'a HistoryBuffer,
}

/// A delay system integrated by [`integrate`].
///
/// The integrated state may be larger than the monitored error (coupled
/// master/slave copies, adaptive gains); `error` maps one to the other.
pub trait DelaySystem {
    fn dim(&self) -> usize;

    fn error_dim(&self) -> usize;

    /// Upper bound on every delay the system samples.
    fn delay_bound(&self) -> f64;

    /// Writes the state derivative at `past.time()` for `past.state()`.
    fn derivative(&self, past: &Past<'_>, mode: Mode, out: &mut [f64]) -> Result<(), SimError>;

    fn error(&self, state: &[f64], out: &mut [f64]);

    /// Control vector applied at the given instant, for recording.
    fn control(&self, _past: &Past<'_>, _mode: Mode, out: &mut [f64]) -> Result<(), SimError> {
        out.fill(0.0);
        Ok(())
    }

    fn gains(&self, _state: &[f64]) -> Option<(f64, f64)> {
        None
    }

    /// Adjusts the end state of a finished step.
    fn correct_step(&self, _step: &StepView<'_>, _end: &mut [f64]) -> Result<(), SimError> {
        Ok(())
    }

    fn on_boundary(&self, _t: f64, _kind: BoundaryKind, _state: &mut [f64]) {}
}

/// Closure-backed system whose whole state is the monitored error.
pub struct FnSystem<F> {
    dim: usize,
    delay_bound: f64,
    rhs: F,
}

impl<F> FnSystem<F>
where
    F: Fn(&Past<'_>, Mode, &mut [f64]) -> Result<(), SimError>,
{
    pub fn new(dim: usize, delay_bound: f64, rhs: F) -> Self {
        Self { dim, delay_bound, rhs }
    }
}

impl<F> DelaySystem for FnSystem<F>
where
    F: Fn(&Past<'_>, Mode, &mut [f64]) -> Result<(), SimError>,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn error_dim(&self) -> usize {
        self.dim
    }

    fn delay_bound(&self) -> f64 {
        self.delay_bound
    }

    fn derivative(&self, past: &Past<'_>, mode: Mode, out: &mut [f64]) -> Result<(), SimError> {
        (self.rhs)(past, mode, out)
    }

    fn error(&self, state: &[f64], out: &mut [f64]) {
        out.copy_from_slice(state);
    }
}

pub fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn norm_2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Recorded samples of a run, stored column-wise.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub error_dim: usize,
    pub times: Vec<f64>,
    /// Row-major `times.len() × error_dim`.
    pub errors: Vec<f64>,
    pub controls: Vec<f64>,
    pub norm_inf: Vec<f64>,
    pub norm_2: Vec<f64>,
    pub in_cts: Vec<bool>,
    pub gains: Vec<Option<(f64, f64)>>,
    pub final_state: Vec<f64>,
    pub steps: usize,
    pub delay_bound: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn error(&self, k: usize) -> &[f64] {
        &self.errors[k * self.error_dim..(k + 1) * self.error_dim]
    }

    pub fn control(&self, k: usize) -> &[f64] {
        &self.controls[k * self.error_dim..(k + 1) * self.error_dim]
    }

    pub fn t_end(&self) -> Option<f64> {
        self.times.last().copied()
    }

    /// Index of the last record with time `<= t`.
    pub fn index_at(&self, t: f64) -> Option<usize> {
        self.times.partition_point(|&s| s <= t).checked_sub(1)
    }

    pub fn has_gains(&self) -> bool {
        self.gains.iter().any(Option::is_some)
    }
}

struct Recorder<'a, S: DelaySystem + ?Sized> {
    sys: &'a S,
    traj: Trajectory,
    err: Vec<f64>,
    ctl: Vec<f64>,
}

impl<S: DelaySystem + ?Sized> Recorder<'_, S> {
    fn record(&mut self, t: f64, state: &[f64], history: &HistoryBuffer, mode: Mode) -> Result<(), SimError> {
        self.sys.error(state, &mut self.err);
        let past = Past::new(history, t, state);
        self.sys.control(&past, mode, &mut self.ctl)?;
        let tr = &mut self.traj;
        tr.times.push(t);
        tr.errors.extend_from_slice(&self.err);
        tr.controls.extend_from_slice(&self.ctl);
        tr.norm_inf.push(norm_inf(&self.err));
        tr.norm_2.push(norm_2(&self.err));
        tr.in_cts.push(mode == Mode::Control);
        tr.gains.push(self.sys.gains(state));
        Ok(())
    }
}

/// Number of steps covering a segment of length `len`; a remainder shorter
/// than a thousandth of `h` is absorbed by the last step.
fn segment_steps(len: f64, h: f64) -> usize {
    let r = len / h;
    let mut n = r.ceil().max(1.0) as usize;
    if n > 1 && r - ((n - 1) as f64) < 1e-3 {
        n -= 1;
    }
    n
}

/// Integrates `sys` from the constant initial history `init` over
/// `[0, cfg.t_end]`.
///
/// Control spans of `schedule` run in [`Mode::Control`], rest spans in
/// [`Mode::Rest`]. Samples are recorded every `record_stride` steps and at
/// every boundary, plus the initial and final instants.
pub fn integrate<S: DelaySystem + ?Sized>(
    sys: &S,
    schedule: &AicSchedule,
    init: &[f64],
    cfg: &SimConfig,
) -> Result<Trajectory, SimError> {
    let dim = sys.dim();
    if init.len() != dim {
        return Err(SimError::InvalidConfig(format!(
            "initial state has {} components, system has {dim}",
            init.len()
        )));
    }
    if init.iter().any(|x| !x.is_finite()) {
        return Err(SimError::NonFinite { t: 0.0 });
    }
    let tau = sys.delay_bound();
    cfg.validate(tau)?;
    let h = cfg.step;
    let schedule = schedule.extended_to(cfg.t_end);
    if schedule.last() < cfg.t_end {
        return Err(SimError::InvalidConfig(format!(
            "schedule ends at {} before t_end {}",
            schedule.last(),
            cfg.t_end
        )));
    }

    let mut err = vec![0.0; sys.error_dim()];
    sys.error(init, &mut err);
    let mut history = HistoryBuffer::new(init, norm_inf(&err), tau + 4.0 * h);
    let mut rec = Recorder {
        sys,
        traj: Trajectory {
            error_dim: sys.error_dim(),
            delay_bound: tau,
            ..Default::default()
        },
        err: err.clone(),
        ctl: vec![0.0; sys.error_dim()],
    };
    rec.record(0.0, init, &history, Mode::Control)?;

    let mut y = init.to_vec();
    let mut k1 = vec![0.0; dim];
    let mut k2 = vec![0.0; dim];
    let mut k3 = vec![0.0; dim];
    let mut k4 = vec![0.0; dim];
    let mut y2 = vec![0.0; dim];
    let mut y3 = vec![0.0; dim];
    let mut y4 = vec![0.0; dim];
    let mut next = vec![0.0; dim];
    let mut steps = 0usize;

    let bounds = schedule.boundaries();
    for (seg, w) in bounds.windows(2).enumerate() {
        let start = w[0];
        if start >= cfg.t_end {
            break;
        }
        let end = w[1].min(cfg.t_end);
        let mode = if seg % 2 == 0 { Mode::Control } else { Mode::Rest };
        let n = segment_steps(end - start, h);
        for i in 0..n {
            let t0 = start + i as f64 * h;
            let t1 = if i + 1 == n { end } else { start + (i + 1) as f64 * h };
            let dt = t1 - t0;
            let tm = t0 + 0.5 * dt;

            sys.derivative(&Past::new(&history, t0, &y), mode, &mut k1)?;
            axpy(&mut y2, &y, 0.5 * dt, &k1);
            sys.derivative(&Past::new(&history, tm, &y2), mode, &mut k2)?;
            axpy(&mut y3, &y, 0.5 * dt, &k2);
            sys.derivative(&Past::new(&history, tm, &y3), mode, &mut k3)?;
            axpy(&mut y4, &y, dt, &k3);
            sys.derivative(&Past::new(&history, t1, &y4), mode, &mut k4)?;
            for c in 0..dim {
                next[c] = y[c] + dt / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
            }
            sys.correct_step(
                &StepView {
                    t: t0,
                    dt,
                    mode,
                    start: &y,
                    stages: [&y2, &y3, &y4],
                    history: &history,
                },
                &mut next,
            )?;
            if next.iter().any(|x| !x.is_finite()) {
                return Err(SimError::NonFinite { t: t1 });
            }
            std::mem::swap(&mut y, &mut next);
            steps += 1;

            let at_boundary = i + 1 == n;
            if at_boundary && t1 < cfg.t_end {
                let kind = if mode == Mode::Control {
                    BoundaryKind::CtsEnd
                } else {
                    BoundaryKind::RtsEnd
                };
                sys.on_boundary(t1, kind, &mut y);
            }
            sys.error(&y, &mut err);
            history.push(t1, &y, norm_inf(&err));
            if at_boundary {
                history.mark_break();
            }
            if at_boundary || steps.is_multiple_of(cfg.record_stride) {
                // boundary instants belong to a control span
                let rec_mode = if at_boundary && t1 < cfg.t_end {
                    Mode::Control
                } else {
                    mode
                };
                rec.record(t1, &y, &history, rec_mode)?;
            }
        }
    }

    let mut traj = rec.traj;
    traj.final_state = y;
    traj.steps = steps;
    Ok(traj)
}

fn axpy(out: &mut [f64], y: &[f64], a: f64, k: &[f64]) {
    for ((o, yi), ki) in out.iter_mut().zip(y).zip(k) {
        *o = yi + a * ki;
    }
}
