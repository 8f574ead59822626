#![allow(dead_code)]

use fintstab_core::engine::{sup_norm_window, FnSystem};
use fintstab_core::{check_lemma1, integrate, AicSchedule, Mode, SimConfig, Trajectory};

/// Least-squares slope of `ln y` against `t` over the positive samples.
pub fn fitted_rate(times: &[f64], values: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(values)
        .filter(|(_, &v)| v > 0.0)
        .map(|(&t, &v)| (t, v.ln()))
        .collect();
    let n = pts.len() as f64;
    let (st, sy) = pts.iter().fold((0.0, 0.0), |(a, b), &(t, y)| (a + t, b + y));
    let (mt, my) = (st / n, sy / n);
    let (num, den) = pts.iter().fold((0.0, 0.0), |(a, b), &(t, y)| {
        (a + (t - mt) * (y - my), b + (t - mt).powi(2))
    });
    num / den
}

pub struct ComparisonRun {
    pub certified: bool,
    pub sigma: Option<f64>,
    pub trajectory: Trajectory,
    pub rate: f64,
}

/// Scalar comparison system `ṗ = -m1 p + m2 p(t-τ)` on control spans and
/// `ṗ = m3 p + m2 p(t-τ)` on rest spans, with `p = 1` on the initial interval.
pub fn comparison_scalar(m1: f64, m2: f64, m3: f64, tau: f64, cts: f64, window: f64, t_end: f64) -> ComparisonRun {
    let schedule = AicSchedule::periodic(cts, window, (t_end / window).ceil() as usize + 1).unwrap();
    let stats = schedule.stats().unwrap();
    let (certified, sigma) = check_lemma1(m1, m2, m3, &stats, tau);
    let sys = FnSystem::new(1, tau, |past, mode, out| {
        let t = past.time();
        let p = past.state()[0];
        let lagged = past.value(0, t - tau)?;
        out[0] = match mode {
            Mode::Control => -m1 * p + m2 * lagged,
            Mode::Rest => m3 * p + m2 * lagged,
        };
        Ok(())
    });
    let trajectory = integrate(&sys, &schedule, &[1.0], &SimConfig::new(1e-3, t_end).with_stride(10)).unwrap();
    let (ts, ps): (Vec<f64>, Vec<f64>) = (0..)
        .map_while(|k| schedule.window_start(k))
        .filter(|&s| s <= t_end)
        .map(|s| {
            (
                s,
                sup_norm_window(&trajectory.times, &trajectory.norm_inf, s, tau).unwrap(),
            )
        })
        .unzip();
    let rate = fitted_rate(&ts, &ps);
    ComparisonRun {
        certified,
        sigma,
        trajectory,
        rate,
    }
}

/// Exact value at `t = 2` of `ė = -e(t)·e(t-1)` with unit initial history:
/// `e^{-t}` on `[0, 1]`, then `e^{-1}·exp(e^{-(t-1)} - 1)`.
pub fn lag_exact_at_2() -> f64 {
    (-1.0f64).exp() * ((-1.0f64).exp() - 1.0).exp()
}

/// Final-time errors of `ė = -e(t)·e(t-1)` against [`lag_exact_at_2`].
pub fn lagged_decay_errors(steps: &[f64]) -> Vec<f64> {
    let schedule = AicSchedule::periodic(0.7, 1.1, 4).unwrap();
    let sys = FnSystem::new(1, 1.0, |past, _mode, out| {
        out[0] = -past.state()[0] * past.value(0, past.time() - 1.0)?;
        Ok(())
    });
    steps
        .iter()
        .map(|&h| {
            let traj = integrate(&sys, &schedule, &[1.0], &SimConfig::new(h, 2.0)).unwrap();
            (traj.error(traj.len() - 1)[0] - lag_exact_at_2()).abs()
        })
        .collect()
}

/// Final-time errors of `ė = -4e + sin(t)` against its closed form.
pub fn smooth_forced_errors(steps: &[f64]) -> Vec<f64> {
    let schedule = AicSchedule::periodic(0.7, 1.1, 4).unwrap();
    let sys = FnSystem::new(1, 0.5, |past, _mode, out| {
        out[0] = -4.0 * past.state()[0] + past.time().sin();
        Ok(())
    });
    let t_end: f64 = 2.0;
    let exact = {
        let c = 1.0 + 1.0 / 17.0;
        c * (-4.0 * t_end).exp() + (4.0 * t_end.sin() - t_end.cos()) / 17.0
    };
    steps
        .iter()
        .map(|&h| {
            let traj = integrate(&sys, &schedule, &[1.0], &SimConfig::new(h, t_end)).unwrap();
            (traj.error(traj.len() - 1)[0] - exact).abs()
        })
        .collect()
}

/// Observed orders `log2(err_k / err_{k+1})` for halving steps.
pub fn observed_orders(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}
