//! Post-hoc diagnostics over recorded trajectories: windowed suprema, phase
//! detection and the per-window decrease audit.

use serde::Serialize;

use super::Trajectory;
use crate::error::SimError;
use crate::schedule::AicSchedule;

/// Maximum of the interpolated norm series over `[t - tau, t]`, evaluated at
/// every sample inside the window and at both endpoints.
///
/// A window reaching before the first sample is accepted only when that
/// sample is at time zero, where the history is constant.
pub fn sup_norm_window(times: &[f64], norms: &[f64], t: f64, tau: f64) -> Result<f64, SimError> {
    let from = t - tau;
    let (Some(&first), Some(&last)) = (times.first(), times.last()) else {
        return Err(SimError::WindowNotCovered { from, to: t });
    };
    if t > last || t < first || (from < first && first != 0.0) {
        return Err(SimError::WindowNotCovered { from, to: t });
    }
    let interp = |s: f64| -> f64 {
        if s <= first {
            return norms[0];
        }
        let k = times.partition_point(|&x| x < s);
        if times[k] == s {
            return norms[k];
        }
        let w = (s - times[k - 1]) / (times[k] - times[k - 1]);
        norms[k - 1] * (1.0 - w) + norms[k] * w
    };
    let lo = times.partition_point(|&x| x < from);
    let hi = times.partition_point(|&x| x <= t);
    let inner = norms[lo..hi].iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(inner.max(interp(from)).max(interp(t)))
}

fn windowed_sups(traj: &Trajectory, tau: f64) -> Vec<f64> {
    traj.times
        .iter()
        .map(|&t| sup_norm_window(&traj.times, &traj.norm_inf, t, tau).unwrap_or(f64::INFINITY))
        .collect()
}

/// Earliest recorded time from which the windowed supremum of `‖e‖∞` stays
/// at or below one for the rest of the run.
pub fn detect_phase1_end(traj: &Trajectory, tau_bound: f64) -> Option<f64> {
    let sups = windowed_sups(traj, tau_bound);
    let k = sups.iter().rposition(|&s| s > 1.0).map_or(0, |k| k + 1);
    traj.times.get(k).copied()
}

/// Earliest recorded time after which `‖e‖∞ <= tol` holds through the end of
/// the run, provided that tail lasts at least `hold`.
pub fn detect_settling(traj: &Trajectory, tol: f64, hold: f64) -> Option<f64> {
    let end = traj.t_end()?;
    let k = traj.norm_inf.iter().rposition(|&n| n > tol).map_or(0, |k| k + 1);
    let t = *traj.times.get(k)?;
    (end - t >= hold).then_some(t)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AuditEntry {
    pub window: usize,
    pub start_sup: f64,
    pub end_sup: f64,
    pub decrease: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowAudit {
    pub entries: Vec<AuditEntry>,
}

impl WindowAudit {
    pub fn passed(&self) -> bool {
        self.entries.iter().all(|e| e.passed)
    }

    /// Largest (least negative) reported decrease.
    pub fn worst(&self) -> Option<f64> {
        self.entries.iter().map(|e| e.decrease).reduce(f64::max)
    }
}

/// Audits the windowed supremum at consecutive window starts from
/// `from_window` on, while it exceeds `tol`.
///
/// A window passes when its end value is at most `max(start - phi, 0)` up to
/// `1e-6`: the supremum drops by `phi` or reaches zero.
pub fn window_decrease_audit(
    traj: &Trajectory,
    schedule: &AicSchedule,
    phi: f64,
    from_window: usize,
    tol: f64,
) -> WindowAudit {
    let tau = traj.delay_bound;
    let mut entries = Vec::new();
    let Some(t_end) = traj.t_end() else {
        return WindowAudit { entries };
    };
    let mut k = from_window;
    while let (Some(a), Some(b)) = (schedule.window_start(k), schedule.window_start(k + 1)) {
        if b > t_end {
            break;
        }
        let (Ok(start_sup), Ok(end_sup)) = (
            sup_norm_window(&traj.times, &traj.norm_inf, a, tau),
            sup_norm_window(&traj.times, &traj.norm_inf, b, tau),
        ) else {
            break;
        };
        if start_sup <= tol {
            break;
        }
        let decrease = end_sup - start_sup;
        entries.push(AuditEntry {
            window: k,
            start_sup,
            end_sup,
            decrease,
            passed: end_sup <= (start_sup - phi).max(0.0) + 1e-6,
        });
        k += 1;
    }
    WindowAudit { entries }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_traj(times: Vec<f64>, values: Vec<f64>, tau: f64) -> Trajectory {
        let n = times.len();
        Trajectory {
            error_dim: 1,
            norm_inf: values.iter().map(|v| v.abs()).collect(),
            norm_2: values.iter().map(|v| v.abs()).collect(),
            errors: values,
            controls: vec![0.0; n],
            in_cts: vec![true; n],
            gains: vec![None; n],
            times,
            final_state: vec![],
            steps: n,
            delay_bound: tau,
        }
    }

    #[test]
    fn sup_of_constant_history() {
        let tr = scalar_traj(vec![0.0, 0.1, 0.2], vec![-3.0, -3.0, -3.0], 0.5);
        assert_eq!(sup_norm_window(&tr.times, &tr.norm_inf, 0.2, 0.5).unwrap(), 3.0);
    }

    #[test]
    fn sup_of_ramp() {
        let times: Vec<f64> = (0..=100).map(|k| k as f64 / 100.0).collect();
        let tr = scalar_traj(times.clone(), times, 0.5);
        assert_eq!(sup_norm_window(&tr.times, &tr.norm_inf, 1.0, 0.5).unwrap(), 1.0);
    }

    #[test]
    fn sup_matches_exhaustive_scan() {
        let times: Vec<f64> = (0..200).map(|k| k as f64 * 0.05).collect();
        let vals: Vec<f64> = times
            .iter()
            .map(|t| {
                (-t).exp()
                    + if (t * 7.0).sin() > 0.95 {
                        2.0 * (t * 3.0).cos().abs()
                    } else {
                        0.0
                    }
            })
            .collect();
        let tr = scalar_traj(times.clone(), vals.clone(), 0.7);
        for &t in &times[20..] {
            let brute = times
                .iter()
                .zip(&vals)
                .filter(|(s, _)| **s >= t - 0.7 - 1e-12 && **s <= t)
                .map(|(_, v)| v.abs())
                .fold(0.0, f64::max);
            let got = sup_norm_window(&tr.times, &tr.norm_inf, t, 0.7).unwrap();
            // interpolated left endpoint can only add a value between two samples
            assert!(
                got >= brute - 1e-15
                    && got <= brute.max(tr.norm_inf[times.partition_point(|&s| s < t - 0.7) - 1]) + 1e-15
            );
        }
    }

    #[test]
    fn sup_window_not_covered() {
        let tr = scalar_traj(vec![1.0, 2.0], vec![1.0, 1.0], 0.5);
        assert!(sup_norm_window(&tr.times, &tr.norm_inf, 1.2, 0.5).is_err());
        assert!(sup_norm_window(&tr.times, &tr.norm_inf, 2.5, 0.5).is_err());
        assert!(sup_norm_window(&[], &[], 0.0, 0.5).is_err());
    }

    #[test]
    fn phase1_end_cases() {
        let times: Vec<f64> = (0..50).map(|k| k as f64 * 0.1).collect();
        let inside = scalar_traj(times.clone(), vec![0.5; 50], 0.5);
        assert_eq!(detect_phase1_end(&inside, 0.5), Some(0.0));
        let growing = scalar_traj(times.clone(), times.iter().map(|t| 0.5 + t).collect(), 0.5);
        assert_eq!(detect_phase1_end(&growing, 0.5), None);
        let falling = scalar_traj(times.clone(), times.iter().map(|t| (2.0 - t).max(0.0)).collect(), 0.5);
        // |e| <= 1 from t = 1.0; the 0.5 window clears it at t = 1.5
        let t1 = detect_phase1_end(&falling, 0.5).unwrap();
        assert!((t1 - 1.5).abs() < 1e-9, "{t1}");
    }

    #[test]
    fn settling_cases() {
        let times: Vec<f64> = (0..=100).map(|k| k as f64 * 0.1).collect();
        let zero = scalar_traj(times.clone(), vec![0.0; 101], 0.5);
        assert_eq!(detect_settling(&zero, 1e-3, 1.1), Some(0.0));
        // dips below tol around t = 2, rebounds, settles for good at t = 5
        let vals: Vec<f64> = times
            .iter()
            .map(|&t| {
                if (1.95..2.25).contains(&t) || t >= 4.95 {
                    0.0
                } else {
                    1.0
                }
            })
            .collect();
        let tr = scalar_traj(times.clone(), vals, 0.5);
        let t2 = detect_settling(&tr, 1e-3, 1.1).unwrap();
        assert!((t2 - 5.0).abs() < 1e-9);
        assert_eq!(detect_settling(&tr, 1e-3, 6.0), None);
    }

    #[test]
    fn audit_cases() {
        let sched = AicSchedule::periodic(0.8, 1.0, 10).unwrap();
        let times: Vec<f64> = (0..=800).map(|k| k as f64 * 0.01).collect();
        let zero = scalar_traj(times.clone(), vec![0.0; times.len()], 0.5);
        assert!(window_decrease_audit(&zero, &sched, 0.1, 0, 1e-3).entries.is_empty());

        let growing = scalar_traj(times.clone(), times.iter().map(|t| (0.3 * t).exp()).collect(), 0.5);
        let audit = window_decrease_audit(&growing, &sched, 0.1, 0, 1e-3);
        assert!(!audit.passed());
        assert!(audit.worst().unwrap() > 0.0);

        let linear = scalar_traj(
            times.clone(),
            times.iter().map(|t| (1.0 - 0.2 * t).max(0.0)).collect(),
            0.5,
        );
        let audit = window_decrease_audit(&linear, &sched, 0.2, 1, 1e-3);
        assert!(audit.passed(), "{audit:?}");
        assert_eq!(audit.entries.len(), 5);
    }
}
