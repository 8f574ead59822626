//! End-to-end runs: certify, simulate, diagnose and emit.

mod config;

pub use config::{
    preset, BuiltPlant, ControlConfig, DelayTermConfig, ExperimentConfig, OutputConfig, PlantConfig, QuantizerConfig,
    ScheduleConfig, PRESETS, REFERENCE_MASTER_INIT, REFERENCE_SLAVE_INIT,
};

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::certificate::{
    check_theorem1, suggest_margins, theorem2_eta_bound, Certificate, ControlGains, PlantBounds, TwoPhaseMargins,
    MARGIN_EPSILON,
};
use crate::closed_loop::ClosedLoop;
use crate::controllers::{AdaptiveController, ConstantController, Controller};
use crate::engine::{detect_phase1_end, detect_settling, integrate, window_decrease_audit, Trajectory, WindowAudit};
use crate::error::{Error, Result};
use crate::output::{emit_plot, write_certificate_file, write_trajectory_file};
use crate::plants::ErrorPlant;
use crate::quantizer::{build_levels, LevelTable};
use crate::schedule::{AicSchedule, SpanStats};

/// Outcome of one run.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub name: String,
    pub plant_bounds: Option<PlantBounds>,
    pub stats: SpanStats,
    /// Constant-gain certificate with the margins it was evaluated at.
    pub certificate: Option<Certificate>,
    pub margins: Option<TwoPhaseMargins>,
    /// Time from which the windowed error supremum stays at or below one.
    pub t1: Option<f64>,
    /// Time from which `‖e‖∞` stays within the settling tolerance.
    pub t2: Option<f64>,
    pub audit: Option<WindowAudit>,
    pub final_gains: Option<(f64, f64)>,
    /// For adaptive runs: the lower bound on the adaptive rate `eta` and
    /// whether the configured rate exceeds it.
    pub eta_bound: Option<f64>,
    pub eta_hypothesis_met: Option<bool>,
    pub notes: Vec<String>,
    pub files: Vec<PathBuf>,
    #[serde(skip)]
    pub trajectory: Trajectory,
}

impl RunReport {
    pub fn certified(&self) -> Option<bool> {
        self.certificate.as_ref().map(Certificate::satisfied)
    }
}

fn simulate<P: ErrorPlant>(
    plant: P,
    controller: Controller,
    schedule: &AicSchedule,
    cfg: &ExperimentConfig,
) -> Result<Trajectory> {
    let sys = ClosedLoop::new(plant, controller);
    Ok(integrate(&sys, schedule, &sys.initial_state(), &cfg.sim)?)
}

/// Margins that expose how far infeasible gains are from certification:
/// `ϖ2` just above the drift, `ϖ1` at its `α4` budget, and the decrease
/// that pair implies (possibly nonpositive).
fn boundary_margins(plant: &PlantBounds, gains: &ControlGains, stats: &SpanStats) -> TwoPhaseMargins {
    let varpi2 = (plant.alpha1 + plant.alpha2 + MARGIN_EPSILON).max(MARGIN_EPSILON);
    let varpi1 = (gains.alpha4 - plant.alpha2).max(MARGIN_EPSILON);
    let reach = plant.tau_bound + stats.theta_high - stats.theta_low;
    TwoPhaseMargins {
        varpi1,
        varpi2,
        phi: varpi1 * (stats.theta_low - plant.tau_bound) - varpi2 * reach,
    }
}

/// Runs one experiment. Files are written under `out_dir` when given.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: Option<&Path>) -> Result<RunReport> {
    cfg.validate()?;
    let schedule = cfg.schedule.build()?;
    let stats = schedule.stats()?;
    let plant = cfg.plant.build()?;
    let tau = cfg.plant.delay_bound()?;
    let gamma_bar = crate::quantizer::gamma_bar(&cfg.quantizer.spec());
    let table: LevelTable = build_levels(&cfg.quantizer.spec(), cfg.quantizer.cover)?;

    let mut notes = schedule.declared_mismatches();
    let plant_bounds = match plant.growth_bounds() {
        Some((a1, a2)) => Some(PlantBounds::new(a1, a2, tau)?),
        None => None,
    };

    let mut certificate = None;
    let mut margins = None;
    let mut eta_bound = None;
    let mut eta_hypothesis_met = None;
    let controller = match &cfg.control {
        ControlConfig::None => Controller::None,
        ControlConfig::Constant { alpha3, alpha4 } => {
            let gains = ControlGains::new(*alpha3, *alpha4)?;
            if let Some(pb) = &plant_bounds {
                let m = match cfg.margins {
                    Some(m) => m,
                    None => suggest_margins(pb, &gains, &stats).unwrap_or_else(|e| {
                        notes.push(format!("{e}; certificate evaluated at boundary margins"));
                        boundary_margins(pb, &gains, &stats)
                    }),
                };
                let cert = check_theorem1(pb, &gains, &m, &stats, gamma_bar);
                if !cert.satisfied() {
                    let failed: Vec<&str> = cert
                        .conditions
                        .iter()
                        .filter(|c| !c.satisfied)
                        .map(|c| c.name)
                        .collect();
                    notes.push(format!("certificate FAILED: {}", failed.join(", ")));
                }
                certificate = Some(cert);
                margins = Some(m);
            }
            Controller::Constant(ConstantController::new(gains, table))
        }
        ControlConfig::Adaptive { alpha3, alpha4, .. } => {
            let law = cfg.control.law().expect("adaptive config has a law");
            if let Some(pb) = &plant_bounds {
                match theorem2_eta_bound(pb, &stats, gamma_bar) {
                    Ok(bound) => {
                        let met = law.eta > bound;
                        if !met {
                            notes.push(format!(
                                "adaptive rate hypothesis unmet: eta = {} does not exceed the bound {bound}",
                                law.eta
                            ));
                        }
                        eta_bound = Some(bound);
                        eta_hypothesis_met = Some(met);
                    }
                    Err(e) => notes.push(format!("eta bound unavailable: {e}")),
                }
            }
            Controller::Adaptive(AdaptiveController::new(
                law,
                ControlGains::new(*alpha3, *alpha4)?,
                table,
            ))
        }
    };

    let traj = match plant {
        BuiltPlant::Pair(p) => simulate(p, controller, &schedule, cfg)?,
        BuiltPlant::Master(p) => simulate(p, controller, &schedule, cfg)?,
        BuiltPlant::Generic(p) => simulate(p, controller, &schedule, cfg)?,
    };

    let t1 = detect_phase1_end(&traj, tau);
    let t2 = detect_settling(&traj, cfg.sim.settle_tol, stats.theta_high);
    let audit = match (margins, t1) {
        (Some(m), Some(t1)) if m.phi > 0.0 => {
            let schedule = schedule.extended_to(cfg.sim.t_end);
            let from = (0..)
                .find(|&k| schedule.window_start(k).is_none_or(|s| s >= t1))
                .unwrap_or(0);
            Some(window_decrease_audit(&traj, &schedule, m.phi, from, cfg.sim.settle_tol))
        }
        _ => None,
    };
    if t2.is_none() && !matches!(cfg.control, ControlConfig::None) {
        notes.push(format!(
            "error did not settle within {} by t = {}",
            cfg.sim.settle_tol, cfg.sim.t_end
        ));
    }
    let final_gains = if matches!(cfg.control, ControlConfig::Adaptive { .. }) {
        traj.gains.last().copied().flatten()
    } else {
        None
    };

    let mut report = RunReport {
        name: cfg.name.clone(),
        plant_bounds,
        stats,
        certificate,
        margins,
        t1,
        t2,
        audit,
        final_gains,
        eta_bound,
        eta_hypothesis_met,
        notes,
        files: Vec::new(),
        trajectory: traj,
    };
    if let Some(dir) = out_dir {
        emit_report_files(cfg, &mut report, dir)?;
    }
    Ok(report)
}

fn emit_report_files(cfg: &ExperimentConfig, report: &mut RunReport, dir: &Path) -> Result<()> {
    let csv = dir.join(format!("{}.csv", cfg.name));
    write_trajectory_file(&report.trajectory, &csv)?;
    report.files.push(csv);
    if let Some(cert) = &report.certificate {
        let p = dir.join(format!("{}_certificate.csv", cfg.name));
        write_certificate_file(cert, &p)?;
        report.files.push(p);
    }
    if cfg.output.svg {
        let p = dir.join(format!("{}.svg", cfg.name));
        let cols: Vec<&str> = cfg.output.plot_columns.iter().map(String::as_str).collect();
        emit_plot(&report.trajectory, &cols, &p)?;
        report.files.push(p);
    }
    Ok(())
}

/// Replaces the value at a dotted key path such as `control.alpha3` or
/// `sim.step`.
pub fn with_parameter(base: &ExperimentConfig, key: &str, value: f64) -> Result<ExperimentConfig> {
    let mut doc = toml::Value::try_from(base).map_err(|e| Error::Config(e.to_string()))?;
    let mut node = &mut doc;
    let parts: Vec<&str> = key.split('.').collect();
    for (depth, part) in parts.iter().enumerate() {
        let table = node
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("{key:?} does not name a config value")))?;
        let entry = table
            .get_mut(*part)
            .ok_or_else(|| Error::Config(format!("unknown config key {key:?}")))?;
        if depth + 1 == parts.len() {
            *entry = match entry {
                toml::Value::Integer(_) if value.fract() == 0.0 => toml::Value::Integer(value as i64),
                toml::Value::Float(_) | toml::Value::Integer(_) => toml::Value::Float(value),
                _ => return Err(Error::Config(format!("{key:?} is not numeric"))),
            };
            break;
        }
        node = entry;
    }
    let cfg: ExperimentConfig = doc
        .try_into()
        .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
    Ok(cfg)
}

/// Results of a parameter sweep, in input order.
pub struct SweepResult {
    pub key: String,
    pub values: Vec<f64>,
    pub runs: Vec<Result<RunReport>>,
    /// Observed convergence order when sweeping `sim.step` over a halving
    /// sequence of at least three steps.
    pub order_estimate: Option<f64>,
}

/// Runs `base` once per value of `key`, in parallel. A failing run does not
/// affect the others.
pub fn sweep(base: &ExperimentConfig, key: &str, values: &[f64], out_dir: Option<&Path>) -> Result<SweepResult> {
    // reject unknown keys before spending time on runs
    if let Some(&v) = values.first() {
        with_parameter(base, key, v)?;
    }
    let runs: Vec<Result<RunReport>> = values
        .par_iter()
        .enumerate()
        .map(|(i, &v)| {
            let mut cfg = with_parameter(base, key, v)?;
            cfg.name = format!("{}_{}_{i}", base.name, key.replace('.', "_"));
            run_experiment(&cfg, out_dir)
        })
        .collect();
    let order_estimate = if key == "sim.step" {
        estimate_order(values, &runs)
    } else {
        None
    };
    Ok(SweepResult {
        key: key.to_string(),
        values: values.to_vec(),
        runs,
        order_estimate,
    })
}

/// Richardson-style order from the final errors of three consecutive runs
/// whose steps halve.
fn estimate_order(steps: &[f64], runs: &[Result<RunReport>]) -> Option<f64> {
    if steps.len() < 3 || runs.len() < 3 {
        return None;
    }
    let halving = steps.windows(2).take(2).all(|w| (w[0] / w[1] - 2.0).abs() < 1e-9);
    if !halving {
        return None;
    }
    let last = |r: &Result<RunReport>| -> Option<Vec<f64>> {
        let tr = &r.as_ref().ok()?.trajectory;
        Some(tr.error(tr.len().checked_sub(1)?).to_vec())
    };
    let (a, b, c) = (last(&runs[0])?, last(&runs[1])?, last(&runs[2])?);
    let dist = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
    let (d1, d2) = (dist(&a, &b), dist(&b, &c));
    (d1 > 0.0 && d2 > 0.0).then(|| (d1 / d2).log2())
}

/// Stored regression values of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Baseline {
    pub name: String,
    pub t1: Option<f64>,
    pub t2: Option<f64>,
    pub final_gains: Option<(f64, f64)>,
    pub final_norm_inf: f64,
}

impl Baseline {
    pub fn from_report(report: &RunReport) -> Self {
        Self {
            name: report.name.clone(),
            t1: report.t1,
            t2: report.t2,
            final_gains: report.final_gains,
            final_norm_inf: report.trajectory.norm_inf.last().copied().unwrap_or(f64::NAN),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn store(&self, path: &Path) -> Result<()> {
        let text = toml::to_string(self).map_err(|e| Error::Config(e.to_string()))?;
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|source| Error::Io {
                path: dir.display().to_string(),
                source,
            })?;
        }
        std::fs::write(path, text).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })
    }

    /// Differences beyond `rel_tol` (relative, with an absolute floor of
    /// `rel_tol` for values near zero).
    pub fn compare(&self, other: &Baseline, rel_tol: f64) -> Vec<String> {
        let close = |a: f64, b: f64| (a - b).abs() <= rel_tol * a.abs().max(b.abs()).max(1.0);
        let opt = |name: &str, a: Option<f64>, b: Option<f64>, out: &mut Vec<String>| match (a, b) {
            (Some(x), Some(y)) if close(x, y) => {}
            (None, None) => {}
            _ => out.push(format!("{name}: {a:?} vs {b:?}")),
        };
        let mut diffs = Vec::new();
        opt("t1", self.t1, other.t1, &mut diffs);
        opt("t2", self.t2, other.t2, &mut diffs);
        opt(
            "alpha3",
            self.final_gains.map(|g| g.0),
            other.final_gains.map(|g| g.0),
            &mut diffs,
        );
        opt(
            "alpha4",
            self.final_gains.map(|g| g.1),
            other.final_gains.map(|g| g.1),
            &mut diffs,
        );
        if !close(self.final_norm_inf, other.final_norm_inf) {
            diffs.push(format!(
                "final_norm_inf: {} vs {}",
                self.final_norm_inf, other.final_norm_inf
            ));
        }
        diffs
    }
}
