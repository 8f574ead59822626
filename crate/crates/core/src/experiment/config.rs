use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::certificate::{ControlGains, TwoPhaseMargins};
use crate::controllers::{AdaptiveLaw, DEFAULT_ZERO_TOL};
use crate::engine::SimConfig;
use crate::error::{Error, Result};
use crate::plants::{
    reference_network_spec, DelaySpec, DelayTerm, GenericDelayPlant, MasterOnly, MasterSlavePair, NetworkSpec,
    NeuralNet,
};
use crate::quantizer::{QuantizerSpec, SIMULATION_MAX_LEVELS};
use crate::schedule::{paper_schedule, validate_delay, AicSchedule, SpanStats};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuantizerConfig {
    pub pi0: f64,
    pub gamma_pattern: Vec<f64>,
    #[serde(default = "default_max_levels")]
    pub max_levels: usize,
    /// Largest magnitude the level table must cover.
    #[serde(default = "default_cover")]
    pub cover: f64,
}

fn default_max_levels() -> usize {
    SIMULATION_MAX_LEVELS
}

fn default_cover() -> f64 {
    1e4
}

impl QuantizerConfig {
    pub fn reference() -> Self {
        let spec = QuantizerSpec::reference_example(SIMULATION_MAX_LEVELS);
        Self {
            pi0: spec.base_level,
            gamma_pattern: spec.gamma_pattern,
            max_levels: spec.max_levels,
            cover: default_cover(),
        }
    }

    pub fn spec(&self) -> QuantizerSpec {
        QuantizerSpec::new(self.pi0, self.gamma_pattern.clone(), self.max_levels)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ScheduleConfig {
    Reference {
        #[serde(default = "default_k_max")]
        k_max: usize,
    },
    Periodic {
        cts: f64,
        window: f64,
        #[serde(default = "default_k_max")]
        k_max: usize,
    },
    Explicit {
        boundaries: Vec<f64>,
    },
}

fn default_k_max() -> usize {
    200
}

impl ScheduleConfig {
    pub fn build(&self) -> Result<AicSchedule> {
        Ok(match self {
            ScheduleConfig::Reference { k_max } => paper_schedule(*k_max),
            ScheduleConfig::Periodic { cts, window, k_max } => AicSchedule::periodic(*cts, *window, *k_max)?,
            ScheduleConfig::Explicit { boundaries } => AicSchedule::explicit(boundaries.clone())?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DelayTermConfig {
    pub gain: f64,
    pub delay: DelaySpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PlantConfig {
    /// Master network driving a controlled slave copy.
    NnPair {
        network: NetworkSpec,
        master_init: Vec<f64>,
        slave_init: Vec<f64>,
    },
    /// The master network on its own.
    NnMaster { network: NetworkSpec, init: Vec<f64> },
    Generic {
        alpha1: f64,
        terms: Vec<DelayTermConfig>,
        init: Vec<f64>,
    },
}

/// A plant ready to simulate.
pub enum BuiltPlant {
    Pair(MasterSlavePair),
    Master(MasterOnly),
    Generic(GenericDelayPlant),
}

impl BuiltPlant {
    /// `(α1, α2)` of the error comparison system, when the plant has one.
    pub fn growth_bounds(&self) -> Option<(f64, f64)> {
        match self {
            BuiltPlant::Pair(p) => Some(crate::plants::derive_alpha12(p.net())),
            BuiltPlant::Master(_) => None,
            BuiltPlant::Generic(g) => Some((g.alpha1(), g.alpha2())),
        }
    }
}

impl PlantConfig {
    pub fn build(&self) -> Result<BuiltPlant> {
        let plant = match self {
            PlantConfig::NnPair {
                network,
                master_init,
                slave_init,
            } => BuiltPlant::Pair(
                MasterSlavePair::new(
                    NeuralNet::from_spec(network).map_err(Error::Config)?,
                    master_init.clone(),
                    slave_init.clone(),
                )
                .map_err(Error::Config)?,
            ),
            PlantConfig::NnMaster { network, init } => BuiltPlant::Master(
                MasterOnly::new(NeuralNet::from_spec(network).map_err(Error::Config)?, init.clone())
                    .map_err(Error::Config)?,
            ),
            PlantConfig::Generic { alpha1, terms, init } => {
                let terms = terms
                    .iter()
                    .map(|t| {
                        Ok(DelayTerm {
                            gain: t.gain,
                            delay: t.delay.compile().map_err(Error::Config)?,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                BuiltPlant::Generic(GenericDelayPlant::new(*alpha1, terms, init.clone()).map_err(Error::Config)?)
            }
        };
        Ok(plant)
    }

    pub fn delay_bound(&self) -> Result<f64> {
        let spec_bound = |d: &DelaySpec| d.compile().map(|f| f.bound()).map_err(Error::Config);
        match self {
            PlantConfig::NnPair { network, .. } | PlantConfig::NnMaster { network, .. } => spec_bound(&network.delay),
            PlantConfig::Generic { terms, .. } => terms
                .iter()
                .try_fold(0.0, |m, t| Ok(f64::max(m, spec_bound(&t.delay)?))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ControlConfig {
    None,
    Constant {
        alpha3: f64,
        alpha4: f64,
    },
    /// `alpha3`, `alpha4` are the starting gains.
    Adaptive {
        mu1: f64,
        mu2: f64,
        mu3: f64,
        eta: f64,
        #[serde(default = "default_zero_tol")]
        zero_tol: f64,
        #[serde(default)]
        alpha3: f64,
        #[serde(default)]
        alpha4: f64,
    },
}

fn default_zero_tol() -> f64 {
    DEFAULT_ZERO_TOL
}

impl ControlConfig {
    pub fn gains(&self) -> Result<Option<ControlGains>> {
        match *self {
            ControlConfig::None => Ok(None),
            ControlConfig::Constant { alpha3, alpha4 } | ControlConfig::Adaptive { alpha3, alpha4, .. } => {
                Ok(Some(ControlGains::new(alpha3, alpha4)?))
            }
        }
    }

    pub fn law(&self) -> Option<AdaptiveLaw> {
        match *self {
            ControlConfig::Adaptive {
                mu1,
                mu2,
                mu3,
                eta,
                zero_tol,
                ..
            } => Some(AdaptiveLaw {
                mu1,
                mu2,
                mu3,
                eta,
                zero_tol,
            }),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: String,
    #[serde(default = "default_true")]
    pub svg: bool,
    /// Trajectory columns drawn in the SVG.
    #[serde(default = "default_columns")]
    pub plot_columns: Vec<String>,
}

fn default_dir() -> String {
    "out".into()
}

fn default_true() -> bool {
    true
}

fn default_columns() -> Vec<String> {
    vec!["norm_2".into()]
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: default_dir(),
            svg: true,
            plot_columns: default_columns(),
        }
    }
}

/// Everything needed for one run, as stored in a TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub quantizer: QuantizerConfig,
    pub schedule: ScheduleConfig,
    pub plant: PlantConfig,
    pub control: ControlConfig,
    pub sim: SimConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub margins: Option<TwoPhaseMargins>,
    #[serde(default)]
    pub output: OutputConfig,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Statistics used by the certificate: declared when the schedule kind
    /// guarantees them, realized otherwise.
    pub fn span_stats(&self) -> Result<SpanStats> {
        Ok(self.schedule.build()?.stats()?)
    }

    /// Cross-field checks: quantizer validity, nonnegative gains, positive
    /// update-law constants, delay bound below the shortest control span and
    /// a step fine enough for the delay.
    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return Err(Error::Config(format!(
                "run name {:?} is not a plain file stem",
                self.name
            )));
        }
        self.quantizer.spec().validate()?;
        if !(self.quantizer.cover > 0.0) {
            return Err(Error::Config("quantizer cover must be positive".into()));
        }
        self.control.gains()?;
        if let Some(law) = self.control.law() {
            law.validate().map_err(Error::Config)?;
        }
        let stats = self.span_stats()?;
        let tau = self.plant.delay_bound()?;
        if !validate_delay(&stats, tau) {
            return Err(Error::Config(format!(
                "delay bound {tau} must be below the shortest control span {}",
                stats.theta_low
            )));
        }
        self.plant.build()?;
        self.sim.validate(tau)?;
        if let Some(m) = &self.margins {
            if !(m.varpi1 > 0.0 && m.varpi2 > 0.0 && m.phi > 0.0) {
                return Err(Error::Config("margins must be positive".into()));
            }
        }
        Ok(())
    }
}

/// Names accepted by [`preset`].
pub const PRESETS: &[&str] = &["fig1", "fig2", "fig3", "fig4", "fig5", "certified"];

pub const REFERENCE_MASTER_INIT: [f64; 3] = [0.05, -0.1, 0.15];
pub const REFERENCE_SLAVE_INIT: [f64; 3] = [-1.5, 0.8, -0.1];

fn pair() -> PlantConfig {
    PlantConfig::NnPair {
        network: reference_network_spec(),
        master_init: REFERENCE_MASTER_INIT.to_vec(),
        slave_init: REFERENCE_SLAVE_INIT.to_vec(),
    }
}

fn adaptive() -> ControlConfig {
    ControlConfig::Adaptive {
        mu1: 0.01,
        mu2: 0.01,
        mu3: 0.01,
        eta: 0.2,
        zero_tol: DEFAULT_ZERO_TOL,
        alpha3: 0.0,
        alpha4: 0.0,
    }
}

/// Built-in scenarios of the reference numerical study.
///
/// * `fig1`: the master network alone, uncontrolled, over `[0, 100]`.
/// * `fig2`: the pair under constant gains `(0.04, 0.08)`.
/// * `fig3`, `fig4`, `fig5`: the pair under the adaptive law; they share the
///   run and differ in the plotted column (`norm_2`, `alpha3`, `alpha4`).
/// * `certified`: the pair under the certified gains `(230, 36)`.
pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let base = |plant, control, t_end: f64, column: &str| ExperimentConfig {
        name: name.to_string(),
        quantizer: QuantizerConfig::reference(),
        schedule: ScheduleConfig::Reference { k_max: default_k_max() },
        plant,
        control,
        sim: SimConfig::new(1e-3, t_end).with_stride(10),
        margins: None,
        output: OutputConfig {
            plot_columns: vec![column.to_string()],
            ..OutputConfig::default()
        },
    };
    let cfg = match name {
        "fig1" => base(
            PlantConfig::NnMaster {
                network: reference_network_spec(),
                init: REFERENCE_MASTER_INIT.to_vec(),
            },
            ControlConfig::None,
            100.0,
            "norm_inf",
        ),
        "fig2" => base(
            pair(),
            ControlConfig::Constant {
                alpha3: 0.04,
                alpha4: 0.08,
            },
            50.0,
            "norm_2",
        ),
        "fig3" => base(pair(), adaptive(), 50.0, "norm_2"),
        "fig4" => base(pair(), adaptive(), 50.0, "alpha3"),
        "fig5" => base(pair(), adaptive(), 50.0, "alpha4"),
        "certified" => base(
            pair(),
            ControlConfig::Constant {
                alpha3: 230.0,
                alpha4: 36.0,
            },
            30.0,
            "norm_inf",
        ),
        other => {
            return Err(Error::Config(format!(
                "unknown preset {other:?}; expected one of {}",
                PRESETS.join(", ")
            )))
        }
    };
    Ok(cfg)
}
