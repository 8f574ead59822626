//! Finite-time stabilization of bounded-delay systems under aperiodically
//! intermittent quantized control.
//!
//! The crate covers the generalized logarithmic quantizer
//! ([`quantizer`]), intermittent schedules ([`schedule`]), the algebraic
//! stability certificate ([`certificate`]), a fixed-step delay integrator
//! with switching-aligned steps ([`engine`]), constant and adaptive
//! controllers ([`controllers`]), the generic and neural-network plants
//! ([`plants`]) and an experiment harness ([`experiment`], [`output`]).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod certificate;
pub mod closed_loop;
pub mod controllers;
pub mod engine;
pub mod error;
pub mod experiment;
pub mod output;
pub mod plants;
pub mod quantizer;
pub mod schedule;

pub use certificate::{
    check_lemma1, check_theorem1, lower_bounds, solve_sigma, suggest_margins, theorem2_eta_bound, Certificate,
    ConditionCheck, ControlGains, LowerBounds, PlantBounds, TwoPhaseMargins,
};
pub use closed_loop::ClosedLoop;
pub use controllers::{AdaptiveController, AdaptiveLaw, ConstantController, Controller};
pub use engine::{integrate, DelaySystem, HistoryBuffer, Mode, Past, SimConfig, Trajectory};
pub use error::{CertificateError, Error, QuantizerError, Result, ScheduleError, SimError};
pub use experiment::{preset, run_experiment, sweep, ExperimentConfig, RunReport};
pub use plants::{derive_alpha12, paper_nn, ErrorPlant, GenericDelayPlant, MasterSlavePair, NeuralNet};
pub use quantizer::{build_levels, gamma_bar, LevelTable, QuantizerSpec};
pub use schedule::{paper_schedule, AicSchedule, SpanStats};
