use thiserror::Error;

/// Failures while building or evaluating a quantizer.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuantizerError {
    #[error("invalid quantizer spec: {0}")]
    InvalidSpec(String),
    #[error("cover {cover} needs more than {max_levels} levels above the base level")]
    CapExceeded { cover: f64, max_levels: usize },
    #[error("value {value} is outside the covered range ({low}, {high}]")]
    OutOfRange { value: f64, low: f64, high: f64 },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScheduleError {
    #[error("invalid schedule: {0}")]
    Invalid(String),
    #[error("schedule has {available} complete windows, {requested} requested")]
    InsufficientWindows { requested: usize, available: usize },
    #[error("time {0} lies outside the schedule")]
    OutOfSchedule(f64),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CertificateError {
    #[error("no positive root: m1 = {m1} must exceed m2 = {m2}")]
    NoPositiveRoot { m1: f64, m2: f64 },
    #[error("delay bound {tau} is not below the minimum control span {theta_low}")]
    DelayTooLarge { tau: f64, theta_low: f64 },
    #[error("no feasible margins: {0}")]
    Infeasible(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Failures raised while integrating a delay system.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("state became non-finite at t = {t}")]
    NonFinite { t: f64 },
    #[error("delay {delay} at t = {t} exceeds the declared bound {bound}")]
    DelayBoundViolated { t: f64, delay: f64, bound: f64 },
    #[error("delayed lookup at {at} is not covered by the retained history [{from}, {to}]")]
    HistoryGap { at: f64, from: f64, to: f64 },
    #[error("window [{from}, {to}] is not covered by the recorded samples")]
    WindowNotCovered { from: f64, to: f64 },
    #[error(transparent)]
    Quantizer(#[from] QuantizerError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
}

/// Top-level error for experiment orchestration and file IO.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Quantizer(#[from] QuantizerError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Certificate(#[from] CertificateError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("config error: {0}")]
    Config(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("output error: {0}")]
    Output(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
