//! Shared fixtures for the criterion benchmarks.

use fintstab_core::{preset, ExperimentConfig};

/// Certified preset shortened to `t_end` seconds, with outputs disabled.
pub fn short_certified(t_end: f64) -> ExperimentConfig {
    let mut cfg = preset("certified").expect("built-in preset");
    cfg.sim.t_end = t_end;
    cfg.output.svg = false;
    cfg
}

/// Deterministic sample of quantizer inputs spread over several decades.
pub fn quantizer_inputs(n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| {
            let u = (k as f64 + 0.5) / n as f64;
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            sign * 10f64.powf(-3.0 + 6.0 * u)
        })
        .collect()
}
