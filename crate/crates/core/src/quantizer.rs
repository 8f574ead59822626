//! Generalized logarithmic quantizer with per-level sector bounds.
//!
//! A level set `{±π_j} ∪ {0}` is generated from a base level `π_0` and a
//! repeating pattern of sector bounds `γ_j`. Adjacent quantization intervals
//! `(π_j/(1+γ_j), π_j/(1-γ_j)]` tile the positive axis exactly when
//!
//! ```text
//! π_{j+1} / π_j = (1 - γ_{j+1}) / (1 + γ_j)
//! ```
//!
//! which is the rule used to grow the table in both directions from `π_0`.
//! Index `j` increases towards zero (smaller levels); negative indices hold
//! levels above `π_0`.

use serde::{Deserialize, Serialize};

use crate::error::QuantizerError;

/// Default per-direction level cap used for simulation quantizers.
///
/// With the two-ratio pattern of the reference example this reaches levels
/// of order 1e-150, far below any error magnitude that is not exactly zero.
pub const SIMULATION_MAX_LEVELS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantizerSpec {
    #[serde(rename = "pi0")]
    pub base_level: f64,
    pub gamma_pattern: Vec<f64>,
    pub max_levels: usize,
}

impl QuantizerSpec {
    pub fn new(base_level: f64, gamma_pattern: Vec<f64>, max_levels: usize) -> Self {
        Self {
            base_level,
            gamma_pattern,
            max_levels,
        }
    }

    /// Two-ratio quantizer of the reference numerical example:
    /// `π_0 = 2`, `γ_{2l} = 5/19`, `γ_{2l+1} = 1/19`.
    pub fn reference_example(max_levels: usize) -> Self {
        Self::new(2.0, vec![5.0 / 19.0, 1.0 / 19.0], max_levels)
    }

    pub fn validate(&self) -> Result<(), QuantizerError> {
        if !(self.base_level.is_finite() && self.base_level > 0.0) {
            return Err(QuantizerError::InvalidSpec(format!(
                "pi0 must be positive and finite, got {}",
                self.base_level
            )));
        }
        if self.gamma_pattern.is_empty() {
            return Err(QuantizerError::InvalidSpec("gamma_pattern must not be empty".into()));
        }
        if let Some(g) = self
            .gamma_pattern
            .iter()
            .find(|g| !(g.is_finite() && **g > 0.0 && **g < 1.0))
        {
            return Err(QuantizerError::InvalidSpec(format!(
                "gamma_pattern entries must lie in (0, 1), got {g}"
            )));
        }
        if self.max_levels == 0 {
            return Err(QuantizerError::InvalidSpec("max_levels must be positive".into()));
        }
        Ok(())
    }

    /// Sector bound `γ_j` for any integer index, applied cyclically.
    pub fn gamma(&self, j: i64) -> f64 {
        let len = self.gamma_pattern.len() as i64;
        self.gamma_pattern[j.rem_euclid(len) as usize]
    }
}

/// Uniform sector bound: the largest entry of the pattern.
pub fn gamma_bar(spec: &QuantizerSpec) -> f64 {
    spec.gamma_pattern.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Closed-form sector bound `γ_j` for a geometric level set with constant
/// ratio `π_{j+1}/π_j = ratio`, started from `γ_1`.
///
/// Solves `γ_{j+1} = -ratio·γ_j + (1 - ratio)`; the sequence tends to
/// `(1 - ratio)/(1 + ratio)`.
pub fn gamma_sequence_limit(ratio: f64, gamma_1: f64, j: u32) -> f64 {
    let r = -ratio;
    let p = r.powi(j as i32 - 1);
    p * gamma_1 + (p - 1.0) / (r - 1.0) * (1.0 - ratio)
}

/// Finite window of the level set around `π_0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelTable {
    j_min: i64,
    levels: Vec<f64>,
    gammas: Vec<f64>,
}

/// One row of a level table, as printed by the `levels` command.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelRow {
    pub j: i64,
    pub level: f64,
    pub gamma: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Generates levels until the interval tiling reaches `cover` from above.
///
/// Above `π_0` exactly as many levels are created as needed to cover
/// `cover`; below `π_0` the table holds `max_levels` levels (fewer if the
/// next level would leave the normal floating-point range).
pub fn build_levels(spec: &QuantizerSpec, cover: f64) -> Result<LevelTable, QuantizerError> {
    spec.validate()?;
    if !(cover.is_finite() && cover > 0.0) {
        return Err(QuantizerError::InvalidSpec(format!(
            "cover must be positive and finite, got {cover}"
        )));
    }

    let mut upward = Vec::new();
    let mut j = 0i64;
    let mut level = spec.base_level;
    while level / (1.0 - spec.gamma(j)) < cover {
        if upward.len() == spec.max_levels {
            return Err(QuantizerError::CapExceeded {
                cover,
                max_levels: spec.max_levels,
            });
        }
        level = level * (1.0 + spec.gamma(j - 1)) / (1.0 - spec.gamma(j));
        j -= 1;
        upward.push(level);
    }

    let mut downward = vec![spec.base_level];
    let mut j = 0i64;
    let mut level = spec.base_level;
    while downward.len() <= spec.max_levels {
        let next = level * (1.0 - spec.gamma(j + 1)) / (1.0 + spec.gamma(j));
        if next < f64::MIN_POSITIVE {
            break;
        }
        level = next;
        j += 1;
        downward.push(level);
    }

    let j_min = -(upward.len() as i64);
    let mut levels: Vec<f64> = upward.into_iter().rev().collect();
    levels.extend(downward);
    let gammas = (0..levels.len() as i64).map(|k| spec.gamma(j_min + k)).collect();
    Ok(LevelTable { j_min, levels, gammas })
}

impl LevelTable {
    pub fn j_min(&self) -> i64 {
        self.j_min
    }

    pub fn j_max(&self) -> i64 {
        self.j_min + self.levels.len() as i64 - 1
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    fn slot(&self, j: i64) -> Option<usize> {
        let k = j - self.j_min;
        (k >= 0 && (k as usize) < self.levels.len()).then_some(k as usize)
    }

    pub fn level(&self, j: i64) -> Option<f64> {
        self.slot(j).map(|k| self.levels[k])
    }

    pub fn gamma(&self, j: i64) -> Option<f64> {
        self.slot(j).map(|k| self.gammas[k])
    }

    fn lower_at(&self, k: usize) -> f64 {
        self.levels[k] / (1.0 + self.gammas[k])
    }

    fn upper_at(&self, k: usize) -> f64 {
        self.levels[k] / (1.0 - self.gammas[k])
    }

    pub fn row(&self, j: i64) -> Option<LevelRow> {
        self.slot(j).map(|k| LevelRow {
            j,
            level: self.levels[k],
            gamma: self.gammas[k],
            lower: self.lower_at(k),
            upper: self.upper_at(k),
        })
    }

    pub fn rows(&self) -> impl Iterator<Item = LevelRow> + '_ {
        (self.j_min..=self.j_max()).filter_map(|j| self.row(j))
    }

    /// Largest sector bound among the stored levels.
    pub fn gamma_bar(&self) -> f64 {
        self.gammas.iter().copied().fold(0.0, f64::max)
    }

    /// Covered magnitude range `(low, high]`.
    pub fn range(&self) -> (f64, f64) {
        (self.lower_at(self.levels.len() - 1), self.upper_at(0))
    }

    /// Quantizes `v`: the level `π_j` whose interval `(π_j/(1+γ_j), π_j/(1-γ_j)]`
    /// contains `|v|`, with the sign of `v`, and `0` for `v = 0`.
    pub fn quantize(&self, v: f64) -> Result<f64, QuantizerError> {
        if v == 0.0 {
            return Ok(0.0);
        }
        if v < 0.0 {
            return self.quantize(-v).map(|q| -q);
        }
        let (low, high) = self.range();
        if !(v > low && v <= high) {
            return Err(QuantizerError::OutOfRange { value: v, low, high });
        }
        // Lower endpoints decrease with the slot index; the owning slot is the
        // first whose lower endpoint lies strictly below v. Rounding can leave
        // neighbouring intervals overlapping by an ulp; the smaller level wins.
        let mut k = partition_point(self.levels.len(), |k| self.lower_at(k) >= v);
        if k + 1 < self.levels.len() && v <= self.upper_at(k + 1) {
            k += 1;
        }
        Ok(self.levels[k])
    }
}

fn partition_point(len: usize, pred: impl Fn(usize) -> bool) -> usize {
    let (mut lo, mut hi) = (0usize, len);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if pred(mid) {
            lo = mid + 1;
        } else {
            hi = mid;
        }
    }
    lo
}
