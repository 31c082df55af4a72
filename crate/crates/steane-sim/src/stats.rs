//! Logical fidelity estimates and Wilson score intervals.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("fidelity is undefined with zero kept shots")]
    NoKeptShots,
    #[error("probability {0} outside [0, 1]")]
    BadProbability(f64),
    #[error("successes ({successes}) exceed kept shots ({kept})")]
    TooManySuccesses { successes: u64, kept: u64 },
}

/// Success fraction over kept shots.
pub fn logical_fidelity(successes: u64, kept: u64) -> Result<f64, StatsError> {
    if kept == 0 {
        return Err(StatsError::NoKeptShots);
    }
    if successes > kept {
        return Err(StatsError::TooManySuccesses { successes, kept });
    }
    Ok(successes as f64 / kept as f64)
}

/// Wilson score interval bounds for a binomial proportion:
///
/// p± = (p + z²/2N ± z·sqrt(p(1−p)/N + z²/4N²)) / (1 + z²/N)
///
/// Both bounds lie in [0, 1] for any p and N >= 1.
pub fn wilson_bounds(p: f64, n: u64, z: f64) -> Result<(f64, f64), StatsError> {
    if n == 0 {
        return Err(StatsError::NoKeptShots);
    }
    if !(0.0..=1.0).contains(&p) || p.is_nan() {
        return Err(StatsError::BadProbability(p));
    }
    let n = n as f64;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = p + z2 / (2.0 * n);
    let spread = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    Ok(((center - spread) / denom, (center + spread) / denom))
}

/// A fidelity point with its Wilson interval and discard accounting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FidelityEstimate {
    pub p_hat: f64,
    pub n_kept: u64,
    pub n_discarded: u64,
    pub wilson_low: f64,
    pub wilson_high: f64,
    pub z: f64,
}

impl FidelityEstimate {
    pub fn from_counts(successes: u64, kept: u64, discarded: u64, z: f64) -> Result<Self, StatsError> {
        let p_hat = logical_fidelity(successes, kept)?;
        let (wilson_low, wilson_high) = wilson_bounds(p_hat, kept, z)?;
        Ok(FidelityEstimate { p_hat, n_kept: kept, n_discarded: discarded, wilson_low, wilson_high, z })
    }

    /// Fraction of shots discarded before evaluation.
    pub fn discard_fraction(&self) -> f64 {
        let total = self.n_kept + self.n_discarded;
        if total == 0 {
            0.0
        } else {
            self.n_discarded as f64 / total as f64
        }
    }

    /// Whether this interval overlaps another (agreement within bounds).
    pub fn overlaps(&self, other: &FidelityEstimate) -> bool {
        self.wilson_low <= other.wilson_high && other.wilson_low <= self.wilson_high
    }
}
