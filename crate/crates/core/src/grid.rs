use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// Day-ahead horizon: `periods` hours, each split into `subperiods` equal
/// intervals of `1/subperiods` hour.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeGrid {
    periods: usize,
    subperiods: usize,
}

impl TimeGrid {
    pub fn new(periods: usize, subperiods: usize) -> Result<Self> {
        if periods == 0 || subperiods == 0 {
            return Err(CoreError::InvalidArgument(format!(
                "time grid needs at least one period and one sub-period, got T={periods}, K={subperiods}"
            )));
        }
        Ok(Self {
            periods,
            subperiods,
        })
    }

    /// Number of hours `T`.
    pub fn periods(&self) -> usize {
        self.periods
    }

    /// Sub-periods per hour `K`.
    pub fn subperiods(&self) -> usize {
        self.subperiods
    }

    /// Total sub-periods `T * K`.
    pub fn horizon(&self) -> usize {
        self.periods * self.subperiods
    }

    /// Sub-period length as the exact fraction `(1, K)` of an hour.
    pub fn tau_fraction(&self) -> (usize, usize) {
        (1, self.subperiods)
    }

    /// Sub-period length in hours.
    pub fn tau(&self) -> f64 {
        1.0 / self.subperiods as f64
    }

    /// Multiplies a power (MW) held over one sub-period into energy (MWh).
    pub fn energy(&self, mw: f64) -> f64 {
        mw / self.subperiods as f64
    }

    /// Zero-based flat index of 1-based `(t, k)`.
    pub fn flat(&self, t: usize, k: usize) -> usize {
        debug_assert!((1..=self.periods).contains(&t) && (1..=self.subperiods).contains(&k));
        (t - 1) * self.subperiods + (k - 1)
    }

    /// 1-based `(t, k)` of a zero-based flat index.
    pub fn tk(&self, flat: usize) -> (usize, usize) {
        (flat / self.subperiods + 1, flat % self.subperiods + 1)
    }

    /// All `(t, k)` pairs in time order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (1..=self.periods).flat_map(move |t| (1..=self.subperiods).map(move |k| (t, k)))
    }
}

/// Builds a grid of `periods` hours with `subperiods` intervals each.
pub fn make_time_grid(periods: usize, subperiods: usize) -> Result<TimeGrid> {
    TimeGrid::new(periods, subperiods)
}
