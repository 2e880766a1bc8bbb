//! Earnings: show-up fee, points at the exchange rate, and the bonus for a
//! correct estimate of how often the other participants cooperated.

use serde::{Deserialize, Serialize};

use crate::config::SessionConfig;
use crate::money::Money;

/// A normative-expectation bin in whole percent. Bins are half-open
/// `[lo, hi)` except the one ending at 100, which is closed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NormBin {
    pub lo: u32,
    pub hi: u32,
}

impl NormBin {
    pub fn contains(&self, rate: f64) -> bool {
        let (lo, hi) = (f64::from(self.lo) / 100.0, f64::from(self.hi) / 100.0);
        lo <= rate && (rate < hi || (self.hi >= 100 && rate <= hi))
    }

    /// Bin midpoint as a fraction.
    pub fn midpoint(&self) -> f64 {
        f64::from(self.lo + self.hi) / 200.0
    }
}

pub fn grade_norm_estimate(estimate: NormBin, realized_rate: f64) -> bool {
    estimate.contains(realized_rate)
}

/// `show_up_fee + exchange_rate * total_points + norm_bonus * correct`,
/// computed in millionths and rounded half-up to hundredths.
pub fn compute_payout(total_points: i64, correct_norm_guesses: u32, config: &SessionConfig) -> Money {
    let micros = config.show_up_fee.micros()
        + config.exchange_rate.micros() * total_points.max(0)
        + config.norm_bonus.micros() * i64::from(correct_norm_guesses);
    Money::from_micros(micros)
}
