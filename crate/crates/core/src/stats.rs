//! Binomial bookkeeping for Monte Carlo estimates.

use serde::{Deserialize, Serialize};

/// Count of successes out of independent trials.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    pub hits: u64,
    pub trials: u64,
}

impl Tally {
    pub fn new(hits: u64, trials: u64) -> Self {
        Self { hits, trials }
    }

    pub fn add(&mut self, hit: bool) {
        self.trials += 1;
        self.hits += hit as u64;
    }

    pub fn merge(self, other: Tally) -> Tally {
        Tally { hits: self.hits + other.hits, trials: self.trials + other.trials }
    }

    pub fn rate(&self) -> f64 {
        if self.trials == 0 {
            0.0
        } else {
            self.hits as f64 / self.trials as f64
        }
    }

    /// Standard error of the empirical rate.
    pub fn std_error(&self) -> f64 {
        binomial_sigma(self.rate(), self.trials)
    }

    /// `|rate - p| <= 3 sigma(p)`, with sigma taken at the reference value `p`.
    /// When `p` sits at 0 or 1 the band collapses and the match must be exact.
    pub fn within_3sigma(&self, p: f64) -> bool {
        (self.rate() - p).abs() <= 3.0 * binomial_sigma(p, self.trials) + 1e-12
    }
}

/// `sqrt(p (1 - p) / n)`.
pub fn binomial_sigma(p: f64, n: u64) -> f64 {
    if n == 0 {
        return f64::INFINITY;
    }
    (p * (1.0 - p) / n as f64).max(0.0).sqrt()
}
