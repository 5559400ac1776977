//! Piecewise-constant rate profiles (inflows, prescribed supplies).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One constant piece, active from `start` until the next piece begins.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub start: f64,
    pub rate: f64,
}

/// Right-continuous step function on `[first start, ∞)`. Before the first
/// piece the rate is zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Step>", into = "Vec<Step>")]
pub struct StepProfile {
    steps: Vec<Step>,
}

impl TryFrom<Vec<Step>> for StepProfile {
    type Error = Error;

    fn try_from(steps: Vec<Step>) -> Result<Self> {
        StepProfile::new(steps)
    }
}

impl From<StepProfile> for Vec<Step> {
    fn from(p: StepProfile) -> Self {
        p.steps
    }
}

impl StepProfile {
    pub fn new(steps: Vec<Step>) -> Result<Self> {
        for pair in steps.windows(2) {
            if !(pair[1].start > pair[0].start) {
                return Err(Error::InvalidScenario(format!(
                    "profile starts must increase: {} then {}",
                    pair[0].start, pair[1].start
                )));
            }
        }
        if let Some(bad) = steps.iter().find(|s| !(s.rate >= 0.0) || !s.rate.is_finite()) {
            return Err(Error::InvalidScenario(format!(
                "profile rate must be finite and non-negative, got {}",
                bad.rate
            )));
        }
        Ok(Self { steps })
    }

    pub fn constant(rate: f64) -> Self {
        Self {
            steps: vec![Step { start: 0.0, rate }],
        }
    }

    /// Builds a profile from equally spaced samples starting at zero.
    pub fn from_samples(step: f64, rates: &[f64]) -> Result<Self> {
        Self::new(
            rates
                .iter()
                .enumerate()
                .map(|(k, &rate)| Step {
                    start: k as f64 * step,
                    rate,
                })
                .collect(),
        )
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    pub fn rate_at(&self, t: f64) -> f64 {
        let idx = self.steps.partition_point(|s| s.start <= t);
        if idx == 0 {
            0.0
        } else {
            self.steps[idx - 1].rate
        }
    }

    /// Exact integral over `[t0, t1]`.
    pub fn integral(&self, t0: f64, t1: f64) -> f64 {
        if t1 <= t0 {
            return 0.0;
        }
        let mut total = 0.0;
        for (i, s) in self.steps.iter().enumerate() {
            let end = self.steps.get(i + 1).map_or(f64::INFINITY, |n| n.start);
            let lo = s.start.max(t0);
            let hi = end.min(t1);
            if hi > lo {
                total += s.rate * (hi - lo);
            }
        }
        total
    }

    /// Breakpoints strictly inside `(t0, t1)`.
    pub fn breakpoints(&self, t0: f64, t1: f64) -> impl Iterator<Item = f64> + '_ {
        self.steps
            .iter()
            .map(|s| s.start)
            .filter(move |&t| t > t0 && t < t1)
    }

    pub fn max_rate(&self) -> f64 {
        self.steps.iter().map(|s| s.rate).fold(0.0, f64::max)
    }
}
