//! Fixed-time signal schedules.
//!
//! A schedule has a cycle length, an offset and a plan: a sequence of
//! decision intervals, each assigning green shares to the phases in cyclic
//! order. Phase `i` is green during
//! `[c + Σ_{j<i} s_j Δ, c + Σ_{j≤i} s_j Δ)` where `c = offset + kΔ` is the
//! start of the current cycle. The shares of the decision interval containing
//! the cycle start apply to the whole cycle.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SHARE_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitInterval {
    #[serde(default)]
    pub start: f64,
    pub shares: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSchedule", into = "RawSchedule")]
pub struct SignalSchedule {
    cycle: f64,
    offset: f64,
    plan: Vec<SplitInterval>,
}

#[derive(Serialize, Deserialize)]
struct RawSchedule {
    cycle: f64,
    #[serde(default)]
    offset: f64,
    plan: Vec<SplitInterval>,
}

impl TryFrom<RawSchedule> for SignalSchedule {
    type Error = Error;

    fn try_from(raw: RawSchedule) -> Result<Self> {
        SignalSchedule::new(raw.cycle, raw.offset, raw.plan)
    }
}

impl From<SignalSchedule> for RawSchedule {
    fn from(s: SignalSchedule) -> Self {
        RawSchedule {
            cycle: s.cycle,
            offset: s.offset,
            plan: s.plan,
        }
    }
}

impl SignalSchedule {
    pub fn new(cycle: f64, offset: f64, plan: Vec<SplitInterval>) -> Result<Self> {
        if !(cycle.is_finite() && cycle > 0.0) {
            return Err(Error::InvalidControl(format!("cycle must be positive, got {cycle}")));
        }
        if !offset.is_finite() {
            return Err(Error::InvalidControl("offset must be finite".into()));
        }
        let Some(first) = plan.first() else {
            return Err(Error::InvalidControl("signal plan is empty".into()));
        };
        let phases = first.shares.len();
        if phases < 2 {
            return Err(Error::InvalidControl("a signal needs at least two phases".into()));
        }
        for pair in plan.windows(2) {
            if !(pair[1].start > pair[0].start) {
                return Err(Error::InvalidControl("decision intervals must be sorted".into()));
            }
        }
        for interval in &plan {
            if interval.shares.len() != phases {
                return Err(Error::InvalidControl("phase count changes between intervals".into()));
            }
            if interval.shares.iter().any(|&s| !(s > 0.0 && s < 1.0)) {
                return Err(Error::InvalidControl(format!(
                    "shares must lie in (0, 1): {:?}",
                    interval.shares
                )));
            }
            let sum: f64 = interval.shares.iter().sum();
            if (sum - 1.0).abs() > SHARE_TOL {
                return Err(Error::InvalidControl(format!(
                    "shares must sum to 1, got {sum}"
                )));
            }
        }
        Ok(Self { cycle, offset, plan })
    }

    /// Two-phase schedule where the controlled approach gets share `eta`
    /// (green first in each cycle) and the conflicting approach `1 − eta`.
    pub fn two_phase(cycle: f64, eta: f64, offset: f64) -> Result<Self> {
        Self::new(
            cycle,
            offset,
            vec![SplitInterval {
                start: 0.0,
                shares: vec![eta, 1.0 - eta],
            }],
        )
    }

    /// Equal shares for `phases` approaches.
    pub fn equal(cycle: f64, phases: usize, offset: f64) -> Result<Self> {
        Self::new(
            cycle,
            offset,
            vec![SplitInterval {
                start: 0.0,
                shares: vec![1.0 / phases as f64; phases],
            }],
        )
    }

    pub fn cycle(&self) -> f64 {
        self.cycle
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn plan(&self) -> &[SplitInterval] {
        &self.plan
    }

    pub fn phase_count(&self) -> usize {
        self.plan[0].shares.len()
    }

    /// Same schedule with a different cycle length.
    pub fn with_cycle(&self, cycle: f64) -> Result<Self> {
        Self::new(cycle, self.offset, self.plan.clone())
    }

    pub fn with_offset(&self, offset: f64) -> Result<Self> {
        Self::new(self.cycle, offset, self.plan.clone())
    }

    /// Shares of the decision interval containing `t`; times before the
    /// first interval use the first one.
    pub fn shares_at(&self, t: f64) -> &[f64] {
        let idx = self.plan.partition_point(|p| p.start <= t + SHARE_TOL);
        &self.plan[idx.saturating_sub(1)].shares
    }

    /// Continuum share of `phase` at time `t`.
    pub fn share(&self, phase: usize, t: f64) -> f64 {
        self.shares_at(t)[phase]
    }

    fn cycle_start(&self, t: f64) -> f64 {
        let k = ((t - self.offset) / self.cycle + 1e-12).floor();
        self.offset + k * self.cycle
    }

    /// Green window `[lo, hi)` of `phase` within the cycle starting at `c`.
    fn window(&self, phase: usize, c: f64) -> (f64, f64) {
        let shares = self.shares_at(c);
        let before: f64 = shares[..phase].iter().sum();
        let lo = c + before * self.cycle;
        (lo, lo + shares[phase] * self.cycle)
    }

    pub fn is_green(&self, phase: usize, t: f64) -> bool {
        let c = self.cycle_start(t);
        let (lo, hi) = self.window(phase, c);
        let eps = SHARE_TOL * self.cycle;
        t + eps >= lo && t + eps < hi
    }

    /// Binary control `u(t)` of the first phase.
    pub fn signal_value(&self, t: f64) -> u8 {
        u8::from(self.is_green(0, t))
    }

    /// Total green time of `phase` within `[t0, t1]`.
    pub fn green_time(&self, phase: usize, t0: f64, t1: f64) -> f64 {
        if t1 <= t0 {
            return 0.0;
        }
        let mut total = 0.0;
        let mut c = self.cycle_start(t0);
        while c < t1 {
            let (lo, hi) = self.window(phase, c);
            let a = lo.max(t0);
            let b = hi.min(t1);
            if b > a {
                total += b - a;
            }
            c += self.cycle;
        }
        total
    }

    /// Instants strictly inside `(t0, t1)` at which `phase` switches.
    pub fn switch_times(&self, phase: usize, t0: f64, t1: f64) -> Vec<f64> {
        let mut out = Vec::new();
        let mut c = self.cycle_start(t0);
        while c < t1 {
            let (lo, hi) = self.window(phase, c);
            for s in [lo, hi] {
                if s > t0 && s < t1 && out.last().map_or(true, |&l: &f64| (s - l).abs() > 1e-12) {
                    out.push(s);
                }
            }
            c += self.cycle;
        }
        out
    }
}
