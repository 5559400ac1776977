//! Link transmission model for triangular diagrams.
//!
//! Each link keeps its cumulative entering counts `U_k` and exiting counts
//! `V_k` at grid times `t_k = k h`. Free-flow and backward-wave travel times
//! are rounded up to whole steps. Over step `k`
//!
//! ```text
//! sending   = min{C, (U_{k+1−Δf} − V_k) / h}
//! receiving = min{C, (V_{k+1−Δb} + ρ_j L − U_k) / h}
//! ```
//!
//! Negative indices refer to the free-flow history implied by a uniform
//! uncongested initial density.

use crate::error::{Error, Result};
use crate::fundamental::{FdKind, FundamentalDiagram};
use crate::network::record::TrajectoryRecord;
use crate::network::scenario::{InitialDensity, Network};
use crate::network::{simulate_with, LinkModel};

/// Relative tolerance used for the phase indicators.
const PHASE_TOL: f64 = 1e-9;

/// `(Δf, Δb)` in steps: `⌈L/(v h)⌉` and `⌈L/(w h)⌉`.
pub fn lags(length: f64, v: f64, w: f64, step: f64) -> (usize, usize) {
    let ceil = |x: f64| {
        let r = x.round();
        if (x - r).abs() <= 1e-9 * x.max(1.0) {
            r as usize
        } else {
            x.ceil() as usize
        }
    };
    (ceil(length / (v * step)).max(1), ceil(length / (w * step)).max(1))
}

/// Whether both lags are exact integers (no rounding).
pub fn lags_are_integral(length: f64, v: f64, w: f64, step: f64) -> bool {
    [length / (v * step), length / (w * step)]
        .iter()
        .all(|&x| (x - x.round()).abs() <= 1e-9 * x.max(1.0))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct LtmOptions {
    /// Reject any step in which a link entrance spills back.
    pub no_spillback: bool,
}

#[derive(Clone, Debug)]
pub struct LtmLink {
    fd: FundamentalDiagram,
    length: f64,
    step: f64,
    forward_lag: usize,
    backward_lag: usize,
    initial_density: f64,
    entering: Vec<f64>,
    exiting: Vec<f64>,
    spillback: Vec<bool>,
    queued: Vec<bool>,
}

impl LtmLink {
    pub fn new(fd: FundamentalDiagram, length: f64, step: f64, initial_density: f64) -> Result<Self> {
        if fd.kind() != FdKind::Triangular {
            return Err(Error::UnsupportedDiagram(fd.kind().name()));
        }
        if !(0.0..=fd.critical_density() * (1.0 + 1e-12)).contains(&initial_density) {
            return Err(Error::InvalidScenario(format!(
                "link transmission model needs an uncongested initial density, got {initial_density}"
            )));
        }
        let (forward_lag, backward_lag) = lags(length, fd.free_flow_speed(), fd.backward_wave_speed(), step);
        Ok(Self {
            fd,
            length,
            step,
            forward_lag,
            backward_lag,
            initial_density,
            entering: vec![0.0],
            exiting: vec![-initial_density * length],
            spillback: Vec::new(),
            queued: Vec::new(),
        })
    }

    pub fn lags(&self) -> (usize, usize) {
        (self.forward_lag, self.backward_lag)
    }

    /// `U_j`, with the free-flow history for `j ≤ 0`.
    pub fn entering_at(&self, j: isize) -> f64 {
        if j <= 0 {
            self.fd.free_flow_speed() * self.initial_density * j as f64 * self.step
        } else {
            self.entering[j as usize]
        }
    }

    /// `V_j`, with the free-flow history for `j ≤ 0`.
    pub fn exiting_at(&self, j: isize) -> f64 {
        if j <= 0 {
            -self.initial_density * self.length
                + self.fd.free_flow_speed() * self.initial_density * j as f64 * self.step
        } else {
            self.exiting[j as usize]
        }
    }

    fn storage(&self) -> f64 {
        self.fd.jam_density() * self.length
    }

    fn raw_sending(&self, k: usize) -> f64 {
        let k = k as isize;
        (self.entering_at(k + 1 - self.forward_lag as isize) - self.exiting_at(k)) / self.step
    }

    pub fn sending_flow(&self, k: usize) -> f64 {
        self.raw_sending(k).clamp(0.0, self.fd.capacity())
    }

    pub fn receiving_flow(&self, k: usize) -> f64 {
        let k = k as isize;
        let room = self.exiting_at(k + 1 - self.backward_lag as isize) + self.storage() - self.entering_at(k);
        (room / self.step).clamp(0.0, self.fd.capacity())
    }

    /// Entrance spillback indicator per step: the entering count reached
    /// the storage bound.
    pub fn spillback(&self) -> &[bool] {
        &self.spillback
    }

    /// Exit queue indicator per step: demand was on the capacity branch.
    pub fn queued(&self) -> &[bool] {
        &self.queued
    }

    pub fn entering(&self) -> &[f64] {
        &self.entering
    }

    pub fn exiting(&self) -> &[f64] {
        &self.exiting
    }
}

impl LinkModel for LtmLink {
    fn capacity(&self) -> f64 {
        self.fd.capacity()
    }

    fn demand(&mut self, k: usize) -> Result<f64> {
        Ok(self.sending_flow(k))
    }

    fn supply(&mut self, k: usize) -> Result<f64> {
        Ok(self.receiving_flow(k))
    }

    fn entry_congested(&self, k: usize) -> bool {
        self.spillback[k]
    }

    fn advance(&mut self, k: usize, q_in: f64, q_out: f64) -> Result<()> {
        if k + 1 != self.entering.len() {
            return Err(Error::InvalidScenario(format!("link advanced out of order at step {k}")));
        }
        let queued = self.raw_sending(k) >= self.fd.capacity() * (1.0 - PHASE_TOL);
        let u = self.entering[k] + q_in * self.step;
        let v = self.exiting[k] + q_out * self.step;
        self.entering.push(u);
        self.exiting.push(v);
        let bound = self.exiting_at(k as isize + 1 - self.backward_lag as isize) + self.storage();
        self.spillback.push(u >= bound - PHASE_TOL * self.storage());
        self.queued.push(queued);
        Ok(())
    }

    fn counts(&self, k: usize) -> Result<(f64, f64)> {
        Ok((self.entering[k], self.exiting[k]))
    }
}

fn uniform_density(d: &InitialDensity) -> Result<f64> {
    match d {
        InitialDensity::Uniform(rho) => Ok(*rho),
        InitialDensity::Segments(s) if s.len() == 1 => Ok(s[0].1),
        InitialDensity::Segments(s) if s.iter().all(|p| p.1 == s[0].1) => Ok(s[0].1),
        InitialDensity::Segments(_) => Err(Error::InvalidScenario(
            "link transmission model needs a uniform initial density".into(),
        )),
    }
}

pub fn build_links(net: &Network) -> Result<Vec<LtmLink>> {
    (0..net.link_count())
        .map(|l| {
            let dom = &net.domains[l];
            LtmLink::new(dom.fd, dom.length(), net.step, uniform_density(&net.initial_density[l])?)
        })
        .collect()
}

pub fn simulate_ltm(net: &Network) -> Result<TrajectoryRecord> {
    simulate_ltm_with(net, LtmOptions::default()).map(|(r, _)| r)
}

/// Runs the network on link transmission models; returns the record and the
/// final link states.
pub fn simulate_ltm_with(net: &Network, opts: LtmOptions) -> Result<(TrajectoryRecord, Vec<LtmLink>)> {
    let (record, links) = simulate_with(net, build_links(net)?)?;
    if opts.no_spillback {
        for (l, link) in links.iter().enumerate() {
            if let Some(k) = link.spillback.iter().position(|&s| s) {
                return Err(Error::ScenarioInfeasible(format!(
                    "link {} spills back at step {k}",
                    net.ids[l]
                )));
            }
        }
    }
    Ok((record, links))
}
