//! Junction flow laws.
//!
//! Every supported junction is an instance of one rule: incoming approach
//! `i` sends `q̂_i = min{D_i, 𝒮_i · g_i}` where `g_i` is the signal gate
//! (binary `u` or split `η`) and the effective supply is
//! `𝒮_i = min{C_i, min_j S_j / α_ij}` over receivers with `α_ij > 0`.
//! Receiver `j` then gets `q̄_j = Σ_i α_ij q̂_i`.

use serde::{Deserialize, Serialize};

use super::{SignalModel, SignalSchedule};
use crate::error::{Error, Result};
use crate::profile::StepProfile;

const SUM_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JunctionKind {
    /// Two signalized approaches into one link.
    Merge2to1,
    /// One unsignalized approach into two links, or two signalized
    /// approaches into two links with turning rates.
    Diverge,
    /// Three signalized approaches into one link, served in phase order.
    Merge3to1,
    /// Network exit, optionally signalized and capacity-limited.
    Outlet,
}

/// Gate of one approach for one step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Control {
    OnOff(u8),
    Continuum(f64),
}

impl Control {
    pub fn gate(self) -> f64 {
        match self {
            Control::OnOff(u) => f64::from(u),
            Control::Continuum(eta) => eta,
        }
    }
}

pub fn effective_supply(supply: f64, capacity_in: f64) -> f64 {
    supply.min(capacity_in)
}

fn gated(demand: f64, supply: f64, gate: f64) -> f64 {
    demand.min(supply * gate).max(0.0)
}

/// Signalized merge under the on-and-off model. Returns `([q̂1, q̂2], q̄3)`.
pub fn merge_flows_onoff(
    demand: [f64; 2],
    supply: [f64; 2],
    u: [u8; 2],
) -> Result<([f64; 2], f64)> {
    if u[0] > 1 || u[1] > 1 || u[0] + u[1] != 1 {
        return Err(Error::InvalidControl(format!(
            "merge controls must be complementary, got {u:?}"
        )));
    }
    let q = [
        gated(demand[0], supply[0], f64::from(u[0])),
        gated(demand[1], supply[1], f64::from(u[1])),
    ];
    Ok((q, q[0] + q[1]))
}

/// Signalized merge under the continuum model with split `eta` for the first
/// approach.
pub fn merge_flows_continuum(demand: [f64; 2], supply: [f64; 2], eta: f64) -> Result<([f64; 2], f64)> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::InvalidControl(format!("split must lie in (0, 1), got {eta}")));
    }
    let q = [
        gated(demand[0], supply[0], eta),
        gated(demand[1], supply[1], 1.0 - eta),
    ];
    Ok((q, q[0] + q[1]))
}

/// Diverge with turning rates `alpha[i][j]`. `capacity_in[i]` is the
/// capacity of approach `i`, `supply_out[j]` the supply of receiver `j`.
/// Returns `(q̂ per approach, q̄ per receiver)`.
pub fn diverge_flows(
    demand: &[f64],
    capacity_in: &[f64],
    supply_out: &[f64],
    alpha: &[Vec<f64>],
    control: &[Control],
) -> Result<(Vec<f64>, Vec<f64>)> {
    if demand.len() != alpha.len() || capacity_in.len() != alpha.len() || control.len() != alpha.len() {
        return Err(Error::InvalidControl("diverge arity mismatch".into()));
    }
    check_turning(alpha, supply_out.len())?;
    let gates: Vec<f64> = control.iter().map(|c| c.gate()).collect();
    Ok(resolve_flows(demand, capacity_in, supply_out, alpha, &gates))
}

/// Control of a three-approach merge.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Merge3Control {
    /// Index of the single green approach.
    OnOff(usize),
    /// Splits for the three approaches.
    Continuum([f64; 3]),
}

pub fn merge3_flows(
    demand: [f64; 3],
    capacity_in: [f64; 3],
    supply_out: f64,
    control: Merge3Control,
) -> Result<[f64; 3]> {
    let gates = match control {
        Merge3Control::OnOff(active) => {
            if active >= 3 {
                return Err(Error::InvalidControl(format!("approach {active} does not exist")));
            }
            let mut g = [0.0; 3];
            g[active] = 1.0;
            g
        }
        Merge3Control::Continuum(shares) => {
            let sum: f64 = shares.iter().sum();
            if (sum - 1.0).abs() > SUM_TOL || shares.iter().any(|&s| s < 0.0) {
                return Err(Error::InvalidControl(format!("splits must sum to 1, got {shares:?}")));
            }
            shares
        }
    };
    let mut q = [0.0; 3];
    for i in 0..3 {
        q[i] = gated(demand[i], effective_supply(supply_out, capacity_in[i]), gates[i]);
    }
    Ok(q)
}

fn check_turning(alpha: &[Vec<f64>], receivers: usize) -> Result<()> {
    for row in alpha {
        if row.len() != receivers {
            return Err(Error::InvalidScenario("turning-rate row has wrong length".into()));
        }
        if row.iter().any(|&a| !(0.0..=1.0).contains(&a)) {
            return Err(Error::InvalidScenario(format!("turning rates must lie in [0, 1]: {row:?}")));
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > SUM_TOL {
            return Err(Error::InvalidScenario(format!("turning rates must sum to 1: {row:?}")));
        }
    }
    Ok(())
}

/// The common rule from the module docs. A zero turning rate imposes no
/// constraint from that receiver.
fn resolve_flows(
    demand: &[f64],
    capacity_in: &[f64],
    supply_out: &[f64],
    alpha: &[Vec<f64>],
    gates: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let exits: Vec<f64> = (0..demand.len())
        .map(|i| {
            let mut eff = capacity_in[i];
            for (j, &a) in alpha[i].iter().enumerate() {
                if a > 0.0 {
                    eff = eff.min(supply_out[j] / a);
                }
            }
            gated(demand[i], eff, gates[i])
        })
        .collect();
    let entries = (0..supply_out.len())
        .map(|j| exits.iter().zip(alpha).map(|(q, row)| row[j] * q).sum())
        .collect();
    (exits, entries)
}

/// Gate of `phase` over the step `[t, t + h)`. The on-and-off model needs the
/// signal to be constant over the step.
pub fn step_gate(
    schedule: &SignalSchedule,
    phase: usize,
    model: SignalModel,
    t: f64,
    h: f64,
) -> Result<Control> {
    match model {
        SignalModel::OnOff => {
            let frac = schedule.green_time(phase, t, t + h) / h;
            if frac < SUM_TOL {
                Ok(Control::OnOff(0))
            } else if frac > 1.0 - SUM_TOL {
                Ok(Control::OnOff(1))
            } else {
                Err(Error::InvalidControl(format!(
                    "signal switches inside step [{t}, {}); the step must divide the green and red times",
                    t + h
                )))
            }
        }
        SignalModel::Continuum => Ok(Control::Continuum(schedule.share(phase, t))),
    }
}

/// Junction with resolved link indices.
#[derive(Clone, Debug)]
pub struct Junction {
    pub id: String,
    pub kind: JunctionKind,
    pub incoming: Vec<usize>,
    pub outgoing: Vec<usize>,
    /// `turning[i][j]`, rows per incoming link.
    pub turning: Vec<Vec<f64>>,
    /// Index into the network's signal list.
    pub signal: Option<usize>,
    /// Signal phase serving each incoming link.
    pub phases: Vec<usize>,
    /// Outlet discharge capacity.
    pub capacity: Option<f64>,
    /// Outlet supply profile.
    pub supply: Option<StepProfile>,
}

/// Flows through a junction over one step.
#[derive(Clone, Debug, PartialEq)]
pub struct JunctionFlows {
    /// `q̂` per incoming link.
    pub exits: Vec<f64>,
    /// `q̄` per outgoing link.
    pub entries: Vec<f64>,
}

impl Junction {
    pub(crate) fn validate(&self) -> Result<()> {
        let (n_in, n_out) = (self.incoming.len(), self.outgoing.len());
        let ok = match self.kind {
            JunctionKind::Merge2to1 => n_in == 2 && n_out == 1 && self.signal.is_some(),
            JunctionKind::Merge3to1 => n_in == 3 && n_out == 1 && self.signal.is_some(),
            JunctionKind::Diverge => {
                n_out == 2 && ((n_in == 1) || (n_in == 2 && self.signal.is_some()))
            }
            JunctionKind::Outlet => n_in == 1 && n_out == 0,
        };
        if !ok {
            return Err(Error::InvalidScenario(format!(
                "junction {} of kind {:?} has {n_in} incoming, {n_out} outgoing links{}",
                self.id,
                self.kind,
                if self.signal.is_none() { " and no signal" } else { "" }
            )));
        }
        if self.phases.len() != n_in {
            return Err(Error::InvalidScenario(format!("junction {} phase order mismatch", self.id)));
        }
        if n_out > 0 {
            check_turning(&self.turning, n_out)?;
        }
        Ok(())
    }

    /// Supply offered by an outlet at time `t` (infinite when unconstrained).
    pub fn outlet_supply(&self, t: f64) -> f64 {
        let cap = self.capacity.unwrap_or(f64::INFINITY);
        let prescribed = self.supply.as_ref().map_or(f64::INFINITY, |p| p.rate_at(t));
        cap.min(prescribed)
    }

    /// Applies the junction law. For an outlet, `supply_out` is ignored and
    /// `outlet_supply` is used.
    pub fn resolve(
        &self,
        demand: &[f64],
        capacity_in: &[f64],
        supply_out: &[f64],
        outlet_supply: f64,
        gates: &[f64],
    ) -> JunctionFlows {
        if self.kind == JunctionKind::Outlet {
            let q = gated(demand[0], effective_supply(outlet_supply, capacity_in[0]), gates[0]);
            return JunctionFlows {
                exits: vec![q],
                entries: Vec::new(),
            };
        }
        let (exits, entries) = resolve_flows(demand, capacity_in, supply_out, &self.turning, gates);
        JunctionFlows { exits, entries }
    }
}
