//! Explicit time stepping: demand and supply are frozen over each step of
//! length `h`, junction laws give the boundary flows, and every link advances
//! by the realized flows.

use log::debug;

use super::junction::step_gate;
use super::record::{LinkSeries, TrajectoryRecord};
use super::scenario::{Network, NetworkScenario};
use super::Engine;
use crate::error::{Error, Result};
use crate::laxhopf::{
    demand_with, evaluate_moskowitz, supply_with, ConditionKind, LinkConditions, LinkDomain,
    ValueCondition,
};

/// A link solver the driver can couple through junctions. Step `k` covers
/// `[k h, (k + 1) h)`.
pub trait LinkModel {
    fn capacity(&self) -> f64;
    fn demand(&mut self, k: usize) -> Result<f64>;
    fn supply(&mut self, k: usize) -> Result<f64>;
    /// Whether the entrance was congested during step `k`; queried after
    /// [`LinkModel::advance`].
    fn entry_congested(&self, k: usize) -> bool;
    fn advance(&mut self, k: usize, q_in: f64, q_out: f64) -> Result<()>;
    /// `(N(t_k, a), N(t_k, b))` for `k` steps already advanced.
    fn counts(&self, k: usize) -> Result<(f64, f64)>;
}

/// Lax-Hopf link whose boundary conditions are the realized cumulative
/// flows, extended every step.
#[derive(Clone, Debug)]
pub struct LaxHopfLink {
    dom: LinkDomain,
    vc: LinkConditions,
    step: f64,
    last_supply: f64,
}

impl LaxHopfLink {
    pub fn new(dom: LinkDomain, initial: ValueCondition, step: f64) -> Result<Self> {
        let fd = dom.fd;
        let max_step = (dom.length() / fd.free_flow_speed()).min(dom.length() / fd.backward_wave_speed());
        if step > max_step * (1.0 + 1e-12) {
            return Err(Error::InvalidScenario(format!(
                "step {step} exceeds the link travel times (max {max_step})"
            )));
        }
        let exit_anchor = initial.eval(dom.b)?;
        let upstream = ValueCondition::boundary_origin(ConditionKind::Upstream);
        let downstream = ValueCondition::new(ConditionKind::Downstream, &[(0.0, exit_anchor)])?;
        let vc = LinkConditions::new(&dom, initial, Some(upstream), Some(downstream))?;
        Ok(Self {
            dom,
            vc,
            step,
            last_supply: fd.capacity(),
        })
    }

    pub fn domain(&self) -> &LinkDomain {
        &self.dom
    }

    pub fn conditions(&self) -> &LinkConditions {
        &self.vc
    }

    fn time(&self, k: usize) -> f64 {
        (k as f64 * self.step).min(self.dom.horizon)
    }
}

impl LinkModel for LaxHopfLink {
    fn capacity(&self) -> f64 {
        self.dom.fd.capacity()
    }

    fn demand(&mut self, k: usize) -> Result<f64> {
        demand_with(&self.dom, &self.vc, self.time(k), self.step)
    }

    fn supply(&mut self, k: usize) -> Result<f64> {
        self.last_supply = supply_with(&self.dom, &self.vc, self.time(k), self.step)?;
        Ok(self.last_supply)
    }

    fn entry_congested(&self, _k: usize) -> bool {
        self.last_supply < self.capacity() * (1.0 - 1e-9)
    }

    fn advance(&mut self, _k: usize, q_in: f64, q_out: f64) -> Result<()> {
        let h = self.step;
        self.vc.upstream.as_mut().expect("anchored").extend_by_rate(h, q_in)?;
        self.vc.downstream.as_mut().expect("anchored").extend_by_rate(h, q_out)?;
        Ok(())
    }

    fn counts(&self, k: usize) -> Result<(f64, f64)> {
        let t = self.time(k);
        Ok((
            evaluate_moskowitz(&self.dom, &self.vc, t, self.dom.a)?,
            evaluate_moskowitz(&self.dom, &self.vc, t, self.dom.b)?,
        ))
    }
}

/// Runs a scenario with the engine it selects.
pub fn simulate(scn: &NetworkScenario) -> Result<TrajectoryRecord> {
    simulate_network(&scn.resolve()?)
}

pub fn simulate_network(net: &Network) -> Result<TrajectoryRecord> {
    match net.engine {
        Engine::LaxHopf => {
            let links = (0..net.link_count())
                .map(|l| LaxHopfLink::new(net.domains[l], net.initial[l].clone(), net.step))
                .collect::<Result<Vec<_>>>()?;
            let (mut record, links) = simulate_with(net, links)?;
            record.final_states = Some(links.into_iter().map(|l| (l.dom, l.vc)).collect());
            Ok(record)
        }
        Engine::Ltm => crate::ltm::simulate_ltm(net),
    }
}

/// Couples the given link models through the network's junctions. Returns
/// the record and the final link states.
pub fn simulate_with<M: LinkModel>(
    net: &Network,
    mut links: Vec<M>,
) -> Result<(TrajectoryRecord, Vec<M>)> {
    let n = net.link_count();
    if links.len() != n {
        return Err(Error::InvalidScenario("one link model per link required".into()));
    }
    let h = net.step;
    let mut series: Vec<LinkSeries> = net.ids.iter().map(LinkSeries::new).collect();
    for (l, s) in series.iter_mut().enumerate() {
        let (up, down) = links[l].counts(0)?;
        s.n_up.push(up);
        s.n_down.push(down);
    }
    let mut backlog = vec![0.0; n];
    let mut demand = vec![0.0; n];
    let mut supply = vec![0.0; n];
    for k in 0..net.steps {
        let t = k as f64 * h;
        for l in 0..n {
            demand[l] = links[l].demand(k)?;
            supply[l] = links[l].supply(k)?;
        }
        let mut q_in = vec![0.0; n];
        let mut q_out = vec![0.0; n];
        for l in 0..n {
            if let Some(profile) = &net.sources[l] {
                let arrivals = profile.integral(t, t + h);
                let offered = (backlog[l] + arrivals) / h;
                q_in[l] = offered.min(supply[l]);
                backlog[l] = (backlog[l] + arrivals - q_in[l] * h).max(0.0);
            }
        }
        for j in &net.junctions {
            let d: Vec<f64> = j.incoming.iter().map(|&l| demand[l]).collect();
            let caps: Vec<f64> = j.incoming.iter().map(|&l| links[l].capacity()).collect();
            let s: Vec<f64> = j.outgoing.iter().map(|&l| supply[l]).collect();
            let gates = match j.signal {
                Some(si) => j
                    .phases
                    .iter()
                    .map(|&p| step_gate(&net.signals[si], p, net.model, t, h).map(|c| c.gate()))
                    .collect::<Result<Vec<_>>>()?,
                None => vec![1.0; j.incoming.len()],
            };
            let flows = j.resolve(&d, &caps, &s, j.outlet_supply(t), &gates);
            for (i, &l) in j.incoming.iter().enumerate() {
                q_out[l] = flows.exits[i];
            }
            for (o, &l) in j.outgoing.iter().enumerate() {
                q_in[l] = flows.entries[o];
            }
        }
        for l in 0..n {
            let s = &mut series[l];
            s.demand.push(demand[l]);
            s.supply.push(supply[l]);
            s.q_in.push(q_in[l]);
            s.q_out.push(q_out[l]);
            links[l].advance(k, q_in[l], q_out[l])?;
            s.entry_congested.push(links[l].entry_congested(k));
            let (up, down) = links[l].counts(k + 1)?;
            s.n_up.push(up);
            s.n_down.push(down);
        }
        if k % 500 == 0 {
            debug!("step {k}/{} t = {t}", net.steps);
        }
    }
    let record = TrajectoryRecord {
        step: h,
        times: (0..=net.steps).map(|k| k as f64 * h).collect(),
        model: net.model,
        engine: net.engine,
        links: series,
        final_states: None,
    };
    Ok((record, links))
}
