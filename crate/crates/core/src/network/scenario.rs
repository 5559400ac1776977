//! Scenario documents and their resolution into an indexed network.
//!
//! ```json
//! {
//!   "links": [{"id": "I1", "length": 400,
//!              "fd": {"kind": "triangular", "free_flow_speed": 13.333,
//!                     "jam_density": 0.4, "critical_density": 0.1},
//!              "initial_density": 0.0}],
//!   "junctions": [{"id": "A", "kind": "merge2to1", "incoming": ["I1", "I2"],
//!                  "outgoing": ["I3"], "signal": "S"}],
//!   "signals": [{"id": "S", "cycle": 60, "offset": 0,
//!                "plan": [{"start": 0, "shares": [0.5, 0.5]}]}],
//!   "inflows": [{"link": "I1", "profile": [{"start": 0, "rate": 0.5}]}],
//!   "simulation": {"horizon": 1500, "step": 1, "model": "onoff", "engine": "laxhopf"}
//! }
//! ```
//!
//! Links use local coordinates `[0, length]`. A link that is not the outgoing
//! link of any junction is fed by a source (its inflow profile, or nothing);
//! a link that is not incoming to any junction ends in a free outlet.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::junction::{Junction, JunctionKind};
use super::{Engine, SignalModel, SignalSchedule, SplitInterval};
use crate::error::{Error, Result};
use crate::fundamental::FundamentalDiagram;
use crate::laxhopf::{LinkDomain, ValueCondition};
use crate::profile::StepProfile;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialDensity {
    Uniform(f64),
    /// `(start, density)` pairs in local coordinates.
    Segments(Vec<(f64, f64)>),
}

impl Default for InitialDensity {
    fn default() -> Self {
        InitialDensity::Uniform(0.0)
    }
}

impl InitialDensity {
    pub fn segments(&self) -> Vec<(f64, f64)> {
        match self {
            InitialDensity::Uniform(rho) => vec![(0.0, *rho)],
            InitialDensity::Segments(s) => s.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSpec {
    pub id: String,
    pub length: f64,
    pub fd: FundamentalDiagram,
    #[serde(default)]
    pub initial_density: InitialDensity,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JunctionSpec {
    pub id: String,
    pub kind: JunctionKind,
    pub incoming: Vec<String>,
    #[serde(default)]
    pub outgoing: Vec<String>,
    /// Rows per incoming link; defaults to all flow into the single
    /// outgoing link.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub turning: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signal: Option<String>,
    /// Incoming-link indices in the order the signal serves them.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase_order: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub capacity: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub supply: Option<StepProfile>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalSpec {
    pub id: String,
    pub cycle: f64,
    #[serde(default)]
    pub offset: f64,
    pub plan: Vec<SplitInterval>,
}

impl SignalSpec {
    pub fn schedule(&self) -> Result<SignalSchedule> {
        SignalSchedule::new(self.cycle, self.offset, self.plan.clone())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InflowSpec {
    pub link: String,
    pub profile: StepProfile,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSpec {
    pub horizon: f64,
    pub step: f64,
    #[serde(default)]
    pub model: SignalModel,
    #[serde(default)]
    pub engine: Engine,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkScenario {
    pub links: Vec<LinkSpec>,
    #[serde(default)]
    pub junctions: Vec<JunctionSpec>,
    #[serde(default)]
    pub signals: Vec<SignalSpec>,
    #[serde(default)]
    pub inflows: Vec<InflowSpec>,
    pub simulation: SimulationSpec,
}

impl NetworkScenario {
    /// Parses a scenario; schema errors carry the JSON path of the offending
    /// value.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::InvalidScenario(format!("at {path}: {}", e.into_inner()))
        })
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn with_model(mut self, model: SignalModel) -> Self {
        self.simulation.model = model;
        self
    }

    pub fn with_engine(mut self, engine: Engine) -> Self {
        self.simulation.engine = engine;
        self
    }

    pub fn with_step(mut self, step: f64) -> Self {
        self.simulation.step = step;
        self
    }

    pub fn with_horizon(mut self, horizon: f64) -> Self {
        self.simulation.horizon = horizon;
        self
    }

    /// Overrides every signal's cycle, offset, or (for two-phase signals)
    /// the split of the first phase.
    pub fn with_signal_overrides(
        mut self,
        cycle: Option<f64>,
        eta: Option<f64>,
        offset: Option<f64>,
    ) -> Self {
        for s in &mut self.signals {
            if let Some(c) = cycle {
                s.cycle = c;
            }
            if let Some(o) = offset {
                s.offset = o;
            }
            if let Some(e) = eta {
                for interval in &mut s.plan {
                    if interval.shares.len() == 2 {
                        interval.shares = vec![e, 1.0 - e];
                    }
                }
            }
        }
        self
    }

    pub fn link_index(&self, id: &str) -> Option<usize> {
        self.links.iter().position(|l| l.id == id)
    }

    pub fn resolve(&self) -> Result<Network> {
        Network::new(self)
    }
}

/// Scenario with ids resolved to indices, value conditions built, and
/// implicit sources and outlets added.
#[derive(Clone, Debug)]
pub struct Network {
    pub ids: Vec<String>,
    pub domains: Vec<LinkDomain>,
    pub initial: Vec<ValueCondition>,
    pub initial_density: Vec<InitialDensity>,
    pub junctions: Vec<Junction>,
    pub signals: Vec<SignalSchedule>,
    /// Exogenous inflow of links without an upstream junction.
    pub sources: Vec<Option<StepProfile>>,
    /// `(junction, outgoing port)` feeding each link.
    pub upstream_of: Vec<Option<(usize, usize)>>,
    /// `(junction, incoming port)` draining each link.
    pub downstream_of: Vec<(usize, usize)>,
    pub horizon: f64,
    pub step: f64,
    pub steps: usize,
    pub model: SignalModel,
    pub engine: Engine,
}

impl Network {
    pub fn new(scn: &NetworkScenario) -> Result<Self> {
        let sim = &scn.simulation;
        if !(sim.step > 0.0 && sim.horizon > 0.0) {
            return Err(Error::InvalidScenario("step and horizon must be positive".into()));
        }
        let steps = (sim.horizon / sim.step).round() as usize;
        if steps == 0 || ((steps as f64) * sim.step - sim.horizon).abs() > 1e-9 * sim.horizon {
            return Err(Error::InvalidScenario(format!(
                "step {} must divide horizon {}",
                sim.step, sim.horizon
            )));
        }
        let n = scn.links.len();
        let mut ids = Vec::with_capacity(n);
        let mut domains = Vec::with_capacity(n);
        let mut initial = Vec::with_capacity(n);
        for link in &scn.links {
            if ids.contains(&link.id) {
                return Err(Error::InvalidScenario(format!("duplicate link id {}", link.id)));
            }
            let dom = LinkDomain::new(0.0, link.length, sim.horizon, link.fd)?;
            initial.push(ValueCondition::initial_from_densities(&dom, &link.initial_density.segments())?);
            domains.push(dom);
            ids.push(link.id.clone());
        }
        let lookup = |id: &str| -> Result<usize> {
            ids.iter()
                .position(|l| l == id)
                .ok_or_else(|| Error::InvalidScenario(format!("unknown link {id}")))
        };

        let mut signal_ids = Vec::new();
        let mut signals = Vec::new();
        for s in &scn.signals {
            if signal_ids.contains(&s.id) {
                return Err(Error::InvalidScenario(format!("duplicate signal id {}", s.id)));
            }
            signal_ids.push(s.id.clone());
            signals.push(s.schedule()?);
        }

        let mut upstream_of = vec![None; n];
        let mut downstream_of: Vec<Option<(usize, usize)>> = vec![None; n];
        let mut junctions = Vec::new();
        for (ji, spec) in scn.junctions.iter().enumerate() {
            let incoming = spec.incoming.iter().map(|id| lookup(id)).collect::<Result<Vec<_>>>()?;
            let outgoing = spec.outgoing.iter().map(|id| lookup(id)).collect::<Result<Vec<_>>>()?;
            let signal = match &spec.signal {
                Some(id) => Some(
                    signal_ids
                        .iter()
                        .position(|s| s == id)
                        .ok_or_else(|| Error::InvalidScenario(format!("unknown signal {id}")))?,
                ),
                None => None,
            };
            let turning = match (&spec.turning, outgoing.len()) {
                (Some(t), _) => t.clone(),
                (None, 0) => Vec::new(),
                (None, 1) => vec![vec![1.0]; incoming.len()],
                (None, _) => {
                    return Err(Error::InvalidScenario(format!(
                        "junction {} needs turning rates",
                        spec.id
                    )))
                }
            };
            if turning.len() != incoming.len() && !outgoing.is_empty() {
                return Err(Error::InvalidScenario(format!(
                    "junction {} needs one turning row per incoming link",
                    spec.id
                )));
            }
            let phases = match &spec.phase_order {
                Some(order) => {
                    let mut sorted = order.clone();
                    sorted.sort_unstable();
                    if sorted != (0..incoming.len()).collect::<Vec<_>>() {
                        return Err(Error::InvalidScenario(format!(
                            "junction {} phase order must permute its incoming links",
                            spec.id
                        )));
                    }
                    (0..incoming.len())
                        .map(|i| order.iter().position(|&o| o == i).expect("permutation"))
                        .collect()
                }
                None => (0..incoming.len()).collect(),
            };
            if let Some(si) = signal {
                let needed = match spec.kind {
                    JunctionKind::Outlet => 2,
                    _ => incoming.len(),
                };
                if signals[si].phase_count() != needed {
                    return Err(Error::InvalidScenario(format!(
                        "junction {} needs a {needed}-phase signal",
                        spec.id
                    )));
                }
            }
            if let Some(c) = spec.capacity {
                if !(c >= 0.0) {
                    return Err(Error::InvalidScenario(format!("junction {} capacity", spec.id)));
                }
            }
            for (port, &l) in incoming.iter().enumerate() {
                if downstream_of[l].replace((ji, port)).is_some() {
                    return Err(Error::InvalidScenario(format!("link {} drains into two junctions", ids[l])));
                }
            }
            for (port, &l) in outgoing.iter().enumerate() {
                if upstream_of[l].replace((ji, port)).is_some() {
                    return Err(Error::InvalidScenario(format!("link {} is fed by two junctions", ids[l])));
                }
            }
            let j = Junction {
                id: spec.id.clone(),
                kind: spec.kind,
                incoming,
                outgoing,
                turning,
                signal,
                phases,
                capacity: spec.capacity,
                supply: spec.supply.clone(),
            };
            j.validate()?;
            junctions.push(j);
        }
        let downstream_of = downstream_of
            .into_iter()
            .enumerate()
            .map(|(l, d)| {
                d.unwrap_or_else(|| {
                    junctions.push(Junction {
                        id: format!("{}-exit", ids[l]),
                        kind: JunctionKind::Outlet,
                        incoming: vec![l],
                        outgoing: Vec::new(),
                        turning: Vec::new(),
                        signal: None,
                        phases: vec![0],
                        capacity: None,
                        supply: None,
                    });
                    (junctions.len() - 1, 0)
                })
            })
            .collect();

        let mut sources: Vec<Option<StepProfile>> = upstream_of
            .iter()
            .map(|u| u.is_none().then(|| StepProfile::constant(0.0)))
            .collect();
        for inflow in &scn.inflows {
            let l = lookup(&inflow.link)?;
            if upstream_of[l].is_some() {
                return Err(Error::InvalidScenario(format!(
                    "link {} has an inflow but is fed by a junction",
                    inflow.link
                )));
            }
            sources[l] = Some(inflow.profile.clone());
        }

        Ok(Self {
            ids,
            domains,
            initial,
            initial_density: scn.links.iter().map(|l| l.initial_density.clone()).collect(),
            junctions,
            signals,
            sources,
            upstream_of,
            downstream_of,
            horizon: sim.horizon,
            step: sim.step,
            steps,
            model: sim.model,
            engine: sim.engine,
        })
    }

    pub fn link_count(&self) -> usize {
        self.ids.len()
    }

    pub fn link_index(&self, id: &str) -> Result<usize> {
        self.ids
            .iter()
            .position(|l| l == id)
            .ok_or_else(|| Error::InvalidScenario(format!("unknown link {id}")))
    }

    /// Links that end in an outlet.
    pub fn sink_links(&self) -> Vec<usize> {
        (0..self.link_count())
            .filter(|&l| self.junctions[self.downstream_of[l].0].kind == JunctionKind::Outlet)
            .collect()
    }
}
