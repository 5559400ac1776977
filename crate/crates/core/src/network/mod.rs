//! Network topology, junction laws and the time-stepped driver.

use serde::{Deserialize, Serialize};

pub mod junction;
pub mod record;
pub mod scenario;
pub mod signal;
pub mod simulate;

pub use junction::{
    diverge_flows, effective_supply, merge3_flows, merge_flows_continuum, merge_flows_onoff,
    step_gate, Control, Junction, JunctionFlows, JunctionKind, Merge3Control,
};
pub use record::{LinkSeries, TrajectoryRecord};
pub use scenario::{
    InflowSpec, InitialDensity, JunctionSpec, LinkSpec, Network, NetworkScenario, SignalSpec,
    SimulationSpec,
};
pub use signal::{SignalSchedule, SplitInterval};
pub use simulate::{simulate, simulate_network, simulate_with, LaxHopfLink, LinkModel};

/// How a signal gates the flow leaving a controlled approach.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignalModel {
    /// Binary green/red gate.
    #[default]
    OnOff,
    /// Green share multiplying the effective supply.
    Continuum,
}

impl SignalModel {
    pub fn name(self) -> &'static str {
        match self {
            SignalModel::OnOff => "onoff",
            SignalModel::Continuum => "continuum",
        }
    }
}

/// Link solver used by the driver.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    #[default]
    LaxHopf,
    Ltm,
}
