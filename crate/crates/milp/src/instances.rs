//! Small scenarios used by the checks: one signalized junction, 400 m
//! triangular links, a 60 s cycle and 20 s steps.

use signalflow_core::network::{
    Engine, InflowSpec, JunctionKind, JunctionSpec, LinkSpec, NetworkScenario, SignalModel, SignalSpec,
    SimulationSpec, SplitInterval,
};
use signalflow_core::profile::StepProfile;
use signalflow_core::FundamentalDiagram;

fn link(id: &str) -> LinkSpec {
    LinkSpec {
        id: id.into(),
        length: 400.0,
        fd: FundamentalDiagram::reference_triangular(),
        initial_density: Default::default(),
    }
}

fn signal(id: &str) -> SignalSpec {
    SignalSpec {
        id: id.into(),
        cycle: 60.0,
        offset: 0.0,
        plan: vec![SplitInterval {
            start: 0.0,
            shares: vec![1.0 / 3.0, 2.0 / 3.0],
        }],
    }
}

fn inflow(link: &str, rate: f64) -> InflowSpec {
    InflowSpec {
        link: link.into(),
        profile: StepProfile::constant(rate),
    }
}

fn simulation(horizon: f64) -> SimulationSpec {
    SimulationSpec {
        horizon,
        step: 20.0,
        model: SignalModel::OnOff,
        engine: Engine::Ltm,
    }
}

/// `I1, I2 → I3` under signal `SA`.
pub fn tiny_merge(in1: f64, in2: f64, horizon: f64) -> NetworkScenario {
    NetworkScenario {
        links: vec![link("I1"), link("I2"), link("I3")],
        junctions: vec![JunctionSpec {
            id: "A".into(),
            kind: JunctionKind::Merge2to1,
            incoming: vec!["I1".into(), "I2".into()],
            outgoing: vec!["I3".into()],
            turning: None,
            signal: Some("SA".into()),
            phase_order: None,
            capacity: None,
            supply: None,
        }],
        signals: vec![signal("SA")],
        inflows: vec![inflow("I1", in1), inflow("I2", in2)],
        simulation: simulation(horizon),
    }
}

/// `I4, I5 → I6, I7` with turning rates `turning` under signal `SB`.
pub fn tiny_diverge(in4: f64, in5: f64, turning: [[f64; 2]; 2], horizon: f64) -> NetworkScenario {
    NetworkScenario {
        links: vec![link("I4"), link("I5"), link("I6"), link("I7")],
        junctions: vec![JunctionSpec {
            id: "B".into(),
            kind: JunctionKind::Diverge,
            incoming: vec!["I4".into(), "I5".into()],
            outgoing: vec!["I6".into(), "I7".into()],
            turning: Some(turning.iter().map(|r| r.to_vec()).collect()),
            signal: Some("SB".into()),
            phase_order: None,
            capacity: None,
            supply: None,
        }],
        signals: vec![signal("SB")],
        inflows: vec![inflow("I4", in4), inflow("I5", in5)],
        simulation: simulation(horizon),
    }
}

fn junction(id: &str, kind: JunctionKind, incoming: &[&str], outgoing: &[&str], signal: Option<&str>) -> JunctionSpec {
    JunctionSpec {
        id: id.into(),
        kind,
        incoming: incoming.iter().map(|s| s.to_string()).collect(),
        outgoing: outgoing.iter().map(|s| s.to_string()).collect(),
        turning: None,
        signal: signal.map(Into::into),
        phase_order: None,
        capacity: None,
        supply: None,
    }
}

/// Fixed source rates (veh/s) for the test network, one value per minute.
const NETWORK_INFLOWS: [(&str, [f64; 5]); 4] = [
    ("L1", [0.42, 0.55, 0.38, 0.61, 0.47]),
    ("L2", [0.35, 0.29, 0.44, 0.31, 0.40]),
    ("L3", [0.50, 0.36, 0.58, 0.45, 0.33]),
    ("L10", [0.30, 0.41, 0.27, 0.39, 0.34]),
];

/// Three signalized junctions and one unsignalized diverge:
///
/// `A: L1, L2 → L4`, `C: L4 → L5, L6` (even split), `B: L5, L3 → L7`,
/// `D: L6, L10 → L8, L9`. Sources are `L1, L2, L3, L10`; exits `L7, L8, L9`.
/// Source rates repeat every five minutes.
pub fn test_network(horizon: f64, step: f64) -> NetworkScenario {
    let links = ["L1", "L2", "L3", "L4", "L5", "L6", "L7", "L8", "L9", "L10"].map(link).to_vec();
    let mut c = junction("C", JunctionKind::Diverge, &["L4"], &["L5", "L6"], None);
    c.turning = Some(vec![vec![0.5, 0.5]]);
    let mut d = junction("D", JunctionKind::Diverge, &["L6", "L10"], &["L8", "L9"], Some("SD"));
    d.turning = Some(vec![vec![0.6, 0.4], vec![0.3, 0.7]]);
    let junctions = vec![
        junction("A", JunctionKind::Merge2to1, &["L1", "L2"], &["L4"], Some("SA")),
        c,
        junction("B", JunctionKind::Merge2to1, &["L5", "L3"], &["L7"], Some("SB")),
        d,
    ];
    let periods = (horizon / 300.0).ceil() as usize;
    let inflows = NETWORK_INFLOWS
        .iter()
        .map(|(id, rates)| {
            let samples: Vec<f64> = (0..periods).flat_map(|_| rates.iter().copied()).collect();
            InflowSpec {
                link: id.to_string(),
                profile: StepProfile::from_samples(60.0, &samples).expect("positive sampling step"),
            }
        })
        .collect();
    NetworkScenario {
        links,
        junctions,
        signals: vec![signal("SA"), signal("SB"), signal("SD")],
        inflows,
        simulation: SimulationSpec {
            step,
            ..simulation(horizon)
        },
    }
}

/// The three parity instances: an asymmetric and a symmetric merge and a
/// signalized diverge, 120 s at 20 s steps.
pub fn parity_instances() -> Vec<(&'static str, NetworkScenario)> {
    vec![
        ("merge", tiny_merge(0.6, 0.5, 120.0)),
        ("merge-symmetric", tiny_merge(0.5, 0.5, 120.0)),
        ("diverge", tiny_diverge(0.7, 0.4, [[0.5, 0.5], [0.3, 0.7]], 120.0)),
    ]
}

/// First-phase shares allowed by 20 s green and red floors on a 60 s cycle.
pub const SPLIT_SET: [f64; 3] = [1.0 / 3.0, 0.5, 2.0 / 3.0];
