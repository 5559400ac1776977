//! Exhaustive simulation-based split search, and replay of program points
//! through the link transmission model.

use signalflow_core::ltm::{simulate_ltm_with, LtmOptions};
use signalflow_core::network::{NetworkScenario, SignalModel, TrajectoryRecord};
use signalflow_core::Error as CoreError;

use crate::build::{recut_plans, scenario_with_splits, throughput_objective, BuiltModel, MilpOptions};
use crate::error::{MilpError, Result};
use crate::solution::{signal_splits, SolveStatus, SplitSolution};

/// Largest number of split combinations the oracle will simulate.
pub const MAX_CANDIDATES: usize = 100_000;

/// Relative drop of a receiving flow below capacity counted as spillback.
const SUPPLY_TOL: f64 = 1e-9;

/// Simulation of one split assignment.
#[derive(Clone, Debug)]
pub struct Evaluation {
    pub objective: f64,
    /// Some link's receiving flow fell below its capacity.
    pub spillback: bool,
    pub record: TrajectoryRecord,
}

fn sink_objective(scn: &NetworkScenario, rec: &TrajectoryRecord) -> Result<f64> {
    let net = scn.resolve()?;
    let sinks: Vec<&[f64]> = net.sink_links().into_iter().map(|l| rec.links[l].q_out.as_slice()).collect();
    Ok(throughput_objective(&sinks))
}

/// Simulates `scn` with the given first-phase shares. `Ok(None)` when the
/// on-and-off model cannot realize them on the step grid.
pub fn evaluate_splits(scn: &NetworkScenario, model: SignalModel, shares: &[Vec<f64>]) -> Result<Option<Evaluation>> {
    let scn = scenario_with_splits(scn, shares)?.with_model(model);
    let net = scn.resolve()?;
    let (record, links) = match simulate_ltm_with(&net, LtmOptions::default()) {
        Ok(r) => r,
        Err(CoreError::InvalidControl(_)) => return Ok(None),
        Err(e) => return Err(e.into()),
    };
    let spillback = record.links.iter().enumerate().any(|(l, s)| {
        let cap = net.domains[l].fd.capacity();
        s.supply.iter().any(|&x| x < cap * (1.0 - SUPPLY_TOL)) || links[l].spillback().iter().any(|&b| b)
    });
    Ok(Some(Evaluation {
        objective: sink_objective(&scn, &record)?,
        spillback,
        record,
    }))
}

/// Simulates every assignment of `split_set` to every decision interval
/// and returns the best one. Under `no_spillback`, assignments with
/// spillback are discarded. Ties go to the lexicographically smallest split
/// vector (signals in order, intervals in order).
pub fn enumerate_oracle(
    scn: &NetworkScenario,
    model: SignalModel,
    split_set: &[f64],
    opts: &MilpOptions,
) -> Result<SplitSolution> {
    let scn = match opts.decision_interval {
        Some(len) => recut_plans(scn, len)?,
        None => scn.clone(),
    };
    let horizon = scn.simulation.horizon;
    let slots: Vec<usize> = scn
        .signals
        .iter()
        .map(|s| {
            s.plan
                .iter()
                .enumerate()
                .filter(|(i, p)| *i == 0 || p.start < horizon - 1e-9)
                .count()
        })
        .collect();
    for s in &scn.signals {
        if s.plan[0].shares.len() != 2 {
            return Err(MilpError::Unsupported(format!("signal {} is not two-phase", s.id)));
        }
    }
    let mut set = split_set.to_vec();
    set.sort_by(f64::total_cmp);
    set.dedup();
    let decisions: usize = slots.iter().sum();
    let total = (set.len() as f64).powi(decisions as i32);
    if total > MAX_CANDIDATES as f64 {
        return Err(MilpError::Refused(format!(
            "{total} split combinations exceed the limit of {MAX_CANDIDATES}"
        )));
    }
    if set.is_empty() && decisions > 0 {
        return Err(MilpError::Refused("empty split set".into()));
    }

    let mut digits = vec![0usize; decisions];
    let mut evaluated = 0usize;
    let mut best: Option<(f64, Vec<Vec<f64>>)> = None;
    loop {
        let mut shares = Vec::with_capacity(slots.len());
        let mut it = digits.iter();
        for &count in &slots {
            shares.push(it.by_ref().take(count).map(|&d| set[d]).collect::<Vec<f64>>());
        }
        evaluated += 1;
        if let Some(ev) = evaluate_splits(&scn, model, &shares)? {
            let admissible = !(opts.no_spillback && ev.spillback);
            let better = best
                .as_ref()
                .map_or(true, |(b, _)| ev.objective > b + 1e-9 * b.abs().max(1.0));
            if admissible && better {
                best = Some((ev.objective, shares));
            }
        }
        // odometer, last decision fastest
        let mut pos = decisions;
        let done = loop {
            if pos == 0 {
                break true;
            }
            pos -= 1;
            digits[pos] += 1;
            if digits[pos] < set.len() {
                break false;
            }
            digits[pos] = 0;
        };
        if done {
            break;
        }
    }

    Ok(match best {
        Some((objective, shares)) => SplitSolution {
            status: SolveStatus::Optimal,
            model,
            objective: Some(objective),
            splits: signal_splits(&scn, &shares),
            nodes: evaluated,
            binaries: 0,
        },
        None => SplitSolution {
            status: SolveStatus::Infeasible,
            model,
            objective: None,
            splits: Vec::new(),
            nodes: evaluated,
            binaries: 0,
        },
    })
}

/// How well a program point matches the simulator.
#[derive(Clone, Debug)]
pub struct ReplayReport {
    /// Largest `|q_program − q_simulated|` over all links and steps.
    pub max_flow_error: f64,
    pub spillback: bool,
    pub simulated_objective: f64,
}

/// Simulates the splits of the point `x` and compares flows.
pub fn replay(built: &BuiltModel, x: &[f64]) -> Result<ReplayReport> {
    let ev = evaluate_splits(&built.scenario, built.signal_model, &built.splits_by_signal(x))?
        .ok_or_else(|| MilpError::Build("splits are not realizable on the step grid".into()))?;
    let (q_in, q_out) = built.flows_at(x);
    let mut err: f64 = 0.0;
    for (l, s) in ev.record.links.iter().enumerate() {
        for k in 0..built.steps {
            err = err.max((s.q_in[k] - q_in[l][k]).abs());
            err = err.max((s.q_out[k] - q_out[l][k]).abs());
        }
    }
    Ok(ReplayReport {
        max_flow_error: err,
        spillback: ev.spillback,
        simulated_objective: ev.objective,
    })
}
