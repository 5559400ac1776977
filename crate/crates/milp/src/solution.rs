//! Solver output in a serializable form.

use serde::{Deserialize, Serialize};

use signalflow_core::network::{SignalModel, SplitInterval};

use crate::bb::{solve_bb_guided, BbOptions, BbStatus};
use crate::build::{build_model, BuiltModel, MilpOptions};
use crate::error::{MilpError, Result};
use signalflow_core::network::NetworkScenario;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    IterationLimit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignalSplits {
    pub signal: String,
    /// Decision intervals with the chosen shares.
    pub intervals: Vec<SplitInterval>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSolution {
    pub status: SolveStatus,
    pub model: SignalModel,
    /// Absent when no feasible split was found.
    pub objective: Option<f64>,
    pub splits: Vec<SignalSplits>,
    /// Branch-and-bound nodes, or candidates evaluated by the oracle.
    pub nodes: usize,
    pub binaries: usize,
}

impl SplitSolution {
    /// First-phase shares per signal, in plan order.
    pub fn first_phase_shares(&self) -> Vec<Vec<f64>> {
        self.splits
            .iter()
            .map(|s| s.intervals.iter().map(|i| i.shares[0]).collect())
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("solution serializes")
    }
}

/// Groups per-signal first-phase shares with their interval starts.
pub(crate) fn signal_splits(scn: &NetworkScenario, shares: &[Vec<f64>]) -> Vec<SignalSplits> {
    scn.signals
        .iter()
        .zip(shares)
        .map(|(s, values)| SignalSplits {
            signal: s.id.clone(),
            intervals: s
                .plan
                .iter()
                .zip(values)
                .map(|(p, &eta)| SplitInterval {
                    start: p.start,
                    shares: vec![eta, 1.0 - eta],
                })
                .collect(),
        })
        .collect()
}

/// Result of [`optimize`]: the solution plus what produced it.
#[derive(Clone, Debug)]
pub struct Optimized {
    pub solution: SplitSolution,
    pub built: BuiltModel,
    /// Optimal point, when one was found.
    pub x: Option<Vec<f64>>,
}

/// Builds the program for `scn` and solves it by branch and bound.
pub fn optimize(scn: &NetworkScenario, model: SignalModel, opts: &MilpOptions, bb: &BbOptions) -> Result<Optimized> {
    let built = build_model(scn, model, opts)?;
    // full search at the root, plain completion below it
    let calls = std::cell::Cell::new(0usize);
    let heuristic = |x: &[f64]| {
        calls.set(calls.get() + 1);
        let shares = built.rounded_shares(x);
        if calls.get() == 1 {
            built.local_search(&shares, 3)
        } else {
            built.complete(&shares).ok().flatten()
        }
    };
    let r = solve_bb_guided(&built.model, bb, &built.priority(), Some(&heuristic));
    let status = match r.status {
        BbStatus::Optimal => SolveStatus::Optimal,
        BbStatus::Infeasible => SolveStatus::Infeasible,
        BbStatus::IterationLimit => SolveStatus::IterationLimit,
        BbStatus::Unbounded => return Err(MilpError::Model("relaxation is unbounded".into())),
    };
    let found = r.objective.is_finite();
    let splits = if found {
        signal_splits(&built.scenario, &built.splits_by_signal(&r.x))
    } else {
        Vec::new()
    };
    Ok(Optimized {
        solution: SplitSolution {
            status,
            model,
            objective: found.then_some(r.objective),
            splits,
            nodes: r.nodes,
            binaries: built.model.binary_count(),
        },
        x: found.then_some(r.x),
        built,
    })
}
