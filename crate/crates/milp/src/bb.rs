//! Best-bound branch and bound over the binaries.
//!
//! Nodes are taken in order of their relaxation bound (ties: creation
//! order); the branching variable is the most fractional priority binary,
//! else the most fractional binary (ties: lowest index); the down branch is
//! created first. These rules are the determinism contract: the same model
//! always yields the same solution. An optional primal heuristic maps a
//! relaxation point to a candidate solution, which is accepted only if it
//! satisfies every row.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use log::{debug, info};

use crate::model::MilpModel;
use crate::simplex::{solve_lp_with_limit, LpStatus};

const INT_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BbStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// Node or pivot budget exhausted; the incumbent, if any, is reported.
    IterationLimit,
}

#[derive(Clone, Copy, Debug)]
pub struct BbOptions {
    pub max_nodes: usize,
    pub max_lp_iterations: usize,
    /// Relative optimality gap at which the search stops.
    pub gap: f64,
    /// Log a progress line every this many nodes.
    pub log_every: usize,
}

impl Default for BbOptions {
    fn default() -> Self {
        Self {
            max_nodes: 200_000,
            max_lp_iterations: 50_000,
            gap: 1e-6,
            log_every: 100,
        }
    }
}

#[derive(Clone, Debug)]
pub struct BbResult {
    pub status: BbStatus,
    pub objective: f64,
    pub x: Vec<f64>,
    pub nodes: usize,
    /// Best remaining bound when the search stopped.
    pub bound: f64,
}

struct Node {
    bound: f64,
    seq: usize,
    fixings: Vec<(usize, f64)>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        self.bound
            .total_cmp(&other.bound)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

fn most_fractional(vars: impl Iterator<Item = usize>, x: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for v in vars {
        let f = x[v] - x[v].floor();
        let dist = f.min(1.0 - f);
        if dist > INT_TOL && best.map_or(true, |(_, d)| dist > d + 1e-12) {
            best = Some((v, dist));
        }
    }
    best.map(|(v, _)| v)
}

/// Solves `model` to proven optimality (within `opts.gap`).
pub fn solve_bb(model: &MilpModel) -> BbResult {
    solve_bb_with(model, &BbOptions::default())
}

pub fn solve_bb_with(model: &MilpModel, opts: &BbOptions) -> BbResult {
    solve_bb_guided(model, opts, &[], None)
}

/// Maps a relaxation point to a candidate solution.
pub type Heuristic<'a> = &'a dyn Fn(&[f64]) -> Option<Vec<f64>>;

/// Accepted violation of a heuristic point.
const HEURISTIC_TOL: f64 = 1e-6;

/// Branch and bound with branching priorities and a primal heuristic.
pub fn solve_bb_guided(
    model: &MilpModel,
    opts: &BbOptions,
    priority: &[usize],
    heuristic: Option<Heuristic<'_>>,
) -> BbResult {
    let n = model.variables.len();
    let mut work = model.relaxed();
    let base_bounds: Vec<(f64, f64)> = model.variables.iter().map(|v| (v.lower, v.upper)).collect();

    let mut incumbent: Option<(f64, Vec<f64>)> = None;
    let mut heap = BinaryHeap::new();
    let mut seq = 0usize;
    heap.push(Node {
        bound: f64::INFINITY,
        seq,
        fixings: Vec::new(),
    });
    let mut nodes = 0usize;
    let mut limited = false;
    let mut unbounded = false;

    let close_enough = |bound: f64, inc: f64| bound <= inc + opts.gap * inc.abs().max(1.0);

    while let Some(node) = heap.pop() {
        if let Some((inc, _)) = &incumbent {
            if close_enough(node.bound, *inc) {
                heap.clear();
                break;
            }
        }
        if nodes >= opts.max_nodes {
            heap.push(node);
            limited = true;
            break;
        }
        nodes += 1;
        for (v, &(lo, hi)) in base_bounds.iter().enumerate() {
            work.set_bounds(v, lo, hi);
        }
        for &(v, val) in &node.fixings {
            work.set_bounds(v, val, val);
        }
        let lp = solve_lp_with_limit(&work, opts.max_lp_iterations);
        match lp.status {
            LpStatus::Optimal => {}
            LpStatus::Infeasible => continue,
            LpStatus::Unbounded => {
                unbounded = true;
                break;
            }
            LpStatus::IterationLimit => {
                limited = true;
                continue;
            }
        }
        let bound = lp.objective.min(node.bound);
        if nodes % opts.log_every.max(1) == 1 {
            info!(
                "NODE {nodes} BOUND {bound} INCUMBENT {}",
                incumbent.as_ref().map_or(f64::NEG_INFINITY, |i| i.0)
            );
        }
        if let Some((inc, _)) = &incumbent {
            if close_enough(bound, *inc) {
                continue;
            }
        }
        if let Some(h) = heuristic {
            if let Some(x) = h(&lp.x) {
                let obj = model.objective_value(&x);
                if model.max_violation(&x, HEURISTIC_TOL) <= HEURISTIC_TOL
                    && incumbent.as_ref().map_or(true, |(inc, _)| obj > *inc)
                {
                    debug!("NODE {nodes} heuristic objective {obj}");
                    incumbent = Some((obj, x));
                }
            }
            if let Some((inc, _)) = &incumbent {
                if close_enough(bound, *inc) {
                    continue;
                }
            }
        }
        let branch = most_fractional(priority.iter().copied(), &lp.x).or_else(|| most_fractional(model.binaries(), &lp.x));
        match branch {
            None => {
                let mut x = lp.x;
                for v in model.binaries() {
                    x[v] = x[v].round();
                }
                debug!("NODE {nodes} integral objective {}", lp.objective);
                if incumbent.as_ref().map_or(true, |(inc, _)| lp.objective > *inc) {
                    incumbent = Some((lp.objective, x));
                }
            }
            Some(v) => {
                for val in [0.0, 1.0] {
                    seq += 1;
                    let mut fixings = node.fixings.clone();
                    fixings.push((v, val));
                    heap.push(Node { bound, seq, fixings });
                }
            }
        }
    }

    let remaining = heap.iter().map(|n| n.bound).fold(f64::NEG_INFINITY, f64::max);
    let (status, objective, x) = match (incumbent, unbounded, limited) {
        (_, true, _) => (BbStatus::Unbounded, f64::NAN, vec![f64::NAN; n]),
        (Some((obj, x)), false, false) => (BbStatus::Optimal, obj, x),
        (Some((obj, x)), false, true) => (BbStatus::IterationLimit, obj, x),
        (None, false, true) => (BbStatus::IterationLimit, f64::NAN, vec![f64::NAN; n]),
        (None, false, false) => (BbStatus::Infeasible, f64::NAN, vec![f64::NAN; n]),
    };
    let bound = if status == BbStatus::Optimal { objective } else { remaining };
    info!("NODE {nodes} BOUND {bound} INCUMBENT {objective}");
    BbResult {
        status,
        objective,
        x,
        nodes,
        bound,
    }
}
