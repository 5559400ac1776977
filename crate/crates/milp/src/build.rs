//! Split-optimization programs over the link transmission model.
//!
//! Per link `l` and step `k` (0-based, `t_k = k h`):
//!
//! * `q̄_l^k`, `q̂_l^k` entry and exit flows, `D_l^k` demand, `r̂_l^k` exit
//!   queue indicator;
//! * counts `U_l(j) = h Σ_{m<j} q̄_l^m`, `V_l(j) = −ρ0 L + h Σ_{m<j} q̂_l^m`,
//!   with the free-flow history for `j ≤ 0`;
//! * `h D = min{C h, U(k+1−Δf) − V(k)}` linearized with selector `r̂`;
//! * junctions: `q̂_i = min{D_i, 𝒮_i g_i}`, `q̄_j = Σ_i α_ij q̂_i`, with
//!   `𝒮_i = min{C_i, min_j C_j/α_ij}` because supplies stay at capacity;
//! * no spillback: `V(k+1−Δb) + ρj L − U(k) ≥ C h`, i.e. the receiving flow
//!   never drops below capacity.
//!
//! Two-phase signals only. Each decision interval of a signal gets one split
//! for its first phase. The on-and-off model selects the split with one-hot
//! binaries over the step-aligned candidates and derives binary gates
//! `u` from it; the continuum model uses the split `η` itself as the gate.

use log::debug;
use serde::{Deserialize, Serialize};

use signalflow_core::fundamental::FdKind;
use signalflow_core::ltm::lags;
use signalflow_core::network::{
    step_gate, Control, JunctionKind, Network, NetworkScenario, SignalModel, SignalSchedule, SplitInterval,
};

use crate::error::{MilpError, Result};
use crate::model::{linearize_min_with, LinExpr, MilpModel, Sense};

/// Tolerance for grid alignment checks.
const ALIGN_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MilpOptions {
    /// Forbid any drop of a link's receiving flow below capacity.
    pub no_spillback: bool,
    /// Shortest admissible green and red time, seconds.
    pub min_phase: f64,
    /// Continuum only: restrict each split to these first-phase shares.
    pub continuum_split_set: Option<Vec<f64>>,
    /// Re-cut every signal plan into decision intervals of this length.
    pub decision_interval: Option<f64>,
}

impl Default for MilpOptions {
    fn default() -> Self {
        Self {
            no_spillback: true,
            min_phase: 20.0,
            continuum_split_set: None,
            decision_interval: None,
        }
    }
}

/// One split decision: a signal over one plan interval.
#[derive(Clone, Debug, PartialEq)]
pub struct Decision {
    pub signal: usize,
    pub signal_id: String,
    pub interval: usize,
    pub start: f64,
    /// Admissible first-phase shares; empty for an unrestricted continuum
    /// split.
    pub candidates: Vec<f64>,
    /// One-hot selectors over `candidates`.
    pub selectors: Vec<usize>,
    /// Continuum split variable.
    pub eta: Option<usize>,
}

/// Binary `z` choosing `q = min{a, b}` (`z = 1` picks `a`).
#[derive(Clone, Debug, PartialEq)]
pub struct MinSelector {
    pub z: usize,
    pub q: LinExpr,
    pub a: LinExpr,
    pub b: LinExpr,
}

/// The program plus the variable layout needed to read solutions back.
#[derive(Clone, Debug)]
pub struct BuiltModel {
    pub model: MilpModel,
    pub signal_model: SignalModel,
    pub options: MilpOptions,
    /// Scenario with the decision intervals actually used.
    pub scenario: NetworkScenario,
    pub link_ids: Vec<String>,
    pub steps: usize,
    pub step: f64,
    pub q_in: Vec<Vec<usize>>,
    pub q_out: Vec<Vec<usize>>,
    pub demand: Vec<Vec<usize>>,
    pub queue: Vec<Vec<usize>>,
    pub decisions: Vec<Decision>,
    pub sinks: Vec<usize>,
    /// Big-M for count expressions.
    pub big_m: f64,
    pub selectors: Vec<MinSelector>,
    /// Variables fixed by an equality to an expression of earlier ones.
    pub defined: Vec<(usize, LinExpr)>,
    /// Entrance indicators with the room left after their step.
    pub entrance: Vec<(usize, LinExpr)>,
}

/// Objective weight of step `k` (0-based): `1/(k + 2)`, i.e. `1/(k+1)` for
/// 1-based steps.
pub fn step_weight(k: usize) -> f64 {
    1.0 / (k as f64 + 2.0)
}

/// Weighted exit flow of the sink links.
pub fn throughput_objective(sink_flows: &[&[f64]]) -> f64 {
    sink_flows
        .iter()
        .map(|q| q.iter().enumerate().map(|(k, &f)| step_weight(k) * f).sum::<f64>())
        .sum()
}

fn is_multiple(x: f64, unit: f64) -> bool {
    let r = x / unit;
    (r - r.round()).abs() <= ALIGN_TOL * r.abs().max(1.0)
}

/// First-phase shares the on-and-off model can realize on the step grid with
/// both phases at least `min_phase` long.
pub fn onoff_candidates(cycle: f64, step: f64, min_phase: f64) -> Result<Vec<f64>> {
    if !is_multiple(cycle, step) {
        return Err(MilpError::Build(format!("step {step} does not divide cycle {cycle}")));
    }
    let units = (cycle / step).round() as usize;
    let floor = ((min_phase / step) - ALIGN_TOL).ceil().max(1.0) as usize;
    let out: Vec<f64> = (floor..=units.saturating_sub(floor))
        .map(|n| n as f64 / units as f64)
        .collect();
    if out.is_empty() {
        return Err(MilpError::Build(format!(
            "cycle {cycle} leaves no split with phases of at least {min_phase} s"
        )));
    }
    Ok(out)
}

/// Splits the plan of every signal into intervals of length `len` starting at
/// zero, keeping the shares in force at each start.
pub fn recut_plans(scn: &NetworkScenario, len: f64) -> Result<NetworkScenario> {
    let mut out = scn.clone();
    let horizon = scn.simulation.horizon;
    for s in &mut out.signals {
        if !is_multiple(len, s.cycle) {
            return Err(MilpError::Build(format!(
                "decision interval {len} is not a multiple of the cycle {} of signal {}",
                s.cycle, s.id
            )));
        }
        let schedule = s.schedule()?;
        let mut plan = Vec::new();
        let mut t = 0.0;
        while t < horizon - ALIGN_TOL {
            plan.push(SplitInterval {
                start: t,
                shares: schedule.shares_at(t).to_vec(),
            });
            t += len;
        }
        s.plan = plan;
    }
    Ok(out)
}

/// Replaces the first-phase share of every decision interval.
/// `splits[s][i]` is the share for interval `i` of signal `s`.
pub fn scenario_with_splits(scn: &NetworkScenario, splits: &[Vec<f64>]) -> Result<NetworkScenario> {
    let mut out = scn.clone();
    if splits.len() != out.signals.len() {
        return Err(MilpError::Build("one split list per signal required".into()));
    }
    for (s, shares) in out.signals.iter_mut().zip(splits) {
        if shares.len() > s.plan.len() {
            return Err(MilpError::Build(format!("too many splits for signal {}", s.id)));
        }
        for (interval, &eta) in s.plan.iter_mut().zip(shares) {
            interval.shares = vec![eta, 1.0 - eta];
        }
    }
    Ok(out)
}

/// Plan intervals of each signal that start before the horizon.
fn decision_slots(net: &Network) -> Vec<Vec<(usize, f64)>> {
    net.signals
        .iter()
        .map(|s| {
            s.plan()
                .iter()
                .enumerate()
                .filter(|(i, p)| *i == 0 || p.start < net.horizon - ALIGN_TOL)
                .map(|(i, p)| (i, p.start))
                .collect()
        })
        .collect()
}

fn check_network(net: &Network, model: SignalModel) -> Result<()> {
    for (l, dom) in net.domains.iter().enumerate() {
        if dom.fd.kind() != FdKind::Triangular {
            return Err(MilpError::Unsupported(format!(
                "link {} has a {} diagram; programs need triangular diagrams",
                net.ids[l],
                dom.fd.kind().name()
            )));
        }
    }
    for (si, s) in net.signals.iter().enumerate() {
        if s.phase_count() != 2 {
            return Err(MilpError::Unsupported(format!(
                "signal {si} has {} phases; programs support two-phase signals",
                s.phase_count()
            )));
        }
        for p in &s.plan()[1..] {
            if !is_multiple(p.start - s.offset(), s.cycle()) {
                return Err(MilpError::Build(format!(
                    "decision interval at {} does not start a cycle of signal {si}",
                    p.start
                )));
            }
        }
        if model == SignalModel::OnOff && !is_multiple(s.offset(), net.step) {
            return Err(MilpError::Build(format!(
                "offset {} of signal {si} is off the step grid",
                s.offset()
            )));
        }
    }
    Ok(())
}

/// Interval index of `schedule` in force at `t`.
fn interval_at(schedule: &SignalSchedule, t: f64) -> usize {
    schedule
        .plan()
        .partition_point(|p| p.start <= t + ALIGN_TOL)
        .saturating_sub(1)
}

struct Counts {
    step: f64,
    free_speed: f64,
    rho0: f64,
    length: f64,
}

impl Counts {
    /// `U(j)`.
    fn entering(&self, flows: &[usize], j: isize) -> LinExpr {
        if j <= 0 {
            return LinExpr::constant(self.free_speed * self.rho0 * j as f64 * self.step);
        }
        let mut e = LinExpr::default();
        for &v in &flows[..j as usize] {
            e.add_term(v, self.step);
        }
        e
    }

    /// `V(j)`.
    fn exiting(&self, flows: &[usize], j: isize) -> LinExpr {
        let mut e = self.entering(flows, j);
        e.constant -= self.rho0 * self.length;
        e
    }
}

fn uniform_density(net: &Network, l: usize) -> Result<f64> {
    let segs = net.initial_density[l].segments();
    let rho = segs[0].1;
    if segs.iter().any(|s| s.1 != rho) {
        return Err(MilpError::Unsupported(format!("link {} needs a uniform initial density", net.ids[l])));
    }
    let fd = net.domains[l].fd;
    if rho > fd.critical_density() * (1.0 + 1e-12) {
        return Err(MilpError::Unsupported(format!("link {} starts congested", net.ids[l])));
    }
    Ok(rho)
}

pub fn build_model(scn: &NetworkScenario, model: SignalModel, opts: &MilpOptions) -> Result<BuiltModel> {
    let scn = match opts.decision_interval {
        Some(len) => recut_plans(scn, len)?,
        None => scn.clone(),
    };
    let net = scn.resolve()?;
    check_network(&net, model)?;
    let (h, steps, n) = (net.step, net.steps, net.link_count());
    let caps: Vec<f64> = net.domains.iter().map(|d| d.fd.capacity()).collect();
    let c_max = caps.iter().cloned().fold(0.0, f64::max);
    let storage_max = net
        .domains
        .iter()
        .map(|d| d.fd.jam_density() * d.length())
        .fold(0.0, f64::max);
    let big_m = storage_max + c_max * net.horizon;
    let eps = 1e-6 * big_m;

    let mut m = MilpModel::new();
    let mut selectors = Vec::new();
    let mut defined = Vec::new();
    let mut entrance = Vec::new();
    let name = |l: usize| sanitize(&net.ids[l]);
    let mut q_in = vec![Vec::with_capacity(steps); n];
    let mut q_out = vec![Vec::with_capacity(steps); n];
    let mut demand = vec![Vec::with_capacity(steps); n];
    let mut queue = vec![Vec::with_capacity(steps); n];
    for l in 0..n {
        for k in 0..steps {
            q_in[l].push(m.continuous(format!("qin_{}_{k}", name(l)), 0.0, caps[l])?);
            q_out[l].push(m.continuous(format!("qout_{}_{k}", name(l)), 0.0, caps[l])?);
            demand[l].push(m.continuous(format!("D_{}_{k}", name(l)), 0.0, caps[l])?);
            queue[l].push(m.binary(format!("rhat_{}_{k}", name(l)))?);
        }
    }

    // Signal decisions and gates.
    let slots = decision_slots(&net);
    let mut decisions = Vec::new();
    // gate[si][phase][k]
    let mut gates: Vec<Vec<Vec<LinExpr>>> = Vec::new();
    for (si, schedule) in net.signals.iter().enumerate() {
        let sid = sanitize(&scn.signals[si].id);
        let first = decisions.len();
        for &(interval, start) in &slots[si] {
            let mut d = Decision {
                signal: si,
                signal_id: scn.signals[si].id.clone(),
                interval,
                start,
                candidates: Vec::new(),
                selectors: Vec::new(),
                eta: None,
            };
            let (lo, hi) = (opts.min_phase / schedule.cycle(), 1.0 - opts.min_phase / schedule.cycle());
            match model {
                SignalModel::OnOff => {
                    d.candidates = onoff_candidates(schedule.cycle(), h, opts.min_phase)?;
                }
                SignalModel::Continuum => {
                    if lo > hi {
                        return Err(MilpError::Build(format!(
                            "cycle {} leaves no split with phases of at least {} s",
                            schedule.cycle(),
                            opts.min_phase
                        )));
                    }
                    let eta = m.continuous(format!("eta_{sid}_{interval}"), lo, hi)?;
                    d.eta = Some(eta);
                    if let Some(set) = &opts.continuum_split_set {
                        d.candidates = set.iter().copied().filter(|&s| s >= lo - ALIGN_TOL && s <= hi + ALIGN_TOL).collect();
                        if d.candidates.is_empty() {
                            return Err(MilpError::Build("no admissible split in the restricted set".into()));
                        }
                    }
                }
            }
            if !d.candidates.is_empty() {
                let mut one = LinExpr::default();
                let mut share = LinExpr::default();
                for (c, &s) in d.candidates.iter().enumerate() {
                    let y = m.binary(format!("y_{sid}_{interval}_{c}"))?;
                    d.selectors.push(y);
                    one.add_term(y, 1.0);
                    share.add_term(y, s);
                }
                m.add_constraint(format!("pick_{sid}_{interval}"), "split", &one, Sense::Eq, &LinExpr::constant(1.0))?;
                if let Some(eta) = d.eta {
                    m.add_constraint(format!("eta_{sid}_{interval}"), "split", &LinExpr::var(eta), Sense::Eq, &share)?;
                    defined.push((eta, share));
                }
            }
            decisions.push(d);
        }
        let mine = &decisions[first..];
        let decision_at = |t: f64| {
            let i = interval_at(schedule, t);
            mine.iter().rposition(|d| d.interval <= i).unwrap_or(0)
        };
        let mut per_phase = vec![Vec::with_capacity(steps); 2];
        for k in 0..steps {
            let t = k as f64 * h;
            let d = &mine[decision_at(t)];
            match model {
                SignalModel::OnOff => {
                    for (p, phase_gates) in per_phase.iter_mut().enumerate() {
                        let u = m.binary(format!("u_{sid}_{p}_{k}"))?;
                        let mut pattern = LinExpr::default();
                        for (&s, &y) in d.candidates.iter().zip(&d.selectors) {
                            let sched = SignalSchedule::new(
                                schedule.cycle(),
                                schedule.offset(),
                                vec![SplitInterval {
                                    start: 0.0,
                                    shares: vec![s, 1.0 - s],
                                }],
                            )?;
                            match step_gate(&sched, p, SignalModel::OnOff, t, h)? {
                                Control::OnOff(1) => {
                                    pattern.add_term(y, 1.0);
                                }
                                _ => {}
                            }
                        }
                        m.add_constraint(format!("gate_{sid}_{p}_{k}"), "signal", &LinExpr::var(u), Sense::Eq, &pattern)?;
                        defined.push((u, pattern));
                        phase_gates.push(LinExpr::var(u));
                    }
                }
                SignalModel::Continuum => {
                    let eta = d.eta.expect("continuum decision has a split");
                    per_phase[0].push(LinExpr::var(eta));
                    let mut rest = LinExpr::constant(1.0);
                    rest.add_term(eta, -1.0);
                    per_phase[1].push(rest);
                }
            }
        }
        gates.push(per_phase);
    }

    // Link dynamics.
    for l in 0..n {
        let fd = net.domains[l].fd;
        let length = net.domains[l].length();
        let rho0 = uniform_density(&net, l)?;
        let (df, db) = lags(length, fd.free_flow_speed(), fd.backward_wave_speed(), h);
        let counts = Counts {
            step: h,
            free_speed: fd.free_flow_speed(),
            rho0,
            length,
        };
        let storage = fd.jam_density() * length;
        let id = name(l);
        for k in 0..steps {
            let ki = k as isize;
            // h D = min{C h, U(k+1−Δf) − V(k)}
            let reach = counts
                .entering(&q_in[l], ki + 1 - df as isize)
                .minus(&counts.exiting(&q_out[l], ki));
            let sel = MinSelector {
                z: queue[l][k],
                q: LinExpr::term(demand[l][k], h),
                a: LinExpr::constant(caps[l] * h),
                b: reach,
            };
            linearize_min_with(&mut m, &format!("demand_{id}_{k}"), "demand", &sel.q, &sel.a, &sel.b, big_m, sel.z)?;
            selectors.push(sel);
            // room ahead of the step
            let mut room = counts.exiting(&q_out[l], ki + 1 - db as isize);
            room.constant += storage;
            let room = room.minus(&counts.entering(&q_in[l], ki));
            if opts.no_spillback {
                m.add_constraint(
                    format!("storage_{id}_{k}"),
                    "storage",
                    &room,
                    Sense::Ge,
                    &LinExpr::constant(caps[l] * h),
                )?;
            } else {
                // entrance phase after the step: congested iff the storage
                // bound is reached
                let rbar = m.binary(format!("rbar_{id}_{k}"))?;
                let mut after = counts.exiting(&q_out[l], ki + 1 - db as isize);
                after.constant += storage;
                let after = after.minus(&counts.entering(&q_in[l], ki + 1));
                m.add_constraint(format!("jam_{id}_{k}"), "storage", &after, Sense::Ge, &LinExpr::constant(0.0))?;
                let mut hi = LinExpr::constant(big_m);
                hi.add_term(rbar, -big_m);
                m.add_constraint(format!("cong_{id}_{k}"), "entrance", &after, Sense::Le, &hi)?;
                let mut lo = LinExpr::constant(eps);
                lo.add_term(rbar, -big_m);
                m.add_constraint(format!("free_{id}_{k}"), "entrance", &after, Sense::Ge, &lo)?;
                entrance.push((rbar, after));
            }
        }
        if let Some(profile) = &net.sources[l] {
            for k in 0..steps {
                let t = k as f64 * h;
                let rate = profile.integral(t, t + h) / h;
                if rate > caps[l] * (1.0 + 1e-12) {
                    return Err(MilpError::Build(format!(
                        "inflow {rate} into link {} exceeds its capacity",
                        net.ids[l]
                    )));
                }
                m.add_constraint(
                    format!("source_{id}_{k}"),
                    "source",
                    &LinExpr::var(q_in[l][k]),
                    Sense::Eq,
                    &LinExpr::constant(rate),
                )?;
            }
        }
    }

    // Junctions.
    for j in &net.junctions {
        let jid = sanitize(&j.id);
        for (i, &l) in j.incoming.iter().enumerate() {
            let mut eff_static = caps[l];
            for (o, &r) in j.outgoing.iter().enumerate() {
                let a = j.turning[i][o];
                if a > 0.0 {
                    eff_static = eff_static.min(caps[r] / a);
                }
            }
            for k in 0..steps {
                let t = k as f64 * h;
                let eff = if j.kind == JunctionKind::Outlet {
                    eff_static.min(j.outlet_supply(t))
                } else {
                    eff_static
                };
                let row = format!("flow_{jid}_{i}_{k}");
                let q = LinExpr::var(q_out[l][k]);
                let d = LinExpr::var(demand[l][k]);
                match j.signal {
                    None if eff >= caps[l] => {
                        // D ≤ C ≤ 𝒮: the demand always passes
                        m.add_constraint(row, "junction", &q, Sense::Eq, &d)?;
                    }
                    None => {
                        let z = m.binary(format!("z_{jid}_{i}_{k}"))?;
                        linearize_min_with(&mut m, &row, "junction", &q, &d, &LinExpr::constant(eff), c_max, z)?;
                        selectors.push(MinSelector { z, q, a: d, b: LinExpr::constant(eff) });
                    }
                    Some(si) => {
                        let gate = gates[si][j.phases[i]][k].scaled(eff);
                        let z = m.binary(format!("z_{jid}_{i}_{k}"))?;
                        linearize_min_with(&mut m, &row, "junction", &q, &d, &gate, c_max, z)?;
                        selectors.push(MinSelector { z, q, a: d, b: gate });
                    }
                }
            }
        }
        for (o, &r) in j.outgoing.iter().enumerate() {
            for k in 0..steps {
                let mut sum = LinExpr::default();
                for (i, &l) in j.incoming.iter().enumerate() {
                    let a = j.turning[i][o];
                    if a != 0.0 {
                        sum.add_term(q_out[l][k], a);
                    }
                }
                m.add_constraint(
                    format!("receive_{jid}_{o}_{k}"),
                    "junction",
                    &LinExpr::var(q_in[r][k]),
                    Sense::Eq,
                    &sum,
                )?;
            }
        }
    }

    let sinks = net.sink_links();
    let mut obj = LinExpr::default();
    for &l in &sinks {
        for k in 0..steps {
            obj.add_term(q_out[l][k], step_weight(k));
        }
    }
    m.set_objective(&obj);
    m.validate()?;
    debug!(
        "built {} model: {} variables ({} binary), {} rows",
        model.name(),
        m.variables.len(),
        m.binary_count(),
        m.constraints.len()
    );
    Ok(BuiltModel {
        model: m,
        signal_model: model,
        options: opts.clone(),
        scenario: scn.clone(),
        link_ids: net.ids.clone(),
        steps,
        step: h,
        q_in,
        q_out,
        demand,
        queue,
        decisions,
        sinks,
        big_m,
        selectors,
        defined,
        entrance,
    })
}

/// Keeps LP-safe characters of an id.
fn sanitize(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
        .collect()
}

impl BuiltModel {
    /// First-phase share of every decision at the point `x`.
    pub fn split_values(&self, x: &[f64]) -> Vec<f64> {
        self.decisions
            .iter()
            .map(|d| match d.eta {
                Some(eta) => x[eta],
                None => d
                    .candidates
                    .iter()
                    .zip(&d.selectors)
                    .map(|(&s, &y)| s * x[y].round())
                    .sum(),
            })
            .collect()
    }

    /// Splits arranged per signal, in plan order.
    pub fn splits_by_signal(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let values = self.split_values(x);
        let mut out = vec![Vec::new(); self.scenario.signals.len()];
        for (d, v) in self.decisions.iter().zip(values) {
            out[d.signal].push(v);
        }
        out
    }

    /// Scenario whose signal plans carry the splits at `x`.
    pub fn scenario_at(&self, x: &[f64]) -> Result<NetworkScenario> {
        Ok(scenario_with_splits(&self.scenario, &self.splits_by_signal(x))?.with_model(self.signal_model))
    }

    /// Split selectors, branched on first.
    pub fn priority(&self) -> Vec<usize> {
        self.decisions.iter().flat_map(|d| d.selectors.iter().copied()).collect()
    }

    /// Full program point for the given first-phase shares (one per
    /// decision), with flows taken from the link transmission model.
    /// `None` if the shares are not realizable or spill back under the
    /// no-spillback stipulation.
    pub fn complete(&self, shares: &[f64]) -> Result<Option<Vec<f64>>> {
        let mut x = vec![0.0; self.model.variables.len()];
        let mut per_signal = vec![Vec::new(); self.scenario.signals.len()];
        for (d, &s) in self.decisions.iter().zip(shares) {
            per_signal[d.signal].push(s);
            if let Some(eta) = d.eta {
                x[eta] = s;
            }
            if !d.candidates.is_empty() {
                let Some(c) = d.candidates.iter().position(|&v| (v - s).abs() < 1e-9) else {
                    return Ok(None);
                };
                x[d.selectors[c]] = 1.0;
            }
        }
        let Some(ev) = crate::oracle::evaluate_splits(&self.scenario, self.signal_model, &per_signal)? else {
            return Ok(None);
        };
        if self.options.no_spillback && ev.spillback {
            return Ok(None);
        }
        for (v, e) in &self.defined {
            x[*v] = e.value(&x);
        }
        for (l, series) in ev.record.links.iter().enumerate() {
            for k in 0..self.steps {
                x[self.q_in[l][k]] = series.q_in[k];
                x[self.q_out[l][k]] = series.q_out[k];
                x[self.demand[l][k]] = series.demand[k];
            }
        }
        for sel in &self.selectors {
            x[sel.z] = if sel.a.value(&x) <= sel.b.value(&x) { 1.0 } else { 0.0 };
        }
        let eps = 1e-6 * self.big_m;
        for (r, after) in &self.entrance {
            x[*r] = if after.value(&x) < eps { 1.0 } else { 0.0 };
        }
        Ok(Some(x))
    }

    /// Coordinate ascent on the simulated objective starting from `shares`:
    /// each decision in turn takes its best admissible value. Returns the
    /// best complete point found.
    pub fn local_search(&self, shares: &[f64], passes: usize) -> Option<Vec<f64>> {
        let score = |s: &[f64]| {
            self.complete(s)
                .ok()
                .flatten()
                .map(|x| (self.model.objective_value(&x), x))
        };
        let mut current = shares.to_vec();
        let mut best = score(&current);
        for _ in 0..passes {
            let mut improved = false;
            for (i, d) in self.decisions.iter().enumerate() {
                let options: Vec<f64> = if d.candidates.is_empty() {
                    let var = &self.model.variables[d.eta.expect("unrestricted decisions carry a split")];
                    vec![var.lower, 0.5 * (var.lower + var.upper), var.upper]
                } else {
                    d.candidates.clone()
                };
                for v in options {
                    if (v - current[i]).abs() < 1e-12 {
                        continue;
                    }
                    let mut trial = current.clone();
                    trial[i] = v;
                    if let Some((obj, x)) = score(&trial) {
                        if best.as_ref().map_or(true, |(b, _)| obj > b + 1e-12) {
                            best = Some((obj, x));
                            current = trial;
                            improved = true;
                        }
                    }
                }
            }
            if !improved {
                break;
            }
        }
        best.map(|(_, x)| x)
    }

    /// Shares suggested by a relaxation point: the strongest selector, or
    /// the continuum split itself.
    pub fn rounded_shares(&self, x: &[f64]) -> Vec<f64> {
        self.decisions
            .iter()
            .map(|d| {
                if d.candidates.is_empty() {
                    let eta = d.eta.expect("unrestricted decisions carry a split");
                    let var = &self.model.variables[eta];
                    x[eta].clamp(var.lower, var.upper)
                } else {
                    let best = d
                        .selectors
                        .iter()
                        .enumerate()
                        .fold(0, |b, (i, &y)| if x[y] > x[d.selectors[b]] + 1e-9 { i } else { b });
                    d.candidates[best]
                }
            })
            .collect()
    }

    pub fn flows_at(&self, x: &[f64]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let read = |vars: &Vec<Vec<usize>>| vars.iter().map(|row| row.iter().map(|&v| x[v]).collect()).collect();
        (read(&self.q_in), read(&self.q_out))
    }
}
