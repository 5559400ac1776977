//! Error bounds and experiments comparing the on-and-off and continuum
//! signal models.

use std::io::Write;

use log::info;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fundamental::{FdKind, FundamentalDiagram};
use crate::laxhopf::{link_supply, make_downstream_condition, LinkConditions, LinkDomain, ValueCondition};
use crate::network::junction::JunctionKind;
use crate::network::scenario::{
    InflowSpec, InitialDensity, JunctionSpec, LinkSpec, NetworkScenario, SignalSpec, SimulationSpec,
};
use crate::network::{
    simulate, Engine, SignalModel, SignalSchedule, SplitInterval,
    TrajectoryRecord,
};
use crate::profile::{Step, StepProfile};

/// Tolerance used when a link's entrance counts as congested.
const CONGESTION_TOL: f64 = 1e-9;

// ---------------------------------------------------------------------------
// Bounds

/// Gap bound without spillback, plus the split-free relaxation `Δ C / 4`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NoSpillbackBound {
    pub value: f64,
    pub relaxed: f64,
}

/// `η(1−η) Δ min{C1, C3}`.
pub fn bound_no_spillback(eta: f64, cycle: f64, c1: f64, c3: f64) -> NoSpillbackBound {
    let c = c1.min(c3);
    NoSpillbackBound {
        value: eta * (1.0 - eta) * cycle * c,
        relaxed: cycle * c / 4.0,
    }
}

/// `η(1−η) Δ_A min{C1, C3} + min{C1, C3} η t`.
pub fn bound_spillback_triangular(eta: f64, cycle_a: f64, c1: f64, c3: f64, t: f64) -> f64 {
    bound_no_spillback(eta, cycle_a, c1, c3).value + c1.min(c3) * eta * t
}

/// `η(1−η) Δ_A min{C1, C3} + min{C1, J} η t` where `J` is the supply jump
/// bound of the downstream link of length `length` under cycle `cycle_b`.
#[allow(clippy::too_many_arguments)]
pub fn bound_spillback_concave(
    eta: f64,
    cycle_a: f64,
    cycle_b: f64,
    c1: f64,
    c3: f64,
    fd: &FundamentalDiagram,
    length: f64,
    t: f64,
) -> Result<f64> {
    let jump = fd.gs_jump_bound(length, cycle_b)?;
    Ok(bound_no_spillback(eta, cycle_a, c1, c3).value + c1.min(jump) * eta * t)
}

// ---------------------------------------------------------------------------
// Model comparison

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    NoSpillback,
    SpillbackTriangular,
    SpillbackConcave,
    None,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub link: String,
    /// `sup |N^Δ − N^0|` over both link ends and all grid times.
    pub gap: f64,
    /// `(t, max over both ends of |N^Δ − N^0|)`.
    pub series: Vec<(f64, f64)>,
    pub bound: f64,
    pub bound_kind: BoundKind,
    pub pass: bool,
}

impl ComparisonReport {
    /// Running maximum of the gap restricted to `[t0, t1]`.
    pub fn max_gap_between(&self, t0: f64, t1: f64) -> f64 {
        self.series
            .iter()
            .filter(|(t, _)| *t >= t0 - 1e-9 && *t <= t1 + 1e-9)
            .map(|&(_, g)| g)
            .fold(0.0, f64::max)
    }

    pub fn gap_at(&self, t: f64) -> Option<f64> {
        self.series.iter().find(|(s, _)| (s - t).abs() < 1e-9).map(|&(_, g)| g)
    }
}

/// Pointwise gap between two runs of the same scenario on `link`. The caller
/// supplies the applicable bound.
pub fn sup_gap(
    onoff: &TrajectoryRecord,
    continuum: &TrajectoryRecord,
    link: &str,
    bound: f64,
    bound_kind: BoundKind,
) -> Result<ComparisonReport> {
    if !onoff.same_grid(continuum) {
        return Err(Error::Comparison("trajectories are on different grids".into()));
    }
    let a = onoff.link(link)?;
    let b = continuum.link(link)?;
    let series: Vec<(f64, f64)> = onoff
        .times
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let up = (a.n_up[k] - b.n_up[k]).abs();
            let down = (a.n_down[k] - b.n_down[k]).abs();
            (t, up.max(down))
        })
        .collect();
    let gap = series.iter().map(|&(_, g)| g).fold(0.0, f64::max);
    Ok(ComparisonReport {
        link: link.to_string(),
        gap,
        series,
        bound,
        bound_kind,
        pass: bound_kind == BoundKind::None || gap <= bound + 1e-9,
    })
}

/// Runs a scenario under both signal models.
pub fn run_both(scn: &NetworkScenario) -> Result<(TrajectoryRecord, TrajectoryRecord)> {
    let onoff = simulate(&scn.clone().with_model(SignalModel::OnOff))?;
    let cont = simulate(&scn.clone().with_model(SignalModel::Continuum))?;
    Ok((onoff, cont))
}

/// Whether any link entrance was congested at any step.
pub fn spillback_occurred(rec: &TrajectoryRecord) -> bool {
    rec.links.iter().any(|l| l.entry_congested.iter().any(|&c| c))
}

/// No-spillback bound for an approach of a signalized junction: uses the
/// approach's split at `t = 0`, its capacity and the smallest capacity among
/// the junction's receivers.
pub fn approach_bound(scn: &NetworkScenario, link: &str) -> Result<NoSpillbackBound> {
    let net = scn.resolve()?;
    let l = net.link_index(link)?;
    let (ji, port) = net.downstream_of[l];
    let j = &net.junctions[ji];
    let si = j
        .signal
        .ok_or_else(|| Error::Comparison(format!("link {link} is not signalized")))?;
    let schedule = &net.signals[si];
    let eta = schedule.share(j.phases[port], 0.0);
    let c1 = net.domains[l].fd.capacity();
    let c3 = j
        .outgoing
        .iter()
        .map(|&o| net.domains[o].fd.capacity())
        .fold(f64::INFINITY, f64::min);
    Ok(bound_no_spillback(eta, schedule.cycle(), c1, c3.min(c1)))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub cycle: f64,
    pub step: f64,
    pub gap: f64,
    pub bound: f64,
    /// Spillback seen in either run; the no-spillback bound then does not
    /// apply.
    pub spillback: bool,
}

/// Largest step not above `step` (halving) that aligns every signal switch
/// with the grid.
pub fn aligned_step(scn: &NetworkScenario, step: f64) -> Result<f64> {
    let aligned = |h: f64| {
        scn.signals.iter().all(|s| {
            let mut times = vec![s.cycle, s.offset];
            for interval in &s.plan {
                let mut acc = 0.0;
                for share in &interval.shares {
                    acc += share * s.cycle;
                    times.push(acc);
                }
                times.push(interval.start);
            }
            times.iter().all(|&t| ((t / h) - (t / h).round()).abs() < 1e-9)
        }) && ((scn.simulation.horizon / h) - (scn.simulation.horizon / h).round()).abs() < 1e-9
    };
    let mut h = step;
    for _ in 0..8 {
        if aligned(h) {
            return Ok(h);
        }
        h /= 2.0;
    }
    Err(Error::InvalidScenario(format!("no step below {step} aligns the signals")))
}

/// Sup-norm gap on `link` for each cycle length. The step is refined when a
/// cycle's switches do not fall on the grid.
pub fn convergence_study(scn: &NetworkScenario, link: &str, cycles: &[f64]) -> Result<Vec<ConvergenceRow>> {
    cycles
        .iter()
        .map(|&cycle| {
            let base = scn.clone().with_signal_overrides(Some(cycle), None, None);
            let step = aligned_step(&base, scn.simulation.step)?;
            let variant = base.with_step(step);
            let (onoff, cont) = run_both(&variant)?;
            let bound = approach_bound(&variant, link)?.value;
            let report = sup_gap(&onoff, &cont, link, bound, BoundKind::NoSpillback)?;
            let spillback = spillback_occurred(&onoff) || spillback_occurred(&cont);
            info!("cycle {cycle}: gap {:.4} bound {bound:.4} spillback {spillback}", report.gap);
            Ok(ConvergenceRow {
                cycle,
                step,
                gap: report.gap,
                bound,
                spillback,
            })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Supply jumps

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct JumpReport {
    /// `(time at the start of the drop, size)` for each detected drop.
    pub jumps: Vec<(f64, f64)>,
    pub max_jump: f64,
    /// Largest rate of increase between jumps.
    pub max_increase_rate: f64,
}

/// Detects downward jumps in a sampled series: a drop larger than three times
/// the median absolute change (and than `floor`). The whole falling run
/// around a detected drop counts as one jump.
pub fn detect_jumps(times: &[f64], values: &[f64], floor: f64) -> JumpReport {
    if values.len() < 2 {
        return JumpReport::default();
    }
    let diffs: Vec<f64> = values.windows(2).map(|w| w[1] - w[0]).collect();
    let mut abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    abs.sort_by(f64::total_cmp);
    let median = abs[abs.len() / 2];
    let threshold = (3.0 * median).max(floor);
    let is_drop: Vec<bool> = diffs.iter().map(|&d| -d > threshold).collect();
    let mut report = JumpReport::default();
    let mut k = 0;
    while k < diffs.len() {
        if diffs[k] < 0.0 {
            // a jump is a maximal falling run containing a detected drop
            let start = k;
            let mut size = 0.0;
            let mut detected = false;
            while k < diffs.len() && diffs[k] < 0.0 {
                size -= diffs[k];
                detected |= is_drop[k];
                k += 1;
            }
            if detected {
                report.jumps.push((times[start], size));
                report.max_jump = report.max_jump.max(size);
            }
        } else {
            let dt = times[k + 1] - times[k];
            if dt > 0.0 {
                report.max_increase_rate = report.max_increase_rate.max(diffs[k] / dt);
            }
            k += 1;
        }
    }
    report
}

/// Jumps in the supply series of `link` recorded by a simulation.
pub fn measure_supply_jumps(rec: &TrajectoryRecord, link: &str) -> Result<JumpReport> {
    let series = rec.link(link)?;
    let times = &rec.times[..series.supply.len()];
    let cap = series.supply.iter().copied().fold(0.0, f64::max);
    if !series.entry_congested.iter().any(|&c| c) {
        return Ok(JumpReport::default());
    }
    Ok(detect_jumps(times, &series.supply, 1e-6 * cap.max(1.0)))
}

/// Sum of absolute changes.
pub fn total_variation(values: &[f64]) -> f64 {
    values.windows(2).map(|w| (w[1] - w[0]).abs()).sum()
}

/// Setup of a single congested link whose exit discharges at capacity
/// during green.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CongestedLinkSetup {
    pub fd: FundamentalDiagram,
    pub length: f64,
    pub cycle: f64,
    pub green_share: f64,
    /// Uniform initial density (congested).
    pub initial_density: f64,
    /// Number of cycles simulated before measuring.
    pub warmup_cycles: usize,
    /// Number of cycles measured.
    pub measured_cycles: usize,
    /// Sampling step, also the difference-quotient step.
    pub step: f64,
}

impl CongestedLinkSetup {
    pub fn new(fd: FundamentalDiagram, length: f64, cycle: f64) -> Self {
        Self {
            fd,
            length,
            cycle,
            green_share: 1.0 / 3.0,
            initial_density: fd.jam_density(),
            warmup_cycles: 30,
            measured_cycles: 6,
            step: 1.0,
        }
    }

    fn horizon(&self) -> f64 {
        (self.warmup_cycles + self.measured_cycles) as f64 * self.cycle + self.step
    }

    /// Entrance supply sampled over the measured cycles. The entrance is
    /// unconstrained, so the link stays fed and the supply equals the
    /// entrance flow.
    pub fn supply_series(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        let horizon = self.horizon();
        let dom = LinkDomain::new(0.0, self.length, horizon, self.fd)?;
        let initial = ValueCondition::uniform_initial(&dom, self.initial_density)?;
        let anchor = initial.eval(dom.b)?;
        let schedule = SignalSchedule::two_phase(self.cycle, self.green_share, 0.0)?;
        let down = make_downstream_condition(
            &StepProfile::constant(self.fd.capacity()),
            &schedule,
            0,
            SignalModel::OnOff,
            horizon,
        )?
        .shifted(anchor);
        let vc = LinkConditions::new(&dom, initial, None, Some(down))?;
        let start = self.warmup_cycles as f64 * self.cycle;
        let n = (self.measured_cycles as f64 * self.cycle / self.step).round() as usize;
        let mut times = Vec::with_capacity(n);
        let mut values = Vec::with_capacity(n);
        for k in 0..n {
            let t = start + k as f64 * self.step;
            times.push(t);
            values.push(link_supply(&dom, &vc, t, self.step)?);
        }
        Ok((times, values))
    }

    pub fn jumps(&self) -> Result<JumpReport> {
        let (t, s) = self.supply_series()?;
        Ok(detect_jumps(&t, &s, 1e-6 * self.fd.capacity()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct JumpRow {
    pub length: f64,
    pub cycle: f64,
    pub measured: f64,
    pub bound: f64,
    pub max_increase_rate: f64,
    pub rate_bound: f64,
}

/// Measured supply jumps against the exact jump bound and the entrance rate
/// bound, for each `(L, Δ)`.
pub fn jump_table(fd: &FundamentalDiagram, cases: &[(f64, f64)]) -> Result<Vec<JumpRow>> {
    cases
        .iter()
        .map(|&(length, cycle)| {
            let report = CongestedLinkSetup::new(*fd, length, cycle).jumps()?;
            Ok(JumpRow {
                length,
                cycle,
                measured: report.max_jump,
                bound: fd.gs_jump_bound(length, cycle)?,
                max_increase_rate: report.max_increase_rate,
                rate_bound: fd.oleinik_rate_bound(length)?,
            })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Scenario builders

fn link(id: &str, length: f64, fd: FundamentalDiagram, rho: f64) -> LinkSpec {
    LinkSpec {
        id: id.into(),
        length,
        fd,
        initial_density: InitialDensity::Uniform(rho),
    }
}

fn inflow(link: &str, rate: f64) -> InflowSpec {
    InflowSpec {
        link: link.into(),
        profile: StepProfile::constant(rate),
    }
}

fn two_phase_signal(id: &str, cycle: f64, eta: f64, offset: f64) -> SignalSpec {
    SignalSpec {
        id: id.into(),
        cycle,
        offset,
        plan: vec![SplitInterval {
            start: 0.0,
            shares: vec![eta, 1.0 - eta],
        }],
    }
}

/// Signalized merge `I1, I2 → I3` with constant inflows and a free exit.
pub fn merge_scenario(
    fd: FundamentalDiagram,
    cycle: f64,
    eta: f64,
    inflows: (f64, f64),
    horizon: f64,
    step: f64,
) -> NetworkScenario {
    NetworkScenario {
        links: ["I1", "I2", "I3"].iter().map(|id| link(id, 400.0, fd, 0.0)).collect(),
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
        signals: vec![two_phase_signal("SA", cycle, eta, 0.0)],
        inflows: vec![inflow("I1", inflows.0), inflow("I2", inflows.1)],
        simulation: SimulationSpec {
            horizon,
            step,
            model: SignalModel::OnOff,
            engine: Engine::LaxHopf,
        },
    }
}

/// Supply profile `C (1 − u(t))` of a downstream link whose signal is in
/// antiphase with `schedule`'s first phase.
pub fn antiphase_supply(schedule: &SignalSchedule, capacity: f64, horizon: f64) -> Result<StepProfile> {
    let mut starts = vec![0.0];
    starts.extend(schedule.switch_times(0, 0.0, horizon));
    let steps = starts
        .iter()
        .enumerate()
        .map(|(i, &s)| {
            let end = starts.get(i + 1).copied().unwrap_or(horizon);
            let green = schedule.is_green(0, 0.5 * (s + end));
            Step {
                start: s,
                rate: if green { 0.0 } else { capacity },
            }
        })
        .collect();
    StepProfile::new(steps)
}

/// Single approach `I1` whose downstream supply is `C (1 − u1)`: the
/// downstream signal is in antiphase with the approach's own signal. The
/// approach is fed at capacity, so its exit always has a queue.
pub fn resonant_scenario(fd: FundamentalDiagram, cycle: f64, eta: f64, horizon: f64, step: f64) -> Result<NetworkScenario> {
    let schedule = SignalSchedule::two_phase(cycle, eta, 0.0)?;
    let supply = antiphase_supply(&schedule, fd.capacity(), horizon)?;
    Ok(NetworkScenario {
        links: vec![link("I1", 400.0, fd, 0.0)],
        junctions: vec![JunctionSpec {
            id: "B".into(),
            kind: JunctionKind::Outlet,
            incoming: vec!["I1".into()],
            outgoing: vec![],
            turning: None,
            signal: Some("S1".into()),
            phase_order: None,
            capacity: None,
            supply: Some(supply),
        }],
        signals: vec![two_phase_signal("S1", cycle, eta, 0.0)],
        inflows: vec![inflow("I1", fd.capacity())],
        simulation: SimulationSpec {
            horizon,
            step,
            model: SignalModel::OnOff,
            engine: Engine::LaxHopf,
        },
    })
}

/// Three approaches `a1, a2, a3 → a4` served in that order with equal
/// splits. `a1` and `a3` are fed at capacity, `a2` is empty, and `a4` starts
/// congested behind an exit bottleneck of capacity `exit_capacity`.
pub fn transient_scenario(
    fd: FundamentalDiagram,
    cycle: f64,
    exit_capacity: f64,
    horizon: f64,
    step: f64,
) -> Result<NetworkScenario> {
    let congested = fd.congested_inverse(exit_capacity)?;
    Ok(NetworkScenario {
        links: vec![
            link("a1", 400.0, fd, 0.0),
            link("a2", 400.0, fd, 0.0),
            link("a3", 400.0, fd, 0.0),
            link("a4", 400.0, fd, congested),
        ],
        junctions: vec![
            JunctionSpec {
                id: "M".into(),
                kind: JunctionKind::Merge3to1,
                incoming: vec!["a1".into(), "a2".into(), "a3".into()],
                outgoing: vec!["a4".into()],
                turning: None,
                signal: Some("S".into()),
                phase_order: Some(vec![0, 1, 2]),
                capacity: None,
                supply: None,
            },
            JunctionSpec {
                id: "E".into(),
                kind: JunctionKind::Outlet,
                incoming: vec!["a4".into()],
                outgoing: vec![],
                turning: None,
                signal: None,
                phase_order: None,
                capacity: Some(exit_capacity),
                supply: None,
            },
        ],
        signals: vec![SignalSpec {
            id: "S".into(),
            cycle,
            offset: 0.0,
            plan: vec![SplitInterval {
                start: 0.0,
                shares: vec![1.0 / 3.0; 3],
            }],
        }],
        inflows: vec![inflow("a1", fd.capacity()), inflow("a3", fd.capacity())],
        simulation: SimulationSpec {
            horizon,
            step,
            model: SignalModel::OnOff,
            engine: Engine::LaxHopf,
        },
    })
}

// ---------------------------------------------------------------------------
// Transient spillback

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TransientReport {
    pub cycle: f64,
    /// `N(t, b)` of `a1` minus that of `a3` under the on-and-off model.
    pub onoff_exit_difference: Vec<(f64, f64)>,
    /// Same under the continuum model.
    pub continuum_exit_difference: Vec<(f64, f64)>,
    /// Supply of `a4` under the on-and-off model.
    pub supply: Vec<f64>,
    /// Capacity-level supply values seen while spillback is absent.
    pub supply_high: f64,
    /// Typical supply during spillback spells (median of the congested
    /// samples).
    pub supply_low: f64,
    /// Largest model gap over `a1` and `a3`.
    pub model_gap: f64,
}

pub fn transient_spillback_demo(
    fd: FundamentalDiagram,
    cycle: f64,
    exit_capacity: f64,
    horizon: f64,
    step: f64,
) -> Result<TransientReport> {
    let scn = transient_scenario(fd, cycle, exit_capacity, horizon, step)?;
    let (onoff, cont) = run_both(&scn)?;
    let diff = |rec: &TrajectoryRecord| -> Result<Vec<(f64, f64)>> {
        let a1 = rec.link("a1")?;
        let a3 = rec.link("a3")?;
        Ok(rec
            .times
            .iter()
            .enumerate()
            .map(|(k, &t)| (t, a1.n_down[k] - a3.n_down[k]))
            .collect())
    };
    let a4 = onoff.link("a4")?;
    let cap = fd.capacity();
    let supply_high = a4.supply.iter().copied().fold(0.0, f64::max);
    let mut low: Vec<f64> = a4
        .supply
        .iter()
        .copied()
        .filter(|&s| s < cap * (1.0 - CONGESTION_TOL))
        .collect();
    low.sort_by(f64::total_cmp);
    let supply_low = low.get(low.len() / 2).copied().unwrap_or(cap);
    let model_gap = ["a1", "a3"]
        .iter()
        .map(|l| sup_gap(&onoff, &cont, l, 0.0, BoundKind::None).map(|r| r.gap))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    Ok(TransientReport {
        cycle,
        onoff_exit_difference: diff(&onoff)?,
        continuum_exit_difference: diff(&cont)?,
        supply: a4.supply.clone(),
        supply_high,
        supply_low,
        model_gap,
    })
}

// ---------------------------------------------------------------------------
// Reports

/// One row of an experiment report.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentRow {
    pub scenario: String,
    pub cycle_a: f64,
    pub cycle_b: Option<f64>,
    pub eta: f64,
    pub fd: String,
    pub gap: f64,
    pub bound: f64,
    pub pass: bool,
}

pub fn write_rows<T: Serialize, W: Write>(rows: &[T], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Long-format series: `series,x,y` per line.
pub fn write_long_series<W: Write>(series: &[(&str, &[(f64, f64)])], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["series", "x", "y"])?;
    for (name, points) in series {
        for (x, y) in points.iter() {
            w.write_record([name.to_string(), x.to_string(), y.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Whether a diagram is strictly concave (jump bounds exist).
pub fn is_strictly_concave(fd: &FundamentalDiagram) -> bool {
    fd.kind() == FdKind::Greenshields
}
