//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the lines always reach the output.
//! The process fails when the set of failing criteria differs from
//! `EXPECTED_FAILURES`, so a regression and an unexpected pass are both
//! reported.

#[path = "acceptance/godunov.rs"]
mod godunov;

use std::time::Instant;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use signalflow_core::analysis::{
    aligned_step, bound_spillback_triangular, jump_table, resonant_scenario, run_both, spillback_occurred, sup_gap,
    transient_spillback_demo, BoundKind, ComparisonReport, TransientReport,
};
use signalflow_core::ltm::lags_are_integral;
use signalflow_core::network::{
    simulate, Engine, InflowSpec, InitialDensity, JunctionKind, JunctionSpec, LinkSpec, NetworkScenario,
    LinkSeries, SignalModel, SimulationSpec, TrajectoryRecord,
};
use signalflow_core::profile::StepProfile;
use signalflow_core::FundamentalDiagram;
use signalflow_milp::instances::{parity_instances, SPLIT_SET};
use signalflow_milp::{build_model, enumerate_oracle, optimize, replay, BbOptions, MilpOptions};

/// Criteria whose targets the implemented model does not reach: the
/// resonant gap stays near a sixth of its bound, and the short-cycle jump on
/// the longest link is about a fifth below the reference value.
const EXPECTED_FAILURES: [u8; 2] = [4, 5];

// Tolerances.
const BOUND_NO_SPILLBACK: f64 = 20.0;
const MAX_SECONDS_PER_RUN: f64 = 60.0;
const STATIONARY_TOL: f64 = 1e-6;
const HALVING_RATIO: f64 = 0.5;
const HALVING_TOL: f64 = 0.1;
const RESONANT_BOUND: f64 = 1677.8;
const RESONANT_SHARE: f64 = 0.5;
const NO_CONVERGENCE_TOL: f64 = 0.05;
const JUMP_REL_TOL: f64 = 0.10;
const JUMP_SECONDS: f64 = 300.0;
const RATE_TOL: f64 = 0.05;
const LOW_SUPPLY: f64 = 0.33;
const LOW_SUPPLY_TOL: f64 = 0.05;
const TRANSIENT_CHANGE_TOL: f64 = 0.10;
const ENGINE_TOL: f64 = 1.0;
const GODUNOV_ABS: f64 = 0.05;
const GODUNOV_REL: f64 = 0.005;
const GODUNOV_LH_STEP: f64 = 0.1;
const GODUNOV_CELLS_PER_METRE: [usize; 2] = [16, 64];
const PARITY_TOL: f64 = 1e-6;

/// Reference supply jumps and their bounds for `(L, cycle)` on the
/// Greenshields diagram.
const JUMP_CASES: [(f64, f64, f64, f64); 4] = [
    (400.0, 60.0, 1.04, 1.19),
    (800.0, 60.0, 0.89, 1.0),
    (1600.0, 60.0, 0.67, 0.74),
    (1600.0, 30.0, 0.43, 0.48),
];

struct Outcome {
    id: u8,
    name: &'static str,
    pass: bool,
    detail: String,
}

fn scenario(name: &str) -> NetworkScenario {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../scenarios/");
    NetworkScenario::from_path(format!("{path}{name}")).expect("shipped scenario loads")
}

fn capacity() -> f64 {
    FundamentalDiagram::reference_triangular().capacity()
}

/// Gap report of every link, merged: per-time max over links.
fn merged_gap(onoff: &TrajectoryRecord, cont: &TrajectoryRecord) -> Vec<(f64, f64)> {
    let reports: Vec<ComparisonReport> = onoff
        .links
        .iter()
        .map(|l| sup_gap(onoff, cont, &l.id, 0.0, BoundKind::None).unwrap())
        .collect();
    (0..onoff.times.len())
        .map(|k| (onoff.times[k], reports.iter().map(|r| r.series[k].1).fold(0.0, f64::max)))
        .collect()
}

fn sup(series: &[(f64, f64)], t0: f64, t1: f64) -> f64 {
    series
        .iter()
        .filter(|(t, _)| *t >= t0 - 1e-9 && *t <= t1 + 1e-9)
        .map(|&(_, g)| g)
        .fold(0.0, f64::max)
}

struct MergeRun {
    name: &'static str,
    series: Vec<(f64, f64)>,
    seconds: f64,
    spillback: bool,
}

fn merge_runs() -> Vec<MergeRun> {
    [("triangular", "merge_triangular.json"), ("greenshields", "merge_greenshields.json")]
        .iter()
        .map(|&(name, file)| {
            let start = Instant::now();
            let (onoff, cont) = run_both(&scenario(file)).unwrap();
            MergeRun {
                name,
                series: merged_gap(&onoff, &cont),
                seconds: start.elapsed().as_secs_f64(),
                spillback: spillback_occurred(&onoff) || spillback_occurred(&cont),
            }
        })
        .collect()
}

fn no_spillback_bound(runs: &[MergeRun]) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for r in runs {
        let gap = sup(&r.series, 0.0, f64::INFINITY);
        let ok = !r.spillback && gap > 0.0 && gap <= BOUND_NO_SPILLBACK && r.seconds < MAX_SECONDS_PER_RUN;
        pass &= ok;
        parts.push(format!("{}: gap {gap:.4} (≤ {BOUND_NO_SPILLBACK}) in {:.1}s", r.name, r.seconds));
    }
    Outcome {
        id: 1,
        name: "model gap without spillback",
        pass,
        detail: parts.join("; "),
    }
}

fn stationarity(runs: &[MergeRun]) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for r in runs {
        let early = sup(&r.series, 0.0, 120.0);
        let late = sup(&r.series, 0.0, 1500.0);
        pass &= (late - early).abs() <= STATIONARY_TOL;
        parts.push(format!("{}: running max {early:.6} at 120 s, {late:.6} at 1500 s", r.name));
    }
    Outcome {
        id: 2,
        name: "gap independent of time",
        pass,
        detail: parts.join("; "),
    }
}

fn convergence_order() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, file) in [("triangular", "merge_triangular.json"), ("greenshields", "merge_greenshields.json")] {
        let base = scenario(file);
        let gaps: Vec<f64> = [60.0, 30.0, 15.0]
            .iter()
            .map(|&cycle| {
                let scn = base.clone().with_signal_overrides(Some(cycle), None, None);
                let step = aligned_step(&scn, scn.simulation.step).unwrap();
                let (onoff, cont) = run_both(&scn.with_step(step)).unwrap();
                sup(&merged_gap(&onoff, &cont), 0.0, f64::INFINITY)
            })
            .collect();
        let ratios = [gaps[1] / gaps[0], gaps[2] / gaps[1]];
        pass &= ratios.iter().all(|r| (r - HALVING_RATIO).abs() <= HALVING_TOL);
        parts.push(format!(
            "{name}: gaps {:.3}, {:.3}, {:.3}, ratios {:.3}, {:.3}",
            gaps[0], gaps[1], gaps[2], ratios[0], ratios[1]
        ));
    }
    Outcome {
        id: 3,
        name: "gap halves with the cycle",
        pass,
        detail: parts.join("; "),
    }
}

fn resonant_spillback() -> Outcome {
    let horizon = 1500.0;
    let eta = 5.0 / 6.0;
    let c = capacity();
    let bound = bound_spillback_triangular(eta, 60.0, c, c, horizon);
    let mut gaps = Vec::new();
    let mut blocked = true;
    let mut linear = true;
    for cycle in [60.0, 30.0] {
        // the exit supply follows the signal, so each cycle needs its own scenario
        let scn = resonant_scenario(FundamentalDiagram::reference_triangular(), cycle, eta, horizon, 1.0).unwrap();
        let (onoff, cont) = run_both(&scn).unwrap();
        blocked &= onoff.link("I1").unwrap().n_down.iter().all(|n| n.abs() <= 1e-9);
        let down = &cont.link("I1").unwrap().n_down;
        let (half, end) = (down[down.len() / 2], down[down.len() - 1]);
        linear &= end > 0.0 && ((end / horizon) / (half / (0.5 * horizon)) - 1.0).abs() <= 0.05;
        let report = sup_gap(&onoff, &cont, "I1", bound, BoundKind::SpillbackTriangular).unwrap();
        gaps.push(report.gap_at(horizon).unwrap());
    }
    let change = (gaps[1] - gaps[0]).abs() / gaps[0];
    let within = gaps.iter().all(|&g| g <= bound + 1e-9);
    let large = gaps[0] > RESONANT_SHARE * bound;
    let bound_matches = (bound - RESONANT_BOUND).abs() <= 0.1;
    Outcome {
        id: 4,
        name: "no convergence under resonant spillback",
        pass: blocked && linear && within && large && bound_matches && change < NO_CONVERGENCE_TOL,
        detail: format!(
            "on-off exit blocked {blocked}, continuum exit linear {linear}, gap {:.2} / {:.2} ({:.1}% of bound {bound:.1}, need > {:.0}%), change under halving {:.2}%",
            gaps[0],
            gaps[1],
            100.0 * gaps[0] / bound,
            100.0 * RESONANT_SHARE,
            100.0 * change
        ),
    }
}

fn round_to(x: f64, digits: i32) -> f64 {
    let s = 10f64.powi(digits);
    (x * s).round() / s
}

struct JumpRun {
    rows: Vec<signalflow_core::analysis::JumpRow>,
    seconds: f64,
}

fn jump_run() -> JumpRun {
    let start = Instant::now();
    let cases: Vec<(f64, f64)> = JUMP_CASES.iter().map(|c| (c.0, c.1)).collect();
    let rows = jump_table(&FundamentalDiagram::reference_greenshields(), &cases).unwrap();
    JumpRun {
        rows,
        seconds: start.elapsed().as_secs_f64(),
    }
}

fn jump_table_check(run: &JumpRun) -> Outcome {
    let mut pass = run.seconds < JUMP_SECONDS;
    let mut parts = Vec::new();
    for (row, &(l, cycle, reference, ref_bound)) in run.rows.iter().zip(&JUMP_CASES) {
        let rel = (row.measured - reference).abs() / reference;
        let ok = rel <= JUMP_REL_TOL
            && row.measured <= round_to(row.bound, 3) + 1e-12
            && (round_to(row.bound, 2) - ref_bound).abs() < 1e-9;
        pass &= ok;
        parts.push(format!(
            "({l}, {cycle}): {:.3} vs {reference} ({:+.1}%), bound {:.3}{}",
            row.measured,
            100.0 * (row.measured - reference) / reference,
            row.bound,
            if ok { "" } else { " FAIL" }
        ));
    }
    Outcome {
        id: 5,
        name: "supply jumps behind a congested exit",
        pass,
        detail: format!("{} in {:.1}s", parts.join("; "), run.seconds),
    }
}

fn rate_check(run: &JumpRun) -> Outcome {
    let fd = FundamentalDiagram::reference_greenshields();
    // w³ / (b L) with w = v0 and b = 2 v0 / ρj the curvature bound
    let w = fd.free_flow_speed();
    let b = 2.0 * fd.free_flow_speed() / fd.jam_density();
    let mut pass = true;
    let mut parts = Vec::new();
    for row in &run.rows {
        let limit = w.powi(3) / (b * row.length);
        pass &= row.max_increase_rate <= limit * (1.0 + RATE_TOL) && (row.rate_bound - limit).abs() < 1e-12;
        parts.push(format!("({}, {}): {:.4} ≤ {limit:.4}", row.length, row.cycle, row.max_increase_rate));
    }
    Outcome {
        id: 6,
        name: "supply rises no faster than the entropy rate",
        pass,
        detail: parts.join("; "),
    }
}

fn transient_checks(r: &TransientReport) -> (bool, String) {
    let c = capacity();
    let high = (r.supply_high - c).abs() <= 1e-9;
    let low = (r.supply_low - LOW_SUPPLY).abs() <= LOW_SUPPLY_TOL;
    let d = &r.onoff_exit_difference;
    let (mid, end) = (d[d.len() / 2].1.abs(), d[d.len() - 1].1.abs());
    let grows = end > mid && mid > 0.0;
    let even = r.continuum_exit_difference.iter().all(|(_, v)| v.abs() <= 1e-9);
    (
        high && low && grows && even,
        format!(
            "cycle {}: supply {:.4}/{:.4}, on-off exit difference {:.1} → {:.1}, continuum {}, gap {:.2}",
            r.cycle,
            r.supply_high,
            r.supply_low,
            mid,
            end,
            if even { "0" } else { "nonzero" },
            r.model_gap
        ),
    )
}

fn transient_spillback() -> Outcome {
    let run = |fd: FundamentalDiagram| {
        [60.0, 30.0].map(|cycle| transient_spillback_demo(fd, cycle, 1.0 / 3.0, 1500.0, 1.0).unwrap())
    };
    let gs = run(FundamentalDiagram::reference_greenshields());
    let (ok_a, a) = transient_checks(&gs[0]);
    let (ok_b, b) = transient_checks(&gs[1]);
    let change = (gs[1].model_gap - gs[0].model_gap).abs() / gs[0].model_gap;
    let tri = run(FundamentalDiagram::reference_triangular());
    let tri_change = (tri[1].model_gap - tri[0].model_gap).abs() / tri[0].model_gap;
    Outcome {
        id: 7,
        name: "transient spillback persists under cycle refinement",
        pass: ok_a && ok_b && change < TRANSIENT_CHANGE_TOL,
        detail: format!(
            "greenshields {a}; {b}; gap change {:.1}% (triangular, not gated: gaps {:.2} / {:.2}, change {:.1}%)",
            100.0 * change,
            tri[0].model_gap,
            tri[1].model_gap,
            100.0 * tri_change
        ),
    }
}

fn engine_parity() -> Outcome {
    let fd = FundamentalDiagram::reference_triangular();
    // (inflow 1, inflow 2, first-phase split, cycle)
    let cases = [
        (0.5, 0.4, 0.5, 60.0),
        (0.3, 0.3, 0.5, 60.0),
        (0.6, 0.2, 2.0 / 3.0, 60.0),
        (0.2, 0.5, 1.0 / 3.0, 90.0),
        (0.4, 0.4, 0.5, 30.0),
    ];
    let mut worst: f64 = 0.0;
    let mut valid = true;
    for (r1, r2, eta, cycle) in cases {
        let scn = signalflow_core::analysis::merge_scenario(fd, cycle, eta, (r1, r2), 1500.0, 1.0);
        valid &= scn.links.iter().all(|l| {
            lags_are_integral(l.length, l.fd.free_flow_speed(), l.fd.backward_wave_speed(), scn.simulation.step)
        });
        for model in [SignalModel::OnOff, SignalModel::Continuum] {
            let lh = simulate(&scn.clone().with_model(model)).unwrap();
            let ltm = simulate(&scn.clone().with_model(model).with_engine(Engine::Ltm)).unwrap();
            valid &= !spillback_occurred(&lh);
            for (a, b) in lh.links.iter().zip(&ltm.links) {
                for k in 0..a.n_up.len() {
                    worst = worst.max((a.n_up[k] - b.n_up[k]).abs()).max((a.n_down[k] - b.n_down[k]).abs());
                }
            }
        }
    }
    Outcome {
        id: 8,
        name: "link transmission model matches Lax-Hopf",
        pass: valid && worst <= ENGINE_TOL,
        detail: format!("5 scenarios, both models, integral lags and no spillback {valid}, max count difference {worst:.2e}"),
    }
}

fn random_link(rng: &mut StdRng, fd: FundamentalDiagram) -> godunov::SingleLink {
    let length = 100.0 * rng.gen_range(2..=6) as f64;
    let pieces = rng.gen_range(1..=3);
    let segments = (0..pieces)
        .map(|i| (length * i as f64 / pieces as f64, rng.gen_range(0.0..1.0) * fd.jam_density()))
        .collect();
    let c = fd.capacity();
    let rates = |rng: &mut StdRng, lo: f64, hi: f64| -> Vec<f64> { (0..5).map(|_| rng.gen_range(lo..hi) * c).collect() };
    let inflow = StepProfile::from_samples(60.0, &rates(rng, 0.0, 1.1)).unwrap();
    let exit_supply = StepProfile::from_samples(60.0, &rates(rng, 0.25, 1.0)).unwrap();
    godunov::SingleLink {
        fd,
        length,
        segments,
        inflow,
        exit_supply,
        horizon: 300.0,
    }
}

fn link_scenario(link: &godunov::SingleLink) -> NetworkScenario {
    NetworkScenario {
        links: vec![LinkSpec {
            id: "L".into(),
            length: link.length,
            fd: link.fd,
            initial_density: InitialDensity::Segments(link.segments.clone()),
        }],
        junctions: vec![JunctionSpec {
            id: "E".into(),
            kind: JunctionKind::Outlet,
            incoming: vec!["L".into()],
            outgoing: vec![],
            turning: None,
            signal: None,
            phase_order: None,
            capacity: None,
            supply: Some(link.exit_supply.clone()),
        }],
        signals: vec![],
        inflows: vec![InflowSpec {
            link: "L".into(),
            profile: link.inflow.clone(),
        }],
        simulation: SimulationSpec {
            horizon: link.horizon,
            step: 1.0,
            model: SignalModel::OnOff,
            engine: Engine::LaxHopf,
        },
    }
}

/// Largest `|difference| - tolerance` over both cumulative counts.
fn godunov_excess(ours: &LinkSeries, every: usize, reference: &godunov::Counts) -> (f64, f64) {
    let mut excess = f64::NEG_INFINITY;
    let mut worst: f64 = 0.0;
    for (ours, theirs) in [(&ours.n_up, &reference.n_up), (&ours.n_down, &reference.n_down)] {
        for (k, b) in theirs.iter().enumerate() {
            let diff = (ours[k * every] - b).abs();
            excess = excess.max(diff - GODUNOV_ABS.max(GODUNOV_REL * b.abs()));
            worst = worst.max(diff);
        }
    }
    (excess, worst)
}

fn godunov_parity() -> Outcome {
    let mut rng = StdRng::seed_from_u64(20_240_901);
    let mut worst_excess = f64::NEG_INFINITY;
    let mut worst_abs: f64 = 0.0;
    let mut refined = 0;
    for fd in [FundamentalDiagram::reference_triangular(), FundamentalDiagram::reference_greenshields()] {
        for _ in 0..10 {
            let link = random_link(&mut rng, fd);
            let mut scn = link_scenario(&link);
            scn.simulation.step = GODUNOV_LH_STEP;
            let rec = simulate(&scn).unwrap();
            let every = (1.0 / GODUNOV_LH_STEP).round() as usize;
            // Contacts of the triangular diagram smear like sqrt(dx), so a
            // miss on the first grid is rechecked on a finer one.
            let mut result = (f64::INFINITY, 0.0);
            for (n, per_metre) in GODUNOV_CELLS_PER_METRE.iter().enumerate() {
                let reference = godunov::solve(&link, per_metre * link.length as usize, 1.0);
                result = godunov_excess(&rec.links[0], every, &reference);
                if result.0 <= 0.0 {
                    break;
                }
                if n + 1 < GODUNOV_CELLS_PER_METRE.len() {
                    refined += 1;
                }
            }
            worst_excess = worst_excess.max(result.0);
            worst_abs = worst_abs.max(result.1);
        }
    }
    Outcome {
        id: 9,
        name: "Lax-Hopf matches a fine-grid Godunov scheme",
        pass: worst_excess <= 0.0,
        detail: format!(
            "20 random links, {refined} rechecked on the finest grid, max count difference {worst_abs:.4}, worst margin {:.4}",
            -worst_excess
        ),
    }
}

fn milp_parity() -> Outcome {
    let restricted = MilpOptions {
        continuum_split_set: Some(SPLIT_SET.to_vec()),
        ..MilpOptions::default()
    };
    let bb = BbOptions::default();
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, scn) in parity_instances() {
        let mut worst_obj: f64 = 0.0;
        let mut worst_flow: f64 = 0.0;
        for model in [SignalModel::OnOff, SignalModel::Continuum] {
            let solved = optimize(&scn, model, &restricted, &bb).unwrap();
            let oracle = enumerate_oracle(&scn, model, &SPLIT_SET, &restricted).unwrap();
            let (Some(got), Some(want)) = (solved.solution.objective, oracle.objective) else {
                pass = false;
                continue;
            };
            worst_obj = worst_obj.max((got - want).abs());
            let report = replay(&solved.built, solved.x.as_ref().unwrap()).unwrap();
            worst_flow = worst_flow.max(report.max_flow_error);
            pass &= !report.spillback;
        }
        let free = MilpOptions::default();
        let onoff_bin = build_model(&scn, SignalModel::OnOff, &free).unwrap().model.binary_count();
        let cont_bin = build_model(&scn, SignalModel::Continuum, &free).unwrap().model.binary_count();
        let free_opt = optimize(&scn, SignalModel::Continuum, &free, &bb).unwrap().solution.objective.unwrap();
        let restricted_opt = optimize(&scn, SignalModel::Continuum, &restricted, &bb)
            .unwrap()
            .solution
            .objective
            .unwrap();
        pass &= worst_obj <= PARITY_TOL
            && worst_flow <= PARITY_TOL
            && cont_bin < onoff_bin
            && free_opt >= restricted_opt - PARITY_TOL;
        parts.push(format!(
            "{name}: objective diff {worst_obj:.1e}, replay {worst_flow:.1e}, binaries {cont_bin} < {onoff_bin}, continuum {free_opt:.4} ≥ {restricted_opt:.4}"
        ));
    }
    Outcome {
        id: 10,
        name: "split optimization matches enumeration",
        pass,
        detail: parts.join("; "),
    }
}

fn main() {
    let outcomes: Vec<Outcome> = std::thread::scope(|s| {
        let merge = s.spawn(|| {
            let runs = merge_runs();
            vec![no_spillback_bound(&runs), stationarity(&runs)]
        });
        let jumps = s.spawn(|| {
            let run = jump_run();
            vec![jump_table_check(&run), rate_check(&run)]
        });
        let singles = [
            s.spawn(convergence_order),
            s.spawn(resonant_spillback),
            s.spawn(transient_spillback),
            s.spawn(engine_parity),
            s.spawn(godunov_parity),
            s.spawn(milp_parity),
        ];
        let mut all = merge.join().expect("criterion thread");
        all.extend(jumps.join().expect("criterion thread"));
        all.extend(singles.into_iter().map(|h| h.join().expect("criterion thread")));
        all
    });
    let mut outcomes = outcomes;
    outcomes.sort_by_key(|o| o.id);
    for o in &outcomes {
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {:>2} {verdict} {}: {}", o.id, o.name, o.detail);
    }
    let failing: Vec<u8> = outcomes.iter().filter(|o| !o.pass).map(|o| o.id).collect();
    println!("failing: {failing:?}, expected: {EXPECTED_FAILURES:?}");
    if failing != EXPECTED_FAILURES {
        std::process::exit(1);
    }
}
