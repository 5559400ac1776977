//! Program solutions against exhaustive simulation.

use signalflow_core::network::SignalModel;
use signalflow_milp::build::{build_model, scenario_with_splits};
use signalflow_milp::instances::{parity_instances, tiny_merge, SPLIT_SET};
use signalflow_milp::{
    enumerate_oracle, evaluate_splits, optimize, parse_lp, replay, solve_bb, to_lp_string, BbOptions, BbStatus,
    MilpError, MilpOptions, SolveStatus,
};

const TOL: f64 = 1e-6;

fn restricted() -> MilpOptions {
    MilpOptions {
        continuum_split_set: Some(SPLIT_SET.to_vec()),
        ..MilpOptions::default()
    }
}

#[test]
fn branch_and_bound_matches_the_oracle() {
    for (name, scn) in parity_instances() {
        for model in [SignalModel::OnOff, SignalModel::Continuum] {
            let opts = restricted();
            let opt = optimize(&scn, model, &opts, &BbOptions::default()).unwrap();
            assert_eq!(opt.solution.status, SolveStatus::Optimal, "{name} {model:?}");
            let oracle = enumerate_oracle(&scn, model, &SPLIT_SET, &opts).unwrap();
            let (a, b) = (opt.solution.objective.unwrap(), oracle.objective.unwrap());
            assert!((a - b).abs() <= TOL, "{name} {model:?}: program {a} vs oracle {b}");

            let rep = replay(&opt.built, opt.x.as_ref().unwrap()).unwrap();
            assert!(rep.max_flow_error <= TOL, "{name} {model:?}: replay error {}", rep.max_flow_error);
            assert!(!rep.spillback, "{name} {model:?}");
            assert!((rep.simulated_objective - a).abs() <= TOL);
        }
    }
}

#[test]
fn continuum_freedom_never_hurts() {
    for (name, scn) in parity_instances() {
        let free = optimize(&scn, SignalModel::Continuum, &MilpOptions::default(), &BbOptions::default()).unwrap();
        let fixed = optimize(&scn, SignalModel::Continuum, &restricted(), &BbOptions::default()).unwrap();
        let onoff = build_model(&scn, SignalModel::OnOff, &MilpOptions::default()).unwrap();
        assert!(free.solution.objective.unwrap() >= fixed.solution.objective.unwrap() - TOL, "{name}");
        assert!(free.solution.binaries < onoff.model.binary_count(), "{name}");
    }
}

#[test]
fn every_feasible_point_replays_exactly() {
    // fix the split, solve the rest, replay
    let scn = tiny_merge(0.6, 0.5, 120.0);
    for model in [SignalModel::OnOff, SignalModel::Continuum] {
        let built = build_model(&scn, model, &restricted()).unwrap();
        let d = &built.decisions[0];
        for (c, &y) in d.selectors.iter().enumerate() {
            let mut m = built.model.clone();
            for &other in &d.selectors {
                let v = if other == y { 1.0 } else { 0.0 };
                m.set_bounds(other, v, v);
            }
            let r = solve_bb(&m);
            if model == SignalModel::OnOff || r.status == BbStatus::Optimal {
                assert_eq!(r.status, BbStatus::Optimal, "{model:?} candidate {c}");
                let rep = replay(&built, &r.x).unwrap();
                assert!(rep.max_flow_error <= TOL, "{model:?} candidate {c}: {}", rep.max_flow_error);
                assert!(!rep.spillback);
            }
        }
    }
}

#[test]
fn zero_demand_scores_zero() {
    let scn = tiny_merge(0.0, 0.0, 120.0);
    for model in [SignalModel::OnOff, SignalModel::Continuum] {
        let opt = optimize(&scn, model, &MilpOptions::default(), &BbOptions::default()).unwrap();
        assert!(opt.solution.objective.unwrap().abs() < 1e-12);
    }
}

#[test]
fn oracle_counts_ties_and_limits() {
    let scn = tiny_merge(0.5, 0.5, 120.0);
    let sol = enumerate_oracle(&scn, SignalModel::Continuum, &SPLIT_SET, &MilpOptions::default()).unwrap();
    assert_eq!(sol.nodes, 3);
    // the merge is symmetric in throughput here: the smallest split wins ties
    let scores: Vec<f64> = SPLIT_SET
        .iter()
        .map(|&s| {
            evaluate_splits(&scn, SignalModel::Continuum, &[vec![s]])
                .unwrap()
                .unwrap()
                .objective
        })
        .collect();
    let best = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let first = scores.iter().position(|&s| s >= best - 1e-9).unwrap();
    assert_eq!(sol.first_phase_shares(), vec![vec![SPLIT_SET[first]]]);

    let long = tiny_merge(0.5, 0.5, 1200.0);
    let opts = MilpOptions {
        decision_interval: Some(60.0),
        ..MilpOptions::default()
    };
    assert!(matches!(
        enumerate_oracle(&long, SignalModel::Continuum, &SPLIT_SET, &opts),
        Err(MilpError::Refused(_))
    ));
}

#[test]
fn larger_split_sets_never_score_lower() {
    for (name, scn) in parity_instances() {
        let small = enumerate_oracle(&scn, SignalModel::Continuum, &SPLIT_SET[..1], &MilpOptions::default()).unwrap();
        let large = enumerate_oracle(&scn, SignalModel::Continuum, &SPLIT_SET, &MilpOptions::default()).unwrap();
        let small = small.objective.unwrap_or(f64::NEG_INFINITY);
        assert!(large.objective.unwrap() >= small - 1e-12, "{name}");
    }
}

#[test]
fn built_models_round_trip_through_lp_files() {
    let scn = tiny_merge(0.6, 0.5, 120.0);
    let built = build_model(&scn, SignalModel::OnOff, &MilpOptions::default()).unwrap();
    let text = to_lp_string(&built.model);
    let back = parse_lp(&text).unwrap();
    assert_eq!(back.variables.len(), built.model.variables.len());
    assert_eq!(back.constraints.len(), built.model.constraints.len());
    assert_eq!(back.binary_count(), built.model.binary_count());
    let a = solve_bb(&back);
    let b = solve_bb(&built.model);
    assert_eq!(a.objective, b.objective);
}

#[test]
fn solutions_are_deterministic() {
    let scn = tiny_merge(0.6, 0.5, 120.0);
    let a = optimize(&scn, SignalModel::Continuum, &MilpOptions::default(), &BbOptions::default()).unwrap();
    let b = optimize(&scn, SignalModel::Continuum, &MilpOptions::default(), &BbOptions::default()).unwrap();
    assert_eq!(a.solution.to_json(), b.solution.to_json());
    assert_eq!(a.x, b.x);
}

#[test]
fn multi_interval_plans_replay() {
    let scn = tiny_merge(0.6, 0.5, 240.0);
    let opts = MilpOptions {
        decision_interval: Some(120.0),
        ..MilpOptions::default()
    };
    let opt = optimize(&scn, SignalModel::OnOff, &opts, &BbOptions::default()).unwrap();
    assert_eq!(opt.built.decisions.len(), 2);
    let rep = replay(&opt.built, opt.x.as_ref().unwrap()).unwrap();
    assert!(rep.max_flow_error <= TOL);
    let oracle = enumerate_oracle(&scn, SignalModel::OnOff, &SPLIT_SET, &opts).unwrap();
    assert!((oracle.objective.unwrap() - opt.solution.objective.unwrap()).abs() <= TOL);
    let shares = opt.solution.first_phase_shares();
    let direct = scenario_with_splits(&opt.built.scenario, &shares).unwrap();
    assert_eq!(direct.signals[0].plan.len(), 2);
}
