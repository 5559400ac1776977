use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use signalflow_core::network::{NetworkScenario, SignalModel};
use signalflow_milp::instances::SPLIT_SET;
use signalflow_milp::{enumerate_oracle, import_lp, MilpOptions};

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn run(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_signalflow"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str], out: &Path) {
    let o = run(args, out);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
}

fn read_csv(path: &Path) -> Vec<Vec<String>> {
    let text = std::fs::read_to_string(path).unwrap();
    text.lines().skip(1).map(|l| l.split(',').map(str::to_owned).collect()).collect()
}

fn column(rows: &[Vec<String>], i: usize) -> Vec<f64> {
    rows.iter().map(|r| r[i].parse().unwrap()).collect()
}

/// Writes a copy of a shipped scenario after editing its JSON.
fn edited(name: &str, dir: &Path, edit: impl FnOnce(&mut Value)) -> PathBuf {
    let mut v: Value = serde_json::from_str(&std::fs::read_to_string(scenario(name)).unwrap()).unwrap();
    edit(&mut v);
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_string(&v).unwrap()).unwrap();
    path
}

#[test]
fn empty_scenario_gives_zero_counts() {
    let dir = tempfile::tempdir().unwrap();
    let scn = edited("merge_triangular.json", dir.path(), |v| v["inflows"] = Value::Array(vec![]));
    let out = dir.path().join("out");
    ok(&["simulate", "--scenario", scn.to_str().unwrap(), "--horizon", "120"], &out);
    for link in ["I1", "I2", "I3"] {
        let rows = read_csv(&out.join(format!("{link}.csv")));
        assert_eq!(rows.len(), 121);
        for k in [1, 2] {
            assert!(column(&rows, k).iter().all(|&n| n == 0.0));
        }
    }
}

#[test]
fn shipped_merge_stays_within_twenty_vehicles() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["compare", "--scenario", scenario("merge_triangular.json").to_str().unwrap()], dir.path());
    let rows = read_csv(&dir.path().join("compare.csv"));
    assert_eq!(rows.len(), 2);
    for gap in column(&rows, 1) {
        assert!(gap > 0.0 && gap <= 20.0, "gap {gap}");
    }
}

#[test]
fn engines_agree_on_triangular_merge() {
    let dir = tempfile::tempdir().unwrap();
    let path = scenario("merge_triangular.json");
    let (a, b) = (dir.path().join("lh"), dir.path().join("ltm"));
    ok(&["simulate", "--scenario", path.to_str().unwrap()], &a);
    ok(&["simulate", "--scenario", path.to_str().unwrap(), "--engine", "ltm"], &b);
    for link in ["I1", "I2", "I3"] {
        let x = read_csv(&a.join(format!("{link}.csv")));
        let y = read_csv(&b.join(format!("{link}.csv")));
        for k in [1, 2] {
            for (p, q) in column(&x, k).iter().zip(column(&y, k)) {
                assert!((p - q).abs() <= 1.0, "{link}: {p} vs {q}");
            }
        }
    }
}

#[test]
fn single_cycle_convergence_has_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let path = scenario("merge_triangular.json");
    ok(&["convergence", "--scenario", path.to_str().unwrap(), "--cycles", "60"], dir.path());
    assert_eq!(read_csv(&dir.path().join("convergence.csv")).len(), 1);
}

#[test]
fn jump_grid_reports_measured_and_bound() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["jumps"], dir.path());
    let text = std::fs::read_to_string(dir.path().join("jumps.csv")).unwrap();
    let header = text.lines().next().unwrap();
    assert!(header.contains("measured") && header.contains("bound"));
    assert_eq!(text.lines().count(), 5);
}

#[test]
fn transient_gap_does_not_shrink() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["transient", "--cycles", "60,30"], dir.path());
    let summary: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("transient.json")).unwrap()).unwrap();
    assert_eq!(summary["non_shrinking"], Value::Bool(true));
    assert_eq!(summary["rows"].as_array().unwrap().len(), 2);
}

#[test]
fn zero_demand_optimum_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let scn = edited("milp_tiny_merge.json", dir.path(), |v| {
        for inflow in v["inflows"].as_array_mut().unwrap() {
            inflow["profile"][0]["rate"] = Value::from(0.0);
        }
    });
    let out = dir.path().join("out");
    ok(&["optimize", "--scenario", scn.to_str().unwrap()], &out);
    let sol: Value = serde_json::from_str(&std::fs::read_to_string(out.join("solution.json")).unwrap()).unwrap();
    assert_eq!(sol["objective"].as_f64(), Some(0.0));
}

#[test]
fn tiny_merge_solution_matches_enumeration() {
    let path = scenario("milp_tiny_merge.json");
    let scn = NetworkScenario::from_path(&path).unwrap();
    for (flag, model) in [("onoff", SignalModel::OnOff), ("continuum", SignalModel::Continuum)] {
        let dir = tempfile::tempdir().unwrap();
        let split_set = "0.3333333333333333,0.5,0.6666666666666666";
        ok(
            &["optimize", "--scenario", path.to_str().unwrap(), "--model", flag, "--split-set", split_set],
            dir.path(),
        );
        let sol: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("solution.json")).unwrap()).unwrap();
        let opts = MilpOptions {
            continuum_split_set: Some(SPLIT_SET.to_vec()),
            ..MilpOptions::default()
        };
        let oracle = enumerate_oracle(&scn, model, &SPLIT_SET, &opts).unwrap();
        let got = sol["objective"].as_f64().unwrap();
        assert!((got - oracle.objective.unwrap()).abs() <= 1e-6, "{flag}: {got} vs {:?}", oracle.objective);
    }
}

#[test]
fn exported_models_parse_back() {
    for model in ["onoff", "continuum"] {
        let dir = tempfile::tempdir().unwrap();
        let path = scenario("network_test.json");
        ok(&["export-lp", "--scenario", path.to_str().unwrap(), "--model", model], dir.path());
        let lp = dir.path().join(format!("model_{model}.lp"));
        let text = std::fs::read_to_string(&lp).unwrap();
        assert!(!text.contains('\r'));
        assert!(import_lp(&lp).unwrap().binary_count() > 0);
    }
}

#[test]
fn identical_runs_write_identical_files() {
    let path = scenario("milp_tiny_merge.json");
    let mut outputs = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().unwrap();
        ok(&["optimize", "--scenario", path.to_str().unwrap(), "--seed", "7"], dir.path());
        ok(&["simulate", "--scenario", path.to_str().unwrap(), "--seed", "7"], dir.path());
        let read = |f: &str| std::fs::read(dir.path().join(f)).unwrap();
        outputs.push((read("solution.json"), read("I3.csv")));
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn failed_assertions_set_the_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let path = scenario("milp_tiny_merge.json");
    let o = run(&["optimize", "--scenario", path.to_str().unwrap(), "--max-nodes", "0"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let failures: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("failures.json")).unwrap()).unwrap();
    assert_eq!(failures[0]["check"], "solved_to_optimality");
}

#[test]
fn schema_errors_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let scn = edited("merge_triangular.json", dir.path(), |v| v["links"][1]["length"] = Value::from("long"));
    let o = run(&["simulate", "--scenario", scn.to_str().unwrap()], &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("links[1].length"), "{err}");
}
