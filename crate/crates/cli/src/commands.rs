use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use anyhow::{bail, Context, Result};
use log::info;
use serde::Serialize;
use signalflow_core::analysis::{
    approach_bound, convergence_study, is_strictly_concave, jump_table, run_both, spillback_occurred, sup_gap,
    transient_spillback_demo, write_long_series, write_rows, BoundKind,
};
use signalflow_core::network::{simulate, NetworkScenario, SignalModel};
use signalflow_core::FundamentalDiagram;
use signalflow_milp::{build_model, export_lp, import_lp, optimize, BbOptions, MilpOptions, SolveStatus};

use crate::{Command, Failure, MilpArgs, RunConfig};

/// Cases measured by `jumps` when no grid is given: `(length, cycle)`.
const JUMP_GRID: [(f64, f64); 4] = [(400.0, 60.0), (800.0, 60.0), (1600.0, 60.0), (1600.0, 30.0)];

/// Relative change of the model gap under cycle halving below which the
/// transient gap counts as not shrinking.
const NON_SHRINKING_TOL: f64 = 0.1;

pub fn run(cmd: &Command, cfg: &RunConfig) -> Result<Vec<Failure>> {
    std::fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;
    let manifest = serde_json::to_string_pretty(cfg)?;
    std::fs::write(cfg.out.join("run.json"), manifest + "\n")?;
    match cmd {
        Command::Simulate => cmd_simulate(cfg),
        Command::Compare { link } => cmd_compare(cfg, link.as_deref()),
        Command::Convergence { link } => cmd_convergence(cfg, link.as_deref()),
        Command::Jumps { lengths } => cmd_jumps(cfg, lengths.as_deref()),
        Command::Transient { exit_capacity } => cmd_transient(cfg, *exit_capacity),
        Command::Optimize(args) => cmd_optimize(cfg, args),
        Command::ExportLp(args) => cmd_export_lp(cfg, args),
    }
}

fn fail(check: impl Into<String>, detail: impl Into<String>) -> Failure {
    Failure {
        check: check.into(),
        detail: detail.into(),
    }
}

fn csv_file(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    Ok(BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?))
}

/// Loads the scenario and applies the overrides. A single `--cycles` value
/// overrides every signal's cycle.
fn load(cfg: &RunConfig) -> Result<NetworkScenario> {
    let path = cfg.scenario.as_ref().context("--scenario is required")?;
    let mut scn = NetworkScenario::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    if let Some(m) = cfg.model {
        scn = scn.with_model(m.into());
    }
    if let Some(e) = cfg.engine {
        scn = scn.with_engine(e.into());
    }
    if let Some(h) = cfg.horizon {
        scn = scn.with_horizon(h);
    }
    if let Some(s) = cfg.step {
        scn = scn.with_step(s);
    }
    let cycle = match cfg.cycles.as_deref() {
        Some([c]) => Some(*c),
        _ => None,
    };
    scn = scn.with_signal_overrides(cycle, cfg.eta, cfg.offset);
    scn.resolve()?;
    Ok(scn)
}

/// Incoming links of signalized junctions, in junction order.
fn signalized_approaches(scn: &NetworkScenario) -> Vec<String> {
    scn.junctions
        .iter()
        .filter(|j| j.signal.is_some())
        .flat_map(|j| j.incoming.iter().cloned())
        .collect()
}

fn cmd_simulate(cfg: &RunConfig) -> Result<Vec<Failure>> {
    let scn = load(cfg)?;
    let rec = simulate(&scn)?;
    rec.write_csv_dir(&cfg.out)?;
    info!("wrote {} link series to {}", rec.links.len(), cfg.out.display());
    Ok(Vec::new())
}

#[derive(Serialize)]
struct CompareRow<'a> {
    link: &'a str,
    gap: f64,
    bound: f64,
    bound_kind: BoundKind,
    spillback: bool,
    pass: bool,
}

fn cmd_compare(cfg: &RunConfig, only: Option<&str>) -> Result<Vec<Failure>> {
    let scn = load(cfg)?;
    let links: Vec<String> = match only {
        Some(l) => vec![l.to_string()],
        None => signalized_approaches(&scn),
    };
    let (onoff, cont) = run_both(&scn)?;
    let spillback = spillback_occurred(&onoff) || spillback_occurred(&cont);
    let mut reports = Vec::new();
    for link in &links {
        let (bound, kind) = if spillback {
            (f64::NAN, BoundKind::None)
        } else {
            (approach_bound(&scn, link)?.value, BoundKind::NoSpillback)
        };
        reports.push(sup_gap(&onoff, &cont, link, bound, kind)?);
    }
    let rows: Vec<CompareRow> = reports
        .iter()
        .map(|r| CompareRow {
            link: &r.link,
            gap: r.gap,
            bound: r.bound,
            bound_kind: r.bound_kind,
            spillback,
            pass: r.pass,
        })
        .collect();
    write_rows(&rows, csv_file(&cfg.out, "compare.csv")?)?;
    let series: Vec<(&str, &[(f64, f64)])> = reports.iter().map(|r| (r.link.as_str(), r.series.as_slice())).collect();
    write_long_series(&series, csv_file(&cfg.out, "compare_series.csv")?)?;
    Ok(reports
        .iter()
        .filter(|r| !r.pass)
        .map(|r| fail("gap_within_bound", format!("{}: gap {} > bound {}", r.link, r.gap, r.bound)))
        .collect())
}

fn cmd_convergence(cfg: &RunConfig, link: Option<&str>) -> Result<Vec<Failure>> {
    let scn = load(cfg)?;
    let link = match link {
        Some(l) => l.to_string(),
        None => signalized_approaches(&scn)
            .into_iter()
            .next()
            .context("scenario has no signalized approach")?,
    };
    let cycles = cfg.cycles.clone().unwrap_or_else(|| vec![60.0, 30.0, 15.0]);
    let rows = convergence_study(&scn, &link, &cycles)?;
    write_rows(&rows, csv_file(&cfg.out, "convergence.csv")?)?;
    Ok(rows
        .iter()
        .filter(|r| !r.spillback && r.gap > r.bound + 1e-9)
        .map(|r| fail("gap_within_bound", format!("cycle {}: gap {} > bound {}", r.cycle, r.gap, r.bound)))
        .collect())
}

fn first_fd(cfg: &RunConfig, default: FundamentalDiagram) -> Result<FundamentalDiagram> {
    match &cfg.scenario {
        Some(_) => Ok(load(cfg)?.links.first().context("scenario has no links")?.fd),
        None => Ok(default),
    }
}

fn round3(x: f64) -> f64 {
    (x * 1000.0).round() / 1000.0
}

fn cmd_jumps(cfg: &RunConfig, lengths: Option<&[f64]>) -> Result<Vec<Failure>> {
    let fd = first_fd(cfg, FundamentalDiagram::reference_greenshields())?;
    if !is_strictly_concave(&fd) {
        bail!("jump bounds need a strictly concave fundamental diagram");
    }
    let cases: Vec<(f64, f64)> = match (lengths, cfg.cycles.as_deref()) {
        (None, None) => JUMP_GRID.to_vec(),
        (l, c) => {
            let l = l.unwrap_or(&[400.0]);
            let c = c.unwrap_or(&[60.0]);
            l.iter().flat_map(|&len| c.iter().map(move |&cy| (len, cy))).collect()
        }
    };
    let rows = jump_table(&fd, &cases)?;
    write_rows(&rows, csv_file(&cfg.out, "jumps.csv")?)?;
    let mut failures = Vec::new();
    for r in &rows {
        if r.measured > round3(r.bound) + 1e-9 {
            failures.push(fail(
                "jump_within_bound",
                format!("L={} cycle={}: jump {} > {}", r.length, r.cycle, r.measured, round3(r.bound)),
            ));
        }
    }
    Ok(failures)
}

#[derive(Serialize)]
struct TransientRow {
    cycle: f64,
    model_gap: f64,
    supply_high: f64,
    supply_low: f64,
    onoff_exit_difference: f64,
    continuum_exit_difference: f64,
}

#[derive(Serialize)]
struct TransientSummary {
    rows: Vec<TransientRow>,
    /// Relative change of the model gap between the longest and shortest
    /// cycle.
    gap_change: Option<f64>,
    non_shrinking: Option<bool>,
}

fn cmd_transient(cfg: &RunConfig, exit_capacity: f64) -> Result<Vec<Failure>> {
    let fd = first_fd(cfg, FundamentalDiagram::reference_greenshields())?;
    let cycles = cfg.cycles.clone().unwrap_or_else(|| vec![60.0, 30.0]);
    let horizon = cfg.horizon.unwrap_or(1500.0);
    let step = cfg.step.unwrap_or(1.0);
    let mut rows = Vec::new();
    for &cycle in &cycles {
        let r = transient_spillback_demo(fd, cycle, exit_capacity, horizon, step)?;
        let supply: Vec<(f64, f64)> = r.supply.iter().enumerate().map(|(k, &s)| (k as f64 * step, s)).collect();
        write_long_series(
            &[
                ("onoff_exit_difference", &r.onoff_exit_difference),
                ("continuum_exit_difference", &r.continuum_exit_difference),
                ("supply", &supply),
            ],
            csv_file(&cfg.out, &format!("transient_{cycle}.csv"))?,
        )?;
        let last = |s: &[(f64, f64)]| s.last().map_or(0.0, |p| p.1);
        rows.push(TransientRow {
            cycle,
            model_gap: r.model_gap,
            supply_high: r.supply_high,
            supply_low: r.supply_low,
            onoff_exit_difference: last(&r.onoff_exit_difference),
            continuum_exit_difference: last(&r.continuum_exit_difference),
        });
    }
    write_rows(&rows, csv_file(&cfg.out, "transient.csv")?)?;
    let longest = rows.iter().max_by(|a, b| a.cycle.total_cmp(&b.cycle));
    let shortest = rows.iter().min_by(|a, b| a.cycle.total_cmp(&b.cycle));
    let gap_change = match (longest, shortest) {
        (Some(l), Some(s)) if l.cycle > s.cycle => Some((s.model_gap - l.model_gap).abs() / l.model_gap.max(1e-12)),
        _ => None,
    };
    let non_shrinking = gap_change.map(|c| c < NON_SHRINKING_TOL);
    let summary = TransientSummary {
        rows,
        gap_change,
        non_shrinking,
    };
    std::fs::write(cfg.out.join("transient.json"), serde_json::to_string_pretty(&summary)? + "\n")?;
    let mut failures = Vec::new();
    if non_shrinking == Some(false) {
        failures.push(fail(
            "transient_gap_non_shrinking",
            format!("model gap changed by {:.3} under cycle refinement", gap_change.unwrap_or(0.0)),
        ));
    }
    Ok(failures)
}

fn milp_setup(cfg: &RunConfig, args: &MilpArgs) -> Result<(NetworkScenario, SignalModel, MilpOptions)> {
    let scn = load(cfg)?;
    let model = cfg.model.map_or(SignalModel::OnOff, Into::into);
    let opts = MilpOptions {
        no_spillback: !args.allow_spillback,
        continuum_split_set: args.split_set.clone(),
        decision_interval: args.decision_interval,
        ..MilpOptions::default()
    };
    Ok((scn, model, opts))
}

fn cmd_optimize(cfg: &RunConfig, args: &MilpArgs) -> Result<Vec<Failure>> {
    let (scn, model, opts) = milp_setup(cfg, args)?;
    let bb = BbOptions {
        max_nodes: args.max_nodes,
        ..BbOptions::default()
    };
    let result = optimize(&scn, model, &opts, &bb)?;
    let sol = &result.solution;
    std::fs::write(cfg.out.join("solution.json"), sol.to_json() + "\n")?;
    info!("status {:?} objective {:?} nodes {}", sol.status, sol.objective, sol.nodes);
    Ok(match sol.status {
        SolveStatus::Optimal => Vec::new(),
        other => vec![fail("solved_to_optimality", format!("status {other:?}"))],
    })
}

fn cmd_export_lp(cfg: &RunConfig, args: &MilpArgs) -> Result<Vec<Failure>> {
    let (scn, model, opts) = milp_setup(cfg, args)?;
    let built = build_model(&scn, model, &opts)?;
    let path = cfg.out.join(format!("model_{}.lp", model.name()));
    export_lp(&built.model, &path)?;
    let back = import_lp(&path)?;
    let counts = |m: &signalflow_milp::MilpModel| (m.variables.len(), m.constraints.len(), m.binary_count());
    if counts(&back) != counts(&built.model) {
        return Ok(vec![fail(
            "lp_round_trip",
            format!("counts {:?} after re-reading, {:?} before", counts(&back), counts(&built.model)),
        )]);
    }
    Ok(Vec::new())
}
