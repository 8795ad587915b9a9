//! CSV and JSON reports for solves and sweeps.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::builder::BuildStats;
use crate::error::{CoreError, Result};
use crate::instance::MicrogridInstance;
use crate::pipeline::{Outcome, Prepared};
use crate::schedule::Schedule;
use crate::sweep::{compute_incentives, SweepResult};
use crate::validator::utility_power;

/// One row per (s, t, k) for each requested scenario.
/// Columns: microgrid net load, reconstructed feeder net load, curtailment,
/// then SoC per storage and commitment plus output per unit.
pub fn schedule_table_csv(inst: &MicrogridInstance, schedule: &Schedule, scenarios: &[usize]) -> Result<String> {
    let k = schedule.subperiods;
    let mut out = String::from("s,t,k,pm_mw,feeder_net_load_mw,curtailment_mw");
    for st in &schedule.storages {
        let _ = write!(out, ",soc_{}_mwh", st.id);
    }
    for u in &schedule.units {
        let _ = write!(out, ",on_{0},p_{0}_mw", u.id);
    }
    out.push('\n');
    for &s in scenarios {
        if s >= schedule.scenarios() {
            return Err(CoreError::InvalidArgument(format!(
                "scenario {s} out of range (schedule has {})",
                schedule.scenarios()
            )));
        }
        let feeder = utility_power(inst, schedule, s);
        for p in 0..schedule.periods * k {
            let (t, kk) = (p / k + 1, p % k + 1);
            let _ = write!(
                out,
                "{s},{t},{kk},{},{},{}",
                schedule.exchange[s][p], feeder[p], schedule.curtailment[s][p]
            );
            for st in &schedule.storages {
                let _ = write!(out, ",{}", st.energy[s][p]);
            }
            for u in &schedule.units {
                let _ = write!(out, ",{},{}", u8::from(u.commitment[t - 1]), u.power[s][p]);
            }
            out.push('\n');
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveSummary<'a> {
    pub case: &'a str,
    pub model: BuildStats,
    pub status: mgflex_milp::SolveStatus,
    pub objective: Option<f64>,
    pub best_bound: f64,
    pub root_bound: Option<f64>,
    pub gap: Option<f64>,
    /// Integer objective minus root relaxation objective.
    pub lp_margin: Option<f64>,
    pub nodes: usize,
    pub lp_solves: usize,
    pub wall_time_s: f64,
    pub validated: bool,
    pub max_residual: Option<f64>,
    pub cost: Option<crate::schedule::CostBreakdown>,
    pub message: Option<&'a str>,
}

pub fn solve_summary<'a>(prep: &'a Prepared, out: &'a Outcome) -> SolveSummary<'a> {
    let r = &out.result;
    SolveSummary {
        case: &prep.instance.name,
        model: prep.stats(),
        status: r.status,
        objective: r.objective,
        best_bound: r.best_bound,
        root_bound: r.root_bound,
        gap: r.gap(),
        lp_margin: r.objective.zip(r.root_bound).map(|(o, b)| o - b),
        nodes: r.nodes,
        lp_solves: r.lp_solves,
        wall_time_s: r.wall_time.as_secs_f64(),
        validated: out.validated(),
        max_residual: out.report.as_ref().map(|rep| rep.max_residual),
        cost: out.schedule.as_ref().map(|s| s.cost),
        message: r.message.as_deref(),
    }
}

fn write(dir: &Path, name: &str, contents: &str, written: &mut Vec<PathBuf>) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| CoreError::io(&path, e))?;
    written.push(path);
    Ok(())
}

fn json<T: Serialize>(v: &T) -> Result<String> {
    serde_json::to_string_pretty(v).map_err(|e| CoreError::Internal(e.to_string()))
}

/// Writes `schedule.json`, `schedule.csv`, `summary.json` and the
/// solve log (`solve_log.jsonl`). Returns the paths written.
pub fn emit_solve_reports(dir: &Path, prep: &Prepared, out: &Outcome, scenarios: &[usize]) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| CoreError::io(dir, e))?;
    let mut written = Vec::new();
    if let Some(schedule) = &out.schedule {
        write(dir, "schedule.json", &json(schedule)?, &mut written)?;
        write(
            dir,
            "schedule.csv",
            &schedule_table_csv(&prep.instance, schedule, scenarios)?,
            &mut written,
        )?;
    }
    if let Some(report) = &out.report {
        write(dir, "violations.json", &json(report)?, &mut written)?;
    }
    write(dir, "summary.json", &json(&solve_summary(prep, out))?, &mut written)?;
    let mut log = String::new();
    for line in &out.result.log {
        log.push_str(&serde_json::to_string(line).map_err(|e| CoreError::Internal(e.to_string()))?);
        log.push('\n');
    }
    write(dir, "solve_log.jsonl", &log, &mut written)?;
    Ok(written)
}

/// Writes `sweep_table.csv`, `sweep_cells.csv`, `sweep.json` and, when a
/// baseline was solved, `incentives.csv`.
pub fn emit_sweep_reports(dir: &Path, sweep: &SweepResult) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| CoreError::io(dir, e))?;
    let mut written = Vec::new();
    write(dir, "sweep_table.csv", &sweep.to_table_csv(), &mut written)?;
    write(dir, "sweep_cells.csv", &sweep.to_cells_csv()?, &mut written)?;
    write(dir, "sweep.json", &json(sweep)?, &mut written)?;
    if sweep.baseline.as_ref().is_some_and(|b| b.objective.is_some()) {
        let inc = compute_incentives(sweep)?;
        write(dir, "incentives.csv", &inc.to_table_csv(), &mut written)?;
    }
    Ok(written)
}
