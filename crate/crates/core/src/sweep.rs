//! (Δ1, Δ2) sweeps and flexibility incentives.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use mgflex_milp::{SolveOptions, SolveStatus};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::instance::{FlexibilitySpec, ValidatedInstance};
use crate::pipeline::{prepare, solve_prepared, Outcome, Prepared};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CellStatus {
    Optimal,
    /// Stopped on a limit with a validated incumbent.
    LimitReached,
    /// Stopped on a limit without any incumbent.
    NoSolution,
    Infeasible,
    /// The returned schedule failed the independent check.
    Rejected,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    /// `None` for the baseline.
    pub delta1: Option<f64>,
    pub delta2: Option<f64>,
    pub status: CellStatus,
    /// Present only for validated schedules.
    pub objective: Option<f64>,
    pub best_bound: Option<f64>,
    pub gap: Option<f64>,
    /// Probability-weighted curtailed energy over all scenarios.
    pub curtailed_mwh: Option<f64>,
    pub wall_time_s: f64,
    pub message: Option<String>,
}

impl SweepCell {
    fn from_outcome(delta1: Option<f64>, delta2: Option<f64>, out: &Outcome, psi: &[f64]) -> Self {
        let r = &out.result;
        let validated = out.validated();
        let status = match r.status {
            _ if out.schedule.is_some() && !validated => CellStatus::Rejected,
            SolveStatus::OptimalWithinGap => CellStatus::Optimal,
            SolveStatus::LimitReached if out.schedule.is_some() => CellStatus::LimitReached,
            SolveStatus::LimitReached => CellStatus::NoSolution,
            SolveStatus::Infeasible => CellStatus::Infeasible,
            SolveStatus::Unbounded | SolveStatus::NumericalFailure => CellStatus::Failed,
        };
        let curtailed = out.schedule.as_ref().filter(|_| validated).map(|s| {
            psi.iter()
                .enumerate()
                .map(|(i, p)| p * s.curtailed_energy(i))
                .sum()
        });
        let message = match status {
            CellStatus::Rejected => out.report.as_ref().map(|rep| rep.summary()),
            _ => r.message.clone(),
        };
        Self {
            delta1,
            delta2,
            status,
            objective: r.objective.filter(|_| validated),
            best_bound: r.best_bound.is_finite().then_some(r.best_bound),
            gap: r.gap().filter(|_| validated),
            curtailed_mwh: curtailed,
            wall_time_s: r.wall_time.as_secs_f64(),
            message,
        }
    }

    fn failed(delta1: Option<f64>, delta2: Option<f64>, message: String, wall: f64) -> Self {
        Self {
            delta1,
            delta2,
            status: CellStatus::Failed,
            objective: None,
            best_bound: None,
            gap: None,
            curtailed_mwh: None,
            wall_time_s: wall,
            message: Some(message),
        }
    }
}

/// Rows follow `delta2`, columns follow `delta1`; `cells` is row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub name: String,
    pub delta1: Vec<f64>,
    pub delta2: Vec<f64>,
    pub cells: Vec<SweepCell>,
    pub baseline: Option<SweepCell>,
    /// Relative gap the cells were solved to; 0 for ingested tables.
    pub rel_gap: f64,
}

impl SweepResult {
    pub fn cell(&self, row: usize, col: usize) -> &SweepCell {
        &self.cells[row * self.delta1.len() + col]
    }

    pub fn objective(&self, row: usize, col: usize) -> Option<f64> {
        self.cell(row, col).objective
    }

    /// Wide layout: one row per Δ2, one column per Δ1, then a `baseline` row.
    pub fn to_table_csv(&self) -> String {
        let mut out = String::from("delta2/delta1");
        for d1 in &self.delta1 {
            let _ = write!(out, ",{d1}");
        }
        out.push('\n');
        for (i, d2) in self.delta2.iter().enumerate() {
            let _ = write!(out, "{d2}");
            for j in 0..self.delta1.len() {
                out.push(',');
                if let Some(o) = self.objective(i, j) {
                    let _ = write!(out, "{o}");
                }
            }
            out.push('\n');
        }
        if let Some(b) = &self.baseline {
            out.push_str("baseline,");
            if let Some(o) = b.objective {
                let _ = write!(out, "{o}");
            }
            out.push('\n');
        }
        out
    }

    /// Long layout with every cell field, baseline first.
    pub fn to_cells_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut write = |c: &SweepCell| {
            w.serialize(CellRecord::from(c))
                .map_err(|e| CoreError::Internal(e.to_string()))
        };
        if let Some(b) = &self.baseline {
            write(b)?;
        }
        for c in &self.cells {
            write(c)?;
        }
        let bytes = w.into_inner().map_err(|e| CoreError::Internal(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| CoreError::Internal(e.to_string()))
    }
}

#[derive(Serialize)]
struct CellRecord<'a> {
    delta1: Option<f64>,
    delta2: Option<f64>,
    status: CellStatus,
    objective: Option<f64>,
    best_bound: Option<f64>,
    gap: Option<f64>,
    curtailed_mwh: Option<f64>,
    wall_time_s: f64,
    message: Option<&'a str>,
}

impl<'a> From<&'a SweepCell> for CellRecord<'a> {
    fn from(c: &'a SweepCell) -> Self {
        Self {
            delta1: c.delta1,
            delta2: c.delta2,
            status: c.status,
            objective: c.objective,
            best_bound: c.best_bound,
            gap: c.gap,
            curtailed_mwh: c.curtailed_mwh,
            wall_time_s: c.wall_time_s,
            message: c.message.as_deref(),
        }
    }
}

fn check_list(name: &str, v: &[f64]) -> Result<()> {
    if v.is_empty() {
        return Err(CoreError::InvalidArgument(format!("{name} list is empty")));
    }
    if let Some(x) = v.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
        return Err(CoreError::InvalidArgument(format!("{name} value {x} must be finite and >= 0")));
    }
    Ok(())
}

fn solve_cell<F>(
    inst: &ValidatedInstance,
    flex: FlexibilitySpec,
    delta1: Option<f64>,
    delta2: Option<f64>,
    opts: &SolveOptions,
    inspect: &F,
) -> SweepCell
where
    F: Fn(&SweepCell, &Prepared, &Outcome) + Sync,
{
    let start = Instant::now();
    let run = || -> Result<SweepCell> {
        let cell_inst = inst.with_flex(flex)?;
        let prep = prepare(&cell_inst)?;
        let out = solve_prepared(&prep, opts)?;
        let psi: Vec<f64> = (0..prep.scenarios.len()).map(|s| prep.scenarios.psi(s)).collect();
        let cell = SweepCell::from_outcome(delta1, delta2, &out, &psi);
        inspect(&cell, &prep, &out);
        Ok(cell)
    };
    run().unwrap_or_else(|e| SweepCell::failed(delta1, delta2, e.to_string(), start.elapsed().as_secs_f64()))
}

/// One solve per (Δ2, Δ1) cell plus a baseline without flexibility rows.
/// Cells are independent; a failing cell is recorded and the sweep goes on.
pub fn run_sweep(
    inst: &ValidatedInstance,
    delta1: &[f64],
    delta2: &[f64],
    opts: &SolveOptions,
) -> Result<SweepResult> {
    run_sweep_with(inst, delta1, delta2, opts, |_, _, _| {})
}

/// [`run_sweep`] that also hands every solved cell (baseline included) to
/// `inspect` before its model is dropped.
pub fn run_sweep_with<F>(
    inst: &ValidatedInstance,
    delta1: &[f64],
    delta2: &[f64],
    opts: &SolveOptions,
    inspect: F,
) -> Result<SweepResult>
where
    F: Fn(&SweepCell, &Prepared, &Outcome) + Sync,
{
    check_list("delta1", delta1)?;
    check_list("delta2", delta2)?;
    opts.check().map_err(CoreError::InvalidArgument)?;
    let enforce = inst.flex.enforce_while_islanded;
    let mut jobs: Vec<(Option<f64>, Option<f64>)> = vec![(None, None)];
    for &d2 in delta2 {
        for &d1 in delta1 {
            jobs.push((Some(d1), Some(d2)));
        }
    }
    let mut results: Vec<SweepCell> = jobs
        .par_iter()
        .map(|&(d1, d2)| {
            let flex = FlexibilitySpec {
                delta1: d1,
                delta2: d2,
                enforce_while_islanded: enforce,
            };
            solve_cell(inst, flex, d1, d2, opts, &inspect)
        })
        .collect();
    let baseline = results.remove(0);
    Ok(SweepResult {
        name: inst.name.clone(),
        delta1: delta1.to_vec(),
        delta2: delta2.to_vec(),
        cells: results,
        baseline: Some(baseline),
        rel_gap: opts.rel_gap,
    })
}

fn table_cell(delta1: Option<f64>, delta2: Option<f64>, objective: Option<f64>) -> SweepCell {
    SweepCell {
        delta1,
        delta2,
        status: if objective.is_some() { CellStatus::Optimal } else { CellStatus::NoSolution },
        objective,
        best_bound: objective,
        gap: objective.map(|_| 0.0),
        curtailed_mwh: None,
        wall_time_s: 0.0,
        message: None,
    }
}

/// Reads the wide layout written by [`SweepResult::to_table_csv`].
/// Lines starting with `#` are comments; empty cells mean "no objective".
pub fn parse_table_csv(text: &str, file: &str) -> Result<SweepResult> {
    let csv_err = |line: usize, message: String| CoreError::Csv {
        file: file.into(),
        line: line as u64,
        message,
    };
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (hline, header) = lines.next().ok_or_else(|| csv_err(1, "empty table".into()))?;
    let parse = |line: usize, col: usize, s: &str| -> Result<f64> {
        s.trim()
            .parse::<f64>()
            .map_err(|_| csv_err(line, format!("column {col}: '{s}' is not a number")))
    };
    let delta1: Vec<f64> = header
        .split(',')
        .enumerate()
        .skip(1)
        .map(|(c, s)| parse(hline, c + 1, s))
        .collect::<Result<_>>()?;
    if delta1.is_empty() {
        return Err(csv_err(hline, "header has no delta1 columns".into()));
    }
    let mut delta2 = Vec::new();
    let mut cells = Vec::new();
    let mut baseline = None;
    for (line, row) in lines {
        let fields: Vec<&str> = row.split(',').collect();
        let label = fields[0].trim();
        if label.eq_ignore_ascii_case("baseline") {
            let v = fields.get(1).map(|s| s.trim()).filter(|s| !s.is_empty());
            let obj = v.map(|s| parse(line, 2, s)).transpose()?;
            baseline = Some(table_cell(None, None, obj));
            continue;
        }
        let d2 = parse(line, 1, label)?;
        if fields.len() != delta1.len() + 1 {
            return Err(csv_err(
                line,
                format!("expected {} fields, found {}", delta1.len() + 1, fields.len()),
            ));
        }
        delta2.push(d2);
        for (j, s) in fields[1..].iter().enumerate() {
            let s = s.trim();
            let obj = if s.is_empty() { None } else { Some(parse(line, j + 2, s)?) };
            cells.push(table_cell(Some(delta1[j]), Some(d2), obj));
        }
    }
    if delta2.is_empty() {
        return Err(csv_err(hline, "table has no delta2 rows".into()));
    }
    Ok(SweepResult {
        name: file.to_string(),
        delta1,
        delta2,
        cells,
        baseline,
        rel_gap: 0.0,
    })
}

pub fn read_table_csv(path: &Path) -> Result<SweepResult> {
    let text = std::fs::read_to_string(path).map_err(|e| CoreError::io(path, e))?;
    parse_table_csv(&text, &path.display().to_string())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Incentive {
    pub delta1: f64,
    pub delta2: f64,
    /// Reported value; `None` when the cell has no objective.
    pub incentive: Option<f64>,
    /// Objective minus baseline before flooring.
    pub raw: Option<f64>,
    /// Raw value was negative beyond the solver gap.
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncentiveTable {
    pub baseline: f64,
    pub delta1: Vec<f64>,
    pub delta2: Vec<f64>,
    /// Row-major like [`SweepResult::cells`].
    pub cells: Vec<Incentive>,
}

impl IncentiveTable {
    pub fn get(&self, delta1: f64, delta2: f64) -> Option<&Incentive> {
        self.cells.iter().find(|c| c.delta1 == delta1 && c.delta2 == delta2)
    }

    pub fn flagged(&self) -> impl Iterator<Item = &Incentive> {
        self.cells.iter().filter(|c| c.flagged)
    }

    pub fn to_table_csv(&self) -> String {
        let mut out = String::from("delta2/delta1");
        for d1 in &self.delta1 {
            let _ = write!(out, ",{d1}");
        }
        out.push('\n');
        for (i, d2) in self.delta2.iter().enumerate() {
            let _ = write!(out, "{d2}");
            for j in 0..self.delta1.len() {
                out.push(',');
                if let Some(v) = self.cells[i * self.delta1.len() + j].incentive {
                    let _ = write!(out, "{}", round_cents(v));
                }
            }
            out.push('\n');
        }
        out
    }
}

fn round_cents(v: f64) -> f64 {
    let r = (v * 100.0).round() / 100.0;
    if r == 0.0 { 0.0 } else { r }
}

/// incentive = objective - baseline. Negative values inside the combined
/// gap allowance are floored at zero; larger ones are kept and flagged.
pub fn compute_incentives(sweep: &SweepResult) -> Result<IncentiveTable> {
    let base = sweep
        .baseline
        .as_ref()
        .ok_or_else(|| CoreError::InvalidArgument("sweep has no baseline".into()))?;
    let b = base
        .objective
        .ok_or_else(|| CoreError::InvalidArgument(format!("baseline not solved ({:?})", base.status)))?;
    let base_gap = base.gap.unwrap_or(sweep.rel_gap);
    let cells = sweep
        .cells
        .iter()
        .map(|c| {
            let raw = c.objective.map(|o| o - b);
            let allowance = c.objective.map_or(0.0, |o| {
                c.gap.unwrap_or(sweep.rel_gap) * o.abs().max(1.0) + base_gap * b.abs().max(1.0)
            });
            let (incentive, flagged) = match raw {
                Some(r) if r < 0.0 && -r <= allowance => (Some(0.0), false),
                Some(r) if r < 0.0 => (Some(r), true),
                other => (other, false),
            };
            Incentive {
                delta1: c.delta1.unwrap_or(f64::NAN),
                delta2: c.delta2.unwrap_or(f64::NAN),
                incentive,
                raw,
                flagged,
            }
        })
        .collect();
    Ok(IncentiveTable {
        baseline: b,
        delta1: sweep.delta1.clone(),
        delta2: sweep.delta2.clone(),
        cells,
    })
}
