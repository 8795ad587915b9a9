//! Case files: one JSON document plus CSV time series.
//!
//! Series files have the header `t,k,value` with 1-based hours and
//! sub-periods; the price file has `t,value`. Ramp limits are given per hour
//! and converted to per-sub-period limits here.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{CoreError, Result};
use crate::grid::TimeGrid;
use crate::instance::*;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CaseFile {
    schema_version: u32,
    name: String,
    periods: usize,
    subperiods: usize,
    grid_exchange_max_mw: f64,
    voll_per_mwh: f64,
    prices: String,
    islanding: IslandingFile,
    #[serde(default)]
    flexibility: Option<FlexFile>,
    #[serde(default)]
    previous_utility_power_mw: Option<f64>,
    #[serde(default = "yes")]
    allow_curtailment: bool,
    #[serde(default)]
    units: Vec<UnitFile>,
    #[serde(default)]
    storages: Vec<StorageFile>,
    #[serde(default)]
    adjustable_loads: Vec<LoadFile>,
    series: Vec<SeriesFile>,
}

fn yes() -> bool {
    true
}

fn one() -> usize {
    1
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct IslandingFile {
    consecutive_subperiods: usize,
    base_probability: f64,
    #[serde(default = "one")]
    stride: usize,
    #[serde(default)]
    probability_overrides: BTreeMap<usize, f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FlexFile {
    delta1_mw: Option<f64>,
    delta2_mw: Option<f64>,
    #[serde(default)]
    enforce_while_islanded: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct UnitFile {
    id: String,
    p_min_mw: f64,
    p_max_mw: f64,
    ramp_up_mw_per_h: f64,
    ramp_down_mw_per_h: f64,
    min_up_h: usize,
    min_down_h: usize,
    /// `[MW, $/h]` breakpoints.
    cost_curve: Vec<[f64; 2]>,
    #[serde(default)]
    startup_cost: f64,
    #[serde(default)]
    shutdown_cost: f64,
    initial_status_h: i64,
    initial_power_mw: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct StorageFile {
    id: String,
    charge_min_mw: f64,
    charge_max_mw: f64,
    discharge_min_mw: f64,
    discharge_max_mw: f64,
    energy_min_mwh: f64,
    energy_max_mwh: f64,
    initial_energy_mwh: f64,
    efficiency: f64,
    min_charge_h: usize,
    min_discharge_h: usize,
    #[serde(default)]
    terminal: TerminalPolicy,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LoadFile {
    id: String,
    d_min_mw: f64,
    d_max_mw: f64,
    start_hour: usize,
    end_hour: usize,
    energy_mwh: f64,
    min_on_h: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SeriesFile {
    id: String,
    kind: SeriesKind,
    file: String,
}

fn csv_err(file: &Path, line: u64, message: impl Into<String>) -> CoreError {
    CoreError::Csv {
        file: file.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn open_csv(path: &Path, expected: &[&str]) -> Result<csv::Reader<fs::File>> {
    let file = fs::File::open(path).map_err(|e| CoreError::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let headers = rdr
        .headers()
        .map_err(|e| csv_err(path, 1, e.to_string()))?
        .clone();
    let got: Vec<&str> = headers.iter().collect();
    if got != expected {
        return Err(csv_err(
            path,
            1,
            format!("header must be `{}`, found `{}`", expected.join(","), got.join(",")),
        ));
    }
    Ok(rdr)
}

fn field<T: std::str::FromStr>(path: &Path, rec: &csv::StringRecord, col: usize, name: &str) -> Result<T> {
    let line = rec.position().map_or(0, |p| p.line());
    let raw = rec
        .get(col)
        .ok_or_else(|| csv_err(path, line, format!("column {} `{name}` missing", col + 1)))?;
    raw.parse()
        .map_err(|_| csv_err(path, line, format!("column {} `{name}`: cannot parse `{raw}`", col + 1)))
}

/// Reads a `t,k,value` series into flat order, rejecting gaps and duplicates.
pub fn read_series(path: &Path, grid: TimeGrid) -> Result<Vec<f64>> {
    let mut rdr = open_csv(path, &["t", "k", "value"])?;
    let mut values: Vec<Option<f64>> = vec![None; grid.horizon()];
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            csv_err(path, line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let t: usize = field(path, &rec, 0, "t")?;
        let k: usize = field(path, &rec, 1, "k")?;
        let v: f64 = field(path, &rec, 2, "value")?;
        if t == 0 || t > grid.periods() {
            return Err(csv_err(path, line, format!("column 1 `t`: t={t} outside 1..={}", grid.periods())));
        }
        if k == 0 || k > grid.subperiods() {
            return Err(csv_err(
                path,
                line,
                format!("column 2 `k`: k={k} outside 1..={}", grid.subperiods()),
            ));
        }
        let slot = &mut values[grid.flat(t, k)];
        if slot.is_some() {
            return Err(csv_err(path, line, format!("duplicate entry for t={t}, k={k}")));
        }
        *slot = Some(v);
    }
    values
        .iter()
        .enumerate()
        .map(|(p, v)| {
            v.ok_or_else(|| {
                let (t, k) = grid.tk(p);
                csv_err(path, 0, format!("no entry for t={t}, k={k}"))
            })
        })
        .collect()
}

/// Reads a `t,value` hourly price file.
pub fn read_prices(path: &Path, periods: usize) -> Result<Vec<f64>> {
    let mut rdr = open_csv(path, &["t", "value"])?;
    let mut values: Vec<Option<f64>> = vec![None; periods];
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(path, e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        let t: usize = field(path, &rec, 0, "t")?;
        let v: f64 = field(path, &rec, 1, "value")?;
        if t == 0 || t > periods {
            return Err(csv_err(path, line, format!("column 1 `t`: t={t} outside 1..={periods}")));
        }
        if values[t - 1].replace(v).is_some() {
            return Err(csv_err(path, line, format!("duplicate price for t={t}")));
        }
    }
    values
        .iter()
        .enumerate()
        .map(|(t, v)| v.ok_or_else(|| csv_err(path, 0, format!("no price for t={}", t + 1))))
        .collect()
}

/// Parses, converts units and validates a case file.
pub fn load_case(path: impl AsRef<Path>) -> Result<ValidatedInstance> {
    let raw = read_case(path)?;
    Ok(validate_instance(raw)?)
}

/// Parses and converts a case file without validating it.
pub fn read_case(path: impl AsRef<Path>) -> Result<MicrogridInstance> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| CoreError::io(path, e))?;
    let case: CaseFile = serde_json::from_str(&text).map_err(|e| CoreError::Schema {
        file: path.to_path_buf(),
        message: e.to_string(),
    })?;
    if case.schema_version != SCHEMA_VERSION {
        return Err(CoreError::Schema {
            file: path.to_path_buf(),
            message: format!(
                "unsupported schema_version {}, expected {SCHEMA_VERSION}",
                case.schema_version
            ),
        });
    }
    let grid = TimeGrid::new(case.periods, case.subperiods).map_err(|e| CoreError::Schema {
        file: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let dir = path.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."));
    let kf = grid.subperiods() as f64;

    let rho = read_prices(&dir.join(&case.prices), grid.periods())?;
    let mut fixed_series = Vec::new();
    for s in &case.series {
        fixed_series.push(FixedSeries {
            id: s.id.clone(),
            kind: s.kind,
            values: read_series(&dir.join(&s.file), grid)?,
        });
    }
    let units = case
        .units
        .into_iter()
        .map(|u| DispatchableUnit {
            id: u.id,
            p_min: u.p_min_mw,
            p_max: u.p_max_mw,
            ramp_up: u.ramp_up_mw_per_h / kf,
            ramp_down: u.ramp_down_mw_per_h / kf,
            min_up: u.min_up_h,
            min_down: u.min_down_h,
            cost: CostCurve {
                breakpoints: u.cost_curve.iter().map(|b| (b[0], b[1])).collect(),
            },
            startup_cost: u.startup_cost,
            shutdown_cost: u.shutdown_cost,
            initial_status: u.initial_status_h,
            initial_power: u.initial_power_mw,
        })
        .collect();
    let storages = case
        .storages
        .into_iter()
        .map(|s| StorageUnit {
            id: s.id,
            charge_min: s.charge_min_mw,
            charge_max: s.charge_max_mw,
            discharge_min: s.discharge_min_mw,
            discharge_max: s.discharge_max_mw,
            energy_min: s.energy_min_mwh,
            energy_max: s.energy_max_mwh,
            initial_energy: s.initial_energy_mwh,
            efficiency: s.efficiency,
            min_charge: s.min_charge_h,
            min_discharge: s.min_discharge_h,
            terminal: s.terminal,
        })
        .collect();
    let adjustable = case
        .adjustable_loads
        .into_iter()
        .map(|d| AdjustableLoad {
            id: d.id,
            d_min: d.d_min_mw,
            d_max: d.d_max_mw,
            start: d.start_hour,
            end: d.end_hour,
            energy: d.energy_mwh,
            min_on: d.min_on_h,
        })
        .collect();
    let flex = case.flexibility.map_or_else(FlexibilitySpec::default, |f| FlexibilitySpec {
        delta1: f.delta1_mw,
        delta2: f.delta2_mw,
        enforce_while_islanded: f.enforce_while_islanded,
    });

    Ok(MicrogridInstance {
        name: case.name,
        grid,
        units,
        storages,
        adjustable,
        fixed_series,
        prices: MarketPrice { rho },
        pm_max: case.grid_exchange_max_mw,
        voll: case.voll_per_mwh,
        flex,
        previous_utility_power: case.previous_utility_power_mw,
        islanding_k: case.islanding.consecutive_subperiods,
        psi_base: case.islanding.base_probability,
        scenario_stride: case.islanding.stride,
        psi_overrides: case.islanding.probability_overrides,
        allow_curtailment: case.allow_curtailment,
    })
}
