use std::collections::BTreeMap;
use std::fmt;
use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::grid::TimeGrid;

/// Convex piecewise-linear cost in $/h as a function of output in MW.
///
/// The first breakpoint sits at 0 MW; its cost is the no-load cost paid
/// whenever the unit is committed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostCurve {
    pub breakpoints: Vec<(f64, f64)>,
}

impl CostCurve {
    /// Straight line `no_load + slope * p` up to `p_max`.
    pub fn linear(no_load: f64, slope: f64, p_max: f64) -> Self {
        Self {
            breakpoints: vec![(0.0, no_load), (p_max, no_load + slope * p_max)],
        }
    }

    pub fn no_load(&self) -> f64 {
        self.breakpoints[0].1
    }

    /// `(width MW, slope $/MWh)` for each interval between breakpoints.
    pub fn segments(&self) -> Vec<(f64, f64)> {
        self.breakpoints
            .windows(2)
            .map(|w| {
                let width = w[1].0 - w[0].0;
                (width, (w[1].1 - w[0].1) / width)
            })
            .collect()
    }

    /// Cost rate at output `p`, extrapolating the last segment past the end.
    pub fn eval(&self, p: f64) -> f64 {
        let mut cost = self.no_load();
        let mut left = p;
        let segs = self.segments();
        for (i, (width, slope)) in segs.iter().enumerate() {
            let take = if i + 1 == segs.len() { left } else { left.min(*width) };
            cost += slope * take.max(0.0);
            left -= take;
            if left <= 0.0 {
                break;
            }
        }
        cost
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispatchableUnit {
    pub id: String,
    pub p_min: f64,
    pub p_max: f64,
    /// MW per sub-period.
    pub ramp_up: f64,
    /// MW per sub-period.
    pub ramp_down: f64,
    /// Hours.
    pub min_up: usize,
    /// Hours.
    pub min_down: usize,
    pub cost: CostCurve,
    pub startup_cost: f64,
    pub shutdown_cost: f64,
    /// Hours the unit has been on (> 0) or off (< 0) before the horizon.
    pub initial_status: i64,
    pub initial_power: f64,
}

impl DispatchableUnit {
    pub fn initially_on(&self) -> bool {
        self.initial_status > 0
    }

    /// Leading hours whose commitment is dictated by the history, with the forced state.
    pub fn forced_prefix(&self) -> (usize, bool) {
        if self.initial_status > 0 {
            let h = self.initial_status as usize;
            (self.min_up.saturating_sub(h), true)
        } else {
            let h = self.initial_status.unsigned_abs() as usize;
            (self.min_down.saturating_sub(h), false)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum TerminalPolicy {
    #[default]
    None,
    AtLeastInitial,
    EqualInitial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StorageUnit {
    pub id: String,
    pub charge_min: f64,
    pub charge_max: f64,
    pub discharge_min: f64,
    pub discharge_max: f64,
    pub energy_min: f64,
    pub energy_max: f64,
    pub initial_energy: f64,
    pub efficiency: f64,
    /// Hours.
    pub min_charge: usize,
    /// Hours.
    pub min_discharge: usize,
    pub terminal: TerminalPolicy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdjustableLoad {
    pub id: String,
    pub d_min: f64,
    pub d_max: f64,
    /// First permitted hour, 1-based.
    pub start: usize,
    /// Last permitted hour, inclusive.
    pub end: usize,
    /// MWh over the window.
    pub energy: f64,
    /// Hours.
    pub min_on: usize,
}

impl AdjustableLoad {
    pub fn allowed(&self, t: usize) -> bool {
        (self.start..=self.end).contains(&t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SeriesKind {
    FixedLoad,
    NondispatchableGeneration,
    ProsumerNetLoad,
}

impl SeriesKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SeriesKind::FixedLoad => "fixed-load",
            SeriesKind::NondispatchableGeneration => "nondispatchable-generation",
            SeriesKind::ProsumerNetLoad => "prosumer-net-load",
        }
    }
}

/// One MW value per sub-period, in flat `(t, k)` order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedSeries {
    pub id: String,
    pub kind: SeriesKind,
    pub values: Vec<f64>,
}

/// $/MWh per hour.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketPrice {
    pub rho: Vec<f64>,
}

/// Feeder ramp limits. `None` leaves that direction unconstrained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct FlexibilitySpec {
    /// MW between adjacent sub-periods of one hour.
    pub delta1: Option<f64>,
    /// MW across an hour boundary.
    pub delta2: Option<f64>,
    /// Bind the limits also on pairs touching an islanded sub-period.
    #[serde(default)]
    pub enforce_while_islanded: bool,
}

impl FlexibilitySpec {
    pub fn price_based() -> Self {
        Self::default()
    }

    pub fn limits(delta1: f64, delta2: f64) -> Self {
        Self {
            delta1: Some(delta1),
            delta2: Some(delta2),
            enforce_while_islanded: false,
        }
    }

    pub fn is_active(&self) -> bool {
        self.delta1.is_some() || self.delta2.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MicrogridInstance {
    pub name: String,
    pub grid: TimeGrid,
    pub units: Vec<DispatchableUnit>,
    pub storages: Vec<StorageUnit>,
    pub adjustable: Vec<AdjustableLoad>,
    pub fixed_series: Vec<FixedSeries>,
    pub prices: MarketPrice,
    /// MW.
    pub pm_max: f64,
    /// $/MWh.
    pub voll: f64,
    pub flex: FlexibilitySpec,
    /// Feeder power at the last sub-period of the previous day.
    pub previous_utility_power: Option<f64>,
    pub islanding_k: usize,
    pub psi_base: f64,
    /// Keep every n-th islanding scenario.
    pub scenario_stride: usize,
    /// Probabilities pinned by islanding start position.
    pub psi_overrides: BTreeMap<usize, f64>,
    pub allow_curtailment: bool,
}

impl MicrogridInstance {
    pub fn series(&self, kind: SeriesKind) -> impl Iterator<Item = &FixedSeries> {
        self.fixed_series.iter().filter(move |s| s.kind == kind)
    }

    /// Fixed load minus nondispatchable output at flat index `p`.
    pub fn net_fixed_demand(&self, p: usize) -> f64 {
        let load: f64 = self.series(SeriesKind::FixedLoad).map(|s| s.values[p]).sum();
        let gen: f64 = self
            .series(SeriesKind::NondispatchableGeneration)
            .map(|s| s.values[p])
            .sum();
        load - gen
    }

    pub fn with_flex(&self, flex: FlexibilitySpec) -> Self {
        Self {
            flex,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationError {
    #[serde(rename = "type")]
    pub type_name: String,
    pub id: String,
    pub field: String,
    pub message: String,
}

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}.{}: {}", self.type_name, self.id, self.field, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationErrors(pub Vec<ValidationError>);

impl fmt::Display for ValidationErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} validation error(s)", self.0.len())?;
        for e in &self.0 {
            writeln!(f, "  {e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ValidationErrors {}

impl ValidationErrors {
    pub fn has(&self, id: &str, field: &str) -> bool {
        self.0.iter().any(|e| e.id == id && e.field == field)
    }
}

/// An instance whose invariants have been checked. Immutable from here on.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidatedInstance(MicrogridInstance);

impl Deref for ValidatedInstance {
    type Target = MicrogridInstance;
    fn deref(&self) -> &MicrogridInstance {
        &self.0
    }
}

impl ValidatedInstance {
    pub fn into_inner(self) -> MicrogridInstance {
        self.0
    }

    pub fn with_flex(&self, flex: FlexibilitySpec) -> Result<Self, ValidationErrors> {
        validate_instance(self.0.with_flex(flex))
    }
}

struct Collector(Vec<ValidationError>);

impl Collector {
    fn push(&mut self, ty: &str, id: &str, field: &str, message: impl Into<String>) {
        self.0.push(ValidationError {
            type_name: ty.to_string(),
            id: id.to_string(),
            field: field.to_string(),
            message: message.into(),
        });
    }

    fn finite(&mut self, ty: &str, id: &str, field: &str, v: f64) -> bool {
        if !v.is_finite() {
            self.push(ty, id, field, format!("must be finite, got {v}"));
            return false;
        }
        true
    }

    fn nonneg(&mut self, ty: &str, id: &str, field: &str, v: f64) {
        if self.finite(ty, id, field, v) && v < 0.0 {
            self.push(ty, id, field, format!("must be >= 0, got {v}"));
        }
    }
}

/// Checks every invariant and reports all violations at once.
pub fn validate_instance(raw: MicrogridInstance) -> Result<ValidatedInstance, ValidationErrors> {
    let mut c = Collector(Vec::new());
    let g = raw.grid;
    let horizon = g.horizon();
    const MG: &str = "MicrogridInstance";

    if raw.grid.periods() == 0 || raw.grid.subperiods() == 0 {
        c.push("TimeGrid", &raw.name, "T", "T and K must be >= 1");
    }
    c.nonneg(MG, &raw.name, "pm_max", raw.pm_max);
    c.nonneg(MG, &raw.name, "voll", raw.voll);
    if raw.islanding_k > horizon {
        c.push(
            MG,
            &raw.name,
            "islanding_k",
            format!("{} exceeds the {} sub-periods of the horizon", raw.islanding_k, horizon),
        );
    }
    if !(raw.psi_base > 0.0 && raw.psi_base <= 1.0) {
        c.push(MG, &raw.name, "psi_base", format!("must lie in (0, 1], got {}", raw.psi_base));
    } else if raw.islanding_k > 0 && raw.psi_base >= 1.0 {
        c.push(MG, &raw.name, "psi_base", "must be < 1 when islanding scenarios exist");
    }
    if raw.scenario_stride == 0 {
        c.push(MG, &raw.name, "scenario_stride", "must be >= 1");
    }
    for (&s, &p) in &raw.psi_overrides {
        if s == 0 || s > horizon {
            c.push(MG, &raw.name, "psi_overrides", format!("start {s} outside 1..={horizon}"));
        }
        if !(p > 0.0 && p.is_finite()) {
            c.push(MG, &raw.name, "psi_overrides", format!("probability for start {s} must be > 0"));
        }
    }
    if let Some(d) = raw.flex.delta1 {
        c.nonneg("FlexibilitySpec", &raw.name, "delta1", d);
    }
    if let Some(d) = raw.flex.delta2 {
        c.nonneg("FlexibilitySpec", &raw.name, "delta2", d);
    }
    if let Some(p) = raw.previous_utility_power {
        c.finite(MG, &raw.name, "previous_utility_power", p);
    }

    if raw.prices.rho.len() != g.periods() {
        c.push(
            "MarketPrice",
            &raw.name,
            "rho",
            format!("expected {} hourly prices, got {}", g.periods(), raw.prices.rho.len()),
        );
    }
    for (t, &p) in raw.prices.rho.iter().enumerate() {
        c.finite("MarketPrice", &raw.name, &format!("rho[{}]", t + 1), p);
    }

    let mut ids: BTreeMap<&str, usize> = BTreeMap::new();
    let all_ids = raw
        .units
        .iter()
        .map(|u| u.id.as_str())
        .chain(raw.storages.iter().map(|s| s.id.as_str()))
        .chain(raw.adjustable.iter().map(|d| d.id.as_str()))
        .chain(raw.fixed_series.iter().map(|s| s.id.as_str()));
    for id in all_ids {
        *ids.entry(id).or_default() += 1;
    }
    for (id, n) in ids {
        if n > 1 {
            c.push("MicrogridInstance", id, "id", format!("id used by {n} components"));
        }
        if id.is_empty() || !id.chars().all(|ch| ch.is_ascii_alphanumeric() || ch == '-' || ch == '.') {
            c.push(
                "MicrogridInstance",
                id,
                "id",
                "ids must be non-empty ASCII letters, digits, '-' or '.'",
            );
        }
    }

    for u in &raw.units {
        const TY: &str = "DispatchableUnit";
        let id = u.id.as_str();
        c.nonneg(TY, id, "p_min", u.p_min);
        c.nonneg(TY, id, "p_max", u.p_max);
        if u.p_min > u.p_max {
            c.push(TY, id, "p_min", format!("p_min {} exceeds p_max {}", u.p_min, u.p_max));
        }
        c.nonneg(TY, id, "ramp_up", u.ramp_up);
        c.nonneg(TY, id, "ramp_down", u.ramp_down);
        if u.min_up < 1 {
            c.push(TY, id, "min_up", "must be >= 1 hour");
        }
        if u.min_down < 1 {
            c.push(TY, id, "min_down", "must be >= 1 hour");
        }
        c.nonneg(TY, id, "startup_cost", u.startup_cost);
        c.nonneg(TY, id, "shutdown_cost", u.shutdown_cost);
        check_curve(&mut c, id, &u.cost, u.p_max);
        if u.initial_status == 0 {
            c.push(TY, id, "initial_status", "must be nonzero: hours on (> 0) or off (< 0)");
        } else if u.initial_status > 0 {
            if c.finite(TY, id, "initial_power", u.initial_power)
                && (u.initial_power < u.p_min - 1e-12 || u.initial_power > u.p_max + 1e-12)
            {
                c.push(
                    TY,
                    id,
                    "initial_power",
                    format!("{} outside [p_min, p_max] for a committed unit", u.initial_power),
                );
            }
        } else if u.initial_power != 0.0 {
            c.push(TY, id, "initial_power", "must be 0 for a unit that starts off");
        }
    }

    for s in &raw.storages {
        const TY: &str = "StorageUnit";
        let id = s.id.as_str();
        for (f, v) in [
            ("charge_min", s.charge_min),
            ("charge_max", s.charge_max),
            ("discharge_min", s.discharge_min),
            ("discharge_max", s.discharge_max),
            ("energy_min", s.energy_min),
            ("energy_max", s.energy_max),
            ("initial_energy", s.initial_energy),
        ] {
            c.nonneg(TY, id, f, v);
        }
        if s.charge_min > s.charge_max {
            c.push(TY, id, "charge_min", "exceeds charge_max");
        }
        if s.discharge_min > s.discharge_max {
            c.push(TY, id, "discharge_min", "exceeds discharge_max");
        }
        if !(s.energy_min <= s.initial_energy && s.initial_energy <= s.energy_max) {
            c.push(
                TY,
                id,
                "initial_energy",
                format!(
                    "{} outside [energy_min {}, energy_max {}]",
                    s.initial_energy, s.energy_min, s.energy_max
                ),
            );
        }
        if !(s.efficiency > 0.0 && s.efficiency <= 1.0) {
            c.push(TY, id, "efficiency", format!("must lie in (0, 1], got {}", s.efficiency));
        }
        if s.min_charge < 1 {
            c.push(TY, id, "min_charge", "must be >= 1 hour");
        }
        if s.min_discharge < 1 {
            c.push(TY, id, "min_discharge", "must be >= 1 hour");
        }
    }

    for d in &raw.adjustable {
        const TY: &str = "AdjustableLoad";
        let id = d.id.as_str();
        c.nonneg(TY, id, "d_min", d.d_min);
        c.nonneg(TY, id, "d_max", d.d_max);
        c.nonneg(TY, id, "energy", d.energy);
        if d.d_min > d.d_max {
            c.push(TY, id, "d_min", "exceeds d_max");
        }
        if !(1 <= d.start && d.start <= d.end && d.end <= g.periods()) {
            c.push(
                TY,
                id,
                "start",
                format!("window [{}, {}] must satisfy 1 <= start <= end <= {}", d.start, d.end, g.periods()),
            );
            continue;
        }
        if d.min_on < 1 {
            c.push(TY, id, "min_on", "must be >= 1 hour");
        }
        let hours = (d.end - d.start + 1) as f64;
        if d.energy > d.d_max * hours + 1e-9 {
            c.push(
                TY,
                id,
                "energy",
                format!(
                    "infeasible energy: {} MWh exceeds d_max * window = {} MWh",
                    d.energy,
                    d.d_max * hours
                ),
            );
        }
        if d.energy > 0.0 {
            if d.min_on > d.end - d.start + 1 {
                c.push(TY, id, "min_on", "longer than the permitted window");
            }
            if d.d_min * d.min_on as f64 > d.energy + 1e-9 {
                c.push(
                    TY,
                    id,
                    "energy",
                    format!(
                        "infeasible energy: {} MWh below d_min * min_on = {} MWh",
                        d.energy,
                        d.d_min * d.min_on as f64
                    ),
                );
            }
        }
    }

    for s in &raw.fixed_series {
        const TY: &str = "FixedSeries";
        if s.values.len() != horizon {
            c.push(
                TY,
                &s.id,
                "values",
                format!("expected {} values, got {}", horizon, s.values.len()),
            );
            continue;
        }
        for (p, &v) in s.values.iter().enumerate() {
            let (t, k) = g.tk(p);
            if !v.is_finite() {
                c.push(TY, &s.id, &format!("values[t={t},k={k}]"), "must be finite");
            } else if s.kind != SeriesKind::ProsumerNetLoad && v < 0.0 {
                c.push(
                    TY,
                    &s.id,
                    &format!("values[t={t},k={k}]"),
                    format!("{} series must be >= 0, got {v}", s.kind.as_str()),
                );
            }
        }
    }

    if c.0.is_empty() {
        Ok(ValidatedInstance(raw))
    } else {
        Err(ValidationErrors(c.0))
    }
}

fn check_curve(c: &mut Collector, id: &str, curve: &CostCurve, p_max: f64) {
    const TY: &str = "DispatchableUnit";
    let bp = &curve.breakpoints;
    if bp.len() < 2 {
        c.push(TY, id, "cost", "needs at least two breakpoints");
        return;
    }
    if bp.iter().any(|(p, f)| !p.is_finite() || !f.is_finite()) {
        c.push(TY, id, "cost", "breakpoints must be finite");
        return;
    }
    if bp[0].0 != 0.0 {
        c.push(TY, id, "cost", "first breakpoint must be at 0 MW");
    }
    if bp.windows(2).any(|w| w[1].0 <= w[0].0) {
        c.push(TY, id, "cost", "breakpoint powers must be strictly increasing");
        return;
    }
    let slopes: Vec<f64> = curve.segments().iter().map(|s| s.1).collect();
    if slopes.windows(2).any(|w| w[1] < w[0] - 1e-12) {
        c.push(TY, id, "cost", "slopes must be non-decreasing (convex cost)");
    }
    if bp[bp.len() - 1].0 < p_max {
        c.push(TY, id, "cost", format!("last breakpoint must reach p_max {p_max}"));
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub fn sample() -> MicrogridInstance {
        let grid = TimeGrid::new(2, 2).unwrap();
        MicrogridInstance {
            name: "sample".into(),
            grid,
            units: vec![DispatchableUnit {
                id: "g1".into(),
                p_min: 0.5,
                p_max: 4.0,
                ramp_up: 2.0,
                ramp_down: 2.0,
                min_up: 1,
                min_down: 1,
                cost: CostCurve {
                    breakpoints: vec![(0.0, 5.0), (2.0, 65.0), (4.0, 145.0)],
                },
                startup_cost: 0.0,
                shutdown_cost: 0.0,
                initial_status: 1,
                initial_power: 1.0,
            }],
            storages: vec![StorageUnit {
                id: "ess".into(),
                charge_min: 0.0,
                charge_max: 1.0,
                discharge_min: 0.0,
                discharge_max: 1.0,
                energy_min: 0.0,
                energy_max: 2.0,
                initial_energy: 1.0,
                efficiency: 0.9,
                min_charge: 1,
                min_discharge: 1,
                terminal: TerminalPolicy::None,
            }],
            adjustable: vec![AdjustableLoad {
                id: "ev".into(),
                d_min: 0.2,
                d_max: 1.0,
                start: 1,
                end: 2,
                energy: 1.0,
                min_on: 1,
            }],
            fixed_series: vec![
                FixedSeries {
                    id: "load".into(),
                    kind: SeriesKind::FixedLoad,
                    values: vec![2.0, 2.5, 3.0, 2.0],
                },
                FixedSeries {
                    id: "pros".into(),
                    kind: SeriesKind::ProsumerNetLoad,
                    values: vec![1.0, -0.5, 0.5, 1.0],
                },
            ],
            prices: MarketPrice { rho: vec![40.0, 60.0] },
            pm_max: 5.0,
            voll: 1000.0,
            flex: FlexibilitySpec::limits(1.0, 2.0),
            previous_utility_power: None,
            islanding_k: 1,
            psi_base: 0.9,
            scenario_stride: 1,
            psi_overrides: BTreeMap::new(),
            allow_curtailment: true,
        }
    }

    #[test]
    fn consistent_instance_validates() {
        let v = validate_instance(sample()).unwrap();
        assert_eq!(v.units.len(), 1);
    }

    #[test]
    fn pmin_above_pmax_names_the_field() {
        let mut raw = sample();
        raw.units[0].p_min = 5.0;
        let e = validate_instance(raw).unwrap_err();
        assert!(e.has("g1", "p_min"), "{e}");
    }

    #[test]
    fn excessive_energy_is_infeasible() {
        let mut raw = sample();
        raw.adjustable[0].energy = 2.5;
        let e = validate_instance(raw).unwrap_err();
        assert!(e.has("ev", "energy"));
        assert!(e.0[0].message.contains("infeasible energy"));
    }

    #[test]
    fn all_errors_reported_together() {
        let mut raw = sample();
        raw.units[0].p_min = 5.0;
        raw.storages[0].efficiency = 1.5;
        raw.fixed_series[0].values.pop();
        raw.prices.rho.push(1.0);
        let e = validate_instance(raw).unwrap_err();
        assert!(e.0.len() >= 4, "{e}");
        assert!(e.has("ess", "efficiency"));
        assert!(e.has("load", "values"));
    }

    #[test]
    fn nonconvex_cost_rejected() {
        let mut raw = sample();
        raw.units[0].cost.breakpoints = vec![(0.0, 0.0), (2.0, 100.0), (4.0, 120.0)];
        assert!(validate_instance(raw).unwrap_err().has("g1", "cost"));
    }

    #[test]
    fn revalidation_is_clean() {
        let v = validate_instance(sample()).unwrap();
        let again = validate_instance(v.clone().into_inner()).unwrap();
        assert_eq!(v, again);
    }

    #[test]
    fn curve_evaluation() {
        let c = &sample().units[0].cost;
        assert_eq!(c.segments(), vec![(2.0, 30.0), (2.0, 40.0)]);
        assert_eq!(c.eval(0.0), 5.0);
        assert_eq!(c.eval(1.0), 35.0);
        assert_eq!(c.eval(3.0), 105.0);
        assert_eq!(c.eval(4.0), 145.0);
    }
}
