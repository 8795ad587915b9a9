//! Independent feasibility check of a schedule.
//!
//! Everything is recomputed from raw instance data with plain loops; nothing
//! here reads the assembled model. Duration limits are checked as run lengths
//! rather than the window sums the builder uses.

use std::fmt;

use serde::Serialize;

use crate::envelope::FlexibilityEnvelope;
use crate::error::{CoreError, Result};
use crate::instance::{MicrogridInstance, SeriesKind, TerminalPolicy};
use crate::scenarios::ScenarioSet;
use crate::schedule::Schedule;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Family {
    #[serde(rename = "balance")]
    Balance,
    #[serde(rename = "exchange")]
    Exchange,
    #[serde(rename = "capacity")]
    Capacity,
    #[serde(rename = "ramp")]
    Ramp,
    #[serde(rename = "min-up-down")]
    UpDown,
    #[serde(rename = "storage")]
    Storage,
    #[serde(rename = "adjustable")]
    Adjustable,
    #[serde(rename = "flexibility")]
    Flexibility,
    #[serde(rename = "utility-ramp")]
    UtilityRamp,
}

impl Family {
    pub const ALL: [Family; 9] = [
        Family::Balance,
        Family::Exchange,
        Family::Capacity,
        Family::Ramp,
        Family::UpDown,
        Family::Storage,
        Family::Adjustable,
        Family::Flexibility,
        Family::UtilityRamp,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Family::Balance => "balance",
            Family::Exchange => "exchange",
            Family::Capacity => "capacity",
            Family::Ramp => "ramp",
            Family::UpDown => "min-up-down",
            Family::Storage => "storage",
            Family::Adjustable => "adjustable",
            Family::Flexibility => "flexibility",
            Family::UtilityRamp => "utility-ramp",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub family: Family,
    pub at: String,
    /// Amount by which the constraint is exceeded; always positive.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ViolationReport {
    pub tol: f64,
    pub pass: bool,
    pub max_residual: f64,
    pub violations: Vec<Violation>,
}

impl ViolationReport {
    pub fn of(&self, family: Family) -> impl Iterator<Item = &Violation> {
        self.violations.iter().filter(move |v| v.family == family)
    }

    pub fn summary(&self) -> String {
        if self.pass {
            return format!("pass at tolerance {:e}", self.tol);
        }
        let mut out = format!(
            "FAIL: {} violation(s), max residual {:e}",
            self.violations.len(),
            self.max_residual
        );
        for fam in Family::ALL {
            let n = self.of(fam).count();
            if n > 0 {
                out.push_str(&format!("\n  {fam}: {n}"));
            }
        }
        out
    }
}

struct Checker {
    tol: f64,
    found: Vec<Violation>,
}

impl Checker {
    /// Records `excess` when it is above tolerance.
    fn over(&mut self, family: Family, excess: f64, at: impl FnOnce() -> String) {
        if excess > self.tol || excess.is_nan() {
            self.found.push(Violation {
                family,
                at: at(),
                residual: if excess.is_nan() { f64::INFINITY } else { excess },
            });
        }
    }

    fn within(&mut self, family: Family, x: f64, lo: f64, hi: f64, at: impl FnOnce() -> String) {
        let excess = (lo - x).max(x - hi);
        self.over(family, excess, at);
    }

    fn equal(&mut self, family: Family, x: f64, target: f64, at: impl FnOnce() -> String) {
        self.over(family, (x - target).abs(), at);
    }
}

/// Lengths of maximal runs of `state` in `seq`, as `(start hour, length, reaches end)`.
/// `carried` hours of the same state immediately precede the sequence.
fn runs(seq: &[bool], state: bool, carried: usize) -> Vec<(usize, usize, bool)> {
    let mut out = Vec::new();
    let mut t = 0;
    while t < seq.len() {
        if seq[t] != state {
            t += 1;
            continue;
        }
        let start = t;
        while t < seq.len() && seq[t] == state {
            t += 1;
        }
        let len = t - start + if start == 0 { carried } else { 0 };
        out.push((start + 1, len, t == seq.len()));
    }
    out
}

fn scenario_islanded(scen: &ScenarioSet, s: usize, pos: usize) -> bool {
    match scen.scenarios[s].window {
        None => false,
        Some(w) => pos >= w.start && pos < w.start + w.length,
    }
}

fn check_dimensions(inst: &MicrogridInstance, scen: &ScenarioSet, sch: &Schedule) -> Result<()> {
    let g = inst.grid;
    let n = g.horizon();
    let ns = scen.len();
    let mut bad = Vec::new();
    if sch.periods != g.periods() || sch.subperiods != g.subperiods() {
        bad.push(format!(
            "grid {}x{} vs instance {}x{}",
            sch.periods,
            sch.subperiods,
            g.periods(),
            g.subperiods()
        ));
    }
    let grid_ok = |m: &Vec<Vec<f64>>| m.len() == ns && m.iter().all(|v| v.len() == n);
    if !grid_ok(&sch.exchange) || !grid_ok(&sch.curtailment) {
        bad.push(format!("exchange/curtailment must be {ns} scenarios x {n} sub-periods"));
    }
    if sch.units.len() != inst.units.len()
        || sch.units.iter().zip(&inst.units).any(|(a, b)| {
            a.id != b.id || a.commitment.len() != g.periods() || !grid_ok(&a.power)
        })
    {
        bad.push("unit schedules do not match the instance".into());
    }
    if sch.storages.len() != inst.storages.len()
        || sch.storages.iter().zip(&inst.storages).any(|(a, b)| {
            a.id != b.id
                || a.charging.len() != g.periods()
                || a.discharging.len() != g.periods()
                || !grid_ok(&a.charge)
                || !grid_ok(&a.discharge)
                || !grid_ok(&a.energy)
        })
    {
        bad.push("storage schedules do not match the instance".into());
    }
    if sch.loads.len() != inst.adjustable.len()
        || sch
            .loads
            .iter()
            .zip(&inst.adjustable)
            .any(|(a, b)| a.id != b.id || a.operating.len() != g.periods() || a.demand.len() != n)
    {
        bad.push("adjustable-load schedules do not match the instance".into());
    }
    if bad.is_empty() {
        Ok(())
    } else {
        Err(CoreError::InvalidArgument(format!("schedule dimension mismatch: {}", bad.join("; "))))
    }
}

/// Checks every constraint family of `schedule` at absolute tolerance `tol`.
pub fn check_schedule(
    inst: &MicrogridInstance,
    scen: &ScenarioSet,
    envelope: &FlexibilityEnvelope,
    schedule: &Schedule,
    tol: f64,
) -> Result<ViolationReport> {
    check_dimensions(inst, scen, schedule)?;
    let sch = schedule;
    let big_t = inst.grid.periods();
    let big_k = inst.grid.subperiods();
    let n = big_t * big_k;
    let tau = 1.0 / big_k as f64;
    let hour = |p: usize| p / big_k + 1;
    let sub = |p: usize| p % big_k + 1;
    let mut c = Checker {
        tol,
        found: Vec::new(),
    };

    let mut fixed_load = vec![0.0; n];
    let mut uncontrolled = vec![0.0; n];
    let mut prosumers = vec![0.0; n];
    for series in &inst.fixed_series {
        let target = match series.kind {
            SeriesKind::FixedLoad => &mut fixed_load,
            SeriesKind::NondispatchableGeneration => &mut uncontrolled,
            SeriesKind::ProsumerNetLoad => &mut prosumers,
        };
        for p in 0..n {
            target[p] += series.values[p];
        }
    }

    for s in 0..scen.len() {
        for p in 0..n {
            let (t, k) = (hour(p), sub(p));
            let at = || format!("t={t} k={k} s={s}");
            let mut supply = sch.exchange[s][p] + sch.curtailment[s][p];
            for u in &sch.units {
                supply += u.power[s][p];
            }
            for st in &sch.storages {
                supply += st.discharge[s][p] - st.charge[s][p];
            }
            let adjustable: f64 = sch.loads.iter().map(|l| l.demand[p]).sum();
            let demand = fixed_load[p] - uncontrolled[p] + adjustable;
            c.equal(Family::Balance, supply, demand, at);
            let ls_cap = if inst.allow_curtailment { fixed_load[p] + adjustable } else { 0.0 };
            c.within(Family::Balance, sch.curtailment[s][p], 0.0, ls_cap, || {
                format!("curtailment t={t} k={k} s={s}")
            });

            let limit = if scenario_islanded(scen, s, p + 1) { 0.0 } else { inst.pm_max };
            c.over(Family::Exchange, sch.exchange[s][p].abs() - limit, at);
        }
    }

    for (unit, us) in inst.units.iter().zip(&sch.units) {
        for s in 0..scen.len() {
            for p in 0..n {
                let (t, k) = (hour(p), sub(p));
                let on = if us.commitment[t - 1] { 1.0 } else { 0.0 };
                let x = us.power[s][p];
                c.within(Family::Capacity, x, unit.p_min * on, unit.p_max * on, || {
                    format!("unit={} t={t} k={k} s={s}", unit.id)
                });
                let prev = if p == 0 { unit.initial_power } else { us.power[s][p - 1] };
                c.within(Family::Ramp, x - prev, -unit.ramp_down, unit.ramp_up, || {
                    format!("unit={} t={t} k={k} s={s}", unit.id)
                });
            }
        }
        let carried = unit.initial_status.unsigned_abs() as usize;
        for (state, need) in [(true, unit.min_up), (false, unit.min_down)] {
            let history = if (unit.initial_status > 0) == state { carried } else { 0 };
            for (start, len, to_end) in runs(&us.commitment, state, history) {
                if !to_end && len < need {
                    c.over(Family::UpDown, (need - len) as f64, || {
                        format!(
                            "unit={} {} run from t={start} lasts {len} h, needs {need} h",
                            unit.id,
                            if state { "on" } else { "off" }
                        )
                    });
                }
            }
        }
    }

    for (st, ss) in inst.storages.iter().zip(&sch.storages) {
        for t in 1..=big_t {
            if ss.discharging[t - 1] && ss.charging[t - 1] {
                c.over(Family::Storage, 1.0, || format!("storage={} t={t} charges and discharges", st.id));
            }
        }
        for s in 0..scen.len() {
            let mut before = st.initial_energy;
            for p in 0..n {
                let (t, k) = (hour(p), sub(p));
                let at = || format!("storage={} t={t} k={k} s={s}", st.id);
                let u = if ss.discharging[t - 1] { 1.0 } else { 0.0 };
                let v = if ss.charging[t - 1] { 1.0 } else { 0.0 };
                let (dch, ch, e) = (ss.discharge[s][p], ss.charge[s][p], ss.energy[s][p]);
                c.within(Family::Storage, dch, st.discharge_min * u, st.discharge_max * u, at);
                c.within(Family::Storage, ch, st.charge_min * v, st.charge_max * v, at);
                let expected = before - dch * tau / st.efficiency + ch * tau;
                c.equal(Family::Storage, e, expected, || format!("soc {}", at()));
                c.within(Family::Storage, e, st.energy_min, st.energy_max, || format!("capacity {}", at()));
                before = e;
            }
            let last = ss.energy[s][n - 1];
            let at = || format!("storage={} terminal s={s}", st.id);
            match st.terminal {
                TerminalPolicy::None => {}
                TerminalPolicy::AtLeastInitial => c.over(Family::Storage, st.initial_energy - last, at),
                TerminalPolicy::EqualInitial => c.equal(Family::Storage, last, st.initial_energy, at),
            }
        }
        for (seq, need, what) in [
            (&ss.charging, st.min_charge, "charging"),
            (&ss.discharging, st.min_discharge, "discharging"),
        ] {
            for (start, len, to_end) in runs(seq, true, 0) {
                if !to_end && len < need {
                    c.over(Family::Storage, (need - len) as f64, || {
                        format!("storage={} {what} run from t={start} lasts {len} h, needs {need} h", st.id)
                    });
                }
            }
        }
    }

    for (ld, ls) in inst.adjustable.iter().zip(&sch.loads) {
        let mut energy = 0.0;
        for p in 0..n {
            let t = hour(p);
            let inside = t >= ld.start && t <= ld.end;
            let z = if inside && ls.operating[t - 1] { 1.0 } else { 0.0 };
            c.within(Family::Adjustable, ls.demand[p], ld.d_min * z, ld.d_max * z, || {
                format!("load={} t={t} k={}", ld.id, sub(p))
            });
            energy += ls.demand[p] * tau;
        }
        for t in 1..=big_t {
            if ls.operating[t - 1] && !(t >= ld.start && t <= ld.end) {
                c.over(Family::Adjustable, 1.0, || format!("load={} operates at t={t} outside its window", ld.id));
            }
        }
        c.equal(Family::Adjustable, energy, ld.energy, || format!("load={} energy", ld.id));
        for (start, len, _) in runs(&ls.operating, true, 0) {
            if len < ld.min_on {
                c.over(Family::Adjustable, (ld.min_on - len) as f64, || {
                    format!("load={} run from t={start} lasts {len} h, needs {} h", ld.id, ld.min_on)
                });
            }
        }
    }

    for s in 0..scen.len() {
        let pm = &sch.exchange[s];
        let counted = |p1: usize, p2: usize| {
            inst.flex.enforce_while_islanded
                || !(scenario_islanded(scen, s, p1 + 1) || scenario_islanded(scen, s, p2 + 1))
        };

        if let Some(b) = envelope.first {
            if counted(0, 0) {
                c.within(Family::Flexibility, pm[0], b.low, b.up, || format!("initial s={s}"));
            }
        }
        for b in &envelope.inter {
            let (p1, p2) = ((b.t - 1) * big_k - 1, (b.t - 1) * big_k);
            if counted(p1, p2) {
                c.within(Family::Flexibility, pm[p2] - pm[p1], b.bound.low, b.bound.up, || {
                    format!("inter t={} s={s}", b.t)
                });
            }
        }
        for b in &envelope.intra {
            let p2 = (b.t - 1) * big_k + b.k - 1;
            if counted(p2 - 1, p2) {
                c.within(Family::Flexibility, pm[p2] - pm[p2 - 1], b.bound.low, b.bound.up, || {
                    format!("intra t={} k={} s={s}", b.t, b.k)
                });
            }
        }

        let feeder: Vec<f64> = (0..n).map(|p| pm[p] + prosumers[p]).collect();
        for p in 0..n {
            let (t, k) = (hour(p), sub(p));
            if k > 1 {
                if let Some(d1) = inst.flex.delta1 {
                    if counted(p - 1, p) {
                        c.over(Family::UtilityRamp, (feeder[p] - feeder[p - 1]).abs() - d1, || {
                            format!("intra t={t} k={k} s={s}")
                        });
                    }
                }
            } else if let Some(d2) = inst.flex.delta2 {
                if p > 0 {
                    if counted(p - 1, p) {
                        c.over(Family::UtilityRamp, (feeder[p] - feeder[p - 1]).abs() - d2, || {
                            format!("inter t={t} s={s}")
                        });
                    }
                } else if let Some(prev) = inst.previous_utility_power {
                    if counted(0, 0) {
                        c.over(Family::UtilityRamp, (feeder[0] - prev).abs() - d2, || format!("initial s={s}"));
                    }
                }
            }
        }
    }

    let max_residual = c.found.iter().map(|v| v.residual).fold(0.0, f64::max);
    Ok(ViolationReport {
        tol,
        pass: c.found.is_empty(),
        max_residual,
        violations: c.found,
    })
}

/// Feeder power `PM + sum of prosumer net load` per sub-period of scenario `s`.
pub fn utility_power(inst: &MicrogridInstance, schedule: &Schedule, s: usize) -> Vec<f64> {
    let mut out = schedule.exchange[s].clone();
    for series in inst.fixed_series.iter().filter(|x| x.kind == SeriesKind::ProsumerNetLoad) {
        for (o, v) in out.iter_mut().zip(&series.values) {
            *o += v;
        }
    }
    out
}
