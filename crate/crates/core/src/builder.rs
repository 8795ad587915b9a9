//! Assembles the day-ahead stochastic MILP.
//!
//! Columns are declared first, sorted by `(symbol, owner, t, k, s)`, then each
//! sub-builder emits rows against the finished index. Row names start with a
//! family tag followed by `_`, which the infeasibility hint reports.

use std::collections::BTreeMap;

use mgflex_milp::{ColumnKind, MilpModel, ModelStats, Sense};
use serde::Serialize;

use crate::envelope::FlexibilityEnvelope;
use crate::error::{CoreError, Result};
use crate::index::{Symbol, VarKey, VariableIndex};
use crate::instance::{MicrogridInstance, SeriesKind, TerminalPolicy, ValidatedInstance};
use crate::scenarios::ScenarioSet;

#[derive(Debug, Clone, PartialEq)]
pub struct RowSpec {
    pub name: String,
    pub coeffs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl RowSpec {
    fn new(name: String, coeffs: Vec<(usize, f64)>, sense: Sense, rhs: f64) -> Self {
        Self {
            name,
            coeffs,
            sense,
            rhs,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BuiltModel {
    pub model: MilpModel,
    pub index: VariableIndex,
}

#[derive(Debug, Clone, Serialize)]
pub struct BuildStats {
    #[serde(flatten)]
    pub model: ModelStats,
    pub scenarios: usize,
    pub rows_by_family: BTreeMap<String, usize>,
}

impl BuiltModel {
    pub fn stats(&self, scen: &ScenarioSet) -> BuildStats {
        let mut rows_by_family = BTreeMap::new();
        for r in &self.model.rows {
            let fam = r.name.split('_').next().unwrap_or("").to_string();
            *rows_by_family.entry(fam).or_insert(0) += 1;
        }
        BuildStats {
            model: self.model.stats(),
            scenarios: scen.len(),
            rows_by_family,
        }
    }

    pub fn col(&self, key: VarKey) -> usize {
        self.index.col(key)
    }
}

/// Id of the component owning `key`, empty for system-wide families.
pub fn owner_id<'a>(inst: &'a MicrogridInstance, key: &VarKey) -> &'a str {
    match key.symbol {
        Symbol::P | Symbol::I | Symbol::Seg | Symbol::SUvar | Symbol::SDvar => &inst.units[key.owner].id,
        Symbol::Pdch | Symbol::Pch | Symbol::C | Symbol::U | Symbol::V => &inst.storages[key.owner].id,
        Symbol::Z | Symbol::D => &inst.adjustable[key.owner].id,
        Symbol::PM | Symbol::LS => "",
    }
}

/// Total load at flat index `p` if every adjustable load ran at its maximum.
fn curtailable_demand(inst: &MicrogridInstance, p: usize) -> f64 {
    let (t, _) = inst.grid.tk(p);
    let fixed: f64 = inst.series(SeriesKind::FixedLoad).map(|s| s.values[p]).sum();
    fixed
        + inst
            .adjustable
            .iter()
            .filter(|d| d.allowed(t))
            .map(|d| d.d_max)
            .sum::<f64>()
}

/// Column bounds for every variable, in sorted key order.
pub fn declare_columns(inst: &MicrogridInstance, scen: &ScenarioSet) -> (VariableIndex, Vec<(f64, f64)>) {
    let g = inst.grid;
    let ns = scen.len();
    let mut cols: BTreeMap<VarKey, (f64, f64)> = BTreeMap::new();
    let mut put = |k: VarKey, lo: f64, up: f64| {
        cols.insert(k, (lo, up));
    };

    for (i, u) in inst.units.iter().enumerate() {
        let (forced, on) = u.forced_prefix();
        let segs = u.cost.segments();
        for t in 1..=g.periods() {
            let fixed = if t <= forced { Some(on as u8 as f64) } else { None };
            let (lo, up) = fixed.map_or((0.0, 1.0), |v| (v, v));
            put(VarKey::hourly(Symbol::I, i, t), lo, up);
            if u.startup_cost > 0.0 {
                put(VarKey::hourly(Symbol::SUvar, i, t), 0.0, 1.0);
            }
            if u.shutdown_cost > 0.0 {
                put(VarKey::hourly(Symbol::SDvar, i, t), 0.0, 1.0);
            }
            for k in 1..=g.subperiods() {
                for s in 0..ns {
                    put(VarKey::new(Symbol::P, i, t, k, s), 0.0, u.p_max);
                }
                if segs.len() > 1 {
                    for (m, &(width, _)) in segs.iter().enumerate() {
                        put(VarKey::segment(i, t, k, m + 1), 0.0, width);
                    }
                }
            }
        }
    }

    for (j, st) in inst.storages.iter().enumerate() {
        for t in 1..=g.periods() {
            put(VarKey::hourly(Symbol::U, j, t), 0.0, 1.0);
            put(VarKey::hourly(Symbol::V, j, t), 0.0, 1.0);
            for k in 1..=g.subperiods() {
                for s in 0..ns {
                    put(VarKey::new(Symbol::Pdch, j, t, k, s), 0.0, st.discharge_max);
                    put(VarKey::new(Symbol::Pch, j, t, k, s), 0.0, st.charge_max);
                    put(VarKey::new(Symbol::C, j, t, k, s), st.energy_min, st.energy_max);
                }
            }
        }
    }

    for (d, ld) in inst.adjustable.iter().enumerate() {
        for t in ld.start..=ld.end {
            put(VarKey::hourly(Symbol::Z, d, t), 0.0, 1.0);
            for k in 1..=g.subperiods() {
                put(VarKey::new(Symbol::D, d, t, k, 0), 0.0, ld.d_max);
            }
        }
    }

    for p in 0..g.horizon() {
        let (t, k) = g.tk(p);
        let ls_max = if inst.allow_curtailment {
            curtailable_demand(inst, p).max(0.0)
        } else {
            0.0
        };
        for s in 0..ns {
            let pm = if scen.w(p, s) { inst.pm_max } else { 0.0 };
            put(VarKey::global(Symbol::PM, t, k, s), -pm, pm);
            put(VarKey::global(Symbol::LS, t, k, s), 0.0, ls_max);
        }
    }

    let (keys, bounds): (Vec<VarKey>, Vec<(f64, f64)>) = cols.into_iter().unzip();
    (VariableIndex::from_sorted(keys), bounds)
}

/// Objective coefficients: scenario-0 generation and purchase cost plus
/// probability-weighted curtailment in every scenario.
pub fn build_objective(inst: &MicrogridInstance, scen: &ScenarioSet, vi: &VariableIndex) -> Result<Vec<(usize, f64)>> {
    let g = inst.grid;
    let kf = g.subperiods() as f64;
    if inst.prices.rho.len() != g.periods() {
        return Err(CoreError::InvalidArgument(format!(
            "{} prices for {} hours",
            inst.prices.rho.len(),
            g.periods()
        )));
    }
    let mut obj = Vec::new();
    for (i, u) in inst.units.iter().enumerate() {
        let segs = u.cost.segments();
        for t in 1..=g.periods() {
            obj.push((vi.col(VarKey::hourly(Symbol::I, i, t)), u.cost.no_load()));
            if u.startup_cost > 0.0 {
                obj.push((vi.col(VarKey::hourly(Symbol::SUvar, i, t)), u.startup_cost));
            }
            if u.shutdown_cost > 0.0 {
                obj.push((vi.col(VarKey::hourly(Symbol::SDvar, i, t)), u.shutdown_cost));
            }
            for k in 1..=g.subperiods() {
                if segs.len() == 1 {
                    obj.push((vi.col(VarKey::new(Symbol::P, i, t, k, 0)), segs[0].1 / kf));
                } else {
                    for (m, &(_, slope)) in segs.iter().enumerate() {
                        obj.push((vi.col(VarKey::segment(i, t, k, m + 1)), slope / kf));
                    }
                }
            }
        }
    }
    for (t, k) in g.iter() {
        obj.push((vi.col(VarKey::global(Symbol::PM, t, k, 0)), inst.prices.rho[t - 1] / kf));
        for s in 0..scen.len() {
            obj.push((vi.col(VarKey::global(Symbol::LS, t, k, s)), scen.psi(s) * inst.voll / kf));
        }
    }
    Ok(obj)
}

/// Power balance per `(t, k, s)` and the cap of curtailment by served demand.
pub fn build_balance(inst: &MicrogridInstance, scen: &ScenarioSet, vi: &VariableIndex) -> Vec<RowSpec> {
    let g = inst.grid;
    let mut rows = Vec::new();
    for p in 0..g.horizon() {
        let (t, k) = g.tk(p);
        let fixed: f64 = inst.series(SeriesKind::FixedLoad).map(|s| s.values[p]).sum();
        let rhs = inst.net_fixed_demand(p);
        let active: Vec<usize> = (0..inst.adjustable.len())
            .filter(|&d| inst.adjustable[d].allowed(t))
            .collect();
        for s in 0..scen.len() {
            let mut c = Vec::new();
            for i in 0..inst.units.len() {
                c.push((vi.col(VarKey::new(Symbol::P, i, t, k, s)), 1.0));
            }
            for j in 0..inst.storages.len() {
                c.push((vi.col(VarKey::new(Symbol::Pdch, j, t, k, s)), 1.0));
                c.push((vi.col(VarKey::new(Symbol::Pch, j, t, k, s)), -1.0));
            }
            let pm = vi.col(VarKey::global(Symbol::PM, t, k, s));
            let ls = vi.col(VarKey::global(Symbol::LS, t, k, s));
            c.push((pm, 1.0));
            c.push((ls, 1.0));
            for &d in &active {
                c.push((vi.col(VarKey::new(Symbol::D, d, t, k, 0)), -1.0));
            }
            rows.push(RowSpec::new(format!("balance_t{t}_k{k}_s{s}"), c, Sense::Eq, rhs));
            if inst.allow_curtailment && !active.is_empty() {
                let mut c = vec![(ls, 1.0)];
                for &d in &active {
                    c.push((vi.col(VarKey::new(Symbol::D, d, t, k, 0)), -1.0));
                }
                rows.push(RowSpec::new(format!("lscap_t{t}_k{k}_s{s}"), c, Sense::Le, fixed));
            }
        }
    }
    rows
}

/// Whether a flexibility pair between flat positions is enforced in scenario `s`.
pub fn pair_enforced(inst: &MicrogridInstance, scen: &ScenarioSet, s: usize, p1: usize, p2: usize) -> bool {
    inst.flex.enforce_while_islanded || (scen.w(p1, s) && scen.w(p2, s))
}

fn bound_rows(rows: &mut Vec<RowSpec>, name: String, coeffs: Vec<(usize, f64)>, low: f64, up: f64) {
    if low == up {
        rows.push(RowSpec::new(name, coeffs, Sense::Eq, low));
    } else {
        rows.push(RowSpec::new(format!("{name}_lo"), coeffs.clone(), Sense::Ge, low));
        rows.push(RowSpec::new(format!("{name}_up"), coeffs, Sense::Le, up));
    }
}

/// Flexibility rows on grid-exchange steps. Exchange limits themselves are column bounds.
pub fn build_grid_exchange(
    inst: &MicrogridInstance,
    scen: &ScenarioSet,
    env: &FlexibilityEnvelope,
    vi: &VariableIndex,
) -> Vec<RowSpec> {
    let g = inst.grid;
    let kk = g.subperiods();
    let pm = |t, k, s| vi.col(VarKey::global(Symbol::PM, t, k, s));
    let mut rows = Vec::new();
    for s in 0..scen.len() {
        if let Some(b) = env.first {
            if pair_enforced(inst, scen, s, 0, 0) {
                bound_rows(&mut rows, format!("flexinit_s{s}"), vec![(pm(1, 1, s), 1.0)], b.low, b.up);
            }
        }
        for b in &env.inter {
            let (p1, p2) = (g.flat(b.t - 1, kk), g.flat(b.t, 1));
            if pair_enforced(inst, scen, s, p1, p2) {
                let c = vec![(pm(b.t, 1, s), 1.0), (pm(b.t - 1, kk, s), -1.0)];
                bound_rows(&mut rows, format!("flexinter_t{}_s{s}", b.t), c, b.bound.low, b.bound.up);
            }
        }
        for b in &env.intra {
            let (p1, p2) = (g.flat(b.t, b.k - 1), g.flat(b.t, b.k));
            if pair_enforced(inst, scen, s, p1, p2) {
                let c = vec![(pm(b.t, b.k, s), 1.0), (pm(b.t, b.k - 1, s), -1.0)];
                bound_rows(
                    &mut rows,
                    format!("flexintra_t{}_k{}_s{s}", b.t, b.k),
                    c,
                    b.bound.low,
                    b.bound.up,
                );
            }
        }
    }
    rows
}

/// `sum_{t'=t}^{t+L-1} x[t'] >= n * (x[t] - x[t-1])` for each `t` in `first..=last`,
/// with the window truncated at `last`; `x[first-1]` is the constant `x0`.
/// `n` is the full duration when `strict_end`, else the truncated length.
#[allow(clippy::too_many_arguments)]
fn window_rows(
    rows: &mut Vec<RowSpec>,
    tag: &str,
    col: &dyn Fn(usize) -> usize,
    first: usize,
    last: usize,
    duration: usize,
    x0: f64,
    strict_end: bool,
    invert: bool,
) {
    if duration <= 1 {
        return;
    }
    for t in first..=last {
        let len = duration.min(last - t + 1);
        if len <= 1 && !strict_end {
            continue;
        }
        let n = if strict_end { duration } else { len } as f64;
        // Up form: sum x - n x_t + n x_{t-1} >= 0.
        // Down form on y = 1 - x: -sum x + n x_t - n x_{t-1} >= -len.
        let sign = if invert { -1.0 } else { 1.0 };
        let mut c: Vec<(usize, f64)> = (t..t + len).map(|tp| (col(tp), sign)).collect();
        c.push((col(t), -sign * n));
        let mut rhs = if invert { -(len as f64) } else { 0.0 };
        if t == first {
            rhs -= sign * n * x0;
        } else {
            c.push((col(t - 1), sign * n));
        }
        rows.push(RowSpec::new(format!("{tag}_t{t}"), c, Sense::Ge, rhs));
    }
}

/// Capacity, ramps, minimum up/down times, start/stop indicators and cost segments.
pub fn build_dispatchable(inst: &MicrogridInstance, scen: &ScenarioSet, vi: &VariableIndex) -> Vec<RowSpec> {
    let g = inst.grid;
    let kk = g.subperiods();
    let mut rows = Vec::new();
    for (i, u) in inst.units.iter().enumerate() {
        let id = &u.id;
        let ic = |t| vi.col(VarKey::hourly(Symbol::I, i, t));
        let i0 = if u.initially_on() { 1.0 } else { 0.0 };
        for (t, k) in g.iter() {
            for s in 0..scen.len() {
                let p = vi.col(VarKey::new(Symbol::P, i, t, k, s));
                rows.push(RowSpec::new(
                    format!("capmax_{id}_t{t}_k{k}_s{s}"),
                    vec![(p, 1.0), (ic(t), -u.p_max)],
                    Sense::Le,
                    0.0,
                ));
                if u.p_min > 0.0 {
                    rows.push(RowSpec::new(
                        format!("capmin_{id}_t{t}_k{k}_s{s}"),
                        vec![(p, 1.0), (ic(t), -u.p_min)],
                        Sense::Ge,
                        0.0,
                    ));
                }
                let (coeffs, rhs_shift) = if t == 1 && k == 1 {
                    (vec![(p, 1.0)], u.initial_power)
                } else {
                    let (tp, kp) = if k == 1 { (t - 1, kk) } else { (t, k - 1) };
                    (
                        vec![(p, 1.0), (vi.col(VarKey::new(Symbol::P, i, tp, kp, s)), -1.0)],
                        0.0,
                    )
                };
                rows.push(RowSpec::new(
                    format!("rampup_{id}_t{t}_k{k}_s{s}"),
                    coeffs.clone(),
                    Sense::Le,
                    u.ramp_up + rhs_shift,
                ));
                rows.push(RowSpec::new(
                    format!("rampdn_{id}_t{t}_k{k}_s{s}"),
                    coeffs,
                    Sense::Ge,
                    -u.ramp_down + rhs_shift,
                ));
            }
            let segs = u.cost.segments();
            if segs.len() > 1 {
                let mut c = vec![(vi.col(VarKey::new(Symbol::P, i, t, k, 0)), 1.0)];
                for m in 1..=segs.len() {
                    c.push((vi.col(VarKey::segment(i, t, k, m)), -1.0));
                }
                rows.push(RowSpec::new(format!("seglink_{id}_t{t}_k{k}"), c, Sense::Eq, 0.0));
            }
        }
        window_rows(&mut rows, &format!("minup_{id}"), &ic, 1, g.periods(), u.min_up, i0, false, false);
        window_rows(&mut rows, &format!("mindn_{id}"), &ic, 1, g.periods(), u.min_down, i0, false, true);
        for t in 1..=g.periods() {
            // SU_t >= I_t - I_{t-1}; SD_t >= I_{t-1} - I_t.
            for (sym, on_sign, tag) in [(Symbol::SUvar, -1.0, "su"), (Symbol::SDvar, 1.0, "sd")] {
                let Some(y) = vi.get(&VarKey::hourly(sym, i, t)) else {
                    continue;
                };
                let mut c = vec![(y, 1.0), (ic(t), on_sign)];
                let rhs = if t == 1 {
                    on_sign * i0
                } else {
                    c.push((ic(t - 1), -on_sign));
                    0.0
                };
                rows.push(RowSpec::new(format!("{tag}_{id}_t{t}"), c, Sense::Ge, rhs));
            }
        }
    }
    rows
}

/// Charge/discharge limits, exclusivity, state of charge, minimum durations, terminal energy.
pub fn build_storage(inst: &MicrogridInstance, scen: &ScenarioSet, vi: &VariableIndex) -> Vec<RowSpec> {
    let g = inst.grid;
    let kf = g.subperiods() as f64;
    let mut rows = Vec::new();
    for (j, st) in inst.storages.iter().enumerate() {
        let id = &st.id;
        let uc = |t| vi.col(VarKey::hourly(Symbol::U, j, t));
        let vc = |t| vi.col(VarKey::hourly(Symbol::V, j, t));
        for t in 1..=g.periods() {
            rows.push(RowSpec::new(
                format!("excl_{id}_t{t}"),
                vec![(uc(t), 1.0), (vc(t), 1.0)],
                Sense::Le,
                1.0,
            ));
        }
        for (t, k) in g.iter() {
            for s in 0..scen.len() {
                let dch = vi.col(VarKey::new(Symbol::Pdch, j, t, k, s));
                let ch = vi.col(VarKey::new(Symbol::Pch, j, t, k, s));
                let lim = [
                    ("dchmax", dch, uc(t), st.discharge_max, Sense::Le),
                    ("dchmin", dch, uc(t), st.discharge_min, Sense::Ge),
                    ("chmax", ch, vc(t), st.charge_max, Sense::Le),
                    ("chmin", ch, vc(t), st.charge_min, Sense::Ge),
                ];
                for (tag, x, b, cap, sense) in lim {
                    if sense == Sense::Ge && cap == 0.0 {
                        continue;
                    }
                    rows.push(RowSpec::new(
                        format!("{tag}_{id}_t{t}_k{k}_s{s}"),
                        vec![(x, 1.0), (b, -cap)],
                        sense,
                        0.0,
                    ));
                }
                // C = C_prev - Pdch * tau / eta + Pch * tau
                let c = vi.col(VarKey::new(Symbol::C, j, t, k, s));
                let mut coeffs = vec![(c, 1.0), (dch, 1.0 / (kf * st.efficiency)), (ch, -1.0 / kf)];
                let rhs = if t == 1 && k == 1 {
                    st.initial_energy
                } else {
                    let (tp, kp) = if k == 1 { (t - 1, g.subperiods()) } else { (t, k - 1) };
                    coeffs.push((vi.col(VarKey::new(Symbol::C, j, tp, kp, s)), -1.0));
                    0.0
                };
                rows.push(RowSpec::new(format!("soc_{id}_t{t}_k{k}_s{s}"), coeffs, Sense::Eq, rhs));
            }
        }
        window_rows(&mut rows, &format!("minch_{id}"), &vc, 1, g.periods(), st.min_charge, 0.0, false, false);
        window_rows(&mut rows, &format!("mindch_{id}"), &uc, 1, g.periods(), st.min_discharge, 0.0, false, false);
        let sense = match st.terminal {
            TerminalPolicy::None => None,
            TerminalPolicy::AtLeastInitial => Some(Sense::Ge),
            TerminalPolicy::EqualInitial => Some(Sense::Eq),
        };
        if let Some(sense) = sense {
            for s in 0..scen.len() {
                let c = vi.col(VarKey::new(Symbol::C, j, g.periods(), g.subperiods(), s));
                rows.push(RowSpec::new(format!("terminal_{id}_s{s}"), vec![(c, 1.0)], sense, st.initial_energy));
            }
        }
    }
    rows
}

/// Operating limits, minimum operating time and required energy of adjustable loads.
pub fn build_adjustable(inst: &MicrogridInstance, vi: &VariableIndex) -> Vec<RowSpec> {
    let g = inst.grid;
    let kf = g.subperiods() as f64;
    let mut rows = Vec::new();
    for (d, ld) in inst.adjustable.iter().enumerate() {
        let id = &ld.id;
        let zc = |t| vi.col(VarKey::hourly(Symbol::Z, d, t));
        let mut energy = Vec::new();
        for t in ld.start..=ld.end {
            for k in 1..=g.subperiods() {
                let x = vi.col(VarKey::new(Symbol::D, d, t, k, 0));
                rows.push(RowSpec::new(
                    format!("dmax_{id}_t{t}_k{k}"),
                    vec![(x, 1.0), (zc(t), -ld.d_max)],
                    Sense::Le,
                    0.0,
                ));
                if ld.d_min > 0.0 {
                    rows.push(RowSpec::new(
                        format!("dmin_{id}_t{t}_k{k}"),
                        vec![(x, 1.0), (zc(t), -ld.d_min)],
                        Sense::Ge,
                        0.0,
                    ));
                }
                energy.push((x, 1.0 / kf));
            }
        }
        window_rows(&mut rows, &format!("minon_{id}"), &zc, ld.start, ld.end, ld.min_on, 0.0, true, false);
        rows.push(RowSpec::new(format!("energy_{id}"), energy, Sense::Eq, ld.energy));
    }
    rows
}

/// Full model over a validated instance, its envelope and scenario set.
pub fn assemble(inst: &ValidatedInstance, env: &FlexibilityEnvelope, scen: &ScenarioSet) -> Result<BuiltModel> {
    if scen.grid != inst.grid {
        return Err(CoreError::InvalidArgument("scenario grid differs from instance grid".into()));
    }
    let (index, bounds) = declare_columns(inst, scen);
    let objective = build_objective(inst, scen, &index)?;
    let (balance, (exchange, (units, (storage, adjustable)))) = rayon::join(
        || build_balance(inst, scen, &index),
        || {
            rayon::join(
                || build_grid_exchange(inst, scen, env, &index),
                || {
                    rayon::join(
                        || build_dispatchable(inst, scen, &index),
                        || (build_storage(inst, scen, &index), build_adjustable(inst, &index)),
                    )
                },
            )
        },
    );

    let mut model = MilpModel::new(inst.name.clone());
    for (j, key) in index.keys().iter().enumerate() {
        let (lo, up) = bounds[j];
        let kind = if key.symbol.is_binary() {
            ColumnKind::Binary
        } else {
            ColumnKind::Continuous
        };
        model.add_column(key.name(owner_id(inst, key)), lo, up, 0.0, kind);
    }
    for (j, c) in objective {
        model.columns[j].cost += c;
    }
    for r in [balance, units, storage, adjustable, exchange].into_iter().flatten() {
        model.add_row(r.name, r.coeffs, r.sense, r.rhs);
    }
    model
        .check()
        .map_err(|e| CoreError::Internal(format!("assembled model is malformed: {e}")))?;
    Ok(BuiltModel { model, index })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envelope::build_envelope;
    use crate::grid::TimeGrid;
    use crate::instance::{validate_instance, CostCurve, DispatchableUnit, FixedSeries, FlexibilitySpec, MarketPrice, StorageUnit};
    use crate::scenarios::generate_scenarios;

    fn unit(id: &str) -> DispatchableUnit {
        DispatchableUnit {
            id: id.into(),
            p_min: 0.0,
            p_max: 5.0,
            ramp_up: 5.0,
            ramp_down: 5.0,
            min_up: 1,
            min_down: 1,
            cost: CostCurve::linear(0.0, 50.0, 5.0),
            startup_cost: 0.0,
            shutdown_cost: 0.0,
            initial_status: -1,
            initial_power: 0.0,
        }
    }

    fn bare(t: usize, k: usize) -> MicrogridInstance {
        let grid = TimeGrid::new(t, k).unwrap();
        MicrogridInstance {
            name: "bare".into(),
            grid,
            units: vec![unit("g1")],
            storages: vec![],
            adjustable: vec![],
            fixed_series: vec![FixedSeries {
                id: "load".into(),
                kind: SeriesKind::FixedLoad,
                values: vec![2.0; grid.horizon()],
            }],
            prices: MarketPrice { rho: vec![30.0; t] },
            pm_max: 10.0,
            voll: 10000.0,
            flex: FlexibilitySpec::default(),
            previous_utility_power: None,
            islanding_k: 0,
            psi_base: 1.0,
            scenario_stride: 1,
            psi_overrides: Default::default(),
            allow_curtailment: true,
        }
    }

    fn build(raw: MicrogridInstance) -> (ValidatedInstance, ScenarioSet, BuiltModel) {
        let inst = validate_instance(raw).unwrap();
        let scen = generate_scenarios(inst.grid, inst.islanding_k, inst.psi_base).unwrap();
        let env = build_envelope(&inst).unwrap();
        let built = assemble(&inst, &env, &scen).unwrap();
        (inst, scen, built)
    }

    #[test]
    fn curtailment_and_linear_cost_coefficients() {
        let mut raw = bare(1, 6);
        raw.islanding_k = 1;
        raw.psi_base = 0.994;
        let (_, scen, b) = build(raw);
        assert!((scen.psi(1) - 0.001).abs() < 1e-15);
        let ls = b.col(VarKey::global(Symbol::LS, 1, 1, 1));
        assert!((b.model.columns[ls].cost - 10000.0 * 0.001 / 6.0).abs() < 1e-12);
        assert!((b.model.columns[ls].cost - 1.6667).abs() < 1e-4);
        let p = b.col(VarKey::new(Symbol::P, 0, 1, 3, 0));
        assert_eq!(b.model.columns[p].cost, 50.0 / 6.0);
        let p1 = b.col(VarKey::new(Symbol::P, 0, 1, 3, 1));
        assert_eq!(b.model.columns[p1].cost, 0.0);
    }

    #[test]
    fn objective_touches_only_dispatch_exchange_curtailment() {
        let (_, _, b) = build(bare(2, 2));
        for (j, c) in b.model.columns.iter().enumerate() {
            if c.cost != 0.0 {
                let sym = b.index.key(j).symbol;
                assert!(matches!(sym, Symbol::P | Symbol::PM | Symbol::LS), "{}", c.name);
            }
        }
    }

    #[test]
    fn balance_nets_nondispatchable_output() {
        let mut raw = bare(1, 1);
        raw.fixed_series[0].values = vec![3.0];
        raw.fixed_series.push(FixedSeries {
            id: "pv".into(),
            kind: SeriesKind::NondispatchableGeneration,
            values: vec![1.0],
        });
        let (_, _, b) = build(raw);
        let row = b.model.rows.iter().find(|r| r.name == "balance_t1_k1_s0").unwrap();
        assert_eq!(row.rhs, 2.0);
    }

    #[test]
    fn islanded_exchange_is_fixed_at_zero() {
        let mut raw = bare(2, 4);
        raw.islanding_k = 4;
        raw.psi_base = 0.9;
        let (_, _, b) = build(raw);
        for k in 1..=4 {
            // Scenario 5 islands positions 5..=8, i.e. hour 2.
            let c = &b.model.columns[b.col(VarKey::global(Symbol::PM, 2, k, 5))];
            assert_eq!((c.lower, c.upper), (0.0, 0.0));
            let c = &b.model.columns[b.col(VarKey::global(Symbol::PM, 1, k, 5))];
            assert_eq!((c.lower, c.upper), (-10.0, 10.0));
        }
    }

    #[test]
    fn flexibility_rows_only_when_limits_given() {
        let (_, _, b) = build(bare(2, 2));
        assert!(!b.model.rows.iter().any(|r| r.name.starts_with("flex")));
        let mut raw = bare(2, 2);
        raw.flex = FlexibilitySpec::limits(0.0, 1.0);
        let (_, _, b) = build(raw);
        let intra: Vec<_> = b.model.rows.iter().filter(|r| r.name.starts_with("flexintra")).collect();
        assert_eq!(intra.len(), 2);
        assert!(intra.iter().all(|r| r.sense == Sense::Eq && r.rhs == 0.0));
    }

    #[test]
    fn binary_counts() {
        let (_, _, b) = build(bare(2, 2));
        assert_eq!(b.model.stats().binaries, 2);
        let mut raw = bare(2, 2);
        raw.storages.push(StorageUnit {
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
        });
        let (_, _, b) = build(raw);
        assert_eq!(b.model.stats().binaries, 6);
    }

    #[test]
    fn deterministic_assembly() {
        let mut raw = crate::instance::tests::sample();
        raw.islanding_k = 2;
        let (_, _, a) = build(raw.clone());
        let (_, _, b) = build(raw);
        assert_eq!(a.model, b.model);
    }

    #[test]
    fn commitment_columns_have_no_scenario() {
        let mut raw = crate::instance::tests::sample();
        raw.islanding_k = 2;
        let (_, _, b) = build(raw);
        for key in b.index.keys() {
            if matches!(key.symbol, Symbol::I | Symbol::U | Symbol::V | Symbol::Z | Symbol::D) {
                assert_eq!(key.s, 0);
            }
            assert_eq!(b.model.columns[b.index.col(*key)].kind == ColumnKind::Binary, key.symbol.is_binary());
        }
        let ds = b.index.keys().iter().filter(|k| k.symbol == Symbol::D).count();
        assert_eq!(ds, 4);
        let ps = b.index.keys().iter().filter(|k| k.symbol == Symbol::P).count();
        assert_eq!(ps, 4 * 5);
    }

    #[test]
    fn columns_sorted_by_coordinate() {
        let (_, _, b) = build(crate::instance::tests::sample());
        assert!(b.index.keys().windows(2).all(|w| w[0] < w[1]));
    }
}
