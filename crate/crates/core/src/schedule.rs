use serde::{Deserialize, Serialize};

use crate::builder::BuiltModel;
use crate::error::{CoreError, Result};
use crate::index::{Symbol, VarKey};
use crate::instance::MicrogridInstance;
use crate::scenarios::ScenarioSet;

/// Per-scenario series are indexed `[s][flat (t, k)]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitSchedule {
    pub id: String,
    pub commitment: Vec<bool>,
    pub power: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StorageSchedule {
    pub id: String,
    pub discharging: Vec<bool>,
    pub charging: Vec<bool>,
    pub discharge: Vec<Vec<f64>>,
    pub charge: Vec<Vec<f64>>,
    pub energy: Vec<Vec<f64>>,
}

impl StorageSchedule {
    /// Net injection `Pdch - Pch`.
    pub fn net(&self, s: usize, p: usize) -> f64 {
        self.discharge[s][p] - self.charge[s][p]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadSchedule {
    pub id: String,
    /// One entry per hour of the horizon; false outside the permitted window.
    pub operating: Vec<bool>,
    /// One entry per sub-period; zero outside the permitted window.
    pub demand: Vec<f64>,
}

/// Objective terms recomputed from solution values, in $.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct CostBreakdown {
    pub generation: f64,
    pub startup: f64,
    pub shutdown: f64,
    pub energy_purchase: f64,
    /// Revenue from export, reported as a positive amount.
    pub energy_sale: f64,
    pub curtailment_penalty: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub name: String,
    pub periods: usize,
    pub subperiods: usize,
    pub psi: Vec<f64>,
    pub units: Vec<UnitSchedule>,
    pub storages: Vec<StorageSchedule>,
    pub loads: Vec<LoadSchedule>,
    pub exchange: Vec<Vec<f64>>,
    pub curtailment: Vec<Vec<f64>>,
    pub cost: CostBreakdown,
    pub objective: f64,
}

impl Schedule {
    pub fn scenarios(&self) -> usize {
        self.exchange.len()
    }

    /// Curtailed energy in scenario `s`, MWh.
    pub fn curtailed_energy(&self, s: usize) -> f64 {
        self.curtailment[s].iter().sum::<f64>() / self.subperiods as f64
    }
}

/// Turns solver column values into a typed schedule and recomputes the cost.
pub fn extract_schedule(
    values: &[f64],
    built: &BuiltModel,
    inst: &MicrogridInstance,
    scen: &ScenarioSet,
) -> Result<Schedule> {
    let vi = &built.index;
    if values.len() != vi.len() {
        return Err(CoreError::Internal(format!(
            "index desync: {} values for {} columns",
            values.len(),
            vi.len()
        )));
    }
    let get = |key: VarKey| -> Result<f64> {
        vi.get(&key)
            .map(|j| values[j])
            .ok_or_else(|| CoreError::Internal(format!("index desync: no column for {key:?}")))
    };
    let on = |key: VarKey| -> Result<bool> { Ok(get(key)? > 0.5) };
    let g = inst.grid;
    let ns = scen.len();
    let kf = g.subperiods() as f64;
    let per_scenario = |sym: Symbol, owner: usize| -> Result<Vec<Vec<f64>>> {
        (0..ns)
            .map(|s| g.iter().map(|(t, k)| get(VarKey::new(sym, owner, t, k, s))).collect())
            .collect()
    };

    let mut cost = CostBreakdown::default();
    let mut units = Vec::new();
    for (i, u) in inst.units.iter().enumerate() {
        let commitment: Vec<bool> = (1..=g.periods())
            .map(|t| on(VarKey::hourly(Symbol::I, i, t)))
            .collect::<Result<_>>()?;
        let power = per_scenario(Symbol::P, i)?;
        let segs = u.cost.segments();
        for t in 1..=g.periods() {
            cost.generation += u.cost.no_load() * get(VarKey::hourly(Symbol::I, i, t))?;
            if u.startup_cost > 0.0 {
                cost.startup += u.startup_cost * get(VarKey::hourly(Symbol::SUvar, i, t))?;
            }
            if u.shutdown_cost > 0.0 {
                cost.shutdown += u.shutdown_cost * get(VarKey::hourly(Symbol::SDvar, i, t))?;
            }
            for k in 1..=g.subperiods() {
                if segs.len() == 1 {
                    cost.generation += segs[0].1 / kf * power[0][g.flat(t, k)];
                } else {
                    for (m, &(_, slope)) in segs.iter().enumerate() {
                        cost.generation += slope / kf * get(VarKey::segment(i, t, k, m + 1))?;
                    }
                }
            }
        }
        units.push(UnitSchedule {
            id: u.id.clone(),
            commitment,
            power,
        });
    }

    let mut storages = Vec::new();
    for (j, st) in inst.storages.iter().enumerate() {
        let hourly = |sym| -> Result<Vec<bool>> {
            (1..=g.periods()).map(|t| on(VarKey::hourly(sym, j, t))).collect()
        };
        storages.push(StorageSchedule {
            id: st.id.clone(),
            discharging: hourly(Symbol::U)?,
            charging: hourly(Symbol::V)?,
            discharge: per_scenario(Symbol::Pdch, j)?,
            charge: per_scenario(Symbol::Pch, j)?,
            energy: per_scenario(Symbol::C, j)?,
        });
    }

    let mut loads = Vec::new();
    for (d, ld) in inst.adjustable.iter().enumerate() {
        let operating = (1..=g.periods())
            .map(|t| if ld.allowed(t) { on(VarKey::hourly(Symbol::Z, d, t)) } else { Ok(false) })
            .collect::<Result<_>>()?;
        let demand = g
            .iter()
            .map(|(t, k)| if ld.allowed(t) { get(VarKey::new(Symbol::D, d, t, k, 0)) } else { Ok(0.0) })
            .collect::<Result<_>>()?;
        loads.push(LoadSchedule {
            id: ld.id.clone(),
            operating,
            demand,
        });
    }

    let exchange = (0..ns)
        .map(|s| g.iter().map(|(t, k)| get(VarKey::global(Symbol::PM, t, k, s))).collect())
        .collect::<Result<Vec<Vec<f64>>>>()?;
    let curtailment = (0..ns)
        .map(|s| g.iter().map(|(t, k)| get(VarKey::global(Symbol::LS, t, k, s))).collect())
        .collect::<Result<Vec<Vec<f64>>>>()?;

    for (p, &pm) in exchange[0].iter().enumerate() {
        let (t, _) = g.tk(p);
        let amount = inst.prices.rho[t - 1] / kf * pm;
        if amount >= 0.0 {
            cost.energy_purchase += amount;
        } else {
            cost.energy_sale -= amount;
        }
    }
    for (s, ls) in curtailment.iter().enumerate() {
        let w = scen.psi(s) * inst.voll / kf;
        cost.curtailment_penalty += ls.iter().map(|x| w * x).sum::<f64>();
    }
    cost.total = cost.generation + cost.startup + cost.shutdown + cost.energy_purchase - cost.energy_sale
        + cost.curtailment_penalty;

    let objective = built.model.objective_value(values);
    if (cost.total - objective).abs() > 1e-6 * (1.0 + objective.abs()) {
        return Err(CoreError::Internal(format!(
            "cost breakdown {} disagrees with objective {objective}",
            cost.total
        )));
    }

    Ok(Schedule {
        name: inst.name.clone(),
        periods: g.periods(),
        subperiods: g.subperiods(),
        psi: scen.scenarios.iter().map(|s| s.psi).collect(),
        units,
        storages,
        loads,
        exchange,
        curtailment,
        cost,
        objective,
    })
}
