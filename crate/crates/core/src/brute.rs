use mgflex_milp::{LpEngine, LpStatus, MilpModel};
use serde::Serialize;

use crate::builder::assemble;
use crate::envelope::FlexibilityEnvelope;
use crate::error::{CoreError, Result};
use crate::instance::ValidatedInstance;
use crate::scenarios::ScenarioSet;

/// Largest number of free binaries enumerated.
pub const BRUTE_FORCE_LIMIT: usize = 20;

#[derive(Debug, Clone, Serialize)]
pub struct BruteForce {
    /// `None` when no assignment is feasible.
    pub objective: Option<f64>,
    pub values: Option<Vec<f64>>,
    pub assignments: usize,
    pub feasible: usize,
}

/// Minimum over every binary assignment of the remaining LP.
pub fn brute_force_optimum(
    inst: &ValidatedInstance,
    scen: &ScenarioSet,
    envelope: &FlexibilityEnvelope,
    engine: &dyn LpEngine,
) -> Result<BruteForce> {
    let built = assemble(inst, envelope, scen)?;
    brute_force_model(&built.model, engine)
}

/// Enumerates binaries not already fixed by bounds, in Gray-code order.
pub fn brute_force_model(model: &MilpModel, engine: &dyn LpEngine) -> Result<BruteForce> {
    let free: Vec<usize> = model
        .binaries()
        .filter(|&j| model.columns[j].lower < model.columns[j].upper)
        .collect();
    if free.len() > BRUTE_FORCE_LIMIT {
        return Err(CoreError::TooManyBinaries {
            count: free.len(),
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    let fixed: Vec<(usize, f64)> = model
        .binaries()
        .filter(|&j| model.columns[j].lower == model.columns[j].upper)
        .map(|j| (j, model.columns[j].lower))
        .collect();
    let mut session = engine.open(model);
    let total = 1usize << free.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut feasible = 0;
    for i in 0..total {
        let gray = i ^ (i >> 1);
        let mut fix = fixed.clone();
        fix.extend(free.iter().enumerate().map(|(b, &j)| (j, ((gray >> b) & 1) as f64)));
        let lp = session.solve(&fix);
        match lp.status {
            LpStatus::Optimal => {
                feasible += 1;
                if best.as_ref().is_none_or(|(o, _)| lp.objective < *o) {
                    best = Some((lp.objective, lp.values));
                }
            }
            LpStatus::Infeasible => {}
            LpStatus::Unbounded => {
                return Err(CoreError::Internal("unbounded LP during enumeration".into()));
            }
            LpStatus::Failed => {
                return Err(CoreError::Internal(format!(
                    "LP failure during enumeration: {}",
                    lp.message.unwrap_or_default()
                )));
            }
        }
    }
    Ok(BruteForce {
        objective: best.as_ref().map(|b| b.0),
        values: best.map(|b| b.1),
        assignments: total,
        feasible,
    })
}
