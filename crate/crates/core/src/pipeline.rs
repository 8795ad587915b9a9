use mgflex_milp::{solve_milp, SolveOptions, SolveResult, SolveStatus};
use serde::Serialize;

use crate::builder::{assemble, BuildStats, BuiltModel};
use crate::envelope::{build_envelope, FlexibilityEnvelope};
use crate::error::Result;
use crate::instance::ValidatedInstance;
use crate::scenarios::{generate_scenarios_with, ScenarioOptions, ScenarioSet};
use crate::schedule::{extract_schedule, Schedule};
use crate::validator::{check_schedule, ViolationReport};

/// Default absolute tolerance for the post-solve schedule check.
pub const VALIDATION_TOL: f64 = 1e-6;

/// Everything derived from an instance before solving.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub instance: ValidatedInstance,
    pub envelope: FlexibilityEnvelope,
    pub scenarios: ScenarioSet,
    pub built: BuiltModel,
}

pub fn scenarios_for(inst: &ValidatedInstance) -> Result<ScenarioSet> {
    let opts = ScenarioOptions {
        stride: inst.scenario_stride,
        overrides: inst.psi_overrides.clone(),
    };
    generate_scenarios_with(inst.grid, inst.islanding_k, inst.psi_base, &opts)
}

pub fn prepare(inst: &ValidatedInstance) -> Result<Prepared> {
    let envelope = build_envelope(inst)?;
    let scenarios = scenarios_for(inst)?;
    let built = assemble(inst, &envelope, &scenarios)?;
    Ok(Prepared {
        instance: inst.clone(),
        envelope,
        scenarios,
        built,
    })
}

impl Prepared {
    pub fn stats(&self) -> BuildStats {
        self.built.stats(&self.scenarios)
    }

    pub fn schedule(&self, values: &[f64]) -> Result<Schedule> {
        extract_schedule(values, &self.built, &self.instance, &self.scenarios)
    }

    pub fn check(&self, schedule: &Schedule, tol: f64) -> Result<ViolationReport> {
        check_schedule(&self.instance, &self.scenarios, &self.envelope, schedule, tol)
    }
}

/// A solve with its validated schedule, when one was found.
#[derive(Debug, Clone, Serialize)]
pub struct Outcome {
    pub result: SolveResult,
    pub schedule: Option<Schedule>,
    pub report: Option<ViolationReport>,
}

impl Outcome {
    /// True when a schedule exists and passed the independent check.
    pub fn validated(&self) -> bool {
        self.report.as_ref().is_some_and(|r| r.pass)
    }

    pub fn solved(&self) -> bool {
        matches!(self.result.status, SolveStatus::OptimalWithinGap | SolveStatus::LimitReached)
            && self.schedule.is_some()
    }
}

/// Solves a prepared model and checks the returned schedule.
pub fn solve_prepared(prep: &Prepared, opts: &SolveOptions) -> Result<Outcome> {
    let result = solve_milp(&prep.built.model, opts);
    let mut outcome = Outcome {
        result,
        schedule: None,
        report: None,
    };
    if let Some(values) = outcome.result.values.as_deref() {
        let schedule = prep.schedule(values)?;
        outcome.report = Some(prep.check(&schedule, VALIDATION_TOL)?);
        outcome.schedule = Some(schedule);
    }
    Ok(outcome)
}

pub fn solve_instance(inst: &ValidatedInstance, opts: &SolveOptions) -> Result<(Prepared, Outcome)> {
    let prep = prepare(inst)?;
    let out = solve_prepared(&prep, opts)?;
    Ok((prep, out))
}
