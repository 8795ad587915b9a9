//! Flexibility-oriented day-ahead microgrid scheduling.
//!
//! The pipeline is: validate a [`MicrogridInstance`], derive the feeder
//! [`FlexibilityEnvelope`] and the islanding [`ScenarioSet`], [`assemble`] the
//! MILP, solve it with `mgflex-milp`, then [`extract_schedule`] and check the
//! result with the independent [`check_schedule`].

pub mod brute;
pub mod builder;
pub mod case;
pub mod envelope;
pub mod error;
pub mod grid;
pub mod index;
pub mod instance;
pub mod pipeline;
pub mod report;
pub mod scenarios;
pub mod schedule;
pub mod sweep;
pub mod symbols;
pub mod validator;

pub use builder::{assemble, BuiltModel};
pub use envelope::{build_envelope, FlexibilityEnvelope, NetLoadSeries};
pub use error::{CoreError, Result};
pub use grid::{make_time_grid, TimeGrid};
pub use index::{Symbol, VarKey, VariableIndex};
pub use instance::*;
pub use scenarios::{generate_scenarios, generate_scenarios_with, ScenarioOptions, ScenarioSet};
pub use brute::{brute_force_optimum, BruteForce, BRUTE_FORCE_LIMIT};
pub use pipeline::{prepare, solve_instance, solve_prepared, Outcome, Prepared};
pub use schedule::{extract_schedule, CostBreakdown, Schedule};
pub use validator::{check_schedule, utility_power, Family, ViolationReport};
pub use case::load_case;
pub use report::{emit_solve_reports, emit_sweep_reports, schedule_table_csv};
pub use sweep::{compute_incentives, read_table_csv, run_sweep, run_sweep_with, CellStatus, IncentiveTable, SweepCell, SweepResult};
