//! Mixed-integer linear programming toolkit used by the scheduler.
//!
//! * [`MilpModel`]: sparse rows, bounded columns, binary marks.
//! * [`lp`]: the relaxation engine interface, with a sparse engine
//!   ([`SparseSimplex`]) and a dense bounded-variable simplex ([`DenseSimplex`]).
//! * [`bnb`]: branch-and-bound on binaries.
//! * [`mps`]: MPS export/import.

pub mod bnb;
pub mod dense;
pub mod error;
pub mod lp;
pub mod model;
pub mod mps;
pub mod sparse;

pub use bnb::{
    relative_gap, solve_lp, solve_milp, solve_milp_with, Branching, Incumbent, LogLine,
    NodeOrder, SolveOptions, SolveResult, SolveStatus,
};
pub use dense::DenseSimplex;
pub use error::{ModelError, MpsError};
pub use lp::{solve_relaxation, LpBackend, LpEngine, LpSession, LpSolution, LpStatus};
pub use model::{Column, ColumnKind, MilpModel, ModelStats, Row, Sense, Violation};
pub use mps::{parse_mps, write_mps, MpsExport, Rename};
pub use sparse::SparseSimplex;
