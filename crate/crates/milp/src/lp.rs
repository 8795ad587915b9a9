//! LP relaxation engines.
//!
//! An engine opens a [`LpSession`] on a model; a session solves the continuous
//! relaxation repeatedly under different sets of fixed columns, which is all
//! branch-and-bound and the brute-force enumerator need.

use serde::{Deserialize, Serialize};

use crate::dense::DenseSimplex;
use crate::model::MilpModel;
use crate::sparse::SparseSimplex;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// Numerical breakdown or iteration limit; values must not be trusted.
    Failed,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    pub objective: f64,
    /// One value per model column; empty unless `status == Optimal`.
    pub values: Vec<f64>,
    pub message: Option<String>,
}

impl LpSolution {
    pub fn infeasible() -> Self {
        Self::without_values(LpStatus::Infeasible, None)
    }

    pub fn unbounded() -> Self {
        Self::without_values(LpStatus::Unbounded, None)
    }

    pub fn failed(message: impl Into<String>) -> Self {
        Self::without_values(LpStatus::Failed, Some(message.into()))
    }

    fn without_values(status: LpStatus, message: Option<String>) -> Self {
        let objective = match status {
            LpStatus::Infeasible => f64::INFINITY,
            LpStatus::Unbounded => f64::NEG_INFINITY,
            _ => f64::NAN,
        };
        Self {
            status,
            objective,
            values: Vec::new(),
            message,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

pub trait LpSession {
    /// Solves the relaxation with each `(column, value)` in `fixings` fixed.
    /// All other columns keep their model bounds; binaries are treated as
    /// continuous on their bounds.
    fn solve(&mut self, fixings: &[(usize, f64)]) -> LpSolution;
}

pub trait LpEngine: Send + Sync {
    fn name(&self) -> &'static str;
    fn open<'m>(&self, model: &'m MilpModel) -> Box<dyn LpSession + 'm>;
}

/// Selects one of the built-in engines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LpBackend {
    /// Sparse LU revised simplex with warm re-solves between nodes.
    #[default]
    Sparse,
    /// Dense bounded-variable primal simplex; small models only.
    Dense,
}

impl LpBackend {
    pub fn engine(self) -> Box<dyn LpEngine> {
        match self {
            LpBackend::Sparse => Box::new(SparseSimplex::default()),
            LpBackend::Dense => Box::new(DenseSimplex::default()),
        }
    }
}

/// One-shot relaxation solve with no fixings.
pub fn solve_relaxation(model: &MilpModel, engine: &dyn LpEngine) -> LpSolution {
    engine.open(model).solve(&[])
}
