//! Sparse mixed-integer model representation.

use serde::{Deserialize, Serialize};

use crate::error::ModelError;

/// Row sense.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

impl Sense {
    /// True when `activity` satisfies the row against `rhs` within `tol`.
    pub fn holds(self, activity: f64, rhs: f64, tol: f64) -> bool {
        self.violation(activity, rhs) <= tol
    }

    /// Non-negative amount by which the row is violated.
    pub fn violation(self, activity: f64, rhs: f64) -> f64 {
        match self {
            Sense::Le => (activity - rhs).max(0.0),
            Sense::Ge => (rhs - activity).max(0.0),
            Sense::Eq => (activity - rhs).abs(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ColumnKind {
    Continuous,
    Binary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub cost: f64,
    pub kind: ColumnKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub name: String,
    pub sense: Sense,
    pub rhs: f64,
    /// `(column, coefficient)` pairs, sorted by column, no duplicates, no zeros.
    pub coeffs: Vec<(usize, f64)>,
}

impl Row {
    pub fn activity(&self, values: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(j, a)| a * values[j]).sum()
    }
}

/// Minimization model `min c'x  s.t.  rows, lower <= x <= upper, x_j in {0,1} for binaries`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MilpModel {
    pub name: String,
    pub columns: Vec<Column>,
    pub rows: Vec<Row>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelStats {
    pub rows: usize,
    pub columns: usize,
    pub nonzeros: usize,
    pub binaries: usize,
}

impl MilpModel {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            ..Self::default()
        }
    }

    pub fn add_column(
        &mut self,
        name: impl Into<String>,
        lower: f64,
        upper: f64,
        cost: f64,
        kind: ColumnKind,
    ) -> usize {
        self.columns.push(Column {
            name: name.into(),
            lower,
            upper,
            cost,
            kind,
        });
        self.columns.len() - 1
    }

    /// Adds a row. Coefficients on the same column are merged and exact zeros dropped.
    pub fn add_row(
        &mut self,
        name: impl Into<String>,
        coeffs: impl IntoIterator<Item = (usize, f64)>,
        sense: Sense,
        rhs: f64,
    ) -> usize {
        let mut coeffs: Vec<(usize, f64)> = coeffs.into_iter().collect();
        coeffs.sort_by_key(|&(j, _)| j);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(coeffs.len());
        for (j, a) in coeffs {
            match merged.last_mut() {
                Some((lj, la)) if *lj == j => *la += a,
                _ => merged.push((j, a)),
            }
        }
        merged.retain(|&(_, a)| a != 0.0);
        self.rows.push(Row {
            name: name.into(),
            sense,
            rhs,
            coeffs: merged,
        });
        self.rows.len() - 1
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn num_columns(&self) -> usize {
        self.columns.len()
    }

    pub fn binaries(&self) -> impl Iterator<Item = usize> + '_ {
        self.columns
            .iter()
            .enumerate()
            .filter(|(_, c)| c.kind == ColumnKind::Binary)
            .map(|(j, _)| j)
    }

    pub fn stats(&self) -> ModelStats {
        ModelStats {
            rows: self.rows.len(),
            columns: self.columns.len(),
            nonzeros: self.rows.iter().map(|r| r.coeffs.len()).sum(),
            binaries: self.binaries().count(),
        }
    }

    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.columns
            .iter()
            .zip(values)
            .map(|(c, v)| c.cost * v)
            .sum()
    }

    /// Copy with every binary turned continuous on its bounds.
    pub fn relaxed(&self) -> MilpModel {
        let mut m = self.clone();
        for c in &mut m.columns {
            c.kind = ColumnKind::Continuous;
        }
        m
    }

    /// Structural checks: no empty rows, finite binary bounds inside [0, 1],
    /// ordered bounds, finite coefficients, and in-range column references.
    pub fn check(&self) -> Result<(), ModelError> {
        for (j, c) in self.columns.iter().enumerate() {
            if c.lower.is_nan() || c.upper.is_nan() || c.lower > c.upper {
                return Err(ModelError::BadBounds {
                    column: c.name.clone(),
                    lower: c.lower,
                    upper: c.upper,
                });
            }
            if !c.cost.is_finite() {
                return Err(ModelError::NonFinite(format!("cost of column {j} ({})", c.name)));
            }
            if c.kind == ColumnKind::Binary && (c.lower < 0.0 || c.upper > 1.0) {
                return Err(ModelError::BadBounds {
                    column: c.name.clone(),
                    lower: c.lower,
                    upper: c.upper,
                });
            }
        }
        for r in &self.rows {
            if r.coeffs.is_empty() {
                return Err(ModelError::EmptyRow(r.name.clone()));
            }
            if !r.rhs.is_finite() {
                return Err(ModelError::NonFinite(format!("rhs of row {}", r.name)));
            }
            for &(j, a) in &r.coeffs {
                if j >= self.columns.len() {
                    return Err(ModelError::ColumnOutOfRange {
                        row: r.name.clone(),
                        column: j,
                    });
                }
                if !a.is_finite() {
                    return Err(ModelError::NonFinite(format!("coefficient in row {}", r.name)));
                }
            }
        }
        Ok(())
    }

    /// Largest bound or row violation of `values`, plus integrality violation of binaries.
    pub fn max_violation(&self, values: &[f64]) -> Violation {
        let mut worst = Violation::default();
        for (j, c) in self.columns.iter().enumerate() {
            let v = values[j];
            let b = (c.lower - v).max(v - c.upper).max(0.0);
            if b > worst.bound {
                worst.bound = b;
                worst.bound_column = Some(j);
            }
            if c.kind == ColumnKind::Binary {
                let f = (v - v.round()).abs();
                if f > worst.integrality {
                    worst.integrality = f;
                }
            }
        }
        for (i, r) in self.rows.iter().enumerate() {
            let viol = r.sense.violation(r.activity(values), r.rhs);
            if viol > worst.row {
                worst.row = viol;
                worst.row_index = Some(i);
            }
        }
        worst
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Violation {
    pub bound: f64,
    pub bound_column: Option<usize>,
    pub row: f64,
    pub row_index: Option<usize>,
    pub integrality: f64,
}

impl Violation {
    pub fn feasible(&self, feas_tol: f64, int_tol: f64) -> bool {
        self.bound <= feas_tol && self.row <= feas_tol && self.integrality <= int_tol
    }
}
