//! Sparse LP engine on top of `microlp`.
//!
//! A session keeps the root relaxation and the most recently solved node.
//! Moving to a new node unfixes and fixes only the columns whose fixing
//! differs, so consecutive nodes in a dive re-optimize from a nearby basis.

use std::collections::BTreeMap;

use microlp::{ComparisonOp, Error as MlpError, OptimizationDirection, Problem, Solution, Variable};

use crate::lp::{LpEngine, LpSession, LpSolution, LpStatus};
use crate::model::{MilpModel, Sense};

#[derive(Debug, Clone, Default)]
pub struct SparseSimplex;

impl LpEngine for SparseSimplex {
    fn name(&self) -> &'static str {
        "sparse-revised-simplex"
    }

    fn open<'m>(&self, model: &'m MilpModel) -> Box<dyn LpSession + 'm> {
        Box::new(SparseSession::new(model))
    }
}

enum Root {
    Unsolved,
    Solved(Solution),
    Terminal(LpSolution),
}

struct SparseSession<'m> {
    model: &'m MilpModel,
    problem: Problem,
    vars: Vec<Variable>,
    root: Root,
    current: Option<(Solution, BTreeMap<usize, f64>)>,
}

impl<'m> SparseSession<'m> {
    fn new(model: &'m MilpModel) -> Self {
        let (problem, vars) = build_problem(model, &BTreeMap::new());
        Self {
            model,
            problem,
            vars,
            root: Root::Unsolved,
            current: None,
        }
    }

    fn solve_root(&mut self) {
        if !matches!(self.root, Root::Unsolved) {
            return;
        }
        self.root = match self.problem.solve() {
            Ok(outcome) => match outcome.into_solution() {
                Ok(sol) => Root::Solved(sol),
                Err(_) => Root::Terminal(LpSolution::failed("LP interrupted by limit")),
            },
            Err(e) => Root::Terminal(map_error(e)),
        };
    }

    fn extract(&self, sol: &Solution) -> LpSolution {
        SolutionView { vars: &self.vars }.extract(self.model, sol)
    }
}

const NUDGE: f64 = 1e-7;

fn build_problem(model: &MilpModel, fixed: &BTreeMap<usize, f64>) -> (Problem, Vec<Variable>) {
    let mut problem = Problem::new(OptimizationDirection::Minimize);
    let vars: Vec<Variable> = model
        .columns
        .iter()
        .enumerate()
        .map(|(j, c)| {
            let bounds = fixed.get(&j).map_or((c.lower, c.upper), |&v| (v, v));
            problem.add_var(c.cost, bounds)
        })
        .collect();
    for row in &model.rows {
        let op = match row.sense {
            Sense::Le => ComparisonOp::Le,
            Sense::Ge => ComparisonOp::Ge,
            Sense::Eq => ComparisonOp::Eq,
        };
        let expr: Vec<(Variable, f64)> = row.coeffs.iter().map(|&(j, a)| (vars[j], a)).collect();
        problem.add_constraint(expr, op, row.rhs);
    }
    (problem, vars)
}

fn map_error(e: MlpError) -> LpSolution {
    match e {
        MlpError::Infeasible => LpSolution::infeasible(),
        MlpError::Unbounded => LpSolution::unbounded(),
        other => LpSolution::failed(other.to_string()),
    }
}

fn step(sol: Solution, f: impl FnOnce(Solution) -> Result<microlp::SolveOutcome, MlpError>) -> Result<Solution, LpSolution> {
    match f(sol) {
        Ok(outcome) => outcome
            .into_solution()
            .map_err(|_| LpSolution::failed("LP interrupted by limit")),
        Err(e) => Err(map_error(e)),
    }
}

impl LpSession for SparseSession<'_> {
    fn solve(&mut self, fixings: &[(usize, f64)]) -> LpSolution {
        self.solve_root();
        let root = match &self.root {
            Root::Solved(sol) => sol,
            Root::Terminal(t) => {
                // A fixed subproblem of an infeasible relaxation is infeasible too.
                return t.clone();
            }
            Root::Unsolved => unreachable!(),
        };
        for &(j, v) in fixings {
            let c = &self.model.columns[j];
            if v < c.lower || v > c.upper {
                return LpSolution::infeasible();
            }
        }
        let target: BTreeMap<usize, f64> = fixings.iter().copied().collect();

        // Start from whichever state needs fewer edits.
        let (sol, applied) = match self.current.take() {
            Some((sol, applied)) => {
                let edits = applied
                    .iter()
                    .filter(|(j, v)| target.get(j) != Some(v))
                    .count()
                    + target
                        .iter()
                        .filter(|(j, v)| applied.get(j) != Some(v))
                        .count();
                if edits <= target.len() {
                    (sol, applied)
                } else {
                    (root.clone(), BTreeMap::new())
                }
            }
            None => (root.clone(), BTreeMap::new()),
        };

        match self.incremental(sol, &applied, &target) {
            Ok(sol) => {
                let out = self.extract(&sol);
                self.current = Some((sol, target));
                out
            }
            Err(r) if r.status == LpStatus::Infeasible => self.confirm_infeasible(target),
            Err(r) => r,
        }
    }
}

impl SparseSession<'_> {
    fn incremental(
        &self,
        mut sol: Solution,
        applied: &BTreeMap<usize, f64>,
        target: &BTreeMap<usize, f64>,
    ) -> Result<Solution, LpSolution> {
        // Apply new fixings first so the basis stays close, then release the rest.
        for (&j, &v) in target {
            if applied.get(&j) == Some(&v) {
                continue;
            }
            sol = self.fix(sol, j, v)?;
        }
        for &j in applied.keys() {
            if target.contains_key(&j) {
                continue;
            }
            let var = self.vars[j];
            sol = step(sol, |s| s.unfix_var(var).map(|(o, _)| o))?;
        }
        Ok(sol)
    }

    fn fix(&self, sol: Solution, j: usize, v: f64) -> Result<Solution, LpSolution> {
        let var = self.vars[j];
        if (sol.var_value_raw(var) - v).abs() > NUDGE {
            return step(sol, |s| s.fix_var(var, v));
        }
        // A basic column already at `v` can fail the dual ratio test spuriously.
        let backup = sol.clone();
        if let Ok(s) = step(sol, |s| s.fix_var(var, v)) {
            return Ok(s);
        }
        let c = &self.model.columns[j];
        let nudged = if v + NUDGE <= c.upper { v + NUDGE } else { v - NUDGE };
        if nudged < c.lower {
            return Err(LpSolution::infeasible());
        }
        let sol = step(backup, |s| s.fix_var(var, nudged))?;
        step(sol, |s| s.fix_var(var, v))
    }

    /// The dual step inside `fix_var` can report infeasibility on feasible
    /// nodes; only a from-scratch solve of the bounded problem is trusted.
    fn confirm_infeasible(&mut self, target: BTreeMap<usize, f64>) -> LpSolution {
        let (problem, vars) = build_problem(self.model, &target);
        match problem.solve() {
            Ok(outcome) => match outcome.into_solution() {
                Ok(sol) => {
                    let fresh = SolutionView { vars: &vars };
                    let out = fresh.extract(self.model, &sol);
                    // Solutions from the fresh problem use its own variable handles.
                    self.current = None;
                    out
                }
                Err(_) => LpSolution::failed("LP interrupted by limit"),
            },
            Err(e) => map_error(e),
        }
    }
}

struct SolutionView<'a> {
    vars: &'a [Variable],
}

impl SolutionView<'_> {
    fn extract(&self, model: &MilpModel, sol: &Solution) -> LpSolution {
        let mut values: Vec<f64> = self.vars.iter().map(|&v| sol.var_value_raw(v)).collect();
        for (v, c) in values.iter_mut().zip(&model.columns) {
            *v = v.clamp(c.lower, c.upper);
        }
        LpSolution {
            status: LpStatus::Optimal,
            objective: model.objective_value(&values),
            values,
            message: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::DenseSimplex;
    use crate::model::ColumnKind;

    #[test]
    fn warm_session_matches_cold_solves() {
        let mut m = MilpModel::new("t");
        let b: Vec<usize> = (0..3)
            .map(|i| m.add_column(format!("b{i}"), 0.0, 1.0, 1.0 + i as f64, ColumnKind::Binary))
            .collect();
        let y = m.add_column("y", 0.0, 10.0, 4.0, ColumnKind::Continuous);
        m.add_row("cover", [(b[0], 2.0), (b[1], 3.0), (b[2], 4.0), (y, 1.0)], Sense::Ge, 5.5);
        m.add_row("pair", [(b[0], 1.0), (b[1], 1.0)], Sense::Le, 1.0);
        let mut warm = SparseSimplex.open(&m);
        let dense = DenseSimplex::default();
        let seqs: Vec<Vec<(usize, f64)>> = vec![
            vec![],
            vec![(b[0], 1.0)],
            vec![(b[0], 1.0), (b[2], 0.0)],
            vec![(b[1], 1.0)],
            vec![(b[0], 0.0), (b[1], 0.0), (b[2], 0.0)],
            vec![(b[0], 1.0), (b[1], 1.0)],
            vec![],
        ];
        for f in seqs {
            let a = warm.solve(&f);
            let c = dense.open(&m).solve(&f);
            assert_eq!(a.status, c.status, "fixings {f:?}");
            if a.is_optimal() {
                assert!((a.objective - c.objective).abs() < 1e-9, "fixings {f:?}");
            }
        }
    }
}
