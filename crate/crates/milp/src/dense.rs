//! Dense bounded-variable primal simplex.
//!
//! Every row `a_i x {<=,=,>=} b_i` gets a logical variable `y_i = a_i x` whose
//! bounds carry the row sense, so the working system is `A x - y = 0` with all
//! restrictions expressed as variable bounds. Rows whose logical starts out of
//! bounds get an artificial; phase one drives the artificials to zero, phase two
//! optimizes the real costs. The basis inverse is kept explicitly and rebuilt
//! periodically, which is fine for the few-hundred-row models this engine is
//! meant for.
//!
//! Pricing is Dantzig's rule. After a run of degenerate pivots the engine falls
//! back to Bland's rule (lowest eligible index for both entering and leaving)
//! until a pivot makes progress again.

use crate::lp::{LpEngine, LpSession, LpSolution, LpStatus};
use crate::model::{MilpModel, Sense};

#[derive(Debug, Clone)]
pub struct DenseSimplex {
    pub max_iterations: usize,
    pub degenerate_threshold: usize,
    pub refactor_every: usize,
    pub feas_tol: f64,
    pub opt_tol: f64,
    pub pivot_tol: f64,
}

impl Default for DenseSimplex {
    fn default() -> Self {
        Self {
            max_iterations: 50_000,
            degenerate_threshold: 50,
            refactor_every: 64,
            feas_tol: 1e-9,
            opt_tol: 1e-9,
            pivot_tol: 1e-9,
        }
    }
}

impl LpEngine for DenseSimplex {
    fn name(&self) -> &'static str {
        "dense-bounded-simplex"
    }

    fn open<'m>(&self, model: &'m MilpModel) -> Box<dyn LpSession + 'm> {
        Box::new(DenseSession {
            params: self.clone(),
            model,
        })
    }
}

struct DenseSession<'m> {
    params: DenseSimplex,
    model: &'m MilpModel,
}

impl LpSession for DenseSession<'_> {
    fn solve(&mut self, fixings: &[(usize, f64)]) -> LpSolution {
        let mut lower: Vec<f64> = self.model.columns.iter().map(|c| c.lower).collect();
        let mut upper: Vec<f64> = self.model.columns.iter().map(|c| c.upper).collect();
        for &(j, v) in fixings {
            if v < lower[j] - self.params.feas_tol || v > upper[j] + self.params.feas_tol {
                return LpSolution::infeasible();
            }
            lower[j] = v;
            upper[j] = v;
        }
        solve_dense(&self.params, self.model, &lower, &upper)
    }
}

#[derive(Debug, PartialEq)]
enum PhaseEnd {
    Optimal,
    Unbounded,
    Failed(String),
}

struct Work<'p> {
    p: &'p DenseSimplex,
    m: usize,
    /// Sparse columns of the working matrix `[A | -I | artificials]`.
    cols: Vec<Vec<(usize, f64)>>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    cost: Vec<f64>,
    x: Vec<f64>,
    basis: Vec<usize>,
    in_basis: Vec<Option<usize>>,
    /// Row-major `m x m` basis inverse.
    binv: Vec<f64>,
    pivots_since_refactor: usize,
    iterations: usize,
}

fn solve_dense(p: &DenseSimplex, model: &MilpModel, lower: &[f64], upper: &[f64]) -> LpSolution {
    let n = model.columns.len();
    let m = model.rows.len();
    for j in 0..n {
        if lower[j] > upper[j] + p.feas_tol {
            return LpSolution::infeasible();
        }
    }

    let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (i, row) in model.rows.iter().enumerate() {
        for &(j, a) in &row.coeffs {
            cols[j].push((i, a));
        }
    }
    let mut lo = lower.to_vec();
    let mut up = upper.to_vec();
    let mut x = vec![0.0; n];
    for j in 0..n {
        x[j] = initial_value(lo[j], up[j]);
    }

    // Logicals y_i with column -e_i.
    for (i, row) in model.rows.iter().enumerate() {
        cols.push(vec![(i, -1.0)]);
        let (l, u) = match row.sense {
            Sense::Le => (f64::NEG_INFINITY, row.rhs),
            Sense::Ge => (row.rhs, f64::INFINITY),
            Sense::Eq => (row.rhs, row.rhs),
        };
        lo.push(l);
        up.push(u);
        x.push(0.0);
    }

    // Activity of each row at the starting point.
    let mut activity = vec![0.0; m];
    for j in 0..n {
        if x[j] != 0.0 {
            for &(i, a) in &cols[j] {
                activity[i] += a * x[j];
            }
        }
    }

    let mut basis = Vec::with_capacity(m);
    let mut n_art = 0;
    for i in 0..m {
        let y = n + i;
        let act = activity[i];
        if act >= lo[y] - p.feas_tol && act <= up[y] + p.feas_tol {
            x[y] = act;
            basis.push(y);
        } else {
            // y nonbasic at the violated bound, artificial absorbs the residual:
            // act - y + sigma * art = 0 with art = |act - y| >= 0.
            let yb = if act < lo[y] { lo[y] } else { up[y] };
            x[y] = yb;
            let resid = act - yb;
            let sigma = if resid > 0.0 { -1.0 } else { 1.0 };
            cols.push(vec![(i, sigma)]);
            lo.push(0.0);
            up.push(f64::INFINITY);
            x.push(resid.abs());
            basis.push(cols.len() - 1);
            n_art += 1;
        }
    }

    let total = cols.len();
    let mut in_basis = vec![None; total];
    for (pos, &b) in basis.iter().enumerate() {
        in_basis[b] = Some(pos);
    }
    let mut w = Work {
        p,
        m,
        cols,
        lower: lo,
        upper: up,
        cost: vec![0.0; total],
        x,
        basis,
        in_basis,
        binv: vec![0.0; m * m],
        pivots_since_refactor: 0,
        iterations: 0,
    };
    if let Err(e) = w.refactor() {
        return LpSolution::failed(e);
    }

    let first_art = n + m;
    if n_art > 0 {
        for j in first_art..total {
            w.cost[j] = 1.0;
        }
        match w.run() {
            PhaseEnd::Optimal => {}
            PhaseEnd::Unbounded => return LpSolution::failed("phase one reported unbounded"),
            PhaseEnd::Failed(e) => return LpSolution::failed(e),
        }
        let infeas: f64 = (first_art..total).map(|j| w.x[j]).sum();
        let scale = 1.0 + model.rows.iter().map(|r| r.rhs.abs()).fold(0.0, f64::max);
        if infeas > 1e-7 * scale {
            return LpSolution::infeasible();
        }
        for j in first_art..total {
            w.upper[j] = 0.0;
            w.cost[j] = 0.0;
            if w.in_basis[j].is_none() {
                w.x[j] = 0.0;
            }
        }
    }

    for j in 0..total {
        w.cost[j] = if j < n { model.columns[j].cost } else { 0.0 };
    }
    match w.run() {
        PhaseEnd::Optimal => {}
        PhaseEnd::Unbounded => return LpSolution::unbounded(),
        PhaseEnd::Failed(e) => return LpSolution::failed(e),
    }

    let mut values: Vec<f64> = w.x[..n].to_vec();
    for j in 0..n {
        // Snap tiny bound overshoot from round-off.
        if values[j] < lower[j] {
            values[j] = lower[j];
        }
        if values[j] > upper[j] {
            values[j] = upper[j];
        }
    }
    let worst = model
        .rows
        .iter()
        .map(|r| r.sense.violation(r.activity(&values), r.rhs))
        .fold(0.0, f64::max);
    let scale = 1.0 + values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if worst > 1e-6 * scale {
        return LpSolution::failed(format!(
            "dense simplex finished with row violation {worst:e}"
        ));
    }
    LpSolution {
        status: LpStatus::Optimal,
        objective: model.objective_value(&values),
        values,
        message: None,
    }
}

fn initial_value(l: f64, u: f64) -> f64 {
    if l.is_finite() {
        l
    } else if u.is_finite() {
        u
    } else {
        0.0
    }
}

impl Work<'_> {
    fn run(&mut self) -> PhaseEnd {
        let mut degenerate_run = 0usize;
        let mut bland = false;
        let total = self.cols.len();
        let mut pi = vec![0.0; self.m];
        let mut alpha = vec![0.0; self.m];
        loop {
            if self.iterations >= self.p.max_iterations {
                return PhaseEnd::Failed(format!(
                    "iteration limit {} reached",
                    self.p.max_iterations
                ));
            }
            self.iterations += 1;

            // pi = c_B^T B^-1
            pi.iter_mut().for_each(|v| *v = 0.0);
            for (pos, &b) in self.basis.iter().enumerate() {
                let cb = self.cost[b];
                if cb != 0.0 {
                    let row = &self.binv[pos * self.m..(pos + 1) * self.m];
                    for (k, r) in row.iter().enumerate() {
                        pi[k] += cb * r;
                    }
                }
            }

            // Pricing.
            let mut entering: Option<(usize, f64)> = None;
            let mut best = 0.0;
            for j in 0..total {
                if self.in_basis[j].is_some() || self.upper[j] - self.lower[j] <= 0.0 {
                    continue;
                }
                let d = self.cost[j] - self.cols[j].iter().map(|&(i, a)| pi[i] * a).sum::<f64>();
                let can_up = self.x[j] < self.upper[j] - self.p.feas_tol;
                let can_down = self.x[j] > self.lower[j] + self.p.feas_tol;
                let dir = if d < -self.p.opt_tol && can_up {
                    1.0
                } else if d > self.p.opt_tol && can_down {
                    -1.0
                } else {
                    continue;
                };
                if bland {
                    entering = Some((j, dir));
                    break;
                }
                if d.abs() > best {
                    best = d.abs();
                    entering = Some((j, dir));
                }
            }
            let Some((q, dir)) = entering else {
                return PhaseEnd::Optimal;
            };

            // alpha = B^-1 A_q
            alpha.iter_mut().for_each(|v| *v = 0.0);
            for &(r, a) in &self.cols[q] {
                for (i, al) in alpha.iter_mut().enumerate() {
                    *al += self.binv[i * self.m + r] * a;
                }
            }

            // Ratio test. Basic i moves at rate -dir * alpha_i per unit step.
            let mut theta = self.upper[q] - self.lower[q];
            let mut leave: Option<(usize, bool)> = None; // (position, hits upper)
            let mut leave_key = (0.0f64, usize::MAX);
            for i in 0..self.m {
                let rate = -dir * alpha[i];
                if rate.abs() <= self.p.pivot_tol {
                    continue;
                }
                let b = self.basis[i];
                let (limit, hits_upper) = if rate < 0.0 {
                    if !self.lower[b].is_finite() {
                        continue;
                    }
                    (((self.x[b] - self.lower[b]) / -rate).max(0.0), false)
                } else {
                    if !self.upper[b].is_finite() {
                        continue;
                    }
                    (((self.upper[b] - self.x[b]) / rate).max(0.0), true)
                };
                let better = if limit < theta - 1e-12 {
                    true
                } else if limit <= theta + 1e-12 && leave.is_some() {
                    if bland {
                        b < leave_key.1
                    } else {
                        alpha[i].abs() > leave_key.0
                    }
                } else {
                    false
                };
                if better {
                    theta = limit.min(theta);
                    leave = Some((i, hits_upper));
                    leave_key = (alpha[i].abs(), b);
                }
            }
            if !theta.is_finite() {
                return PhaseEnd::Unbounded;
            }

            if theta <= 1e-12 {
                degenerate_run += 1;
                if degenerate_run >= self.p.degenerate_threshold {
                    bland = true;
                }
            } else {
                degenerate_run = 0;
                bland = false;
            }

            // Move.
            self.x[q] += dir * theta;
            for i in 0..self.m {
                let b = self.basis[i];
                self.x[b] += -dir * alpha[i] * theta;
            }

            match leave {
                None => {
                    // Bound flip of the entering variable.
                    self.x[q] = if dir > 0.0 { self.upper[q] } else { self.lower[q] };
                }
                Some((pos, hits_upper)) => {
                    let out = self.basis[pos];
                    self.x[out] = if hits_upper {
                        self.upper[out]
                    } else {
                        self.lower[out]
                    };
                    self.in_basis[out] = None;
                    self.basis[pos] = q;
                    self.in_basis[q] = Some(pos);
                    self.pivot(pos, &alpha);
                    self.pivots_since_refactor += 1;
                    if self.pivots_since_refactor >= self.p.refactor_every {
                        if let Err(e) = self.refactor() {
                            return PhaseEnd::Failed(e);
                        }
                    }
                }
            }
        }
    }

    fn pivot(&mut self, pos: usize, alpha: &[f64]) {
        let m = self.m;
        let piv = alpha[pos];
        for k in 0..m {
            self.binv[pos * m + k] /= piv;
        }
        for i in 0..m {
            if i == pos || alpha[i] == 0.0 {
                continue;
            }
            let f = alpha[i];
            for k in 0..m {
                let v = self.binv[pos * m + k];
                if v != 0.0 {
                    self.binv[i * m + k] -= f * v;
                }
            }
        }
    }

    /// Rebuilds the basis inverse by Gauss-Jordan elimination and recomputes
    /// basic values from the nonbasic ones.
    fn refactor(&mut self) -> Result<(), String> {
        let m = self.m;
        self.pivots_since_refactor = 0;
        if m == 0 {
            return Ok(());
        }
        let mut a = vec![0.0; m * m];
        for (pos, &b) in self.basis.iter().enumerate() {
            for &(i, v) in &self.cols[b] {
                a[i * m + pos] = v;
            }
        }
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        for c in 0..m {
            let mut pr = c;
            let mut pv = a[c * m + c].abs();
            for r in c + 1..m {
                if a[r * m + c].abs() > pv {
                    pv = a[r * m + c].abs();
                    pr = r;
                }
            }
            if pv < 1e-12 {
                return Err("singular basis during refactorization".into());
            }
            if pr != c {
                for k in 0..m {
                    a.swap(c * m + k, pr * m + k);
                    inv.swap(c * m + k, pr * m + k);
                }
            }
            let d = a[c * m + c];
            for k in 0..m {
                a[c * m + k] /= d;
                inv[c * m + k] /= d;
            }
            for r in 0..m {
                if r == c {
                    continue;
                }
                let f = a[r * m + c];
                if f == 0.0 {
                    continue;
                }
                for k in 0..m {
                    a[r * m + k] -= f * a[c * m + k];
                    inv[r * m + k] -= f * inv[c * m + k];
                }
            }
        }
        self.binv = inv;

        // x_B = -B^-1 (N x_N)
        let mut rhs = vec![0.0; m];
        for (j, col) in self.cols.iter().enumerate() {
            if self.in_basis[j].is_none() && self.x[j] != 0.0 {
                for &(i, v) in col {
                    rhs[i] -= v * self.x[j];
                }
            }
        }
        for pos in 0..m {
            let row = &self.binv[pos * m..(pos + 1) * m];
            let v: f64 = row.iter().zip(&rhs).map(|(a, b)| a * b).sum();
            self.x[self.basis[pos]] = v;
        }
        Ok(())
    }
}
