//! LP-based branch-and-bound over binary columns.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::lp::{LpBackend, LpEngine, LpSession, LpSolution, LpStatus};
use crate::model::{ColumnKind, MilpModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Branching {
    #[default]
    MostFractional,
    PseudoCost,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NodeOrder {
    /// Best bound first, plunging into the preferred child after each branch.
    #[default]
    BestBound,
    DepthFirst,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveOptions {
    pub rel_gap: f64,
    pub feas_tol: f64,
    pub int_tol: f64,
    pub node_limit: Option<usize>,
    pub time_limit: Option<Duration>,
    pub branching: Branching,
    pub node_order: NodeOrder,
    pub backend: LpBackend,
    /// Keep the column values of every incumbent, not just the last one.
    pub keep_incumbents: bool,
    /// Emit a log line every this many nodes (incumbent updates always log).
    pub log_every: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            rel_gap: 1e-4,
            feas_tol: 1e-6,
            int_tol: 1e-5,
            node_limit: None,
            time_limit: None,
            branching: Branching::default(),
            node_order: NodeOrder::default(),
            backend: LpBackend::default(),
            keep_incumbents: false,
            log_every: 100,
        }
    }
}

impl SolveOptions {
    pub fn check(&self) -> Result<(), String> {
        for (name, v) in [
            ("rel_gap", self.rel_gap),
            ("feas_tol", self.feas_tol),
            ("int_tol", self.int_tol),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("{name} must be a positive finite number, got {v}"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    OptimalWithinGap,
    Infeasible,
    Unbounded,
    LimitReached,
    /// The LP engine broke down numerically; nothing is claimed.
    NumericalFailure,
}

/// One line of the solve log.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct LogLine {
    pub node: usize,
    pub bound: f64,
    pub incumbent: Option<f64>,
    pub gap: Option<f64>,
    pub time: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Incumbent {
    pub objective: f64,
    pub node: usize,
    pub values: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub objective: Option<f64>,
    pub best_bound: f64,
    pub values: Option<Vec<f64>>,
    /// Objective of the root relaxation, when it solved.
    pub root_bound: Option<f64>,
    pub nodes: usize,
    pub lp_solves: usize,
    pub wall_time: Duration,
    pub incumbents: Vec<Incumbent>,
    pub log: Vec<LogLine>,
    pub message: Option<String>,
}

impl SolveResult {
    pub fn gap(&self) -> Option<f64> {
        self.objective.map(|o| relative_gap(o, self.best_bound))
    }

    fn terminal(status: SolveStatus, start: Instant, message: Option<String>) -> Self {
        let best_bound = match status {
            SolveStatus::Infeasible => f64::INFINITY,
            SolveStatus::Unbounded => f64::NEG_INFINITY,
            _ => f64::NAN,
        };
        Self {
            status,
            objective: None,
            best_bound,
            values: None,
            root_bound: None,
            nodes: 0,
            lp_solves: 0,
            wall_time: start.elapsed(),
            incumbents: Vec::new(),
            log: Vec::new(),
            message,
        }
    }
}

/// `(incumbent - bound) / max(|incumbent|, 1)`.
pub fn relative_gap(incumbent: f64, bound: f64) -> f64 {
    if incumbent == bound {
        return 0.0;
    }
    ((incumbent - bound) / incumbent.abs().max(1.0)).max(0.0)
}

/// Solves the continuous relaxation once.
pub fn solve_lp(model: &MilpModel, opts: &SolveOptions) -> SolveResult {
    let start = Instant::now();
    let engine = opts.backend.engine();
    let relaxed = model.relaxed();
    let lp = engine.open(&relaxed).solve(&[]);
    let mut res = match lp.status {
        LpStatus::Optimal => {
            let mut r = SolveResult::terminal(SolveStatus::OptimalWithinGap, start, None);
            r.objective = Some(lp.objective);
            r.best_bound = lp.objective;
            r.root_bound = Some(lp.objective);
            r.values = Some(lp.values);
            r
        }
        LpStatus::Infeasible => SolveResult::terminal(SolveStatus::Infeasible, start, None),
        LpStatus::Unbounded => SolveResult::terminal(SolveStatus::Unbounded, start, None),
        LpStatus::Failed => SolveResult::terminal(SolveStatus::NumericalFailure, start, lp.message),
    };
    res.lp_solves = 1;
    res.wall_time = start.elapsed();
    res
}

/// Solves the model to `opts.rel_gap` with the engine named in the options.
pub fn solve_milp(model: &MilpModel, opts: &SolveOptions) -> SolveResult {
    let engine = opts.backend.engine();
    solve_milp_with(model, opts, engine.as_ref())
}

#[derive(Debug, Clone)]
struct Node {
    id: usize,
    depth: usize,
    bound: f64,
    fixings: Vec<(usize, f64)>,
    /// Branch that created this node: (column, parent value, went up).
    origin: Option<(usize, f64, bool)>,
    parent_obj: f64,
}

struct HeapNode(Node);

impl PartialEq for HeapNode {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for HeapNode {}
impl PartialOrd for HeapNode {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapNode {
    // Max-heap: "greater" pops first, so lower bound wins, then deeper, then older.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .0
            .bound
            .total_cmp(&self.0.bound)
            .then(self.0.depth.cmp(&other.0.depth))
            .then(other.0.id.cmp(&self.0.id))
    }
}

enum Open {
    Heap(BinaryHeap<HeapNode>),
    Stack(Vec<Node>),
}

impl Open {
    fn push(&mut self, n: Node) {
        match self {
            Open::Heap(h) => h.push(HeapNode(n)),
            Open::Stack(s) => s.push(n),
        }
    }
    fn pop(&mut self) -> Option<Node> {
        match self {
            Open::Heap(h) => h.pop().map(|n| n.0),
            Open::Stack(s) => s.pop(),
        }
    }
    fn min_bound(&self) -> Option<f64> {
        match self {
            Open::Heap(h) => h.peek().map(|n| n.0.bound),
            Open::Stack(s) => s.iter().map(|n| n.bound).min_by(f64::total_cmp),
        }
    }
    fn len(&self) -> usize {
        match self {
            Open::Heap(h) => h.len(),
            Open::Stack(s) => s.len(),
        }
    }
}

#[derive(Default, Clone, Copy)]
struct PseudoCost {
    down_sum: f64,
    down_n: u32,
    up_sum: f64,
    up_n: u32,
}

struct Search<'a> {
    model: &'a MilpModel,
    opts: &'a SolveOptions,
    session: Box<dyn LpSession + 'a>,
    start: Instant,
    binaries: Vec<usize>,
    incumbent: Option<(f64, Vec<f64>)>,
    incumbents: Vec<Incumbent>,
    log: Vec<LogLine>,
    nodes: usize,
    lp_solves: usize,
    next_id: usize,
    pseudo: Vec<PseudoCost>,
    numerical_trouble: Option<String>,
}

impl Search<'_> {
    fn cutoff(&self) -> f64 {
        match &self.incumbent {
            Some((obj, _)) => obj - (self.opts.rel_gap * obj.abs().max(1.0)).max(1e-9),
            None => f64::INFINITY,
        }
    }

    fn elapsed(&self) -> f64 {
        self.start.elapsed().as_secs_f64()
    }

    fn log_line(&mut self, bound: f64) {
        let inc = self.incumbent.as_ref().map(|(o, _)| *o);
        self.log.push(LogLine {
            node: self.nodes,
            bound,
            incumbent: inc,
            gap: inc.map(|o| relative_gap(o, bound)),
            time: self.elapsed(),
        });
    }

    fn fractional(&self, values: &[f64]) -> Vec<(usize, f64)> {
        self.binaries
            .iter()
            .filter_map(|&j| {
                let v = values[j];
                let f = v - v.floor();
                (f > self.opts.int_tol && f < 1.0 - self.opts.int_tol).then_some((j, v))
            })
            .collect()
    }

    fn most_fractional(frac: &[(usize, f64)]) -> (usize, f64) {
        let mut best = frac[0];
        let mut best_score = -1.0;
        for &(j, v) in frac {
            let f = v - v.floor();
            let score = f.min(1.0 - f);
            // Strictly greater keeps the lowest column on ties.
            if score > best_score + 1e-12 {
                best_score = score;
                best = (j, v);
            }
        }
        best
    }

    fn pseudo_estimate(&self, j: usize, averages: (f64, f64)) -> (f64, f64) {
        let p = self.pseudo[j];
        let down = if p.down_n > 0 { p.down_sum / p.down_n as f64 } else { averages.0 };
        let up = if p.up_n > 0 { p.up_sum / p.up_n as f64 } else { averages.1 };
        (down, up)
    }

    fn pseudo_averages(&self) -> (f64, f64) {
        let (mut dn, mut dc, mut un, mut uc) = (0.0, 0u32, 0.0, 0u32);
        for p in &self.pseudo {
            if p.down_n > 0 {
                dn += p.down_sum / p.down_n as f64;
                dc += 1;
            }
            if p.up_n > 0 {
                un += p.up_sum / p.up_n as f64;
                uc += 1;
            }
        }
        (
            if dc > 0 { dn / dc as f64 } else { 1.0 },
            if uc > 0 { un / uc as f64 } else { 1.0 },
        )
    }

    fn add_pseudo(&mut self, j: usize, v: f64, up: bool, gain: f64) {
        let f = v - v.floor();
        let p = &mut self.pseudo[j];
        if up {
            p.up_sum += gain / (1.0 - f).max(1e-9);
            p.up_n += 1;
        } else {
            p.down_sum += gain / f.max(1e-9);
            p.down_n += 1;
        }
    }

    fn choose_branch(&self, frac: &[(usize, f64)]) -> (usize, f64) {
        if self.opts.branching == Branching::MostFractional {
            return Self::most_fractional(frac);
        }
        let averages = self.pseudo_averages();
        let mut best = frac[0];
        let mut best_score = f64::NEG_INFINITY;
        for &(j, v) in frac {
            let f = v - v.floor();
            let (down, up) = self.pseudo_estimate(j, averages);
            let score = (down * f).max(1e-6) * (up * (1.0 - f)).max(1e-6);
            if score > best_score * (1.0 + 1e-12) + 1e-15 {
                best_score = score;
                best = (j, v);
            }
        }
        best
    }

    fn record_pseudo(&mut self, node: &Node, lp: &LpSolution) {
        if let Some((j, v, up)) = node.origin {
            if lp.is_optimal() {
                self.add_pseudo(j, v, up, (lp.objective - node.parent_obj).max(0.0));
            }
        }
    }

    fn try_incumbent(&mut self, lp: &LpSolution) -> bool {
        let mut values = lp.values.clone();
        for &j in &self.binaries {
            values[j] = values[j].round();
        }
        let viol = self.model.max_violation(&values);
        if !viol.feasible(self.opts.feas_tol, self.opts.int_tol) {
            // Snapping binaries broke a row: re-solve with every binary fixed at its rounded value.
            let fix: Vec<(usize, f64)> = self.binaries.iter().map(|&j| (j, values[j])).collect();
            self.lp_solves += 1;
            let polished = self.session.solve(&fix);
            if !polished.is_optimal() {
                return false;
            }
            values = polished.values;
            for &(j, v) in &fix {
                values[j] = v;
            }
            if !self.model.max_violation(&values).feasible(self.opts.feas_tol, self.opts.int_tol) {
                return false;
            }
        }
        let obj = self.model.objective_value(&values);
        if self.incumbent.as_ref().is_some_and(|(o, _)| obj >= *o) {
            return false;
        }
        self.incumbents.push(Incumbent {
            objective: obj,
            node: self.nodes,
            values: self.opts.keep_incumbents.then(|| values.clone()),
        });
        self.incumbent = Some((obj, values));
        true
    }

    /// Fix every binary at its rounded LP value and solve the remaining LP.
    fn rounding_heuristic(&mut self, values: &[f64], base: &[(usize, f64)]) {
        let mut fix: Vec<(usize, f64)> = base.to_vec();
        for &j in &self.binaries {
            if !fix.iter().any(|&(c, _)| c == j) {
                let c = &self.model.columns[j];
                fix.push((j, values[j].round().clamp(c.lower, c.upper)));
            }
        }
        self.lp_solves += 1;
        let lp = self.session.solve(&fix);
        if lp.is_optimal() && lp.objective < self.cutoff() && self.try_incumbent(&lp) {
            let b = self.incumbent.as_ref().map(|(o, _)| *o).unwrap_or(f64::NAN);
            self.log_line(b.min(lp.objective));
        }
    }
}

/// Branch-and-bound with an explicit LP engine.
pub fn solve_milp_with(model: &MilpModel, opts: &SolveOptions, engine: &dyn LpEngine) -> SolveResult {
    let start = Instant::now();
    if let Err(e) = opts.check() {
        return SolveResult::terminal(SolveStatus::NumericalFailure, start, Some(e));
    }
    if let Err(e) = model.check() {
        return SolveResult::terminal(SolveStatus::NumericalFailure, start, Some(e.to_string()));
    }
    let binaries: Vec<usize> = model
        .columns
        .iter()
        .enumerate()
        .filter(|(_, c)| c.kind == ColumnKind::Binary)
        .map(|(j, _)| j)
        .collect();
    let mut s = Search {
        model,
        opts,
        session: engine.open(model),
        start,
        binaries,
        incumbent: None,
        incumbents: Vec::new(),
        log: Vec::new(),
        nodes: 0,
        lp_solves: 0,
        next_id: 1,
        pseudo: vec![PseudoCost::default(); model.columns.len()],
        numerical_trouble: None,
    };

    let mut open = match opts.node_order {
        NodeOrder::BestBound => Open::Heap(BinaryHeap::new()),
        NodeOrder::DepthFirst => Open::Stack(Vec::new()),
    };
    let mut root_bound = None;
    let mut limit_hit = false;
    let mut pruned_min = f64::INFINITY;
    let mut pending: Option<Node> = Some(Node {
        id: 0,
        depth: 0,
        bound: f64::NEG_INFINITY,
        fixings: Vec::new(),
        origin: None,
        parent_obj: f64::NEG_INFINITY,
    });

    loop {
        let node = match pending.take().or_else(|| open.pop()) {
            Some(n) => n,
            None => break,
        };
        if node.bound >= s.cutoff() {
            pruned_min = pruned_min.min(node.bound);
            continue;
        }
        if opts.node_limit.is_some_and(|l| s.nodes >= l)
            || opts.time_limit.is_some_and(|t| start.elapsed() >= t)
        {
            open.push(node);
            limit_hit = true;
            break;
        }
        s.nodes += 1;
        s.lp_solves += 1;
        let lp = s.session.solve(&node.fixings);
        s.record_pseudo(&node, &lp);

        match lp.status {
            LpStatus::Infeasible => {
                if node.id == 0 {
                    let hint = infeasibility_hint(model, engine);
                    return SolveResult {
                        nodes: s.nodes,
                        lp_solves: s.lp_solves,
                        ..SolveResult::terminal(SolveStatus::Infeasible, start, hint)
                    };
                }
                continue;
            }
            LpStatus::Unbounded => {
                if node.id == 0 {
                    return SolveResult {
                        nodes: s.nodes,
                        lp_solves: s.lp_solves,
                        ..SolveResult::terminal(SolveStatus::Unbounded, start, None)
                    };
                }
                // Bounded binaries cannot make a child unbounded when the root was not.
                s.numerical_trouble = Some(format!("node {} reported unbounded", node.id));
                continue;
            }
            LpStatus::Failed => {
                if node.id == 0 {
                    return SolveResult {
                        nodes: s.nodes,
                        lp_solves: s.lp_solves,
                        ..SolveResult::terminal(SolveStatus::NumericalFailure, start, lp.message)
                    };
                }
                s.numerical_trouble = lp.message.or(Some(format!("node {} failed", node.id)));
                continue;
            }
            LpStatus::Optimal => {}
        }

        let bound = lp.objective.max(node.bound);
        if node.id == 0 {
            root_bound = Some(lp.objective);
        }
        if bound >= s.cutoff() {
            pruned_min = pruned_min.min(bound);
            continue;
        }
        let frac = s.fractional(&lp.values);
        if frac.is_empty() {
            if s.try_incumbent(&lp) {
                let lb = open.min_bound().map_or(bound, |b| b.min(bound));
                s.log_line(lb);
            }
            continue;
        }
        if node.id == 0 && s.incumbent.is_none() {
            s.rounding_heuristic(&lp.values, &node.fixings);
        }

        let (j, v) = s.choose_branch(&frac);
        let mut children = [(0.0, false), (1.0, true)].map(|(val, up)| {
            let mut fixings = node.fixings.clone();
            fixings.push((j, val));
            let id = s.next_id;
            s.next_id += 1;
            Node {
                id,
                depth: node.depth + 1,
                bound,
                fixings,
                origin: Some((j, v, up)),
                parent_obj: lp.objective,
            }
        });
        // Preferred child follows the rounding direction.
        if v - v.floor() >= 0.5 {
            children.swap(0, 1);
        }
        let [preferred, other] = children;
        match opts.node_order {
            NodeOrder::BestBound => {
                open.push(other);
                pending = Some(preferred);
            }
            NodeOrder::DepthFirst => {
                open.push(other);
                open.push(preferred);
            }
        }

        if s.nodes % opts.log_every.max(1) == 0 {
            let lb = open.min_bound().map_or(bound, |b| b.min(bound));
            s.log_line(lb);
        }
        if let Some((inc, _)) = &s.incumbent {
            let lb = open.min_bound().map_or(bound, |b| b.min(bound));
            if relative_gap(*inc, lb) <= opts.rel_gap {
                break;
            }
        }
    }

    let pending_bound = pending.as_ref().map(|n| n.bound);
    if let Some(p) = pending {
        open.push(p);
    }
    let incumbent_obj = s.incumbent.as_ref().map(|(o, _)| *o);
    let mut best_bound = open
        .min_bound()
        .unwrap_or(f64::INFINITY)
        .min(pending_bound.unwrap_or(f64::INFINITY))
        .min(pruned_min)
        .min(incumbent_obj.unwrap_or(f64::INFINITY));
    if let Some(r) = root_bound {
        best_bound = best_bound.max(r);
    }

    let status = match (&s.incumbent, limit_hit) {
        (Some((o, _)), true) if relative_gap(*o, best_bound) > opts.rel_gap => SolveStatus::LimitReached,
        (Some(_), _) => SolveStatus::OptimalWithinGap,
        (None, true) => SolveStatus::LimitReached,
        (None, false) if s.numerical_trouble.is_some() => SolveStatus::NumericalFailure,
        (None, false) => SolveStatus::Infeasible,
    };
    s.log_line(best_bound);
    let message = match status {
        SolveStatus::Infeasible => Some("relaxation feasible but no integer assignment exists".into()),
        _ => s.numerical_trouble.clone(),
    };
    log::debug!(
        "branch-and-bound finished: {:?} after {} nodes, {} open",
        status,
        s.nodes,
        open.len()
    );
    let (objective, values) = match s.incumbent {
        Some((o, v)) => (Some(o), Some(v)),
        None => (None, None),
    };
    SolveResult {
        status,
        objective,
        best_bound,
        values,
        root_bound,
        nodes: s.nodes,
        lp_solves: s.lp_solves,
        wall_time: start.elapsed(),
        incumbents: s.incumbents,
        log: s.log,
        message,
    }
}

/// Names the first row family (row-name prefix before `_`) whose addition
/// makes the relaxation infeasible, adding families in model order.
pub fn infeasibility_hint(model: &MilpModel, engine: &dyn LpEngine) -> Option<String> {
    let mut families: Vec<String> = Vec::new();
    for r in &model.rows {
        let fam = family_of(&r.name);
        if !families.iter().any(|f| f == fam) {
            families.push(fam.to_string());
        }
    }
    let mut sub = MilpModel {
        name: model.name.clone(),
        columns: model.columns.clone(),
        rows: Vec::new(),
    };
    let bounds_only = engine.open(&sub).solve(&[]);
    if bounds_only.status == LpStatus::Infeasible {
        return Some("column bounds are inconsistent".into());
    }
    for fam in &families {
        sub.rows.extend(
            model
                .rows
                .iter()
                .filter(|r| family_of(&r.name) == fam)
                .cloned(),
        );
        if engine.open(&sub).solve(&[]).status == LpStatus::Infeasible {
            return Some(format!("infeasible once row family `{fam}` is added"));
        }
    }
    None
}

fn family_of(name: &str) -> &str {
    name.split('_').next().unwrap_or(name)
}
