//! Branch-and-bound over the facility-opening binaries.
//!
//! Two node strategies share one LP context and a global cut pool:
//! `LazyOA` solves the node LP, runs one separation round and re-solves;
//! `ConvergedOA` repeats separation until the cone residual is below the cone
//! tolerance, which emulates a conic (QCP) node relaxation. Incumbents come
//! from fixed-pattern subproblems and must pass `Model::check_point`.

use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap, HashSet};
use std::fmt;
use std::time::Instant;

use thiserror::Error;

use crate::ccflp::{CcflpInstance, FormulationKind, VarMap};
use crate::cuts::{ConvergeOutcome, OaRelaxation, CONE_TOL, ROUND_LIMIT};
use crate::lp::{Basis, LpError, LpStatus};
use crate::model::{Model, Point};

#[derive(Debug, Error)]
pub enum BnbError {
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("node relaxation ended with LP status {0:?}")]
    Relaxation(LpStatus),
    #[error("invalid configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeStrategy {
    LazyOA,
    ConvergedOA,
}

impl NodeStrategy {
    pub fn as_str(self) -> &'static str {
        match self {
            NodeStrategy::LazyOA => "lazy",
            NodeStrategy::ConvergedOA => "converged",
        }
    }
}

impl std::str::FromStr for NodeStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lazy" => Ok(NodeStrategy::LazyOA),
            "converged" => Ok(NodeStrategy::ConvergedOA),
            other => Err(format!("unknown node strategy `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchOrder {
    BestBound,
    DepthFirst,
}

impl SearchOrder {
    pub fn as_str(self) -> &'static str {
        match self {
            SearchOrder::BestBound => "bestbound",
            SearchOrder::DepthFirst => "dfs",
        }
    }
}

impl std::str::FromStr for SearchOrder {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "bestbound" => Ok(SearchOrder::BestBound),
            "dfs" => Ok(SearchOrder::DepthFirst),
            other => Err(format!("unknown search order `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveConfig {
    pub node_strategy: NodeStrategy,
    pub time_limit_s: f64,
    pub rel_gap_tol: f64,
    pub int_tol: f64,
    pub feas_tol: f64,
    pub node_limit: usize,
    pub search: SearchOrder,
    /// Recorded with results; the search itself is deterministic.
    pub seed: u64,
    pub cone_tol: f64,
    pub round_limit: usize,
    /// Also compute the converged root bound under `LazyOA` (on a copy of
    /// the root LP, so the lazy search is unaffected).
    pub root_conic_bound: bool,
    /// Run the rounding heuristic every this many nodes (0 = root only).
    pub heuristic_every: usize,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            node_strategy: NodeStrategy::ConvergedOA,
            time_limit_s: 14_400.0,
            rel_gap_tol: 1e-6,
            int_tol: 1e-6,
            feas_tol: 1e-4,
            node_limit: 10_000_000,
            search: SearchOrder::BestBound,
            seed: 0,
            cone_tol: CONE_TOL,
            round_limit: ROUND_LIMIT,
            root_conic_bound: false,
            heuristic_every: 10,
        }
    }
}

impl SolveConfig {
    /// `key=value` lines, one per field, in declaration order.
    pub fn describe(&self) -> String {
        format!(
            "node_strategy={}\ntime_limit_s={}\nrel_gap_tol={}\nint_tol={}\nfeas_tol={}\nnode_limit={}\nsearch={}\nseed={}\ncone_tol={}\nround_limit={}\nroot_conic_bound={}\nheuristic_every={}\n",
            self.node_strategy.as_str(),
            self.time_limit_s,
            self.rel_gap_tol,
            self.int_tol,
            self.feas_tol,
            self.node_limit,
            self.search.as_str(),
            self.seed,
            self.cone_tol,
            self.round_limit,
            self.root_conic_bound,
            self.heuristic_every,
        )
    }

    fn check(&self) -> Result<(), BnbError> {
        let positive = [
            ("time_limit_s", self.time_limit_s),
            ("rel_gap_tol", self.rel_gap_tol),
            ("int_tol", self.int_tol),
            ("feas_tol", self.feas_tol),
            ("cone_tol", self.cone_tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(BnbError::Config(format!("{name} must be > 0, got {v}")));
            }
        }
        if self.round_limit == 0 || self.node_limit == 0 {
            return Err(BnbError::Config("round and node limits must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MipStatus {
    Optimal,
    TimeLimit,
    NodeLimit,
    Infeasible,
    /// Tree exhausted but relaxation precision left the gap above tolerance.
    Stalled,
}

impl MipStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            MipStatus::Optimal => "Optimal",
            MipStatus::TimeLimit => "TimeLimit",
            MipStatus::NodeLimit => "NodeLimit",
            MipStatus::Infeasible => "Infeasible",
            MipStatus::Stalled => "Stalled",
        }
    }
}

impl fmt::Display for MipStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Root relaxation bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootBounds {
    /// Integrality and cones both relaxed.
    pub lb_initial_lin: f64,
    /// Only integrality relaxed (converged cut loop), when computed.
    pub lb_initial_conic: Option<f64>,
    /// Bound after the root cut loop of the active strategy.
    pub lb_final: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    pub time_s: f64,
    pub lb: f64,
    pub ub: f64,
}

#[derive(Debug, Clone)]
pub struct MipResult {
    pub status: MipStatus,
    pub incumbent: Option<Point>,
    pub ub: f64,
    pub lb: f64,
    pub nodes: usize,
    pub runtime_s: f64,
    pub root: RootBounds,
    pub trace: Vec<TracePoint>,
    pub lp_iterations: usize,
    pub cuts: usize,
}

impl MipResult {
    /// `100 * (ub - lb) / |ub|`, or `None` without an incumbent.
    pub fn rel_gap_pct(&self) -> Option<f64> {
        if !self.ub.is_finite() || self.ub == 0.0 {
            return None;
        }
        Some((100.0 * (self.ub - self.lb) / self.ub.abs()).max(0.0))
    }
}

/// Fixings of a branch-and-bound node.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeRecord {
    pub fixed_zero: BTreeSet<usize>,
    pub fixed_one: BTreeSet<usize>,
    pub lb: f64,
    pub depth: usize,
}

impl NodeRecord {
    pub fn root() -> Self {
        NodeRecord {
            fixed_zero: BTreeSet::new(),
            fixed_one: BTreeSet::new(),
            lb: f64::NEG_INFINITY,
            depth: 0,
        }
    }

    /// Child with `facility` fixed to `one`, after propagating `sum y = p`.
    /// `None` when the fixings admit no pattern with exactly `p` ones.
    pub fn child(&self, facility: usize, one: bool, n_facilities: usize, p: usize) -> Option<NodeRecord> {
        let mut c = self.clone();
        c.depth += 1;
        if one {
            c.fixed_one.insert(facility);
        } else {
            c.fixed_zero.insert(facility);
        }
        if c.fixed_one.len() > p || n_facilities - c.fixed_zero.len() < p {
            return None;
        }
        if c.fixed_one.len() == p {
            for j in 0..n_facilities {
                if !c.fixed_one.contains(&j) {
                    c.fixed_zero.insert(j);
                }
            }
        } else if n_facilities - c.fixed_zero.len() == p {
            for j in 0..n_facilities {
                if !c.fixed_zero.contains(&j) {
                    c.fixed_one.insert(j);
                }
            }
        }
        Some(c)
    }

    pub fn is_fixed(&self, j: usize) -> bool {
        self.fixed_zero.contains(&j) || self.fixed_one.contains(&j)
    }

    pub fn free(&self, n_facilities: usize) -> Vec<usize> {
        (0..n_facilities).filter(|&j| !self.is_fixed(j)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("no fractional candidate")]
pub struct NoFractional;

/// Most-fractional candidate, ties to the smallest index.
pub fn select_branch_var(y: &[f64], candidates: &[usize], int_tol: f64) -> Result<usize, NoFractional> {
    let mut best: Option<(usize, f64)> = None;
    for &j in candidates {
        let frac = y[j].min(1.0 - y[j]);
        if frac <= int_tol {
            continue;
        }
        match best {
            Some((bj, bf)) if frac < bf || (frac == bf && j > bj) => {}
            _ => best = Some((j, frac)),
        }
    }
    best.map(|b| b.0).ok_or(NoFractional)
}

/// `p` facilities with the largest `y`, ties by larger capacity then index.
pub fn rounding_pattern(y: &[f64], capacity: &[f64], p: usize) -> Vec<bool> {
    let mut order: Vec<usize> = (0..y.len()).collect();
    order.sort_by(|&a, &b| {
        y[b].total_cmp(&y[a])
            .then(capacity[b].total_cmp(&capacity[a]))
            .then(a.cmp(&b))
    });
    let mut pattern = vec![false; y.len()];
    for &j in order.iter().take(p) {
        pattern[j] = true;
    }
    pattern
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LogEvent {
    RootLin,
    RootConic,
    CutRound,
    Node,
    Incumbent,
    Done,
}

impl LogEvent {
    pub fn as_str(self) -> &'static str {
        match self {
            LogEvent::RootLin => "root_lin",
            LogEvent::RootConic => "root_conic",
            LogEvent::CutRound => "cut_round",
            LogEvent::Node => "node",
            LogEvent::Incumbent => "incumbent",
            LogEvent::Done => "done",
        }
    }
}

/// One structured log line: `time=.. event=.. lb=.. ub=.. nodes=..`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRecord {
    pub time_s: f64,
    pub event: LogEvent,
    pub lb: f64,
    pub ub: f64,
    pub nodes: usize,
}

impl fmt::Display for LogRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "time={:.6} event={} lb={:.9e} ub={:.9e} nodes={}",
            self.time_s,
            self.event.as_str(),
            self.lb,
            self.ub,
            self.nodes
        )
    }
}

struct OpenNode {
    id: usize,
    rec: NodeRecord,
    basis: Option<Basis>,
}

struct HeapEntry(OpenNode);

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for HeapEntry {}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapEntry {
    // Max-heap: smallest bound first, then deeper, then older.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .0
            .rec
            .lb
            .total_cmp(&self.0.rec.lb)
            .then(self.0.rec.depth.cmp(&other.0.rec.depth))
            .then(other.0.id.cmp(&self.0.id))
    }
}

enum Frontier {
    Best(BinaryHeap<HeapEntry>),
    Depth(Vec<OpenNode>),
}

impl Frontier {
    fn push(&mut self, node: OpenNode) {
        match self {
            Frontier::Best(h) => h.push(HeapEntry(node)),
            Frontier::Depth(s) => s.push(node),
        }
    }

    fn pop(&mut self) -> Option<OpenNode> {
        match self {
            Frontier::Best(h) => h.pop().map(|e| e.0),
            Frontier::Depth(s) => s.pop(),
        }
    }

    fn min_lb(&self) -> f64 {
        match self {
            Frontier::Best(h) => h.peek().map_or(f64::INFINITY, |e| e.0.rec.lb),
            Frontier::Depth(s) => s.iter().map(|n| n.rec.lb).fold(f64::INFINITY, f64::min),
        }
    }

    fn is_empty(&self) -> bool {
        match self {
            Frontier::Best(h) => h.is_empty(),
            Frontier::Depth(s) => s.is_empty(),
        }
    }
}

struct Search<'a> {
    model: &'a Model,
    map: &'a VarMap,
    cfg: &'a SolveConfig,
    relax: OaRelaxation,
    start: Instant,
    capacity: Vec<f64>,
    nodes: usize,
    ub: f64,
    incumbent: Option<Point>,
    closed_lb: f64,
    last_lb: f64,
    trace: Vec<TracePoint>,
    tried_patterns: HashSet<Vec<bool>>,
    log: &'a mut dyn FnMut(&LogRecord),
}

impl<'a> Search<'a> {
    fn elapsed(&self) -> f64 {
        self.start.elapsed().as_secs_f64()
    }

    fn emit(&mut self, event: LogEvent, lb: f64) {
        let rec = LogRecord {
            time_s: self.elapsed(),
            event,
            lb,
            ub: self.ub,
            nodes: self.nodes,
        };
        (self.log)(&rec);
    }

    fn record_trace(&mut self, lb: f64) {
        let lb = lb.max(self.last_lb).min(self.ub);
        let changed = self
            .trace
            .last()
            .is_none_or(|t| t.lb != lb || t.ub != self.ub);
        self.last_lb = lb;
        if changed {
            let time_s = self.elapsed();
            self.trace.push(TracePoint { time_s, lb, ub: self.ub });
        }
    }

    fn prune_threshold(&self) -> f64 {
        if self.ub.is_finite() {
            self.ub - self.cfg.rel_gap_tol * self.ub.abs()
        } else {
            f64::INFINITY
        }
    }

    fn apply_fixings(&mut self, rec: &NodeRecord) -> Result<(), BnbError> {
        for (j, &yid) in self.map.y.iter().enumerate() {
            let (lo, hi) = if rec.fixed_one.contains(&j) {
                (1.0, 1.0)
            } else if rec.fixed_zero.contains(&j) {
                (0.0, 0.0)
            } else {
                (0.0, 1.0)
            };
            self.relax.simplex.set_col_bounds(yid.index(), lo, hi)?;
        }
        Ok(())
    }

    fn run_strategy(&mut self) -> ConvergeOutcome {
        match self.cfg.node_strategy {
            NodeStrategy::LazyOA => self.relax.single_round(self.cfg.cone_tol),
            NodeStrategy::ConvergedOA => self.relax.converge(self.cfg.cone_tol, self.cfg.round_limit),
        }
    }

    fn y_values(&self, primal: &[f64]) -> Vec<f64> {
        self.map.y.iter().map(|id| primal[id.index()]).collect()
    }

    /// Solves the continuous problem with `y` fixed to `pattern`; returns a
    /// cone-repaired point and its objective when it passes `check_point`.
    fn evaluate_pattern(&mut self, pattern: &[bool]) -> Result<Option<(Point, f64)>, BnbError> {
        for (j, &yid) in self.map.y.iter().enumerate() {
            let v = if pattern[j] { 1.0 } else { 0.0 };
            self.relax.simplex.set_col_bounds(yid.index(), v, v)?;
        }
        let out = self.relax.converge(self.cfg.cone_tol, self.cfg.round_limit);
        match out.solution.status {
            LpStatus::Optimal => {}
            LpStatus::Infeasible => return Ok(None),
            other => return Err(BnbError::Relaxation(other)),
        }
        let point = repair_point(self.model, self.map, pattern, &out.solution.primal);
        let report = self
            .model
            .check_point(&point, self.cfg.feas_tol, self.cfg.int_tol)
            .expect("point sized from model");
        if !report.feasible {
            return Ok(None);
        }
        let obj = self.model.evaluate_objective(&point).expect("point sized from model");
        Ok(Some((point, obj)))
    }

    fn try_pattern(&mut self, pattern: Vec<bool>) -> Result<bool, BnbError> {
        if !self.tried_patterns.insert(pattern.clone()) {
            return Ok(false);
        }
        if let Some((point, obj)) = self.evaluate_pattern(&pattern)? {
            if obj < self.ub {
                self.ub = obj;
                self.incumbent = Some(point);
                let lb = self.last_lb;
                self.record_trace(lb);
                self.emit(LogEvent::Incumbent, lb);
                return Ok(true);
            }
        }
        Ok(false)
    }

    fn global_lb(&self, frontier: &Frontier) -> f64 {
        frontier.min_lb().min(self.closed_lb).min(self.ub).max(self.last_lb)
    }

    fn gap_closed(&self, lb: f64) -> bool {
        self.ub.is_finite() && self.ub - lb <= self.cfg.rel_gap_tol * self.ub.abs().max(1e-12)
    }
}

/// Repairs an LP point with integral `y`: snaps `y` to `pattern` and raises
/// each cone's `z` to `v^2 / y`.
fn repair_point(model: &Model, map: &VarMap, pattern: &[bool], primal: &[f64]) -> Point {
    let mut point = Point::new(primal.to_vec());
    for (j, &yid) in map.y.iter().enumerate() {
        point.set(yid, if pattern[j] { 1.0 } else { 0.0 });
    }
    for def in model.vars() {
        let v = point.get(def.id).clamp(def.lower, def.upper);
        point.set(def.id, v);
    }
    for cone in model.cones() {
        let (y, v) = (point.get(cone.y), point.get(cone.v));
        let z = point.get(cone.z).max(0.0);
        let need = if y > 0.0 { v * v / y } else { 0.0 };
        point.set(cone.z, z.max(need));
    }
    point
}

#[derive(Debug, Clone)]
pub struct RootOutcome {
    pub bounds: RootBounds,
    pub solution: ConvergeOutcome,
}

/// Root relaxation under the active strategy, plus the converged bound on a
/// copy of the LP when `with_conic` is set under `LazyOA`.
pub fn root_processing(
    relax: &mut OaRelaxation,
    cfg: &SolveConfig,
    with_conic: bool,
    log: &mut dyn FnMut(LogEvent, f64),
) -> RootOutcome {
    let conic_copy = if with_conic && cfg.node_strategy == NodeStrategy::LazyOA {
        Some(relax.clone())
    } else {
        None
    };
    let out = match cfg.node_strategy {
        NodeStrategy::LazyOA => relax.single_round(cfg.cone_tol),
        NodeStrategy::ConvergedOA => relax.converge(cfg.cone_tol, cfg.round_limit),
    };
    let lb_initial_lin = out.objectives[0];
    log(LogEvent::RootLin, lb_initial_lin);
    for &obj in &out.objectives[1..] {
        log(LogEvent::CutRound, obj);
    }
    let lb_final = out.solution.objective;
    let lb_initial_conic = match (cfg.node_strategy, conic_copy) {
        (NodeStrategy::ConvergedOA, _) => Some(lb_final),
        (NodeStrategy::LazyOA, Some(mut copy)) => {
            let c = copy.converge(cfg.cone_tol, cfg.round_limit);
            (c.solution.status == LpStatus::Optimal).then_some(c.solution.objective)
        }
        _ => None,
    };
    if let Some(c) = lb_initial_conic {
        if out.solution.status == LpStatus::Optimal {
            log(LogEvent::RootConic, c);
        }
    }
    RootOutcome {
        bounds: RootBounds {
            lb_initial_lin,
            lb_initial_conic,
            lb_final,
        },
        solution: out,
    }
}

/// Opens the `p` largest entries of the relaxation's `y` and solves the
/// resulting continuous problem on a fresh relaxation of `model`.
pub fn rounding_heuristic(
    relaxation_point: &[f64],
    model: &Model,
    map: &VarMap,
    cfg: &SolveConfig,
) -> Result<Option<(Point, f64)>, BnbError> {
    let y: Vec<f64> = map.y.iter().map(|id| relaxation_point[id.index()]).collect();
    let capacity: Vec<f64> = map.v.iter().map(|id| model.var(*id).upper).collect();
    let pattern = rounding_pattern(&y, &capacity, map.p_open);
    let mut noop = |_: &LogRecord| {};
    let mut search = Search {
        model,
        map,
        cfg,
        relax: OaRelaxation::new(model)?,
        start: Instant::now(),
        capacity,
        nodes: 0,
        ub: f64::INFINITY,
        incumbent: None,
        closed_lb: f64::INFINITY,
        last_lb: f64::NEG_INFINITY,
        trace: Vec::new(),
        tried_patterns: HashSet::new(),
        log: &mut noop,
    };
    search.evaluate_pattern(&pattern)
}

/// Validates and builds `instance`, then solves it. A capacity deficit is
/// reported as an `Infeasible` result with zero nodes.
pub fn solve_instance(
    instance: &CcflpInstance,
    kind: FormulationKind,
    cfg: &SolveConfig,
    log: &mut dyn FnMut(&LogRecord),
) -> Result<MipResult, BnbError> {
    cfg.check()?;
    if instance.validate().is_err() {
        let rec = LogRecord {
            time_s: 0.0,
            event: LogEvent::Done,
            lb: f64::INFINITY,
            ub: f64::INFINITY,
            nodes: 0,
        };
        log(&rec);
        return Ok(MipResult {
            status: MipStatus::Infeasible,
            incumbent: None,
            ub: f64::INFINITY,
            lb: f64::INFINITY,
            nodes: 0,
            runtime_s: 0.0,
            root: RootBounds {
                lb_initial_lin: f64::INFINITY,
                lb_initial_conic: None,
                lb_final: f64::INFINITY,
            },
            trace: Vec::new(),
            lp_iterations: 0,
            cuts: 0,
        });
    }
    let (model, map) = instance
        .build_model(kind)
        .map_err(|e| BnbError::Config(e.to_string()))?;
    solve_with_log(&model, &map, cfg, log)
}

pub fn solve(model: &Model, map: &VarMap, cfg: &SolveConfig) -> Result<MipResult, BnbError> {
    solve_with_log(model, map, cfg, &mut |_| {})
}

pub fn solve_with_log(
    model: &Model,
    map: &VarMap,
    cfg: &SolveConfig,
    log: &mut dyn FnMut(&LogRecord),
) -> Result<MipResult, BnbError> {
    cfg.check()?;
    let start = Instant::now();
    let relax = OaRelaxation::new(model)?;
    let nj = map.y.len();
    let p = map.p_open;
    let capacity: Vec<f64> = map.v.iter().map(|id| model.var(*id).upper).collect();
    let mut s = Search {
        model,
        map,
        cfg,
        relax,
        start,
        capacity,
        nodes: 0,
        ub: f64::INFINITY,
        incumbent: None,
        closed_lb: f64::INFINITY,
        last_lb: f64::NEG_INFINITY,
        trace: Vec::new(),
        tried_patterns: HashSet::new(),
        log,
    };

    // Root.
    let root_rec = NodeRecord::root();
    s.apply_fixings(&root_rec)?;
    let mut root_events = Vec::new();
    let root = root_processing(&mut s.relax, cfg, cfg.root_conic_bound, &mut |e, v| root_events.push((e, v)));
    s.nodes = 1;
    for (e, v) in root_events {
        s.emit(e, v);
    }
    let root_bounds = root.bounds;
    let finish = |s: Search, status: MipStatus, lb: f64| {
        let runtime_s = s.elapsed();
        let lb = if s.ub.is_finite() { lb.min(s.ub) } else { lb };
        let rec = LogRecord {
            time_s: runtime_s,
            event: LogEvent::Done,
            lb,
            ub: s.ub,
            nodes: s.nodes,
        };
        (s.log)(&rec);
        MipResult {
            status,
            incumbent: s.incumbent,
            ub: s.ub,
            lb,
            nodes: s.nodes,
            runtime_s,
            root: root_bounds,
            trace: s.trace,
            lp_iterations: s.relax.simplex.total_iterations(),
            cuts: s.relax.pool.len(),
        }
    };
    match root.solution.solution.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => {
            return Ok(finish(s, MipStatus::Infeasible, f64::INFINITY));
        }
        other => return Err(BnbError::Relaxation(other)),
    }
    let root_sol = root.solution.solution;
    s.record_trace(root_sol.objective);
    let root_y = s.y_values(&root_sol.primal);
    let pattern = rounding_pattern(&root_y, &s.capacity, p);
    s.try_pattern(pattern)?;

    let mut frontier = match cfg.search {
        SearchOrder::BestBound => Frontier::Best(BinaryHeap::new()),
        SearchOrder::DepthFirst => Frontier::Depth(Vec::new()),
    };
    let mut next_id = 1;
    // The root is expanded through the same path as every other node, with
    // its relaxation already solved.
    let mut pending: Option<(NodeRecord, crate::lp::LpSolution)> = Some((
        NodeRecord {
            lb: root_sol.objective,
            ..root_rec
        },
        root_sol,
    ));

    loop {
        // Expand a solved node, if any.
        if let Some((rec, sol)) = pending.take() {
            let lb = rec.lb;
            let basis = sol.basis.clone();
            let y = s.y_values(&sol.primal);
            let free = rec.free(nj);
            let branch_on = match select_branch_var(&y, &free, cfg.int_tol) {
                Ok(j) => Some(j),
                Err(NoFractional) => {
                    let pattern: Vec<bool> = y.iter().map(|&v| v > 0.5).collect();
                    s.try_pattern(pattern)?;
                    if lb >= s.prune_threshold() || free.is_empty() {
                        None
                    } else {
                        // Integral but the gap is open: split on a free
                        // variable, open ones first.
                        free.iter().copied().find(|&j| y[j] > 0.5).or(free.first().copied())
                    }
                }
            };
            match branch_on {
                None => {
                    s.closed_lb = s.closed_lb.min(lb);
                }
                Some(j) => {
                    let up_first = y[j] >= 0.5;
                    let children = [(j, false), (j, true)];
                    let mut made = Vec::new();
                    for (jj, one) in children {
                        if let Some(mut c) = rec.child(jj, one, nj, p) {
                            c.lb = lb;
                            made.push((one, c));
                        }
                    }
                    // DFS pops the last pushed child first.
                    if cfg.search == SearchOrder::DepthFirst && !up_first {
                        made.reverse();
                    }
                    for (_, c) in made {
                        frontier.push(OpenNode {
                            id: next_id,
                            rec: c,
                            basis: Some(basis.clone()),
                        });
                        next_id += 1;
                    }
                }
            }
        }

        let glb = s.global_lb(&frontier);
        s.record_trace(glb);
        if s.gap_closed(glb) {
            let lb = glb;
            return Ok(finish(s, MipStatus::Optimal, lb));
        }
        if frontier.is_empty() {
            let lb = glb;
            let status = if s.incumbent.is_none() {
                MipStatus::Infeasible
            } else if s.gap_closed(lb) {
                MipStatus::Optimal
            } else {
                MipStatus::Stalled
            };
            return Ok(finish(s, status, lb));
        }
        if s.elapsed() > cfg.time_limit_s {
            return Ok(finish(s, MipStatus::TimeLimit, glb));
        }
        if s.nodes >= cfg.node_limit {
            return Ok(finish(s, MipStatus::NodeLimit, glb));
        }

        let node = frontier.pop().expect("frontier nonempty");
        if node.rec.lb >= s.prune_threshold() {
            s.closed_lb = s.closed_lb.min(node.rec.lb);
            continue;
        }
        s.apply_fixings(&node.rec)?;
        if let Some(b) = &node.basis {
            s.relax.simplex.load_basis(b);
        }
        let fully_fixed = node.rec.free(nj).is_empty();
        let mut out = if fully_fixed {
            s.relax.converge(cfg.cone_tol * 1e-3, cfg.round_limit)
        } else {
            s.run_strategy()
        };
        s.nodes += 1;
        match out.solution.status {
            LpStatus::Optimal => {}
            LpStatus::Infeasible => {
                s.emit(LogEvent::Node, node.rec.lb);
                continue;
            }
            other => return Err(BnbError::Relaxation(other)),
        }
        // Integral LP points under the lazy strategy are not accepted while
        // cones are violated.
        let mut rounds = 0;
        while !fully_fixed
            && out.max_residual > cfg.cone_tol
            && rounds < cfg.round_limit
            && select_branch_var(&s.y_values(&out.solution.primal), &node.rec.free(nj), cfg.int_tol).is_err()
        {
            rounds += 1;
            if s.relax.separate(&out.solution.primal, cfg.cone_tol) == 0 {
                break;
            }
            let sol = s.relax.solve();
            let residual = if sol.status == LpStatus::Optimal {
                s.relax.max_residual(&sol.primal)
            } else {
                f64::INFINITY
            };
            out.solution = sol;
            out.max_residual = residual;
            if out.solution.status != LpStatus::Optimal {
                break;
            }
        }
        match out.solution.status {
            LpStatus::Optimal => {}
            LpStatus::Infeasible => {
                s.emit(LogEvent::Node, node.rec.lb);
                continue;
            }
            other => return Err(BnbError::Relaxation(other)),
        }
        let lb = node.rec.lb.max(out.solution.objective);
        s.emit(LogEvent::Node, lb);
        if cfg.heuristic_every > 0 && s.nodes % cfg.heuristic_every == 0 {
            let basis = out.solution.basis.clone();
            let y = s.y_values(&out.solution.primal);
            let pattern = rounding_pattern(&y, &s.capacity, p);
            s.try_pattern(pattern)?;
            s.apply_fixings(&node.rec)?;
            s.relax.simplex.load_basis(&basis);
        }
        if lb >= s.prune_threshold() {
            s.closed_lb = s.closed_lb.min(lb);
            continue;
        }
        let rec = NodeRecord { lb, ..node.rec };
        pending = Some((rec, out.solution));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ccflp::tests::tiny;

    #[test]
    fn most_fractional_selection() {
        assert_eq!(select_branch_var(&[0.5, 0.9, 0.1], &[0, 1, 2], 1e-6), Ok(0));
        assert_eq!(select_branch_var(&[0.5, 0.5], &[0, 1], 1e-6), Ok(0));
        assert_eq!(select_branch_var(&[0.3, 0.6], &[0, 1], 1e-6), Ok(1));
        assert_eq!(select_branch_var(&[0.0, 1.0], &[0, 1], 1e-6), Err(NoFractional));
        assert_eq!(select_branch_var(&[0.5, 0.2], &[1], 1e-6), Ok(1));
    }

    #[test]
    fn child_propagation() {
        let root = NodeRecord::root();
        let a = root.child(0, true, 3, 2).unwrap();
        let b = a.child(1, true, 3, 2).unwrap();
        assert!(b.fixed_zero.contains(&2));
        let c = root.child(0, false, 3, 2).unwrap();
        assert_eq!(c.fixed_one, BTreeSet::from([1, 2]));
        assert!(c.child(1, false, 3, 2).is_none());
    }

    #[test]
    fn rounding_pattern_tie_breaks() {
        assert_eq!(rounding_pattern(&[0.5, 0.5], &[8.0, 12.0], 1), vec![false, true]);
        assert_eq!(rounding_pattern(&[0.5, 0.5], &[8.0, 8.0], 1), vec![true, false]);
        assert_eq!(rounding_pattern(&[0.2, 0.9, 0.7], &[1.0, 1.0, 1.0], 2), vec![false, true, true]);
    }

    #[test]
    fn heuristic_respects_fractional_and_binary_y() {
        let inst = CcflpInstance::from_data("h", vec![10.0], vec![8.0, 12.0], vec![5.0, 5.0], vec![vec![0.1, 0.1]], 0.01, 0.1, 1)
            .unwrap();
        let (m, map) = inst.build_model(FormulationKind::Perspective).unwrap();
        let mut pt = vec![0.0; m.num_vars()];
        pt[map.y[0].index()] = 0.5;
        pt[map.y[1].index()] = 0.5;
        let (point, _) = rounding_heuristic(&pt, &m, &map, &SolveConfig::default()).unwrap().unwrap();
        assert_eq!(point.get(map.y[1]), 1.0);
        assert_eq!(point.get(map.y[0]), 0.0);

        let inst = tiny();
        let (m, map) = inst.build_model(FormulationKind::Perspective).unwrap();
        let mut pt = vec![0.0; m.num_vars()];
        pt[map.y[0].index()] = 1.0;
        let (point, obj) = rounding_heuristic(&pt, &m, &map, &SolveConfig::default()).unwrap().unwrap();
        assert_eq!(point.get(map.y[0]), 1.0);
        assert!((obj - 8.0).abs() < 1e-6);

        // facility 0 alone cannot serve the demand
        let inst = CcflpInstance::from_data("h2", vec![10.0], vec![8.0, 12.0], vec![5.0, 5.0], vec![vec![0.1, 0.1]], 0.01, 0.1, 1)
            .unwrap();
        let (m, map) = inst.build_model(FormulationKind::Perspective).unwrap();
        let mut pt = vec![0.0; m.num_vars()];
        pt[map.y[0].index()] = 0.9;
        pt[map.y[1].index()] = 0.1;
        assert!(rounding_heuristic(&pt, &m, &map, &SolveConfig::default()).unwrap().is_none());
    }

    #[test]
    fn tiny_both_strategies() {
        let inst = tiny();
        for kind in [FormulationKind::Perspective, FormulationKind::Natural] {
            let (m, map) = inst.build_model(kind).unwrap();
            for strategy in [NodeStrategy::LazyOA, NodeStrategy::ConvergedOA] {
                let cfg = SolveConfig {
                    node_strategy: strategy,
                    ..SolveConfig::default()
                };
                let r = solve(&m, &map, &cfg).unwrap();
                assert_eq!(r.status, MipStatus::Optimal);
                assert!((r.ub - 8.0).abs() <= 1e-6 * 8.0, "{kind:?} {strategy:?} ub {}", r.ub);
                assert!(r.lb <= r.ub + 1e-9 * (1.0 + r.ub.abs()));
                let inc = r.incumbent.unwrap();
                assert!(m.check_point(&inc, 1e-4, 1e-6).unwrap().feasible);
            }
        }
    }

    #[test]
    fn zero_congestion_root_bounds_coincide() {
        let mut inst = tiny();
        inst.a = 0.0;
        let (m, map) = inst.build_model(FormulationKind::Perspective).unwrap();
        let r = solve(&m, &map, &SolveConfig::default()).unwrap();
        assert_eq!(r.root.lb_initial_conic, Some(r.root.lb_initial_lin));
    }

    #[test]
    fn log_lines_have_stable_fields() {
        let inst = tiny();
        let (m, map) = inst.build_model(FormulationKind::Perspective).unwrap();
        let mut lines = Vec::new();
        solve_with_log(&m, &map, &SolveConfig::default(), &mut |r| lines.push(r.to_string())).unwrap();
        assert!(lines.first().unwrap().contains("event=root_lin"));
        assert!(lines.last().unwrap().contains("event=done"));
        for l in &lines {
            let keys: Vec<&str> = l.split(' ').map(|kv| kv.split('=').next().unwrap()).collect();
            assert_eq!(keys, ["time", "event", "lb", "ub", "nodes"]);
        }
    }

    #[test]
    fn config_validation() {
        let inst = tiny();
        let (m, map) = inst.build_model(FormulationKind::Perspective).unwrap();
        let cfg = SolveConfig {
            rel_gap_tol: 0.0,
            ..SolveConfig::default()
        };
        assert!(matches!(solve(&m, &map, &cfg), Err(BnbError::Config(_))));
    }
}
