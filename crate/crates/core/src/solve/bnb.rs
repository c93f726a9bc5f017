use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::simplex::{solve_lp_bounds, LpOptions, LpSolution, LpStatus};
use crate::linmodel::{MilpModel, VarKind};

pub const INTEGRALITY_TOL: f64 = 1e-6;
pub const DEFAULT_GAP_TOL: f64 = 1e-6;
pub const DEFAULT_NODE_LIMIT: u64 = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MipStatus {
    Optimal,
    /// Node limit reached with an incumbent; see `gap`.
    Feasible,
    Infeasible,
    /// Node limit reached before any incumbent was found.
    NoSolution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeLogEntry {
    pub node: u64,
    pub depth: u32,
    pub bound: f64,
    pub incumbent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MipResult {
    pub status: MipStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    pub best_bound: f64,
    pub gap: f64,
    pub nodes: u64,
    pub lp_solves: u64,
    pub wall_time_secs: f64,
    pub method: String,
    pub node_log: Vec<NodeLogEntry>,
}

impl MipResult {
    pub fn has_solution(&self) -> bool {
        matches!(self.status, MipStatus::Optimal | MipStatus::Feasible)
    }

    /// Writes the node log as `node,depth,bound,incumbent`.
    pub fn write_node_log<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for e in &self.node_log {
            w.serialize(e)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// How the rounding heuristic sets one binary from a relaxed solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RoundRule {
    /// 1 when `x[column]` exceeds `threshold`.
    Above { column: usize, threshold: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct BnbConfig {
    pub gap_tol: f64,
    pub node_limit: u64,
    /// Branching priority per column; higher branches first. Empty means equal.
    pub priority: Vec<u8>,
    pub rounding: Vec<(usize, RoundRule)>,
    /// Binaries the final incumbent tries to switch off, in order.
    pub polish: Vec<usize>,
    pub log_nodes: bool,
    pub lp: LpOptions,
}

impl Default for BnbConfig {
    fn default() -> Self {
        Self {
            gap_tol: DEFAULT_GAP_TOL,
            node_limit: DEFAULT_NODE_LIMIT,
            priority: Vec::new(),
            rounding: Vec::new(),
            polish: Vec::new(),
            log_nodes: false,
            lp: LpOptions::default(),
        }
    }
}

impl BnbConfig {
    /// Re-targets column references onto a submodel with columns `cols`.
    pub fn restricted(&self, cols: &[usize], n_full: usize) -> Self {
        let mut remap = vec![usize::MAX; n_full];
        for (k, &j) in cols.iter().enumerate() {
            remap[j] = k;
        }
        let priority = if self.priority.is_empty() {
            Vec::new()
        } else {
            cols.iter().map(|&j| self.priority[j]).collect()
        };
        let rounding = self
            .rounding
            .iter()
            .filter_map(|&(b, rule)| {
                let RoundRule::Above { column, threshold } = rule;
                (remap[b] != usize::MAX && remap[column] != usize::MAX).then(|| {
                    (
                        remap[b],
                        RoundRule::Above {
                            column: remap[column],
                            threshold,
                        },
                    )
                })
            })
            .collect();
        let polish = self
            .polish
            .iter()
            .filter(|&&j| remap[j] != usize::MAX)
            .map(|&j| remap[j])
            .collect();
        Self {
            priority,
            rounding,
            polish,
            ..self.clone()
        }
    }
}

pub(crate) fn close_or_better(candidate: f64, reference: f64) -> bool {
    candidate <= reference + 1e-12 * reference.abs().max(1.0)
}

struct Node {
    bound: f64,
    id: u64,
    depth: u32,
    fixings: Vec<(usize, f64)>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // Max-heap on the reversed key: lowest bound first, then oldest node.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then_with(|| other.id.cmp(&self.id))
    }
}

pub(crate) struct Solver<'a> {
    model: &'a MilpModel,
    cfg: &'a BnbConfig,
    lower: Vec<f64>,
    upper: Vec<f64>,
    binaries: Vec<usize>,
    pub(crate) lp_solves: u64,
}

impl<'a> Solver<'a> {
    pub(crate) fn new(model: &'a MilpModel, cfg: &'a BnbConfig) -> Self {
        Self {
            model,
            cfg,
            lower: model.variables.iter().map(|v| v.lower).collect(),
            upper: model.variables.iter().map(|v| v.upper).collect(),
            binaries: model.binaries().collect(),
            lp_solves: 0,
        }
    }

    pub(crate) fn solve_fixed(&mut self, fixings: &[(usize, f64)]) -> LpSolution {
        let mut lo = self.lower.clone();
        let mut up = self.upper.clone();
        for &(j, v) in fixings {
            lo[j] = v;
            up[j] = v;
        }
        self.lp_solves += 1;
        solve_lp_bounds(self.model, &lo, &up, &self.cfg.lp)
    }

    fn all_binaries_from(&self, x: &[f64]) -> Vec<(usize, f64)> {
        self.binaries.iter().map(|&j| (j, x[j].round().clamp(0.0, 1.0))).collect()
    }

    fn is_integral(&self, x: &[f64]) -> bool {
        self.binaries
            .iter()
            .all(|&j| (x[j] - x[j].round()).abs() <= INTEGRALITY_TOL)
    }

    fn rounding(&mut self, x: &[f64]) -> Option<LpSolution> {
        let mut fix = self.all_binaries_from(x);
        for (b, rule) in &self.cfg.rounding {
            let RoundRule::Above { column, threshold } = *rule;
            let v: f64 = if x[column] > threshold { 1.0 } else { 0.0 };
            if let Some(f) = fix.iter_mut().find(|(j, _)| j == b) {
                f.1 = v.clamp(self.lower[*b], self.upper[*b]);
            }
        }
        let s = self.solve_fixed(&fix);
        (s.status == LpStatus::Optimal).then_some(s)
    }

    /// Switches listed binaries from 1 to 0 while the objective does not get worse.
    pub(crate) fn polish(&mut self, mut inc: LpSolution) -> LpSolution {
        for k in 0..self.cfg.polish.len() {
            let j = self.cfg.polish[k];
            if inc.x[j] < 0.5 || self.lower[j] > 0.0 {
                continue;
            }
            let mut fix = self.all_binaries_from(&inc.x);
            if let Some(f) = fix.iter_mut().find(|(c, _)| *c == j) {
                f.1 = 0.0;
            }
            let s = self.solve_fixed(&fix);
            if s.status == LpStatus::Optimal && close_or_better(s.objective, inc.objective) {
                inc = s;
            }
        }
        inc
    }

    fn branch_column(&self, x: &[f64]) -> Option<usize> {
        let mut best: Option<(u8, f64, usize)> = None;
        for &j in &self.binaries {
            let f = x[j] - x[j].floor();
            let frac = f.min(1.0 - f);
            if frac <= INTEGRALITY_TOL {
                continue;
            }
            let p = self.cfg.priority.get(j).copied().unwrap_or(0);
            let better = match best {
                None => true,
                Some((bp, bf, _)) => p > bp || (p == bp && frac > bf + 1e-12),
            };
            if better {
                best = Some((p, frac, j));
            }
        }
        best.map(|(_, _, j)| j)
    }
}

/// Branch and bound with default configuration.
pub fn branch_and_bound(model: &MilpModel, gap_tol: f64, node_limit: u64) -> MipResult {
    let cfg = BnbConfig {
        gap_tol,
        node_limit,
        ..BnbConfig::default()
    };
    branch_and_bound_with(model, &cfg)
}

/// Best-bound branch and bound over the binary columns of `model`.
pub fn branch_and_bound_with(model: &MilpModel, cfg: &BnbConfig) -> MipResult {
    let start = Instant::now();
    let mut s = Solver::new(model, cfg);
    let mut log = Vec::new();
    let finish = |status, inc: Option<LpSolution>, bound: f64, nodes, s: &Solver, log| {
        let (x, objective) = match inc {
            Some(l) => (l.x, l.objective),
            None => (vec![0.0; model.num_vars()], f64::NAN),
        };
        let gap = if objective.is_finite() && bound.is_finite() {
            ((objective - bound) / objective.abs().max(1e-10)).max(0.0)
        } else {
            f64::INFINITY
        };
        MipResult {
            status,
            x,
            objective,
            best_bound: bound,
            gap,
            nodes,
            lp_solves: s.lp_solves,
            wall_time_secs: start.elapsed().as_secs_f64(),
            method: "branch_and_bound".into(),
            node_log: log,
        }
    };

    let root = s.solve_fixed(&[]);
    match root.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible | LpStatus::Unbounded => {
            return finish(MipStatus::Infeasible, None, f64::INFINITY, 1, &s, log);
        }
        LpStatus::IterationLimit => {
            return finish(MipStatus::NoSolution, None, f64::NEG_INFINITY, 1, &s, log);
        }
    }

    let mut incumbent: Option<LpSolution> = None;
    let consider = |cand: LpSolution, inc: &mut Option<LpSolution>| {
        if inc.as_ref().is_none_or(|i| cand.objective < i.objective) {
            *inc = Some(cand);
        }
    };
    if !s.binaries.is_empty() && !s.is_integral(&root.x) {
        if let Some(h) = s.rounding(&root.x) {
            consider(h, &mut incumbent);
        }
    }

    let mut heap = BinaryHeap::new();
    let mut next_id = 0u64;
    let mut nodes = 0u64;
    let mut pending_root = Some(root);
    heap.push(Node {
        bound: pending_root.as_ref().map_or(f64::NEG_INFINITY, |r| r.objective),
        id: next_id,
        depth: 0,
        fixings: Vec::new(),
    });
    next_id += 1;
    let mut pruned_min = f64::INFINITY;
    let mut hit_limit = false;

    while let Some(node) = heap.pop() {
        let inc_obj = incumbent.as_ref().map_or(f64::INFINITY, |i| i.objective);
        if prunable(node.bound, inc_obj, cfg.gap_tol) {
            pruned_min = pruned_min.min(node.bound);
            continue;
        }
        if nodes >= cfg.node_limit {
            hit_limit = true;
            heap.push(node);
            break;
        }
        nodes += 1;
        let lp = match pending_root.take() {
            Some(r) if node.id == 0 => r,
            _ => s.solve_fixed(&node.fixings),
        };
        if cfg.log_nodes {
            log.push(NodeLogEntry {
                node: nodes,
                depth: node.depth,
                bound: if lp.status == LpStatus::Optimal { lp.objective } else { f64::INFINITY },
                incumbent: inc_obj,
            });
        }
        if lp.status != LpStatus::Optimal {
            continue;
        }
        if prunable(lp.objective, inc_obj, cfg.gap_tol) {
            pruned_min = pruned_min.min(lp.objective);
            continue;
        }
        match s.branch_column(&lp.x) {
            None => {
                let exact = s.binaries.iter().all(|&j| lp.x[j] == lp.x[j].round());
                let cand = if exact {
                    lp
                } else {
                    let fix = s.all_binaries_from(&lp.x);
                    let r = s.solve_fixed(&fix);
                    if r.status != LpStatus::Optimal {
                        continue;
                    }
                    r
                };
                consider(cand, &mut incumbent);
            }
            Some(j) => {
                for v in [0.0, 1.0] {
                    let mut fixings = node.fixings.clone();
                    fixings.push((j, v));
                    heap.push(Node {
                        bound: lp.objective,
                        id: next_id,
                        depth: node.depth + 1,
                        fixings,
                    });
                    next_id += 1;
                }
            }
        }
    }

    let remaining = heap.iter().map(|n| n.bound).fold(f64::INFINITY, f64::min);
    let incumbent = incumbent.map(|i| s.polish(i));
    match incumbent {
        None if hit_limit => finish(MipStatus::NoSolution, None, remaining, nodes, &s, log),
        None => finish(MipStatus::Infeasible, None, f64::INFINITY, nodes, &s, log),
        Some(inc) => {
            let bound = inc.objective.min(pruned_min).min(remaining);
            let status = if hit_limit && !prunable(bound, inc.objective, cfg.gap_tol) {
                MipStatus::Feasible
            } else {
                MipStatus::Optimal
            };
            finish(status, Some(inc), bound, nodes, &s, log)
        }
    }
}

fn prunable(bound: f64, incumbent: f64, gap_tol: f64) -> bool {
    if !incumbent.is_finite() {
        return false;
    }
    let slack = gap_tol * incumbent.abs().max(1e-10) + 1e-12 * incumbent.abs().max(1.0);
    bound >= incumbent - slack
}

/// Every assignment of the free binaries of `model` completed by an LP, as
/// a brute-force reference. Returns the best objective and its solution.
pub fn enumerate_binaries(model: &MilpModel) -> Option<LpSolution> {
    let free: Vec<usize> = model
        .variables
        .iter()
        .enumerate()
        .filter(|(_, v)| v.kind == VarKind::Binary && v.lower < v.upper)
        .map(|(j, _)| j)
        .collect();
    assert!(free.len() <= 20, "enumeration over {} binaries", free.len());
    let mut best: Option<LpSolution> = None;
    for mask in 0u32..(1 << free.len()) {
        let fix: Vec<(usize, f64)> = free
            .iter()
            .enumerate()
            .map(|(k, &j)| (j, ((mask >> k) & 1) as f64))
            .collect();
        let s = super::simplex::solve_lp(model, &fix);
        if s.status == LpStatus::Optimal && best.as_ref().is_none_or(|b| s.objective < b.objective) {
            best = Some(s);
        }
    }
    best
}
