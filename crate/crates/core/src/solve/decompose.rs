use std::time::Instant;

use rayon::prelude::*;

use super::bnb::{branch_and_bound_with, close_or_better, BnbConfig, MipResult, MipStatus, Solver};
use super::simplex::LpStatus;
use crate::linmodel::{MilpModel, ModelMap, Owner, RowRole, VarKind, VarRole};

/// Components with more binary patterns than this go to branch and bound.
pub const MAX_ENUMERATED_PATTERNS: usize = 256;

/// Connected blocks of a model once the budget row is set aside.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Component {
    pub columns: Vec<usize>,
    pub rows: Vec<usize>,
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Splits `model` into independent blocks, ignoring the rows in `skip`.
pub fn components(model: &MilpModel, skip: &[usize]) -> Vec<Component> {
    let n = model.num_vars();
    let mut parent: Vec<usize> = (0..n).collect();
    for (i, c) in model.constraints.iter().enumerate() {
        if skip.contains(&i) {
            continue;
        }
        if let Some(&(first, _)) = c.coeffs.first() {
            for &(j, _) in &c.coeffs[1..] {
                let (a, b) = (find(&mut parent, first), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut slot = vec![usize::MAX; n];
    let mut out: Vec<Component> = Vec::new();
    for j in 0..n {
        let r = find(&mut parent, j);
        if slot[r] == usize::MAX {
            slot[r] = out.len();
            out.push(Component {
                columns: Vec::new(),
                rows: Vec::new(),
            });
        }
        out[slot[r]].columns.push(j);
    }
    for (i, c) in model.constraints.iter().enumerate() {
        if skip.contains(&i) {
            continue;
        }
        if let Some(&(first, _)) = c.coeffs.first() {
            let r = find(&mut parent, first);
            out[slot[r]].rows.push(i);
        }
    }
    out
}

/// `(δ, z)` column pairs so that patterns with δ = 1, z = 0 are skipped.
fn implication_pairs(map: &ModelMap, model: &MilpModel) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for j in 0..model.num_vars() {
        if let Some((owner @ Owner::Archetype(_), VarRole::HasBattery)) = map.key_of(j) {
            if let Some(z) = map.column(owner, VarRole::SurplusFlag) {
                pairs.push((j, z));
            }
        }
    }
    pairs
}

/// Binary patterns of `free` consistent with `pairs`, zeros first.
fn patterns(free: &[usize], pairs: &[(usize, usize)], cap: usize) -> Option<Vec<Vec<f64>>> {
    let mut out = vec![Vec::new()];
    for k in 0..free.len() {
        let mut next = Vec::with_capacity(out.len() * 2);
        for p in &out {
            for v in [0.0, 1.0] {
                let mut q: Vec<f64> = p.clone();
                q.push(v);
                let ok = pairs.iter().all(|&(d, z)| {
                    match (free[..=k].iter().position(|&c| c == d), free[..=k].iter().position(|&c| c == z)) {
                        (Some(a), Some(b)) => !(q[a] > 0.5 && q[b] < 0.5),
                        _ => true,
                    }
                });
                if ok {
                    next.push(q);
                }
            }
        }
        out = next;
        if out.len() > cap {
            return None;
        }
    }
    out.sort_by(|a, b| {
        let ones = |p: &Vec<f64>| p.iter().filter(|v| **v > 0.5).count();
        ones(a).cmp(&ones(b))
    });
    Some(out)
}

/// Exact fast path: solves each tract block on its own with the budget
/// row dropped. When the combined spend fits the budget, the result is
/// optimal for the full model; otherwise falls back to full branch and bound.
pub fn solve_decomposed(model: &MilpModel, map: &ModelMap, cfg: &BnbConfig) -> MipResult {
    let start = Instant::now();
    let budget_rows: Vec<usize> = map.rows(&Owner::Global, RowRole::Budget).to_vec();
    let blocks = components(model, &budget_rows);
    let pairs = implication_pairs(map, model);
    let n = model.num_vars();

    let results: Vec<(Component, Option<MipResult>)> = blocks
        .into_par_iter()
        .map(|block| {
            let (sub, _) = model.submodel(&block.columns, &block.rows);
            let sub_cfg = cfg.restricted(&block.columns, n);
            let r = solve_block(&sub, &sub_cfg, &block.columns, &pairs);
            (block, r)
        })
        .collect();

    let mut x = vec![0.0; n];
    let (mut nodes, mut lp_solves, mut bound) = (0u64, 0u64, model.objective_constant);
    let mut all_optimal = true;
    for (block, r) in &results {
        let Some(r) = r else {
            return fallback(model, cfg, start, "decomposed block infeasible");
        };
        all_optimal &= r.status == MipStatus::Optimal;
        for (k, &j) in block.columns.iter().enumerate() {
            x[j] = r.x[k];
        }
        nodes += r.nodes;
        lp_solves += r.lp_solves;
        bound += r.best_bound;
    }
    for &i in &budget_rows {
        let c = &model.constraints[i];
        if c.violation(&x) > 1e-9 * c.rhs.abs().max(1.0) {
            return fallback(model, cfg, start, "budget binds");
        }
    }
    let objective = model.objective_value(&x);
    let bound = bound.min(objective);
    MipResult {
        status: if all_optimal { MipStatus::Optimal } else { MipStatus::Feasible },
        gap: ((objective - bound) / objective.abs().max(1e-10)).max(0.0),
        x,
        objective,
        best_bound: bound,
        nodes,
        lp_solves,
        wall_time_secs: start.elapsed().as_secs_f64(),
        method: "decomposed".into(),
        node_log: Vec::new(),
    }
}

fn fallback(model: &MilpModel, cfg: &BnbConfig, start: Instant, why: &str) -> MipResult {
    let mut r = branch_and_bound_with(model, cfg);
    r.method = format!("branch_and_bound ({why})");
    r.wall_time_secs = start.elapsed().as_secs_f64();
    r
}

fn solve_block(sub: &MilpModel, cfg: &BnbConfig, cols: &[usize], pairs: &[(usize, usize)]) -> Option<MipResult> {
    let start = Instant::now();
    let free: Vec<usize> = sub
        .variables
        .iter()
        .enumerate()
        .filter(|(_, v)| v.kind == VarKind::Binary && v.lower < v.upper)
        .map(|(k, _)| k)
        .collect();
    let local_pairs: Vec<(usize, usize)> = pairs
        .iter()
        .filter_map(|&(d, z)| {
            let a = cols.iter().position(|&c| c == d)?;
            let b = cols.iter().position(|&c| c == z)?;
            Some((a, b))
        })
        .collect();
    let Some(pats) = patterns(&free, &local_pairs, MAX_ENUMERATED_PATTERNS) else {
        let r = branch_and_bound_with(sub, cfg);
        return r.has_solution().then_some(r);
    };
    let mut solver = Solver::new(sub, cfg);
    let mut best: Option<super::simplex::LpSolution> = None;
    for p in &pats {
        let fix: Vec<(usize, f64)> = free.iter().copied().zip(p.iter().copied()).collect();
        let s = solver.solve_fixed(&fix);
        if s.status != LpStatus::Optimal {
            continue;
        }
        // Patterns come with fewer ones first, so ties keep the leaner one.
        let better = match &best {
            None => true,
            Some(b) => !close_or_better(b.objective, s.objective),
        };
        if better {
            best = Some(s);
        }
    }
    let best = best?;
    Some(MipResult {
        status: MipStatus::Optimal,
        objective: best.objective,
        best_bound: best.objective,
        gap: 0.0,
        x: best.x,
        nodes: pats.len() as u64,
        lp_solves: solver.lp_solves,
        wall_time_secs: start.elapsed().as_secs_f64(),
        method: "enumeration".into(),
        node_log: Vec::new(),
    })
}
