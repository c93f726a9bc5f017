//! Bounded-variable primal simplex on a dense tableau.
//!
//! Every row gets a slack with coefficient +1 whose bounds encode the
//! relation, so the initial basis is the identity and the slack columns of
//! the tableau hold B⁻¹ throughout. Phase 1 minimizes the total bound
//! violation of the basic variables. Pivots only touch rows with a nonzero
//! in the pivot column and columns with a nonzero in the pivot row, which
//! keeps block-structured models cheap.

use serde::{Deserialize, Serialize};

use crate::linmodel::{MilpModel, Relation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisStatus {
    Basic,
    AtLower,
    AtUpper,
    /// Nonbasic free variable resting at zero.
    Free,
    /// Column removed before the solve because its bounds coincide.
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    /// Includes the model's objective constant.
    pub objective: f64,
    /// Row multipliers y with reduced costs c − Aᵀy.
    pub duals: Vec<f64>,
    pub reduced_costs: Vec<f64>,
    pub column_status: Vec<BasisStatus>,
    /// Status of each row's slack.
    pub row_status: Vec<BasisStatus>,
    pub iterations: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LpOptions {
    /// Absolute bound tolerance in the scaled space.
    pub feasibility_tol: f64,
    /// Reduced-cost threshold for entering candidates.
    pub optimality_tol: f64,
    pub pivot_tol: f64,
    /// `None` picks a limit from the model size.
    pub max_iterations: Option<u64>,
    /// Consecutive degenerate pivots before switching to Bland's rule.
    pub bland_after: u32,
    /// Iterations between recomputations of the basic solution.
    pub refresh_every: u32,
}

impl Default for LpOptions {
    fn default() -> Self {
        Self {
            feasibility_tol: 1e-9,
            optimality_tol: 1e-11,
            pivot_tol: 1e-9,
            max_iterations: None,
            bland_after: 50,
            refresh_every: 64,
        }
    }
}

/// Solves the LP relaxation of `model` with the listed columns fixed.
pub fn solve_lp(model: &MilpModel, fixed: &[(usize, f64)]) -> LpSolution {
    let mut lower: Vec<f64> = model.variables.iter().map(|v| v.lower).collect();
    let mut upper: Vec<f64> = model.variables.iter().map(|v| v.upper).collect();
    for &(j, v) in fixed {
        lower[j] = v;
        upper[j] = v;
    }
    solve_lp_bounds(model, &lower, &upper, &LpOptions::default())
}

/// Solves `model` with column bounds replaced by `lower`/`upper`.
pub fn solve_lp_bounds(model: &MilpModel, lower: &[f64], upper: &[f64], opts: &LpOptions) -> LpSolution {
    let n = model.num_vars();
    let m = model.num_rows();
    let infeasible = |iterations| LpSolution {
        status: LpStatus::Infeasible,
        x: lower.iter().zip(upper).map(|(&l, &u)| clamp_start(l, u)).collect(),
        objective: f64::NAN,
        duals: vec![0.0; m],
        reduced_costs: vec![0.0; n],
        column_status: vec![BasisStatus::Fixed; n],
        row_status: vec![BasisStatus::Basic; m],
        iterations,
    };
    if lower.iter().zip(upper).any(|(l, u)| l > u) {
        return infeasible(0);
    }

    // Fixed columns move to the right-hand side.
    let active: Vec<usize> = (0..n).filter(|&j| lower[j] != upper[j]).collect();
    let mut col_pos = vec![usize::MAX; n];
    for (k, &j) in active.iter().enumerate() {
        col_pos[j] = k;
    }
    let mut rhs: Vec<f64> = model.constraints.iter().map(|c| c.rhs).collect();
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::with_capacity(m);
    for (i, c) in model.constraints.iter().enumerate() {
        let mut r = Vec::with_capacity(c.coeffs.len());
        for &(j, a) in &c.coeffs {
            if col_pos[j] == usize::MAX {
                rhs[i] -= a * lower[j];
            } else {
                r.push((col_pos[j], a));
            }
        }
        rows.push(r);
    }
    let mut cost = vec![0.0; active.len()];
    for &(j, c) in &model.objective {
        if col_pos[j] != usize::MAX {
            cost[col_pos[j]] = c;
        }
    }

    let (row_scale, col_scale) = scale_factors(&rows, active.len());
    let na = active.len();
    let mut lp = Tableau::new(m, na);
    for (i, r) in rows.iter().enumerate() {
        for &(k, a) in r {
            lp.t[i * lp.w + k] = a * row_scale[i] * col_scale[k];
        }
        lp.t[i * lp.w + na + i] = 1.0;
        lp.b[i] = rhs[i] * row_scale[i];
        let (lo, up) = match model.constraints[i].relation {
            Relation::Le => (0.0, f64::INFINITY),
            Relation::Ge => (f64::NEG_INFINITY, 0.0),
            Relation::Eq => (0.0, 0.0),
        };
        lp.lo[na + i] = lo;
        lp.up[na + i] = up;
    }
    lp.a_rows = rows
        .iter()
        .enumerate()
        .map(|(i, r)| r.iter().map(|&(k, a)| (k, a * row_scale[i] * col_scale[k])).collect())
        .collect();
    for (k, &j) in active.iter().enumerate() {
        lp.lo[k] = lower[j] / col_scale[k];
        lp.up[k] = upper[j] / col_scale[k];
        lp.cost[k] = cost[k] * col_scale[k];
    }
    lp.init();

    let limit = opts
        .max_iterations
        .unwrap_or(200 * (m + na) as u64 + 10_000);
    let status = lp.run(opts, limit);

    let mut x = vec![0.0; n];
    let mut column_status = vec![BasisStatus::Fixed; n];
    for j in 0..n {
        if col_pos[j] == usize::MAX {
            x[j] = lower[j];
        } else {
            let k = col_pos[j];
            x[j] = lp.x[k] * col_scale[k];
            column_status[j] = lp.status_of(k);
            // Snap nonbasic columns exactly onto their bounds.
            match column_status[j] {
                BasisStatus::AtLower => x[j] = lower[j],
                BasisStatus::AtUpper => x[j] = upper[j],
                _ => {}
            }
        }
    }
    if status == LpStatus::Infeasible {
        let mut s = infeasible(lp.iterations);
        s.x = x;
        return s;
    }
    let row_status = (0..m).map(|i| lp.status_of(na + i)).collect();

    // y' from the slack columns of the tableau, then unscale.
    let mut y = vec![0.0; m];
    for r in 0..m {
        let cb = lp.cost_of(lp.head[r]);
        if cb != 0.0 {
            for (k, yk) in y.iter_mut().enumerate() {
                *yk += cb * lp.t[r * lp.w + na + k];
            }
        }
    }
    for (yk, s) in y.iter_mut().zip(&row_scale) {
        *yk *= s;
    }
    let mut reduced_costs = vec![0.0; n];
    for &(j, c) in &model.objective {
        reduced_costs[j] = c;
    }
    for (i, c) in model.constraints.iter().enumerate() {
        for &(j, a) in &c.coeffs {
            reduced_costs[j] -= y[i] * a;
        }
    }

    LpSolution {
        status,
        objective: model.objective_value(&x),
        x,
        duals: y,
        reduced_costs,
        column_status,
        row_status,
        iterations: lp.iterations,
    }
}

fn clamp_start(l: f64, u: f64) -> f64 {
    if l.is_finite() {
        l
    } else if u.is_finite() {
        u
    } else {
        0.0
    }
}

fn pow2(s: f64) -> f64 {
    if !(s.is_finite() && s > 0.0) {
        return 1.0;
    }
    2f64.powi(s.log2().round() as i32)
}

/// Geometric-mean row and column scaling rounded to powers of two.
fn scale_factors(rows: &[Vec<(usize, f64)>], n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut rs = vec![1.0; rows.len()];
    let mut cs = vec![1.0; n];
    for _ in 0..4 {
        for (i, r) in rows.iter().enumerate() {
            let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
            for &(k, a) in r {
                let v = (a * cs[k]).abs();
                lo = lo.min(v);
                hi = hi.max(v);
            }
            if hi > 0.0 {
                rs[i] = pow2(1.0 / (lo * hi).sqrt());
            }
        }
        let mut lo = vec![f64::INFINITY; n];
        let mut hi = vec![0.0f64; n];
        for (i, r) in rows.iter().enumerate() {
            for &(k, a) in r {
                let v = (a * rs[i]).abs();
                lo[k] = lo[k].min(v);
                hi[k] = hi[k].max(v);
            }
        }
        for k in 0..n {
            if hi[k] > 0.0 {
                cs[k] = pow2(1.0 / (lo[k] * hi[k]).sqrt());
            }
        }
    }
    (rs, cs)
}

const NONBASIC: usize = usize::MAX;

/// Relative row residual above which the tableau is rebuilt.
const DRIFT_TOL: f64 = 1e-9;

/// Smallest pivot Bland's rule accepts, relative to the largest candidate.
const BLAND_PIVOT_RATIO: f64 = 1e-3;

/// Tableau rebuilds allowed per solve.
const MAX_REBUILDS: u32 = 20;

struct Tableau {
    m: usize,
    /// Structural columns; slacks follow at `n + i`.
    n: usize,
    w: usize,
    t: Vec<f64>,
    b: Vec<f64>,
    a_rows: Vec<Vec<(usize, f64)>>,
    lo: Vec<f64>,
    up: Vec<f64>,
    cost: Vec<f64>,
    x: Vec<f64>,
    head: Vec<usize>,
    /// Row of each basic column, `NONBASIC` otherwise.
    pos: Vec<usize>,
    d: Vec<f64>,
    iterations: u64,
    scratch: Vec<usize>,
    pivot_row: Vec<f64>,
}

impl Tableau {
    fn new(m: usize, n: usize) -> Self {
        let w = n + m;
        Self {
            m,
            n,
            w,
            t: vec![0.0; m * w],
            b: vec![0.0; m],
            a_rows: Vec::new(),
            lo: vec![0.0; w],
            up: vec![0.0; w],
            cost: vec![0.0; w],
            x: vec![0.0; w],
            head: (n..w).collect(),
            pos: (0..w).map(|j| if j >= n { j - n } else { NONBASIC }).collect(),
            d: vec![0.0; w],
            iterations: 0,
            scratch: Vec::with_capacity(w),
            pivot_row: vec![0.0; w],
        }
    }

    fn init(&mut self) {
        for j in 0..self.n {
            self.x[j] = clamp_start(self.lo[j], self.up[j]);
        }
        self.refresh();
    }

    fn cost_of(&self, j: usize) -> f64 {
        self.cost[j]
    }

    fn status_of(&self, j: usize) -> BasisStatus {
        if self.pos[j] != NONBASIC {
            BasisStatus::Basic
        } else if self.lo[j] == self.up[j] || self.x[j] == self.lo[j] {
            BasisStatus::AtLower
        } else if self.x[j] == self.up[j] {
            BasisStatus::AtUpper
        } else {
            BasisStatus::Free
        }
    }

    /// Recomputes x_B = B⁻¹(b − N x_N) with B⁻¹ read from the slack columns.
    fn refresh(&mut self) {
        let (m, n, w) = (self.m, self.n, self.w);
        let mut r = self.b.clone();
        for (i, row) in self.a_rows.iter().enumerate() {
            for &(k, a) in row {
                if self.pos[k] == NONBASIC {
                    r[i] -= a * self.x[k];
                }
            }
            let s = n + i;
            if self.pos[s] == NONBASIC {
                r[i] -= self.x[s];
            }
        }
        for i in 0..m {
            let row = &self.t[i * w + n..i * w + w];
            self.x[self.head[i]] = row.iter().zip(&r).map(|(a, b)| a * b).sum();
        }
    }

    /// Largest relative row residual of the current point against the
    /// stored rows; nonzero when the tableau has drifted from B⁻¹A.
    fn residual(&self) -> f64 {
        let mut worst = 0.0f64;
        for (i, row) in self.a_rows.iter().enumerate() {
            let mut act = self.x[self.n + i];
            let mut size = self.b[i].abs().max(act.abs());
            for &(k, a) in row {
                act += a * self.x[k];
                size = size.max((a * self.x[k]).abs());
            }
            worst = worst.max((act - self.b[i]).abs() / size.max(1.0));
        }
        worst
    }

    /// Restarts from the all-slack basis, keeping structural values where
    /// they are.
    fn slack_basis(&mut self) {
        let (m, n, w) = (self.m, self.n, self.w);
        for j in 0..n {
            self.pos[j] = NONBASIC;
        }
        self.t.iter_mut().for_each(|v| *v = 0.0);
        for (i, row) in self.a_rows.iter().enumerate() {
            for &(k, a) in row {
                self.t[i * w + k] = a;
            }
            self.t[i * w + n + i] = 1.0;
            self.head[i] = n + i;
            self.pos[n + i] = i;
        }
        debug_assert_eq!(self.head.len(), m);
        self.refresh();
    }

    /// Rebuilds the tableau from the stored rows for the current basis,
    /// falling back to the slack basis when it is numerically singular.
    fn reinvert(&mut self) {
        let (m, n, w) = (self.m, self.n, self.w);
        let mut bm = vec![0.0; m * m];
        for (i, row) in self.a_rows.iter().enumerate() {
            for &(k, a) in row {
                if self.pos[k] != NONBASIC {
                    bm[i * m + self.pos[k]] = a;
                }
            }
            if self.pos[n + i] != NONBASIC {
                bm[i * m + self.pos[n + i]] = 1.0;
            }
        }
        // Gauss-Jordan on [B | I] with partial pivoting.
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        for c in 0..m {
            let p = (c..m)
                .max_by(|&a, &b| bm[a * m + c].abs().total_cmp(&bm[b * m + c].abs()))
                .unwrap_or(c);
            let piv = bm[p * m + c];
            if piv.abs() < 1e-12 {
                self.slack_basis();
                return;
            }
            if p != c {
                for k in 0..m {
                    bm.swap(p * m + k, c * m + k);
                    inv.swap(p * m + k, c * m + k);
                }
            }
            for k in 0..m {
                bm[c * m + k] /= piv;
                inv[c * m + k] /= piv;
            }
            for r in 0..m {
                let f = bm[r * m + c];
                if r == c || f == 0.0 {
                    continue;
                }
                for k in 0..m {
                    bm[r * m + k] -= f * bm[c * m + k];
                    inv[r * m + k] -= f * inv[c * m + k];
                }
            }
        }
        self.t.iter_mut().for_each(|v| *v = 0.0);
        for (i, row) in self.a_rows.iter().enumerate() {
            for &(k, a) in row {
                for r in 0..m {
                    let v = inv[r * m + i];
                    if v != 0.0 {
                        self.t[r * w + k] += v * a;
                    }
                }
            }
        }
        for r in 0..m {
            self.t[r * w + n..(r + 1) * w].copy_from_slice(&inv[r * m..(r + 1) * m]);
        }
        for r in 0..m {
            let q = self.head[r];
            for i in 0..m {
                self.t[i * w + q] = if i == r { 1.0 } else { 0.0 };
            }
        }
        self.refresh();
    }

    /// Refreshes basic values, rebuilding the tableau first if it drifted.
    fn refresh_checked(&mut self) {
        self.refresh();
        if self.residual() > DRIFT_TOL {
            self.reinvert();
        }
    }

    fn recompute_reduced_costs(&mut self, costs: &[f64]) {
        let w = self.w;
        self.d.copy_from_slice(costs);
        for i in 0..self.m {
            let cb = costs[self.head[i]];
            if cb != 0.0 {
                let row = &self.t[i * w..(i + 1) * w];
                for (dj, a) in self.d.iter_mut().zip(row) {
                    *dj -= cb * a;
                }
            }
        }
        for i in 0..self.m {
            self.d[self.head[i]] = 0.0;
        }
    }

    /// Phase-1 costs: ±1 on basic variables outside their bounds.
    fn phase1_costs(&self, tol: f64, costs: &mut [f64]) -> f64 {
        costs.iter_mut().for_each(|c| *c = 0.0);
        let mut infeas = 0.0;
        for &j in &self.head {
            let v = self.x[j];
            if v < self.lo[j] - tol {
                costs[j] = -1.0;
                infeas += self.lo[j] - v;
            } else if v > self.up[j] + tol {
                costs[j] = 1.0;
                infeas += v - self.up[j];
            }
        }
        infeas
    }

    fn run(&mut self, opts: &LpOptions, limit: u64) -> LpStatus {
        let tol = opts.feasibility_tol;
        let mut costs = vec![0.0; self.w];
        let mut rebuilds = 0u32;
        let mut attempts = 0;
        loop {
            // Phase 1.
            let mut degenerate = 0u32;
            let mut since_refresh = 0u32;
            loop {
                let infeas = self.phase1_costs(tol, &mut costs);
                if infeas == 0.0 {
                    break;
                }
                if self.iterations >= limit {
                    return LpStatus::IterationLimit;
                }
                self.recompute_reduced_costs(&costs);
                let bland = degenerate >= opts.bland_after;
                // A phase-1 ray with no blocking row only means the candidate's
                // pivots are all below tolerance; try the next one.
                let mut rejected = Vec::new();
                let verdict = loop {
                    let Some((q, dir)) = self.entering(opts.optimality_tol.max(1e-12), bland, &rejected) else {
                        break None;
                    };
                    match self.step(q, dir, true, opts, bland) {
                        Step::Unbounded => rejected.push(q),
                        Step::Moved(theta) => {
                            degenerate = if theta <= 1e-12 { degenerate + 1 } else { 0 };
                            break Some(());
                        }
                    }
                };
                if verdict.is_none() {
                    // Only a tableau consistent with the rows may declare infeasibility.
                    if self.repair(&costs, &mut rebuilds) {
                        continue;
                    }
                    self.refresh();
                    if self.phase1_costs(tol, &mut costs) == 0.0 {
                        break;
                    }
                    return LpStatus::Infeasible;
                }
                since_refresh += 1;
                if since_refresh >= opts.refresh_every {
                    self.refresh_checked();
                    since_refresh = 0;
                }
            }

            // Phase 2.
            let phase2_costs = self.cost.clone();
            self.recompute_reduced_costs(&phase2_costs);
            let mut degenerate = 0u32;
            let mut since_refresh = 0u32;
            loop {
                if self.iterations >= limit {
                    return LpStatus::IterationLimit;
                }
                let bland = degenerate >= opts.bland_after;
                let Some((q, dir)) = self.entering(opts.optimality_tol, bland, &[]) else {
                    if self.repair(&phase2_costs, &mut rebuilds) {
                        self.recompute_reduced_costs(&phase2_costs);
                        continue;
                    }
                    break;
                };
                match self.step(q, dir, false, opts, bland) {
                    Step::Unbounded => {
                        if self.repair(&phase2_costs, &mut rebuilds) {
                            self.recompute_reduced_costs(&phase2_costs);
                            continue;
                        }
                        return LpStatus::Unbounded;
                    }
                    Step::Moved(theta) => {
                        degenerate = if theta <= 1e-12 { degenerate + 1 } else { 0 };
                    }
                }
                since_refresh += 1;
                if since_refresh >= opts.refresh_every {
                    self.refresh_checked();
                    self.recompute_reduced_costs(&phase2_costs);
                    since_refresh = 0;
                }
            }
            self.refresh();
            if self.phase1_costs(tol * 10.0, &mut costs) == 0.0 && self.residual() <= DRIFT_TOL {
                return LpStatus::Optimal;
            }
            // A rebuild moved basic values off their bounds: back to phase 1.
            attempts += 1;
            if attempts > 3 {
                return LpStatus::IterationLimit;
            }
        }
    }

    /// Checks the tableau against the stored rows under `costs` and rebuilds
    /// it when they disagree. True when a rebuild happened and the caller
    /// should keep iterating.
    fn repair(&mut self, costs: &[f64], rebuilds: &mut u32) -> bool {
        if self.consistent(costs) || *rebuilds >= MAX_REBUILDS {
            return false;
        }
        *rebuilds += 1;
        self.reinvert();
        true
    }

    /// True when basic values satisfy the rows and the tableau's reduced
    /// costs match c − Aᵀy with y read from the slack columns.
    fn consistent(&mut self, costs: &[f64]) -> bool {
        let (m, n, w) = (self.m, self.n, self.w);
        self.refresh();
        if self.residual() > DRIFT_TOL {
            return false;
        }
        let mut y = vec![0.0; m];
        for r in 0..m {
            let cb = costs[self.head[r]];
            if cb != 0.0 {
                for (k, yk) in y.iter_mut().enumerate() {
                    *yk += cb * self.t[r * w + n + k];
                }
            }
        }
        let mut d = costs.to_vec();
        for (i, row) in self.a_rows.iter().enumerate() {
            for &(k, a) in row {
                d[k] -= y[i] * a;
            }
            d[n + i] -= y[i];
        }
        let scale = costs.iter().fold(1.0f64, |acc, c| acc.max(c.abs()));
        (0..w)
            .filter(|&j| self.pos[j] == NONBASIC && self.lo[j] != self.up[j])
            .all(|j| (d[j] - self.d[j]).abs() <= 1e-9 * scale)
    }

    fn entering(&self, tol: f64, bland: bool, skip: &[usize]) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        let mut best_score = 0.0;
        for j in 0..self.w {
            if self.pos[j] != NONBASIC || self.lo[j] == self.up[j] || skip.contains(&j) {
                continue;
            }
            let dj = self.d[j];
            let x = self.x[j];
            let dir = if dj < -tol && x < self.up[j] {
                1.0
            } else if dj > tol && x > self.lo[j] {
                -1.0
            } else {
                continue;
            };
            if bland {
                return Some((j, dir));
            }
            if dj.abs() > best_score {
                best_score = dj.abs();
                best = Some((j, dir));
            }
        }
        best
    }

    /// Moves `q` in direction `dir` as far as the ratio test allows,
    /// pivoting when a basic variable blocks.
    fn step(&mut self, q: usize, dir: f64, phase1: bool, opts: &LpOptions, bland: bool) -> Step {
        let (m, w) = (self.m, self.w);
        let tol = opts.feasibility_tol;
        let ptol = opts.pivot_tol;
        // Pass 1: largest step with bounds relaxed by tol.
        let mut theta_max = f64::INFINITY;
        for i in 0..m {
            let alpha = self.t[i * w + q];
            if alpha.abs() <= ptol {
                continue;
            }
            let j = self.head[i];
            let rate = -dir * alpha;
            if let Some(lim) = self.limit(j, rate, tol, phase1) {
                theta_max = theta_max.min(lim);
            }
        }
        // Distance to the opposite bound; nonbasic columns may sit inside.
        let span = if dir > 0.0 { self.up[q] - self.x[q] } else { self.x[q] - self.lo[q] };
        let flip = span.is_finite() && span <= theta_max;
        if !flip && theta_max == f64::INFINITY {
            return Step::Unbounded;
        }
        // Pass 2: among rows within theta_max, largest pivot. Bland's rule
        // takes the lowest index among pivots of comparable size.
        let mut candidates: Vec<(usize, f64, f64)> = Vec::new();
        if !flip {
            for i in 0..m {
                let alpha = self.t[i * w + q];
                if alpha.abs() <= ptol {
                    continue;
                }
                let rate = -dir * alpha;
                if let Some(lim) = self.limit(self.head[i], rate, 0.0, phase1) {
                    if lim <= theta_max {
                        candidates.push((i, lim, alpha.abs()));
                    }
                }
            }
        }
        let biggest = candidates.iter().fold(0.0f64, |acc, c| acc.max(c.2));
        let chosen = if bland {
            candidates
                .iter()
                .filter(|c| c.2 >= BLAND_PIVOT_RATIO * biggest)
                .min_by_key(|c| self.head[c.0])
        } else {
            candidates.iter().find(|c| c.2 == biggest)
        };
        let leave = chosen.map(|&(i, lim, _)| {
            let j = self.head[i];
            let x = self.x[j];
            let rate = -dir * self.t[i * w + q];
            let target = if rate < 0.0 {
                if phase1 && x > self.up[j] + self.feas_guard() {
                    self.up[j]
                } else {
                    self.lo[j]
                }
            } else if phase1 && x < self.lo[j] - self.feas_guard() {
                self.lo[j]
            } else {
                self.up[j]
            };
            (i, lim.max(0.0), target)
        });
        let theta = match leave {
            Some((_, t, _)) => t,
            None => span,
        };
        self.iterations += 1;

        // Update values.
        if theta > 0.0 {
            self.x[q] += dir * theta;
            for i in 0..m {
                let alpha = self.t[i * w + q];
                if alpha != 0.0 {
                    let j = self.head[i];
                    self.x[j] -= dir * theta * alpha;
                }
            }
        }
        let Some((r, _, target)) = leave else {
            self.x[q] = if dir > 0.0 { self.up[q] } else { self.lo[q] };
            return Step::Moved(theta);
        };
        // The leaving variable lands on the bound it was heading for.
        self.x[self.head[r]] = target;
        self.pivot(r, q);
        Step::Moved(theta)
    }

    /// Step length at which basic variable `j` blocks when it changes at
    /// `rate` per unit step.
    fn limit(&self, j: usize, rate: f64, tol: f64, phase1: bool) -> Option<f64> {
        let x = self.x[j];
        let (lo, up) = (self.lo[j], self.up[j]);
        if rate < 0.0 {
            if phase1 && x > up + self.feas_guard() {
                // Infeasible above: becomes feasible at up.
                return Some((x - up + tol) / -rate);
            }
            if lo == f64::NEG_INFINITY || (phase1 && x < lo - self.feas_guard()) {
                return None;
            }
            Some(((x - lo).max(0.0) + tol) / -rate)
        } else {
            if phase1 && x < lo - self.feas_guard() {
                return Some((lo - x + tol) / rate);
            }
            if up == f64::INFINITY || (phase1 && x > up + self.feas_guard()) {
                return None;
            }
            Some(((up - x).max(0.0) + tol) / rate)
        }
    }

    fn feas_guard(&self) -> f64 {
        1e-9
    }

    fn pivot(&mut self, r: usize, q: usize) {
        let w = self.w;
        let piv = self.t[r * w + q];
        self.scratch.clear();
        for j in 0..w {
            let v = self.t[r * w + j] / piv;
            if v.abs() < 1e-14 {
                self.t[r * w + j] = 0.0;
                self.pivot_row[j] = 0.0;
            } else {
                self.t[r * w + j] = v;
                self.pivot_row[j] = v;
                self.scratch.push(j);
            }
        }
        self.t[r * w + q] = 1.0;
        self.pivot_row[q] = 1.0;
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.t[i * w + q];
            if f == 0.0 {
                continue;
            }
            let row = &mut self.t[i * w..(i + 1) * w];
            for &j in &self.scratch {
                row[j] -= f * self.pivot_row[j];
            }
            row[q] = 0.0;
        }
        let f = self.d[q];
        if f != 0.0 {
            for &j in &self.scratch {
                self.d[j] -= f * self.pivot_row[j];
            }
            self.d[q] = 0.0;
        }
        let out = self.head[r];
        self.pos[out] = NONBASIC;
        self.head[r] = q;
        self.pos[q] = r;
    }
}

enum Step {
    Moved(f64),
    Unbounded,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linmodel::VarKind;

    fn var(m: &mut MilpModel, name: &str, lo: f64, up: f64) -> usize {
        m.add_var(name, VarKind::Continuous, lo, up)
    }

    #[test]
    fn single_lower_bound_row() {
        let mut m = MilpModel::new("t");
        let x = var(&mut m, "x", 0.0, f64::INFINITY);
        m.add_row("r", [(x, 1.0)], Relation::Ge, 3.0);
        m.set_objective([(x, 1.0)], 0.0);
        let s = solve_lp(&m, &[]);
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.x[x] - 3.0).abs() < 1e-12);
        assert!((s.objective - 3.0).abs() < 1e-12);
    }

    #[test]
    fn maximize_to_upper_row() {
        let mut m = MilpModel::new("t");
        let x = var(&mut m, "x", 0.0, f64::INFINITY);
        m.add_row("r", [(x, 1.0)], Relation::Le, 5.0);
        m.set_objective([(x, -1.0)], 0.0);
        let s = solve_lp(&m, &[]);
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.x[x] - 5.0).abs() < 1e-12);
    }

    #[test]
    fn classic_two_variable() {
        // max 3x + 5y, x ≤ 4, 2y ≤ 12, 3x + 2y ≤ 18 → (2, 6), 36.
        let mut m = MilpModel::new("t");
        let x = var(&mut m, "x", 0.0, f64::INFINITY);
        let y = var(&mut m, "y", 0.0, f64::INFINITY);
        m.add_row("a", [(x, 1.0)], Relation::Le, 4.0);
        m.add_row("b", [(y, 2.0)], Relation::Le, 12.0);
        m.add_row("c", [(x, 3.0), (y, 2.0)], Relation::Le, 18.0);
        m.set_objective([(x, -3.0), (y, -5.0)], 0.0);
        let s = solve_lp(&m, &[]);
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.x[x] - 2.0).abs() < 1e-9 && (s.x[y] - 6.0).abs() < 1e-9);
        assert!((s.objective + 36.0).abs() < 1e-9);
        // Duals of the binding rows.
        assert!(s.duals[0].abs() < 1e-9);
        assert!((s.duals[1] + 1.5).abs() < 1e-9);
        assert!((s.duals[2] + 1.0).abs() < 1e-9);
    }

    #[test]
    fn infeasible_and_unbounded() {
        let mut m = MilpModel::new("t");
        let x = var(&mut m, "x", 0.0, 1.0);
        m.add_row("r", [(x, 1.0)], Relation::Ge, 2.0);
        assert_eq!(solve_lp(&m, &[]).status, LpStatus::Infeasible);

        let mut m = MilpModel::new("t");
        let x = var(&mut m, "x", 0.0, f64::INFINITY);
        let y = var(&mut m, "y", f64::NEG_INFINITY, f64::INFINITY);
        m.add_row("r", [(x, 1.0), (y, -1.0)], Relation::Le, 1.0);
        m.set_objective([(x, -1.0)], 0.0);
        assert_eq!(solve_lp(&m, &[]).status, LpStatus::Unbounded);
    }

    #[test]
    fn equality_rows_and_free_variables() {
        // min |x - 2| via x - 2 = p - n.
        let mut m = MilpModel::new("t");
        let x = var(&mut m, "x", f64::NEG_INFINITY, f64::INFINITY);
        let p = var(&mut m, "p", 0.0, f64::INFINITY);
        let q = var(&mut m, "n", 0.0, f64::INFINITY);
        m.add_row("e", [(x, 1.0), (p, -1.0), (q, 1.0)], Relation::Eq, 2.0);
        m.add_row("lo", [(x, 1.0)], Relation::Ge, -5.0);
        m.set_objective([(p, 1.0), (q, 1.0)], 0.5);
        let s = solve_lp(&m, &[]);
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective - 0.5).abs() < 1e-12);
        assert!(m.max_violation(&s.x) < 1e-9);
    }

    #[test]
    fn fixed_columns_are_substituted() {
        let mut m = MilpModel::new("t");
        let x = var(&mut m, "x", 0.0, 10.0);
        let y = m.add_var("y", VarKind::Binary, 0.0, 1.0);
        m.add_row("r", [(x, 1.0), (y, -4.0)], Relation::Le, 0.0);
        m.set_objective([(x, -1.0), (y, 1.0)], 0.0);
        let s = solve_lp(&m, &[(y, 1.0)]);
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.x[x] - 4.0).abs() < 1e-12);
        assert_eq!(s.column_status[y], BasisStatus::Fixed);
        let s = solve_lp(&m, &[(y, 0.0)]);
        assert!((s.x[x]).abs() < 1e-12);
    }

    #[test]
    fn degenerate_cycling_example_terminates() {
        // Beale's example cycles under naive Dantzig pricing.
        let mut m = MilpModel::new("beale");
        let x: Vec<usize> = (0..4).map(|i| var(&mut m, &format!("x{i}"), 0.0, f64::INFINITY)).collect();
        m.add_row("a", [(x[0], 0.25), (x[1], -60.0), (x[2], -0.04), (x[3], 9.0)], Relation::Le, 0.0);
        m.add_row("b", [(x[0], 0.5), (x[1], -90.0), (x[2], -0.02), (x[3], 3.0)], Relation::Le, 0.0);
        m.add_row("c", [(x[2], 1.0)], Relation::Le, 1.0);
        m.set_objective([(x[0], -0.75), (x[1], 150.0), (x[2], -0.02), (x[3], 6.0)], 0.0);
        let s = solve_lp(&m, &[]);
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective + 0.05).abs() < 1e-9);
    }
}
