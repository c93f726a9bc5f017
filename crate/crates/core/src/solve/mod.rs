//! MILP solution: a bounded simplex, best-bound branch and bound, the
//! per-tract decomposition, and extraction back into domain terms.

mod bnb;
mod decompose;
mod extract;
mod simplex;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bnb::{
    branch_and_bound, branch_and_bound_with, enumerate_binaries, BnbConfig, MipResult, MipStatus,
    NodeLogEntry, RoundRule, DEFAULT_GAP_TOL, DEFAULT_NODE_LIMIT, INTEGRALITY_TOL,
};
pub use decompose::{components, solve_decomposed, Component, MAX_ENUMERATED_PATTERNS};
pub use extract::{extract_solution, RealizedFlows};
pub use simplex::{solve_lp, solve_lp_bounds, BasisStatus, LpOptions, LpSolution, LpStatus};

use crate::dispatch::{fit_scenario, DispatchError, SelfConsumptionFit};
use crate::domain::{
    ArchetypeId, DomainError, ModelKind, Scenario, Solution, SolveDiagnostics, SolveStatus,
};
use crate::linmodel::{build_linearized, BuildError, MilpModel, ModelMap, Owner, VarRole};

#[derive(Debug, Error)]
pub enum SolveError {
    #[error(transparent)]
    Build(#[from] BuildError),
    #[error(transparent)]
    Dispatch(#[from] DispatchError),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("model is infeasible")]
    Infeasible,
    #[error("no feasible solution found within {nodes} nodes")]
    NoSolution { nodes: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub gap_tol: f64,
    pub node_limit: u64,
    /// Try the per-tract decomposition before full branch and bound.
    pub decompose: bool,
    pub log_nodes: bool,
    /// Fit samples per archetype.
    pub samples: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            gap_tol: DEFAULT_GAP_TOL,
            node_limit: DEFAULT_NODE_LIMIT,
            decompose: true,
            log_nodes: false,
            samples: crate::dispatch::DEFAULT_SAMPLES,
        }
    }
}

/// Everything a linearized run produces.
#[derive(Debug, Clone)]
pub struct Solved {
    pub solution: Solution,
    pub fits: BTreeMap<ArchetypeId, SelfConsumptionFit>,
    pub model: MilpModel,
    pub map: ModelMap,
    pub mip: MipResult,
}

/// Branching hints read from the map: batteries before surplus flags,
/// flags rounded from the rooftop size and switched off when unused.
pub fn config_for(model: &MilpModel, map: &ModelMap, opts: &SolveOptions) -> BnbConfig {
    let n = model.num_vars();
    let mut priority = vec![0u8; n];
    let mut rounding = Vec::new();
    let (mut batteries, mut flags) = (Vec::new(), Vec::new());
    for j in 0..n {
        let Some((owner, role)) = map.key_of(j) else {
            continue;
        };
        match role {
            VarRole::HasBattery => {
                priority[j] = 2;
                batteries.push(j);
                if let Some(s) = map.column(owner, VarRole::StorageOpportunity) {
                    rounding.push((j, RoundRule::Above { column: s, threshold: 1e-9 }));
                }
            }
            VarRole::SurplusFlag => {
                priority[j] = 1;
                flags.push(j);
                if let Some(d) = map.column(owner, VarRole::RooftopKw) {
                    let z1 = map.constant(owner, VarRole::SurplusThreshold).unwrap_or(0.0);
                    rounding.push((j, RoundRule::Above { column: d, threshold: z1 + 1e-7 }));
                }
            }
            _ => {}
        }
    }
    batteries.extend(flags);
    BnbConfig {
        gap_tol: opts.gap_tol,
        node_limit: opts.node_limit,
        priority,
        rounding,
        polish: batteries,
        log_nodes: opts.log_nodes,
        lp: LpOptions::default(),
    }
}

/// Solves a built model, decomposing when allowed.
pub fn solve_model(model: &MilpModel, map: &ModelMap, opts: &SolveOptions) -> MipResult {
    let cfg = config_for(model, map, opts);
    if opts.decompose && !opts.log_nodes {
        solve_decomposed(model, map, &cfg)
    } else {
        branch_and_bound_with(model, &cfg)
    }
}

pub fn diagnostics(mip: &MipResult) -> SolveDiagnostics {
    SolveDiagnostics {
        status: match mip.status {
            MipStatus::Optimal => SolveStatus::Optimal,
            MipStatus::Feasible => SolveStatus::Feasible,
            MipStatus::Infeasible | MipStatus::NoSolution => SolveStatus::Infeasible,
        },
        method: mip.method.clone(),
        best_bound: mip.best_bound,
        gap: mip.gap,
        nodes: mip.nodes,
        lp_solves: mip.lp_solves,
        wall_time_secs: mip.wall_time_secs,
    }
}

pub fn check(mip: &MipResult) -> Result<(), SolveError> {
    match mip.status {
        MipStatus::Infeasible => Err(SolveError::Infeasible),
        MipStatus::NoSolution => Err(SolveError::NoSolution { nodes: mip.nodes }),
        _ => Ok(()),
    }
}

/// Fits every archetype, builds the linearized model and solves it.
pub fn solve_linearized(scenario: &Scenario, opts: &SolveOptions) -> Result<Solved, SolveError> {
    let fits = fit_scenario(scenario, opts.samples)?;
    solve_linearized_with(scenario, fits, opts)
}

/// As [`solve_linearized`] with precomputed fits.
pub fn solve_linearized_with(
    scenario: &Scenario,
    fits: BTreeMap<ArchetypeId, SelfConsumptionFit>,
    opts: &SolveOptions,
) -> Result<Solved, SolveError> {
    let (model, map) = build_linearized(scenario, &fits)?;
    let mip = solve_model(&model, &map, opts);
    check(&mip)?;
    let solution = extract_solution(
        scenario,
        &map,
        &mip.x,
        ModelKind::Linearized,
        diagnostics(&mip),
        &|_, _, _| None,
    )?;
    Ok(Solved {
        solution,
        fits,
        model,
        map,
        mip,
    })
}

/// Column value helper for tests and reports.
pub fn archetype_value(map: &ModelMap, x: &[f64], id: &ArchetypeId, role: VarRole) -> f64 {
    map.value(x, &Owner::Archetype(id.clone()), role)
}
