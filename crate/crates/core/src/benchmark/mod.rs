//! The time-resolved benchmark and the comparison against the linearized
//! model.
//!
//! The benchmark keeps the portfolio MILP but ties rooftop flows to exact
//! curves sampled from greedy dispatch on a fine grid, which is optimal for
//! the daily battery under a flat retail price. Realized flows are then
//! recomputed by re-dispatching the chosen sizes hour by hour.

mod report;

use std::collections::BTreeMap;

use rayon::prelude::*;
use thiserror::Error;

pub use report::{
    baseline_histogram, burden_histogram, compare, relative_error_pct, write_histogram_csv, ArchetypeBurden, ComparisonReport,
    HistogramRow, Indicator, PortfolioMix, DEFAULT_ERROR_THRESHOLD_PCT, HISTOGRAM_EDGES,
};

use crate::dispatch::{greedy_totals, sample_curve, surplus_threshold, DispatchError};
use crate::domain::{ArchetypeId, ModelKind, Scenario, Solution};
use crate::linmodel::{build_hourly, build_sampled, export_mps, BuildError, MilpModel, ModelMap, MpsExport, SampledCurve};
use crate::solve::{check, diagnostics, extract_solution, solve_model, MipResult, RealizedFlows, SolveError, SolveOptions};

/// Grid points per exact curve.
pub const DEFAULT_GRID: usize = 128;

/// Largest hours × archetypes product the hourly exporter accepts.
pub const DEFAULT_MPS_CELL_LIMIT: usize = 500_000;

#[derive(Debug, Error)]
pub enum BenchmarkError {
    #[error("hourly model too large: {hours} hours x {archetypes} archetypes = {cells} cells exceeds the limit of {limit}")]
    TooLarge {
        hours: usize,
        archetypes: usize,
        cells: usize,
        limit: usize,
    },
    #[error(transparent)]
    Build(#[from] BuildError),
    #[error(transparent)]
    Dispatch(#[from] DispatchError),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeOptions {
    pub grid: usize,
    pub solve: SolveOptions,
}

impl Default for TimeOptions {
    fn default() -> Self {
        Self {
            grid: DEFAULT_GRID,
            solve: SolveOptions::default(),
        }
    }
}

/// Evaluates greedy dispatch at `grid` uniform sizes on `[0, RTS̄]` plus Z¹.
pub fn exact_curve(
    profiles: &crate::domain::HourlyProfiles,
    max_rooftop_kw: f64,
    beta: f64,
    duration_hours: f64,
    grid: usize,
) -> Result<SampledCurve, DispatchError> {
    if grid < 2 {
        return Err(DispatchError::InvalidInput(format!("grid needs at least 2 points, got {grid}")));
    }
    let z1 = surplus_threshold(profiles).min(max_rooftop_kw);
    let has_surplus = z1 < max_rooftop_kw;
    let mut sizes: Vec<f64> = (0..grid)
        .map(|i| max_rooftop_kw * i as f64 / (grid - 1) as f64)
        .collect();
    if has_surplus && !sizes.contains(&z1) {
        sizes.push(z1);
        sizes.sort_by(f64::total_cmp);
    }
    let points = sizes
        .into_iter()
        .map(|d| sample_curve(profiles, d, beta, duration_hours))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SampledCurve {
        z1_kw: z1,
        has_surplus,
        points,
    })
}

/// Exact curves for every rooftop-eligible archetype.
pub fn exact_curves(
    scenario: &Scenario,
    grid: usize,
) -> Result<BTreeMap<ArchetypeId, SampledCurve>, DispatchError> {
    let beta = scenario.catalog.battery_ratio_kwh_per_kw;
    let dur = scenario.catalog.battery_duration_hours;
    scenario
        .archetypes
        .par_iter()
        .filter(|a| a.rooftop_enabled())
        .map(|a| {
            let p = scenario
                .profiles
                .get(&a.id)
                .ok_or_else(|| DispatchError::MissingProfiles(a.id.to_string()))?;
            exact_curve(p, a.max_rooftop_kw, beta, dur, grid).map(|c| (a.id.clone(), c))
        })
        .collect::<Result<Vec<_>, _>>()
        .map(|v| v.into_iter().collect())
}

#[derive(Debug, Clone)]
pub struct TimeSolved {
    pub solution: Solution,
    pub curves: BTreeMap<ArchetypeId, SampledCurve>,
    pub model: MilpModel,
    pub map: ModelMap,
    pub mip: MipResult,
}

/// Solves the portfolio with exact sampled curves and reports flows from
/// an hourly re-dispatch of the chosen sizes.
pub fn solve_time_model(scenario: &Scenario, opts: &TimeOptions) -> Result<TimeSolved, SolveError> {
    let curves = exact_curves(scenario, opts.grid)?;
    solve_time_with(scenario, curves, &opts.solve)
}

/// As [`solve_time_model`] with precomputed curves.
pub fn solve_time_with(
    scenario: &Scenario,
    curves: BTreeMap<ArchetypeId, SampledCurve>,
    opts: &SolveOptions,
) -> Result<TimeSolved, SolveError> {
    let (model, map) = build_sampled(scenario, &curves)?;
    let mip = solve_model(&model, &map, opts);
    check(&mip)?;
    let beta = scenario.catalog.battery_ratio_kwh_per_kw;
    let dur = scenario.catalog.battery_duration_hours;
    let redispatch = |id: &ArchetypeId, d: f64, battery: f64| -> Option<RealizedFlows> {
        let p = scenario.profiles.get(id)?;
        let with = greedy_totals(p, d, battery, dur).ok()?;
        let opportunity = greedy_totals(p, d, beta * d, dur).ok()?;
        Some(RealizedFlows {
            self_consumed_kwh: with.self_consumed_kwh,
            stored_kwh: with.stored_kwh,
            storage_opportunity_kwh: opportunity.stored_kwh,
        })
    };
    let solution = extract_solution(scenario, &map, &mip.x, ModelKind::Time, diagnostics(&mip), &redispatch)?;
    Ok(TimeSolved {
        solution,
        curves,
        model,
        map,
        mip,
    })
}

/// The literal hour-by-hour MILP as MPS text, refused above `cell_limit`
/// hours × archetypes.
pub fn export_time_mps(scenario: &Scenario, cell_limit: usize) -> Result<MpsExport, BenchmarkError> {
    let (model, _) = hourly_model(scenario, cell_limit)?;
    Ok(export_mps(&model))
}

/// Builds the hourly MILP behind the same size guard as the exporter.
pub fn hourly_model(scenario: &Scenario, cell_limit: usize) -> Result<(MilpModel, ModelMap), BenchmarkError> {
    let hours = scenario.profiles.values().map(|p| p.hours).max().unwrap_or(0);
    let archetypes = scenario.archetypes.len();
    let cells = hours.saturating_mul(archetypes);
    if cells > cell_limit {
        return Err(BenchmarkError::TooLarge {
            hours,
            archetypes,
            cells,
            limit: cell_limit,
        });
    }
    Ok(build_hourly(scenario)?)
}
