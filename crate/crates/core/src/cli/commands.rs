use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;

use super::artifacts::{write_artifacts, write_atomic, write_csv, SweepRow};
use super::{CliError, ModelChoice, MpsKind, RunConfig};
use crate::benchmark::{compare, export_time_mps, solve_time_model, ComparisonReport, TimeOptions};
use crate::dispatch::fit_scenario;
use crate::domain::{Scenario, Solution};
use crate::ingest::write_scenario;
use crate::linmodel::{build_linearized, export_mps};
use crate::solve::{solve_linearized, SolveError, SolveOptions};

/// Files written by `run` and per-model solve times in seconds.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub files: Vec<PathBuf>,
    pub timings: Vec<(String, f64)>,
}

fn time_options(cfg: &RunConfig) -> TimeOptions {
    TimeOptions {
        grid: cfg.grid,
        solve: cfg.solve_options(),
    }
}

fn timed<T>(f: impl FnOnce() -> Result<T, SolveError>) -> Result<(T, f64), SolveError> {
    let t0 = Instant::now();
    let v = f()?;
    Ok((v, t0.elapsed().as_secs_f64()))
}

pub fn cmd_run(cfg: &RunConfig) -> Result<RunOutcome, CliError> {
    let scenario = cfg.scenario()?;
    let mut timings = Vec::new();
    let mut lin = None;
    let mut time = None;
    if matches!(cfg.model, ModelChoice::Linearized | ModelChoice::Both) {
        let (s, secs) = timed(|| solve_linearized(&scenario, &cfg.solve_options()))?;
        timings.push(("linearized".to_string(), secs));
        lin = Some(s.solution);
    }
    if matches!(cfg.model, ModelChoice::Time | ModelChoice::Both) {
        let (s, secs) = timed(|| solve_time_model(&scenario, &time_options(cfg)))?;
        timings.push(("time".to_string(), secs));
        time = Some(s.solution);
    }
    let comparison = match (&time, &lin) {
        (Some(t), Some(l)) => Some(compare(t, l, &scenario, cfg.threshold_pct)),
        _ => None,
    };
    let solutions: Vec<&Solution> = lin.iter().chain(time.iter()).collect();
    let files = write_artifacts(&cfg.out, &scenario, &solutions, comparison.as_ref())?;
    Ok(RunOutcome { files, timings })
}

/// Solves `scenario` once per PVrem/Pel ratio, in parallel. Rows follow the
/// order of `ratios`.
pub fn run_sweep(
    scenario: &Scenario,
    ratios: &[f64],
    model: ModelChoice,
    opts: &TimeOptions,
) -> Result<Vec<SweepRow>, CliError> {
    if ratios.is_empty() {
        return Err(CliError::Config("sweep needs at least one ratio".into()));
    }
    ratios
        .par_iter()
        .map(|&r| {
            let s = scenario.with_ratio(r);
            let solution = match model {
                ModelChoice::Time => solve_time_model(&s, opts)?.solution,
                _ => solve_linearized(&s, &opts.solve)?.solution,
            };
            Ok(SweepRow::of(r, &solution))
        })
        .collect()
}

pub fn cmd_sweep(cfg: &RunConfig) -> Result<Vec<SweepRow>, CliError> {
    let scenario = cfg.scenario()?;
    let rows = run_sweep(&scenario, &cfg.ratios, cfg.model, &time_options(cfg))?;
    write_csv(&cfg.out.join("sweep.csv"), &rows)?;
    Ok(rows)
}

/// Both solutions of a validation run and their comparison.
#[derive(Debug, Clone)]
pub struct Validation {
    pub report: ComparisonReport,
    pub linearized: Solution,
    pub time: Solution,
    pub linearized_secs: f64,
    pub time_secs: f64,
}

pub fn run_validation(scenario: &Scenario, opts: &SolveOptions, grid: usize, threshold_pct: f64) -> Result<Validation, CliError> {
    let (lin, linearized_secs) = timed(|| solve_linearized(scenario, opts))?;
    let topts = TimeOptions { grid, solve: opts.clone() };
    let (time, time_secs) = timed(|| solve_time_model(scenario, &topts))?;
    Ok(Validation {
        report: compare(&time.solution, &lin.solution, scenario, threshold_pct),
        linearized: lin.solution,
        time: time.solution,
        linearized_secs,
        time_secs,
    })
}

pub fn cmd_validate(cfg: &RunConfig) -> Result<ComparisonReport, CliError> {
    let scenario = cfg.scenario()?;
    let v = run_validation(&scenario, &cfg.solve_options(), cfg.grid, cfg.threshold_pct)?;
    eprintln!("linearized: {:.3} s, time: {:.3} s", v.linearized_secs, v.time_secs);
    write_artifacts(&cfg.out, &scenario, &[&v.linearized, &v.time], Some(&v.report))?;
    let path = cfg.out.join("comparison.csv");
    let mut buf = Vec::new();
    v.report.write_csv(&mut buf).map_err(|source| CliError::Csv {
        path: path.clone(),
        source,
    })?;
    write_atomic(&path, &buf)?;
    Ok(v.report)
}

pub fn cmd_gen(cfg: &RunConfig) -> Result<(), CliError> {
    let scenario = cfg.scenario()?;
    write_scenario(&scenario, &cfg.out)?;
    Ok(())
}

/// Writes `model.mps` under `out`, plus `names.json` when names were mangled.
pub fn cmd_export_mps(cfg: &RunConfig, kind: MpsKind) -> Result<PathBuf, CliError> {
    let scenario = cfg.scenario()?;
    let export = match kind {
        MpsKind::Linearized => {
            let fits = fit_scenario(&scenario, cfg.samples).map_err(SolveError::from)?;
            let (model, _) = build_linearized(&scenario, &fits).map_err(SolveError::from)?;
            export_mps(&model)
        }
        MpsKind::Hourly => export_time_mps(&scenario, cfg.mps_cell_limit)?,
    };
    let path = cfg.out.join("model.mps");
    write_atomic(&path, export.text.as_bytes())?;
    if let Some(names) = &export.names {
        let p = cfg.out.join("names.json");
        let bytes = serde_json::to_vec(names).map_err(|source| CliError::Json { path: p.clone(), source })?;
        write_atomic(&p, &bytes)?;
    }
    Ok(path)
}
