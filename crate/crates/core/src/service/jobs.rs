use serde::{Deserialize, Serialize};

use crate::benchmark::{solve_time_model, ComparisonReport, TimeOptions, DEFAULT_ERROR_THRESHOLD_PCT};
use crate::cli::{run_sweep, run_validation, BudgetSetting, CliError, ModelChoice, SweepRow};
use crate::domain::{Scenario, Solution};
use crate::solve::{solve_linearized, SolveOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobKind {
    Solve,
    Sweep,
    Validate,
}

/// Per-job changes to the stored scenario and solver settings.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Overrides {
    /// `linearized` or `time`; solve and sweep jobs only.
    pub model: Option<ModelChoice>,
    pub budget: Option<BudgetSetting>,
    pub ratio: Option<f64>,
    pub lambda: Option<f64>,
    pub ratios: Option<Vec<f64>>,
    pub gap: Option<f64>,
    pub node_limit: Option<u64>,
    pub samples: Option<usize>,
    pub grid: Option<usize>,
    pub threshold_pct: Option<f64>,
}

impl Overrides {
    pub fn check(&self, kind: JobKind) -> Result<(), String> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(format!("{name} must lie in [0, 1], got {v}"))
            }
        };
        if let Some(r) = self.ratio {
            unit("ratio", r)?;
        }
        for r in self.ratios.iter().flatten() {
            unit("ratios", *r)?;
        }
        if kind == JobKind::Sweep && self.ratios.as_ref().is_none_or(|r| r.is_empty()) {
            return Err("sweep jobs need a non-empty `ratios` list".into());
        }
        if self.model == Some(ModelChoice::Both) {
            return Err("model must be `linearized` or `time`".into());
        }
        if let Some(BudgetSetting::Amount(b)) = self.budget {
            if !(b >= 0.0) {
                return Err(format!("budget must be >= 0, got {b}"));
            }
        }
        Ok(())
    }

    fn apply(&self, mut s: Scenario) -> Scenario {
        if let Some(r) = self.ratio {
            s = s.with_ratio(r);
        }
        if let Some(b) = self.budget {
            s.budget = b.amount();
        }
        if let Some(l) = self.lambda {
            s.cost_weight_lambda = l;
        }
        s
    }

    fn time_options(&self) -> TimeOptions {
        let d = TimeOptions::default();
        let solve = SolveOptions {
            gap_tol: self.gap.unwrap_or(d.solve.gap_tol),
            node_limit: self.node_limit.unwrap_or(d.solve.node_limit),
            samples: self.samples.unwrap_or(d.solve.samples),
            ..d.solve
        };
        TimeOptions {
            grid: self.grid.unwrap_or(d.grid),
            solve,
        }
    }
}

/// The JSON served by `GET /api/v1/jobs/{id}/result`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum JobResult {
    Solve { solution: Box<Solution> },
    Sweep { rows: Vec<SweepRow> },
    Validate { report: ComparisonReport },
}

pub fn execute(scenario: &Scenario, kind: JobKind, o: &Overrides) -> Result<JobResult, CliError> {
    let s = o.apply(scenario.clone());
    let opts = o.time_options();
    Ok(match kind {
        JobKind::Solve => {
            let solution = match o.model {
                Some(ModelChoice::Time) => solve_time_model(&s, &opts)?.solution,
                _ => solve_linearized(&s, &opts.solve)?.solution,
            };
            JobResult::Solve {
                solution: Box::new(solution),
            }
        }
        JobKind::Sweep => JobResult::Sweep {
            rows: run_sweep(
                &s,
                o.ratios.as_deref().unwrap_or_default(),
                o.model.unwrap_or(ModelChoice::Linearized),
                &opts,
            )?,
        },
        JobKind::Validate => {
            let threshold = o.threshold_pct.unwrap_or(DEFAULT_ERROR_THRESHOLD_PCT);
            JobResult::Validate {
                report: run_validation(&s, &opts.solve, opts.grid, threshold)?.report,
            }
        }
    })
}
