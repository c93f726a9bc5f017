use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::CliError;
use crate::benchmark::{burden_histogram, ComparisonReport, HistogramRow, HISTOGRAM_EDGES};
use crate::domain::{ModelKind, Scenario, Solution};

/// Writes through a temporary sibling and renames into place.
pub(crate) fn atomic_write(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    let mut f = fs::File::create(&tmp)?;
    f.write_all(bytes)?;
    f.sync_all()?;
    drop(f);
    fs::rename(&tmp, path)
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    atomic_write(path, bytes).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn csv_bytes<T: Serialize>(path: &Path, rows: &[T]) -> Result<Vec<u8>, CliError> {
    let err = |source| CliError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(err)?;
    }
    w.into_inner().map_err(|e| err(e.into_error().into()))
}

pub(crate) fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), CliError> {
    let bytes = csv_bytes(path, rows)?;
    write_atomic(path, &bytes)
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|source| CliError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// `portfolio.csv`: deployed quantity and annualized cost per intervention.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortfolioRow {
    pub model: String,
    pub intervention: String,
    pub unit: String,
    pub quantity: f64,
    pub annualized_cost: f64,
}

pub fn portfolio_rows(s: &Solution) -> Vec<PortfolioRow> {
    let per_home = |f: fn(&crate::domain::ArchetypeOutcome) -> f64| -> f64 {
        s.archetypes.iter().map(|a| f(a) * a.count as f64).sum()
    };
    let row = |intervention: &str, unit: &str, quantity: f64, annualized_cost: f64| PortfolioRow {
        model: s.model.as_str().to_string(),
        intervention: intervention.to_string(),
        unit: unit.to_string(),
        quantity,
        annualized_cost,
    };
    vec![
        row(
            "weatherization",
            "buildings",
            s.weatherized_buildings(),
            per_home(|a| a.weatherization_cost),
        ),
        row("rooftop_solar", "kW", s.total_rooftop_kw(), per_home(|a| a.rooftop_cost)),
        row("battery", "kWh", s.total_battery_kwh(), per_home(|a| a.battery_cost)),
        row(
            "community_solar",
            "kW",
            s.total_community_solar_kw(),
            s.tracts.iter().map(|t| t.community_solar_cost).sum(),
        ),
        row(
            "community_wind",
            "kW",
            s.total_community_wind_kw(),
            s.tracts.iter().map(|t| t.community_wind_cost).sum(),
        ),
    ]
}

/// `deployment_by_tract.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TractDeployment {
    pub model: String,
    pub tract_id: String,
    pub households: u64,
    pub weatherized_buildings: f64,
    pub rooftop_kw: f64,
    pub battery_kwh: f64,
    pub community_solar_kw: f64,
    pub community_wind_kw: f64,
    pub mean_burden_before: f64,
    pub mean_burden_after: f64,
}

pub fn deployment_by_tract(scenario: &Scenario, s: &Solution) -> Vec<TractDeployment> {
    s.tracts
        .iter()
        .map(|t| {
            let homes: Vec<_> = s.archetypes.iter().filter(|a| a.tract_id == t.id).collect();
            let n: u64 = homes.iter().map(|a| a.count as u64).sum();
            let weighted = |f: &dyn Fn(&crate::domain::ArchetypeOutcome) -> f64| -> f64 {
                homes.iter().map(|a| f(a) * a.count as f64).sum()
            };
            let mean = |v: f64| if n > 0 { v / n as f64 } else { 0.0 };
            TractDeployment {
                model: s.model.as_str().to_string(),
                tract_id: t.id.0.clone(),
                households: n,
                weatherized_buildings: weighted(&|a| a.weatherization_fraction),
                rooftop_kw: weighted(&|a| a.rooftop_kw),
                battery_kwh: weighted(&|a| a.battery_kwh),
                community_solar_kw: t.community_solar_kw,
                community_wind_kw: t.community_wind_kw,
                mean_burden_before: mean(weighted(&|a| {
                    scenario.archetype(&a.id).map_or(a.baseline_burden, |x| x.baseline_burden())
                })),
                mean_burden_after: mean(weighted(&|a| a.energy_burden)),
            }
        })
        .collect()
}

/// `z1_scatter.csv`: rooftop size against the surplus threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Z1Point {
    pub model: String,
    pub archetype_id: String,
    pub tract_id: String,
    pub z1_kw: f64,
    pub rooftop_kw: f64,
    pub has_battery: bool,
    pub battery_kwh: f64,
}

pub fn z1_scatter(s: &Solution) -> Vec<Z1Point> {
    s.archetypes
        .iter()
        .map(|a| Z1Point {
            model: s.model.as_str().to_string(),
            archetype_id: a.id.0.clone(),
            tract_id: a.tract_id.0.clone(),
            z1_kw: a.z1_kw,
            rooftop_kw: a.rooftop_kw,
            has_battery: a.has_battery,
            battery_kwh: a.battery_kwh,
        })
        .collect()
}

/// One `sweep.csv` row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub ratio: f64,
    pub battery_kwh: f64,
    pub rooftop_kw: f64,
    pub inequity: f64,
    pub budget_used: f64,
}

impl SweepRow {
    pub fn of(ratio: f64, s: &Solution) -> Self {
        Self {
            ratio,
            battery_kwh: s.total_battery_kwh(),
            rooftop_kw: s.total_rooftop_kw(),
            inequity: s.inequity_objective,
            budget_used: s.total_annualized_cost,
        }
    }
}

fn solution_file(kind: ModelKind, first: bool) -> &'static str {
    match (kind, first) {
        (_, true) => "solution.json",
        (ModelKind::Time, false) => "solution_time.json",
        (ModelKind::Linearized, false) => "solution_linearized.json",
    }
}

/// Writes the run artifacts for one or more solutions of `scenario`. The
/// first solution goes to `solution.json`; tabular files carry a `model`
/// column and hold rows for every solution.
pub fn write_artifacts(
    dir: &Path,
    scenario: &Scenario,
    solutions: &[&Solution],
    comparison: Option<&ComparisonReport>,
) -> Result<Vec<PathBuf>, CliError> {
    let mut files = Vec::new();
    let mut put = |name: &str| {
        let p = dir.join(name);
        files.push(p.clone());
        p
    };
    for (i, s) in solutions.iter().enumerate() {
        write_json(&put(solution_file(s.model, i == 0)), s)?;
    }
    let portfolio: Vec<PortfolioRow> = solutions.iter().flat_map(|s| portfolio_rows(s)).collect();
    write_csv(&put("portfolio.csv"), &portfolio)?;
    let hist: Vec<HistogramRow> = solutions
        .iter()
        .flat_map(|s| burden_histogram(scenario, s, &HISTOGRAM_EDGES))
        .collect();
    write_csv(&put("burden_histogram.csv"), &hist)?;
    let tracts: Vec<TractDeployment> = solutions.iter().flat_map(|s| deployment_by_tract(scenario, s)).collect();
    write_csv(&put("deployment_by_tract.csv"), &tracts)?;
    let scatter: Vec<Z1Point> = solutions.iter().flat_map(|s| z1_scatter(s)).collect();
    write_csv(&put("z1_scatter.csv"), &scatter)?;
    if let Some(c) = comparison {
        write_json(&put("comparison.json"), c)?;
    }
    Ok(files)
}
