//! Command-line front end: configuration, scenario sources and the
//! `run`, `sweep`, `validate`, `gen`, `export-mps` and `serve` commands.
//!
//! A JSON config file may supply any [`RunConfig`] field; command-line
//! flags override it.

pub(crate) mod artifacts;
mod commands;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use artifacts::{
    deployment_by_tract, portfolio_rows, write_artifacts, write_atomic, z1_scatter, PortfolioRow, SweepRow,
    TractDeployment, Z1Point,
};
pub use commands::{
    cmd_export_mps, cmd_gen, cmd_run, cmd_sweep, cmd_validate, run_sweep, run_validation, RunOutcome, Validation,
};

use crate::benchmark::{BenchmarkError, DEFAULT_ERROR_THRESHOLD_PCT, DEFAULT_GRID, DEFAULT_MPS_CELL_LIMIT};
use crate::dispatch::DEFAULT_SAMPLES;
use crate::domain::Scenario;
use crate::ingest::{fixtures, load_scenario_dir, IngestError, SyntheticSpec};
use crate::solve::{SolveError, SolveOptions, DEFAULT_GAP_TOL, DEFAULT_NODE_LIMIT};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Benchmark(#[from] BenchmarkError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ModelChoice {
    Linearized,
    Time,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Fixture {
    /// Four active hours per day with exactly affine curves above Z¹.
    Affine,
    /// High-burden homes with a large midday surplus.
    SurplusRich,
}

impl Fixture {
    pub fn scenario(self) -> Scenario {
        match self {
            Fixture::Affine => fixtures::affine_fixture(),
            Fixture::SurplusRich => fixtures::surplus_rich_fixture(),
        }
    }
}

/// `"unconstrained"` or an annual amount in $/yr.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BudgetSetting {
    Amount(f64),
    Named(Unconstrained),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Unconstrained {
    Unconstrained,
}

impl BudgetSetting {
    pub fn amount(self) -> Option<f64> {
        match self {
            BudgetSetting::Amount(v) => Some(v),
            BudgetSetting::Named(_) => None,
        }
    }
}

impl std::str::FromStr for BudgetSetting {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "unconstrained" | "none" => Ok(BudgetSetting::Named(Unconstrained::Unconstrained)),
            v => v
                .parse::<f64>()
                .map(BudgetSetting::Amount)
                .map_err(|_| format!("expected a number or `unconstrained`, got `{v}`")),
        }
    }
}

/// Everything a command needs. Exactly one of `scenario_dir`, `seed` and
/// `fixture` selects the scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub scenario_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub fixture: Option<Fixture>,
    pub tracts: usize,
    pub per_tract: usize,
    pub hours: usize,
    pub model: ModelChoice,
    pub budget: Option<BudgetSetting>,
    /// PVrem / Pel override.
    pub ratio: Option<f64>,
    pub lambda: Option<f64>,
    pub gap: f64,
    pub node_limit: u64,
    pub samples: usize,
    pub grid: usize,
    pub threshold_pct: f64,
    pub ratios: Vec<f64>,
    pub mps_cell_limit: usize,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            scenario_dir: None,
            seed: None,
            fixture: None,
            tracts: 10,
            per_tract: 5,
            hours: 8760,
            model: ModelChoice::Linearized,
            budget: None,
            ratio: None,
            lambda: None,
            gap: DEFAULT_GAP_TOL,
            node_limit: DEFAULT_NODE_LIMIT,
            samples: DEFAULT_SAMPLES,
            grid: DEFAULT_GRID,
            threshold_pct: DEFAULT_ERROR_THRESHOLD_PCT,
            ratios: Vec::new(),
            mps_cell_limit: DEFAULT_MPS_CELL_LIMIT,
            out: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    pub fn from_json_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|source| CliError::Json {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn check(&self) -> Result<(), CliError> {
        let sources = self.scenario_dir.is_some() as u8 + self.seed.is_some() as u8 + self.fixture.is_some() as u8;
        if sources != 1 {
            return Err(CliError::Config(format!(
                "exactly one scenario source (scenario_dir, seed or fixture) is required, got {sources}"
            )));
        }
        if let Some(r) = self.ratio {
            if !(0.0..=1.0).contains(&r) {
                return Err(CliError::Config(format!("ratio must lie in [0, 1], got {r}")));
            }
        }
        if let Some(r) = self.ratios.iter().find(|r| !(0.0..=1.0).contains(*r)) {
            return Err(CliError::Config(format!("sweep ratio must lie in [0, 1], got {r}")));
        }
        if let Some(BudgetSetting::Amount(b)) = self.budget {
            if !(b >= 0.0) {
                return Err(CliError::Config(format!("budget must be >= 0, got {b}")));
            }
        }
        Ok(())
    }

    pub fn synthetic_spec(&self) -> Option<SyntheticSpec> {
        self.seed
            .map(|seed| SyntheticSpec::new(seed, self.tracts, self.per_tract, self.hours))
    }

    /// Loads or generates the scenario and applies the overrides.
    pub fn scenario(&self) -> Result<Scenario, CliError> {
        self.check()?;
        let base = if let Some(dir) = &self.scenario_dir {
            load_scenario_dir(dir)?
        } else if let Some(spec) = self.synthetic_spec() {
            spec.generate()?
        } else {
            self.fixture.expect("checked above").scenario()
        };
        Ok(self.apply_overrides(base))
    }

    pub fn apply_overrides(&self, mut s: Scenario) -> Scenario {
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

    pub fn solve_options(&self) -> SolveOptions {
        SolveOptions {
            gap_tol: self.gap,
            node_limit: self.node_limit,
            samples: self.samples,
            ..SolveOptions::default()
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "equiders", version, about = "Equity-driven household energy portfolio planning")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one scenario and write result artifacts.
    Run(CommonArgs),
    /// Solve across PV remuneration ratios and write sweep.csv.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        /// Comma-separated PVrem/Pel ratios.
        #[arg(long, value_delimiter = ',')]
        ratios: Option<Vec<f64>>,
    },
    /// Compare the linearized model against the time-resolved benchmark.
    Validate {
        #[command(flatten)]
        common: CommonArgs,
        /// Largest acceptable relative error per indicator, in percent.
        #[arg(long)]
        threshold_pct: Option<f64>,
    },
    /// Write a synthetic or fixture scenario to disk.
    Gen(CommonArgs),
    /// Write the linearized or hourly model as MPS.
    ExportMps {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_enum, default_value = "linearized")]
        kind: MpsKind,
        /// Largest hours x archetypes accepted for the hourly model.
        #[arg(long)]
        cell_limit: Option<usize>,
    },
    /// Serve the HTTP API.
    Serve {
        /// Bind address; falls back to EQUIDERS_ADDR, then 127.0.0.1:8080.
        #[arg(long)]
        addr: Option<String>,
        #[arg(long, default_value = "equiders-data")]
        data_dir: PathBuf,
        /// Worker threads for solver jobs; defaults to available parallelism.
        #[arg(long)]
        workers: Option<usize>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MpsKind {
    Linearized,
    Hourly,
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// JSON file with RunConfig fields; flags win on conflict.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, conflicts_with_all = ["seed", "fixture"])]
    pub scenario_dir: Option<PathBuf>,
    #[arg(long, conflicts_with = "fixture")]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub fixture: Option<Fixture>,
    #[arg(long)]
    pub tracts: Option<usize>,
    #[arg(long)]
    pub per_tract: Option<usize>,
    #[arg(long)]
    pub hours: Option<usize>,
    #[arg(long, value_enum)]
    pub model: Option<ModelChoice>,
    /// Annual budget in $/yr, or `unconstrained`.
    #[arg(long)]
    pub budget: Option<BudgetSetting>,
    /// PVrem / Pel.
    #[arg(long)]
    pub ratio: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub gap: Option<f64>,
    #[arg(long)]
    pub node_limit: Option<u64>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub grid: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl CommonArgs {
    /// Config file values with flags layered on top.
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut c = match &self.config {
            Some(p) => RunConfig::from_json_file(p)?,
            None => RunConfig::default(),
        };
        // A source flag replaces whatever source the file named.
        if self.scenario_dir.is_some() || self.seed.is_some() || self.fixture.is_some() {
            c.scenario_dir = self.scenario_dir.clone();
            c.seed = self.seed;
            c.fixture = self.fixture;
        }
        macro_rules! take {
            ($($f:ident),*) => { $( if let Some(v) = self.$f.clone() { c.$f = v; } )* };
        }
        take!(tracts, per_tract, hours, model, gap, node_limit, samples, grid, out);
        if self.budget.is_some() {
            c.budget = self.budget;
        }
        if self.ratio.is_some() {
            c.ratio = self.ratio;
        }
        if self.lambda.is_some() {
            c.lambda = self.lambda;
        }
        Ok(c)
    }
}

/// Parses `args` and runs the command. Returns the process exit code:
/// 0 on success, 1 when validation fails its threshold, 2 on error.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn dispatch(cmd: Command) -> Result<i32, CliError> {
    match cmd {
        Command::Run(args) => {
            let cfg = args.resolve()?;
            let out = cmd_run(&cfg)?;
            for (model, secs) in &out.timings {
                eprintln!("{model}: solved in {secs:.3} s");
            }
            eprintln!("wrote {} artifacts to {}", out.files.len(), cfg.out.display());
            Ok(0)
        }
        Command::Sweep { common, ratios } => {
            let mut cfg = common.resolve()?;
            if let Some(r) = ratios {
                cfg.ratios = r;
            }
            let rows = cmd_sweep(&cfg)?;
            eprintln!("wrote {} sweep rows to {}", rows.len(), cfg.out.join("sweep.csv").display());
            Ok(0)
        }
        Command::Validate { common, threshold_pct } => {
            let mut cfg = common.resolve()?;
            if let Some(t) = threshold_pct {
                cfg.threshold_pct = t;
            }
            let report = cmd_validate(&cfg)?;
            for i in &report.indicators {
                eprintln!(
                    "{:<24} time {:>14.6}  linearized {:>14.6}  error {:>7.3}%{}",
                    i.name,
                    i.time,
                    i.linearized,
                    i.error_pct,
                    if i.exceeds_threshold { "  EXCEEDS" } else { "" }
                );
            }
            if report.passed() {
                Ok(0)
            } else {
                let bad: Vec<&str> = report.failing().map(|i| i.name.as_str()).collect();
                eprintln!("indicators above {}%: {}", cfg.threshold_pct, bad.join(", "));
                Ok(1)
            }
        }
        Command::Gen(args) => {
            let cfg = args.resolve()?;
            cmd_gen(&cfg)?;
            eprintln!("wrote scenario to {}", cfg.out.display());
            Ok(0)
        }
        Command::ExportMps { common, kind, cell_limit } => {
            let mut cfg = common.resolve()?;
            if let Some(l) = cell_limit {
                cfg.mps_cell_limit = l;
            }
            let path = cmd_export_mps(&cfg, kind)?;
            eprintln!("wrote {}", path.display());
            Ok(0)
        }
        Command::Serve { addr, data_dir, workers } => {
            let addr = addr
                .or_else(|| std::env::var("EQUIDERS_ADDR").ok())
                .unwrap_or_else(|| crate::service::DEFAULT_ADDR.to_string());
            let cfg = crate::service::ServiceConfig {
                data_dir,
                workers: workers.unwrap_or_else(crate::service::default_workers),
            };
            let rt = tokio::runtime::Runtime::new().map_err(|source| CliError::Io {
                path: PathBuf::from("<runtime>"),
                source,
            })?;
            rt.block_on(crate::service::serve(&addr, cfg)).map_err(|source| CliError::Io {
                path: PathBuf::from(addr),
                source,
            })?;
            Ok(0)
        }
    }
}
