//! Scenario files on disk, profile rescaling and the synthetic generator.
//!
//! A scenario directory holds:
//!
//! ```text
//! archetypes.csv   id,tract_id,count,annual_income,heating_fuel,e_el,e_hf,e_of,ws_fraction,max_rooftop_kw,eligibility
//! tracts.csv       id,solar_annual_yield,wind_annual_yield,cs_cap_kw,cw_cap_kw
//! catalog.json     InterventionCatalog fields plus "schema_version": "1"
//! tariff.json      TariffScheme fields plus "schema_version": "1"
//! scenario.json    optional: hours, budget, cost_weight_lambda
//! profiles/<id>.csv  hour,load_kwh,pv_unit_kwh_per_kw
//! ```
//!
//! Hours of the load and PV profiles are assumed index-aligned.

pub mod fixtures;
mod synthetic;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use synthetic::{generate_synthetic, SyntheticSpec};

use crate::domain::{
    default_lambda, ArchetypeId, HeatingFuel, HourlyProfiles, HouseholdArchetype,
    InterventionCatalog, Intervention, Scenario, TariffScheme, Tract, TractId, ValidationErrors,
};

pub const SCHEMA_VERSION: &str = "1";
pub const DEFAULT_HOURS: usize = 8760;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{}", fmt_parse(.file, *.line, .message))]
    Parse {
        file: PathBuf,
        line: Option<u64>,
        message: String,
    },
    #[error("cannot scale profile: {0}")]
    Scale(String),
    #[error("invalid synthetic spec: {0}")]
    Spec(String),
    #[error("scenario is invalid: {0}")]
    Invalid(ValidationErrors),
}

fn fmt_parse(file: &Path, line: Option<u64>, message: &str) -> String {
    match line {
        Some(l) => format!("{}:{l}: {message}", file.display()),
        None => format!("{}: {message}", file.display()),
    }
}

fn parse_err(file: &Path, line: Option<u64>, message: impl Into<String>) -> IngestError {
    IngestError::Parse {
        file: file.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> IngestError + '_ {
    move |source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Paths making up one scenario.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioFiles {
    pub archetypes_csv: PathBuf,
    pub tracts_csv: PathBuf,
    pub catalog_json: PathBuf,
    pub tariff_json: PathBuf,
    pub profiles_dir: PathBuf,
    /// Optional run settings; absent means 8760 hours, no budget, default λ.
    pub settings_json: Option<PathBuf>,
}

impl ScenarioFiles {
    /// Conventional layout under `dir`.
    pub fn in_dir(dir: impl AsRef<Path>) -> Self {
        let d = dir.as_ref();
        let settings = d.join("scenario.json");
        Self {
            archetypes_csv: d.join("archetypes.csv"),
            tracts_csv: d.join("tracts.csv"),
            catalog_json: d.join("catalog.json"),
            tariff_json: d.join("tariff.json"),
            profiles_dir: d.join("profiles"),
            settings_json: settings.exists().then_some(settings),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ArchetypeRow {
    id: String,
    tract_id: String,
    count: u32,
    annual_income: f64,
    heating_fuel: String,
    e_el: f64,
    e_hf: f64,
    e_of: f64,
    ws_fraction: f64,
    max_rooftop_kw: f64,
    eligibility: String,
}

const ARCHETYPE_COLUMNS: [&str; 11] = [
    "id",
    "tract_id",
    "count",
    "annual_income",
    "heating_fuel",
    "e_el",
    "e_hf",
    "e_of",
    "ws_fraction",
    "max_rooftop_kw",
    "eligibility",
];

#[derive(Debug, Serialize, Deserialize)]
struct TractRow {
    id: String,
    solar_annual_yield: f64,
    wind_annual_yield: f64,
    cs_cap_kw: f64,
    cw_cap_kw: f64,
}

const TRACT_COLUMNS: [&str; 5] = ["id", "solar_annual_yield", "wind_annual_yield", "cs_cap_kw", "cw_cap_kw"];

#[derive(Debug, Serialize, Deserialize)]
struct ProfileRow {
    hour: usize,
    load_kwh: f64,
    pv_unit_kwh_per_kw: f64,
}

const PROFILE_COLUMNS: [&str; 3] = ["hour", "load_kwh", "pv_unit_kwh_per_kw"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Settings {
    hours: usize,
    #[serde(default)]
    budget: Option<f64>,
    #[serde(default = "default_lambda")]
    cost_weight_lambda: f64,
}

#[derive(Serialize, Deserialize)]
struct Versioned<T> {
    schema_version: String,
    #[serde(flatten)]
    body: T,
}

fn read_csv<T: DeserializeOwned>(path: &Path, columns: &[&str]) -> Result<Vec<(u64, T)>, IngestError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let headers = rdr
        .headers()
        .map_err(|e| parse_err(path, Some(1), e.to_string()))?
        .clone();
    for c in columns {
        if !headers.iter().any(|h| h == *c) {
            return Err(parse_err(path, Some(1), format!("missing column `{c}`")));
        }
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| parse_err(path, e.position().map(|p| p.line()), e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        let row = rec.deserialize(Some(&headers)).map_err(|e| {
            let msg = match e.kind() {
                csv::ErrorKind::Deserialize { err, .. } => err.to_string(),
                _ => e.to_string(),
            };
            parse_err(path, Some(line), msg)
        })?;
        out.push((line, row));
    }
    Ok(out)
}

fn read_versioned<T: DeserializeOwned>(path: &Path) -> Result<T, IngestError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let v: Versioned<T> = serde_json::from_str(&text)
        .map_err(|e| parse_err(path, Some(e.line() as u64), e.to_string()))?;
    if v.schema_version != SCHEMA_VERSION {
        return Err(parse_err(
            path,
            None,
            format!("schema_version `{}` is not supported (expected `{SCHEMA_VERSION}`)", v.schema_version),
        ));
    }
    Ok(v.body)
}

fn check_nonneg(path: &Path, line: u64, what: &str, id: &str, fields: &[(&str, f64)]) -> Result<(), IngestError> {
    for (name, v) in fields {
        if !(v.is_finite() && *v >= 0.0) {
            return Err(parse_err(
                path,
                Some(line),
                format!("{what} `{id}`: {name} must be finite and >= 0, got {v}"),
            ));
        }
    }
    Ok(())
}

/// Reads, rescales and validates a scenario.
pub fn load_scenario(files: &ScenarioFiles) -> Result<Scenario, IngestError> {
    let catalog: InterventionCatalog = read_versioned(&files.catalog_json)?;
    let tariff: TariffScheme = read_versioned(&files.tariff_json)?;
    let settings = match &files.settings_json {
        Some(p) => read_versioned::<Settings>(p)?,
        None => Settings {
            hours: DEFAULT_HOURS,
            budget: None,
            cost_weight_lambda: default_lambda(),
        },
    };

    let mut tracts = Vec::new();
    let mut tract_ids = BTreeSet::new();
    for (line, r) in read_csv::<TractRow>(&files.tracts_csv, &TRACT_COLUMNS)? {
        check_nonneg(
            &files.tracts_csv,
            line,
            "tract",
            &r.id,
            &[
                ("solar_annual_yield", r.solar_annual_yield),
                ("wind_annual_yield", r.wind_annual_yield),
                ("cs_cap_kw", r.cs_cap_kw),
                ("cw_cap_kw", r.cw_cap_kw),
            ],
        )?;
        if !tract_ids.insert(r.id.clone()) {
            return Err(parse_err(&files.tracts_csv, Some(line), format!("duplicate tract id `{}`", r.id)));
        }
        tracts.push(Tract {
            id: TractId(r.id),
            solar_annual_yield: r.solar_annual_yield,
            wind_annual_yield: r.wind_annual_yield,
            community_solar_cap_kw: r.cs_cap_kw,
            community_wind_cap_kw: r.cw_cap_kw,
        });
    }

    let path = &files.archetypes_csv;
    let mut archetypes = Vec::new();
    let mut seen = BTreeSet::new();
    for (line, r) in read_csv::<ArchetypeRow>(path, &ARCHETYPE_COLUMNS)? {
        check_nonneg(
            path,
            line,
            "archetype",
            &r.id,
            &[
                ("annual_income", r.annual_income),
                ("e_el", r.e_el),
                ("e_hf", r.e_hf),
                ("e_of", r.e_of),
                ("ws_fraction", r.ws_fraction),
                ("max_rooftop_kw", r.max_rooftop_kw),
            ],
        )?;
        if !seen.insert(r.id.clone()) {
            return Err(parse_err(path, Some(line), format!("duplicate archetype id `{}`", r.id)));
        }
        if !tract_ids.contains(&r.tract_id) {
            return Err(parse_err(
                path,
                Some(line),
                format!("archetype `{}` references unknown tract `{}`", r.id, r.tract_id),
            ));
        }
        let heating_fuel: HeatingFuel = r
            .heating_fuel
            .parse()
            .map_err(|e: String| parse_err(path, Some(line), format!("archetype `{}`: {e}", r.id)))?;
        let eligibility = r
            .eligibility
            .split(';')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<Intervention>())
            .collect::<Result<BTreeSet<_>, _>>()
            .map_err(|e| parse_err(path, Some(line), format!("archetype `{}`: {e}", r.id)))?;
        archetypes.push(HouseholdArchetype {
            id: ArchetypeId(r.id),
            tract_id: TractId(r.tract_id),
            count: r.count,
            annual_income: r.annual_income,
            heating_fuel,
            baseline_electricity_expenditure: r.e_el,
            baseline_heating_fuel_expenditure: r.e_hf,
            baseline_other_fuel_expenditure: r.e_of,
            weatherization_savings_fraction: r.ws_fraction,
            max_rooftop_kw: r.max_rooftop_kw,
            eligibility,
        });
    }

    let mut profiles = BTreeMap::new();
    for a in &archetypes {
        let p = files.profiles_dir.join(format!("{}.csv", a.id));
        let rows = read_csv::<ProfileRow>(&p, &PROFILE_COLUMNS)?;
        if rows.len() != settings.hours {
            return Err(parse_err(
                &p,
                None,
                format!("profile length mismatch: {} rows, expected {} hours", rows.len(), settings.hours),
            ));
        }
        let mut load = Vec::with_capacity(rows.len());
        let mut pv = Vec::with_capacity(rows.len());
        for (i, (line, r)) in rows.into_iter().enumerate() {
            if r.hour != i {
                return Err(parse_err(&p, Some(line), format!("expected hour {i}, found {}", r.hour)));
            }
            check_nonneg(&p, line, "archetype", a.id.as_str(), &[("load_kwh", r.load_kwh), ("pv_unit_kwh_per_kw", r.pv_unit_kwh_per_kw)])?;
            load.push(r.load_kwh);
            pv.push(r.pv_unit_kwh_per_kw);
        }
        let tract = tracts.iter().find(|t| t.id == a.tract_id).expect("tract checked above");
        let target_load = a.baseline_electricity_expenditure / tariff.electricity_price;
        let scaled = scale_profiles(&load, &pv, target_load, tract.solar_annual_yield)
            .map_err(|e| parse_err(&p, None, e.to_string()))?;
        profiles.insert(a.id.clone(), scaled);
    }

    let scenario = Scenario {
        archetypes,
        tracts,
        profiles,
        catalog,
        tariff,
        budget: settings.budget,
        cost_weight_lambda: settings.cost_weight_lambda,
    };
    scenario.validate().map_err(IngestError::Invalid)?;
    Ok(scenario)
}

/// Loads the conventional layout under `dir`.
pub fn load_scenario_dir(dir: impl AsRef<Path>) -> Result<Scenario, IngestError> {
    load_scenario(&ScenarioFiles::in_dir(dir))
}

fn scale_one(v: &[f64], target: f64, what: &str) -> Result<Vec<f64>, IngestError> {
    if v.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
        return Err(IngestError::Scale(format!("{what} has negative or non-finite entries")));
    }
    if !(target.is_finite() && target >= 0.0) {
        return Err(IngestError::Scale(format!("{what} target must be >= 0, got {target}")));
    }
    let sum: f64 = v.iter().sum();
    if sum <= 0.0 {
        return Err(IngestError::Scale(format!("{what} sums to zero")));
    }
    let s = target / sum;
    if (s - 1.0).abs() <= 1e-12 {
        return Ok(v.to_vec());
    }
    Ok(v.iter().map(|x| x * s).collect())
}

/// Multiplies each profile by one scalar so that its annual sum hits the
/// target. A scalar within 1e-12 of one leaves the profile untouched.
pub fn scale_profiles(
    raw_load: &[f64],
    raw_pv: &[f64],
    target_annual_load_kwh: f64,
    target_annual_yield_kwh_per_kw: f64,
) -> Result<HourlyProfiles, IngestError> {
    if raw_load.len() != raw_pv.len() {
        return Err(IngestError::Scale(format!(
            "load has {} hours, PV has {}",
            raw_load.len(),
            raw_pv.len()
        )));
    }
    Ok(HourlyProfiles::new(
        scale_one(raw_load, target_annual_load_kwh, "load")?,
        scale_one(raw_pv, target_annual_yield_kwh_per_kw, "pv")?,
    ))
}

fn write_versioned<T: Serialize>(path: &Path, body: &T) -> Result<(), IngestError> {
    let v = Versioned {
        schema_version: SCHEMA_VERSION.to_string(),
        body,
    };
    let text = serde_json::to_string_pretty(&v).expect("plain structs serialize");
    fs::write(path, text + "\n").map_err(io_err(path))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>, IngestError> {
    let f = fs::File::create(path).map_err(io_err(path))?;
    Ok(csv::Writer::from_writer(f))
}

fn csv_fail(path: &Path) -> impl Fn(csv::Error) -> IngestError + '_ {
    move |e| parse_err(path, None, e.to_string())
}

/// Writes `scenario` in the conventional layout under `dir`.
pub fn write_scenario(scenario: &Scenario, dir: impl AsRef<Path>) -> Result<ScenarioFiles, IngestError> {
    let dir = dir.as_ref();
    let files = ScenarioFiles {
        settings_json: Some(dir.join("scenario.json")),
        ..ScenarioFiles::in_dir(dir)
    };
    fs::create_dir_all(&files.profiles_dir).map_err(io_err(&files.profiles_dir))?;

    let p = &files.tracts_csv;
    let mut w = csv_writer(p)?;
    for t in &scenario.tracts {
        w.serialize(TractRow {
            id: t.id.0.clone(),
            solar_annual_yield: t.solar_annual_yield,
            wind_annual_yield: t.wind_annual_yield,
            cs_cap_kw: t.community_solar_cap_kw,
            cw_cap_kw: t.community_wind_cap_kw,
        })
        .map_err(csv_fail(p))?;
    }
    w.flush().map_err(io_err(p))?;

    let p = &files.archetypes_csv;
    let mut w = csv_writer(p)?;
    for a in &scenario.archetypes {
        w.serialize(ArchetypeRow {
            id: a.id.0.clone(),
            tract_id: a.tract_id.0.clone(),
            count: a.count,
            annual_income: a.annual_income,
            heating_fuel: a.heating_fuel.as_str().to_string(),
            e_el: a.baseline_electricity_expenditure,
            e_hf: a.baseline_heating_fuel_expenditure,
            e_of: a.baseline_other_fuel_expenditure,
            ws_fraction: a.weatherization_savings_fraction,
            max_rooftop_kw: a.max_rooftop_kw,
            eligibility: a.eligibility.iter().map(|i| i.tag()).collect::<Vec<_>>().join(";"),
        })
        .map_err(csv_fail(p))?;
    }
    w.flush().map_err(io_err(p))?;

    let mut hours = None;
    for (id, prof) in &scenario.profiles {
        let p = files.profiles_dir.join(format!("{id}.csv"));
        let mut w = csv_writer(&p)?;
        for (h, (l, v)) in prof.load_kwh.iter().zip(&prof.pv_unit_kwh_per_kw).enumerate() {
            w.serialize(ProfileRow {
                hour: h,
                load_kwh: *l,
                pv_unit_kwh_per_kw: *v,
            })
            .map_err(csv_fail(&p))?;
        }
        w.flush().map_err(io_err(&p))?;
        hours.get_or_insert(prof.hours);
    }

    write_versioned(&files.catalog_json, &scenario.catalog)?;
    write_versioned(&files.tariff_json, &scenario.tariff)?;
    write_versioned(
        files.settings_json.as_ref().expect("set above"),
        &Settings {
            hours: hours.unwrap_or(DEFAULT_HOURS),
            budget: scenario.budget,
            cost_weight_lambda: scenario.cost_weight_lambda,
        },
    )?;
    Ok(files)
}
