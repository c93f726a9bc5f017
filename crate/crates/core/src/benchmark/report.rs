use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::domain::{ArchetypeId, Scenario, Solution};

/// Indicators above this relative error fail a validation run.
pub const DEFAULT_ERROR_THRESHOLD_PCT: f64 = 5.0;

/// Burden histogram bin edges, as fractions of income.
pub const HISTOGRAM_EDGES: [f64; 13] = [
    0.0, 0.02, 0.04, 0.06, 0.08, 0.10, 0.12, 0.14, 0.16, 0.18, 0.20, 0.25, 1.0,
];

const EPS: f64 = 1e-12;

/// |reference − other| / max(|reference|, 1e-12), in percent.
pub fn relative_error_pct(reference: f64, other: f64) -> f64 {
    100.0 * (reference - other).abs() / reference.abs().max(EPS)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Indicator {
    pub name: String,
    pub time: f64,
    pub linearized: f64,
    pub error_pct: f64,
    pub exceeds_threshold: bool,
}

impl Indicator {
    pub fn new(name: &str, time: f64, linearized: f64, threshold_pct: f64) -> Self {
        let error_pct = relative_error_pct(time, linearized);
        Self {
            name: name.to_string(),
            time,
            linearized,
            error_pct,
            exceeds_threshold: error_pct > threshold_pct,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortfolioMix {
    pub rooftop_kw: f64,
    pub battery_kwh: f64,
    pub weatherized_buildings: f64,
    pub community_solar_kw: f64,
    pub community_wind_kw: f64,
    /// Battery kWh per MW of rooftop PV.
    pub storage_per_pv_kwh_per_mw: f64,
}

impl PortfolioMix {
    pub fn of(s: &Solution) -> Self {
        Self::from_totals(
            s.total_rooftop_kw(),
            s.total_battery_kwh(),
            s.weatherized_buildings(),
            s.total_community_solar_kw(),
            s.total_community_wind_kw(),
        )
    }

    pub fn from_totals(rooftop_kw: f64, battery_kwh: f64, weatherized: f64, cs_kw: f64, cw_kw: f64) -> Self {
        Self {
            rooftop_kw,
            battery_kwh,
            weatherized_buildings: weatherized,
            community_solar_kw: cs_kw,
            community_wind_kw: cw_kw,
            storage_per_pv_kwh_per_mw: if rooftop_kw > 0.0 { battery_kwh / (rooftop_kw / 1000.0) } else { 0.0 },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchetypeBurden {
    pub id: ArchetypeId,
    pub count: u32,
    pub before: f64,
    pub time_after: f64,
    pub linearized_after: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub threshold_pct: f64,
    pub indicators: Vec<Indicator>,
    pub time_mix: PortfolioMix,
    pub linearized_mix: PortfolioMix,
    pub time_gap: f64,
    pub linearized_gap: f64,
    pub burdens: Vec<ArchetypeBurden>,
}

impl ComparisonReport {
    pub fn passed(&self) -> bool {
        self.indicators.iter().all(|i| !i.exceeds_threshold)
    }

    pub fn failing(&self) -> impl Iterator<Item = &Indicator> {
        self.indicators.iter().filter(|i| i.exceeds_threshold)
    }

    pub fn indicator(&self, name: &str) -> Option<&Indicator> {
        self.indicators.iter().find(|i| i.name == name)
    }

    /// One row per indicator: `indicator,time,linearized,error_pct,exceeds_threshold`.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for i in &self.indicators {
            w.serialize(i)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// The four headline indicators plus portfolio mixes and burden vectors.
pub fn compare(time: &Solution, linearized: &Solution, scenario: &Scenario, threshold_pct: f64) -> ComparisonReport {
    let ind = |name, a, b| Indicator::new(name, a, b, threshold_pct);
    let indicators = vec![
        ind("inequity_objective", time.inequity_objective, linearized.inequity_objective),
        ind("total_annualized_cost", time.total_annualized_cost, linearized.total_annualized_cost),
        ind("mean_burden", time.mean_burden(), linearized.mean_burden()),
        ind("mean_over_burden", time.mean_over_burden(), linearized.mean_over_burden()),
    ];
    let burdens = scenario
        .archetypes
        .iter()
        .map(|a| ArchetypeBurden {
            id: a.id.clone(),
            count: a.count,
            before: a.baseline_burden(),
            time_after: time.archetype(&a.id).map_or(f64::NAN, |o| o.energy_burden),
            linearized_after: linearized.archetype(&a.id).map_or(f64::NAN, |o| o.energy_burden),
        })
        .collect();
    ComparisonReport {
        threshold_pct,
        indicators,
        time_mix: PortfolioMix::of(time),
        linearized_mix: PortfolioMix::of(linearized),
        time_gap: time.diagnostics.gap,
        linearized_gap: linearized.diagnostics.gap,
        burdens,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramRow {
    pub model: String,
    pub stage: String,
    pub bin_lo: f64,
    pub bin_hi: f64,
    pub households: u64,
}

fn bin_of(edges: &[f64], v: f64) -> usize {
    let last = edges.len() - 2;
    edges.windows(2).position(|w| v < w[1]).unwrap_or(last).min(last)
}

/// Household counts per baseline burden bin, before any intervention.
pub fn baseline_histogram(scenario: &Scenario, edges: &[f64]) -> Vec<HistogramRow> {
    assert!(edges.len() >= 2, "a histogram needs at least one bin");
    let mut counts = vec![0u64; edges.len() - 1];
    for a in &scenario.archetypes {
        counts[bin_of(edges, a.baseline_burden())] += a.count as u64;
    }
    rows("baseline", "before", edges, counts)
}

fn rows(model: &str, stage: &str, edges: &[f64], counts: Vec<u64>) -> Vec<HistogramRow> {
    counts
        .into_iter()
        .enumerate()
        .map(|(i, c)| HistogramRow {
            model: model.to_string(),
            stage: stage.to_string(),
            bin_lo: edges[i],
            bin_hi: edges[i + 1],
            households: c,
        })
        .collect()
}

/// Household counts per burden bin, before and after, tagged by model.
/// Values beyond the last edge fall into the last bin, negatives into the first.
pub fn burden_histogram(scenario: &Scenario, solution: &Solution, edges: &[f64]) -> Vec<HistogramRow> {
    assert!(edges.len() >= 2, "a histogram needs at least one bin");
    let mut before = vec![0u64; edges.len() - 1];
    let mut after = vec![0u64; edges.len() - 1];
    for a in &scenario.archetypes {
        before[bin_of(edges, a.baseline_burden())] += a.count as u64;
    }
    for o in &solution.archetypes {
        after[bin_of(edges, o.energy_burden)] += o.count as u64;
    }
    let model = solution.model.as_str();
    let mut out = rows(model, "before", edges, before);
    out.extend(rows(model, "after", edges, after));
    out
}

pub fn write_histogram_csv<W: Write>(rows: &[HistogramRow], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
