use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};

use super::{scale_profiles, IngestError};
use crate::dispatch::HOURS_PER_DAY;
use crate::domain::{
    default_lambda, ArchetypeId, HeatingFuel, HouseholdArchetype, Intervention, InterventionCatalog,
    Scenario, TariffScheme, Tract, TractId,
};

/// Retail price used by generated tariffs, $/kWh.
pub const SYNTHETIC_ELECTRICITY_PRICE: f64 = 0.18;

/// Parameters of a generated scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub seed: u64,
    pub n_tracts: usize,
    pub archetypes_per_tract: usize,
    pub hours: usize,
    /// PVrem / Pel.
    #[serde(default = "default_ratio")]
    pub remuneration_ratio: f64,
    #[serde(default)]
    pub budget: Option<f64>,
}

fn default_ratio() -> f64 {
    0.6
}

impl SyntheticSpec {
    pub fn new(seed: u64, n_tracts: usize, archetypes_per_tract: usize, hours: usize) -> Self {
        Self {
            seed,
            n_tracts,
            archetypes_per_tract,
            hours,
            remuneration_ratio: default_ratio(),
            budget: None,
        }
    }

    pub fn generate(&self) -> Result<Scenario, IngestError> {
        if !(0.0..=1.0).contains(&self.remuneration_ratio) {
            return Err(IngestError::Spec(format!(
                "remuneration_ratio must lie in [0, 1], got {}",
                self.remuneration_ratio
            )));
        }
        let mut s = generate_synthetic(self.seed, self.n_tracts, self.archetypes_per_tract, self.hours)?;
        s.tariff = s.tariff.with_ratio(self.remuneration_ratio);
        s.budget = self.budget;
        Ok(s)
    }
}

fn round_to(v: f64, step: f64) -> f64 {
    (v / step).round() * step
}

/// Midday bell per day, longer in summer, scaled by a daily cloud factor.
fn pv_shape(rng: &mut ChaCha8Rng, days: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(days * HOURS_PER_DAY);
    for d in 0..days {
        let season = (2.0 * PI * (d as f64 - 80.0) / 365.0).sin();
        let daylight = 12.0 + 3.0 * season;
        let sunrise = 12.5 - daylight / 2.0;
        let amplitude = (0.8 + 0.2 * season) * rng.random_range(0.25..1.0);
        for h in 0..HOURS_PER_DAY {
            let phase = (h as f64 + 0.5 - sunrise) / daylight;
            let v = if (0.0..1.0).contains(&phase) { (PI * phase).sin() } else { 0.0 };
            out.push(amplitude * v);
        }
    }
    out
}

fn bump(h: f64, centre: f64, width: f64) -> f64 {
    (-((h - centre) / width).powi(2) / 2.0).exp()
}

/// Base load with morning and evening peaks, heavier in winter.
fn load_shape(rng: &mut ChaCha8Rng, days: usize, electric_heat: bool) -> Vec<f64> {
    let base = rng.random_range(0.3..0.6);
    let morning = rng.random_range(0.3..0.8);
    let evening = rng.random_range(0.8..1.5);
    let evening_at = rng.random_range(18.0..20.5);
    let winter = if electric_heat { 0.5 } else { 0.2 };
    let mut out = Vec::with_capacity(days * HOURS_PER_DAY);
    for d in 0..days {
        let season = 1.0 + winter * (2.0 * PI * (d as f64 - 15.0) / 365.0).cos();
        for h in 0..HOURS_PER_DAY {
            let hf = h as f64 + 0.5;
            let shape = base + morning * bump(hf, 7.5, 1.2) + evening * bump(hf, evening_at, 1.8);
            out.push(shape * season * rng.random_range(0.85..1.15));
        }
    }
    out
}

fn draw_fuel(rng: &mut ChaCha8Rng) -> HeatingFuel {
    match rng.random_range(0..10) {
        0..=2 => HeatingFuel::Electric,
        3..=7 => HeatingFuel::Gas,
        8 => HeatingFuel::Oil,
        _ => HeatingFuel::Propane,
    }
}

/// Reproducible desk-scale scenario: pre-intervention burdens between about
/// 5% and 20%, evening-peaking loads and midday PV.
pub fn generate_synthetic(
    seed: u64,
    n_tracts: usize,
    archetypes_per_tract: usize,
    hours: usize,
) -> Result<Scenario, IngestError> {
    if n_tracts < 1 || archetypes_per_tract < 1 {
        return Err(IngestError::Spec("tract and archetype counts must be >= 1".into()));
    }
    if hours == 0 || !hours.is_multiple_of(HOURS_PER_DAY) {
        return Err(IngestError::Spec(format!(
            "hours must be a positive multiple of 24, got {hours}"
        )));
    }
    let days = hours / HOURS_PER_DAY;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let income = LogNormal::new(28_000f64.ln(), 0.3).expect("valid lognormal");
    let tariff = TariffScheme::new(SYNTHETIC_ELECTRICITY_PRICE, SYNTHETIC_ELECTRICITY_PRICE * 0.6);

    let mut tracts = Vec::with_capacity(n_tracts);
    let mut archetypes = Vec::with_capacity(n_tracts * archetypes_per_tract);
    let mut profiles = BTreeMap::new();
    for t in 0..n_tracts {
        let tract_id = TractId(format!("t{:03}", t + 1));
        let pv = pv_shape(&mut rng, days);
        let solar_cf = rng.random_range(0.13..0.17);
        let wind_cf = rng.random_range(0.28..0.38);
        let tract = Tract {
            id: tract_id.clone(),
            solar_annual_yield: round_to(solar_cf * hours as f64, 0.1),
            wind_annual_yield: round_to(wind_cf * hours as f64, 0.1),
            community_solar_cap_kw: round_to(rng.random_range(20.0..200.0), 1.0),
            community_wind_cap_kw: round_to(rng.random_range(0.0..300.0), 1.0),
        };

        for k in 0..archetypes_per_tract {
            let id = ArchetypeId(format!("{}a{:02}", tract_id, k + 1));
            let fuel = draw_fuel(&mut rng);
            let annual_income = round_to(income.sample(&mut rng).clamp(12_000.0, 60_000.0), 10.0);
            let burden = rng.random_range(0.05..0.20);
            let total = burden * annual_income;
            let (e_el, e_hf, e_of) = if fuel.is_electric() {
                let e_el = round_to(total * rng.random_range(0.75..0.9), 0.01);
                (e_el, 0.0, round_to(total - e_el, 0.01))
            } else {
                let e_el = round_to(total * rng.random_range(0.4..0.6), 0.01);
                let e_hf = round_to((total - e_el) * rng.random_range(0.6..0.9), 0.01);
                (e_el, e_hf, round_to(total - e_el - e_hf, 0.01))
            };
            let mut eligibility = BTreeSet::new();
            let mut allow = |p: Intervention, prob: f64, rng: &mut ChaCha8Rng| {
                let yes = rng.random_bool(prob);
                if yes {
                    eligibility.insert(p);
                }
                yes
            };
            allow(Intervention::Weatherization, 0.85, &mut rng);
            if allow(Intervention::RooftopSolar, 0.9, &mut rng) {
                allow(Intervention::Battery, 0.75, &mut rng);
            }
            allow(Intervention::CommunitySolar, 0.9, &mut rng);
            allow(Intervention::CommunityWind, 0.7, &mut rng);

            let a = HouseholdArchetype {
                id: id.clone(),
                tract_id: tract_id.clone(),
                count: rng.random_range(1..=12),
                annual_income,
                heating_fuel: fuel,
                baseline_electricity_expenditure: e_el,
                baseline_heating_fuel_expenditure: e_hf,
                baseline_other_fuel_expenditure: e_of,
                weatherization_savings_fraction: round_to(rng.random_range(0.1..0.3), 0.01),
                max_rooftop_kw: round_to(rng.random_range(2.0..7.0), 0.1),
                eligibility,
            };
            let load = load_shape(&mut rng, days, fuel.is_electric());
            let prof = scale_profiles(&load, &pv, e_el / tariff.electricity_price, tract.solar_annual_yield)?;
            profiles.insert(id, prof);
            archetypes.push(a);
        }
        tracts.push(tract);
    }

    let scenario = Scenario {
        archetypes,
        tracts,
        profiles,
        catalog: InterventionCatalog::reference(),
        tariff,
        budget: None,
        cost_weight_lambda: default_lambda(),
    };
    scenario.validate().map_err(IngestError::Invalid)?;
    Ok(scenario)
}
