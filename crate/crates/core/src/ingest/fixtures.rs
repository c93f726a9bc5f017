//! Small hand-built scenarios with known behavior.

use std::collections::{BTreeMap, BTreeSet};

use crate::domain::{
    default_lambda, ArchetypeId, HeatingFuel, HourlyProfiles, HouseholdArchetype, Intervention,
    InterventionCatalog, Scenario, TariffScheme, Tract, TractId,
};

const DAYS: usize = 365;

fn repeat_day(day: &[f64; 24]) -> Vec<f64> {
    day.iter().copied().cycle().take(24 * DAYS).collect()
}

fn all_interventions() -> BTreeSet<Intervention> {
    Intervention::ALL.into_iter().collect()
}

#[allow(clippy::too_many_arguments)]
fn archetype(
    id: &str,
    tract: &TractId,
    count: u32,
    income: f64,
    profile: &HourlyProfiles,
    price: f64,
    e_hf: f64,
    e_of: f64,
    max_rooftop_kw: f64,
    eligibility: BTreeSet<Intervention>,
) -> HouseholdArchetype {
    HouseholdArchetype {
        id: ArchetypeId::new(id),
        tract_id: tract.clone(),
        count,
        annual_income: income,
        heating_fuel: HeatingFuel::Gas,
        baseline_electricity_expenditure: profile.annual_load() * price,
        baseline_heating_fuel_expenditure: e_hf,
        baseline_other_fuel_expenditure: e_of,
        weatherization_savings_fraction: 0.2,
        max_rooftop_kw,
        eligibility,
    }
}

/// One archetype whose daily profile is active in four hours only, chosen so
/// that self-consumption and storage opportunity are exactly affine above
/// Z¹ = 1 kW on `[0, 4]` kW. A regression of these curves is exact.
pub fn affine_fixture() -> Scenario {
    let mut load = [0.0; 24];
    let mut pv = [0.0; 24];
    load[7] = 1.0;
    load[11] = 0.5;
    pv[11] = 0.5;
    load[12] = 2.0;
    pv[12] = 0.25;
    load[19] = 3.0;
    let profile = HourlyProfiles::new(repeat_day(&load), repeat_day(&pv));
    let price = 0.2;
    let tract = Tract {
        id: TractId::new("t1"),
        solar_annual_yield: profile.annual_yield(),
        wind_annual_yield: 2500.0,
        community_solar_cap_kw: 0.0,
        community_wind_cap_kw: 0.0,
    };
    let eligibility = [Intervention::Weatherization, Intervention::RooftopSolar, Intervention::Battery]
        .into_iter()
        .collect();
    let a = archetype("a1", &tract.id, 3, 10_000.0, &profile, price, 600.0, 100.0, 4.0, eligibility);
    Scenario {
        profiles: BTreeMap::from([(a.id.clone(), profile)]),
        archetypes: vec![a],
        tracts: vec![tract],
        catalog: InterventionCatalog::reference(),
        tariff: TariffScheme::new(price, 0.6 * price),
        budget: None,
        cost_weight_lambda: default_lambda(),
    }
}

/// Three high-burden households with a large midday PV surplus and an
/// evening peak: batteries pay off whenever exports earn less than retail.
pub fn surplus_rich_fixture() -> Scenario {
    let mut pv = [0.0; 24];
    for (h, v) in pv.iter_mut().enumerate().take(18).skip(6) {
        *v = (std::f64::consts::PI * (h as f64 - 5.5) / 12.0).sin();
    }
    let sum: f64 = pv.iter().sum();
    pv.iter_mut().for_each(|v| *v *= 4.0 / sum);
    let price = 0.18;
    let tract = Tract {
        id: TractId::new("sunny"),
        solar_annual_yield: 4.0 * DAYS as f64,
        wind_annual_yield: 2800.0,
        community_solar_cap_kw: 5.0,
        community_wind_cap_kw: 0.0,
    };
    let mut archetypes = Vec::new();
    let mut profiles = BTreeMap::new();
    for (k, (evening, income, roof)) in [(2.5, 12_000.0, 5.0), (2.0, 14_000.0, 4.0), (3.0, 11_000.0, 6.0)]
        .into_iter()
        .enumerate()
    {
        let mut load = [0.5; 24];
        for v in &mut load[8..17] {
            *v = 0.2;
        }
        for v in &mut load[18..22] {
            *v = evening;
        }
        let profile = HourlyProfiles::new(repeat_day(&load), repeat_day(&pv));
        let a = archetype(
            &format!("h{}", k + 1),
            &tract.id,
            2 + k as u32,
            income,
            &profile,
            price,
            1500.0,
            300.0,
            roof,
            all_interventions(),
        );
        profiles.insert(a.id.clone(), profile);
        archetypes.push(a);
    }
    Scenario {
        archetypes,
        tracts: vec![tract],
        profiles,
        catalog: InterventionCatalog::reference(),
        tariff: TariffScheme::new(price, 0.6 * price),
        budget: None,
        cost_weight_lambda: default_lambda(),
    }
}
