use crate::dispatch::surplus_threshold;
use crate::domain::{
    ArchetypeOutcome, DomainError, Intervention, ModelKind, Scenario, Solution, SolveDiagnostics,
    TractOutcome,
};
use crate::linmodel::{ModelMap, Owner, VarRole};

/// Per-archetype rooftop flows that replace the model's values, used when
/// realized energy comes from an exact re-dispatch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RealizedFlows {
    pub self_consumed_kwh: f64,
    pub stored_kwh: f64,
    pub storage_opportunity_kwh: f64,
}

fn clean(v: f64) -> f64 {
    if v.abs() < 1e-10 {
        0.0
    } else {
        v
    }
}

/// Reads a primal vector back into domain terms. Derived quantities (costs,
/// burdens, excess burden) are recomputed from the decisions so that the
/// reported identities hold exactly.
pub fn extract_solution(
    scenario: &Scenario,
    map: &ModelMap,
    x: &[f64],
    model: ModelKind,
    diagnostics: SolveDiagnostics,
    realized: &dyn Fn(&crate::domain::ArchetypeId, f64, f64) -> Option<RealizedFlows>,
) -> Result<Solution, DomainError> {
    let cat = &scenario.catalog;
    let tariff = &scenario.tariff;
    let a_w = cat.annual_unit_cost(Intervention::Weatherization)?;
    let a_rts = cat.annual_unit_cost(Intervention::RooftopSolar)?;
    let a_b = cat.annual_unit_cost(Intervention::Battery)?;
    let a_cs = cat.annual_unit_cost(Intervention::CommunitySolar)?;
    let a_cw = cat.annual_unit_cost(Intervention::CommunityWind)?;
    let threshold = tariff.burden_threshold;

    let mut tracts = Vec::with_capacity(scenario.tracts.len());
    for t in &scenario.tracts {
        let own = Owner::Tract(t.id.clone());
        let cs = clean(map.value(x, &own, VarRole::CommunitySolarKw)).clamp(0.0, t.community_solar_cap_kw);
        let cw = clean(map.value(x, &own, VarRole::CommunityWindKw)).clamp(0.0, t.community_wind_cap_kw);
        tracts.push(TractOutcome {
            id: t.id.clone(),
            community_solar_kw: cs,
            community_wind_kw: cw,
            community_solar_cost: a_cs * cs,
            community_wind_cost: a_cw * cw,
        });
    }

    let mut archetypes = Vec::with_capacity(scenario.archetypes.len());
    for a in &scenario.archetypes {
        let own = Owner::Archetype(a.id.clone());
        let tract = scenario.tract_of(a)?;
        let t_out = tracts
            .iter()
            .find(|t| t.id == a.tract_id)
            .ok_or_else(|| DomainError::UnknownTract(a.tract_id.to_string()))?;
        let zeta = tract.solar_annual_yield;
        let get = |role| clean(map.value(x, &own, role));

        let dw = get(VarRole::WeatherizationFraction).clamp(0.0, 1.0);
        let d = get(VarRole::RooftopKw).clamp(0.0, a.max_rooftop_kw);
        let has_battery = get(VarRole::HasBattery) > 0.5;
        let surplus_flag = get(VarRole::SurplusFlag) > 0.5;
        let battery = if has_battery { get(VarRole::BatteryKwh).max(0.0) } else { 0.0 };
        let gen = zeta * d;
        let (sc, st, stbar) = match realized(&a.id, d, battery) {
            Some(r) => (r.self_consumed_kwh, r.stored_kwh, r.storage_opportunity_kwh),
            None => (
                get(VarRole::SelfConsumed).clamp(0.0, gen),
                get(VarRole::Stored).max(0.0),
                get(VarRole::StorageOpportunity),
            ),
        };
        let st = st.min(gen - sc).max(0.0);
        let sg = (gen - sc - st).max(0.0);

        // Community shares follow the tract decision, split per household.
        let share = |p: Intervention, kw: f64, yield_: f64| {
            if !a.is_eligible(p) {
                return 0.0;
            }
            let households: f64 = scenario
                .archetypes_in(&a.tract_id)
                .filter(|b| b.is_eligible(p))
                .map(|b| b.count as f64)
                .sum();
            kw * yield_ / households
        };
        let gcs = share(Intervention::CommunitySolar, t_out.community_solar_kw, tract.solar_annual_yield);
        let gcw = share(Intervention::CommunityWind, t_out.community_wind_kw, tract.wind_annual_yield);

        let saving = dw * a.weatherization_savings_fraction;
        let pel = tariff.electricity_price;
        let (eld, ec) = if a.heating_fuel.is_electric() {
            let eld = a.baseline_electricity_expenditure / pel * (1.0 - saving);
            (eld, eld * pel + a.baseline_other_fuel_expenditure)
        } else {
            (
                a.baseline_electricity_expenditure / pel,
                a.baseline_electricity_expenditure
                    + a.baseline_heating_fuel_expenditure * (1.0 - saving)
                    + a.baseline_other_fuel_expenditure,
            )
        };
        let net = ec - (sc + st + gcs + gcw) * pel - sg * tariff.pv_remuneration;
        let eb = net / a.annual_income;
        let z1 = map
            .constant(&own, VarRole::SurplusThreshold)
            .or_else(|| {
                scenario
                    .profiles
                    .get(&a.id)
                    .map(|p| surplus_threshold(p).min(a.max_rooftop_kw))
            })
            .unwrap_or(0.0);

        archetypes.push(ArchetypeOutcome {
            id: a.id.clone(),
            tract_id: a.tract_id.clone(),
            count: a.count,
            z1_kw: z1,
            baseline_burden: a.baseline_burden(),
            weatherization_fraction: dw,
            rooftop_kw: d,
            has_battery,
            surplus_flag: surplus_flag || has_battery,
            battery_kwh: battery,
            self_consumed_kwh: sc,
            stored_kwh: st,
            grid_injected_kwh: sg,
            storage_opportunity_kwh: stbar,
            community_solar_share_kwh: gcs,
            community_wind_share_kwh: gcw,
            rooftop_generation_kwh: gen,
            total_generation_kwh: gen + gcs + gcw,
            electricity_demand_kwh: eld,
            energy_cost: ec,
            energy_burden: eb,
            over_burden: (eb - threshold).max(0.0),
            under_burden: (threshold - eb).max(0.0),
            weatherization_cost: a_w * dw,
            rooftop_cost: a_rts * d,
            battery_cost: a_b * battery,
        });
    }

    let inequity = archetypes.iter().map(|o| o.over_burden * o.count as f64).sum();
    let total_cost = archetypes.iter().map(|o| o.household_cost()).sum::<f64>()
        + tracts
            .iter()
            .map(|t| t.community_solar_cost + t.community_wind_cost)
            .sum::<f64>();
    Ok(Solution {
        model,
        archetypes,
        tracts,
        inequity_objective: inequity,
        total_annualized_cost: total_cost,
        objective_value: inequity + scenario.cost_weight_lambda * total_cost,
        diagnostics,
    })
}
