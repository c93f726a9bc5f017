use serde::{Deserialize, Serialize};

use super::{ArchetypeId, Scenario, TractId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Linearized,
    Time,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Linearized => "linearized",
            ModelKind::Time => "time",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    /// Stopped at the node limit with a feasible incumbent.
    Feasible,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveDiagnostics {
    pub status: SolveStatus,
    pub method: String,
    pub best_bound: f64,
    pub gap: f64,
    pub nodes: u64,
    pub lp_solves: u64,
    /// Not serialized, so identical runs produce identical payloads.
    #[serde(skip, default)]
    pub wall_time_secs: f64,
}

/// Per-archetype decisions and outcomes. Energy in kWh/yr, money in $/yr,
/// capacities per household.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchetypeOutcome {
    pub id: ArchetypeId,
    pub tract_id: TractId,
    pub count: u32,
    pub z1_kw: f64,
    pub baseline_burden: f64,
    pub weatherization_fraction: f64,
    pub rooftop_kw: f64,
    pub has_battery: bool,
    pub surplus_flag: bool,
    pub battery_kwh: f64,
    pub self_consumed_kwh: f64,
    pub stored_kwh: f64,
    pub grid_injected_kwh: f64,
    pub storage_opportunity_kwh: f64,
    pub community_solar_share_kwh: f64,
    pub community_wind_share_kwh: f64,
    pub rooftop_generation_kwh: f64,
    pub total_generation_kwh: f64,
    pub electricity_demand_kwh: f64,
    pub energy_cost: f64,
    pub energy_burden: f64,
    pub over_burden: f64,
    pub under_burden: f64,
    pub weatherization_cost: f64,
    pub rooftop_cost: f64,
    pub battery_cost: f64,
}

impl ArchetypeOutcome {
    /// Annualized household-level spend for the whole archetype.
    pub fn household_cost(&self) -> f64 {
        (self.weatherization_cost + self.rooftop_cost + self.battery_cost) * self.count as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TractOutcome {
    pub id: TractId,
    pub community_solar_kw: f64,
    pub community_wind_kw: f64,
    pub community_solar_cost: f64,
    pub community_wind_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub model: ModelKind,
    pub archetypes: Vec<ArchetypeOutcome>,
    pub tracts: Vec<TractOutcome>,
    /// Σ Δeb⁺·Nb.
    pub inequity_objective: f64,
    pub total_annualized_cost: f64,
    /// Objective including the secondary cost term.
    pub objective_value: f64,
    pub diagnostics: SolveDiagnostics,
}

impl Solution {
    pub fn total_battery_kwh(&self) -> f64 {
        self.archetypes.iter().map(|a| a.battery_kwh * a.count as f64).sum()
    }

    pub fn total_rooftop_kw(&self) -> f64 {
        self.archetypes.iter().map(|a| a.rooftop_kw * a.count as f64).sum()
    }

    pub fn weatherized_buildings(&self) -> f64 {
        self.archetypes
            .iter()
            .map(|a| a.weatherization_fraction * a.count as f64)
            .sum()
    }

    pub fn total_community_solar_kw(&self) -> f64 {
        self.tracts.iter().map(|t| t.community_solar_kw).sum()
    }

    pub fn total_community_wind_kw(&self) -> f64 {
        self.tracts.iter().map(|t| t.community_wind_kw).sum()
    }

    fn households(&self) -> f64 {
        self.archetypes.iter().map(|a| a.count as f64).sum()
    }

    /// Household-weighted mean burden after interventions.
    pub fn mean_burden(&self) -> f64 {
        let n = self.households();
        if n == 0.0 {
            return 0.0;
        }
        self.archetypes
            .iter()
            .map(|a| a.energy_burden * a.count as f64)
            .sum::<f64>()
            / n
    }

    /// Household-weighted mean excess burden.
    pub fn mean_over_burden(&self) -> f64 {
        let n = self.households();
        if n == 0.0 {
            return 0.0;
        }
        self.inequity_objective / n
    }

    pub fn archetype(&self, id: &ArchetypeId) -> Option<&ArchetypeOutcome> {
        self.archetypes.iter().find(|a| &a.id == id)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ValidationTolerances {
    /// Relative tolerance on sc + st + sg = g^rts and the burden identity.
    pub balance_rtol: f64,
    /// Relative tolerance on the budget row.
    pub budget_rtol: f64,
    /// Absolute tolerance on Δeb⁺ = max(0, eb − Ēb).
    pub over_burden_atol: f64,
    /// Absolute slack on caps and bounds.
    pub bound_atol: f64,
}

impl Default for ValidationTolerances {
    fn default() -> Self {
        Self {
            balance_rtol: 1e-6,
            budget_rtol: 1e-6,
            over_burden_atol: 1e-9,
            bound_atol: 1e-7,
        }
    }
}

fn rel_ok(lhs: f64, rhs: f64, rtol: f64) -> bool {
    (lhs - rhs).abs() <= rtol * lhs.abs().max(rhs.abs()).max(1.0)
}

/// Checks the structural invariants every emitted solution must satisfy.
/// Returns the list of violated checks.
pub fn validate_solution(
    scenario: &Scenario,
    solution: &Solution,
    tol: ValidationTolerances,
) -> Result<(), Vec<String>> {
    let mut bad = Vec::new();
    let tariff = &scenario.tariff;
    let beta = scenario.catalog.battery_ratio_kwh_per_kw;

    for o in &solution.archetypes {
        let Some(a) = scenario.archetype(&o.id) else {
            bad.push(format!("{}: archetype not in scenario", o.id));
            continue;
        };
        if o.has_battery && !o.surplus_flag {
            bad.push(format!("{}: battery deployed without surplus flag", o.id));
        }
        let parts = o.self_consumed_kwh + o.stored_kwh + o.grid_injected_kwh;
        if !rel_ok(parts, o.rooftop_generation_kwh, tol.balance_rtol) {
            bad.push(format!(
                "{}: sc+st+sg = {parts} differs from rooftop generation {}",
                o.id, o.rooftop_generation_kwh
            ));
        }
        let at = tol.bound_atol;
        if o.rooftop_kw > a.max_rooftop_kw + at || o.rooftop_kw < -at {
            bad.push(format!("{}: rooftop {} kW outside [0, {}]", o.id, o.rooftop_kw, a.max_rooftop_kw));
        }
        if o.weatherization_fraction < -at || o.weatherization_fraction > 1.0 + at {
            bad.push(format!("{}: weatherization fraction {} outside [0,1]", o.id, o.weatherization_fraction));
        }
        if o.battery_kwh < -at || o.battery_kwh > beta * o.rooftop_kw + at * beta.max(1.0) {
            bad.push(format!("{}: battery {} kWh exceeds beta * rooftop", o.id, o.battery_kwh));
        }
        if !o.has_battery && o.battery_kwh > at {
            bad.push(format!("{}: battery capacity without deployment decision", o.id));
        }
        for (name, v) in [
            ("self_consumed", o.self_consumed_kwh),
            ("stored", o.stored_kwh),
            ("grid_injected", o.grid_injected_kwh),
            ("over_burden", o.over_burden),
            ("under_burden", o.under_burden),
        ] {
            if v < -at * o.rooftop_generation_kwh.max(1.0) {
                bad.push(format!("{}: {name} negative ({v})", o.id));
            }
        }
        let net = o.energy_cost
            - (o.self_consumed_kwh
                + o.stored_kwh
                + o.community_solar_share_kwh
                + o.community_wind_share_kwh)
                * tariff.electricity_price
            - o.grid_injected_kwh * tariff.pv_remuneration;
        if !rel_ok(o.energy_burden * a.annual_income, net, tol.balance_rtol) {
            bad.push(format!(
                "{}: burden {} inconsistent with net expenditure {net}",
                o.id, o.energy_burden
            ));
        }
        let expect = (o.energy_burden - tariff.burden_threshold).max(0.0);
        if (o.over_burden - expect).abs() > tol.over_burden_atol {
            bad.push(format!(
                "{}: over-burden {} != max(0, eb - threshold) = {expect}",
                o.id, o.over_burden
            ));
        }
    }

    for t in &solution.tracts {
        let Some(tr) = scenario.tract(&t.id) else {
            bad.push(format!("{}: tract not in scenario", t.id));
            continue;
        };
        let at = tol.bound_atol;
        if t.community_solar_kw > tr.community_solar_cap_kw + at || t.community_solar_kw < -at {
            bad.push(format!("{}: community solar {} kW exceeds cap", t.id, t.community_solar_kw));
        }
        if t.community_wind_kw > tr.community_wind_cap_kw + at || t.community_wind_kw < -at {
            bad.push(format!("{}: community wind {} kW exceeds cap", t.id, t.community_wind_kw));
        }
    }

    let spend: f64 = solution.archetypes.iter().map(|o| o.household_cost()).sum::<f64>()
        + solution
            .tracts
            .iter()
            .map(|t| t.community_solar_cost + t.community_wind_cost)
            .sum::<f64>();
    if !rel_ok(spend, solution.total_annualized_cost, tol.budget_rtol) {
        bad.push(format!(
            "total cost {} differs from itemized spend {spend}",
            solution.total_annualized_cost
        ));
    }
    if let Some(b) = scenario.budget {
        if spend > b + tol.budget_rtol * b.max(1.0) {
            bad.push(format!("spend {spend} exceeds budget {b}"));
        }
    }
    let inequity: f64 = solution
        .archetypes
        .iter()
        .map(|o| o.over_burden * o.count as f64)
        .sum();
    if !rel_ok(inequity, solution.inequity_objective, tol.balance_rtol) {
        bad.push(format!(
            "inequity {} differs from Σ Δeb⁺·Nb = {inequity}",
            solution.inequity_objective
        ));
    }

    if bad.is_empty() {
        Ok(())
    } else {
        Err(bad)
    }
}
