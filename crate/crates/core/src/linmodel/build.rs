//! Assembly of the portfolio MILP.
//!
//! # Census
//!
//! For the fitted (linearized) representation, an archetype contributes
//! columns and rows according to its eligibility flags. Write `W` for
//! weatherization, `R` for rooftop PV with a positive roof limit, `B` for
//! battery (implies `R`), `CS`/`CW` for community solar/wind and `E` for an
//! electrically heated home that may weatherize. Each flag counts as 0 or 1.
//!
//! ```text
//! columns = 2W + 5R + 5B + CS + CW + E + 4
//! rows    = 1W + 8R + 12B + CS + CW + E + 3
//! ```
//!
//! The `R` block is (d, cost, sc, sg, z) with rows for cost, the rooftop
//! balance, two threshold rows and four self-consumption rows. The `B` block
//! is (cap, cost, δ, st, st̄) with rows for cost, three capacity rows, δ ≤ z,
//! four storage-opportunity rows and three realized-storage rows. The four
//! always-present columns are (ec, eb, Δeb⁺, Δeb⁻) with the cost, burden and
//! threshold-split rows.
//!
//! Each tract with at least one archetype eligible for community solar adds
//! two columns (d^cs, c^cs) and one row, likewise for wind. A budget adds one
//! row. One archetype with every intervention, non-electric heat, in its own
//! tract, with a budget: 22 columns, 29 rows, 2 binaries.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::map::{ModelMap, Owner, RowRole, VarRole};
use super::model::{MilpModel, Relation, VarKind};
use crate::dispatch::{surplus_threshold, SamplePoint, SelfConsumptionFit};
use crate::domain::{
    ArchetypeId, DomainError, HourlyProfiles, HouseholdArchetype, Intervention, Scenario,
    ValidationErrors,
};

#[derive(Debug, Error)]
pub enum BuildError {
    #[error("no self-consumption curve for rooftop-eligible archetype `{0}`")]
    MissingCurve(String),
    #[error("no hourly profiles for archetype `{0}`")]
    MissingProfiles(String),
    #[error("scenario is invalid: {0}")]
    Invalid(ValidationErrors),
    #[error(transparent)]
    Domain(#[from] DomainError),
}

/// Exact curve samples over `[0, RTS̄]`, sorted by `d_kw`, including Z¹
/// when the archetype has a surplus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledCurve {
    pub z1_kw: f64,
    pub has_surplus: bool,
    pub points: Vec<SamplePoint>,
}

/// How rooftop self-consumption and storage enter the model.
#[derive(Debug, Clone, Copy)]
pub enum RooftopCurve<'a> {
    /// Two-piece regression with big-M disjunctions.
    Fit(&'a SelfConsumptionFit),
    /// Convex combination of exact samples, split at Z¹ by `z`.
    Sampled(&'a SampledCurve),
    /// Hour-by-hour energy flows with state of charge.
    Hourly(&'a HourlyProfiles),
}

/// Closed-form size of the fitted model; see the module docs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Census {
    pub columns: usize,
    pub rows: usize,
    pub binaries: usize,
}

fn has_electric_demand_column(a: &HouseholdArchetype) -> bool {
    a.heating_fuel.is_electric() && a.is_eligible(Intervention::Weatherization)
}

/// Evaluates the census formula without building the model.
pub fn linearized_census(scenario: &Scenario) -> Census {
    let (mut columns, mut rows, mut binaries) = (0, 0, 0);
    for a in &scenario.archetypes {
        let w = a.is_eligible(Intervention::Weatherization) as usize;
        let r = a.rooftop_enabled() as usize;
        let b = a.battery_enabled() as usize;
        let cs = a.is_eligible(Intervention::CommunitySolar) as usize;
        let cw = a.is_eligible(Intervention::CommunityWind) as usize;
        let e = has_electric_demand_column(a) as usize;
        columns += 2 * w + 5 * r + 5 * b + cs + cw + e + 4;
        rows += w + 8 * r + 12 * b + cs + cw + e + 3;
        binaries += r + b;
    }
    for t in &scenario.tracts {
        for p in [Intervention::CommunitySolar, Intervention::CommunityWind] {
            if scenario.archetypes_in(&t.id).any(|a| a.is_eligible(p)) {
                columns += 2;
                rows += 1;
            }
        }
    }
    rows += scenario.budget.is_some() as usize;
    Census {
        columns,
        rows,
        binaries,
    }
}

/// Builds the linearized portfolio model from per-archetype fits.
pub fn build_linearized(
    scenario: &Scenario,
    fits: &BTreeMap<ArchetypeId, SelfConsumptionFit>,
) -> Result<(MilpModel, ModelMap), BuildError> {
    build_with(scenario, "linearized", |a| {
        fits.get(&a.id)
            .map(RooftopCurve::Fit)
            .ok_or_else(|| BuildError::MissingCurve(a.id.to_string()))
    })
}

/// Builds the model with rooftop flows tied to exact sampled curves.
pub fn build_sampled(
    scenario: &Scenario,
    curves: &BTreeMap<ArchetypeId, SampledCurve>,
) -> Result<(MilpModel, ModelMap), BuildError> {
    build_with(scenario, "time", |a| {
        curves
            .get(&a.id)
            .map(RooftopCurve::Sampled)
            .ok_or_else(|| BuildError::MissingCurve(a.id.to_string()))
    })
}

/// Builds the literal hour-by-hour model.
pub fn build_hourly(scenario: &Scenario) -> Result<(MilpModel, ModelMap), BuildError> {
    build_with(scenario, "hourly", |a| {
        scenario
            .profiles
            .get(&a.id)
            .map(RooftopCurve::Hourly)
            .ok_or_else(|| BuildError::MissingProfiles(a.id.to_string()))
    })
}

/// Generic builder: everything except the rooftop curve block is shared
/// across representations.
pub fn build_with<'a, F>(
    scenario: &'a Scenario,
    name: &str,
    mut curve_for: F,
) -> Result<(MilpModel, ModelMap), BuildError>
where
    F: FnMut(&'a HouseholdArchetype) -> Result<RooftopCurve<'a>, BuildError>,
{
    scenario.validate().map_err(BuildError::Invalid)?;
    let cat = &scenario.catalog;
    let unit = |p| cat.annual_unit_cost(p);
    let a_w = unit(Intervention::Weatherization)?;
    let a_rts = unit(Intervention::RooftopSolar)?;
    let a_batt = unit(Intervention::Battery)?;
    let a_cs = unit(Intervention::CommunitySolar)?;
    let a_cw = unit(Intervention::CommunityWind)?;

    let mut b = Builder {
        m: MilpModel::new(name),
        map: ModelMap::default(),
        cost_terms: Vec::new(),
    };

    for tract in &scenario.tracts {
        let t_owner = Owner::Tract(tract.id.clone());
        let members: Vec<&HouseholdArchetype> = scenario.archetypes_in(&tract.id).collect();
        let mut community = Vec::new();
        for (p, cap, yield_, unit_cost, roles) in [
            (
                Intervention::CommunitySolar,
                tract.community_solar_cap_kw,
                tract.solar_annual_yield,
                a_cs,
                ("cs", VarRole::CommunitySolarKw, VarRole::CommunitySolarCost, RowRole::CommunitySolarCost),
            ),
            (
                Intervention::CommunityWind,
                tract.community_wind_cap_kw,
                tract.wind_annual_yield,
                a_cw,
                ("cw", VarRole::CommunityWindKw, VarRole::CommunityWindCost, RowRole::CommunityWindCost),
            ),
        ] {
            let households: f64 = members
                .iter()
                .filter(|a| a.is_eligible(p))
                .map(|a| a.count as f64)
                .sum();
            if households == 0.0 {
                community.push(None);
                continue;
            }
            let (tag, kw_role, cost_role, row_role) = roles;
            let d = b.var(&t_owner, kw_role, format!("d_{tag}[{}]", tract.id), VarKind::Continuous, 0.0, cap);
            let c = b.var(
                &t_owner,
                cost_role,
                format!("c_{tag}[{}]", tract.id),
                VarKind::Continuous,
                0.0,
                f64::INFINITY,
            );
            b.row(
                &t_owner,
                row_role,
                format!("cost_{tag}[{}]", tract.id),
                [(c, 1.0), (d, -unit_cost)],
                Relation::Eq,
                0.0,
            );
            b.cost_terms.push((c, 1.0));
            community.push(Some((d, yield_ / households)));
        }

        for a in members {
            let curve = if a.rooftop_enabled() {
                Some(curve_for(a)?)
            } else {
                None
            };
            b.archetype(scenario, a, tract.solar_annual_yield, curve, &community, [a_w, a_rts, a_batt]);
        }
    }

    if let Some(budget) = scenario.budget {
        let terms = b.cost_terms.clone();
        b.row(&Owner::Global, RowRole::Budget, "budget", terms, Relation::Le, budget);
    }

    let lambda = scenario.cost_weight_lambda;
    let mut obj: Vec<(usize, f64)> = Vec::new();
    for a in &scenario.archetypes {
        if let Some(j) = b.map.archetype_col(&a.id, VarRole::OverBurden) {
            obj.push((j, a.count as f64));
        }
    }
    if lambda != 0.0 {
        obj.extend(b.cost_terms.iter().map(|&(j, w)| (j, lambda * w)));
    }
    b.m.set_objective(obj, 0.0);
    Ok((b.m, b.map))
}

struct Builder {
    m: MilpModel,
    map: ModelMap,
    /// Columns of the total annualized spend with their multiplicities.
    cost_terms: Vec<(usize, f64)>,
}

impl Builder {
    fn var(
        &mut self,
        owner: &Owner,
        role: VarRole,
        name: String,
        kind: VarKind,
        lo: f64,
        hi: f64,
    ) -> usize {
        let j = self.m.add_var(name, kind, lo, hi);
        self.map.insert_column(owner.clone(), role, j);
        j
    }

    fn row(
        &mut self,
        owner: &Owner,
        role: RowRole,
        name: impl Into<String>,
        coeffs: impl IntoIterator<Item = (usize, f64)>,
        rel: Relation,
        rhs: f64,
    ) -> usize {
        let i = self.m.add_row(name, coeffs, rel, rhs);
        self.map.insert_row(owner.clone(), role, i);
        i
    }

    fn archetype(
        &mut self,
        scenario: &Scenario,
        a: &HouseholdArchetype,
        zeta: f64,
        curve: Option<RooftopCurve<'_>>,
        community: &[Option<(usize, f64)>],
        [a_w, a_rts, a_batt]: [f64; 3],
    ) {
        let own = Owner::Archetype(a.id.clone());
        let id = &a.id;
        let nb = a.count as f64;
        let tariff = &scenario.tariff;
        let (pel, pvrem, income) = (tariff.electricity_price, tariff.pv_remuneration, a.annual_income);
        let c = VarKind::Continuous;
        let inf = f64::INFINITY;

        let dw = a.is_eligible(Intervention::Weatherization).then(|| {
            let dw = self.var(&own, VarRole::WeatherizationFraction, format!("d_w[{id}]"), c, 0.0, 1.0);
            let cw = self.var(&own, VarRole::WeatherizationCost, format!("c_w[{id}]"), c, 0.0, inf);
            self.row(&own, RowRole::WeatherizationCost, format!("cost_w[{id}]"), [(cw, 1.0), (dw, -a_w)], Relation::Eq, 0.0);
            self.cost_terms.push((cw, nb));
            dw
        });

        // Energy credited at the retail price and at the export price.
        let mut retail: Vec<usize> = Vec::new();
        let mut export: Vec<usize> = Vec::new();

        if let Some(curve) = curve {
            let rts = a.max_rooftop_kw;
            let d = self.var(&own, VarRole::RooftopKw, format!("d_rts[{id}]"), c, 0.0, rts);
            let crts = self.var(&own, VarRole::RooftopCost, format!("c_rts[{id}]"), c, 0.0, inf);
            self.row(&own, RowRole::RooftopCost, format!("cost_rts[{id}]"), [(crts, 1.0), (d, -a_rts)], Relation::Eq, 0.0);
            self.cost_terms.push((crts, nb));
            let sc = self.var(&own, VarRole::SelfConsumed, format!("sc[{id}]"), c, 0.0, inf);
            let sg = self.var(&own, VarRole::GridInjected, format!("sg[{id}]"), c, 0.0, inf);
            retail.push(sc);
            export.push(sg);

            let battery = a.battery_enabled().then(|| {
                let beta = scenario.catalog.battery_ratio_kwh_per_kw;
                let cap = self.var(&own, VarRole::BatteryKwh, format!("cap_b[{id}]"), c, 0.0, inf);
                let cb = self.var(&own, VarRole::BatteryCost, format!("c_b[{id}]"), c, 0.0, inf);
                let delta_hi = match curve {
                    RooftopCurve::Fit(f) => f.has_surplus as u8 as f64,
                    RooftopCurve::Sampled(s) => s.has_surplus as u8 as f64,
                    RooftopCurve::Hourly(_) => 1.0,
                };
                let delta = self.var(&own, VarRole::HasBattery, format!("delta[{id}]"), VarKind::Binary, 0.0, delta_hi);
                let st = self.var(&own, VarRole::Stored, format!("st[{id}]"), c, 0.0, inf);
                self.row(&own, RowRole::BatteryCost, format!("cost_b[{id}]"), [(cb, 1.0), (cap, -a_batt)], Relation::Eq, 0.0);
                self.cost_terms.push((cb, nb));
                let big = rts * beta;
                self.row(&own, RowRole::BatteryCapacity, format!("cap_le[{id}]"), [(cap, 1.0), (d, -beta)], Relation::Le, 0.0);
                self.row(
                    &own,
                    RowRole::BatteryCapacity,
                    format!("cap_ge[{id}]"),
                    [(cap, 1.0), (d, -beta), (delta, -big)],
                    Relation::Ge,
                    -big,
                );
                self.row(&own, RowRole::BatteryCapacity, format!("cap_sw[{id}]"), [(cap, 1.0), (delta, -big)], Relation::Le, 0.0);
                retail.push(st);
                (cap, delta, st)
            });

            self.row(
                &own,
                RowRole::RooftopBalance,
                format!("rts_bal[{id}]"),
                [(sc, 1.0), (sg, 1.0), (d, -zeta)]
                    .into_iter()
                    .chain(battery.map(|(_, _, st)| (st, 1.0))),
                Relation::Eq,
                0.0,
            );

            match curve {
                RooftopCurve::Fit(f) => self.fit_block(&own, a, zeta, f, d, sc, battery),
                RooftopCurve::Sampled(s) => self.sampled_block(&own, a, zeta, s, d, sc, battery),
                RooftopCurve::Hourly(p) => self.hourly_block(&own, a, scenario, p, d, sc, battery),
            }
        }

        for (k, (p, role, row_role, tag)) in [
            (Intervention::CommunitySolar, VarRole::CommunitySolarShare, RowRole::CommunitySolarShare, "cs"),
            (Intervention::CommunityWind, VarRole::CommunityWindShare, RowRole::CommunityWindShare, "cw"),
        ]
        .into_iter()
        .enumerate()
        {
            if let (true, Some((dc, per_household))) = (a.is_eligible(p), community[k]) {
                let g = self.var(&own, role, format!("g_{tag}[{id}]"), c, 0.0, inf);
                self.row(&own, row_role, format!("share_{tag}[{id}]"), [(g, 1.0), (dc, -per_household)], Relation::Eq, 0.0);
                retail.push(g);
            }
        }

        let e_el = a.baseline_electricity_expenditure;
        let e_hf = a.baseline_heating_fuel_expenditure;
        let e_of = a.baseline_other_fuel_expenditure;
        let ws = a.weatherization_savings_fraction;
        let ec = self.var(&own, VarRole::EnergyCost, format!("ec[{id}]"), c, 0.0, inf);
        if let (true, Some(dw)) = (a.heating_fuel.is_electric(), dw) {
            let eld = self.var(&own, VarRole::ElectricityDemand, format!("eld[{id}]"), c, 0.0, inf);
            self.row(
                &own,
                RowRole::ElectricityDemand,
                format!("eld[{id}]"),
                [(eld, 1.0), (dw, e_el / pel * ws)],
                Relation::Eq,
                e_el / pel,
            );
            self.row(&own, RowRole::EnergyCost, format!("ec[{id}]"), [(ec, 1.0), (eld, -pel)], Relation::Eq, e_of);
        } else {
            self.map.insert_constant(own.clone(), VarRole::ElectricityDemand, e_el / pel);
            let mut terms = vec![(ec, 1.0)];
            if let (Some(dw), false) = (dw, a.heating_fuel.is_electric()) {
                terms.push((dw, e_hf * ws));
            }
            self.row(&own, RowRole::EnergyCost, format!("ec[{id}]"), terms, Relation::Eq, e_el + e_hf + e_of);
        }

        let threshold = scenario.tariff.burden_threshold;
        let eb = self.var(&own, VarRole::Burden, format!("eb[{id}]"), c, 0.0, inf);
        let over = self.var(&own, VarRole::OverBurden, format!("eb_over[{id}]"), c, 0.0, inf);
        let under = self.var(&own, VarRole::UnderBurden, format!("eb_under[{id}]"), c, 0.0, threshold);
        let burden: Vec<(usize, f64)> = [(ec, 1.0 / income), (eb, -1.0)]
            .into_iter()
            .chain(retail.iter().map(|&j| (j, -pel / income)))
            .chain(export.iter().map(|&j| (j, -pvrem / income)))
            .collect();
        self.row(&own, RowRole::Burden, format!("burden[{id}]"), burden, Relation::Eq, 0.0);
        self.row(
            &own,
            RowRole::BurdenSplit,
            format!("split[{id}]"),
            [(eb, 1.0), (over, -1.0), (under, 1.0)],
            Relation::Eq,
            threshold,
        );
    }

    /// Threshold rows tying `z` to d ≥ Z¹.
    fn threshold_rows(&mut self, own: &Owner, id: &ArchetypeId, rts: f64, z1: f64, d: usize, z: usize) {
        self.map.insert_constant(own.clone(), VarRole::SurplusThreshold, z1);
        self.row(own, RowRole::SurplusSwitch, format!("z_ge[{id}]"), [(d, 1.0), (z, -rts)], Relation::Ge, z1 - rts);
        self.row(own, RowRole::SurplusSwitch, format!("z_le[{id}]"), [(d, 1.0), (z, -rts)], Relation::Le, z1);
    }

    /// Realized storage: δ ≤ z, st ≥ st̄ − M(1−δ), st ≤ Mδ, st ≤ st̄.
    fn storage_rows(&mut self, own: &Owner, id: &ArchetypeId, m: f64, z: usize, stbar: usize, delta: usize, st: usize) {
        self.row(own, RowRole::BatteryNeedsSurplus, format!("dz[{id}]"), [(delta, 1.0), (z, -1.0)], Relation::Le, 0.0);
        self.row(
            own,
            RowRole::StoredEnergy,
            format!("st_lo[{id}]"),
            [(st, 1.0), (stbar, -1.0), (delta, -m)],
            Relation::Ge,
            -m,
        );
        self.row(own, RowRole::StoredEnergy, format!("st_sw[{id}]"), [(st, 1.0), (delta, -m)], Relation::Le, 0.0);
        self.row(own, RowRole::StoredEnergy, format!("st_op[{id}]"), [(st, 1.0), (stbar, -1.0)], Relation::Le, 0.0);
    }

    #[allow(clippy::too_many_arguments)]
    fn fit_block(
        &mut self,
        own: &Owner,
        a: &HouseholdArchetype,
        zeta: f64,
        f: &SelfConsumptionFit,
        d: usize,
        sc: usize,
        battery: Option<(usize, usize, usize)>,
    ) {
        let id = &a.id;
        let rts = a.max_rooftop_kw;
        let z1 = f.z1_kw.clamp(0.0, rts);
        // One constant per archetype, large enough that every relaxed row
        // admits the points of the active branch.
        let mut m = f.big_m_kwh;
        for x in [0.0, z1, rts] {
            m = m.max((f.sc_line(x) - zeta * x).abs()).max(f.st_line(x).abs());
        }
        self.map.insert_constant(own.clone(), VarRole::BigM, m);

        let z = self.var(own, VarRole::SurplusFlag, format!("z[{id}]"), VarKind::Binary, 0.0, f.has_surplus as u8 as f64);
        self.threshold_rows(own, id, rts, z1, d, z);
        let (s, y) = (f.sc_slope, f.sc_intercept);
        self.row(
            own,
            RowRole::SelfConsumptionFit,
            format!("scf_lo[{id}]"),
            [(sc, 1.0), (d, -s), (z, -m)],
            Relation::Ge,
            y - m,
        );
        self.row(
            own,
            RowRole::SelfConsumptionFit,
            format!("scf_hi[{id}]"),
            [(sc, 1.0), (d, -s), (z, m)],
            Relation::Le,
            y + m,
        );
        self.row(
            own,
            RowRole::SelfConsumptionLinear,
            format!("scl_lo[{id}]"),
            [(sc, 1.0), (d, -zeta), (z, m)],
            Relation::Ge,
            0.0,
        );
        self.row(
            own,
            RowRole::SelfConsumptionLinear,
            format!("scl_hi[{id}]"),
            [(sc, 1.0), (d, -zeta), (z, -m)],
            Relation::Le,
            0.0,
        );

        if let Some((_, delta, st)) = battery {
            let stbar = self.var(
                own,
                VarRole::StorageOpportunity,
                format!("stbar[{id}]"),
                VarKind::Continuous,
                f64::NEG_INFINITY,
                f64::INFINITY,
            );
            let (s, y) = (f.st_slope, f.st_intercept);
            self.row(
                own,
                RowRole::StorageOpportunityFit,
                format!("stf_lo[{id}]"),
                [(stbar, 1.0), (d, -s), (z, -m)],
                Relation::Ge,
                y - m,
            );
            self.row(
                own,
                RowRole::StorageOpportunityFit,
                format!("stf_hi[{id}]"),
                [(stbar, 1.0), (d, -s), (z, m)],
                Relation::Le,
                y + m,
            );
            self.row(own, RowRole::StorageOpportunityOff, format!("sto_lo[{id}]"), [(stbar, 1.0), (z, m)], Relation::Ge, 0.0);
            self.row(own, RowRole::StorageOpportunityOff, format!("sto_hi[{id}]"), [(stbar, 1.0), (z, -m)], Relation::Le, 0.0);
            self.storage_rows(own, id, m, z, stbar, delta, st);
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn sampled_block(
        &mut self,
        own: &Owner,
        a: &HouseholdArchetype,
        zeta: f64,
        s: &SampledCurve,
        d: usize,
        sc: usize,
        battery: Option<(usize, usize, usize)>,
    ) {
        let id = &a.id;
        let rts = a.max_rooftop_kw;
        let z1 = s.z1_kw.clamp(0.0, rts);
        let m = s.points.iter().map(|p| p.st_bar_kwh.abs()).fold(rts * zeta, f64::max);
        self.map.insert_constant(own.clone(), VarRole::BigM, m);

        let z = self.var(own, VarRole::SurplusFlag, format!("z[{id}]"), VarKind::Binary, 0.0, s.has_surplus as u8 as f64);
        self.threshold_rows(own, id, rts, z1, d, z);

        let weights: Vec<usize> = (0..s.points.len())
            .map(|i| {
                self.var(own, VarRole::GridWeight(i as u32), format!("w{i}[{id}]"), VarKind::Continuous, 0.0, f64::INFINITY)
            })
            .collect();
        self.row(own, RowRole::CurveConvexity, format!("cvx[{id}]"), weights.iter().map(|&w| (w, 1.0)), Relation::Eq, 1.0);
        // Points strictly below Z¹ serve only z = 0, points strictly above only z = 1.
        let below: Vec<(usize, f64)> =
            weights.iter().zip(&s.points).filter(|(_, p)| p.d_kw < z1).map(|(&w, _)| (w, 1.0)).collect();
        let above: Vec<(usize, f64)> =
            weights.iter().zip(&s.points).filter(|(_, p)| p.d_kw > z1).map(|(&w, _)| (w, 1.0)).collect();
        self.row(
            own,
            RowRole::CurveConvexity,
            format!("cvx_lo[{id}]"),
            below.into_iter().chain([(z, 1.0)]),
            Relation::Le,
            1.0,
        );
        self.row(
            own,
            RowRole::CurveConvexity,
            format!("cvx_hi[{id}]"),
            above.into_iter().chain([(z, -1.0)]),
            Relation::Le,
            0.0,
        );
        let interp = |target: usize, value: fn(&SamplePoint) -> f64| -> Vec<(usize, f64)> {
            std::iter::once((target, 1.0))
                .chain(weights.iter().zip(&s.points).map(|(&w, p)| (w, -value(p))))
                .collect()
        };
        self.row(own, RowRole::CurveInterpolation, format!("itp_d[{id}]"), interp(d, |p| p.d_kw), Relation::Eq, 0.0);
        self.row(own, RowRole::CurveInterpolation, format!("itp_sc[{id}]"), interp(sc, |p| p.sc_kwh), Relation::Eq, 0.0);

        if let Some((_, delta, st)) = battery {
            let stbar = self.var(
                own,
                VarRole::StorageOpportunity,
                format!("stbar[{id}]"),
                VarKind::Continuous,
                f64::NEG_INFINITY,
                f64::INFINITY,
            );
            self.row(
                own,
                RowRole::CurveInterpolation,
                format!("itp_st[{id}]"),
                interp(stbar, |p| p.st_bar_kwh),
                Relation::Eq,
                0.0,
            );
            self.storage_rows(own, id, m, z, stbar, delta, st);
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn hourly_block(
        &mut self,
        own: &Owner,
        a: &HouseholdArchetype,
        scenario: &Scenario,
        p: &HourlyProfiles,
        d: usize,
        sc: usize,
        battery: Option<(usize, usize, usize)>,
    ) {
        let id = &a.id;
        let c = VarKind::Continuous;
        let inf = f64::INFINITY;
        self.map
            .insert_constant(own.clone(), VarRole::SurplusThreshold, surplus_threshold(p).min(a.max_rooftop_kw));
        let dur = scenario.catalog.battery_duration_hours;
        let mut sc_terms = vec![(sc, 1.0)];
        let mut st_terms = Vec::new();
        let mut prev_soc: Option<usize> = None;
        for (t, (&load, &pv)) in p.load_kwh.iter().zip(&p.pv_unit_kwh_per_kw).enumerate() {
            let h = t as u32;
            let sct = self.var(own, VarRole::HourSelfConsumed(h), format!("sc{t}[{id}]"), c, 0.0, inf);
            let sgt = self.var(own, VarRole::HourGridInjected(h), format!("sg{t}[{id}]"), c, 0.0, inf);
            sc_terms.push((sct, -1.0));
            let mut bal = vec![(sct, 1.0), (sgt, 1.0), (d, -pv)];
            let mut load_row = vec![(sct, 1.0)];
            if let Some((cap, _, _)) = battery {
                let pc = self.var(own, VarRole::HourCharge(h), format!("pc{t}[{id}]"), c, 0.0, inf);
                let pd = self.var(own, VarRole::HourDischarge(h), format!("pd{t}[{id}]"), c, 0.0, inf);
                let soc = self.var(own, VarRole::HourSoc(h), format!("soc{t}[{id}]"), c, 0.0, inf);
                bal.push((pc, 1.0));
                load_row.push((pd, 1.0));
                st_terms.push((pd, -1.0));
                // The battery starts every day empty.
                let mut rec = vec![(soc, 1.0), (pc, -1.0), (pd, 1.0)];
                if t % crate::dispatch::HOURS_PER_DAY != 0 {
                    if let Some(ps) = prev_soc {
                        rec.push((ps, -1.0));
                    }
                }
                self.row(own, RowRole::HourlySoc, format!("soc{t}[{id}]"), rec, Relation::Eq, 0.0);
                self.row(own, RowRole::HourlyLimits, format!("socmax{t}[{id}]"), [(soc, 1.0), (cap, -1.0)], Relation::Le, 0.0);
                self.row(own, RowRole::HourlyLimits, format!("pcmax{t}[{id}]"), [(pc, dur), (cap, -1.0)], Relation::Le, 0.0);
                self.row(own, RowRole::HourlyLimits, format!("pdmax{t}[{id}]"), [(pd, dur), (cap, -1.0)], Relation::Le, 0.0);
                prev_soc = Some(soc);
            }
            self.row(own, RowRole::HourlyBalance, format!("bal{t}[{id}]"), bal, Relation::Eq, 0.0);
            self.row(own, RowRole::HourlyLoad, format!("load{t}[{id}]"), load_row, Relation::Le, load);
        }
        self.row(own, RowRole::HourlyAggregate, format!("agg_sc[{id}]"), sc_terms, Relation::Eq, 0.0);
        if let Some((_, _, st)) = battery {
            st_terms.push((st, 1.0));
            self.row(own, RowRole::HourlyAggregate, format!("agg_st[{id}]"), st_terms, Relation::Eq, 0.0);
        }
    }
}
