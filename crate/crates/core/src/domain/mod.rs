//! Core data model: household archetypes, tracts, costs, tariffs and the
//! annualization arithmetic shared by every other module.

mod solution;

pub use solution::{
    validate_solution, ArchetypeOutcome, ModelKind, Solution, SolveDiagnostics, SolveStatus,
    TractOutcome, ValidationTolerances,
};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DomainError {
    #[error("discount rate must be positive, got {0}")]
    NonPositiveRate(f64),
    #[error("lifetime must be at least one year, got {0}")]
    ZeroLifetime(u32),
    #[error("quantity must be non-negative, got {0}")]
    NegativeQuantity(f64),
    #[error("unknown archetype `{0}`")]
    UnknownArchetype(String),
    #[error("unknown tract `{0}`")]
    UnknownTract(String),
    #[error("scenario failed validation: {0}")]
    Invalid(ValidationErrors),
}

macro_rules! string_id {
    ($(#[$m:meta])* $name:ident) => {
        $(#[$m])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl $name {
            pub fn new(s: impl Into<String>) -> Self {
                Self(s.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_owned())
            }
        }
    };
}

string_id!(
    /// Opaque identifier of a household archetype.
    ArchetypeId
);
string_id!(
    /// Opaque identifier of a census tract.
    TractId
);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HeatingFuel {
    Electric,
    Gas,
    Oil,
    Propane,
    OtherNonelectric,
}

impl HeatingFuel {
    pub fn is_electric(self) -> bool {
        matches!(self, HeatingFuel::Electric)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            HeatingFuel::Electric => "electric",
            HeatingFuel::Gas => "gas",
            HeatingFuel::Oil => "oil",
            HeatingFuel::Propane => "propane",
            HeatingFuel::OtherNonelectric => "other-nonelectric",
        }
    }
}

impl std::str::FromStr for HeatingFuel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "electric" => Ok(HeatingFuel::Electric),
            "gas" => Ok(HeatingFuel::Gas),
            "oil" => Ok(HeatingFuel::Oil),
            "propane" => Ok(HeatingFuel::Propane),
            "other-nonelectric" => Ok(HeatingFuel::OtherNonelectric),
            other => Err(format!("unknown heating fuel `{other}`")),
        }
    }
}

/// Policy interventions available to the planner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Intervention {
    Weatherization,
    RooftopSolar,
    CommunitySolar,
    CommunityWind,
    Battery,
}

impl Intervention {
    pub const ALL: [Intervention; 5] = [
        Intervention::Weatherization,
        Intervention::RooftopSolar,
        Intervention::CommunitySolar,
        Intervention::CommunityWind,
        Intervention::Battery,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Intervention::Weatherization => "weatherization",
            Intervention::RooftopSolar => "rooftop_solar",
            Intervention::CommunitySolar => "community_solar",
            Intervention::CommunityWind => "community_wind",
            Intervention::Battery => "battery",
        }
    }
}

impl std::str::FromStr for Intervention {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Intervention::ALL
            .into_iter()
            .find(|i| i.tag() == s.trim())
            .ok_or_else(|| format!("unknown intervention tag `{}`", s.trim()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HouseholdArchetype {
    pub id: ArchetypeId,
    pub tract_id: TractId,
    /// Number of households represented.
    pub count: u32,
    pub annual_income: f64,
    pub heating_fuel: HeatingFuel,
    pub baseline_electricity_expenditure: f64,
    /// Zero for electrically heated homes; their heating is inside the
    /// electricity expenditure.
    pub baseline_heating_fuel_expenditure: f64,
    pub baseline_other_fuel_expenditure: f64,
    pub weatherization_savings_fraction: f64,
    pub max_rooftop_kw: f64,
    pub eligibility: BTreeSet<Intervention>,
}

impl HouseholdArchetype {
    pub fn is_eligible(&self, p: Intervention) -> bool {
        self.eligibility.contains(&p)
    }

    pub fn total_baseline_expenditure(&self) -> f64 {
        self.baseline_electricity_expenditure
            + self.baseline_heating_fuel_expenditure
            + self.baseline_other_fuel_expenditure
    }

    /// Energy burden with no intervention deployed.
    pub fn baseline_burden(&self) -> f64 {
        self.total_baseline_expenditure() / self.annual_income
    }

    /// Rooftop PV can actually be sized for this archetype.
    pub fn rooftop_enabled(&self) -> bool {
        self.is_eligible(Intervention::RooftopSolar) && self.max_rooftop_kw > 0.0
    }

    pub fn battery_enabled(&self) -> bool {
        self.rooftop_enabled() && self.is_eligible(Intervention::Battery)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tract {
    pub id: TractId,
    /// Annual energy of a 1 kW array, kWh/kW/yr.
    pub solar_annual_yield: f64,
    pub wind_annual_yield: f64,
    pub community_solar_cap_kw: f64,
    pub community_wind_cap_kw: f64,
}

/// Capital costs, lifetimes and battery sizing conventions. All capacities
/// are per kW (PV, wind) or per kWh of storage energy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterventionCatalog {
    pub weatherization_cost_per_building: f64,
    pub weatherization_lifetime_years: u32,
    pub rooftop_solar_cost_per_kw: f64,
    pub rooftop_solar_lifetime_years: u32,
    pub community_solar_cost_per_kw: f64,
    pub community_solar_lifetime_years: u32,
    pub community_wind_cost_per_kw: f64,
    pub community_wind_lifetime_years: u32,
    pub battery_cost_per_kwh: f64,
    pub battery_lifetime_years: u32,
    pub discount_rate: f64,
    /// kWh of battery per kW of rooftop PV.
    pub battery_ratio_kwh_per_kw: f64,
    pub battery_duration_hours: f64,
}

impl InterventionCatalog {
    /// Case-study cost table converted from $/MW to $/kW. The battery is a
    /// 4-hour system, so its $/MW price spreads over four kWh per kW.
    pub fn reference() -> Self {
        const PER_MW: f64 = 1000.0;
        Self {
            weatherization_cost_per_building: 5_000.0,
            weatherization_lifetime_years: 35,
            rooftop_solar_cost_per_kw: 2.4e6 / PER_MW,
            rooftop_solar_lifetime_years: 20,
            community_solar_cost_per_kw: 1.6e6 / PER_MW,
            community_solar_lifetime_years: 20,
            community_wind_cost_per_kw: 2.5e6 / PER_MW,
            community_wind_lifetime_years: 15,
            battery_cost_per_kwh: 1.2e6 / PER_MW / 4.0,
            battery_lifetime_years: 5,
            discount_rate: 0.03,
            battery_ratio_kwh_per_kw: 2.0,
            battery_duration_hours: 4.0,
        }
    }

    pub fn capital_cost(&self, p: Intervention) -> f64 {
        match p {
            Intervention::Weatherization => self.weatherization_cost_per_building,
            Intervention::RooftopSolar => self.rooftop_solar_cost_per_kw,
            Intervention::CommunitySolar => self.community_solar_cost_per_kw,
            Intervention::CommunityWind => self.community_wind_cost_per_kw,
            Intervention::Battery => self.battery_cost_per_kwh,
        }
    }

    pub fn lifetime_years(&self, p: Intervention) -> u32 {
        match p {
            Intervention::Weatherization => self.weatherization_lifetime_years,
            Intervention::RooftopSolar => self.rooftop_solar_lifetime_years,
            Intervention::CommunitySolar => self.community_solar_lifetime_years,
            Intervention::CommunityWind => self.community_wind_lifetime_years,
            Intervention::Battery => self.battery_lifetime_years,
        }
    }

    /// Annualized cost of one unit of intervention `p`.
    pub fn annual_unit_cost(&self, p: Intervention) -> Result<f64, DomainError> {
        annualized_cost(self.capital_cost(p), 1.0, self.discount_rate, self.lifetime_years(p))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TariffScheme {
    /// Retail electricity price, $/kWh.
    pub electricity_price: f64,
    /// Compensation for exported PV energy, $/kWh.
    pub pv_remuneration: f64,
    #[serde(default = "default_burden_threshold")]
    pub burden_threshold: f64,
}

fn default_burden_threshold() -> f64 {
    0.06
}

impl TariffScheme {
    pub fn new(electricity_price: f64, pv_remuneration: f64) -> Self {
        Self {
            electricity_price,
            pv_remuneration,
            burden_threshold: default_burden_threshold(),
        }
    }

    pub fn remuneration_ratio(&self) -> f64 {
        self.pv_remuneration / self.electricity_price
    }

    pub fn with_ratio(&self, ratio: f64) -> Self {
        Self {
            pv_remuneration: self.electricity_price * ratio,
            ..self.clone()
        }
    }

    pub fn is_net_metering(&self) -> bool {
        self.pv_remuneration >= self.electricity_price
    }

    pub fn is_net_billing(&self) -> bool {
        self.pv_remuneration < self.electricity_price
    }
}

/// Hourly household load and the output of a 1 kW array, index-aligned.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HourlyProfiles {
    pub hours: usize,
    pub load_kwh: Vec<f64>,
    pub pv_unit_kwh_per_kw: Vec<f64>,
}

impl HourlyProfiles {
    pub fn new(load_kwh: Vec<f64>, pv_unit_kwh_per_kw: Vec<f64>) -> Self {
        Self {
            hours: load_kwh.len(),
            load_kwh,
            pv_unit_kwh_per_kw,
        }
    }

    pub fn annual_load(&self) -> f64 {
        self.load_kwh.iter().sum()
    }

    pub fn annual_yield(&self) -> f64 {
        self.pv_unit_kwh_per_kw.iter().sum()
    }
}

/// A complete problem instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub archetypes: Vec<HouseholdArchetype>,
    pub tracts: Vec<Tract>,
    pub profiles: BTreeMap<ArchetypeId, HourlyProfiles>,
    pub catalog: InterventionCatalog,
    pub tariff: TariffScheme,
    /// Annualized spending cap in $/yr; `None` leaves the budget unconstrained.
    pub budget: Option<f64>,
    #[serde(default = "default_lambda")]
    pub cost_weight_lambda: f64,
}

pub fn default_lambda() -> f64 {
    1e-9
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ValidationErrors(pub Vec<FieldError>);

impl ValidationErrors {
    fn push(&mut self, field: impl Into<String>, message: impl Into<String>) {
        self.0.push(FieldError {
            field: field.into(),
            message: message.into(),
        });
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for ValidationErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{}: {}", e.field, e.message)?;
        }
        Ok(())
    }
}

const PROFILE_SUM_RTOL: f64 = 1e-6;

fn close_rel(a: f64, b: f64, rtol: f64) -> bool {
    (a - b).abs() <= rtol * a.abs().max(b.abs()).max(1.0)
}

impl Scenario {
    pub fn tract(&self, id: &TractId) -> Option<&Tract> {
        self.tracts.iter().find(|t| &t.id == id)
    }

    pub fn archetype(&self, id: &ArchetypeId) -> Option<&HouseholdArchetype> {
        self.archetypes.iter().find(|a| &a.id == id)
    }

    pub fn tract_of(&self, a: &HouseholdArchetype) -> Result<&Tract, DomainError> {
        self.tract(&a.tract_id)
            .ok_or_else(|| DomainError::UnknownTract(a.tract_id.to_string()))
    }

    pub fn archetypes_in<'a>(
        &'a self,
        tract: &'a TractId,
    ) -> impl Iterator<Item = &'a HouseholdArchetype> + 'a {
        self.archetypes.iter().filter(move |a| &a.tract_id == tract)
    }

    pub fn total_households(&self) -> u64 {
        self.archetypes.iter().map(|a| a.count as u64).sum()
    }

    /// Σ max(0, eb − Ēb)·Nb before any intervention.
    pub fn baseline_inequity(&self) -> f64 {
        let t = self.tariff.burden_threshold;
        self.archetypes
            .iter()
            .map(|a| (a.baseline_burden() - t).max(0.0) * a.count as f64)
            .sum()
    }

    pub fn with_ratio(&self, ratio: f64) -> Self {
        Self {
            tariff: self.tariff.with_ratio(ratio),
            ..self.clone()
        }
    }

    pub fn with_budget(&self, budget: Option<f64>) -> Self {
        Self {
            budget,
            ..self.clone()
        }
    }

    /// Checks every archetype, tract, catalog and tariff invariant, collecting
    /// all failures with their field paths.
    pub fn validate(&self) -> Result<(), ValidationErrors> {
        let mut errs = ValidationErrors::default();
        let mut seen = BTreeSet::new();
        for (i, t) in self.tracts.iter().enumerate() {
            let p = format!("tracts[{i}]");
            if !seen.insert(t.id.clone()) {
                errs.push(format!("{p}.id"), format!("duplicate tract id `{}`", t.id));
            }
            for (name, v) in [
                ("solar_annual_yield", t.solar_annual_yield),
                ("wind_annual_yield", t.wind_annual_yield),
                ("community_solar_cap_kw", t.community_solar_cap_kw),
                ("community_wind_cap_kw", t.community_wind_cap_kw),
            ] {
                if !(v.is_finite() && v >= 0.0) {
                    errs.push(format!("{p}.{name}"), format!("must be finite and >= 0, got {v}"));
                }
            }
        }

        let mut seen = BTreeSet::new();
        for (i, a) in self.archetypes.iter().enumerate() {
            let p = format!("archetypes[{i}]");
            if !seen.insert(a.id.clone()) {
                errs.push(format!("{p}.id"), format!("duplicate archetype id `{}`", a.id));
            }
            if a.count < 1 {
                errs.push(format!("{p}.count"), "must be >= 1");
            }
            if !(a.annual_income.is_finite() && a.annual_income > 0.0) {
                errs.push(
                    format!("{p}.annual_income"),
                    format!("must be > 0, got {}", a.annual_income),
                );
            }
            for (name, v) in [
                ("baseline_electricity_expenditure", a.baseline_electricity_expenditure),
                ("baseline_heating_fuel_expenditure", a.baseline_heating_fuel_expenditure),
                ("baseline_other_fuel_expenditure", a.baseline_other_fuel_expenditure),
                ("max_rooftop_kw", a.max_rooftop_kw),
            ] {
                if !(v.is_finite() && v >= 0.0) {
                    errs.push(format!("{p}.{name}"), format!("must be finite and >= 0, got {v}"));
                }
            }
            if !(0.0..=1.0).contains(&a.weatherization_savings_fraction) {
                errs.push(
                    format!("{p}.weatherization_savings_fraction"),
                    format!("must lie in [0, 1], got {}", a.weatherization_savings_fraction),
                );
            }
            if a.is_eligible(Intervention::Battery) && !a.is_eligible(Intervention::RooftopSolar) {
                errs.push(
                    format!("{p}.eligibility"),
                    "battery eligibility requires rooftop_solar eligibility",
                );
            }
            if a.heating_fuel.is_electric() && a.baseline_heating_fuel_expenditure != 0.0 {
                errs.push(
                    format!("{p}.baseline_heating_fuel_expenditure"),
                    "must be 0 when heating fuel is electric",
                );
            }
            let tract = self.tract(&a.tract_id);
            if tract.is_none() {
                errs.push(
                    format!("{p}.tract_id"),
                    format!("archetype `{}` references unknown tract `{}`", a.id, a.tract_id),
                );
            }
            match self.profiles.get(&a.id) {
                None => errs.push(
                    format!("profiles.{}", a.id),
                    format!("archetype `{}` has no hourly profiles", a.id),
                ),
                Some(pr) => {
                    let pp = format!("profiles.{}", a.id);
                    if pr.load_kwh.len() != pr.hours || pr.pv_unit_kwh_per_kw.len() != pr.hours {
                        errs.push(
                            pp.clone(),
                            format!(
                                "profile length mismatch: hours={} load={} pv={}",
                                pr.hours,
                                pr.load_kwh.len(),
                                pr.pv_unit_kwh_per_kw.len()
                            ),
                        );
                    }
                    if pr
                        .load_kwh
                        .iter()
                        .chain(&pr.pv_unit_kwh_per_kw)
                        .any(|v| !(v.is_finite() && *v >= 0.0))
                    {
                        errs.push(pp.clone(), "profile entries must be finite and >= 0");
                    }
                    if self.tariff.electricity_price > 0.0 {
                        let target = a.baseline_electricity_expenditure / self.tariff.electricity_price;
                        if !close_rel(pr.annual_load(), target, PROFILE_SUM_RTOL) {
                            errs.push(
                                format!("{pp}.load_kwh"),
                                format!(
                                    "annual load {} kWh disagrees with expenditure/price {} kWh",
                                    pr.annual_load(),
                                    target
                                ),
                            );
                        }
                    }
                    if let Some(t) = tract {
                        if !close_rel(pr.annual_yield(), t.solar_annual_yield, PROFILE_SUM_RTOL) {
                            errs.push(
                                format!("{pp}.pv_unit_kwh_per_kw"),
                                format!(
                                    "annual PV yield {} disagrees with tract yield {}",
                                    pr.annual_yield(),
                                    t.solar_annual_yield
                                ),
                            );
                        }
                    }
                }
            }
        }

        let c = &self.catalog;
        for p in Intervention::ALL {
            let cost = c.capital_cost(p);
            if !(cost.is_finite() && cost >= 0.0) {
                errs.push(format!("catalog.{}_cost", p.tag()), "must be >= 0");
            }
            if c.lifetime_years(p) < 1 {
                errs.push(format!("catalog.{}_lifetime_years", p.tag()), "must be >= 1");
            }
        }
        if !(c.discount_rate > 0.0) {
            errs.push("catalog.discount_rate", "must be > 0");
        }
        if !(c.battery_ratio_kwh_per_kw > 0.0) {
            errs.push("catalog.battery_ratio_kwh_per_kw", "must be > 0");
        }
        if !(c.battery_duration_hours > 0.0) {
            errs.push("catalog.battery_duration_hours", "must be > 0");
        }
        if !(self.tariff.electricity_price > 0.0) {
            errs.push("tariff.electricity_price", "must be > 0");
        }
        if !(self.tariff.pv_remuneration >= 0.0) {
            errs.push("tariff.pv_remuneration", "must be >= 0");
        }
        if let Some(b) = self.budget {
            if !(b >= 0.0) {
                errs.push("budget", format!("must be >= 0, got {b}"));
            }
        }
        if !(self.cost_weight_lambda >= 0.0) {
            errs.push("cost_weight_lambda", "must be >= 0");
        }

        if errs.is_empty() {
            Ok(())
        } else {
            Err(errs)
        }
    }
}

/// Capital recovery factor r / (1 − (1+r)^−L).
pub fn annuity_factor(discount_rate: f64, lifetime_years: u32) -> Result<f64, DomainError> {
    if !(discount_rate > 0.0) {
        return Err(DomainError::NonPositiveRate(discount_rate));
    }
    if lifetime_years == 0 {
        return Err(DomainError::ZeroLifetime(lifetime_years));
    }
    let r = discount_rate;
    Ok(r / (1.0 - (1.0 + r).powi(-(lifetime_years as i32))))
}

pub fn annualized_cost(
    capital_cost: f64,
    quantity: f64,
    discount_rate: f64,
    lifetime_years: u32,
) -> Result<f64, DomainError> {
    if quantity < 0.0 {
        return Err(DomainError::NegativeQuantity(quantity));
    }
    Ok(capital_cost * quantity * annuity_factor(discount_rate, lifetime_years)?)
}
