use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::domain::{ArchetypeId, TractId};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Owner {
    Archetype(ArchetypeId),
    Tract(TractId),
    Global,
}

/// Semantic role of a column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarRole {
    WeatherizationFraction,
    RooftopKw,
    BatteryKwh,
    SurplusFlag,
    HasBattery,
    SelfConsumed,
    Stored,
    StorageOpportunity,
    GridInjected,
    CommunitySolarShare,
    CommunityWindShare,
    ElectricityDemand,
    EnergyCost,
    Burden,
    OverBurden,
    UnderBurden,
    WeatherizationCost,
    RooftopCost,
    BatteryCost,
    CommunitySolarKw,
    CommunityWindKw,
    CommunitySolarCost,
    CommunityWindCost,
    /// Convex-combination weight of curve sample `i`.
    GridWeight(u32),
    HourSelfConsumed(u32),
    HourGridInjected(u32),
    HourCharge(u32),
    HourDischarge(u32),
    HourSoc(u32),
    /// Big-M constant (constant table only).
    BigM,
    /// Surplus threshold (constant table only).
    SurplusThreshold,
}

/// Semantic role of a constraint family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowRole {
    WeatherizationCost,
    RooftopCost,
    BatteryCost,
    CommunitySolarCost,
    CommunityWindCost,
    BatteryCapacity,
    RooftopBalance,
    SurplusSwitch,
    SelfConsumptionFit,
    SelfConsumptionLinear,
    BatteryNeedsSurplus,
    StorageOpportunityFit,
    StorageOpportunityOff,
    StoredEnergy,
    CurveConvexity,
    CurveInterpolation,
    HourlyBalance,
    HourlyLoad,
    HourlySoc,
    HourlyLimits,
    HourlyAggregate,
    CommunitySolarShare,
    CommunityWindShare,
    ElectricityDemand,
    EnergyCost,
    Burden,
    BurdenSplit,
    Budget,
}

/// Lookup between semantic (owner, role) keys and model columns/rows.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "MapRepr", into = "MapRepr")]
pub struct ModelMap {
    columns: BTreeMap<(Owner, VarRole), usize>,
    col_keys: Vec<(Owner, VarRole)>,
    rows: BTreeMap<(Owner, RowRole), Vec<usize>>,
    constants: BTreeMap<(Owner, VarRole), f64>,
}

impl ModelMap {
    pub(crate) fn insert_column(&mut self, owner: Owner, role: VarRole, col: usize) {
        debug_assert_eq!(col, self.col_keys.len());
        self.columns.insert((owner.clone(), role), col);
        self.col_keys.push((owner, role));
    }

    pub(crate) fn insert_row(&mut self, owner: Owner, role: RowRole, row: usize) {
        self.rows.entry((owner, role)).or_default().push(row);
    }

    pub(crate) fn insert_constant(&mut self, owner: Owner, role: VarRole, value: f64) {
        self.constants.insert((owner, role), value);
    }

    pub fn column(&self, owner: &Owner, role: VarRole) -> Option<usize> {
        self.columns.get(&(owner.clone(), role)).copied()
    }

    pub fn archetype_col(&self, id: &ArchetypeId, role: VarRole) -> Option<usize> {
        self.column(&Owner::Archetype(id.clone()), role)
    }

    pub fn tract_col(&self, id: &TractId, role: VarRole) -> Option<usize> {
        self.column(&Owner::Tract(id.clone()), role)
    }

    pub fn rows(&self, owner: &Owner, role: RowRole) -> &[usize] {
        self.rows
            .get(&(owner.clone(), role))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn constant(&self, owner: &Owner, role: VarRole) -> Option<f64> {
        self.constants.get(&(owner.clone(), role)).copied()
    }

    /// Owner and role of column `col`.
    pub fn key_of(&self, col: usize) -> Option<&(Owner, VarRole)> {
        self.col_keys.get(col)
    }

    pub fn num_columns(&self) -> usize {
        self.col_keys.len()
    }

    pub fn row_families(&self) -> impl Iterator<Item = (&(Owner, RowRole), &Vec<usize>)> {
        self.rows.iter()
    }

    /// Value of `(owner, role)`: the column value when mapped, else the
    /// recorded constant, else zero.
    pub fn value(&self, x: &[f64], owner: &Owner, role: VarRole) -> f64 {
        self.column(owner, role)
            .map(|j| x[j])
            .or_else(|| self.constant(owner, role))
            .unwrap_or(0.0)
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self)
    }
}

#[derive(Serialize, Deserialize)]
struct ColumnEntry {
    owner: Owner,
    role: VarRole,
    column: usize,
}

#[derive(Serialize, Deserialize)]
struct RowEntry {
    owner: Owner,
    role: RowRole,
    rows: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct ConstantEntry {
    owner: Owner,
    role: VarRole,
    value: f64,
}

#[derive(Serialize, Deserialize)]
struct MapRepr {
    columns: Vec<ColumnEntry>,
    rows: Vec<RowEntry>,
    constants: Vec<ConstantEntry>,
}

impl From<ModelMap> for MapRepr {
    fn from(m: ModelMap) -> Self {
        MapRepr {
            columns: m
                .col_keys
                .into_iter()
                .enumerate()
                .map(|(column, (owner, role))| ColumnEntry { owner, role, column })
                .collect(),
            rows: m
                .rows
                .into_iter()
                .map(|((owner, role), rows)| RowEntry { owner, role, rows })
                .collect(),
            constants: m
                .constants
                .into_iter()
                .map(|((owner, role), value)| ConstantEntry { owner, role, value })
                .collect(),
        }
    }
}

impl From<MapRepr> for ModelMap {
    fn from(r: MapRepr) -> Self {
        let mut m = ModelMap::default();
        let mut cols = r.columns;
        cols.sort_by_key(|c| c.column);
        for c in cols {
            m.columns.insert((c.owner.clone(), c.role), c.column);
            m.col_keys.push((c.owner, c.role));
        }
        for e in r.rows {
            m.rows.insert((e.owner, e.role), e.rows);
        }
        for c in r.constants {
            m.constants.insert((c.owner, c.role), c.value);
        }
        m
    }
}
