use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarKind {
    Continuous,
    Binary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = ">=")]
    Ge,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub name: String,
    /// Sorted by column, no duplicates, no zeros.
    pub coeffs: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

impl Constraint {
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(j, a)| a * x[j]).sum()
    }

    /// Amount by which `x` violates the row (0 when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let act = self.activity(x);
        match self.relation {
            Relation::Le => (act - self.rhs).max(0.0),
            Relation::Ge => (self.rhs - act).max(0.0),
            Relation::Eq => (act - self.rhs).abs(),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("duplicate variable name `{0}`")]
    DuplicateVariable(String),
    #[error("duplicate constraint name `{0}`")]
    DuplicateConstraint(String),
    #[error("constraint `{0}` references column {1} which does not exist")]
    UnknownColumn(String, usize),
    #[error("binary variable `{0}` must have bounds within [0, 1]")]
    BinaryBounds(String),
    #[error("variable `{0}` has lower bound above upper bound")]
    EmptyDomain(String),
}

/// Solver-agnostic linear model: minimize `objective · x + objective_constant`.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct MilpModel {
    pub name: String,
    pub variables: Vec<Variable>,
    pub constraints: Vec<Constraint>,
    /// Sorted by column, no zeros.
    pub objective: Vec<(usize, f64)>,
    pub objective_constant: f64,
    #[serde(skip)]
    col_index: HashMap<String, usize>,
    #[serde(skip)]
    row_index: HashMap<String, usize>,
}

impl PartialEq for MilpModel {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
            && self.variables == other.variables
            && self.constraints == other.constraints
            && self.objective == other.objective
            && self.objective_constant == other.objective_constant
    }
}

pub(crate) fn normalize(coeffs: impl IntoIterator<Item = (usize, f64)>) -> Vec<(usize, f64)> {
    let mut v: Vec<(usize, f64)> = coeffs.into_iter().collect();
    v.sort_by_key(|&(j, _)| j);
    let mut out: Vec<(usize, f64)> = Vec::with_capacity(v.len());
    for (j, a) in v {
        match out.last_mut() {
            Some(last) if last.0 == j => last.1 += a,
            _ => out.push((j, a)),
        }
    }
    out.retain(|&(_, a)| a != 0.0);
    out
}

impl MilpModel {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            ..Default::default()
        }
    }

    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn num_rows(&self) -> usize {
        self.constraints.len()
    }

    pub fn add_var(&mut self, name: impl Into<String>, kind: VarKind, lower: f64, upper: f64) -> usize {
        let name = name.into();
        let (lower, upper) = match kind {
            VarKind::Binary => (lower.max(0.0), upper.min(1.0)),
            VarKind::Continuous => (lower, upper),
        };
        let j = self.variables.len();
        let prev = self.col_index.insert(name.clone(), j);
        debug_assert!(prev.is_none(), "duplicate variable {name}");
        self.variables.push(Variable { name, kind, lower, upper });
        j
    }

    pub fn add_row(
        &mut self,
        name: impl Into<String>,
        coeffs: impl IntoIterator<Item = (usize, f64)>,
        relation: Relation,
        rhs: f64,
    ) -> usize {
        let name = name.into();
        let i = self.constraints.len();
        let prev = self.row_index.insert(name.clone(), i);
        debug_assert!(prev.is_none(), "duplicate constraint {name}");
        self.constraints.push(Constraint {
            name,
            coeffs: normalize(coeffs),
            relation,
            rhs,
        });
        i
    }

    pub fn set_objective(&mut self, coeffs: impl IntoIterator<Item = (usize, f64)>, constant: f64) {
        self.objective = normalize(coeffs);
        self.objective_constant = constant;
    }

    pub fn add_objective(&mut self, coeffs: impl IntoIterator<Item = (usize, f64)>) {
        let merged = self.objective.iter().copied().chain(coeffs);
        self.objective = normalize(merged);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        if self.col_index.len() == self.variables.len() {
            self.col_index.get(name).copied()
        } else {
            self.variables.iter().position(|v| v.name == name)
        }
    }

    pub fn row(&self, name: &str) -> Option<usize> {
        if self.row_index.len() == self.constraints.len() {
            self.row_index.get(name).copied()
        } else {
            self.constraints.iter().position(|c| c.name == name)
        }
    }

    /// Rebuilds the name lookup after deserialization or manual edits.
    pub fn reindex(&mut self) {
        self.col_index = self
            .variables
            .iter()
            .enumerate()
            .map(|(j, v)| (v.name.clone(), j))
            .collect();
        self.row_index = self
            .constraints
            .iter()
            .enumerate()
            .map(|(i, c)| (c.name.clone(), i))
            .collect();
    }

    pub fn binaries(&self) -> impl Iterator<Item = usize> + '_ {
        self.variables
            .iter()
            .enumerate()
            .filter(|(_, v)| v.kind == VarKind::Binary)
            .map(|(j, _)| j)
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective_constant + self.objective.iter().map(|&(j, c)| c * x[j]).sum::<f64>()
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let mut names = std::collections::HashSet::new();
        for v in &self.variables {
            if !names.insert(v.name.as_str()) {
                return Err(ModelError::DuplicateVariable(v.name.clone()));
            }
            if v.lower > v.upper {
                return Err(ModelError::EmptyDomain(v.name.clone()));
            }
            if v.kind == VarKind::Binary && (v.lower < 0.0 || v.upper > 1.0) {
                return Err(ModelError::BinaryBounds(v.name.clone()));
            }
        }
        let mut rows = std::collections::HashSet::new();
        for c in &self.constraints {
            if !rows.insert(c.name.as_str()) {
                return Err(ModelError::DuplicateConstraint(c.name.clone()));
            }
            if let Some(&(j, _)) = c.coeffs.iter().find(|(j, _)| *j >= self.variables.len()) {
                return Err(ModelError::UnknownColumn(c.name.clone(), j));
            }
        }
        if let Some(&(j, _)) = self.objective.iter().find(|(j, _)| *j >= self.variables.len()) {
            return Err(ModelError::UnknownColumn("objective".into(), j));
        }
        Ok(())
    }

    /// Largest row or bound violation of `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let rows = self
            .constraints
            .iter()
            .map(|c| c.violation(x))
            .fold(0.0, f64::max);
        let bounds = self
            .variables
            .iter()
            .zip(x)
            .map(|(v, &xj)| (v.lower - xj).max(xj - v.upper).max(0.0))
            .fold(0.0, f64::max);
        rows.max(bounds)
    }

    /// Copy of the model restricted to `cols` and `rows`. Coefficients on
    /// columns outside `cols` are dropped, so callers pick row sets that only
    /// touch the kept columns.
    pub fn submodel(&self, cols: &[usize], rows: &[usize]) -> (MilpModel, Vec<usize>) {
        let mut remap = vec![usize::MAX; self.variables.len()];
        let mut sub = MilpModel::new(self.name.clone());
        for &j in cols {
            let v = &self.variables[j];
            remap[j] = sub.add_var(v.name.clone(), v.kind, v.lower, v.upper);
        }
        for &i in rows {
            let c = &self.constraints[i];
            sub.add_row(
                c.name.clone(),
                c.coeffs
                    .iter()
                    .filter(|(j, _)| remap[*j] != usize::MAX)
                    .map(|&(j, a)| (remap[j], a)),
                c.relation,
                c.rhs,
            );
        }
        sub.set_objective(
            self.objective
                .iter()
                .filter(|(j, _)| remap[*j] != usize::MAX)
                .map(|&(j, a)| (remap[j], a)),
            0.0,
        );
        (sub, cols.to_vec())
    }
}
