//! Solver-agnostic algebraic model of the portfolio problem, its builders
//! and MPS interchange.

mod build;
mod map;
mod model;
mod mps;

pub use build::{
    build_hourly, build_linearized, build_sampled, build_with, linearized_census, BuildError,
    Census, RooftopCurve, SampledCurve,
};
pub use map::{ModelMap, Owner, RowRole, VarRole};
pub use model::{Constraint, MilpModel, ModelError, Relation, VarKind, Variable};
pub use mps::{export_mps, format_number, parse_mps, MpsError, MpsExport, NameMap};
