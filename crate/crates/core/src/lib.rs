//! Equity-driven planning of household energy interventions.
//!
//! Given household archetypes grouped into census tracts, hourly load and PV
//! profiles, an intervention catalog and a tariff, the crate chooses
//! weatherization, rooftop PV, community solar and wind, and batteries to
//! minimize the count-weighted energy burden in excess of a threshold.

pub mod dispatch;
pub mod domain;
pub mod linmodel;
pub mod solve;
pub mod ingest;
pub mod benchmark;
pub mod cli;
pub mod service;
