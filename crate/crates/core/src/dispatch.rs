//! Time-domain precomputation for rooftop PV plus storage: the surplus
//! threshold Z¹, the greedy daily battery rule, and the linear fits of the
//! self-consumption and storage-opportunity curves above Z¹.

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{ArchetypeId, HourlyProfiles, Scenario};

pub const HOURS_PER_DAY: usize = 24;
pub const DEFAULT_SAMPLES: usize = 32;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DispatchError {
    #[error("profile spans {0} hours, not a whole number of days")]
    PartialDay(usize),
    #[error("load and PV profiles differ in length ({load} vs {pv})")]
    LengthMismatch { load: usize, pv: usize },
    #[error("invalid dispatch input: {0}")]
    InvalidInput(String),
    #[error("archetype `{0}` has no hourly profiles")]
    MissingProfiles(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispatchResult {
    pub self_consumed_kwh: f64,
    /// Energy discharged to serve later demand.
    pub stored_kwh: f64,
    pub grid_injected_kwh: f64,
    /// Charge still in the battery at day end, summed over the year.
    pub stranded_kwh: f64,
    pub hourly_soc: Vec<f64>,
    pub hourly_charge: Vec<f64>,
    pub hourly_discharge: Vec<f64>,
}

/// Largest array size with no surplus in any hour: min load/pv over hours
/// with PV output. `f64::INFINITY` when the array never produces.
pub fn surplus_threshold(profiles: &HourlyProfiles) -> f64 {
    profiles
        .load_kwh
        .iter()
        .zip(&profiles.pv_unit_kwh_per_kw)
        .filter(|(_, &pv)| pv > 0.0)
        .map(|(&load, &pv)| load / pv)
        .fold(f64::INFINITY, f64::min)
}

fn check_profiles(profiles: &HourlyProfiles) -> Result<(), DispatchError> {
    let (nl, np) = (profiles.load_kwh.len(), profiles.pv_unit_kwh_per_kw.len());
    if nl != np {
        return Err(DispatchError::LengthMismatch { load: nl, pv: np });
    }
    if nl % HOURS_PER_DAY != 0 {
        return Err(DispatchError::PartialDay(nl));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DispatchTotals {
    pub self_consumed_kwh: f64,
    pub stored_kwh: f64,
    pub grid_injected_kwh: f64,
    pub stranded_kwh: f64,
}

struct Trace<'a> {
    soc: &'a mut Vec<f64>,
    charge: &'a mut Vec<f64>,
    discharge: &'a mut Vec<f64>,
}

fn simulate(
    load: &[f64],
    pv: &[f64],
    rooftop_kw: f64,
    battery_kwh: f64,
    duration_hours: f64,
    mut trace: Option<Trace<'_>>,
) -> DispatchTotals {
    let rate = battery_kwh / duration_hours;
    let mut tot = DispatchTotals::default();
    for (day_load, day_pv) in load.chunks(HOURS_PER_DAY).zip(pv.chunks(HOURS_PER_DAY)) {
        let mut soc = 0.0_f64;
        for (&l, &p) in day_load.iter().zip(day_pv) {
            let g = rooftop_kw * p;
            let sc = g.min(l);
            let surplus = g - sc;
            let mut pc = 0.0;
            let mut pd = 0.0;
            if surplus > 0.0 {
                pc = surplus.min(battery_kwh - soc).min(rate).max(0.0);
                soc += pc;
                tot.grid_injected_kwh += surplus - pc;
            }
            if l > g {
                pd = soc.min(rate).min(l - g);
                soc -= pd;
                tot.stored_kwh += pd;
            }
            tot.self_consumed_kwh += sc;
            if let Some(t) = trace.as_mut() {
                t.soc.push(soc);
                t.charge.push(pc);
                t.discharge.push(pd);
            }
        }
        tot.stranded_kwh += soc;
    }
    tot
}

/// Greedy daily dispatch: charge from PV surplus as fast as the power
/// limit allows, discharge into any later deficit the same day. The battery
/// starts every day empty.
pub fn greedy_dispatch(
    profiles: &HourlyProfiles,
    rooftop_kw: f64,
    battery_kwh: f64,
    duration_hours: f64,
) -> Result<DispatchResult, DispatchError> {
    check_profiles(profiles)?;
    check_sizes(rooftop_kw, battery_kwh, duration_hours)?;
    let n = profiles.load_kwh.len();
    let (mut soc, mut charge, mut discharge) =
        (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    let tot = simulate(
        &profiles.load_kwh,
        &profiles.pv_unit_kwh_per_kw,
        rooftop_kw,
        battery_kwh,
        duration_hours,
        Some(Trace {
            soc: &mut soc,
            charge: &mut charge,
            discharge: &mut discharge,
        }),
    );
    Ok(DispatchResult {
        self_consumed_kwh: tot.self_consumed_kwh,
        stored_kwh: tot.stored_kwh,
        grid_injected_kwh: tot.grid_injected_kwh,
        stranded_kwh: tot.stranded_kwh,
        hourly_soc: soc,
        hourly_charge: charge,
        hourly_discharge: discharge,
    })
}

/// Same rule as [`greedy_dispatch`] without the hourly trace.
pub fn greedy_totals(
    profiles: &HourlyProfiles,
    rooftop_kw: f64,
    battery_kwh: f64,
    duration_hours: f64,
) -> Result<DispatchTotals, DispatchError> {
    check_profiles(profiles)?;
    check_sizes(rooftop_kw, battery_kwh, duration_hours)?;
    Ok(simulate(
        &profiles.load_kwh,
        &profiles.pv_unit_kwh_per_kw,
        rooftop_kw,
        battery_kwh,
        duration_hours,
        None,
    ))
}

fn check_sizes(rooftop_kw: f64, battery_kwh: f64, duration_hours: f64) -> Result<(), DispatchError> {
    if !(rooftop_kw >= 0.0 && battery_kwh >= 0.0) {
        return Err(DispatchError::InvalidInput(format!(
            "sizes must be non-negative (rooftop {rooftop_kw}, battery {battery_kwh})"
        )));
    }
    if !(duration_hours > 0.0) {
        return Err(DispatchError::InvalidInput(format!(
            "battery duration must be positive, got {duration_hours}"
        )));
    }
    Ok(())
}

/// One evaluation of the co-sized PV + battery curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplePoint {
    pub d_kw: f64,
    pub sc_kwh: f64,
    pub st_bar_kwh: f64,
    /// Remainder of generation: exports plus day-end stranded charge.
    pub sg_kwh: f64,
}

/// Evaluates the curve at `d_kw` with a battery of `beta * d_kw`.
pub fn sample_curve(
    profiles: &HourlyProfiles,
    d_kw: f64,
    beta: f64,
    duration_hours: f64,
) -> Result<SamplePoint, DispatchError> {
    let t = greedy_totals(profiles, d_kw, beta * d_kw, duration_hours)?;
    let gen = d_kw * profiles.annual_yield();
    Ok(SamplePoint {
        d_kw,
        sc_kwh: t.self_consumed_kwh,
        st_bar_kwh: t.stored_kwh,
        sg_kwh: gen - t.self_consumed_kwh - t.stored_kwh,
    })
}

/// Per-archetype linear description of self-consumption and storage
/// opportunity above the surplus threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfConsumptionFit {
    /// Surplus threshold clamped to `[0, max_rooftop_kw]`.
    pub z1_kw: f64,
    /// False when no admissible array size ever produces a surplus; the
    /// model then pins `z` and `δ` to zero.
    pub has_surplus: bool,
    pub max_rooftop_kw: f64,
    /// Annual yield ζ of a 1 kW array, kWh/kW.
    pub annual_yield: f64,
    pub sc_slope: f64,
    pub sc_intercept: f64,
    pub st_slope: f64,
    pub st_intercept: f64,
    pub sample_points: Vec<SamplePoint>,
    pub fit_rmse_sc: f64,
    pub fit_rmse_st: f64,
    pub big_m_kwh: f64,
}

impl SelfConsumptionFit {
    fn no_surplus(z1: f64, max_rooftop_kw: f64, annual_yield: f64) -> Self {
        Self {
            z1_kw: z1.clamp(0.0, max_rooftop_kw),
            has_surplus: false,
            max_rooftop_kw,
            annual_yield,
            sc_slope: 0.0,
            sc_intercept: 0.0,
            st_slope: 0.0,
            st_intercept: 0.0,
            sample_points: Vec::new(),
            fit_rmse_sc: 0.0,
            fit_rmse_st: 0.0,
            big_m_kwh: max_rooftop_kw * annual_yield,
        }
    }

    pub fn sc_line(&self, d_kw: f64) -> f64 {
        self.sc_slope * d_kw + self.sc_intercept
    }

    pub fn st_line(&self, d_kw: f64) -> f64 {
        self.st_slope * d_kw + self.st_intercept
    }

    /// Piecewise self-consumption the linearized model assigns to `d_kw`.
    pub fn sc_model(&self, d_kw: f64) -> f64 {
        if !self.has_surplus || d_kw <= self.z1_kw {
            self.annual_yield * d_kw
        } else {
            self.sc_line(d_kw)
        }
    }

    pub fn st_model(&self, d_kw: f64) -> f64 {
        if !self.has_surplus || d_kw < self.z1_kw {
            0.0
        } else {
            self.st_line(d_kw)
        }
    }
}

fn ols(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let rmse = (xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (slope * x + intercept - y).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    (slope, intercept, rmse)
}

fn check_fit_inputs(max_rooftop_kw: f64, beta: f64, duration_hours: f64) -> Result<(), DispatchError> {
    if !(max_rooftop_kw > 0.0) {
        return Err(DispatchError::InvalidInput(format!(
            "max rooftop capacity must be positive, got {max_rooftop_kw}"
        )));
    }
    if !(beta >= 0.0) {
        return Err(DispatchError::InvalidInput(format!("battery ratio must be >= 0, got {beta}")));
    }
    check_sizes(0.0, 0.0, duration_hours)
}

/// Samples the curves at `n_samples` uniform points on (Z¹, RTS̄] and fits a
/// least-squares line to each.
pub fn fit_piecewise(
    profiles: &HourlyProfiles,
    max_rooftop_kw: f64,
    beta: f64,
    duration_hours: f64,
    n_samples: usize,
) -> Result<SelfConsumptionFit, DispatchError> {
    check_profiles(profiles)?;
    check_fit_inputs(max_rooftop_kw, beta, duration_hours)?;
    if n_samples < 2 {
        return Err(DispatchError::InvalidInput(format!(
            "need at least 2 samples, got {n_samples}"
        )));
    }
    let zeta = profiles.annual_yield();
    let z1 = surplus_threshold(profiles);
    if z1 >= max_rooftop_kw {
        return Ok(SelfConsumptionFit::no_surplus(z1, max_rooftop_kw, zeta));
    }
    let span = max_rooftop_kw - z1;
    let points = (1..=n_samples)
        .map(|i| sample_curve(profiles, z1 + span * i as f64 / n_samples as f64, beta, duration_hours))
        .collect::<Result<Vec<_>, _>>()?;
    let xs: Vec<f64> = points.iter().map(|p| p.d_kw).collect();
    let sc: Vec<f64> = points.iter().map(|p| p.sc_kwh).collect();
    let st: Vec<f64> = points.iter().map(|p| p.st_bar_kwh).collect();
    let (sc_slope, sc_intercept, fit_rmse_sc) = ols(&xs, &sc);
    let (st_slope, st_intercept, fit_rmse_st) = ols(&xs, &st);
    Ok(SelfConsumptionFit {
        z1_kw: z1,
        has_surplus: true,
        max_rooftop_kw,
        annual_yield: zeta,
        sc_slope,
        sc_intercept,
        st_slope,
        st_intercept,
        sample_points: points,
        fit_rmse_sc,
        fit_rmse_st,
        big_m_kwh: max_rooftop_kw * zeta,
    })
}

/// Secant through the curve at Z¹ and at RTS̄; the degenerate two-point
/// description of the upper piece.
pub fn fit_secant(
    profiles: &HourlyProfiles,
    max_rooftop_kw: f64,
    beta: f64,
    duration_hours: f64,
) -> Result<SelfConsumptionFit, DispatchError> {
    check_profiles(profiles)?;
    check_fit_inputs(max_rooftop_kw, beta, duration_hours)?;
    let zeta = profiles.annual_yield();
    let z1 = surplus_threshold(profiles);
    if z1 >= max_rooftop_kw {
        return Ok(SelfConsumptionFit::no_surplus(z1, max_rooftop_kw, zeta));
    }
    let lo = sample_curve(profiles, z1, beta, duration_hours)?;
    let hi = sample_curve(profiles, max_rooftop_kw, beta, duration_hours)?;
    let dx = hi.d_kw - lo.d_kw;
    let sc_slope = (hi.sc_kwh - lo.sc_kwh) / dx;
    let st_slope = (hi.st_bar_kwh - lo.st_bar_kwh) / dx;
    Ok(SelfConsumptionFit {
        z1_kw: z1,
        has_surplus: true,
        max_rooftop_kw,
        annual_yield: zeta,
        sc_slope,
        sc_intercept: lo.sc_kwh - sc_slope * lo.d_kw,
        st_slope,
        st_intercept: lo.st_bar_kwh - st_slope * lo.d_kw,
        sample_points: vec![lo, hi],
        fit_rmse_sc: 0.0,
        fit_rmse_st: 0.0,
        big_m_kwh: max_rooftop_kw * zeta,
    })
}

/// Fits every rooftop-enabled archetype in parallel.
pub fn fit_scenario(
    scenario: &Scenario,
    n_samples: usize,
) -> Result<BTreeMap<ArchetypeId, SelfConsumptionFit>, DispatchError> {
    let beta = scenario.catalog.battery_ratio_kwh_per_kw;
    let dur = scenario.catalog.battery_duration_hours;
    scenario
        .archetypes
        .par_iter()
        .filter(|a| a.rooftop_enabled())
        .map(|a| {
            let prof = scenario
                .profiles
                .get(&a.id)
                .ok_or_else(|| DispatchError::MissingProfiles(a.id.to_string()))?;
            fit_piecewise(prof, a.max_rooftop_kw, beta, dur, n_samples).map(|f| (a.id.clone(), f))
        })
        .collect::<Result<Vec<_>, _>>()
        .map(|v| v.into_iter().collect())
}

/// Writes sampled points alongside the fitted lines as CSV.
pub fn write_curve_csv<W: Write>(fit: &SelfConsumptionFit, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["d_kw", "sc_kwh", "st_bar_kwh", "sg_kwh", "sc_fit", "st_fit"])?;
    for p in &fit.sample_points {
        w.write_record(&[
            p.d_kw.to_string(),
            p.sc_kwh.to_string(),
            p.st_bar_kwh.to_string(),
            p.sg_kwh.to_string(),
            fit.sc_line(p.d_kw).to_string(),
            fit.st_line(p.d_kw).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Four-hour profile padded to a whole day with dark, load-free hours.
    fn four_hour_day() -> HourlyProfiles {
        let mut load = vec![1.0, 1.0, 1.0, 1.0];
        let mut pv = vec![0.0, 2.0, 2.0, 0.0];
        load.resize(24, 0.0);
        pv.resize(24, 0.0);
        HourlyProfiles::new(load, pv)
    }

    #[test]
    fn threshold_examples() {
        let p = HourlyProfiles::new(vec![1.0, 1.0, 1.0, 1.0], vec![0.0, 2.0, 2.0, 0.0]);
        assert_eq!(surplus_threshold(&p), 0.5);
        let p = HourlyProfiles::new(vec![0.0, 1.0], vec![1.0, 1.0]);
        assert_eq!(surplus_threshold(&p), 0.0);
        let p = HourlyProfiles::new(vec![1.0, 1.0], vec![0.0, 0.0]);
        assert!(surplus_threshold(&p).is_infinite());
    }

    #[test]
    fn hand_simulated_day() {
        let r = greedy_dispatch(&four_hour_day(), 1.0, 1.0, 1.0).unwrap();
        assert!((r.self_consumed_kwh - 2.0).abs() < 1e-12);
        assert!((r.stored_kwh - 1.0).abs() < 1e-12);
        assert!((r.grid_injected_kwh - 1.0).abs() < 1e-12);
        assert_eq!(r.stranded_kwh, 0.0);
        assert_eq!(&r.hourly_charge[..4], &[0.0, 1.0, 0.0, 0.0]);
        assert_eq!(&r.hourly_discharge[..4], &[0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn no_battery_exports_all_surplus() {
        let r = greedy_dispatch(&four_hour_day(), 1.0, 0.0, 1.0).unwrap();
        assert_eq!(r.stored_kwh, 0.0);
        assert!((r.grid_injected_kwh - 2.0).abs() < 1e-12);
    }

    #[test]
    fn below_threshold_self_consumes_everything() {
        let r = greedy_dispatch(&four_hour_day(), 0.4, 0.4, 1.0).unwrap();
        assert!((r.self_consumed_kwh - 1.6).abs() < 1e-12);
        assert_eq!(r.stored_kwh, 0.0);
        assert_eq!(r.grid_injected_kwh, 0.0);
    }

    #[test]
    fn partial_day_rejected() {
        let p = HourlyProfiles::new(vec![1.0; 5], vec![1.0; 5]);
        assert_eq!(greedy_dispatch(&p, 1.0, 1.0, 1.0).unwrap_err(), DispatchError::PartialDay(5));
    }

    #[test]
    fn fit_on_four_hour_day() {
        let f = fit_piecewise(&four_hour_day(), 1.0, 1.0, 1.0, 3).unwrap();
        assert!(f.has_surplus);
        assert_eq!(f.z1_kw, 0.5);
        for p in &f.sample_points {
            assert!((p.sc_kwh - 2.0).abs() < 1e-12);
            assert!((p.st_bar_kwh - p.d_kw).abs() < 1e-12);
        }
        assert!(f.sc_slope.abs() < 1e-12);
        assert!((f.sc_intercept - 2.0).abs() < 1e-12);
        assert!((f.st_slope - 1.0).abs() < 1e-12);
        assert!(f.st_intercept.abs() < 1e-12);
        assert!((f.big_m_kwh - 4.0).abs() < 1e-12);
    }

    #[test]
    fn fit_degenerate_branches() {
        let f = fit_piecewise(&four_hour_day(), 0.3, 1.0, 1.0, 8).unwrap();
        assert!(!f.has_surplus);
        assert_eq!(f.z1_kw, 0.3);
        assert_eq!((f.sc_slope, f.st_slope), (0.0, 0.0));

        let dark = HourlyProfiles::new(vec![1.0; 24], vec![0.0; 24]);
        let f = fit_piecewise(&dark, 4.0, 1.0, 1.0, 8).unwrap();
        assert!(!f.has_surplus);
        assert!(surplus_threshold(&dark).is_infinite());
        assert_eq!(f.z1_kw, 4.0);
    }

    #[test]
    fn fit_rejects_bad_inputs() {
        assert!(fit_piecewise(&four_hour_day(), 1.0, 1.0, 1.0, 1).is_err());
        assert!(fit_piecewise(&four_hour_day(), 0.0, 1.0, 1.0, 4).is_err());
    }

    #[test]
    fn secant_hits_curve_endpoints() {
        let f = fit_secant(&four_hour_day(), 1.0, 1.0, 1.0).unwrap();
        assert!((f.sc_line(0.5) - 2.0).abs() < 1e-12);
        assert!((f.st_line(1.0) - 1.0).abs() < 1e-12);
        assert!(f.st_line(0.5).abs() < 1e-12);
    }

    #[test]
    fn curve_csv_has_header_and_rows() {
        let f = fit_piecewise(&four_hour_day(), 1.0, 1.0, 1.0, 3).unwrap();
        let mut buf = Vec::new();
        write_curve_csv(&f, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("d_kw,sc_kwh,st_bar_kwh,sg_kwh,sc_fit,st_fit\n"));
        assert_eq!(text.lines().count(), 4);
    }

    fn day_profiles() -> impl Strategy<Value = HourlyProfiles> {
        (1usize..3).prop_flat_map(|days| {
            (
                proptest::collection::vec(0.0f64..3.0, days * 24),
                proptest::collection::vec(0.0f64..1.0, days * 24),
            )
                .prop_map(|(l, p)| HourlyProfiles::new(l, p))
        })
    }

    proptest! {
        #[test]
        fn energy_is_conserved(p in day_profiles(), d in 0.0f64..6.0, cap in 0.0f64..10.0, dur in 0.5f64..6.0) {
            let r = greedy_dispatch(&p, d, cap, dur).unwrap();
            let gen = d * p.annual_yield();
            let booked = r.self_consumed_kwh + r.stored_kwh + r.grid_injected_kwh + r.stranded_kwh;
            prop_assert!((booked - gen).abs() <= 1e-9 * gen.max(1.0));
            for t in 0..p.hours {
                prop_assert!(r.hourly_soc[t] <= cap + 1e-12);
                prop_assert!(r.hourly_charge[t] * dur <= cap + 1e-9);
                prop_assert!(r.hourly_discharge[t] * dur <= cap + 1e-9);
                prop_assert!(r.hourly_soc[t] >= 0.0 && r.hourly_charge[t] >= 0.0 && r.hourly_discharge[t] >= 0.0);
            }
        }

        #[test]
        fn first_piece_is_exact(p in day_profiles(), frac in 0.0f64..1.0) {
            let z1 = surplus_threshold(&p);
            prop_assume!(z1.is_finite());
            let d = z1 * frac;
            let r = greedy_totals(&p, d, 0.0, 1.0).unwrap();
            let gen = d * p.annual_yield();
            prop_assert!((r.self_consumed_kwh - gen).abs() <= 1e-9 * gen.max(1.0));
        }

        #[test]
        fn sampled_curves_are_monotone(p in day_profiles(), rts in 0.5f64..8.0, beta in 0.2f64..3.0) {
            let f = fit_piecewise(&p, rts, beta, 2.0, 12).unwrap();
            for w in f.sample_points.windows(2) {
                prop_assert!(w[1].sc_kwh >= w[0].sc_kwh - 1e-9);
            }
            // Stored energy need not grow with d: more PV also shrinks the
            // evening deficit the battery discharges into.
            for s in &f.sample_points {
                let gen = s.d_kw * f.annual_yield;
                prop_assert!((s.sc_kwh + s.st_bar_kwh + s.sg_kwh - gen).abs() <= 1e-6 * gen.max(1.0));
                prop_assert!(s.st_bar_kwh >= 0.0 && s.sg_kwh >= -1e-9);
            }
            prop_assert!(f.z1_kw >= 0.0 && f.z1_kw <= rts);
        }
    }
}
