//! Runs the time-resolved benchmark and the linearized model side by side
//! and prints the comparison indicators.

use std::time::Instant;

use equiders::benchmark::{compare, solve_time_model, TimeOptions, DEFAULT_ERROR_THRESHOLD_PCT};
use equiders::ingest::SyntheticSpec;
use equiders::solve::{solve_linearized, SolveOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let scenario = SyntheticSpec::new(seed, 10, 5, 8760).generate()?;

    let t = Instant::now();
    let lin = solve_linearized(&scenario, &SolveOptions::default())?;
    let lin_time = t.elapsed();
    let t = Instant::now();
    let time = solve_time_model(&scenario, &TimeOptions::default())?;
    let time_time = t.elapsed();

    let report = compare(&time.solution, &lin.solution, &scenario, DEFAULT_ERROR_THRESHOLD_PCT);
    println!("linearized {lin_time:.2?} ({}), time {time_time:.2?} ({})", lin.mip.method, time.mip.method);
    println!("{:<24} {:>14} {:>14} {:>8}", "indicator", "time", "linearized", "error %");
    for i in &report.indicators {
        println!("{:<24} {:>14.6} {:>14.6} {:>8.3}", i.name, i.time, i.linearized, i.error_pct);
    }
    let (tm, lm) = (&report.time_mix, &report.linearized_mix);
    println!("rooftop kW   {:>10.1} {:>10.1}", tm.rooftop_kw, lm.rooftop_kw);
    println!("battery kWh  {:>10.1} {:>10.1}", tm.battery_kwh, lm.battery_kwh);
    println!("kWh per MW   {:>10.1} {:>10.1}", tm.storage_per_pv_kwh_per_mw, lm.storage_per_pv_kwh_per_mw);
    println!("{}", if report.passed() { "PASS" } else { "FAIL" });
    Ok(())
}
