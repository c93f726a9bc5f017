//! Battery deployment as exports earn less than the retail price.

use equiders::benchmark::TimeOptions;
use equiders::cli::{run_sweep, ModelChoice};
use equiders::ingest::fixtures::surplus_rich_fixture;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scenario = surplus_rich_fixture();
    let ratios = [1.0, 0.9, 0.8, 0.7, 0.6, 0.4, 0.2, 0.0];
    let rows = run_sweep(&scenario, &ratios, ModelChoice::Linearized, &TimeOptions::default())?;
    println!("{:>6} {:>12} {:>12} {:>10}", "ratio", "battery kWh", "rooftop kW", "inequity");
    for r in rows {
        println!("{:>6.2} {:>12.1} {:>12.1} {:>10.4}", r.ratio, r.battery_kwh, r.rooftop_kw, r.inequity);
    }
    Ok(())
}
