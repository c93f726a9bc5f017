//! Fits the self-consumption and storage lines for one household and
//! prints the sampled curve next to the fit.

use equiders::dispatch::{fit_piecewise, surplus_threshold};
use equiders::ingest::fixtures::surplus_rich_fixture;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scenario = surplus_rich_fixture();
    let a = &scenario.archetypes[0];
    let profiles = &scenario.profiles[&a.id];
    let cat = &scenario.catalog;
    let fit = fit_piecewise(profiles, a.max_rooftop_kw, cat.battery_ratio_kwh_per_kw, cat.battery_duration_hours, 12)?;

    println!("Z1 = {:.3} kW (rooftop cap {:.1} kW)", surplus_threshold(profiles), a.max_rooftop_kw);
    println!("sc ~ {:.1} d + {:.1}   rmse {:.2}", fit.sc_slope, fit.sc_intercept, fit.fit_rmse_sc);
    println!("st ~ {:.1} d + {:.1}   rmse {:.2}", fit.st_slope, fit.st_intercept, fit.fit_rmse_st);
    println!("{:>7} {:>10} {:>10} {:>10} {:>10}", "d_kw", "sc", "sc_fit", "st_bar", "st_fit");
    for p in &fit.sample_points {
        println!(
            "{:>7.3} {:>10.1} {:>10.1} {:>10.1} {:>10.1}",
            p.d_kw,
            p.sc_kwh,
            fit.sc_line(p.d_kw),
            p.st_bar_kwh,
            fit.st_line(p.d_kw)
        );
    }
    Ok(())
}
