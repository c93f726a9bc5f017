//! Solves the linearized portfolio on a synthetic scenario and prints the mix.

use std::time::Instant;

use equiders::ingest::SyntheticSpec;
use equiders::solve::{solve_linearized, SolveOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let scenario = SyntheticSpec::new(seed, 10, 5, 8760).generate()?;
    let start = Instant::now();
    let solved = solve_linearized(&scenario, &SolveOptions::default())?;
    let s = &solved.solution;
    println!("solved in {:.2?} via {}", start.elapsed(), s.diagnostics.method);
    println!("baseline inequity   {:.3}", scenario.baseline_inequity());
    println!("inequity            {:.3}", s.inequity_objective);
    println!("annualized cost     {:.0} $/yr", s.total_annualized_cost);
    println!("rooftop PV          {:.1} kW", s.total_rooftop_kw());
    println!("batteries           {:.1} kWh", s.total_battery_kwh());
    println!("weatherized         {:.1} buildings", s.weatherized_buildings());
    println!("community solar     {:.1} kW", s.total_community_solar_kw());
    println!("community wind      {:.1} kW", s.total_community_wind_kw());
    Ok(())
}
