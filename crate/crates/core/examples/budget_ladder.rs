//! Inequity as the annual budget grows from zero to the unconstrained spend.

use equiders::ingest::SyntheticSpec;
use equiders::solve::{solve_linearized, SolveOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scenario = SyntheticSpec::new(3, 3, 3, 8760).generate()?;
    let opts = SolveOptions::default();
    let free = solve_linearized(&scenario, &opts)?.solution;
    let full = free.total_annualized_cost;
    println!("unconstrained spend {full:.0} $/yr, inequity {:.4}", free.inequity_objective);
    println!("{:>10} {:>12} {:>10}", "budget", "spent", "inequity");
    for k in 0..=5 {
        let budget = full * k as f64 / 5.0;
        let s = solve_linearized(&scenario.with_budget(Some(budget)), &opts)?.solution;
        println!("{budget:>10.0} {:>12.0} {:>10.4}", s.total_annualized_cost, s.inequity_objective);
    }
    Ok(())
}
