//! Generates a synthetic scenario, writes it in the on-disk layout and
//! reads it back.

use equiders::ingest::{load_scenario_dir, write_scenario, SyntheticSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::args().nth(1).unwrap_or_else(|| "synthetic-scenario".into());
    let scenario = SyntheticSpec::new(7, 3, 4, 8760).generate()?;
    write_scenario(&scenario, &dir)?;
    let back = load_scenario_dir(&dir)?;

    println!("wrote {} tracts and {} archetypes to {dir}", back.tracts.len(), back.archetypes.len());
    for a in back.archetypes.iter().take(5) {
        println!(
            "{:<8} tract {:<5} homes {:>3}  income {:>8.0}  burden {:.3}",
            a.id.0,
            a.tract_id.0,
            a.count,
            a.annual_income,
            a.baseline_burden()
        );
    }
    println!("baseline inequity {:.4}", back.baseline_inequity());
    Ok(())
}
