//! Writes the linearized model of a fixture as MPS, parses it back and
//! checks the round trip.

use equiders::dispatch::fit_scenario;
use equiders::ingest::fixtures::affine_fixture;
use equiders::linmodel::{build_linearized, export_mps, parse_mps};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scenario = affine_fixture();
    let fits = fit_scenario(&scenario, 16)?;
    let (model, _map) = build_linearized(&scenario, &fits)?;
    let first = export_mps(&model);
    let parsed = parse_mps(&first.text)?;
    let second = export_mps(&parsed);

    println!("{} columns, {} rows", model.num_vars(), model.num_rows());
    println!("round trip identical: {}", first.text == second.text);
    if let Some(names) = &first.names {
        for (mps, original) in names.columns.iter().take(4) {
            println!("  {mps} = {original}");
        }
    }
    print!("{}", first.text.lines().take(12).collect::<Vec<_>>().join("\n"));
    println!();
    Ok(())
}
