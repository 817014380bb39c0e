// Consistency, repetition vectors, tick and liveness of the bundled Ingenuity model.

use rmdf::consistency::{compute_hyperperiod, compute_tick, repetition_vector};
use rmdf::liveness::{check_liveness, ModeSequence};
use rmdf::models;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let g = models::ingenuity();
    let report = rmdf::validate_graph(&g);
    println!("{} actors, {} channels, valid: {}", g.actors.len(), g.channels.len(), report.is_ok());

    for mode in [None, Some("search"), Some("base")] {
        let rv = repetition_vector(&g, mode)?;
        let line: Vec<String> = rv.iter().take(6).map(|(a, n)| format!("{a}={n}")).collect();
        println!("{:>8}: {} ...", mode.unwrap_or("all"), line.join(" "));
    }

    let tick = compute_tick(&g)?;
    let hyper = compute_hyperperiod(&g)?;
    println!("tick {tick} ms, hyperperiod {} ms", hyper.length);

    let live = check_liveness(&g, &ModeSequence::AllModes)?;
    for s in &live.scenarios {
        println!("  {:<24} {}", s.label, if s.deadlock.is_none() { "live" } else { "deadlock" });
    }
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
