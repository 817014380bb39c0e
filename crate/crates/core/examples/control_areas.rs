// Actors governed by each mode decider, and per-mode job counts.

use rmdf::consistency::repetition_vector;
use rmdf::{control_area, models, ActorKind};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    for (name, g) in [("three-branch example", models::fig1_example()), ("ingenuity", models::ingenuity())] {
        println!("{name}");
        for d in g.actors.iter().filter(|a| a.kind == ActorKind::ModeDecider) {
            let area: Vec<String> = control_area(&g, &d.id)?.into_iter().collect();
            println!("  {} controls {}", d.id, area.join(", "));
        }
        for m in &g.modes.modes {
            let rv = repetition_vector(&g, Some(&m.name))?;
            let idle: Vec<&str> = rv.iter().filter(|(_, n)| *n == 0).map(|(a, _)| a).collect();
            println!("  mode {}: idle {}", m.name, if idle.is_empty() { "-".into() } else { idle.join(", ") });
        }
    }
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
