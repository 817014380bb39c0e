// Release times, deadlines and execution windows for the vision chain.

use rmdf::models;
use rmdf::timing::{timing_table, Horizon};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let g = models::ingenuity();
    let table = timing_table(&g, &Horizon::Jobs(3))?;
    println!("hyperperiod {} ms", table.hyperperiod);
    for actor in ["Camera", "Feature Detection", "Controlled Joiner", "Feature Match"] {
        for row in table.actor_rows(actor) {
            let show = |v: &Option<rmdf::Rational>| v.as_ref().map_or("-".into(), |r| r.to_string());
            println!(
                "{:<18} {}  release {:>10}  deadline {:>6}  window {:>7}",
                row.actor,
                row.job,
                row.release.to_string(),
                show(&row.deadline),
                show(&row.window)
            );
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
