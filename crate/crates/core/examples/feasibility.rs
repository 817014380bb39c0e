// Largest admissible WCET per actor, before and after slowing the camera.

use rmdf::timing::check_feasibility;
use rmdf::{models, rat};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let mut g = models::ingenuity();
    let report = check_feasibility(&g)?;
    for e in report.entries.iter().filter(|e| e.min_window.is_some()).take(8) {
        let bound = e.min_window.as_ref().unwrap();
        println!("{:<20} max wcet {:>6} ({})", e.actor, bound.to_string(), bound.to_decimal(2));
    }
    println!("feasible: {}", report.pass);

    g.actor_mut("Camera").ok_or("no camera")?.wcet = rat(3, 5)?;
    let slowed = check_feasibility(&g)?;
    for e in slowed.failures() {
        println!("fails: {} wcet {} > {}", e.actor, e.wcet, e.min_window.as_ref().unwrap());
    }
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
