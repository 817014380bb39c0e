// Removing the initial token on c6 starves the navigation loop.

use rmdf::liveness::{check_liveness, ModeSequence};
use rmdf::{models, Rational};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let g = models::ingenuity().with_initial_tokens("c6", Rational::zero())?;
    let report = check_liveness(&g, &ModeSequence::AllModes)?;
    match report.first_deadlock() {
        None => println!("live"),
        Some((scenario, d)) => {
            println!("scenario {scenario}: deadlock at tick {} ({} ms)", d.tick, d.time);
            println!("  {} job {} cannot fire", d.blocked, d.blocked_job);
            println!("  starved: {} job {}", d.actor, d.job);
            if let (Some(c), Some(deficit)) = (&d.channel, &d.deficit) {
                println!("  channel {c} is short by {deficit} tokens");
            }
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
