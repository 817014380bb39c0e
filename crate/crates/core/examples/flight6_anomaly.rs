// A slow Filtering Procedure job overtakes its successor through a
// first-arrival joiner; the lexicographic joiner keeps frames in order.

use rmdf::models;
use rmdf::sim::{simulate, Event, JoinerPolicy};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let g = models::ingenuity();
    let scenario = models::flight6();
    let sub = scenario.graph_for(&g)?;
    for policy in [JoinerPolicy::NaiveFirstArrival, JoinerPolicy::RmdfLexicographic] {
        let mut cfg = scenario.config.clone();
        cfg.joiner_policy = policy;
        let trace = simulate(&sub, &cfg)?;
        println!("{policy:?}: Feature Match sees {:?}", trace.arrivals("Feature Match", "cj_fm"));
        for e in trace.discards() {
            if let Event::TokenDiscard { time, job, got, last_accepted, .. } = e {
                println!("  job {job} at {time} ms dropped frame {got} (already at {last_accepted})");
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
