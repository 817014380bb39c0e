// Single-core schedule of the flight-6 replay as text and SVG.

use rmdf::models;
use rmdf::sim::{export_gantt, simulate, GanttFormat};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let scenario = models::flight6();
    let g = scenario.graph_for(&models::ingenuity())?;
    let trace = simulate(&g, &scenario.config)?;
    print!("{}", export_gantt(&trace, GanttFormat::Text));

    let path = std::env::temp_dir().join("rmdf-flight6.svg");
    std::fs::write(&path, export_gantt(&trace, GanttFormat::Svg))?;
    println!("svg written to {}", path.display());
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
