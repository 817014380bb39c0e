// Drive the command line in-process and capture its JSON report.

use rmdf::cli::run_cli;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let spec = concat!(env!("CARGO_MANIFEST_DIR"), "/../../models/ingenuity.rmdf");
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = run_cli(["rmdf", "analyze", spec, "--set-init", "c6=0"], &mut out, &mut err);
    print!("{}", String::from_utf8(out)?);
    println!("exit code {code}");

    let mut out = Vec::new();
    let code = run_cli(["rmdf", "feasibility", spec, "--format", "json"], &mut out, &mut err);
    let report: serde_json::Value = serde_json::from_slice(&out)?;
    println!("feasibility exit {code}, {} entries", report["entries"].as_array().map_or(0, |a| a.len()));
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
