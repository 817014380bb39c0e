// Exact time arithmetic: periods, gcd/lcm of rational sets, decimal rendering.

use rmdf::{rat, rat_gcd_set, rat_lcm_set};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let periods = [rat(100, 3)?, rat(2, 1)?, rat(20, 1)?, rat(8, 1)?];
    let step = rat_gcd_set(&periods)?;
    let hyper = rat_lcm_set(&periods)?;
    println!("periods: {}", periods.map(|p| p.to_string()).join(", "));
    println!("gcd {step} ms, lcm {hyper} ms, {} steps of the gcd", &hyper / &step);

    let window = &rat(336, 5)? - &rat(200, 3)?;
    println!("Camera job 3 window: {window} = {} ms", window.to_decimal(3));
    println!("floor {} ceil {} fract {}", window.floor(), window.ceil(), window.fract());
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
