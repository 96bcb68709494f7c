//! Coverage study for one simulation design.
//!
//! cargo run --release --example monte_carlo -- set1_strong 200 1000

use std::time::Instant;

use ivsurv::simulate::{run_mc, DesignSet, DgpSpec, McConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let set: DesignSet = args.next().as_deref().unwrap_or("set1_weak").parse()?;
    let reps: usize = args.next().map_or(Ok(100), |s| s.parse())?;
    let n: usize = args.next().map_or(Ok(1000), |s| s.parse())?;

    let start = Instant::now();
    let config = McConfig { reps, ..McConfig::default() };
    let report = run_mc(&DgpSpec::new(set, n, 2024), &config)?;
    println!(
        "{set}: n = {n}, B = {reps}, {} failed, {:.1}% censored",
        report.failures,
        100.0 * report.censored_fraction
    );
    println!("{:<9} {:>5} {:>9} {:>9} {:>9} {:>9}", "method", "q", "truth", "bias", "rmse", "coverage");
    for c in &report.cells {
        println!(
            "{:<9} {:>5.2} {:>9.4} {:>9.4} {:>9.4} {:>8.1}%",
            c.method.as_str(),
            c.quantile,
            c.true_ate,
            c.bias,
            c.rmse,
            100.0 * c.coverage
        );
    }
    eprintln!("{:.1} s", start.elapsed().as_secs_f64());
    Ok(())
}
