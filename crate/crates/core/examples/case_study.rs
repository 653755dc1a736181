//! Full-day run on the 69-bus feeder with benchmarks, then a summary of when
//! microgrids had to cooperate.
//!
//! `cargo run --release --example case_study [out_dir]`

use std::time::Instant;

use microdispatch::generate::pge69;
use microdispatch::simulator::run;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scenario = pge69();
    let mut config = scenario.config.clone();
    config.benchmark = true;
    let t0 = Instant::now();
    let log = run(&scenario.net, &scenario.partition, &config)?;
    println!("simulated {} steps in {:.1}s", log.steps.len(), t0.elapsed().as_secs_f64());

    let merged: Vec<usize> = log.steps.iter().filter(|s| !s.all_singletons()).map(|s| s.k).collect();
    let grand: Vec<usize> = log.steps.iter().filter(|s| s.grand_coalition()).map(|s| s.k).collect();
    let repartitioned = log.steps.iter().filter(|s| s.partition_changed).count();
    println!("steps with merged coalitions: {merged:?}");
    println!("steps with the grand coalition: {}", grand.len());
    println!("partition changes: {repartitioned}");

    let worst_gap = log.steps.iter().filter_map(|s| s.gap).fold(0.0f64, f64::max);
    let worst_residual = log.steps.iter().map(|s| s.feasibility_residual).fold(0.0, f64::max);
    let total: f64 = log.steps.iter().map(|s| s.j_star).sum();
    println!("total cost {total:.1}, worst J*-J° {worst_gap:.3e}, worst residual {worst_residual:.2e}");
    for s in log.steps.iter().filter(|s| s.k % 8 == 0 || s.k == 57) {
        println!(
            "k={:>2} coalitions={} J*={:>12.2} J°={:>12.2} J^b={:>12.2} dual msgs={}",
            s.k,
            s.coalitions.len(),
            s.j_star,
            s.j_opt.unwrap_or(f64::NAN),
            s.j_lower.unwrap_or(f64::NAN),
            s.messages.dual_ascent.messages
        );
    }

    if let Some(dir) = std::env::args().nth(1) {
        log.write_results(&dir)?;
        println!("results written to {dir}");
    }
    Ok(())
}
