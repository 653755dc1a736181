//! Generate a random scenario and show when its microgrids run short.
//!
//! `cargo run --example generate_scenario [n] [m] [seed]`

use microdispatch::generate::{random_scenario, GenerateOptions};
use microdispatch::partitioning::check_trigger;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<u64> = std::env::args().skip(1).map(|a| a.parse()).collect::<Result<_, _>>()?;
    let n = args.first().copied().unwrap_or(30) as usize;
    let m = args.get(1).copied().unwrap_or(4) as usize;
    let seed = args.get(2).copied().unwrap_or(1);
    let s = random_scenario(&GenerateOptions::new(n, m, seed))?;
    println!("{n} buses, {} lines, partition {:?}", s.net.edges().len(), s.partition.all_members());
    let mut line = String::new();
    for k in 0..s.config.steps {
        let t = check_trigger(&s.net, &s.partition, k, s.config.horizon)?;
        line.push(if t.triggered { '#' } else { '.' });
    }
    println!("deficit over the day: {line}");
    Ok(())
}
