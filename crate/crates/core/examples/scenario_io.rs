//! Load the bundled feeder, print its layout and check the JSON round trip.

use microdispatch::model::validate_partition;
use microdispatch::scenario::{load_scenario, parse_scenario};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/pge69.json");
    let scenario = load_scenario(path)?;
    let net = &scenario.net;
    println!(
        "{} buses, {} lines, {} microgrids, profiles of {} steps",
        net.len(),
        net.edges().len(),
        scenario.partition.len(),
        net.profile_len()
    );
    for (p, members) in scenario.partition.all_members().iter().enumerate() {
        let gen: f64 = members.iter().map(|&i| net.bus(i).gen_capacity).sum();
        let storage = members.iter().filter(|&&i| net.bus(i).storage.is_some()).count();
        println!("  M{p}: {:>2} buses, {gen:>6.0} kW generation, {storage} storage", members.len());
    }
    validate_partition(net, scenario.partition.all_members())?;

    let again = parse_scenario(&scenario.to_json())?;
    assert_eq!(again, scenario);
    println!("round trip ok");
    Ok(())
}
