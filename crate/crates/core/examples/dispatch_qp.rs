//! Build and solve the dispatch QP of a single bus, then print its listing.

use microdispatch::dispatch::{solve_qp, DispatchContext, DispatchSettings};
use microdispatch::model::{Bus, NetworkModel, Profile};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // Load 10 kW served by a generator and the main grid at equal weight.
    let mut bus = Bus::load_only(0, Profile::constant(10.0, 2));
    bus.gen_capacity = 50.0;
    bus.main_grid = true;
    let net = NetworkModel::new(vec![bus], vec![])?;
    let soc = [0.0];
    let ctx = DispatchContext {
        net: &net,
        start: 0,
        horizon: 2,
        soc: &soc,
        settings: DispatchSettings::default(),
    };
    let problem = ctx.build_centralized();
    let sol = solve_qp(&problem)?;
    println!("objective {} in {} iterations", sol.objective, sol.iterations);
    for c in problem.first_controls(&sol.values) {
        println!("bus {}: generation {:.6}, import {:.6}", c.bus, c.generation, c.import);
    }
    problem.write_listing(&mut std::io::stdout().lock())?;
    Ok(())
}
