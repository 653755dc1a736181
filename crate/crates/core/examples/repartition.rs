//! Boundary-node repartitioning on a four-bus path where the second
//! microgrid cannot cover its load.

use microdispatch::dispatch::{DispatchContext, DispatchSettings};
use microdispatch::model::{Bus, NetworkModel, Partition, Profile};
use microdispatch::partitioning::{check_trigger, repartition, RepartitionOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let loads = [0.0, 10.0, 60.0, 10.0];
    let mut buses: Vec<Bus> = loads
        .iter()
        .enumerate()
        .map(|(i, &d)| Bus::load_only(i, Profile::constant(d, 1)))
        .collect();
    buses[0].gen_capacity = 100.0;
    let net = NetworkModel::new(buses, vec![(0, 1), (1, 2), (2, 3)])?;
    let part = Partition::from_members(&net, vec![vec![0, 1], vec![2, 3]])?;
    println!("deficient before: {:?}", check_trigger(&net, &part, 0, 1)?.deficient);

    let soc = vec![0.0; net.len()];
    let ctx = DispatchContext {
        net: &net,
        start: 0,
        horizon: 1,
        soc: &soc,
        settings: DispatchSettings::default(),
    };
    let options = RepartitionOptions {
        alpha: 1e4,
        max_iterations: 50,
        seed: 0,
    };
    let (next, trace) = repartition(&ctx, &part, &options)?;
    for s in &trace.steps {
        println!(
            "turn {} M{} offers {:?}: chosen {:?}, accepted {}, cost {:.1} -> {:.1}",
            s.iteration, s.proposer, s.node, s.chosen, s.accepted, s.cost_before, s.cost_after
        );
    }
    println!("final partition {:?}, {} messages", next.all_members(), trace.messages.messages);
    Ok(())
}
