//! Grand coalition of the feeder at the peak, solved by price coordination
//! and compared with the monolithic solve.

use microdispatch::dispatch::{solve_coalition_distributed, solve_qp, DispatchContext, DualAscentOptions};
use microdispatch::generate::pge69;
use microdispatch::simulator::SimState;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let s = pge69();
    let state = SimState::initial(&s.net, s.partition.clone());
    let ctx = DispatchContext {
        net: &s.net,
        start: 60,
        horizon: s.config.horizon,
        soc: &state.soc,
        settings: s.config.dispatch_settings(),
    };
    let members: Vec<usize> = (0..s.partition.len()).collect();
    let out = solve_coalition_distributed(&ctx, &s.partition, &members, &DualAscentOptions::default())?;
    let mono = solve_qp(&ctx.build_centralized())?;
    println!(
        "dual ascent: {} iterations, {} messages ({} values), residual {:.2e}",
        out.iterations, out.messages.messages, out.messages.values, out.residual
    );
    println!("objective {:.4} vs monolithic {:.4}", out.solution.objective, mono.objective);
    let mut prices = out.prices.clone();
    prices.retain(|((_, _, offset), _)| *offset == 0);
    for ((i, j, _), price) in prices {
        println!("  line {i}-{j}: price {price:.3}");
    }
    Ok(())
}
