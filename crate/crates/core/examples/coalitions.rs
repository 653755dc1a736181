//! Coalition formation on the feeder during the evening peak.

use microdispatch::coalition::{form_coalitions, outcome_is_terminal};
use microdispatch::generate::pge69;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let s = pge69();
    let h = s.config.horizon;
    for k in [40, 50, 60] {
        let out = form_coalitions(&s.net, &s.partition, k, h)?;
        println!("k = {k}: {} iterations, coalitions {:?}", out.iterations, out.structure.coalitions());
        for e in &out.events {
            println!(
                "  round {}: M{} asked {:?}, merged with M{} -> {:?}",
                e.iteration, e.initiator, e.candidates, e.chosen, e.merged
            );
        }
        assert!(outcome_is_terminal(&s.net, &out.structure, k, h)?);
    }
    Ok(())
}
