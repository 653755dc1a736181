//! Local imbalance of each feeder microgrid at night and at the evening peak.

use microdispatch::generate::pge69;
use microdispatch::partitioning::check_trigger;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let s = pge69();
    let h = s.config.horizon;
    for k in [0, 60] {
        let report = check_trigger(&s.net, &s.partition, k, h)?;
        println!("k = {k}: triggered = {}, deficient = {:?}", report.triggered, report.deficient);
        for (p, r) in report.reports.iter().enumerate() {
            let worst = r.imbalance.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            println!(
                "  M{p}: worst step imbalance {worst:>8.1} kW, imbalance cost {:>8.1}",
                r.cost
            );
        }
    }
    Ok(())
}
