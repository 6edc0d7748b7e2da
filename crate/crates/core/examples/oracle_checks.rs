//! Runs every seeded oracle check and prints its measurements.

use mpf::harness::checks::{run_check, Check};

fn main() -> mpf::Result<()> {
    for check in [Check::Gradient, Check::Taylor, Check::Convexity, Check::DetailedBalance, Check::Stationarity] {
        let outcome = run_check(check, 8, 0)?;
        println!("{check:?}: {}", if outcome.pass() { "pass" } else { "FAIL" });
        for m in &outcome.measurements {
            println!("    {:<36} {:>10.3e}  limit {:.0e}", m.name, m.value, m.threshold);
        }
    }
    Ok(())
}
