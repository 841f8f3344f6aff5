//! Runs the randomized property checks that back `bary verify`.

use hbary::cli::{run_suite, Suite};

fn main() -> hbary::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    for row in run_suite(Suite::All, seed, 1.0)? {
        println!(
            "{:<36} {:>6} {:>12.3e} {:?}",
            row.check, row.instances, row.max_violation, row.verdict
        );
    }
    Ok(())
}
