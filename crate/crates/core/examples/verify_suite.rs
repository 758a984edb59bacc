//! Runs a verification suite and prints its summary table.
//!
//! ```text
//! cargo run --release --example verify_suite -- semigroup
//! ```

use membrane_bm::verify::report::{summary_table, tally};
use membrane_bm::verify::suite::{run_suite, SuiteOptions};

fn main() -> membrane_bm::Result<()> {
    let suite = std::env::args().nth(1).unwrap_or_else(|| "reductions".into());
    let opts = SuiteOptions {
        timings: true,
        ..SuiteOptions::default()
    };
    let reports = run_suite(&suite, &opts)?;
    print!("{}", summary_table(&reports));
    let slowest = reports.iter().max_by_key(|r| r.runtime_ms).expect("suite is not empty");
    println!("slowest check: {} ({} ms)", slowest.check_id, slowest.runtime_ms.unwrap_or(0));
    let (_, failed) = tally(&reports);
    if failed > 0 {
        std::process::exit(1);
    }
    Ok(())
}
