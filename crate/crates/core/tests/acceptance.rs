//! Prints one PASS/FAIL line per acceptance criterion and fails the target
//! if any criterion fails. Set `LQBE_SEED` to vary the random samples.

use std::process::ExitCode;

use lqbe_core::acceptance::{run, Context};

fn main() -> ExitCode {
    let seed = std::env::var("LQBE_SEED")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(0);
    let ctx = Context::new(seed);
    let outcomes = run(&ctx, &[]);
    for o in &outcomes {
        println!("{}", o.line());
    }
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    println!("{} of {} criteria passed", outcomes.len() - failed, outcomes.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
