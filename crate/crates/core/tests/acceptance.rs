//! One PASS/FAIL line per acceptance criterion; exits non-zero on any failure.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::criteria::{self, Outcome};

type Check = (&'static str, fn() -> Outcome);

const BUDGET: Duration = Duration::from_secs(300);

fn main() -> ExitCode {
    let checks: [Check; 9] = [
        ("compiler-equivalence", criteria::compiler_equivalence),
        ("parser-roundtrip", criteria::parser_roundtrip),
        ("skeleton", criteria::skeleton_check),
        ("spqg", criteria::spqg_suite),
        ("spqr", criteria::spqr_suite),
        ("arpe", criteria::arpe_suite),
        ("refinement-recovery", criteria::refinement_recovery),
        ("metrics", criteria::metrics_check),
        ("end-to-end", criteria::end_to_end),
    ];
    let start = Instant::now();
    let mut failed = 0;
    for (name, check) in checks {
        let t = Instant::now();
        match check() {
            Ok(detail) => println!("PASS {name}: {detail} ({:.1}s)", t.elapsed().as_secs_f64()),
            Err(why) => {
                failed += 1;
                println!("FAIL {name}: {why}");
            }
        }
    }
    let total = start.elapsed();
    if total < BUDGET {
        println!("PASS runtime: {:.1}s with mock backends, budget {}s", total.as_secs_f64(), BUDGET.as_secs());
    } else {
        failed += 1;
        println!("FAIL runtime: {:.1}s exceeds {}s", total.as_secs_f64(), BUDGET.as_secs());
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
