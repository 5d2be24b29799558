//! Full acceptance suite: one pass/fail line per criterion, then the
//! measured quantities. Exits nonzero when any criterion fails.

use std::process::ExitCode;

use nsv_core::verify::{verify, VerifySetup};

fn main() -> ExitCode {
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return ExitCode::SUCCESS;
    }
    let work = tempfile::tempdir().expect("temporary directory");
    let report = match verify(&VerifySetup::default(), work.path()) {
        Ok(r) => r,
        Err(e) => {
            println!("acceptance suite aborted: {e}");
            return ExitCode::FAILURE;
        }
    };
    println!("\n{}", report.render());
    let failed: Vec<u8> = report.checks.iter().filter(|c| !c.passed).map(|c| c.id).collect();
    if failed.is_empty() {
        println!("acceptance: all criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failing criteria {failed:?}");
        ExitCode::FAILURE
    }
}
