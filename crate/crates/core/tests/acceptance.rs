//! The fifteen acceptance criteria at their stated tolerances, one printed
//! line per criterion. Runs without the libtest harness so the table is
//! always shown.

use std::process::ExitCode;

use halfflow::harness::{acceptance_suite, AcceptOptions};

fn main() -> ExitCode {
    let report = match acceptance_suite(&AcceptOptions::default()) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("acceptance suite did not run: {e}");
            return ExitCode::FAILURE;
        }
    };
    println!("{}", report.table());
    let failed = report.failed();
    if report.results.len() != 15 || !failed.is_empty() {
        eprintln!("acceptance: {} criteria run, failed {:?}", report.results.len(), failed);
        return ExitCode::FAILURE;
    }
    println!("acceptance: all 15 criteria passed");
    ExitCode::SUCCESS
}
