//! Fault injection and reduced mode of the acceptance suite.

use halfflow::harness::acceptance::{run_criterion, RESOLUTION_SENSITIVE};
use halfflow::harness::{acceptance_suite, AcceptOptions, Outcome};

#[test]
fn corrupted_c_half_breaks_stationarity() {
    let opts = AcceptOptions { c_half_factor: 1.1, ..AcceptOptions::default() };
    let r = run_criterion(4, &opts);
    assert_eq!(r.outcome, Outcome::Fail, "{}", r.line());
}

#[test]
fn reduced_resolution_skips_refinement_criteria() {
    let opts = AcceptOptions { resolution: 64, criteria: Some(vec![1, 2, 3, 10, 11, 12, 13]), ..AcceptOptions::default() };
    let report = acceptance_suite(&opts).unwrap();
    for r in &report.results {
        if RESOLUTION_SENSITIVE.contains(&r.id) {
            assert_eq!(r.outcome, Outcome::Skipped, "{}", r.line());
            assert!(r.note.as_deref().unwrap().starts_with("skipped (under-resolved)"));
        } else {
            assert_eq!(r.outcome, Outcome::Pass, "{}", r.line());
        }
    }
}
