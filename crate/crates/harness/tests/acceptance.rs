//! The acceptance suite: one line per criterion, then a hard assertion.

use std::io::Write;

use lyapunov_harness::acceptance::{run_acceptance, AcceptanceOptions, AcceptanceReport, Fault, CRITERIA};

#[test]
fn acceptance_criteria() {
    let report = run_acceptance(&AcceptanceOptions::default());
    // written to the raw handle so the lines show up even when the test passes
    let mut out = std::io::stdout().lock();
    writeln!(out).unwrap();
    for line in report.summary_lines() {
        writeln!(out, "{line}").unwrap();
    }
    drop(out);
    assert_eq!(report.criteria.len(), CRITERIA.len());
    let traces = report.traces.iter().filter(|t| t.metric == "mean_constraint_return").count();
    assert_eq!(traces, 24, "criterion 7 records one constraint trace per algorithm and seed");
    let back = AcceptanceReport::from_json(&report.to_json().unwrap()).unwrap();
    assert_eq!(back.criteria.len(), report.criteria.len());
    assert_eq!(back.all_passed(), report.all_passed());
    let failed: Vec<_> = report.criteria.iter().filter(|c| !c.passed).map(|c| c.id).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}

#[test]
fn flipped_projection_sign_is_caught() {
    let report = run_acceptance(&AcceptanceOptions {
        only: Some(vec![4]),
        fault: Some(Fault::FlipProjectionSign),
    });
    for line in report.summary_lines() {
        println!("injected fault, expected to fail: {line}");
    }
    let c = report.criterion(4).expect("criterion 4 ran");
    assert!(!c.passed);
    assert!(!report.all_passed());
    assert_eq!(report.criteria.len(), 1);
}
