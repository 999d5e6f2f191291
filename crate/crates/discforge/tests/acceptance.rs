//! Acceptance grid as an integration test target: one test per criterion,
//! each printing its pass/fail line (run with `-- --nocapture` to see the
//! lines for passing tests too). Parameters, tolerances, and wall-clock
//! budgets are pinned inside `discforge::criteria`.

use discforge::criteria::run_criterion;

fn check(id: u8) {
    let r = run_criterion(id).expect("criterion runner errored");
    println!(
        "criterion {:>2}  {:<44}  {}  ({:.1}s)  {}",
        r.id,
        r.name,
        if r.pass { "PASS" } else { "FAIL" },
        r.elapsed_secs,
        r.details
    );
    assert!(r.pass, "criterion {} ({}) failed: {}", r.id, r.name, r.details);
}

#[test]
fn criterion_01_unit_distance_edge_bound() {
    check(1);
}

#[test]
fn criterion_02_sampled_packing_weight_bound() {
    check(2);
}

#[test]
fn criterion_03_packing_size_growth() {
    check(3);
}

#[test]
fn criterion_04_chaining_structure_audit() {
    check(4);
}

#[test]
fn criterion_05_partial_coloring_contract() {
    check(5);
}

#[test]
fn criterion_06_size_sensitive_envelope_growth() {
    check(6);
}

#[test]
fn criterion_07_bounded_degree_coloring() {
    check(7);
}

#[test]
fn criterion_08_certified_sample_budget() {
    check(8);
}

#[test]
fn criterion_09_distance_metric_and_equivalence() {
    check(9);
}

#[test]
fn criterion_10_artifact_determinism() {
    check(10);
}
