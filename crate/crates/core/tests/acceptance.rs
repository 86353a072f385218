//! Acceptance suite: one test per numbered criterion, each printing its
//! pass/fail line. Run with `cargo test -p loopbeam --test acceptance`
//! (or `-- --nocapture` to see the lines for passing criteria too).

use loopbeam::acceptance::run_criterion;

fn check(id: usize) {
    let report = run_criterion(id);
    println!("{}", report.line());
    assert!(report.passed, "{}", report.line());
}

#[test]
fn criterion_01_mode_normalization() {
    check(1);
}

#[test]
fn criterion_02_propagation_oracle_equivalence() {
    check(2);
}

#[test]
fn criterion_03_weak_probe_validity() {
    check(3);
}

#[test]
fn criterion_04_lobe_positions() {
    check(4);
}

#[test]
fn criterion_05_lobe_rotation() {
    check(5);
}

#[test]
fn criterion_06_od_visibility_trend() {
    check(6);
}

#[test]
fn criterion_07_spectrum() {
    check(7);
}

#[test]
fn criterion_08_dark_state_annihilation() {
    check(8);
}

#[test]
fn criterion_09_berry_phase() {
    check(9);
}

#[test]
fn criterion_10_adiabatic_loop() {
    check(10);
}

#[test]
fn criterion_11_gauge_invariance() {
    check(11);
}

#[test]
fn criterion_12_protocol_end_to_end() {
    check(12);
}
