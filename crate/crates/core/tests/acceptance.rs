//! One PASS/FAIL line per acceptance criterion, with the individual checks.

use hybrid_core::validation::{self, CriterionReport};

fn report(r: CriterionReport) {
    println!("{r}");
    let failed: Vec<String> = r.checks.iter().filter(|c| !c.pass).map(|c| c.to_string()).collect();
    assert!(r.pass(), "criterion {} failed:\n{}", r.id, failed.join("\n"));
}

#[test]
fn criterion_01_squeezed_photon_fidelity() {
    report(validation::criterion_1());
}

#[test]
fn criterion_02_ideal_scheme_exactness() {
    report(validation::criterion_2());
}

#[test]
fn criterion_03_probability_consistency() {
    report(validation::criterion_3());
}

#[test]
fn criterion_04_inefficient_detection_fidelity() {
    report(validation::criterion_4());
}

#[test]
fn criterion_05_asymptotic_optimum() {
    report(validation::criterion_5());
}

#[test]
fn criterion_06_target_negativity() {
    report(validation::criterion_6());
}

#[test]
fn criterion_07_heralded_negativity() {
    report(validation::criterion_7());
}

#[test]
fn criterion_08_approximate_resource_thresholds() {
    report(validation::criterion_8());
}

#[test]
fn criterion_09_down_conversion_spot_values() {
    report(validation::criterion_9());
}

#[test]
fn criterion_10_property_suites() {
    report(validation::criterion_10());
}
