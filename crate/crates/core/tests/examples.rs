mod combine_pvalues {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/combine_pvalues.rs"));
}

mod partial_conjunction_curve {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/partial_conjunction_curve.rs"));
}

mod subgroup_replicability {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/subgroup_replicability.rs"));
}

mod component_extraction {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/component_extraction.rs"));
}

mod fisher_exact_ingestion {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/fisher_exact_ingestion.rs"));
}

mod nonmonotone_counterexample {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/nonmonotone_counterexample.rs"));
}

mod power_simulation {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/power_simulation.rs"));
}

mod validity_oracle {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/validity_oracle.rs"));
}

#[test]
fn combine_pvalues_orders_the_cases() {
    let v = combine_pvalues::run_example().expect("combine example should run");
    assert!(v.fisher_a < v.fisher_b);
    assert!(v.stouffer_a < v.stouffer_b);
    assert!(v.bhpc4_d < v.bhpc4_c);
}

#[test]
fn partial_conjunction_curve_runs() {
    let curves = partial_conjunction_curve::run_example().expect("curve example should run");
    assert_eq!(curves.len(), 3);
    assert!(curves[0].nondecreasing);
}

#[test]
fn subgroup_replicability_runs() {
    let c = subgroup_replicability::run_example().expect("subgroup example should run");
    assert_eq!(c.structured.r_hat, 12);
    assert!(!c.bonferroni.nondecreasing);
}

#[test]
fn component_extraction_recovers_fisher() {
    let (recovered, direct) = component_extraction::run_example().expect("extraction example should run");
    assert!((recovered.linear() - direct.linear()).abs() < 1e-10);
}

#[test]
fn fisher_exact_ingestion_runs() {
    let rows = fisher_exact_ingestion::run_example().expect("exact test example should run");
    assert_eq!(rows.len(), 18);
}

#[test]
fn nonmonotone_counterexample_runs() {
    let rows = nonmonotone_counterexample::run_example().expect("counterexample should run");
    assert_eq!(rows.len(), 16 * 3);
}

#[test]
fn power_simulation_runs() {
    let grid = power_simulation::run_example().expect("simulation example should run");
    assert_eq!(grid.rows.len(), 3 * 2 * 2 * 3);
}

#[test]
fn validity_oracle_flags_the_broken_rule() {
    let report = validity_oracle::run_example().expect("oracle example should run");
    assert!(report[0].1.iter().all(|r| r.valid));
    assert!(report[1].1.iter().all(|r| !r.valid));
    assert!(report[2].1.iter().all(|r| r.valid));
}
