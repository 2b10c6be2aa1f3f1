use tsf_core::harness::{run_suite, SuiteSizes};

#[test]
fn all_suites_pass_in_two_dimensions() {
    let r = run_suite(
        &["all"],
        20240611,
        SuiteSizes {
            n: 2,
            m: 8,
            draws: 50,
        },
    )
    .unwrap();
    for c in r.cases.iter().filter(|c| !c.passed) {
        eprintln!(
            "{} {} value={:e} margin={:e}",
            c.suite, c.case, c.value, c.margin
        );
    }
    assert!(r.all_passed(), "{} failures", r.failures());
}

#[test]
fn all_suites_pass_in_three_dimensions() {
    let r = run_suite(
        &["all"],
        7,
        SuiteSizes {
            n: 3,
            m: 4,
            draws: 20,
        },
    )
    .unwrap();
    for c in r.cases.iter().filter(|c| !c.passed) {
        eprintln!(
            "{} {} value={:e} margin={:e}",
            c.suite, c.case, c.value, c.margin
        );
    }
    assert!(r.all_passed(), "{} failures", r.failures());
}
