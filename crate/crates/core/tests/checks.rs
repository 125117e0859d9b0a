use fisher_stefan::checks::{run_selected, CheckOptions};

#[test]
fn quick_criteria_report_in_order() {
    let report = run_selected(&[3, 1, 2], &CheckOptions::default());
    let ids: Vec<u32> = report.results.iter().map(|r| r.id).collect();
    assert_eq!(ids, vec![1, 2, 3]);
    assert!(report.get(2).unwrap().passed);
    assert!(report.get(3).unwrap().passed);
    let mesh = report.get(1).unwrap();
    assert!(mesh.details[0].starts_with("ok") && mesh.details[0].contains("expansion factor"));
    assert_eq!(report.passed + report.failed, 3);
}

#[test]
fn perturbed_stencil_breaks_conservation() {
    let opts = CheckOptions {
        stencil_perturbation: Some(1.05),
    };
    let report = run_selected(&[5], &opts);
    let conservation = report.get(5).unwrap();
    assert!(!conservation.passed, "{:#?}", conservation.details);
    let json = serde_json::to_value(&report).unwrap();
    assert_eq!(json["stencil_perturbation"], 1.05);
}
