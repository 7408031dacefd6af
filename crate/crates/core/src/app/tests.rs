use super::*;

fn spec_file(name: &str) -> String {
    std::fs::read_to_string(format!("{}/../../specs/{name}", env!("CARGO_MANIFEST_DIR"))).unwrap()
}

fn quiet() -> RunOptions {
    RunOptions::default()
}

fn class_of(doc: &ReportDocument, selected: &str) -> Classification {
    doc.criteria.iter().find(|s| s.selected == selected).unwrap().verdict.classification
}

#[test]
fn unbound_parameter_is_a_usage_error() {
    let err = run_analyze("[potential]\nexpr = \"c/t^2\"\n", &quiet()).unwrap_err();
    assert_eq!(error_exit_code(&err), EXIT_USAGE);
    assert!(err.to_string().contains('c'), "{err}");
}

#[test]
fn sign_hint_compatibility() {
    let src = "[potential]\nexpr = \"sin(t)\"\nsign_hint = \"sign_changing\"\n[criteria]\nselect = [\"hille_nehari\"]\n";
    assert!(matches!(run_analyze(src, &quiet()), Err(AppError::Spec(_))));
}

#[test]
fn constant_spec() {
    let doc = run_analyze(&spec_file("constant.toml"), &quiet()).unwrap();
    assert_eq!(doc.exit_code, EXIT_OK);
    assert_eq!(class_of(&doc, "check_first_zero"), Classification::FirstZero);
    assert_eq!(class_of(&doc, "mrv_first_zero"), Classification::FirstZero);
    let zero = doc.oracle.as_ref().unwrap().first_zero.unwrap();
    assert!((zero - std::f64::consts::PI).abs() < 1e-8);
    assert!(doc.agreement.iter().all(|a| a.agreement != Agreement::Contradiction));
    let json = doc.to_json();
    assert!(json.contains("\"schema_version\": 1"));
    assert!(json.contains("spec_source"));
    assert!(!json.contains("generated_at_unix"));
    assert!(doc.to_text().contains("first zero 3.14159265"));
}

#[test]
fn euler_half_spec() {
    let doc = run_analyze(&spec_file("euler_half.toml"), &quiet()).unwrap();
    assert_eq!(class_of(&doc, "refined_nonoscillation"), Classification::Positive);
    let o = doc.oracle.as_ref().unwrap();
    assert_eq!(o.zero_count, 0);
    assert!(o.envelope.as_ref().unwrap().c_fit.unwrap() > 0.0);
    assert_eq!(doc.exit_code, EXIT_OK);
}

#[test]
fn weighted_frame() {
    let doc = run_analyze(&spec_file("weighted_bump.toml"), &quiet()).unwrap();
    let o = doc.oracle.as_ref().unwrap();
    assert!(o.zero_count >= 1);
    assert!(o.origin_sensitivity.unwrap() < 1e-6);
    assert_eq!(doc.exit_code, EXIT_OK);
}

#[test]
fn non_identity_cp_frame_maps_bounds() {
    let src = "[potential]\nexpr = \"1\"\n[weight]\nname = \"power\"\nm = 4.0\n[criteria]\nselect = [\"check_first_zero\"]\n[oracle]\nhorizon = 20.0\n";
    let doc = run_analyze(src, &quiet()).unwrap();
    let v = &doc.criteria[0].verdict;
    if v.classification == Classification::FirstZero {
        assert!(v.witnesses.contains_key("bound_r"));
        assert!(v.bound.unwrap() >= std::f64::consts::PI);
    }
    assert_ne!(doc.exit_code, EXIT_CONTRADICTION);
}

#[test]
fn certify_exit_codes() {
    let hyper = run_certify(&spec_file("certify_hyperbolic.toml"), &quiet()).unwrap();
    assert_eq!(hyper.exit_code, EXIT_INCONCLUSIVE);
    assert!(!hyper.certificate.as_ref().unwrap().compact);
    let bump = run_certify(&spec_file("certify_bump.toml"), &quiet()).unwrap();
    assert_eq!(bump.exit_code, EXIT_OK);
    let cert = bump.certificate.as_ref().unwrap();
    assert!(cert.compact);
    assert!(bump.oracle.as_ref().unwrap().first_zero.unwrap() <= cert.r_bar.unwrap());
    assert!(run_certify("[potential]\nexpr = \"1\"\n", &quiet()).is_err());
}

#[test]
fn curve_tables() {
    let csv = run_curve(&spec_file("curve_tlog2.toml"), &quiet()).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "r,chi_0,chi_1");
    assert_eq!(lines.len(), 41);
    for l in &lines[1..] {
        let f: Vec<f64> = l.split(',').map(|x| x.parse().unwrap()).collect();
        let (r, lr) = (f[0], f[0].ln());
        assert!((f[1] * 4.0 * r * r * lr * lr - 1.0).abs() < 1e-6, "{l}");
        let ll = lr.ln();
        assert!((f[2] * 4.0 * r * r * lr * lr * ll * ll - 1.0).abs() < 1e-6, "{l}");
    }
    let flat = curve_table(&Weight::power(3.0), [1.0, 10.0], 5, 0).unwrap();
    for l in flat.lines().skip(1) {
        let f: Vec<f64> = l.split(',').map(|x| x.parse().unwrap()).collect();
        assert!((f[1] * 4.0 * f[0] * f[0] - 1.0).abs() < 1e-9);
    }
    assert_eq!(curve_table(&Weight::power(3.0), [10.0, 1.0], 5, 2).unwrap(), "r,chi_0,chi_1,chi_2\n");
}

#[test]
fn overrides_are_recorded() {
    let opts = RunOptions { horizon: Some(12.0), tolerance: Some(1e-9), depth: None, timestamp: false };
    let doc = run_oracle("[potential]\nexpr = \"1\"\n", &opts).unwrap();
    assert_eq!(doc.oracle.as_ref().unwrap().zero_count, 3);
    assert_eq!(doc.reproducibility.effective_spec.oracle.horizon, 12.0);
    assert_eq!(doc.reproducibility.settings.ode.rtol, 1e-9);
    assert!(doc.trajectory_csv.as_ref().unwrap().starts_with("t,g,gprime,logscale\n"));
}
