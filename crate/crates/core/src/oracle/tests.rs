use std::collections::BTreeMap;
use std::f64::consts::PI;

use super::*;
use crate::criteria::{EvidenceGrade, Verdict};

fn pot(s: &str) -> PotentialSpec<f64> {
    PotentialSpec::parse(s, &BTreeMap::new()).unwrap()
}

#[test]
fn harmonic_zeros() {
    let rep = integrate_cp(&pot("1"), 35.0).unwrap();
    assert_eq!(rep.count, 11);
    for (k, z) in rep.zeros.iter().enumerate() {
        assert!((z - (k + 1) as f64 * PI).abs() < 1e-7, "zero {k}: {z}");
    }
    assert!((rep.zeros[0] - PI).abs() < 1e-8);
    assert_eq!(rep.terminated, Termination::HorizonReached);
}

#[test]
fn euler_half_trajectory() {
    let cfg = OdeConfig::default().with_sampling(Sampling::log_grid(0.01, 100.0, 50));
    let rep = integrate_cp_with(&pot("0.25/(1+t)^2"), InitialData::standard(0.0), 100.0, &cfg).unwrap();
    assert_eq!(rep.count, 0);
    for s in &rep.trajectory {
        let exact = (1.0 + s.t).sqrt() * s.t.ln_1p();
        assert!((s.value() / exact - 1.0).abs() < 1e-6, "t = {}", s.t);
    }
}

#[test]
fn renormalisation_keeps_growth() {
    let rep = integrate_cp(&pot("-1"), 800.0).unwrap();
    assert_eq!(rep.count, 0);
    let last = rep.trajectory.last().unwrap();
    // sinh(800) ≈ e^800 / 2
    assert!((last.ln_abs() - (800.0 - 2f64.ln())).abs() < 1e-6, "{}", last.ln_abs());
    assert!(last.logscale > 0.0);
}

#[test]
fn weighted_matches_unweighted() {
    // z = sin(r)/r for v = r², A = 1
    let v = Weight::<f64>::power(3.0);
    let rep = integrate_weighted(&v, &pot("1"), 0.0, 1.0, 0.0, 10.0, &OdeConfig::default()).unwrap();
    assert_eq!(rep.count, 3);
    for (k, z) in rep.zeros.iter().enumerate() {
        assert!((z - (k + 1) as f64 * PI).abs() < 1e-6);
    }
    let sens = origin_sensitivity(&v, &pot("1"), 1.0, 10.0, &OdeConfig::default()).unwrap();
    assert!(sens < 1e-6);
}

#[test]
fn trivial_weighted_problem_is_constant() {
    let v = Weight::<f64>::power(3.0);
    let cfg = OdeConfig::default().with_sampling(Sampling::log_grid(0.1, 50.0, 20));
    let rep = integrate_weighted(&v, &PotentialSpec::<f64>::zero(), 0.0, 1.0, 0.0, 50.0, &cfg).unwrap();
    assert!(rep.trajectory.iter().all(|s| (s.value() - 1.0).abs() < 1e-14));
}

#[test]
fn invalid_inputs() {
    assert!(matches!(integrate_cp(&pot("1"), -1.0), Err(OracleError::InvalidHorizon { .. })));
    assert!(matches!(integrate_cp(&pot("log(t-3)"), 10.0), Err(OracleError::PotentialNotFinite { .. })));
}

#[test]
fn csv_layout() {
    let cfg = OdeConfig::default().with_sampling(Sampling::At(vec![1.0, 2.0]));
    let rep = integrate_cp_with(&pot("1"), InitialData::standard(0.0), 3.0, &cfg).unwrap();
    let csv = rep.to_csv();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "t,g,gprime,logscale");
    assert!(lines.len() >= 3);
    assert!(lines[1].starts_with("1.0,"));
    assert!(!csv.contains('\r'));
}

#[test]
fn envelope_fit() {
    let cfg = OdeConfig::default().with_sampling(Sampling::log_grid(1.0, 1e6, 200));
    let rep = integrate_cp_with(&pot("0.25/(1+t)^2"), InitialData::standard(0.0), 1e6, &cfg).unwrap();
    let fit = growth_envelope_fit(&rep, |t: f64| t.sqrt() * t.ln()).unwrap();
    assert!((fit.c_least_squares - 1.0).abs() < 0.05, "{fit:?}");
    let sine = integrate_cp_with(&pot("1"), InitialData::standard(0.0), 10.0, &OdeConfig::default()).unwrap();
    assert!(matches!(growth_envelope_fit(&sine, |t: f64| t), Err(OracleError::EnvelopeViolated { .. })));
}

#[test]
fn agreement_examples() {
    let positive = Verdict::new("x", Classification::Positive, Some(EvidenceGrade::AsymptoticEvidence));
    let rep = integrate_cp(&pot("0"), 10.0).unwrap();
    assert_eq!(cross_validate(&positive, &rep).agreement, Agreement::Agree);

    let fz = Verdict::new("x", Classification::FirstZero, Some(EvidenceGrade::FiniteFormCertified)).with_bound(5.0);
    let rep = integrate_cp(&pot("1"), 10.0).unwrap();
    assert_eq!(cross_validate(&fz, &rep).agreement, Agreement::Agree);
    let tight = fz.clone().with_bound(3.0);
    assert_eq!(cross_validate(&tight, &rep).agreement, Agreement::Contradiction);

    let one_zero = integrate_cp(&pot("1"), 4.0).unwrap();
    let osc = Verdict::new("x", Classification::OscillationEvidence, Some(EvidenceGrade::AsymptoticEvidence));
    assert_eq!(cross_validate(&osc, &one_zero).agreement, Agreement::Contradiction);
    let slow = osc.witness(LOG_LOG_SPACING, 2.2);
    assert_eq!(cross_validate(&slow, &one_zero).agreement, Agreement::AgreeWithAnnotation);
}

#[test]
fn wronskian_conserved() {
    let k = pot("1 + 0.5*sin(3*t)");
    let cfg = OdeConfig::default().with_sampling(Sampling::At((1..=40).map(|i| i as f64).collect()));
    let a = integrate_cp_with(&k, InitialData::standard(0.0), 40.0, &cfg).unwrap();
    let b = integrate_cp_with(&k, InitialData { t0: 0.0, g: 1.0, dg: 0.0 }, 40.0, &cfg).unwrap();
    for (x, y) in a.trajectory.iter().zip(&b.trajectory) {
        let w = x.value() * y.derivative() - y.value() * x.derivative();
        assert!((w + 1.0).abs() < 1e-8, "t = {}: {w}", x.t);
    }
}
