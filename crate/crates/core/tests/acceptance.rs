//! Acceptance checks, one test per criterion. Each prints a PASS/FAIL line.

#![allow(clippy::too_many_arguments, clippy::type_complexity)]

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::process::Command;
use std::time::Instant;

use osc_core::criteria::{
    check_first_zero, compactness_certificate, generalized_calabi, hille_nehari, moore, mrv_rhs, refined_nonoscillation,
    Classification, CertifyStrategy, HilleNehariConfig, LowerBoundFamily, RefinedConfig, SearchGrid, ShiftFamily,
};
use osc_core::oracle::{growth_envelope_fit, integrate_cp, integrate_cp_with, integrate_weighted, InitialData, OdeConfig, Sampling};
use osc_core::specialfn::{bessel_crossover, bessel_i, log_bessel_i_asymptotic, log_bessel_i_series};
use osc_core::transforms::{refine_ladder, weight_shift};
use osc_core::weights::{critical_curve, Weight};
use osc_core::PotentialSpec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(id: u32, title: &str, checks: &[(bool, String)]) {
    let ok = checks.iter().all(|c| c.0);
    println!("{} criterion {id}: {title}", if ok { "PASS" } else { "FAIL" });
    for (pass, what) in checks {
        println!("    [{}] {what}", if *pass { "ok" } else { "FAILED" });
    }
    assert!(ok, "criterion {id} failed");
}

fn pot(src: &str, params: &[(&str, f64)]) -> PotentialSpec<f64> {
    let p: BTreeMap<String, f64> = params.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    PotentialSpec::<f64>::parse(src, &p).unwrap()
}

fn spec_path(name: &str) -> String {
    format!("{}/../../specs/{name}", env!("CARGO_MANIFEST_DIR"))
}

/// Adaptive Simpson in `u = ln r`.
fn simpson_log(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    fn rec(g: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (g(lm), g(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        rec(g, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + rec(g, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    let g = |u: f64| f(u.exp()) * u.exp();
    let (a, b) = (lo.ln(), hi.ln());
    let (fa, fm, fb) = (g(a), g(0.5 * (a + b)), g(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(&g, a, b, fa, fm, fb, whole, 1e-13, 50)
}

#[test]
fn criterion_01_constant_potential() {
    let clock = Instant::now();
    let rep = integrate_cp(&pot("1", &[]), 35.0).unwrap();
    let elapsed = clock.elapsed().as_secs_f64();
    let first = rep.zeros[0];
    let worst = (1..=10).map(|k| (rep.zeros[k - 1] - k as f64 * PI).abs()).fold(0.0, f64::max);
    report(
        1,
        "K = 1 zeros at k pi",
        &[
            ((first - PI).abs() < 1e-8, format!("first zero {first:.15}, error {:.2e}", (first - PI).abs())),
            (worst < 1e-7, format!("max error over k <= 10: {worst:.2e}")),
            (elapsed < 1.0, format!("runtime {elapsed:.3} s")),
        ],
    );
}

#[test]
fn criterion_02_euler_closed_forms() {
    let mut checks = Vec::new();
    for b in [0.0, 0.3, 0.5] {
        let k = pot("B^2/(1+t)^2", &[("B", b)]);
        let exact = move |t: f64| -> f64 {
            if b == 0.5 {
                (1.0 + t).sqrt() * t.ln_1p()
            } else {
                let d = (1.0 - 4.0 * b * b).sqrt();
                let (mp, mm) = ((1.0 + d) / 2.0, (1.0 - d) / 2.0);
                ((1.0 + t).powf(mp) - (1.0 + t).powf(mm)) / d
            }
        };
        let cfg = OdeConfig::default().with_sampling(Sampling::log_grid(1e-2, 100.0, 80));
        let rep = integrate_cp_with(&k, InitialData::standard(0.0), 100.0, &cfg).unwrap();
        let worst = rep.trajectory.iter().map(|s| (s.value() / exact(s.t) - 1.0).abs()).fold(0.0, f64::max);
        checks.push((worst < 1e-6, format!("B = {b}: max relative deviation on [0, 100] {worst:.2e}")));
        let long = integrate_cp(&k, 1e6).unwrap();
        checks.push((long.count == 0, format!("B = {b}: {} zeros up to 1e6", long.count)));
    }
    report(2, "Euler closed-form solutions", &checks);
}

#[test]
fn criterion_03_hille_nehari() {
    let cfg = HilleNehariConfig::default();
    let mut checks = Vec::new();
    let k1 = pot("B^2/(1+t)^2", &[("B", 1.0)]);
    let v1 = hille_nehari(&k1, &cfg);
    let k_lo = v1.witnesses["k_lo"];
    checks.push(((k_lo - 1.0).abs() < 1e-4, format!("B = 1: liminf estimate {k_lo:.8}")));
    checks.push((v1.classification == Classification::OscillationEvidence, format!("B = 1: {:?}", v1.classification)));
    let rep = integrate_cp(&k1, 1e4).unwrap();
    checks.push((rep.count >= 3, format!("B = 1: {} oracle zeros by 1e4 ({:?})", rep.count, rep.zeros)));

    let k4 = pot("B^2/(1+t)^2", &[("B", 0.4)]);
    let v4 = hille_nehari(&k4, &cfg);
    let (lo4, hi4) = (v4.witnesses["k_lo"], v4.witnesses["k_hi"]);
    checks.push(((lo4 - 0.16).abs() < 1e-4, format!("B = 0.4: liminf estimate {lo4:.8}")));
    checks.push((hi4 < 0.25, format!("B = 0.4: limsup estimate {hi4:.8} < 1/4")));
    let nonosc = matches!(v4.classification, Classification::Nonoscillatory | Classification::Positive);
    checks.push((nonosc, format!("B = 0.4: {:?}", v4.classification)));
    let rep4 = integrate_cp(&k4, 1e6).unwrap();
    checks.push((rep4.count == 0, format!("B = 0.4: {} oracle zeros up to 1e6", rep4.count)));
    report(3, "Hille-Nehari on B^2/(1+t)^2", &checks);
}

#[test]
fn criterion_04_critical_curve_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let weights: Vec<(Weight<f64>, Box<dyn Fn(f64) -> f64>)> = vec![
        (Weight::<f64>::power(3.0), Box::new(|r: f64| 1.0 / r)),
        (Weight::<f64>::power(4.0), Box::new(|r: f64| 0.5 / (r * r))),
        (Weight::<f64>::t_log2(), Box::new(|r: f64| 1.0 / r.ln())),
    ];
    let mut checks = Vec::new();
    for (v, tail) in &weights {
        let curve = critical_curve(v).unwrap();
        let mut worst: f64 = 0.0;
        let mut worst_tail: f64 = 0.0;
        for _ in 0..20 {
            let (x, y): (f64, f64) = (rng.gen_range(1.0..100.0), rng.gen_range(1.0..100.0));
            let (lo, hi) = (x.min(y).max(1.0 + 1e-6), x.max(y));
            let lhs = simpson_log(&|s| curve.sqrt_eval(s).unwrap(), lo, hi);
            let rhs = 0.5 * (v.tail(lo).unwrap() / v.tail(hi).unwrap()).ln();
            worst = worst.max((lhs - rhs).abs());
            worst_tail = worst_tail.max((v.tail(hi).unwrap() / tail(hi) - 1.0).abs());
        }
        checks.push((worst <= 1e-8, format!("v = {}: max |integral - half log tail ratio| = {worst:.2e}", v.label)));
        checks.push((worst_tail <= 1e-8, format!("v = {}: tail vs closed form {worst_tail:.2e}", v.label)));
    }
    report(4, "critical-curve identity", &checks);
}

#[test]
fn criterion_05_sharpness_prototype() {
    let proto = |c: f64| pot("1/(4*t^2) + c^2/(4*t^2*log(t)^2)", &[("c", c)]).with_domain_start(2.0);
    let fam = LowerBoundFamily::EulerLowerBound { b: 0.5 };
    let mut checks = Vec::new();

    let k3 = proto(3.0);
    let gc = generalized_calabi(&k3, fam, 2.0, 1e300).unwrap();
    checks.push((gc.classification == Classification::OscillationEvidence, format!("c = 3: generalized_calabi {:?}", gc.classification)));
    let rep3 = integrate_cp(&k3, 1e6).unwrap();
    let z = rep3.first_zero();
    checks.push((z.is_some_and(|z| z <= 1e6), format!("c = 3: oracle first zero {z:?}")));

    let k09 = proto(0.9);
    let rn = refined_nonoscillation(&k09, 3, 2.0, &RefinedConfig::default());
    checks.push((rn.classification == Classification::Nonoscillatory, format!("c = 0.9: refined_nonoscillation {:?}", rn.classification)));
    let cfg = OdeConfig::default().with_sampling(Sampling::log_grid(3.0, 1e6, 300));
    let rep09 = integrate_cp_with(&k09, InitialData::standard(2.0), 1e6, &cfg).unwrap();
    checks.push((rep09.count == 0, format!("c = 0.9: {} oracle zeros up to 1e6", rep09.count)));
    let fit = growth_envelope_fit(&rep09, |t: f64| (t * t.ln()).sqrt() * t.ln().ln());
    let c_fit = fit.as_ref().map(|f| f.c_fit).unwrap_or(f64::NAN);
    checks.push((c_fit > 0.0, format!("c = 0.9: envelope sqrt(t log t) log log t, C_fit = {c_fit:.4e}")));

    for (c, k) in [(3.0, &k3), (0.9, &k09)] {
        let hn = hille_nehari(k, &HilleNehariConfig::default());
        let mo = moore(k, 0.5, 1e8);
        checks.push((hn.classification == Classification::Inconclusive, format!("c = {c}: hille_nehari {:?}", hn.classification)));
        checks.push((mo.classification == Classification::Inconclusive, format!("c = {c}: moore {:?}", mo.classification)));
    }

    let doc = osc_core::app::run_analyze(&std::fs::read_to_string(spec_path("prototype.toml")).unwrap(), &Default::default()).unwrap();
    let stated = doc.annotations.iter().any(|a| a.starts_with("slow oscillation"));
    checks.push((stated, "prototype report states the slow-oscillation substitution".into()));
    checks.push((doc.exit_code == 0, format!("prototype report exit code {}", doc.exit_code)));
    report(5, "sharpness prototype", &checks);
}

#[test]
fn criterion_06_weight_shift_consistency() {
    let k = pot("case(t < 1, -1, t < 2, 49, -1)", &[]);
    let w = osc_core::specialfn::shift_solution_negative_part::<f64>(0.0, 1.0);
    let prob = weight_shift(&Weight::unit(), &k, &w.shift, &w).unwrap();
    let mut checks = Vec::new();
    let shifted_ok = [0.5, 1.5, 3.0].iter().all(|&t| (prob.potential.eval(t) - (k.eval(t) + 1.0)).abs() < 1e-12);
    checks.push((shifted_ok, "shifted potential equals K + 1".into()));
    let horizon = 20.0;
    let cp = integrate_cp(&k, horizon).unwrap();
    let weighted = integrate_weighted(&prob.weight, &prob.potential, 0.0, 1.0, 0.0, horizon, &OdeConfig::default()).unwrap();
    let same = cp.count == weighted.count && cp.count > 0;
    let dev = cp.zeros.iter().zip(&weighted.zeros).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    checks.push((same, format!("zero counts {} (cp) and {} (shifted)", cp.count, weighted.count)));
    checks.push((dev < 1e-6, format!("max zero deviation {dev:.2e}")));
    let cert = compactness_certificate(&k, 3, &CertifyStrategy::new(ShiftFamily::NegativePart { alpha: 0.0, b: 1.0 })).unwrap();
    checks.push((cert.compact, format!("certificate: {}", cert.conclusion)));
    let r_bar = cert.r_bar.unwrap_or(f64::NAN);
    checks.push((cp.zeros[0] <= r_bar, format!("oracle first zero {:.6} <= R_bar {r_bar:.6}", cp.zeros[0])));
    report(6, "weight-shift consistency", &checks);
}

#[test]
fn criterion_07_first_zero_soundness() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let grid = SearchGrid::default();
    let v = Weight::<f64>::power(3.0);
    let (mut fired, mut tried, mut sound, mut tight) = (0, 0, 0, 0);
    let mut failures = Vec::new();
    while fired < 24 && tried < 200 {
        tried += 1;
        let (c0, c1, mu, c2, c3, om) = (
            rng.gen_range(0.02..1.5),
            rng.gen_range(0.0..4.0),
            rng.gen_range(0.0..6.0),
            rng.gen_range(0.0..3.0),
            rng.gen_range(0.0..1.0),
            rng.gen_range(0.2..3.0),
        );
        let src = format!("{c0} + {c1}*exp(-(t-{mu})^2) + {c2}/(1+t)^2 + {c3}*sin({om}*t)^2");
        let k = pot(&src, &[]);
        let verdict = check_first_zero(&k, &v, &v, &grid);
        if verdict.classification != Classification::FirstZero {
            continue;
        }
        fired += 1;
        let bound = verdict.bound.unwrap();
        let rep = integrate_cp(&k, bound * 1.5 + 1.0).unwrap();
        if rep.first_zero().is_some_and(|z| z <= bound) {
            sound += 1;
        } else {
            failures.push(format!("{src}: bound {bound}, zero {:?}", rep.first_zero()));
        }
        if verdict.witnesses["residual"].abs() <= 1e-8 {
            tight += 1;
        } else {
            failures.push(format!("{src}: residual {:e}", verdict.witnesses["residual"]));
        }
    }
    let mut checks = vec![
        (fired >= 20, format!("{fired} of {tried} random potentials fired")),
        (sound == fired, format!("oracle first zero within the bound in {sound}/{fired}")),
        (tight == fired, format!("bound residual <= 1e-8 in {tight}/{fired}")),
    ];
    checks.extend(failures.into_iter().map(|f| (false, f)));
    report(7, "first-zero bound soundness", &checks);
}

#[test]
fn criterion_08_sturm_interlacing() {
    let pairs = [
        ("2", "1"),
        ("1 + sin(t)^2 + 0.1", "1"),
        ("4", "3.5 + 0.4*cos(t)"),
        ("1 + 2/(1+t)", "1 + 1/(1+t)"),
        ("0.5 + exp(-t/10)", "0.5"),
        ("1.2 + 0.3*sin(2*t)", "0.8 + 0.3*sin(2*t)"),
        ("9", "case(t < 5, 4, 8)"),
        ("1 + t/10", "0.9 + t/12"),
        ("2 + sin(t)", "0.9"),
        ("3/(1+t)^2 + 0.6", "0.6"),
    ];
    let mut checks = Vec::new();
    for (hi, lo) in pairs {
        let (k1, k2) = (pot(hi, &[]), pot(lo, &[]));
        let grid: Vec<f64> = (0..=4000).map(|i| i as f64 * 0.01).collect();
        let dominated = grid.iter().all(|&t| k1.eval(t) > k2.eval(t));
        let g1 = integrate_cp(&k1, 40.0).unwrap();
        let g2 = integrate_cp(&k2, 40.0).unwrap();
        let interlaced = g2.zeros.windows(2).all(|w| g1.zeros.iter().any(|&z| z > w[0] && z < w[1]));
        let first = match (g1.first_zero(), g2.first_zero()) {
            (Some(a), Some(b)) => a < b,
            (Some(_), None) => true,
            (None, None) => true,
            (None, Some(_)) => false,
        };
        checks.push((
            dominated && interlaced && first && g2.count >= 2,
            format!("K1 = {hi}, K2 = {lo}: {} and {} zeros, interlacing {interlaced}, earlier first zero {first}", g1.count, g2.count),
        ));
    }
    report(8, "Sturm comparison", &checks);
}

#[test]
fn criterion_09_bessel_kernel() {
    let mut checks = Vec::new();
    let xs: Vec<f64> = (0..=300).map(|i| 0.1 * (300.0f64).powf(i as f64 / 300.0)).collect();
    let mut worst: f64 = 0.0;
    for &x in &xs {
        let pre = (2.0 / (PI * x)).sqrt();
        let half = pre * x.sinh();
        let three_half = pre * (x.cosh() - x.sinh() / x);
        worst = worst.max((bessel_i(0.5, x).unwrap() / half - 1.0).abs());
        worst = worst.max((bessel_i(1.5, x).unwrap() / three_half - 1.0).abs());
    }
    checks.push((worst <= 1e-10, format!("half-integer orders on [0.1, 30]: max relative error {worst:.2e}")));

    let mut jump: f64 = 0.0;
    for nu in [0.0_f64, 1.0 / 3.0, 0.5, 2.0 / 3.0, 1.0, 2.5] {
        let x = bessel_crossover(nu);
        jump = jump.max((log_bessel_i_series(nu, x) - log_bessel_i_asymptotic(nu, x)).exp_m1().abs());
    }
    checks.push((jump <= 1e-8, format!("series/asymptotic mismatch at the crossover {jump:.2e}")));

    let mut tails: f64 = 0.0;
    for b in [0.5, 1.0, 2.0] {
        let sinh = Weight::<f64>::sinh2(b, 0.0);
        let d = (1.0 + 4.0 * b * b).sqrt();
        let euler = Weight::<f64>::sinh2(b, -2.0);
        for r in [0.3, 1.0, 2.5, 6.0] {
            let closed = 2.0 / (b * (2.0 * b * r).exp_m1());
            tails = tails.max((sinh.ln_tail_numeric(r).unwrap() - closed.ln()).abs());
            tails = tails.max((sinh.ln_tail(r).unwrap() - closed.ln()).abs());
            let closed2 = r.powf(-d) / d;
            tails = tails.max((euler.ln_tail_numeric(r).unwrap() - closed2.ln()).abs());
            tails = tails.max((euler.ln_tail(r).unwrap() - closed2.ln()).abs());
        }
    }
    checks.push((tails <= 1e-8, format!("tail closed forms vs quadrature (alpha = 0, -2): {tails:.2e}")));
    report(9, "Bessel kernel and tail table", &checks);
}

#[test]
fn criterion_10_ladder_depth_two() {
    let stages = refine_ladder(&Weight::<f64>::t_log2(), 1).unwrap();
    let chi2 = &stages[1].curve;
    let mut worst: f64 = 0.0;
    for i in 0..=80 {
        let t = 1e2 * 1e4f64.powf(i as f64 / 80.0);
        let (l, ll) = (t.ln(), t.ln().ln());
        let exact = 1.0 / (4.0 * t * t * l * l * ll * ll);
        worst = worst.max((chi2.eval(t).unwrap() / exact - 1.0).abs());
    }
    let cfg = RefinedConfig::default();
    let slack = pot("1/(4*t^2) + 1/(4*t^2*log(t)^2) + 1/(8*t^2*log(t)^2*log(log(t))^2)", &[]).with_domain_start(2.0);
    let accept = refined_nonoscillation(&slack, 2, 2.0, &cfg);
    let over = pot("1/(4*t^2) + c^2/(4*t^2*log(t)^2)", &[("c", 1.5)]).with_domain_start(2.0);
    let reject = refined_nonoscillation(&over, 2, 2.0, &cfg);
    report(
        10,
        "ladder depth 2",
        &[
            (worst <= 1e-6, format!("chi of the second rung vs closed form on [1e2, 1e6]: {worst:.2e}")),
            (accept.classification == Classification::Nonoscillatory, format!("slack potential: {:?}", accept.classification)),
            (reject.classification == Classification::Inconclusive, format!("c = 1.5: {:?}", reject.classification)),
        ],
    );
}

#[test]
fn criterion_11_mrv_limit() {
    let rhs = mrv_rhs(1e-6_f64, 0.0, 1.0, 2.0).unwrap();
    report(11, "MRV right-hand side as B -> 0", &[((rhs - 1.0).abs() < 1e-4, format!("rhs = {rhs:.10}, limit 1/a = 1"))]);
}

#[test]
fn criterion_12_determinism() {
    let run = || {
        Command::new(env!("CARGO_BIN_EXE_osc"))
            .args(["analyze", &spec_path("prototype.toml"), "--no-timestamp"])
            .output()
            .unwrap()
    };
    let (a, b) = (run(), run());
    report(
        12,
        "byte-identical analyze reports",
        &[
            (a.status.code() == Some(0) && b.status.code() == Some(0), format!("exit codes {:?}, {:?}", a.status.code(), b.status.code())),
            (!a.stdout.is_empty() && a.stdout == b.stdout, format!("{} and {} bytes, identical {}", a.stdout.len(), b.stdout.len(), a.stdout == b.stdout)),
        ],
    );
}
