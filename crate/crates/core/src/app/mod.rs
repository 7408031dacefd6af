//! Spec files, orchestration and report documents for the command line.

mod render;
pub mod spec;

use std::collections::BTreeMap;
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

pub use spec::{AnalysisSpec, Frame};

use crate::criteria::{
    self, calabi_finite_form, check_first_zero, check_nonoscillation, check_oscillation, check_positivity,
    compactness_certificate, generalized_calabi, hille_nehari, moore, mrv_first_zero, refined_nonoscillation,
    CertificateReport, CheckConfig, Classification, DivergenceProtocol, HilleNehariConfig, RefinedConfig, SearchGrid,
    Verdict,
};
use crate::expr::parse_expression;
use crate::oracle::{
    cross_validate, growth_envelope_fit, integrate_cp_with, integrate_weighted, origin_sensitivity, Agreement,
    AgreementRecord, InitialData, OdeConfig, Sampling, Termination, ZeroReport,
};
use crate::potential::PotentialSpec;
use crate::transforms::{refine_ladder, to_weighted, VarMap};
use crate::weights::Weight;

pub const SCHEMA_VERSION: u32 = 1;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_CONTRADICTION: i32 = 2;
pub const EXIT_INCONCLUSIVE: i32 = 3;

const ZERO_LIST_CAP: usize = 1000;
const TRAJECTORY_POINTS: usize = 400;

const SLOW_OSCILLATION: &str = "slow oscillation: consecutive zeros are spaced in log log t, so a full zero count \
is out of reach of any floating-point horizon; the oscillation claim is accepted on the observed zeros together \
with the predicted location of the next zero (see the agreement detail), not on an observed infinite count";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AppError {
    #[error("spec error: {0}")]
    Spec(String),
    #[error("{0}")]
    Io(String),
    #[error("criteria error: {0}")]
    Criteria(String),
    #[error("oracle error: {0}")]
    Oracle(String),
}

/// Command-line overrides applied on top of the spec file.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct RunOptions {
    /// Oracle horizon.
    pub horizon: Option<f64>,
    /// Oracle relative tolerance.
    pub tolerance: Option<f64>,
    /// Ladder depth for refined criteria and curve tables.
    pub depth: Option<usize>,
    #[serde(skip)]
    pub timestamp: bool,
}

impl RunOptions {
    pub fn apply(&self, spec: &AnalysisSpec) -> AnalysisSpec {
        let mut s = spec.clone();
        if let Some(h) = self.horizon {
            s.oracle.horizon = h;
        }
        if let Some(t) = self.tolerance {
            s.oracle.rtol = t;
        }
        if let Some(d) = self.depth {
            s.criteria.depth = d;
            s.curve.depth = d;
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ToolInfo {
    pub name: &'static str,
    pub version: &'static str,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OdeSettings {
    pub rtol: f64,
    pub atol: f64,
    pub origin_offset: f64,
    pub max_steps: usize,
    pub trajectory_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Settings {
    pub check: CheckConfig,
    pub search: SearchGrid,
    pub hille_nehari: HilleNehariConfig,
    pub refined: RefinedConfig,
    pub divergence: DivergenceProtocol,
    pub nested_log_divergence: DivergenceProtocol,
    pub strict_margin: f64,
    pub ode: OdeSettings,
}

/// Everything needed to rerun the analysis.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Reproducibility {
    pub spec_source: String,
    pub overrides: RunOptions,
    pub effective_spec: AnalysisSpec,
    pub potential: String,
    pub weight: String,
    pub settings: Settings,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionSection {
    pub selected: String,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvelopeSummary {
    pub expr: String,
    pub c_fit: Option<f64>,
    pub c_least_squares: Option<f64>,
    pub residual: Option<f64>,
    pub points: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleSummary {
    pub problem: String,
    pub start: f64,
    pub horizon: f64,
    pub reached: f64,
    pub terminated: Termination,
    pub zero_count: usize,
    pub first_zero: Option<f64>,
    /// At most the first thousand zeros.
    pub zeros: Vec<f64>,
    pub zeros_truncated: bool,
    pub max_error_estimate: f64,
    pub steps: usize,
    pub rejected: usize,
    pub min_value: f64,
    pub origin_sensitivity: Option<f64>,
    pub envelope: Option<EnvelopeSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportDocument {
    pub schema_version: u32,
    pub command: &'static str,
    pub tool: ToolInfo,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generated_at_unix: Option<u64>,
    pub reproducibility: Reproducibility,
    pub assumptions: Vec<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub criteria: Vec<CriterionSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate: Option<CertificateReport>,
    pub oracle: Option<OracleSummary>,
    pub agreement: Vec<AgreementRecord>,
    pub annotations: Vec<String>,
    pub exit_code: i32,
    #[serde(skip)]
    pub trajectory_csv: Option<String>,
}

impl ReportDocument {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn to_text(&self) -> String {
        render::text(self)
    }
}

/// Potential and weight in both frames.
struct Problem {
    frame: Frame,
    k: PotentialSpec<f64>,
    a: PotentialSpec<f64>,
    v: Weight<f64>,
    var_map: Option<VarMap<f64>>,
    cp_available: bool,
    notes: Vec<String>,
}

impl Problem {
    fn build(spec: &AnalysisSpec) -> Result<Self, AppError> {
        let k = spec.build_potential()?;
        let v = spec.build_weight()?;
        let identity = spec.is_identity_frame();
        match spec.problem.frame {
            Frame::Weighted => Ok(Self {
                frame: Frame::Weighted,
                a: k.clone(),
                k,
                v,
                var_map: None,
                cp_available: identity,
                notes: Vec::new(),
            }),
            Frame::Cp if identity => {
                Ok(Self { frame: Frame::Cp, a: k.clone(), k, v, var_map: None, cp_available: true, notes: Vec::new() })
            }
            Frame::Cp => {
                let tp = to_weighted(&k, &v).map_err(|e| AppError::Spec(format!("[weight] {e}")))?;
                let mut notes = tp.provenance.clone();
                notes.push("first-zero bounds of weighted criteria are mapped back to t through t(r)".into());
                Ok(Self {
                    frame: Frame::Cp,
                    k,
                    a: tp.potential,
                    v: tp.weight,
                    var_map: tp.var_map,
                    cp_available: true,
                    notes,
                })
            }
        }
    }

    fn to_t(&self, mut verdict: Verdict) -> Verdict {
        if let (Some(map), Some(b)) = (&self.var_map, verdict.bound) {
            if b.is_finite() {
                match map.t_of_r(b) {
                    Ok(t) => {
                        verdict.witnesses.insert("bound_r".into(), b);
                        verdict.bound = Some(t);
                    }
                    Err(e) => verdict.notes.push(format!("bound not mapped to t: {e}")),
                }
            }
        }
        verdict
    }
}

fn evaluate(name: &str, p: &Problem, spec: &AnalysisSpec) -> Verdict {
    let c = &spec.criteria;
    let weighted = matches!(
        name,
        "check_positivity" | "check_nonoscillation" | "check_first_zero" | "check_oscillation"
    );
    if !weighted && !p.cp_available {
        return Verdict::inconclusive(name, "criterion is stated for g'' + K g = 0; use frame = \"cp\" or weight power(3)");
    }
    let k = &p.k;
    let from_result = |r: Result<Verdict, criteria::CriteriaError>| r.unwrap_or_else(|e| Verdict::inconclusive(name, e.to_string()));
    let verdict = match name {
        "check_positivity" => check_positivity(&p.a, &p.v, &c.check_config()),
        "check_nonoscillation" => {
            let r0 = if c.t0 > 0.0 { c.t0 } else { 1.0 };
            check_nonoscillation(&p.a, &p.v, r0, &c.check_config())
        }
        "check_first_zero" => check_first_zero(&p.a, &p.v, &p.v, &c.search.search()),
        "check_oscillation" => check_oscillation(&p.a, &p.v, &p.v, c.oscillation_start, &DivergenceProtocol::default()),
        "hille_nehari" => hille_nehari(k, &c.hille_nehari_config()),
        "moore" => moore(k, c.moore_lambda, c.horizon),
        "mrv_first_zero" => {
            let m = c.mrv.expect("validated");
            from_result(mrv_first_zero(k, m.b_coef, m.a, m.b, m.lambda))
        }
        "calabi_finite_form" => {
            let r = c.calabi.expect("validated");
            from_result(calabi_finite_form(k, r.a, r.b))
        }
        "generalized_calabi" => {
            let fam = c.family.as_ref().expect("validated").lower_bound();
            from_result(generalized_calabi(k, fam, c.t0, c.limsup_horizon))
        }
        "refined_nonoscillation" => refined_nonoscillation(k, c.depth, c.t0, &c.refined_config()),
        other => Verdict::inconclusive(other, "unknown criterion"),
    };
    if weighted {
        p.to_t(verdict)
    } else {
        verdict
    }
}

fn ode_config(spec: &AnalysisSpec, start: f64) -> OdeConfig<f64> {
    let h = spec.oracle.horizon;
    let lo = if start > 0.0 { start * (1.0 + 1e-6) } else { (h * 1e-9).min(1e-3) };
    let cfg = OdeConfig::default().with_rtol(spec.oracle.rtol);
    if lo < h {
        cfg.with_sampling(Sampling::log_grid(lo, h, TRAJECTORY_POINTS))
    } else {
        cfg
    }
}

fn vanishes_at_origin(v: &Weight<f64>) -> bool {
    v.domain_start <= 0.0 && v.value(1e-10) < 1e-6
}

struct OracleRun {
    report: ZeroReport<f64>,
    summary: OracleSummary,
}

fn run_oracle_problem(p: &Problem, spec: &AnalysisSpec) -> Result<OracleRun, AppError> {
    let horizon = spec.oracle.horizon;
    let oracle_err = |e: crate::oracle::OracleError| AppError::Oracle(e.to_string());
    let (report, problem, sensitivity) = match p.frame {
        Frame::Cp => {
            let cfg = ode_config(spec, p.k.domain_start);
            let rep = integrate_cp_with(&p.k, InitialData::standard(p.k.domain_start), horizon, &cfg).map_err(oracle_err)?;
            (rep, format!("g'' + K g = 0, g({0}) = 0, g'({0}) = 1", p.k.domain_start), None)
        }
        Frame::Weighted => {
            let r0 = p.v.domain_start.max(0.0);
            let cfg = ode_config(spec, r0);
            let rep = integrate_weighted(&p.v, &p.a, r0, 1.0, 0.0, horizon, &cfg).map_err(oracle_err)?;
            let sens = if vanishes_at_origin(&p.v) {
                Some(origin_sensitivity(&p.v, &p.a, 1.0, horizon, &cfg).map_err(oracle_err)?)
            } else {
                None
            };
            (rep, format!("(v z')' + A v z = 0, z({r0}+) = 1, (v z')({r0}) = 0"), sens)
        }
    };
    let envelope = spec.oracle.envelope.as_ref().map(|src| envelope_summary(src, &report, spec));
    let summary = OracleSummary {
        problem,
        start: report.start,
        horizon: report.horizon,
        reached: report.reached,
        terminated: report.terminated,
        zero_count: report.count,
        first_zero: report.first_zero(),
        zeros: report.zeros.iter().copied().take(ZERO_LIST_CAP).collect(),
        zeros_truncated: report.zeros.len() > ZERO_LIST_CAP,
        max_error_estimate: report.max_error_estimate,
        steps: report.steps,
        rejected: report.rejected,
        min_value: report.min_value,
        origin_sensitivity: sensitivity,
        envelope,
    };
    Ok(OracleRun { report, summary })
}

fn envelope_summary(src: &str, report: &ZeroReport<f64>, spec: &AnalysisSpec) -> EnvelopeSummary {
    let mut params = spec.potential.params.clone();
    params.extend(spec.oracle.envelope_params.iter().map(|(k, v)| (k.clone(), *v)));
    let failed = |error: String| EnvelopeSummary {
        expr: src.to_string(),
        c_fit: None,
        c_least_squares: None,
        residual: None,
        points: 0,
        error: Some(error),
    };
    let expr = match parse_expression(src).and_then(|e| e.bind(&params)) {
        Ok(e) => e,
        Err(e) => return failed(e.to_string()),
    };
    match growth_envelope_fit(report, |t: f64| expr.eval(t)) {
        Ok(fit) => EnvelopeSummary {
            expr: src.to_string(),
            c_fit: Some(fit.c_fit),
            c_least_squares: Some(fit.c_least_squares),
            residual: Some(fit.residual),
            points: fit.points,
            error: None,
        },
        Err(e) => failed(e.to_string()),
    }
}

fn settings(spec: &AnalysisSpec) -> Settings {
    let ode = OdeConfig::<f64>::default();
    Settings {
        check: spec.criteria.check_config(),
        search: spec.criteria.search.search(),
        hille_nehari: spec.criteria.hille_nehari_config(),
        refined: spec.criteria.refined_config(),
        divergence: DivergenceProtocol::default(),
        nested_log_divergence: DivergenceProtocol::nested_log(),
        strict_margin: criteria::STRICT_MARGIN,
        ode: OdeSettings {
            rtol: spec.oracle.rtol,
            atol: ode.atol,
            origin_offset: ode.origin_offset,
            max_steps: ode.max_steps,
            trajectory_points: TRAJECTORY_POINTS,
        },
    }
}

fn document(command: &'static str, source: &str, spec: &AnalysisSpec, opts: &RunOptions, p: &Problem) -> ReportDocument {
    let effective = opts.apply(spec);
    ReportDocument {
        schema_version: SCHEMA_VERSION,
        command,
        tool: ToolInfo { name: env!("CARGO_PKG_NAME"), version: env!("CARGO_PKG_VERSION") },
        generated_at_unix: opts
            .timestamp
            .then(|| SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)),
        reproducibility: Reproducibility {
            spec_source: source.to_string(),
            overrides: *opts,
            potential: p.k.label.clone(),
            weight: p.v.label.clone(),
            settings: settings(&effective),
            effective_spec: effective,
        },
        assumptions: vec![
            "the Cauchy problem has a unique solution for the supplied piecewise-continuous potential".into(),
            "sampled and checkpointed conditions are evidence on the recorded grids, not proofs".into(),
        ],
        criteria: Vec::new(),
        certificate: None,
        oracle: None,
        agreement: Vec::new(),
        annotations: p.notes.clone(),
        exit_code: EXIT_OK,
        trajectory_csv: None,
    }
}

fn annotate_agreement(doc: &mut ReportDocument) {
    if doc.agreement.iter().any(|r| r.agreement == Agreement::AgreeWithAnnotation) {
        doc.annotations.push(SLOW_OSCILLATION.into());
    }
    if doc.agreement.iter().any(|r| r.agreement == Agreement::Unresolved) {
        doc.annotations.push("some claims are unresolved: the oracle horizon does not reach the claimed bound".into());
    }
}

fn parse_source(source: &str) -> Result<AnalysisSpec, AppError> {
    AnalysisSpec::parse(source)
}

/// Runs the selected criteria and the oracle, then cross-validates.
pub fn run_analyze(source: &str, opts: &RunOptions) -> Result<ReportDocument, AppError> {
    let raw = parse_source(source)?;
    let spec = opts.apply(&raw);
    let p = Problem::build(&spec)?;
    let (verdicts, oracle) = rayon::join(
        || spec.selected().par_iter().map(|n| CriterionSection { selected: n.clone(), verdict: evaluate(n, &p, &spec) }).collect::<Vec<_>>(),
        || if spec.oracle.skip { None } else { Some(run_oracle_problem(&p, &spec)) },
    );
    let oracle = oracle.transpose()?;
    let mut doc = document("analyze", source, &raw, opts, &p);
    if let Some(run) = &oracle {
        doc.agreement = verdicts.iter().map(|s| cross_validate(&s.verdict, &run.report)).collect();
    }
    doc.criteria = verdicts;
    if let Some(run) = oracle {
        doc.trajectory_csv = Some(run.report.to_csv());
        doc.oracle = Some(run.summary);
    }
    annotate_agreement(&mut doc);
    doc.exit_code = if doc.agreement.iter().any(|r| r.agreement == Agreement::Contradiction) { EXIT_CONTRADICTION } else { EXIT_OK };
    Ok(doc)
}

/// Compactness certificate for the radial profile in `[potential]`, checked against the oracle.
pub fn run_certify(source: &str, opts: &RunOptions) -> Result<ReportDocument, AppError> {
    let raw = parse_source(source)?;
    let mut spec = opts.apply(&raw);
    spec.problem.frame = Frame::Cp;
    let cs = spec.certify.clone().ok_or_else(|| AppError::Spec("certify needs a [certify] section".into()))?;
    let k = spec.build_potential()?;
    let p = Problem {
        frame: Frame::Cp,
        a: k.clone(),
        k,
        v: Weight::unit(),
        var_map: None,
        cp_available: true,
        notes: Vec::new(),
    };
    let (cert, oracle) = rayon::join(
        || compactness_certificate(&p.k, cs.m, &cs.strategy()).map_err(|e| AppError::Criteria(e.to_string())),
        || if spec.oracle.skip { None } else { Some(run_oracle_problem(&p, &spec)) },
    );
    let cert = cert?;
    let oracle = oracle.transpose()?;
    let mut doc = document("certify", source, &raw, opts, &p);
    doc.reproducibility.settings.search = cs.strategy().grid;
    if let Some(run) = &oracle {
        doc.agreement.push(cross_validate(&cert.verdict, &run.report));
    }
    if let Some(run) = oracle {
        doc.trajectory_csv = Some(run.report.to_csv());
        doc.oracle = Some(run.summary);
    }
    annotate_agreement(&mut doc);
    doc.exit_code = if doc.agreement.iter().any(|r| r.agreement == Agreement::Contradiction) {
        EXIT_CONTRADICTION
    } else if !cert.compact {
        EXIT_INCONCLUSIVE
    } else {
        EXIT_OK
    };
    doc.certificate = Some(cert);
    Ok(doc)
}

/// Oracle run only.
pub fn run_oracle(source: &str, opts: &RunOptions) -> Result<ReportDocument, AppError> {
    let raw = parse_source(source)?;
    let spec = opts.apply(&raw);
    let p = Problem::build(&spec)?;
    let run = run_oracle_problem(&p, &spec)?;
    let mut doc = document("oracle", source, &raw, opts, &p);
    doc.trajectory_csv = Some(run.report.to_csv());
    doc.oracle = Some(run.summary);
    Ok(doc)
}

/// `r, chi_0, …, chi_depth` on a log grid over `[curve].range`.
pub fn run_curve(source: &str, opts: &RunOptions) -> Result<String, AppError> {
    let spec = opts.apply(&parse_source(source)?);
    let v = spec.build_weight()?;
    curve_table(&v, spec.curve.range, spec.curve.points, spec.curve.depth)
}

pub fn curve_table(v: &Weight<f64>, range: [f64; 2], points: usize, depth: usize) -> Result<String, AppError> {
    let mut out = String::from("r");
    for d in 0..=depth {
        out.push_str(&format!(",chi_{d}"));
    }
    out.push('\n');
    let [lo, hi] = range;
    if !(lo > 0.0 && hi >= lo) || points == 0 || !lo.is_finite() || !hi.is_finite() {
        return Ok(out);
    }
    let stages = refine_ladder(v, depth).map_err(|e| AppError::Criteria(e.to_string()))?;
    let grid = if points == 1 { vec![lo] } else { crate::scalar::geomspace(lo, hi, points) };
    for r in grid {
        out.push_str(&format!("{r:?}"));
        for s in &stages {
            out.push(',');
            if r > s.positivity_start {
                if let Ok(c) = s.curve.eval(r) {
                    out.push_str(&format!("{c:?}"));
                }
            }
        }
        out.push('\n');
    }
    Ok(out)
}

/// Exit code for errors raised before a report exists.
pub fn error_exit_code(_e: &AppError) -> i32 {
    EXIT_USAGE
}

pub(crate) fn classification_name(c: Classification) -> &'static str {
    match c {
        Classification::Positive => "Positive",
        Classification::Nonoscillatory => "Nonoscillatory",
        Classification::FirstZero => "FirstZero",
        Classification::OscillationEvidence => "OscillationEvidence",
        Classification::Inconclusive => "Inconclusive",
    }
}

pub(crate) fn fmt_witnesses(w: &BTreeMap<String, f64>) -> String {
    w.iter().map(|(k, v)| format!("{k}={v:.6e}")).collect::<Vec<_>>().join(", ")
}

#[cfg(test)]
mod tests;
