//! Spec-file schema and builders.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::AppError;
use crate::criteria::{
    CertifyStrategy, CheckConfig, HilleNehariConfig, LowerBoundFamily, RefinedConfig, SearchGrid, SearchMode, ShiftFamily,
};
use crate::expr::parse_expression;
use crate::potential::{PotentialSpec, SignHint};
use crate::weights::Weight;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSpec {
    pub potential: PotentialSection,
    #[serde(default)]
    pub weight: WeightSection,
    #[serde(default)]
    pub problem: ProblemSection,
    #[serde(default)]
    pub criteria: CriteriaSection,
    #[serde(default)]
    pub oracle: OracleSection,
    #[serde(default)]
    pub certify: Option<CertifySection>,
    #[serde(default)]
    pub curve: CurveSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSection {
    pub expr: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    #[serde(default)]
    pub domain_start: f64,
    /// `"nonnegative"`, `"sign_changing"`, or a lower-bound expression.
    #[serde(default)]
    pub sign_hint: Option<String>,
    #[serde(default)]
    pub breakpoints: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightSection {
    /// Built-in name: `power`, `t_log2`, `sinh2`, `euler2`, `ladder`, `unit`.
    #[serde(default)]
    pub name: Option<String>,
    /// Expression for `v(r)` in the variable `t`.
    #[serde(default)]
    pub expr: Option<String>,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    #[serde(default)]
    pub m: Option<f64>,
    #[serde(default)]
    pub b: Option<f64>,
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub depth: Option<usize>,
    #[serde(default)]
    pub domain_start: Option<f64>,
}

impl Default for WeightSection {
    fn default() -> Self {
        Self { name: Some("power".into()), expr: None, params: BTreeMap::new(), m: Some(3.0), b: None, alpha: None, depth: None, domain_start: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Frame {
    /// `g'' + K g = 0` from `g(t0) = 0`, `g'(t0) = 1`.
    #[default]
    Cp,
    /// `(v z')' + A v z = 0` from `z(0+) = 1`, `(v z')(0) = 0`.
    Weighted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    #[serde(default)]
    pub frame: Frame,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FamilySpec {
    Poly { alpha: f64, b: f64 },
    Euler { b: f64 },
}

impl FamilySpec {
    pub fn lower_bound(&self) -> LowerBoundFamily {
        match *self {
            Self::Poly { alpha, b } => LowerBoundFamily::PolyLowerBound { alpha, b },
            Self::Euler { b } => LowerBoundFamily::EulerLowerBound { b },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default = "GridSpec::default_lo")]
    pub lo: f64,
    #[serde(default = "GridSpec::default_hi")]
    pub hi: f64,
    #[serde(default = "GridSpec::default_n")]
    pub n: usize,
    #[serde(default)]
    pub minimize: bool,
}

impl GridSpec {
    fn default_lo() -> f64 {
        1e-2
    }
    fn default_hi() -> f64 {
        1e3
    }
    fn default_n() -> usize {
        24
    }

    pub fn search(&self) -> SearchGrid {
        SearchGrid { lo: self.lo, hi: self.hi, n: self.n, mode: if self.minimize { SearchMode::MinimizeBound } else { SearchMode::FirstHit } }
    }
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { lo: Self::default_lo(), hi: Self::default_hi(), n: Self::default_n(), minimize: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CriteriaSection {
    /// Defaults to positivity, first zero and the two classical tests,
    /// minus those incompatible with a sign-changing potential.
    #[serde(default)]
    pub select: Option<Vec<String>>,
    /// Verification horizon for sampled conditions.
    #[serde(default = "CriteriaSection::default_horizon")]
    pub horizon: f64,
    /// Checkpoint horizon for divergence conditions with nested-log growth.
    #[serde(default = "CriteriaSection::default_limsup_horizon")]
    pub limsup_horizon: f64,
    #[serde(default = "CriteriaSection::default_depth")]
    pub depth: usize,
    /// Left end for eventual conditions; `0` selects the global variants.
    #[serde(default)]
    pub t0: f64,
    /// `R` for the oscillation functional.
    #[serde(default = "CriteriaSection::default_r")]
    pub oscillation_start: f64,
    #[serde(default = "CriteriaSection::default_lambda")]
    pub moore_lambda: f64,
    #[serde(default)]
    pub family: Option<FamilySpec>,
    #[serde(default)]
    pub search: GridSpec,
    #[serde(default)]
    pub mrv: Option<MrvSpec>,
    #[serde(default)]
    pub calabi: Option<RangeSpec>,
}

impl CriteriaSection {
    fn default_horizon() -> f64 {
        1e8
    }
    fn default_limsup_horizon() -> f64 {
        1e300
    }
    fn default_depth() -> usize {
        2
    }
    fn default_r() -> f64 {
        1.0
    }
    fn default_lambda() -> f64 {
        0.5
    }

    pub fn check_config(&self) -> CheckConfig {
        CheckConfig { horizon: self.horizon, ..CheckConfig::default() }
    }

    pub fn hille_nehari_config(&self) -> HilleNehariConfig {
        HilleNehariConfig { horizon: self.horizon, ..HilleNehariConfig::default() }
    }

    pub fn refined_config(&self) -> RefinedConfig {
        RefinedConfig::default()
    }
}

impl Default for CriteriaSection {
    fn default() -> Self {
        toml::from_str("").expect("defaults")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MrvSpec {
    #[serde(rename = "B", default)]
    pub b_coef: f64,
    pub a: f64,
    pub b: f64,
    #[serde(default)]
    pub lambda: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RangeSpec {
    pub a: f64,
    pub b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSection {
    #[serde(default = "OracleSection::default_horizon")]
    pub horizon: f64,
    #[serde(default = "OracleSection::default_rtol")]
    pub rtol: f64,
    /// Optional envelope expression for the growth fit.
    #[serde(default)]
    pub envelope: Option<String>,
    /// Extra parameters for the envelope, on top of the potential's.
    #[serde(default)]
    pub envelope_params: BTreeMap<String, f64>,
    #[serde(default)]
    pub skip: bool,
}

impl OracleSection {
    fn default_horizon() -> f64 {
        1e6
    }
    fn default_rtol() -> f64 {
        1e-10
    }
}

impl Default for OracleSection {
    fn default() -> Self {
        Self { horizon: Self::default_horizon(), rtol: Self::default_rtol(), envelope: None, envelope_params: BTreeMap::new(), skip: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ShiftSpec {
    NegativePart { alpha: f64, b: f64 },
    Euler { b: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertifySection {
    #[serde(default = "CertifySection::default_m")]
    pub m: usize,
    pub shift: ShiftSpec,
    #[serde(default)]
    pub search: GridSpec,
}

impl CertifySection {
    fn default_m() -> usize {
        3
    }

    pub fn strategy(&self) -> CertifyStrategy {
        let family = match self.shift {
            ShiftSpec::NegativePart { alpha, b } => ShiftFamily::NegativePart { alpha, b },
            ShiftSpec::Euler { b } => ShiftFamily::Euler { b },
        };
        CertifyStrategy { family, grid: self.search.search() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveSection {
    #[serde(default = "CurveSection::default_range")]
    pub range: [f64; 2],
    #[serde(default = "CurveSection::default_points")]
    pub points: usize,
    #[serde(default)]
    pub depth: usize,
}

impl CurveSection {
    fn default_range() -> [f64; 2] {
        [10.0, 1e4]
    }
    fn default_points() -> usize {
        50
    }
}

impl Default for CurveSection {
    fn default() -> Self {
        Self { range: Self::default_range(), points: Self::default_points(), depth: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    /// Report path; standard output when absent.
    #[serde(default)]
    pub report: Option<String>,
    #[serde(default)]
    pub trajectory_csv: Option<String>,
    #[serde(default)]
    pub format: Option<String>,
}

const NONNEGATIVE_ONLY: &[&str] = &["check_first_zero", "check_oscillation", "hille_nehari", "calabi_finite_form"];

pub const KNOWN_CRITERIA: &[&str] = &[
    "check_positivity",
    "check_nonoscillation",
    "check_first_zero",
    "check_oscillation",
    "hille_nehari",
    "moore",
    "mrv_first_zero",
    "calabi_finite_form",
    "generalized_calabi",
    "refined_nonoscillation",
];

impl AnalysisSpec {
    pub fn parse(src: &str) -> Result<Self, AppError> {
        let spec: Self = toml::from_str(src).map_err(|e| AppError::Spec(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), AppError> {
        self.build_potential()?;
        self.build_weight()?;
        for c in self.selected() {
            if !KNOWN_CRITERIA.contains(&c.as_str()) {
                return Err(AppError::Spec(format!("unknown criterion `{c}`")));
            }
        }
        let selected = self.selected();
        let needs = |name: &str| selected.iter().any(|c| c == name);
        if needs("generalized_calabi") && self.criteria.family.is_none() {
            return Err(AppError::Spec("generalized_calabi needs [criteria.family]".into()));
        }
        if needs("mrv_first_zero") && self.criteria.mrv.is_none() {
            return Err(AppError::Spec("mrv_first_zero needs [criteria.mrv]".into()));
        }
        if needs("calabi_finite_form") && self.criteria.calabi.is_none() {
            return Err(AppError::Spec("calabi_finite_form needs [criteria.calabi]".into()));
        }
        if self.sign_changing() {
            if let Some(c) = selected.iter().find(|c| NONNEGATIVE_ONLY.contains(&c.as_str())) {
                return Err(AppError::Spec(format!("criterion `{c}` requires a nonnegative potential")));
            }
        }
        Ok(())
    }

    pub fn sign_changing(&self) -> bool {
        self.potential.sign_hint.as_deref() == Some("sign_changing")
    }

    pub fn selected(&self) -> Vec<String> {
        match &self.criteria.select {
            Some(s) => s.clone(),
            None => ["check_positivity", "check_first_zero", "hille_nehari", "moore"]
                .iter()
                .filter(|c| !(self.sign_changing() && NONNEGATIVE_ONLY.contains(c)))
                .map(|c| c.to_string())
                .collect(),
        }
    }

    pub fn build_potential(&self) -> Result<PotentialSpec<f64>, AppError> {
        let p = &self.potential;
        let mut k = PotentialSpec::parse(&p.expr, &p.params).map_err(|e| AppError::Spec(format!("[potential] {e}")))?;
        k = k.with_domain_start(p.domain_start).with_breakpoints(p.breakpoints.clone());
        if let Some(h) = &p.sign_hint {
            let hint = match h.as_str() {
                "nonnegative" => SignHint::Nonnegative,
                "sign_changing" => SignHint::SignChanging,
                other => SignHint::BoundedBelowBy(
                    parse_expression(other)
                        .and_then(|e| e.bind(&p.params))
                        .map_err(|e| AppError::Spec(format!("[potential] sign_hint: {e}")))?,
                ),
            };
            k = k.with_sign_hint(hint);
        }
        let lo = if p.domain_start > 0.0 { p.domain_start } else { 0.0 };
        let grid: Vec<f64> = crate::scalar::geomspace(1e-3, 1e3, 200).into_iter().map(|x| lo + x).collect();
        k.validate(&grid).map_err(|e| AppError::Spec(format!("[potential] {e}")))?;
        Ok(k)
    }

    pub fn build_weight(&self) -> Result<Weight<f64>, AppError> {
        let w = &self.weight;
        let bad = |s: String| AppError::Spec(format!("[weight] {s}"));
        let mut v = match (&w.name, &w.expr) {
            (_, Some(e)) => Weight::parse(e, &w.params).map_err(|e| bad(e.to_string()))?,
            (Some(n), None) => match n.as_str() {
                "power" => Weight::power(w.m.unwrap_or(3.0)),
                "t_log2" => Weight::t_log2(),
                "sinh2" => Weight::sinh2(w.b.ok_or_else(|| bad("sinh2 needs b".into()))?, w.alpha.unwrap_or(0.0)),
                "euler2" => Weight::euler2(w.b.ok_or_else(|| bad("euler2 needs b".into()))?),
                "ladder" => Weight::ladder(w.depth.unwrap_or(1)).map_err(|e| bad(e.to_string()))?,
                "unit" => Weight::unit(),
                other => return Err(bad(format!("unknown weight `{other}`"))),
            },
            (None, None) => Weight::power(3.0),
        };
        if let Some(d) = w.domain_start {
            v = v.with_domain_start(d);
        }
        Ok(v)
    }

    /// The default frame `v = t²` leaves `A = K` unchanged.
    pub fn is_identity_frame(&self) -> bool {
        let w = &self.weight;
        w.expr.is_none() && w.name.as_deref().unwrap_or("power") == "power" && w.m.unwrap_or(3.0) == 3.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_spec() {
        let s = AnalysisSpec::parse("[potential]\nexpr = \"1\"\n").unwrap();
        assert_eq!(s.criteria.horizon, 1e8);
        assert!(s.is_identity_frame());
        assert_eq!(s.build_potential().unwrap().eval(3.0), 1.0);
    }

    #[test]
    fn unbound_parameter_is_rejected() {
        let err = AnalysisSpec::parse("[potential]\nexpr = \"c*t\"\n").unwrap_err();
        assert!(matches!(err, AppError::Spec(_)));
    }

    #[test]
    fn unknown_criterion_is_rejected() {
        let err = AnalysisSpec::parse("[potential]\nexpr = \"1\"\n[criteria]\nselect = [\"nope\"]\n").unwrap_err();
        assert!(err.to_string().contains("nope"));
    }
}
