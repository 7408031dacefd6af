//! Weights `v(r) > 0`, their tails `∫_r^∞ ds/v` and critical curves
//! `χ = {2 v tail}^{-2}`.
//!
//! Weights are stored through `ln v` so that exponentially growing weights
//! (squares of `sinh`-type shift solutions) stay representable; tails are
//! likewise evaluated as `ln tail` with the integrand rescaled by `v(r)`.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::expr::{parse_expression, Expr, ExprError};
use crate::quad::{integrate_head, integrate_split, integrate_tail, QuadConfig, QuadError};
use crate::scalar::{geomspace, lit, to_f64, Real};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WeightError {
    #[error("tail integral of 1/v diverges (no convergence before r = {reached:e}, remainder {remainder:e})")]
    DivergentTail { reached: f64, remainder: f64 },
    #[error("closed-form tail disagrees with quadrature at r = {at:e}: {closed:e} vs {numeric:e}")]
    ClosedFormMismatch { at: f64, closed: f64, numeric: f64 },
    #[error("weight is not positive at r = {at:e}")]
    NonPositive { at: f64 },
    #[error("r = {r:e} is outside the weight domain (r > {domain_start:e})")]
    OutsideDomain { r: f64, domain_start: f64 },
    #[error("quadrature failed: {0}")]
    Quad(QuadError),
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error("invalid weight: {0}")]
    Invalid(String),
}

impl From<QuadError> for WeightError {
    fn from(e: QuadError) -> Self {
        match e {
            QuadError::DivergentTail { reached, remainder } => WeightError::DivergentTail { reached, remainder },
            other => WeightError::Quad(other),
        }
    }
}

pub(crate) type ScalarFn<T> = Arc<dyn Fn(T) -> T + Send + Sync>;

#[derive(Clone)]
pub struct Weight<T> {
    ln_v: ScalarFn<T>,
    ln_tail: Option<ScalarFn<T>>,
    pub domain_start: T,
    pub label: String,
    pub quad: QuadConfig<T>,
    breakpoints: Vec<T>,
    unit: bool,
}

impl<T: fmt::Debug> fmt::Debug for Weight<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Weight")
            .field("label", &self.label)
            .field("domain_start", &self.domain_start)
            .field("closed_form_tail", &self.ln_tail.is_some())
            .finish()
    }
}

impl<T: Real> Weight<T> {
    pub fn from_fn(label: impl Into<String>, v: impl Fn(T) -> T + Send + Sync + 'static) -> Self {
        Self::from_ln_fn(label, move |r| v(r).ln())
    }

    pub fn from_ln_fn(label: impl Into<String>, ln_v: impl Fn(T) -> T + Send + Sync + 'static) -> Self {
        Self {
            ln_v: Arc::new(ln_v),
            ln_tail: None,
            domain_start: T::zero(),
            label: label.into(),
            quad: QuadConfig::default(),
            breakpoints: Vec::new(),
            unit: false,
        }
    }

    /// `v ≡ 1` (no tail: the unweighted problem).
    pub fn unit() -> Self {
        let mut w = Self::from_ln_fn("1", |_| T::zero());
        w.unit = true;
        w
    }

    pub fn is_unit(&self) -> bool {
        self.unit
    }

    pub fn from_expr(expr: Expr) -> Self {
        let label = expr.source().to_string();
        let breakpoints = expr.breakpoints().into_iter().map(lit).collect();
        let mut w = Self::from_fn(label, move |r| expr.eval(r));
        w.breakpoints = breakpoints;
        w
    }

    pub fn parse(src: &str, params: &std::collections::BTreeMap<String, f64>) -> Result<Self, WeightError> {
        Ok(Self::from_expr(parse_expression(src)?.bind(params)?))
    }

    /// Attaches a closed-form tail `r ↦ ∫_r^∞ ds/v` without checking it.
    /// Use [`Weight::with_checked_tail`] for user-supplied formulas.
    pub fn with_tail(self, tail: impl Fn(T) -> T + Send + Sync + 'static) -> Self {
        self.with_ln_tail(move |r| tail(r).ln())
    }

    pub fn with_ln_tail(mut self, ln_tail: impl Fn(T) -> T + Send + Sync + 'static) -> Self {
        self.ln_tail = Some(Arc::new(ln_tail));
        self
    }

    /// Attaches a closed-form tail after cross-checking it against quadrature.
    pub fn with_checked_tail(self, tail: impl Fn(T) -> T + Send + Sync + 'static) -> Result<Self, WeightError> {
        let w = self.with_tail(tail);
        w.check_closed_tail()?;
        Ok(w)
    }

    pub fn with_domain_start(mut self, r0: T) -> Self {
        self.domain_start = r0;
        self
    }

    pub fn with_quad(mut self, quad: QuadConfig<T>) -> Self {
        self.quad = quad;
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn has_closed_tail(&self) -> bool {
        self.ln_tail.is_some()
    }

    pub fn breakpoints(&self) -> &[T] {
        &self.breakpoints
    }

    #[inline]
    pub fn ln_value(&self, r: T) -> T {
        (self.ln_v)(r)
    }

    #[inline]
    pub fn value(&self, r: T) -> T {
        (self.ln_v)(r).exp()
    }

    /// `c·v` for a constant `c > 0`.
    pub fn scaled(&self, c: T) -> Self {
        let ln_c = c.ln();
        let base = self.ln_v.clone();
        let mut out = self.clone();
        out.ln_v = Arc::new(move |r| base(r) + ln_c);
        out.ln_tail = self.ln_tail.clone().map(|t| -> ScalarFn<T> { Arc::new(move |r| t(r) - ln_c) });
        out.unit = false;
        out.label = format!("{} * {}", to_f64(c), self.label);
        out
    }

    /// `v · w²` given `ln w`.
    pub fn times_square(&self, label: impl Into<String>, ln_w: ScalarFn<T>) -> Self {
        let base = self.ln_v.clone();
        let two = lit::<T>(2.0);
        let mut out = Self::from_ln_fn(label, move |r| base(r) + two * ln_w(r));
        out.domain_start = self.domain_start;
        out.quad = self.quad;
        out.breakpoints = self.breakpoints.clone();
        out
    }

    /// `ln ∫_r^∞ ds/v`.
    pub fn ln_tail(&self, r: T) -> Result<T, WeightError> {
        if r <= self.domain_start {
            return Err(WeightError::OutsideDomain { r: to_f64(r), domain_start: to_f64(self.domain_start) });
        }
        if let Some(t) = &self.ln_tail {
            return Ok(t(r));
        }
        self.ln_tail_numeric(r)
    }

    /// Quadrature path of [`Weight::ln_tail`], ignoring any closed form.
    pub fn ln_tail_numeric(&self, r: T) -> Result<T, WeightError> {
        let ln_vr = self.ln_value(r);
        if !ln_vr.is_finite() {
            return Err(WeightError::NonPositive { at: to_f64(r) });
        }
        let ln_v = &self.ln_v;
        let f = |s: T| (ln_vr - ln_v(s)).exp();
        let res = integrate_tail(&f, r, &self.quad)?;
        if !(res.value > T::zero()) {
            return Err(WeightError::NonPositive { at: to_f64(r) });
        }
        Ok(res.value.ln() - ln_vr)
    }

    pub fn tail(&self, r: T) -> Result<T, WeightError> {
        self.ln_tail(r).map(|x| x.exp())
    }

    /// `∫_a^b ds/v` on a finite interval.
    pub fn inverse_integral(&self, a: T, b: T) -> T {
        let ln_v = &self.ln_v;
        integrate_split(&|s: T| (-ln_v(s)).exp(), a, b, &self.breakpoints, &self.quad).value
    }

    /// `∫_0^b v` (or from `domain_start` when positive).
    pub fn head_integral(&self, b: T) -> Result<T, WeightError> {
        let ln_v = &self.ln_v;
        let f = |s: T| ln_v(s).exp();
        if self.domain_start > T::zero() {
            return Ok(integrate_split(&f, self.domain_start, b, &self.breakpoints, &self.quad).value);
        }
        Ok(integrate_head(&f, b, &self.quad)?.value)
    }

    /// Points used by the closed-form cross-check.
    fn check_points(&self) -> Vec<T> {
        let d = self.domain_start;
        let base = if d > T::zero() { d * lit(0.5) + T::one() } else { T::one() };
        (0..5).map(|i| d + base * lit::<T>(2.0_f64.powi(i * 2))).collect()
    }

    /// Compares `tail(a) - tail(b)` with `∫_a^b ds/v` at five points.
    pub fn check_closed_tail(&self) -> Result<(), WeightError> {
        if self.ln_tail.is_none() {
            return Ok(());
        }
        let cfg = QuadConfig::tight();
        let ln_v = &self.ln_v;
        for a in self.check_points() {
            let b = a * lit(3.0);
            let (ta, tb) = (self.tail(a)?, self.tail(b)?);
            let closed = ta - tb;
            let numeric = {
                let ln_va = ln_v(a);
                let f = |s: T| (ln_va - ln_v(s)).exp();
                integrate_split(&f, a, b, &self.breakpoints, &cfg).value * (-ln_va).exp()
            };
            let tol = lit::<T>(1e-7) * ta.abs() + lit::<T>(1e-300);
            if !((closed - numeric).abs() <= tol) || !(ta > tb) {
                return Err(WeightError::ClosedFormMismatch { at: to_f64(a), closed: to_f64(closed), numeric: to_f64(numeric) });
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// built-in weights

impl<T: Real> Weight<T> {
    /// `r^{m-1}`; closed-form tail `r^{2-m}/(m-2)` for `m > 2`.
    pub fn power(m: T) -> Self {
        let e = m - T::one();
        let w = Self::from_ln_fn(format!("power({})", to_f64(m)), move |r: T| e * r.ln());
        if m > lit(2.0) {
            let k = m - lit(2.0);
            w.with_ln_tail(move |r: T| -k * r.ln() - k.ln())
        } else {
            w
        }
    }

    /// `r log² r` on `(1, ∞)`, tail `1/log r`.
    pub fn t_log2() -> Self {
        Self::from_ln_fn("t*log(t)^2", |r: T| r.ln() + lit::<T>(2.0) * r.ln().ln())
            .with_domain_start(T::one())
            .with_ln_tail(|r: T| -r.ln().ln())
    }

    /// `w²` for the sign-changing shift under `K ≥ -B²(1+t²)^{α/2}`.
    pub fn sinh2(b: T, alpha: T) -> Self {
        crate::specialfn::shift_solution_negative_part(alpha, b).squared_weight()
    }

    /// `w²` for the Euler shift under `K ≥ B²/(1+t)²`.
    pub fn euler2(b: T) -> Self {
        crate::specialfn::euler_solution(b).squared_weight()
    }

    /// Stage `k` of the nested-log ladder built on `t log² t`.
    pub fn ladder(k: usize) -> Result<Self, crate::transforms::TransformError> {
        let stages = crate::transforms::refine_ladder(&Self::t_log2(), k)?;
        Ok(stages.into_iter().last().expect("ladder has at least the base stage").weight)
    }
}

/// `∫_r^∞ ds/v`.
pub fn tail_integral<T: Real>(v: &Weight<T>, r: T) -> Result<T, WeightError> {
    v.tail(r)
}

#[derive(Clone, Debug)]
pub struct CriticalCurve<T> {
    pub source: Weight<T>,
}

impl<T: Real> CriticalCurve<T> {
    /// `ln √χ(r) = -ln 2 - ln v(r) - ln tail(r)`.
    pub fn ln_sqrt(&self, r: T) -> Result<T, WeightError> {
        Ok(-T::LN_2() - self.source.ln_value(r) - self.source.ln_tail(r)?)
    }

    pub fn sqrt_eval(&self, r: T) -> Result<T, WeightError> {
        self.ln_sqrt(r).map(|x| x.exp())
    }

    pub fn eval(&self, r: T) -> Result<T, WeightError> {
        self.ln_sqrt(r).map(|x| (x + x).exp())
    }

    /// `∫_R^r √χ` via the tail identity.
    pub fn path_integral(&self, lo: T, hi: T) -> Result<T, WeightError> {
        Ok(lit::<T>(0.5) * (self.source.ln_tail(lo)? - self.source.ln_tail(hi)?))
    }

    /// `∫_R^r √χ` by direct quadrature of `√χ`.
    pub fn path_integral_numeric(&self, lo: T, hi: T, cfg: &QuadConfig<T>) -> T {
        let f = |s: T| self.sqrt_eval(s).unwrap_or(T::nan());
        integrate_split(&f, lo, hi, self.source.breakpoints(), cfg).value
    }
}

pub fn critical_curve<T: Real>(v: &Weight<T>) -> Result<CriticalCurve<T>, WeightError> {
    let probe = if v.domain_start > T::zero() { v.domain_start * lit(2.0) + T::one() } else { T::one() };
    v.ln_tail(probe)?;
    Ok(CriticalCurve { source: v.clone() })
}

// ---------------------------------------------------------------------------
// structural conditions

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ConditionStatus {
    Pass,
    Fail,
    Undecided,
}

#[derive(Debug, Clone, Serialize)]
pub struct SampleGrid {
    /// Points in `(0, a]`, increasing.
    pub head: Vec<f64>,
    pub a: f64,
}

impl SampleGrid {
    pub fn standard(a: f64) -> Self {
        Self { head: geomspace(a * 1e-8, a, 41), a }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionReport {
    pub v1: ConditionStatus,
    pub v2: ConditionStatus,
    pub v3: ConditionStatus,
    pub vl1: ConditionStatus,
    pub grid: SampleGrid,
    pub note: String,
}

/// Classifies a positive sequence sampled at `r → 0⁺` (index 0 = smallest r).
fn trend_to_zero(q: &[f64]) -> ConditionStatus {
    if q.len() < 17 || q.iter().any(|x| !x.is_finite()) {
        return ConditionStatus::Undecided;
    }
    // q[0] is four decades below q[16] on the standard grid.
    let rho = q[0] / q[16];
    if rho < 1e-2 {
        ConditionStatus::Pass
    } else if rho > 0.5 {
        ConditionStatus::Fail
    } else {
        ConditionStatus::Undecided
    }
}

fn bounded_near_zero(q: &[f64]) -> ConditionStatus {
    if q.len() < 10 || q.iter().any(|x| !x.is_finite()) {
        return ConditionStatus::Undecided;
    }
    let small = q[..5].iter().copied().fold(0.0, f64::max);
    let rest = q[5..].iter().copied().fold(0.0, f64::max) + 1e-300;
    if small <= 10.0 * rest {
        ConditionStatus::Pass
    } else if small > 1e3 * rest {
        ConditionStatus::Fail
    } else {
        ConditionStatus::Undecided
    }
}

/// Sampled evidence for the structural weight conditions.
pub fn validate_weight(v: &Weight<f64>, grid: &SampleGrid) -> ConditionReport {
    let note = "sampled evidence on the given representative of v, not a proof".to_string();
    if v.domain_start > 0.0 {
        let vl1 = match v.ln_tail(v.domain_start + grid.a) {
            Ok(_) => ConditionStatus::Pass,
            Err(_) => ConditionStatus::Fail,
        };
        return ConditionReport {
            v1: ConditionStatus::Undecided,
            v2: ConditionStatus::Undecided,
            v3: ConditionStatus::Undecided,
            vl1,
            grid: grid.clone(),
            note: format!("{note}; weight defined only beyond r = {}", v.domain_start),
        };
    }
    let vals: Vec<f64> = grid.head.iter().map(|&r| v.value(r)).collect();
    let v1 = if vals.iter().any(|x| !(*x > 0.0)) { ConditionStatus::Fail } else { trend_to_zero(&vals) };

    let cfg = QuadConfig::default();
    let ln_v = |s: f64| v.ln_value(s);
    let q_inv: Vec<f64> = grid
        .head
        .iter()
        .map(|&r| {
            let ln_vr = ln_v(r);
            integrate_split(&|s: f64| (ln_vr - ln_v(s)).exp(), r, grid.a, &[], &cfg).value
        })
        .collect();
    let q_mean: Vec<f64> = grid
        .head
        .iter()
        .map(|&r| {
            let ln_vr = ln_v(r);
            match integrate_head(&|s: f64| (ln_v(s) - ln_vr).exp(), r, &cfg) {
                Ok(res) => res.value,
                Err(_) => f64::INFINITY,
            }
        })
        .collect();
    let v2 = match (bounded_near_zero(&q_inv), bounded_near_zero(&q_mean)) {
        (ConditionStatus::Pass, ConditionStatus::Pass) => ConditionStatus::Pass,
        (ConditionStatus::Fail, _) | (_, ConditionStatus::Fail) => ConditionStatus::Fail,
        _ => ConditionStatus::Undecided,
    };
    let v3 = trend_to_zero(&q_mean);
    let vl1 = match v.ln_tail(grid.a) {
        Ok(_) => ConditionStatus::Pass,
        Err(WeightError::DivergentTail { .. }) => ConditionStatus::Fail,
        Err(_) => ConditionStatus::Undecided,
    };
    ConditionReport { v1, v2, v3, vl1, grid: grid.clone(), note }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CurveOrdering {
    ChiLeq,
    ChiGeq,
    ChiEqual,
    NoMonotonicity,
}

impl CurveOrdering {
    pub fn mirrored(self) -> Self {
        match self {
            CurveOrdering::ChiLeq => CurveOrdering::ChiGeq,
            CurveOrdering::ChiGeq => CurveOrdering::ChiLeq,
            other => other,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CurveComparison {
    pub ordering: CurveOrdering,
    /// The pointwise ordering implied by `ordering` held at every spot-check point.
    pub spot_check_ok: bool,
    pub spot_points: Vec<f64>,
}

/// Orders `χ_v` against `χ_f` on `(lo, hi)` from the monotonicity of `v/f`.
pub fn compare_critical_curves<T: Real>(v: &Weight<T>, f: &Weight<T>, lo: T, hi: T) -> Result<CurveComparison, WeightError> {
    let grid = geomspace(lo * lit(1.0001), hi, 64);
    let ratio: Vec<T> = grid.iter().map(|&r| v.ln_value(r) - f.ln_value(r)).collect();
    let tol = lit::<T>(1e-12);
    let scale = |x: T| tol * (T::one() + x.abs());
    let nonincreasing = ratio.windows(2).all(|w| w[1] <= w[0] + scale(w[0]));
    let nondecreasing = ratio.windows(2).all(|w| w[1] >= w[0] - scale(w[0]));
    let ordering = match (nonincreasing, nondecreasing) {
        (true, true) => CurveOrdering::ChiEqual,
        (true, false) => CurveOrdering::ChiLeq,
        (false, true) => CurveOrdering::ChiGeq,
        (false, false) => CurveOrdering::NoMonotonicity,
    };
    let (cv, cf) = (critical_curve(v)?, critical_curve(f)?);
    let spot = geomspace(lo * lit(1.5), hi, 6);
    let mut ok = true;
    for &r in &spot {
        let (a, b) = (cv.ln_sqrt(r)?, cf.ln_sqrt(r)?);
        let slack = lit::<T>(1e-7);
        ok &= match ordering {
            CurveOrdering::ChiLeq => a <= b + slack,
            CurveOrdering::ChiGeq => a >= b - slack,
            CurveOrdering::ChiEqual => (a - b).abs() <= slack,
            CurveOrdering::NoMonotonicity => true,
        };
    }
    Ok(CurveComparison { ordering, spot_check_ok: ok, spot_points: spot.iter().map(|&x| to_f64(x)).collect() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::E;

    #[test]
    fn power_tail_and_curve() {
        let v = Weight::<f64>::power(3.0);
        assert!((v.tail(2.0).unwrap() - 0.5).abs() < 1e-15);
        assert!((v.ln_tail_numeric(2.0).unwrap().exp() - 0.5).abs() < 1e-9);
        let chi = critical_curve(&v).unwrap();
        for r in [0.5, 2.0, 17.0] {
            assert!((chi.eval(r).unwrap() - 1.0 / (4.0 * r * r)).abs() < 1e-14 / (r * r));
        }
        v.check_closed_tail().unwrap();
    }

    #[test]
    fn log_weight_closed_tail() {
        let v = Weight::<f64>::t_log2();
        assert!((v.tail(E).unwrap() - 1.0).abs() < 1e-15);
        v.check_closed_tail().unwrap();
        let chi = critical_curve(&v).unwrap();
        let r: f64 = 50.0;
        assert!((chi.eval(r).unwrap() - 1.0 / (4.0 * r * r * r.ln().powi(2))).abs() < 1e-15);
    }

    #[test]
    fn expression_weight_without_tail_is_divergent_for_slow_logs() {
        let v = Weight::<f64>::parse("t*log(t)^2", &Default::default()).unwrap().with_domain_start(1.0);
        assert!(matches!(v.tail(E), Err(WeightError::DivergentTail { .. })));
    }

    #[test]
    fn bad_closed_form_is_rejected() {
        let v = Weight::<f64>::from_fn("t^2", |r| r * r);
        assert!(v.clone().with_checked_tail(|r| 1.0 / r).is_ok());
        assert!(matches!(v.with_checked_tail(|r| 2.0 / r), Err(WeightError::ClosedFormMismatch { .. })));
    }

    #[test]
    fn scaling_leaves_curve_unchanged() {
        let v = Weight::<f64>::from_fn("exp", |r| r.exp() - 1.0);
        for c in [0.1, 7.0] {
            let (a, b) = (critical_curve(&v).unwrap(), critical_curve(&v.scaled(c)).unwrap());
            for r in [0.5, 3.0] {
                let (x, y) = (a.eval(r).unwrap(), b.eval(r).unwrap());
                assert!((x - y).abs() < 1e-8 * x);
            }
        }
    }

    #[test]
    fn conditions_for_standard_weights() {
        let g = SampleGrid::standard(1.0);
        let r2 = validate_weight(&Weight::power(3.0), &g);
        assert_eq!([r2.v1, r2.v2, r2.v3, r2.vl1], [ConditionStatus::Pass; 4]);
        let one = validate_weight(&Weight::from_fn("1", |_| 1.0), &g);
        assert_eq!(one.v1, ConditionStatus::Fail);
        assert_eq!(one.vl1, ConditionStatus::Fail);
        let ex = validate_weight(&Weight::from_fn("e^r - 1", |r: f64| r.exp_m1()), &g);
        assert_eq!([ex.v1, ex.v2, ex.v3, ex.vl1], [ConditionStatus::Pass; 4]);
    }

    #[test]
    fn curve_comparison_mirrors() {
        let (v, f) = (Weight::<f64>::power(3.0), Weight::<f64>::power(4.0));
        let a = compare_critical_curves(&v, &f, 1.0, 1e3).unwrap();
        let b = compare_critical_curves(&f, &v, 1.0, 1e3).unwrap();
        assert_eq!(a.ordering, CurveOrdering::ChiLeq);
        assert_eq!(b.ordering, CurveOrdering::ChiGeq);
        assert!(a.spot_check_ok && b.spot_check_ok);
        let s = compare_critical_curves(&v, &v, 1.0, 1e3).unwrap();
        assert_eq!(s.ordering, CurveOrdering::ChiEqual);
        assert!(s.spot_check_ok);
    }
}
