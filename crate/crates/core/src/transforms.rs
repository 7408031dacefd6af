//! Problem rewriting: the change of variables between `g'' + Kg = 0` and the
//! weighted problem, the weight shift for sign-changing potentials, and the
//! nested critical-curve ladder.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::potential::PotentialSpec;
use crate::roots::{brent, RootError};
use crate::scalar::{geomspace, lit, to_f64, Real};
use crate::weights::{critical_curve, CriticalCurve, ScalarFn, Weight, WeightError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TransformError {
    #[error("invalid weight for the change of variables: {0}")]
    InvalidWeight(String),
    #[error("no bracket for the inverse variable map at t = {t:e}")]
    BracketFailure { t: f64 },
    #[error("shifted potential A + W = {value:e} < 0 at t = {at:e}")]
    NegativeShiftedPotential { at: f64, value: f64 },
    #[error("shift weight residual {residual:e} out of tolerance at t = {at:e}")]
    ShiftResidual { at: f64, residual: f64 },
    #[error("ladder stalls at stage {stage}: {reason}")]
    LadderStall { stage: usize, reason: String },
    #[error(transparent)]
    Weight(#[from] WeightError),
    #[error(transparent)]
    Root(#[from] RootError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ResidualKind {
    /// `(v w')' - W v w = 0`.
    Equality,
    /// `(v w')' - W v w >= 0`.
    Supersolution,
}

/// A positive `w` with `(v w')' - W v w >= 0` (or `= 0`), stored as `ln w`.
#[derive(Clone)]
pub struct ShiftWeight<T> {
    ln_w: ScalarFn<T>,
    ln_tail_sq: Option<ScalarFn<T>>,
    pub positivity_start: T,
    pub source_inequality: String,
    pub label: String,
    /// The `W` this weight absorbs.
    pub shift: PotentialSpec<T>,
    pub kind: ResidualKind,
    /// `w(0) = 0`, `w'(0) > 0`.
    pub vanishes_at_origin: bool,
    pub normalization: String,
}

impl<T: fmt::Debug> fmt::Debug for ShiftWeight<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ShiftWeight")
            .field("label", &self.label)
            .field("positivity_start", &self.positivity_start)
            .field("kind", &self.kind)
            .finish()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ResidualReport {
    pub max_abs_scaled: f64,
    pub min_scaled: f64,
    pub worst_at: f64,
    pub points: usize,
    pub ok: bool,
}

impl<T: Real> ShiftWeight<T> {
    pub fn new(label: impl Into<String>, ln_w: ScalarFn<T>, shift: PotentialSpec<T>, kind: ResidualKind) -> Self {
        Self {
            ln_w,
            ln_tail_sq: None,
            positivity_start: T::zero(),
            source_inequality: String::new(),
            label: label.into(),
            shift,
            kind,
            vanishes_at_origin: false,
            normalization: "none".into(),
        }
    }

    /// `w ≡ 1` with `W ≡ 0`.
    pub fn identity() -> Self {
        Self::new("1", Arc::new(|_| T::zero()), PotentialSpec::zero(), ResidualKind::Equality)
            .with_inequality("w'' = 0".into())
    }

    pub fn with_inequality(mut self, s: String) -> Self {
        self.source_inequality = s;
        self
    }

    /// Closed form of `ln ∫_t^∞ ds/w²` (for the unweighted base `v ≡ 1`).
    pub fn with_ln_tail_sq(mut self, f: ScalarFn<T>) -> Self {
        self.ln_tail_sq = Some(f);
        self
    }

    pub fn vanishing_at_origin(mut self) -> Self {
        self.vanishes_at_origin = true;
        self
    }

    pub fn with_normalization(mut self, s: String) -> Self {
        self.normalization = s;
        self
    }

    pub fn with_positivity_start(mut self, t: T) -> Self {
        self.positivity_start = t;
        self
    }

    #[inline]
    pub fn ln_eval(&self, t: T) -> T {
        (self.ln_w)(t)
    }

    #[inline]
    pub fn eval(&self, t: T) -> T {
        (self.ln_w)(t).exp()
    }

    pub fn ln_fn(&self) -> ScalarFn<T> {
        self.ln_w.clone()
    }

    /// `w²` as a weight over the unweighted base.
    pub fn squared_weight(&self) -> Weight<T> {
        let mut v = Weight::unit().times_square(format!("({})^2", self.label), self.ln_w.clone());
        v.domain_start = self.positivity_start;
        match &self.ln_tail_sq {
            Some(f) => {
                let f = f.clone();
                v.with_ln_tail(move |t| f(t))
            }
            None => v,
        }
    }

    /// Scaled residual `[(v w')'/(v w) - W] / scale` by centred differences of `ln w`,
    /// step `h = max(1e-4, 1e-4 t)`.
    pub fn residual(&self, v: &Weight<T>, t: T) -> T {
        let h = lit::<T>(1e-4).max(lit::<T>(1e-4) * t);
        let two = lit::<T>(2.0);
        let (lm, l0, lp) = (self.ln_eval(t - h), self.ln_eval(t), self.ln_eval(t + h));
        let d1 = (lp - lm) / (two * h);
        let d2 = (lp - two * l0 + lm) / (h * h);
        let dv = (v.ln_value(t + h) - v.ln_value(t - h)) / (two * h);
        let w = self.shift.eval(t);
        let r = d2 + d1 * (d1 + dv) - w;
        let scale = d1 * d1 + d2.abs() + w.abs() + (d1 * dv).abs() + T::min_positive_value();
        r / scale
    }

    pub fn verify(&self, v: &Weight<T>, grid: &[T], tol: T) -> ResidualReport {
        let mut max_abs = T::zero();
        let mut min_r = T::infinity();
        let mut worst = T::zero();
        let mut ok = true;
        let mut n = 0;
        for &t in grid.iter().filter(|&&t| t - lit::<T>(1e-4).max(lit::<T>(1e-4) * t) > self.positivity_start) {
            let r = self.residual(v, t);
            n += 1;
            let bad = match self.kind {
                ResidualKind::Equality => !(r.abs() <= tol),
                ResidualKind::Supersolution => !(r >= -tol),
            };
            if r.abs() > max_abs || r.is_nan() {
                max_abs = r.abs();
                worst = t;
            }
            min_r = min_r.min(r);
            if bad {
                ok = false;
                worst = t;
            }
        }
        ResidualReport { max_abs_scaled: to_f64(max_abs), min_scaled: to_f64(min_r), worst_at: to_f64(worst), points: n, ok }
    }

    /// Samples `w > 0` beyond `positivity_start`.
    pub fn positive_on(&self, grid: &[T]) -> bool {
        grid.iter().filter(|&&t| t > self.positivity_start).all(|&t| self.ln_eval(t).is_finite())
    }
}

/// `t(r) = 1/∫_r^∞ ds/v` and its inverse.
#[derive(Clone, Debug)]
pub struct VarMap<T> {
    pub weight: Weight<T>,
}

impl<T: Real> VarMap<T> {
    pub fn ln_t_of_r(&self, r: T) -> Result<T, WeightError> {
        self.weight.ln_tail(r).map(|x| -x)
    }

    pub fn t_of_r(&self, r: T) -> Result<T, WeightError> {
        self.ln_t_of_r(r).map(|x| x.exp())
    }

    /// `dt/dr = t²/v`.
    pub fn dt_dr(&self, r: T) -> Result<T, WeightError> {
        let lt = self.ln_t_of_r(r)?;
        Ok((lit::<T>(2.0) * lt - self.weight.ln_value(r)).exp())
    }

    pub fn r_of_t(&self, t: T) -> Result<T, TransformError> {
        invert_var_map(&self.weight, t)
    }
}

#[derive(Clone, Debug)]
pub struct TransformedProblem<T> {
    pub weight: Weight<T>,
    pub potential: PotentialSpec<T>,
    pub var_map: Option<VarMap<T>>,
    pub shift: Option<ShiftWeight<T>>,
    pub provenance: Vec<String>,
    /// `(v̄ z̃'/z̃)(0⁺) = 0` holds by construction of the shift family.
    pub initial_contract: bool,
}

/// Solves `1/tail(r) = t` for `r`, in the variable `s = ln(r - domain_start)`.
pub fn invert_var_map<T: Real>(v: &Weight<T>, t: T) -> Result<T, TransformError> {
    if !(t > T::zero()) {
        return Err(TransformError::BracketFailure { t: to_f64(t) });
    }
    let d = v.domain_start;
    let ln_t = t.ln();
    let f = |s: T| match v.ln_tail(d + s.exp()) {
        Ok(x) => -x - ln_t,
        Err(_) => T::nan(),
    };
    let limit = lit::<T>(if T::max_exponent_hint() > 200 { 650.0 } else { 80.0 });
    let (mut lo, mut hi) = (-T::one(), T::one());
    let mut step = T::one();
    let (mut flo, mut fhi) = (f(lo), f(hi));
    while !(flo < T::zero()) {
        if flo.is_nan() || lo < -limit {
            return Err(TransformError::BracketFailure { t: to_f64(t) });
        }
        hi = lo;
        fhi = flo;
        step = step + step;
        lo -= step;
        flo = f(lo);
    }
    step = T::one();
    while !(fhi > T::zero()) {
        if fhi.is_nan() || hi > limit {
            return Err(TransformError::BracketFailure { t: to_f64(t) });
        }
        lo = hi;
        step = step + step;
        hi += step;
        fhi = f(hi);
    }
    let root = brent(f, lo, hi, lit(1e-15), T::zero())?;
    Ok(d + root.x.exp())
}

trait ExponentHint {
    fn max_exponent_hint() -> i32;
}

impl<T: Real> ExponentHint for T {
    fn max_exponent_hint() -> i32 {
        to_f64(T::max_value().ln()) as i32
    }
}

/// Evidence that `∫_{0⁺} ds/v = ∞`, so that `t(r)` sweeps all of `ℝ⁺`.
fn tail_blows_up_at_start<T: Real>(v: &Weight<T>) -> Result<bool, WeightError> {
    let d = v.domain_start;
    let s = if d > T::zero() { d.max(T::one()) } else { T::one() };
    let at = |k: i32| v.tail(d + s * lit::<T>(10f64.powi(-k)));
    let (a, b, c) = (at(4)?, at(6)?, at(8)?);
    let (i1, i2) = (b - a, c - b);
    Ok(i1 > T::zero() && i2 >= lit::<T>(0.5) * i1)
}

/// `Ā(r) = K(t(r)) t(r)⁴ / v(r)²` in the variable `r`.
pub fn to_weighted<T: Real>(k: &PotentialSpec<T>, v: &Weight<T>) -> Result<TransformedProblem<T>, TransformError> {
    if !tail_blows_up_at_start(v)? {
        return Err(TransformError::InvalidWeight(format!(
            "1/v appears integrable at r = {}+ for v = {}; t(r) would not cover (0, inf)",
            to_f64(v.domain_start),
            v.label
        )));
    }
    let map = VarMap { weight: v.clone() };
    let (m, kk) = (map.clone(), k.clone());
    let four = lit::<T>(4.0);
    let two = lit::<T>(2.0);
    let a = PotentialSpec::from_fn(format!("K(t(r)) t^4/v^2 with K = {}, v = {}", k.label, v.label), move |r: T| {
        if kk.is_identically_zero() {
            return T::zero();
        }
        match m.ln_t_of_r(r) {
            Ok(lt) => kk.eval(lt.exp()) * (four * lt - two * m.weight.ln_value(r)).exp(),
            Err(_) => T::nan(),
        }
    });
    let mut breaks = Vec::new();
    for &b in k.breakpoints() {
        breaks.push(invert_var_map(v, b)?);
    }
    let mut a = a.with_breakpoints(breaks).with_domain_start(v.domain_start);
    if k.is_identically_zero() {
        a = a.with_sign_hint(crate::potential::SignHint::Nonnegative);
    }
    Ok(TransformedProblem {
        weight: v.clone(),
        potential: a,
        var_map: Some(map),
        shift: None,
        provenance: vec![format!(
            "change of variables t(r) = 1/int_r^inf ds/v with v = {}; z(r) = g(t(r))/t(r); A(r) = K(t(r)) t^4/v^2",
            v.label
        )],
        initial_contract: true,
    })
}

/// Default verification grid on `(start, start + 10³]`, refined around breakpoints.
pub fn verification_grid<T: Real>(start: T, breakpoints: &[T]) -> Vec<T> {
    let base = if start > T::zero() { start } else { T::zero() };
    let mut g: Vec<T> = geomspace(lit::<T>(1e-3), lit::<T>(1e3), 400).into_iter().map(|x| base + x).collect();
    for &b in breakpoints {
        for off in [-1e-6, 1e-6] {
            g.push(b + lit::<T>(off) * (T::one() + b.abs()));
        }
    }
    g.retain(|&t| t > start);
    g.sort_by(|a, b| a.partial_cmp(b).expect("finite grid"));
    g
}

/// `v̄ = v w²`, `Ā = A + W`; solutions transform as `z̃ = z/w`.
pub fn weight_shift<T: Real>(
    v: &Weight<T>,
    a: &PotentialSpec<T>,
    w_pot: &PotentialSpec<T>,
    w: &ShiftWeight<T>,
) -> Result<TransformedProblem<T>, TransformError> {
    let start = v.domain_start.max(w.positivity_start);
    let breaks: Vec<T> = a.breakpoints().iter().chain(w_pot.breakpoints()).copied().collect();
    let grid = verification_grid(start, &breaks);
    let tol = lit::<T>(1e-9);
    let a_bar = a.plus(w_pot);
    for &t in &grid {
        let x = a_bar.eval(t);
        if !(x >= -tol) {
            return Err(TransformError::NegativeShiftedPotential { at: to_f64(t), value: to_f64(x) });
        }
    }
    if !w.positive_on(&grid) {
        return Err(TransformError::ShiftResidual { at: to_f64(start), residual: f64::NAN });
    }
    // The residual is checked against the declared W of the shift weight itself.
    let res_grid = geomspace(lit::<T>(0.1), lit::<T>(100.0), 100).into_iter().map(|x| start + x).collect::<Vec<_>>();
    let report = w.verify(v, &res_grid, lit(1e-6));
    if !report.ok {
        return Err(TransformError::ShiftResidual { at: report.worst_at, residual: report.min_scaled });
    }
    let mut v_bar = v.times_square(format!("({}) * ({})^2", v.label, w.label), w.ln_fn());
    v_bar.domain_start = start;
    if v.is_unit() {
        if let Some(f) = &w.ln_tail_sq {
            let f = f.clone();
            v_bar = v_bar.with_ln_tail(move |t| f(t));
        }
    }
    let initial_contract = v.is_unit() && w.vanishes_at_origin;
    let a_bar = a_bar.with_label(format!("({}) + ({})", a.label, w_pot.label)).with_domain_start(start);
    Ok(TransformedProblem {
        weight: v_bar,
        potential: a_bar,
        var_map: None,
        shift: Some(w.clone()),
        provenance: vec![
            format!("weight shift with w = {} ({})", w.label, w.source_inequality),
            format!("v_bar = v w^2, A_bar = A + W with W = {}", w_pot.label),
            "z_tilde = z / w".to_string(),
            if initial_contract {
                "initial contract (v_bar z_tilde'/z_tilde)(0+) = 0 assumed: v = 1, w(0) = 0, w'(0) > 0".to_string()
            } else {
                "initial contract not established for this shift".to_string()
            },
        ],
        initial_contract,
    })
}

#[derive(Clone, Debug)]
pub struct LadderStage<T> {
    pub weight: Weight<T>,
    pub curve: CriticalCurve<T>,
    pub positivity_start: T,
    /// The `w_k` that produced this stage (`None` for the base).
    pub shift: Option<ShiftWeight<T>>,
}

/// Smallest `t > d` beyond which `ln τ(t) < 0`.
fn first_below_one<T: Real>(v: &Weight<T>) -> Result<T, TransformError> {
    let d = v.domain_start;
    let g = |x: T| v.ln_tail(d + x).unwrap_or(T::nan());
    let mut lo = lit::<T>(1e-6) * (T::one() + d);
    if g(lo) < T::zero() {
        return Ok(d);
    }
    let mut hi = lo;
    loop {
        hi *= lit(2.0);
        let gh = g(hi);
        if gh.is_nan() || hi > lit(1e300) {
            return Err(TransformError::LadderStall { stage: 0, reason: "tail never drops below 1".into() });
        }
        if gh < T::zero() {
            break;
        }
        lo = hi;
    }
    let root = brent(g, lo, hi, lit(1e-14), T::zero())?;
    Ok(d + root.bracket.1.max(root.x))
}

/// Iterates `w_{k+1} = -√τ_k log τ_k`, `v_{k+1} = v_k w_{k+1}²` with `τ_k = ∫_t^∞ ds/v_k`;
/// the new tail is `-1/log τ_k`.
pub fn refine_ladder<T: Real>(v: &Weight<T>, depth: usize) -> Result<Vec<LadderStage<T>>, TransformError> {
    let mut stages = vec![LadderStage { weight: v.clone(), curve: critical_curve(v)?, positivity_start: v.domain_start, shift: None }];
    let half = lit::<T>(0.5);
    for k in 0..depth {
        let vk = stages[k].weight.clone();
        let start = first_below_one(&vk).map_err(|e| match e {
            TransformError::LadderStall { reason, .. } => TransformError::LadderStall { stage: k + 1, reason },
            other => other,
        })?;
        // τ_k must decrease toward zero beyond the positivity start.
        let probe: Vec<T> = geomspace(start + T::one(), start + lit(1e12), 25);
        let taus: Vec<T> = probe.iter().map(|&t| vk.ln_tail(t).unwrap_or(T::nan())).collect();
        if taus.iter().any(|x| !x.is_finite()) || taus.windows(2).any(|w| !(w[1] < w[0])) || !(taus[0] < T::zero()) {
            return Err(TransformError::LadderStall { stage: k + 1, reason: "tail is not decreasing below 1".into() });
        }
        let (va, vb) = (vk.clone(), vk.clone());
        let ln_w: ScalarFn<T> = Arc::new(move |t: T| match va.ln_tail(t) {
            Ok(lt) => half * lt + (-lt).ln(),
            Err(_) => T::nan(),
        });
        let shift = ShiftWeight::new(
            format!("-sqrt(tau_{k}) log(tau_{k})"),
            ln_w.clone(),
            PotentialSpec::zero(),
            ResidualKind::Equality,
        )
        .with_positivity_start(start)
        .with_inequality(format!("ladder step {}", k + 1));
        let mut next = vk
            .times_square(format!("ladder({}) on {}", k + 1, stages[0].weight.label), ln_w)
            .with_ln_tail(move |t: T| match vb.ln_tail(t) {
                Ok(lt) => -(-lt).ln(),
                Err(_) => T::nan(),
            });
        next.domain_start = start;
        next.check_closed_tail().map_err(|e| TransformError::LadderStall { stage: k + 1, reason: e.to_string() })?;
        let curve = critical_curve(&next)?;
        stages.push(LadderStage { weight: next, curve, positivity_start: start, shift: Some(shift) });
    }
    Ok(stages)
}
