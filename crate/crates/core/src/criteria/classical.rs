//! Classical baselines for `g'' + K g = 0`.

use serde::Serialize;

use super::{
    log_grid, sampled_min, sqrt_pos, Classification, CriteriaError, DivergenceProtocol, EvidenceGrade, Verdict,
    STRICT_MARGIN,
};
use crate::potential::PotentialSpec;
use crate::quad::{integrate_split, integrate_tail, QuadConfig, QuadError};
use crate::scalar::{lit, to_f64, Real};
use crate::weights::Weight;

use super::weighted::{check_first_zero, SearchGrid};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HilleNehariConfig {
    pub horizon: f64,
    /// Required excess of `k_*` over `1/4`.
    pub margin: f64,
    /// Width of the trailing window, in decades.
    pub decades: f64,
    pub per_decade: usize,
}

impl Default for HilleNehariConfig {
    fn default() -> Self {
        Self { horizon: 1e8, margin: 0.02, decades: 2.0, per_decade: 8 }
    }
}

/// `k(t) = t ∫_t^∞ K`.
fn k_of<T: Real>(k: &PotentialSpec<T>, t: T, cfg: &QuadConfig<T>) -> Result<T, QuadError> {
    Ok(t * integrate_tail(&|s: T| k.eval(s), t, cfg)?.value)
}

pub fn hille_nehari<T: Real>(k: &PotentialSpec<T>, cfg: &HilleNehariConfig) -> Verdict {
    const NAME: &str = "hille_nehari";
    let quad = QuadConfig::<T>::default();
    let start = if k.domain_start > T::zero() { to_f64(k.domain_start) } else { 0.0 };
    let lo = if start > 0.0 { start * (1.0 + 1e-9) } else { 1e-4 };
    let decades = (cfg.horizon / lo).log10().max(1.0);
    let n = (decades * cfg.per_decade as f64).ceil() as usize + 1;
    let grid: Vec<T> = log_grid(lit::<T>(lo), lit(cfg.horizon), n, k.breakpoints());
    let (at, min) = sampled_min(k, &grid);
    if min < -1e-12 {
        return Verdict::inconclusive(NAME, format!("K is negative at t = {at:e}"));
    }
    let window_start = cfg.horizon / 10f64.powf(cfg.decades);
    let mut ks = Vec::with_capacity(grid.len());
    for &t in &grid {
        match k_of(k, t, &quad) {
            Ok(x) => ks.push((to_f64(t), to_f64(x))),
            Err(QuadError::DivergentTail { .. }) => {
                return Verdict::new(NAME, Classification::OscillationEvidence, Some(EvidenceGrade::AsymptoticEvidence))
                    .witness("fite_from", to_f64(t))
                    .note("K is not integrable at infinity (Fite): k_* = k^* = +inf");
            }
            Err(e) => return Verdict::inconclusive(NAME, e.to_string()),
        }
    }
    let window: Vec<f64> = ks.iter().filter(|p| p.0 >= window_start).map(|p| p.1).collect();
    let k_lo = window.iter().copied().fold(f64::INFINITY, f64::min);
    let k_hi = window.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let with_k = |v: Verdict| v.witness("k_lo", k_lo).witness("k_hi", k_hi).witness("window_start", window_start).witness("horizon", cfg.horizon);
    if k_lo > 0.25 + cfg.margin {
        return with_k(Verdict::new(NAME, Classification::OscillationEvidence, Some(EvidenceGrade::AsymptoticEvidence)));
    }
    let quarter = 0.25 * (1.0 + STRICT_MARGIN);
    if start == 0.0 && ks.iter().all(|p| p.1 <= quarter) {
        return with_k(Verdict::new(NAME, Classification::Positive, Some(EvidenceGrade::AsymptoticEvidence)))
            .note("k <= 1/4 on the whole half-line (Kneser): g is positive and increasing");
    }
    if window.iter().all(|&x| x <= quarter) {
        return with_k(Verdict::new(NAME, Classification::Nonoscillatory, Some(EvidenceGrade::AsymptoticEvidence)));
    }
    with_k(Verdict::inconclusive(NAME, "k(t) stays within the margin above 1/4"))
}

/// Divergence of `M(t) = ∫ s^λ K` along the default schedule.
pub fn moore<T: Real>(k: &PotentialSpec<T>, lambda: f64, horizon: f64) -> Verdict {
    const NAME: &str = "moore";
    if !(0.0..1.0).contains(&lambda) {
        return Verdict::inconclusive(NAME, format!("lambda = {lambda} outside [0, 1)"));
    }
    let protocol = DivergenceProtocol::default();
    let t0 = if k.domain_start > T::zero() { to_f64(k.domain_start) } else { 1.0 };
    let cps = protocol.checkpoints(t0, horizon);
    let quad = QuadConfig::<T>::default();
    let lam = lit::<T>(lambda);
    let f = |s: T| s.powf(lam) * k.eval(s);
    let mut acc = T::zero();
    let mut pts = Vec::with_capacity(cps.len());
    let mut prev = lit::<T>(t0);
    for &c in &cps {
        let c = lit::<T>(c);
        acc += integrate_split(&f, prev, c, k.breakpoints(), &quad).value;
        prev = c;
        pts.push((to_f64(c), to_f64(acc)));
    }
    let ev = protocol.assess(pts);
    let v = if ev.diverges {
        Verdict::new(NAME, Classification::OscillationEvidence, Some(EvidenceGrade::AsymptoticEvidence))
    } else {
        Verdict::inconclusive(NAME, "M(t) shows no divergent trend")
    };
    ev.annotate(v).witness("lambda", lambda)
}

/// `x coth x`, continuous at zero.
fn x_coth_x<T: Real>(x: T) -> T {
    if x.abs() < lit(1e-8) {
        T::one() + x * x / lit(3.0)
    } else {
        x / x.tanh()
    }
}

/// Right-hand side of the MRV inequality; `λ = 1` selects the logarithmic form.
pub fn mrv_rhs<T: Real>(b_coef: T, lambda: T, a: T, b: T) -> Result<T, CriteriaError> {
    if !(a > T::zero() && b > a) {
        return Err(CriteriaError::InvalidRange { a: to_f64(a), b: to_f64(b) });
    }
    let one = T::one();
    // B a^λ coth(Ba) = a^{λ-1}·(Ba) coth(Ba)
    let coth_term = a.powf(lambda - one) * x_coth_x(b_coef * a);
    if lambda == one {
        return Ok(b_coef * b + coth_term + (b / a).ln() / lit(4.0));
    }
    let tail = lambda * lambda / (lit::<T>(4.0) * (one - lambda)) * (a.powf(lambda - one) - b.powf(lambda - one));
    Ok(b_coef * b.powf(lambda) + coth_term + tail)
}

pub fn mrv_first_zero<T: Real>(k: &PotentialSpec<T>, b_coef: T, a: T, b: T, lambda: T) -> Result<Verdict, CriteriaError> {
    const NAME: &str = "mrv_first_zero";
    let rhs = mrv_rhs(b_coef, lambda, a, b)?;
    let grid = log_grid(a.min(lit(1e-3)), b, 400, k.breakpoints());
    let (at, min) = sampled_min(k, &grid);
    let floor = -to_f64(b_coef * b_coef) - 1e-12;
    if min < floor {
        return Err(CriteriaError::FamilyMismatch { at, value: min, bound: floor });
    }
    let cfg = QuadConfig::<T>::tight();
    let lhs = integrate_split(&|s: T| s.powf(lambda) * k.eval(s), a, b, k.breakpoints(), &cfg).value;
    let margin = to_f64(lhs - rhs);
    let base = |v: Verdict| {
        v.witness("a", to_f64(a))
            .witness("b", to_f64(b))
            .witness("B", to_f64(b_coef))
            .witness("lambda", to_f64(lambda))
            .witness("lhs", to_f64(lhs))
            .witness("rhs", to_f64(rhs))
            .witness("margin", margin)
    };
    if margin > STRICT_MARGIN {
        Ok(base(Verdict::new(NAME, Classification::FirstZero, Some(EvidenceGrade::FiniteFormCertified)))
            .with_bound(f64::INFINITY)
            .note("the inequality gives existence only; no position bound"))
    } else {
        Ok(base(Verdict::inconclusive(NAME, "inequality not satisfied")))
    }
}

/// `√((1 + ½ log(b/a))² − 1)`.
pub fn calabi_rhs<T: Real>(a: T, b: T) -> Result<T, CriteriaError> {
    if !(a > T::zero() && b > a) {
        return Err(CriteriaError::InvalidRange { a: to_f64(a), b: to_f64(b) });
    }
    let l = (b / a).ln() * lit(0.5);
    // (1+l)² − 1 = l(2+l)
    Ok((l * (lit::<T>(2.0) + l)).sqrt())
}

pub fn calabi_finite_form<T: Real>(k: &PotentialSpec<T>, a: T, b: T) -> Result<Verdict, CriteriaError> {
    const NAME: &str = "calabi_finite_form";
    let rhs = calabi_rhs(a, b)?;
    let grid = log_grid(a, b, 200, k.breakpoints());
    let (at, min) = sampled_min(k, &grid);
    if min < -1e-12 {
        return Ok(Verdict::inconclusive(NAME, format!("K is negative at t = {at:e}")));
    }
    let cfg = QuadConfig::<T>::tight();
    let lhs = integrate_split(&|s: T| sqrt_pos(k.eval(s)), a, b, k.breakpoints(), &cfg).value;
    let margin = to_f64(lhs - rhs);
    let base = |v: Verdict| {
        v.witness("a", to_f64(a)).witness("b", to_f64(b)).witness("lhs", to_f64(lhs)).witness("rhs", to_f64(rhs)).witness("margin", margin)
    };
    if margin <= STRICT_MARGIN {
        return Ok(base(Verdict::inconclusive(NAME, "inequality not satisfied")));
    }
    let v = Weight::<T>::power(lit(3.0));
    let framed = check_first_zero(k, &v, &v, &SearchGrid::default());
    let out = base(Verdict::new(NAME, Classification::FirstZero, Some(EvidenceGrade::FiniteFormCertified)));
    Ok(match framed.bound {
        Some(r_bar) if framed.classification == Classification::FirstZero => out
            .with_bound(r_bar)
            .witness("R", framed.witnesses["R"])
            .witness("r", framed.witnesses["r"])
            .note("position bound from the finite-form test in the v = t^2 frame"),
        _ => out.with_bound(f64::INFINITY).note("existence only; the v = t^2 frame gave no position bound"),
    })
}
