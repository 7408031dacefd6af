//! Oscillation and nonoscillation tests built from shifted frames and the
//! nested-log ladder.

use serde::Serialize;

use super::{log_grid, sqrt_pos, Classification, CriteriaError, DivergenceProtocol, EvidenceGrade, Verdict};
use crate::oracle::LOG_LOG_SPACING;
use crate::potential::PotentialSpec;
use crate::quad::{integrate_split, QuadConfig};
use crate::scalar::{lit, to_f64, Real};
use crate::transforms::{refine_ladder, LadderStage};
use crate::weights::Weight;

/// Lower bound assumed on `K` beyond `t0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum LowerBoundFamily {
    /// `K ≥ −B² t^α`, `α ≥ −2`, `B > 0`.
    PolyLowerBound { alpha: f64, b: f64 },
    /// `K ≥ B²/t²`, `0 ≤ B ≤ ½`.
    EulerLowerBound { b: f64 },
}

impl LowerBoundFamily {
    fn is_nested_log(&self) -> bool {
        matches!(self, Self::EulerLowerBound { b } if (b - 0.5).abs() < 1e-12)
    }

    /// Signed term added to `K` under the square root.
    fn shift(&self, t: f64) -> f64 {
        match *self {
            Self::PolyLowerBound { alpha, b } if alpha <= -2.0 + 1e-12 => b * b / (t * t),
            Self::PolyLowerBound { alpha, b } => b * b * t.powf(alpha),
            Self::EulerLowerBound { b } => -b * b / (t * t),
        }
    }

    fn gauge(&self, t: f64) -> f64 {
        match *self {
            Self::PolyLowerBound { alpha, b } if alpha <= -2.0 + 1e-12 => 0.5 * (1.0 + 4.0 * b * b).sqrt() * t.ln(),
            Self::PolyLowerBound { alpha, b } => 2.0 * b / (alpha + 2.0) * t.powf(alpha / 2.0 + 1.0),
            Self::EulerLowerBound { .. } if self.is_nested_log() => 0.5 * t.ln().ln(),
            Self::EulerLowerBound { b } => 0.5 * (1.0 - 4.0 * b * b).sqrt() * t.ln(),
        }
    }

    fn lower_bound(&self, t: f64) -> f64 {
        -self.shift(t)
    }

    fn validate(&self) -> Result<(), String> {
        match *self {
            Self::PolyLowerBound { alpha, b } if alpha >= -2.0 - 1e-12 && b > 0.0 => Ok(()),
            Self::EulerLowerBound { b } if (0.0..=0.5 + 1e-12).contains(&b) => Ok(()),
            other => Err(format!("invalid family parameters {other:?}")),
        }
    }
}

/// `∫_lo^hi f` through `σ = e^u`.
fn log_integral<T: Real>(f: &dyn Fn(T) -> T, lo: T, hi: T, breaks: &[T], cfg: &QuadConfig<T>) -> T {
    let ub: Vec<T> = breaks.iter().filter(|&&b| b > T::zero()).map(|b| b.ln()).collect();
    integrate_split(&|u: T| {
        let s = u.exp();
        f(s) * s
    }, lo.ln(), hi.ln(), &ub, cfg)
    .value
}

pub fn generalized_calabi<T: Real>(k: &PotentialSpec<T>, family: LowerBoundFamily, t0: f64, horizon: f64) -> Result<Verdict, CriteriaError> {
    const NAME: &str = "generalized_calabi";
    if let Err(e) = family.validate() {
        return Ok(Verdict::inconclusive(NAME, e));
    }
    let nested = family.is_nested_log();
    let t0 = if nested { t0.max(std::f64::consts::E) } else { t0.max(to_f64(k.domain_start)).max(1e-6) };
    let protocol = if nested { DivergenceProtocol::nested_log() } else { DivergenceProtocol::default() };
    let cps = protocol.checkpoints(t0, horizon);
    if cps.len() < 2 {
        return Ok(Verdict::inconclusive(NAME, "horizon leaves fewer than two checkpoints"));
    }
    let grid: Vec<T> = log_grid(lit::<T>(t0 * (1.0 + 1e-9)), lit(cps[cps.len() - 1]), 600, k.breakpoints());
    for &t in &grid {
        let (tf, x) = (to_f64(t), to_f64(k.eval(t)));
        let lb = family.lower_bound(tf);
        if !(x >= lb - 1e-12 * (1.0 + lb.abs())) {
            return Err(CriteriaError::FamilyMismatch { at: tf, value: x, bound: lb });
        }
    }
    let quad = QuadConfig::<T>::tight();
    let integrand = |s: T| sqrt_pos(k.eval(s) + lit::<T>(family.shift(to_f64(s))));
    let mut acc = T::zero();
    let mut prev = lit::<T>(t0);
    let mut pts = Vec::with_capacity(cps.len());
    for &c in &cps {
        let ct = lit::<T>(c);
        if ct > prev {
            acc += log_integral(&integrand, prev, ct, k.breakpoints(), &quad);
        }
        prev = ct;
        pts.push((c, to_f64(acc) - family.gauge(c)));
    }
    let ev = protocol.assess(pts);
    let verdict = if ev.diverges {
        let mut v = Verdict::new(NAME, Classification::OscillationEvidence, Some(EvidenceGrade::AsymptoticEvidence));
        if nested {
            let n = cps.len();
            let (a, b) = (cps[n - 2], cps[n - 1]);
            // excess over the first nested-log rung, per unit of log log t
            let excess = |s: T| {
                let sf = to_f64(s);
                let rung = 1.0 / (4.0 * sf * sf * sf.ln().powi(2));
                sqrt_pos(k.eval(s) - lit::<T>(0.25 / (sf * sf) + rung))
            };
            let gained = to_f64(log_integral(&excess, lit(a), lit(b), k.breakpoints(), &quad));
            let rho = gained / (b.ln().ln() - a.ln().ln());
            if rho > 0.0 {
                v = v
                    .witness("log_log_rate", rho)
                    .witness(LOG_LOG_SPACING, std::f64::consts::PI / rho)
                    .note("consecutive zeros are spaced by about pi/rate in log log t; later zeros may lie beyond any floating-point horizon");
            }
        }
        v
    } else {
        Verdict::inconclusive(NAME, "no divergent trend at the checkpoints")
    };
    Ok(ev.annotate(verdict).witness("t0", t0))
}

/// `1/(4(1+t)²)[1 + 1/log²(1+t)]`, the global positivity threshold.
pub const GLOBAL_THRESHOLD: &str = "1/(4*(1+t)^2)*(1 + 1/log(1+t)^2)";

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RefinedConfig {
    pub horizon: f64,
    pub points: usize,
    /// Relative slack allowed against the threshold.
    pub margin: f64,
}

impl Default for RefinedConfig {
    fn default() -> Self {
        Self { horizon: 1e100, points: 600, margin: 1e-9 }
    }
}

/// `1/(4t²) + Σ_{k<depth} χ_k` over the ladder on `t log² t`.
#[derive(Clone, Debug)]
pub struct NestedLogThreshold<T> {
    stages: Vec<LadderStage<T>>,
}

impl<T: Real> NestedLogThreshold<T> {
    pub fn depth(&self) -> usize {
        self.stages.len()
    }

    /// Left end of the range where every term is finite.
    pub fn valid_from(&self) -> T {
        self.stages.last().map(|s| s.positivity_start).unwrap_or(T::zero())
    }

    pub fn eval(&self, t: T) -> T {
        let mut acc = T::one() / (lit::<T>(4.0) * t * t);
        for s in &self.stages {
            acc += s.curve.eval(t).unwrap_or(T::nan());
        }
        acc
    }
}

pub fn nested_log_threshold<T: Real>(depth: usize) -> Result<NestedLogThreshold<T>, CriteriaError> {
    if depth == 0 {
        return Ok(NestedLogThreshold { stages: Vec::new() });
    }
    let stages = refine_ladder(&Weight::t_log2(), depth - 1)?;
    Ok(NestedLogThreshold { stages })
}

fn below<T: Real>(k: &PotentialSpec<T>, thr: &dyn Fn(T) -> T, grid: &[T], margin: f64) -> Result<f64, (f64, f64)> {
    let mut worst = f64::NEG_INFINITY;
    for &t in grid {
        let (x, c) = (to_f64(k.eval(t)), to_f64(thr(t)));
        let ratio = if c > 0.0 { x / c } else { f64::INFINITY };
        if !(x <= c * (1.0 + margin)) {
            return Err((to_f64(t), ratio));
        }
        worst = worst.max(ratio);
    }
    Ok(worst)
}

pub fn refined_nonoscillation<T: Real>(k: &PotentialSpec<T>, depth: usize, t0: f64, cfg: &RefinedConfig) -> Verdict {
    const NAME: &str = "refined_nonoscillation";
    if depth == 0 {
        return Verdict::inconclusive(NAME, "depth must be at least 1");
    }
    let mut notes = Vec::new();
    if t0 == 0.0 && k.domain_start == T::zero() {
        let thr = PotentialSpec::<T>::parse(GLOBAL_THRESHOLD, &Default::default()).expect("static expression");
        let grid = log_grid(lit::<T>(1e-8), lit(cfg.horizon.min(1e150)), cfg.points, k.breakpoints());
        match below(k, &|t| thr.eval(t), &grid, cfg.margin) {
            Ok(worst) => {
                return Verdict::new(NAME, Classification::Positive, Some(EvidenceGrade::AsymptoticEvidence))
                    .witness("worst_ratio", worst.max(0.0))
                    .witness("horizon", to_f64(grid[grid.len() - 1]))
                    .note("K below the global threshold on the half-line: g >= C sqrt(t log t) log log t");
            }
            Err((at, ratio)) => notes.push(format!("global threshold exceeded at t = {at:e} (ratio {ratio:.6})")),
        }
    }
    let mut last_fail = None;
    for d in 1..=depth {
        let thr = match nested_log_threshold::<T>(d) {
            Ok(t) => t,
            Err(e) => {
                notes.push(format!("depth {d}: {e}"));
                break;
            }
        };
        let lo = lit::<T>(t0).max(k.domain_start).max(thr.valid_from()) * lit(1.0 + 1e-9);
        let grid = log_grid(lo, lit(cfg.horizon), cfg.points, k.breakpoints());
        match below(k, &|t| thr.eval(t), &grid, cfg.margin) {
            Ok(worst) => {
                let mut v = Verdict::new(NAME, Classification::Nonoscillatory, Some(EvidenceGrade::AsymptoticEvidence))
                    .witness("depth", d as f64)
                    .witness("r0", to_f64(lo))
                    .witness("worst_ratio", worst.max(0.0));
                for n in notes {
                    v = v.note(n);
                }
                return v;
            }
            Err(f) => last_fail = Some((d, f)),
        }
    }
    let mut v = Verdict::inconclusive(NAME, format!("K exceeds the nested-log threshold at every depth up to {depth}"));
    if let Some((d, (at, ratio))) = last_fail {
        v = v.witness("last_depth", d as f64).witness("violation_at", at).witness("violation_ratio", ratio);
    }
    for n in notes {
        v = v.note(n);
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn proto(c: f64) -> PotentialSpec<f64> {
        let p = BTreeMap::from([("c".to_string(), c)]);
        PotentialSpec::parse("1/(4*t^2) + c^2/(4*t^2*log(t)^2)", &p).unwrap().with_domain_start(2.0)
    }

    #[test]
    fn prototype_drift_sign() {
        let fam = LowerBoundFamily::EulerLowerBound { b: 0.5 };
        let osc = generalized_calabi(&proto(3.0), fam, 2.0, f64::INFINITY).unwrap();
        assert_eq!(osc.classification, Classification::OscillationEvidence);
        let gap = osc.witnesses[LOG_LOG_SPACING];
        assert!((gap - 2.0 * std::f64::consts::PI / 8f64.sqrt()).abs() < 1e-2, "{gap}");
        let flat = generalized_calabi(&proto(0.9), fam, 2.0, f64::INFINITY).unwrap();
        assert_eq!(flat.classification, Classification::Inconclusive);
    }

    #[test]
    fn exact_cancellation_is_inconclusive() {
        let fam = LowerBoundFamily::PolyLowerBound { alpha: 0.0, b: 1.0 };
        let out = generalized_calabi(&PotentialSpec::<f64>::zero(), fam, 1.0, 1e12).unwrap();
        assert_eq!(out.classification, Classification::Inconclusive);
        assert!(out.witnesses["rise"].abs() < 1e-3);
    }

    #[test]
    fn family_mismatch() {
        let fam = LowerBoundFamily::EulerLowerBound { b: 0.5 };
        let r = generalized_calabi(&PotentialSpec::<f64>::zero(), fam, 2.0, 1e12);
        assert!(matches!(r, Err(CriteriaError::FamilyMismatch { .. })));
    }

    #[test]
    fn ladder_depths() {
        let cfg = RefinedConfig::default();
        let d1 = refined_nonoscillation(&proto(0.9), 3, 2.0, &cfg);
        assert_eq!(d1.classification, Classification::Nonoscillatory);
        assert_eq!(d1.witnesses["depth"], 1.0);
        let slack = PotentialSpec::<f64>::parse("1/(4*t^2) + 1/(4*t^2*log(t)^2) + 1/(8*t^2*log(t)^2*log(log(t))^2)", &BTreeMap::new())
            .unwrap()
            .with_domain_start(2.0);
        let d2 = refined_nonoscillation(&slack, 3, 2.0, &cfg);
        assert_eq!(d2.classification, Classification::Nonoscillatory);
        assert_eq!(d2.witnesses["depth"], 2.0);
        let over = refined_nonoscillation(&proto(1.5), 3, 2.0, &cfg);
        assert_eq!(over.classification, Classification::Inconclusive);
    }

    #[test]
    fn global_variant() {
        let cfg = RefinedConfig::default();
        let k = PotentialSpec::<f64>::parse(GLOBAL_THRESHOLD, &BTreeMap::new()).unwrap();
        assert_eq!(refined_nonoscillation(&k, 1, 0.0, &cfg).classification, Classification::Positive);
        assert_eq!(refined_nonoscillation(&PotentialSpec::<f64>::zero(), 1, 0.0, &cfg).classification, Classification::Positive);
        let euler = PotentialSpec::<f64>::parse("1/(4*(1+t)^2)", &BTreeMap::new()).unwrap();
        assert_eq!(refined_nonoscillation(&euler, 1, 0.0, &cfg).classification, Classification::Positive);
    }
}
