//! Critical-curve tests for `(v z')' + A v z = 0`.

use rayon::prelude::*;
use serde::Serialize;

use super::{
    cumulative, log_grid, sampled_min, sqrt_pos, Classification, CriteriaError, DivergenceProtocol, EvidenceGrade,
    Verdict, ZeroBound, STRICT_MARGIN,
};
use crate::potential::PotentialSpec;
use crate::quad::{integrate_head, integrate_split, QuadConfig};
use crate::roots::brent;
use crate::scalar::{geomspace, lit, to_f64, Real};
use crate::weights::{critical_curve, Weight};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CheckConfig {
    /// Right end of the sampled verification range.
    pub horizon: f64,
    pub points: usize,
    /// Relative slack allowed in `A ≤ χ`.
    pub margin: f64,
}

impl Default for CheckConfig {
    fn default() -> Self {
        Self { horizon: 1e8, points: 400, margin: 1e-9 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SearchMode {
    /// Stop at the first pair satisfying the inequality.
    FirstHit,
    /// Scan every pair, keep the smallest bound, then refine by compass search.
    MinimizeBound,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SearchGrid {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
    pub mode: SearchMode,
}

impl Default for SearchGrid {
    fn default() -> Self {
        Self { lo: 1e-2, hi: 1e3, n: 24, mode: SearchMode::FirstHit }
    }
}

impl SearchGrid {
    pub fn minimizing(mut self) -> Self {
        self.mode = SearchMode::MinimizeBound;
        self
    }
}

fn domain_lo<T: Real>(a: &PotentialSpec<T>, v: &Weight<T>) -> T {
    a.domain_start.max(v.domain_start)
}

fn verification_nodes<T: Real>(lo: T, cfg: &CheckConfig, breaks: &[T]) -> Vec<T> {
    let start = if lo > T::zero() { lo * lit(1.0 + 1e-9) } else { lit(1e-8) };
    let hi = lit::<T>(cfg.horizon).max(start * lit(1e3));
    log_grid(start, hi, cfg.points, breaks)
}

/// Largest `A/χ` and its location on the nodes; `None` if `χ` fails somewhere.
fn worst_ratio<T: Real>(a: &PotentialSpec<T>, v: &Weight<T>, nodes: &[T]) -> Result<(f64, f64), String> {
    let chi = critical_curve(v).map_err(|e| e.to_string())?;
    let mut worst = (f64::NAN, f64::NEG_INFINITY);
    for &t in nodes {
        let c = chi.eval(t).map_err(|e| e.to_string())?;
        let x = a.eval(t);
        if !x.is_finite() {
            return Err(format!("potential not finite at {}", to_f64(t)));
        }
        let ratio = if c > T::zero() { to_f64(x / c) } else if x > T::zero() { f64::INFINITY } else { 0.0 };
        if ratio > worst.1 {
            worst = (to_f64(t), ratio);
        }
    }
    Ok(worst)
}

/// `−√tail · log tail`, the lower-bound profile of positive solutions.
pub fn positivity_envelope<T: Real>(v: &Weight<T>, r: T) -> Result<T, crate::weights::WeightError> {
    let lt = v.ln_tail(r)?;
    Ok(-(lt * lit(0.5)).exp() * lt)
}

/// `A ≤ χ` on the whole declared domain.
pub fn check_positivity<T: Real>(a: &PotentialSpec<T>, v: &Weight<T>, cfg: &CheckConfig) -> Verdict {
    const NAME: &str = "critical_curve_positivity";
    let nodes = verification_nodes(domain_lo(a, v), cfg, a.breakpoints());
    match worst_ratio(a, v, &nodes) {
        Err(e) => Verdict::inconclusive(NAME, e),
        Ok((at, ratio)) if ratio > 1.0 + cfg.margin => {
            Verdict::inconclusive(NAME, format!("A exceeds the critical curve at r = {at:e}")).witness("worst_ratio", ratio).witness("worst_at", at)
        }
        Ok((at, ratio)) => Verdict::new(NAME, Classification::Positive, Some(EvidenceGrade::AsymptoticEvidence))
            .witness("worst_ratio", ratio.max(0.0))
            .witness("worst_at", at)
            .witness("horizon", to_f64(*nodes.last().expect("nonempty grid")))
            .witness("envelope_at_horizon", positivity_envelope(v, *nodes.last().expect("nonempty grid")).map(to_f64).unwrap_or(f64::NAN))
            .note(format!("z(r) >= -C sqrt(tail(r)) log tail(r) for large r, tail of {}", v.label)),
    }
}

/// `A ≤ χ` on `[r0, ∞)`.
pub fn check_nonoscillation<T: Real>(a: &PotentialSpec<T>, v: &Weight<T>, r0: T, cfg: &CheckConfig) -> Verdict {
    const NAME: &str = "critical_curve_nonoscillation";
    let lo = r0.max(domain_lo(a, v));
    let nodes = verification_nodes(lo, cfg, a.breakpoints());
    match worst_ratio(a, v, &nodes) {
        Err(e) => Verdict::inconclusive(NAME, e),
        Ok((at, ratio)) if ratio > 1.0 + cfg.margin => {
            Verdict::inconclusive(NAME, format!("A exceeds the critical curve at r = {at:e}")).witness("worst_ratio", ratio).witness("worst_at", at)
        }
        Ok((at, ratio)) => {
            let certified = a.certify_nonpositive_from(to_f64(lo), cfg.horizon);
            let grade = if certified { EvidenceGrade::Certified } else { EvidenceGrade::AsymptoticEvidence };
            let tail_start = lit::<T>(cfg.horizon / 10.0);
            let tail_ratio = worst_ratio(a, v, &nodes.iter().copied().filter(|&t| t >= tail_start).collect::<Vec<_>>())
                .map(|w| w.1)
                .unwrap_or(f64::NAN);
            Verdict::new(NAME, Classification::Nonoscillatory, Some(grade))
                .witness("r0", to_f64(lo))
                .witness("worst_ratio", ratio.max(0.0))
                .witness("worst_at", at)
                .witness("tail_ratio", tail_ratio.max(0.0))
        }
    }
}

/// Evaluation context for the finite-form first-zero inequality.
struct Frame<'a, T> {
    a: &'a PotentialSpec<T>,
    v: &'a Weight<T>,
    f: &'a Weight<T>,
    breaks: Vec<T>,
    quad: QuadConfig<T>,
}

impl<'a, T: Real> Frame<'a, T> {
    fn new(a: &'a PotentialSpec<T>, v: &'a Weight<T>, f: &'a Weight<T>) -> Self {
        let mut breaks = a.breakpoints().to_vec();
        breaks.extend_from_slice(v.breakpoints());
        breaks.extend_from_slice(f.breakpoints());
        Self { a, v, f, breaks, quad: QuadConfig::tight() }
    }

    fn sqrt_integral(&self, lo: T, hi: T) -> T {
        let a = self.a;
        integrate_split(&|s: T| sqrt_pos(a.eval(s)), lo, hi, &self.breaks, &self.quad).value
    }

    /// `ln ∫_0^R A v`, scaled by `v(R)` against overflow.
    fn ln_mass(&self, r: T) -> T {
        let lvr = self.v.ln_value(r);
        let (a, v) = (self.a, self.v);
        let g = |s: T| {
            let x = a.eval(s) * (v.ln_value(s) - lvr).exp();
            if x.is_finite() {
                x
            } else {
                T::zero()
            }
        };
        let lo = domain_lo(a, v);
        let total = if lo > T::zero() {
            integrate_split(&g, lo, r, &self.breaks, &self.quad).value
        } else {
            let c = self.breaks.iter().copied().filter(|&b| b > T::zero() && b < r).fold(r * lit(0.5), T::min);
            let head = integrate_head(&g, c, &self.quad).map(|q| q.value).unwrap_or(T::nan());
            head + integrate_split(&g, c, r, &self.breaks, &self.quad).value
        };
        if total > T::zero() {
            total.ln() + lvr
        } else {
            T::neg_infinity()
        }
    }

    /// `ln ∫_r^{r+δ} ds/f` by direct quadrature in the offset variable.
    fn ln_inverse_integral(&self, r: T, delta: T) -> T {
        let lfr = self.f.ln_value(r);
        let f = self.f;
        let g = |x: T| (lfr - f.ln_value(r + x)).exp();
        let shifted: Vec<T> = self.breaks.iter().map(|&b| b - r).filter(|&b| b > T::zero()).collect();
        let q = integrate_split(&g, T::zero(), delta, &shifted, &self.quad).value;
        q.ln() - lfr
    }

    /// `LHS − RHS` of the first-zero inequality, given precomputed pieces.
    fn margin_from(&self, sqrt_int: T, ln_mass: T, lt_r_lo: T, lt_r_hi: T) -> T {
        let half = lit::<T>(0.5);
        let lhs = sqrt_int - half * (lt_r_lo - lt_r_hi);
        let rhs = -half * (ln_mass + lt_r_lo);
        lhs - rhs
    }

    fn margin(&self, big_r: T, r: T) -> Result<T, CriteriaError> {
        let lm = self.ln_mass(big_r);
        let (lo, hi) = (self.f.ln_tail(big_r)?, self.f.ln_tail(r)?);
        Ok(self.margin_from(self.sqrt_integral(big_r, r), lm, lo, hi))
    }

    fn bound(&self, big_r: T, r: T) -> Result<ZeroBound, CriteriaError> {
        let half = lit::<T>(0.5);
        let sq = self.sqrt_integral(big_r, r);
        let lm = self.ln_mass(big_r);
        if !lm.is_finite() {
            return Err(CriteriaError::BracketFailure(format!("A vanishes on [0, {}]", to_f64(big_r))));
        }
        let target = -lit::<T>(2.0) * sq - lm;
        let lt_r = self.f.ln_tail(r)?;
        if !(target < lt_r) {
            return Err(CriteriaError::BracketFailure(format!(
                "inequality fails at (R, r) = ({}, {}): target {} >= ln tail {}",
                to_f64(big_r),
                to_f64(r),
                to_f64(target),
                to_f64(lt_r)
            )));
        }
        // unknown u = ln(R̄ − r)
        let phi = |u: T| self.ln_inverse_integral(r, u.exp()) - target;
        let cap = self.quad.horizon_cap;
        let mut lo = r.ln() - lit(2.0);
        let mut steps = 0;
        while phi(lo) >= T::zero() {
            lo -= lit(8.0);
            steps += 1;
            if steps > 100 {
                return Err(CriteriaError::BracketFailure("no lower bracket".into()));
            }
        }
        let mut hi = r.ln();
        while phi(hi) <= T::zero() {
            hi += lit(2.0);
            if hi.exp() > cap {
                return Err(CriteriaError::BracketFailure(format!(
                    "bound exceeds {:e}; inequality is marginal at (R, r) = ({}, {})",
                    to_f64(cap),
                    to_f64(big_r),
                    to_f64(r)
                )));
            }
        }
        let root = brent(phi, lo, hi, T::epsilon(), T::zero()).map_err(|e| CriteriaError::BracketFailure(e.to_string()))?;
        let delta = root.x.exp();
        let residual = sq + half * lm + half * self.ln_inverse_integral(r, delta);
        let slack = lt_r - target;
        let (rf, df) = (to_f64(r), to_f64(delta));
        let mut r_bar = rf + df;
        if r_bar - rf < df {
            r_bar = r_bar.next_up();
        }
        Ok(ZeroBound {
            r_bar,
            offset: df,
            bracket: (to_f64(r + lo.exp()), to_f64(r + hi.exp())),
            residual: to_f64(residual),
            marginal: to_f64(slack) < 1e-6,
        })
    }
}

/// `LHS − RHS` of the finite-form first-zero inequality at `(R, r)`.
pub fn first_zero_margin<T: Real>(
    a: &PotentialSpec<T>,
    v: &Weight<T>,
    f: &Weight<T>,
    big_r: T,
    r: T,
) -> Result<f64, CriteriaError> {
    Frame::new(a, v, f).margin(big_r, r).map(to_f64)
}

/// Solves for the first-zero position bound `R̄ > r`.
pub fn solve_position_bound<T: Real>(
    a: &PotentialSpec<T>,
    v: &Weight<T>,
    f: &Weight<T>,
    big_r: T,
    r: T,
) -> Result<ZeroBound, CriteriaError> {
    Frame::new(a, v, f).bound(big_r, r)
}

fn precondition_failure<T: Real>(a: &PotentialSpec<T>, v: &Weight<T>, f: &Weight<T>, grid: &[T]) -> Option<String> {
    let (at, min) = sampled_min(a, grid);
    if min < -1e-12 {
        return Some(format!("A is negative at t = {at:e} ({min:e})"));
    }
    for &t in grid {
        if f.ln_value(t) < v.ln_value(t) - lit(1e-12) {
            return Some(format!("f < v at t = {:e}", to_f64(t)));
        }
    }
    None
}

/// Scans `(R, r)` for the finite-form inequality and bounds the first zero.
pub fn check_first_zero<T: Real>(a: &PotentialSpec<T>, v: &Weight<T>, f: &Weight<T>, search: &SearchGrid) -> Verdict {
    const NAME: &str = "first_zero_finite_form";
    let frame = Frame::new(a, v, f);
    let lo_dom = domain_lo(a, v).max(f.domain_start);
    let nodes: Vec<T> = geomspace(lit::<T>(search.lo), lit(search.hi), search.n).into_iter().filter(|&x| x > lo_dom).collect();
    if nodes.len() < 2 {
        return Verdict::inconclusive(NAME, "search grid lies outside the domain");
    }
    let dense = log_grid(nodes[0], nodes[nodes.len() - 1], 400, &frame.breaks);
    if let Some(why) = precondition_failure(a, v, f, &dense) {
        return Verdict::inconclusive(NAME, why);
    }
    let sq = {
        let a = frame.a;
        cumulative(&|s: T| sqrt_pos(a.eval(s)), &nodes, &frame.breaks, &frame.quad)
    };
    let lm: Vec<T> = nodes.par_iter().map(|&x| frame.ln_mass(x)).collect();
    let lt: Vec<Option<T>> = nodes.iter().map(|&x| f.ln_tail(x).ok()).collect();
    let mut candidates = Vec::new();
    'outer: for i in 0..nodes.len() {
        if !lm[i].is_finite() {
            continue;
        }
        let Some(lti) = lt[i] else { continue };
        for j in i + 1..nodes.len() {
            let Some(ltj) = lt[j] else { continue };
            let m = frame.margin_from(sq[j] - sq[i], lm[i], lti, ltj);
            if to_f64(m) > STRICT_MARGIN {
                candidates.push((i, j, to_f64(m)));
                if search.mode == SearchMode::FirstHit {
                    break 'outer;
                }
            }
        }
    }
    if candidates.is_empty() {
        return Verdict::inconclusive(NAME, format!("no (R, r) pair on the {}x{} grid satisfies the inequality", search.n, search.n));
    }
    let solved: Vec<(T, T, f64, ZeroBound)> = candidates
        .par_iter()
        .filter_map(|&(i, j, m)| frame.bound(nodes[i], nodes[j]).ok().map(|b| (nodes[i], nodes[j], m, b)))
        .collect();
    let Some(best) = solved.into_iter().min_by(|x, y| x.3.r_bar.partial_cmp(&y.3.r_bar).expect("finite bounds")) else {
        return Verdict::inconclusive(NAME, "inequality holds but the position bound could not be bracketed");
    };
    let (mut big_r, mut r, mut m, mut zb) = best;
    let mut evals = 0usize;
    if search.mode == SearchMode::MinimizeBound {
        // compass search in (ln R, ln r)
        let mut step = (search.hi / search.lo).ln() / (search.n.max(2) - 1) as f64;
        while step > 1e-4 && evals < 400 {
            let mut improved = false;
            for (dx, dy) in [(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0), (1.0, 1.0), (-1.0, -1.0)] {
                let nr = big_r * lit::<T>((dx * step).exp());
                let nt = r * lit::<T>((dy * step).exp());
                if !(nr > lo_dom) || !(nt > nr) {
                    continue;
                }
                evals += 1;
                let Ok(mm) = frame.margin(nr, nt) else { continue };
                if to_f64(mm) <= STRICT_MARGIN {
                    continue;
                }
                if let Ok(b) = frame.bound(nr, nt) {
                    if b.r_bar < zb.r_bar {
                        (big_r, r, m, zb) = (nr, nt, to_f64(mm), b);
                        improved = true;
                        break;
                    }
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
    }
    let mut verdict = Verdict::new(NAME, Classification::FirstZero, Some(EvidenceGrade::FiniteFormCertified))
        .with_bound(zb.r_bar)
        .witness("R", to_f64(big_r))
        .witness("r", to_f64(r))
        .witness("margin", m)
        .witness("residual", zb.residual);
    if zb.marginal {
        verdict = verdict.note("inequality is marginal; the bound is correspondingly large");
    }
    if evals > 0 {
        verdict = verdict.witness("refinement_evaluations", evals as f64);
    }
    verdict
}

/// Divergence of `F(r) = ∫_R^r √A + ½ log ∫_r^∞ ds/f` along `r = R·2^k`.
pub fn check_oscillation<T: Real>(
    a: &PotentialSpec<T>,
    v: &Weight<T>,
    f: &Weight<T>,
    big_r: T,
    protocol: &DivergenceProtocol,
) -> Verdict {
    const NAME: &str = "critical_curve_oscillation";
    let frame = Frame::new(a, v, f);
    let cps = protocol.checkpoints(to_f64(big_r), f64::INFINITY);
    let grid = log_grid(big_r, lit(cps[cps.len() - 1]), 400, &frame.breaks);
    let (at, min) = sampled_min(a, &grid);
    if min < -1e-12 {
        return Verdict::inconclusive(NAME, format!("A is negative at t = {at:e}"));
    }
    let mut points = Vec::with_capacity(cps.len());
    let mut acc = T::zero();
    let mut prev = big_r;
    for &c in &cps {
        let c = lit::<T>(c);
        acc += frame.sqrt_integral(prev, c);
        prev = c;
        match f.ln_tail(c) {
            Ok(lt) => points.push((to_f64(c), to_f64(acc + lit::<T>(0.5) * lt))),
            Err(_) => break,
        }
    }
    let ev = protocol.assess(points);
    if ev.diverges {
        ev.annotate(Verdict::new(NAME, Classification::OscillationEvidence, Some(EvidenceGrade::AsymptoticEvidence)))
            .witness("R", to_f64(big_r))
    } else {
        ev.annotate(Verdict::inconclusive(NAME, "no divergent trend at the checkpoints")).witness("R", to_f64(big_r))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn pot(s: &str) -> PotentialSpec<f64> {
        PotentialSpec::parse(s, &BTreeMap::new()).unwrap()
    }

    #[test]
    fn zero_potential_is_positive() {
        let v = Weight::<f64>::power(3.0);
        let out = check_positivity(&PotentialSpec::<f64>::zero(), &v, &CheckConfig::default());
        assert_eq!(out.classification, Classification::Positive);
    }

    #[test]
    fn twice_the_curve_is_inconclusive() {
        let v = Weight::<f64>::power(3.0);
        // χ = 1/(4r²) for v = r²
        let out = check_positivity(&pot("2/(4*t^2)"), &v, &CheckConfig::default());
        assert_eq!(out.classification, Classification::Inconclusive);
    }

    #[test]
    fn equality_case_is_nonoscillatory() {
        let v = Weight::<f64>::power(3.0);
        let out = check_nonoscillation(&pot("1/(4*t^2)"), &v, 1.0, &CheckConfig::default());
        assert_eq!(out.classification, Classification::Nonoscillatory);
        assert_eq!(out.evidence_grade, Some(EvidenceGrade::AsymptoticEvidence));
        let neg = check_nonoscillation(&pot("-exp(-t)"), &v, 1.0, &CheckConfig::default());
        assert_eq!(neg.evidence_grade, Some(EvidenceGrade::Certified));
    }

    #[test]
    fn nested_log_equality_at_first_rung() {
        let out = check_nonoscillation(&pot("1/(4*t^2*log(t)^2)"), &Weight::t_log2(), std::f64::consts::E, &CheckConfig::default());
        assert_eq!(out.classification, Classification::Nonoscillatory);
        let over = check_nonoscillation(&pot("2.25/(4*t^2*log(t)^2)"), &Weight::t_log2(), std::f64::consts::E, &CheckConfig::default());
        assert_eq!(over.classification, Classification::Inconclusive);
    }

    #[test]
    fn constant_potential_first_zero() {
        let v = Weight::<f64>::power(3.0);
        let a = pot("100");
        let m = first_zero_margin(&a, &v, &v, 1.0, 2.0).unwrap();
        // ∫_1^2 10 + ½ log(1/2) + ½ log(100/3)
        let expected = 10.0 + 0.5 * 0.5_f64.ln() + 0.5 * (100.0_f64 / 3.0).ln();
        assert!((m - expected).abs() < 1e-9, "{m} vs {expected}");
        let zb = solve_position_bound(&a, &v, &v, 1.0, 2.0).unwrap();
        assert!(zb.r_bar > 2.0 && zb.r_bar < 2.0 + 1e-8);
        assert!(zb.residual.abs() <= 1e-8, "{zb:?}");
        let out = check_first_zero(&a, &v, &v, &SearchGrid::default());
        assert_eq!(out.classification, Classification::FirstZero);
        // sin(10 t)/(10 t) vanishes first at π/10
        assert!(out.bound.unwrap() >= std::f64::consts::PI / 10.0);
    }

    #[test]
    fn bound_is_scale_invariant() {
        let v = Weight::<f64>::power(3.0);
        let a = pot("4 + sin(t)^2");
        let base = solve_position_bound(&a, &v, &v, 0.5, 1.5).unwrap();
        let c = v.scaled(10.0);
        let scaled = solve_position_bound(&a, &c, &c, 0.5, 1.5).unwrap();
        assert!((base.r_bar - scaled.r_bar).abs() < 1e-9 * base.r_bar);
        let m0 = first_zero_margin(&a, &v, &v, 0.5, 1.5).unwrap();
        let m1 = first_zero_margin(&a, &c, &c, 0.5, 1.5).unwrap();
        assert!((m0 - m1).abs() < 1e-9);
    }

    #[test]
    fn marginal_pair_has_large_bound() {
        let v = Weight::<f64>::power(3.0);
        let a = pot("1");
        // margin(R, r) = (r - R) - ½ log r + ½ log(R³/3): find r with margin ≈ 1e-4
        let big_r = 1.0;
        let m = |r: f64| (r - big_r) - 0.5 * r.ln() + 0.5 * (big_r.powi(3) / 3.0).ln();
        let r = brent(|x| m(x) - 1e-4, 1.5, 10.0, 1e-15, 0.0).unwrap().x;
        let zb = solve_position_bound(&a, &v, &v, big_r, r).unwrap();
        assert!(zb.r_bar > 1e3 * r);
    }

    #[test]
    fn zero_potential_never_fires() {
        let v = Weight::<f64>::power(3.0);
        let out = check_first_zero(&PotentialSpec::<f64>::zero(), &v, &v, &SearchGrid::default());
        assert_eq!(out.classification, Classification::Inconclusive);
    }

    #[test]
    fn oscillation_functional() {
        let v = Weight::<f64>::power(3.0);
        let osc = check_oscillation(&pot("1"), &v, &v, 1.0, &DivergenceProtocol::default());
        assert_eq!(osc.classification, Classification::OscillationEvidence);
        let flat = check_oscillation(&pot("1/(4*t^2)"), &v, &v, 1.0, &DivergenceProtocol::default());
        assert_eq!(flat.classification, Classification::Inconclusive);
        assert!(flat.witnesses["rise"].abs() < 1e-8);
    }
}
