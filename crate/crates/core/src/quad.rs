//! Adaptive Gauss-Kronrod quadrature, including improper tails.
//!
//! Infinite tails `∫_a^∞` are summed over dyadic panels `[a, 2a], [2a, 4a], …`.
//! Once two consecutive panel sums shrink geometrically, the remaining tail is
//! extrapolated from their ratio `q` as `S_k q / (1 - q)`; the tail is accepted
//! when that remainder estimate falls below tolerance. Heads `∫_0^b` of
//! integrands singular at the origin use the same panels mirrored toward zero.

use thiserror::Error;

use crate::scalar::{lit, Real};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_5,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_48,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224,
    0.063_092_092_629_978_56,
    0.104_790_010_322_250_19,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_42,
    0.204_432_940_075_298_89,
    0.209_482_141_084_727_82,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_64,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadConfig<T> {
    pub abs_tol: T,
    pub rel_tol: T,
    /// Maximum number of subintervals kept by the adaptive bisection.
    pub max_intervals: usize,
    /// Tails that have not converged by this abscissa are declared divergent.
    pub horizon_cap: T,
}

impl<T: Real> Default for QuadConfig<T> {
    fn default() -> Self {
        Self {
            abs_tol: lit(1e-10),
            rel_tol: lit(1e-8),
            max_intervals: 400,
            horizon_cap: lit(1e12),
        }
    }
}

impl<T: Real> QuadConfig<T> {
    pub fn tight() -> Self {
        Self { abs_tol: lit(1e-14), rel_tol: lit(1e-12), ..Self::default() }
    }

    fn tol_for(&self, value: T) -> T {
        self.abs_tol.max(self.rel_tol * value.abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult<T> {
    pub value: T,
    pub error: T,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuadError {
    #[error("tail integral did not converge before r = {reached:e} (remainder estimate {remainder:e})")]
    DivergentTail { reached: f64, remainder: f64 },
    #[error("integral near the origin did not converge (remainder estimate {remainder:e})")]
    DivergentHead { remainder: f64 },
    #[error("integrand is not finite at t = {at:e}")]
    NonFinite { at: f64 },
}

/// One 15-point Kronrod panel with the QUADPACK error rescaling.
pub fn gk15<T: Real, F: Fn(T) -> T>(f: &F, a: T, b: T) -> (T, T) {
    let half = lit::<T>(0.5);
    let center = half * (a + b);
    let half_len = half * (b - a);
    let fc = f(center);
    let mut res_k = fc * lit(WGK[7]);
    let mut res_g = fc * lit(WG[3]);
    let mut res_abs = res_k.abs();
    let mut fv1 = [T::zero(); 7];
    let mut fv2 = [T::zero(); 7];
    for j in 0..7 {
        let dx = half_len * lit(XGK[j]);
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        let w = lit::<T>(WGK[j]);
        res_k += w * (f1 + f2);
        res_abs += w * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += lit::<T>(WG[j / 2]) * (f1 + f2);
        }
    }
    let mean = res_k * half;
    let mut res_asc = lit::<T>(WGK[7]) * (fc - mean).abs();
    for j in 0..7 {
        res_asc += lit::<T>(WGK[j]) * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let value = res_k * half_len;
    let res_abs = res_abs * half_len.abs();
    let res_asc = res_asc * half_len.abs();
    let mut err = ((res_k - res_g) * half_len).abs();
    if res_asc != T::zero() && err != T::zero() {
        let scale = (lit::<T>(200.0) * err / res_asc).powf(lit(1.5));
        err = res_asc * scale.min(T::one());
    }
    let eps50 = lit::<T>(50.0) * T::epsilon();
    if res_abs > T::min_positive_value() / eps50 {
        err = err.max(eps50 * res_abs);
    }
    (value, err)
}

/// Globally adaptive quadrature on a finite interval.
pub fn integrate<T: Real, F: Fn(T) -> T>(f: &F, a: T, b: T, cfg: &QuadConfig<T>) -> QuadResult<T> {
    if a == b {
        return QuadResult { value: T::zero(), error: T::zero(), converged: true };
    }
    let (v0, e0) = gk15(f, a, b);
    let mut parts: Vec<(T, T, T, T)> = vec![(a, b, v0, e0)];
    let mut value = v0;
    let mut error = e0;
    while error > cfg.tol_for(value) {
        if parts.len() >= cfg.max_intervals || !value.is_finite() {
            return QuadResult { value, error, converged: false };
        }
        let (idx, _) = parts
            .iter()
            .enumerate()
            .fold((0usize, T::neg_infinity()), |acc, (i, p)| if p.3 > acc.1 { (i, p.3) } else { acc });
        let (lo, hi, pv, pe) = parts.swap_remove(idx);
        let mid = lit::<T>(0.5) * (lo + hi);
        if mid <= lo || mid >= hi {
            // Interval can no longer be bisected in this precision.
            parts.push((lo, hi, pv, pe));
            return QuadResult { value, error, converged: false };
        }
        let (lv, le) = gk15(f, lo, mid);
        let (rv, re) = gk15(f, mid, hi);
        value = value - pv + lv + rv;
        error = error - pe + le + re;
        parts.push((lo, mid, lv, le));
        parts.push((mid, hi, rv, re));
        if error < T::zero() {
            error = parts.iter().map(|p| p.3).sum();
        }
    }
    QuadResult { value, error, converged: true }
}

/// Finite-interval quadrature that first splits at the given interior points
/// and, when the interval spans several scales, at a geometric sequence.
pub fn integrate_split<T: Real, F: Fn(T) -> T>(
    f: &F,
    a: T,
    b: T,
    breakpoints: &[T],
    cfg: &QuadConfig<T>,
) -> QuadResult<T> {
    if a == b {
        return QuadResult { value: T::zero(), error: T::zero(), converged: true };
    }
    if b < a {
        let r = integrate_split(f, b, a, breakpoints, cfg);
        return QuadResult { value: -r.value, ..r };
    }
    let mut cuts: Vec<T> = vec![a];
    let two = lit::<T>(2.0);
    if a > T::zero() && b / a > lit(4.0) {
        let mut x = a * two;
        while x < b {
            cuts.push(x);
            x *= two;
        }
    }
    cuts.extend(breakpoints.iter().copied().filter(|&p| p > a && p < b));
    cuts.push(b);
    cuts.sort_by(|x, y| x.partial_cmp(y).expect("finite cut points"));
    cuts.dedup();
    let mut total = QuadResult { value: T::zero(), error: T::zero(), converged: true };
    for w in cuts.windows(2) {
        let r = integrate(f, w[0], w[1], cfg);
        total.value += r.value;
        total.error += r.error;
        total.converged &= r.converged;
    }
    total
}

struct PanelSeries<T> {
    sum: T,
    error: T,
    prev: Option<T>,
    count: usize,
    remainder: T,
}

impl<T: Real> PanelSeries<T> {
    fn new() -> Self {
        Self { sum: T::zero(), error: T::zero(), prev: None, count: 0, remainder: T::infinity() }
    }

    /// Adds a panel; returns true once the extrapolated remainder is below tolerance.
    fn push(&mut self, r: QuadResult<T>, cfg: &QuadConfig<T>) -> bool {
        self.sum += r.value;
        self.error += r.error;
        self.count += 1;
        let s = r.value.abs();
        let rem = match self.prev {
            Some(p) if p == T::zero() && s == T::zero() => T::zero(),
            Some(p) if p > T::zero() && s < p => {
                let q = s / p;
                s * q / (T::one() - q)
            }
            _ => T::infinity(),
        };
        self.prev = Some(s);
        self.remainder = rem;
        let sign = if self.sum < T::zero() { -T::one() } else { T::one() };
        let done = self.count >= 3 && rem <= cfg.tol_for(self.sum);
        if done {
            self.sum += sign * rem;
            self.error += rem;
        }
        done
    }
}

/// `∫_a^∞ f`, summed over dyadic panels.
pub fn integrate_tail<T: Real, F: Fn(T) -> T>(f: &F, a: T, cfg: &QuadConfig<T>) -> Result<QuadResult<T>, QuadError> {
    let mut series = PanelSeries::new();
    let panel_cfg = QuadConfig { abs_tol: cfg.abs_tol * lit(1e-3), ..*cfg };
    let mut lo = a;
    loop {
        let hi = if lo > T::zero() { lo + lo } else { lo + T::one() };
        let r = integrate(f, lo, hi, &panel_cfg);
        if !r.value.is_finite() {
            return Err(QuadError::NonFinite { at: crate::scalar::to_f64(lo) });
        }
        if series.push(r, cfg) {
            return Ok(QuadResult { value: series.sum, error: series.error, converged: true });
        }
        lo = hi;
        if lo > cfg.horizon_cap {
            return Err(QuadError::DivergentTail {
                reached: crate::scalar::to_f64(lo),
                remainder: crate::scalar::to_f64(series.remainder),
            });
        }
    }
}

/// `∫_0^b f` for integrands that may be singular (but integrable) at zero.
pub fn integrate_head<T: Real, F: Fn(T) -> T>(f: &F, b: T, cfg: &QuadConfig<T>) -> Result<QuadResult<T>, QuadError> {
    let mut series = PanelSeries::new();
    let panel_cfg = QuadConfig { abs_tol: cfg.abs_tol * lit(1e-3), ..*cfg };
    let mut hi = b;
    let floor = b * lit(1e-18);
    loop {
        let lo = hi * lit(0.5);
        let r = integrate(f, lo, hi, &panel_cfg);
        if !r.value.is_finite() {
            return Err(QuadError::NonFinite { at: crate::scalar::to_f64(lo) });
        }
        if series.push(r, cfg) {
            return Ok(QuadResult { value: series.sum, error: series.error, converged: true });
        }
        hi = lo;
        if hi < floor {
            return Err(QuadError::DivergentHead { remainder: crate::scalar::to_f64(series.remainder) });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gk15_is_exact_for_low_degree_polynomials() {
        let (v, _) = gk15(&|x: f64| 3.0 * x * x + 2.0 * x + 1.0, 0.0, 2.0);
        assert!((v - 14.0).abs() < 1e-13);
    }

    #[test]
    fn adaptive_handles_sharp_peak() {
        let f = |x: f64| 1.0 / (1e-4 + (x - 0.3) * (x - 0.3));
        let exact = (0.7 / 1e-2_f64).atan() / 1e-2 + (0.3 / 1e-2_f64).atan() / 1e-2;
        let r = integrate(&f, 0.0, 1.0, &QuadConfig::default());
        assert!(r.converged);
        assert!((r.value - exact).abs() < 1e-8 * exact);
    }

    #[test]
    fn tail_of_inverse_square() {
        let r = integrate_tail(&|s: f64| 1.0 / (s * s), 2.0, &QuadConfig::default()).unwrap();
        assert!((r.value - 0.5).abs() < 1e-12);
    }

    #[test]
    fn tail_of_exponential() {
        let r = integrate_tail(&|s: f64| (-3.0 * s).exp(), 0.5, &QuadConfig::default()).unwrap();
        assert!((r.value - (-1.5_f64).exp() / 3.0).abs() < 1e-13);
    }

    #[test]
    fn harmonic_tail_diverges() {
        let e = integrate_tail(&|s: f64| 1.0 / s, 1.0, &QuadConfig::default()).unwrap_err();
        assert!(matches!(e, QuadError::DivergentTail { .. }));
    }

    #[test]
    fn slow_log_tail_is_flagged() {
        // ∫ ds/(s log² s) = 1/log r converges too slowly for panel extrapolation.
        let f = |s: f64| 1.0 / (s * s.ln().powi(2));
        assert!(integrate_tail(&f, std::f64::consts::E, &QuadConfig::default()).is_err());
    }

    #[test]
    fn head_with_integrable_singularity() {
        let r = integrate_head(&|s: f64| 1.0 / s.sqrt(), 4.0, &QuadConfig::default()).unwrap();
        assert!((r.value - 4.0).abs() < 1e-9);
    }

    #[test]
    fn split_respects_breakpoints() {
        let f = |t: f64| if t < 1.0 { 0.0 } else if t < 2.0 { 50.0 } else { 0.0 };
        let r = integrate_split(&f, 0.0, 3.0, &[1.0, 2.0], &QuadConfig::default());
        assert!((r.value - 50.0).abs() < 1e-12);
    }

    #[test]
    fn works_in_single_precision() {
        let r = integrate(&|x: f32| x.sin(), 0.0, std::f32::consts::PI, &QuadConfig {
            abs_tol: 1e-5,
            rel_tol: 1e-5,
            ..QuadConfig::default()
        });
        assert!((r.value - 2.0).abs() < 1e-4);
    }
}
