//! Gamma and modified Bessel `I_ν`, plus the explicit positive shift
//! solutions `w` used to absorb the negative part of a potential.

use std::sync::Arc;

use thiserror::Error;

use crate::potential::PotentialSpec;
use crate::scalar::{from_usize, lit, to_f64, Real};
use crate::transforms::{ResidualKind, ShiftWeight};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpecialFnError {
    #[error("I_{nu}({x}) overflows the floating-point range; use log_bessel_i")]
    Overflow { nu: f64, x: f64 },
    #[error("invalid argument: {0}")]
    Domain(String),
}

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

fn lanczos_sum<T: Real>(x: T) -> T {
    let mut a = lit::<T>(LANCZOS[0]);
    for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
        a += lit::<T>(c) / (x + from_usize(i));
    }
    a
}

/// `Γ(x)` by the Lanczos approximation (g = 7, 9 terms) with reflection.
pub fn gamma<T: Real>(x: T) -> T {
    let half = lit::<T>(0.5);
    if x < half {
        let pi = T::PI();
        return pi / ((pi * x).sin() * gamma(T::one() - x));
    }
    let x = x - T::one();
    let t = x + lit(LANCZOS_G) + half;
    (T::TAU()).sqrt() * t.powf(x + half) * (-t).exp() * lanczos_sum(x)
}

/// `ln Γ(x)` for `x > 0`.
pub fn ln_gamma<T: Real>(x: T) -> T {
    let half = lit::<T>(0.5);
    if x < half {
        let pi = T::PI();
        return (pi / (pi * x).sin().abs()).ln() - ln_gamma(T::one() - x);
    }
    let x = x - T::one();
    let t = x + lit(LANCZOS_G) + half;
    half * T::TAU().ln() + (x + half) * t.ln() - t + lanczos_sum(x).ln()
}

/// Argument above which the asymptotic expansion replaces the power series.
pub fn bessel_crossover<T: Real>(nu: T) -> T {
    lit::<T>(20.0).max(lit::<T>(10.0) * nu)
}

/// `ln Σ_k (x/2)^{2k+ν}/(k! Γ(k+ν+1))`.
pub fn log_bessel_i_series<T: Real>(nu: T, x: T) -> T {
    let half_x = x * lit(0.5);
    let ln_first = nu * half_x.ln() - ln_gamma(nu + T::one());
    let q = half_x * half_x;
    let mut term = T::one();
    let mut sum = T::one();
    for k in 0..500 {
        let kk = from_usize::<T>(k);
        term = term * q / ((kk + T::one()) * (kk + nu + T::one()));
        sum += term;
        if term < T::epsilon() * lit(0.1) * sum {
            break;
        }
    }
    ln_first + sum.ln()
}

/// `ln` of the large-argument expansion `e^x/√(2πx) Σ (-1)^k a_k(ν)/x^k`,
/// truncated before the terms start growing.
pub fn log_bessel_i_asymptotic<T: Real>(nu: T, x: T) -> T {
    let mu = lit::<T>(4.0) * nu * nu;
    let mut term = T::one();
    let mut sum = T::one();
    let mut prev = T::infinity();
    for k in 1..200 {
        let kk = from_usize::<T>(k);
        let odd = lit::<T>(2.0) * kk - T::one();
        let next = -term * (mu - odd * odd) / (kk * lit(8.0) * x);
        if next.abs() >= prev || next == T::zero() {
            break;
        }
        prev = next.abs();
        term = next;
        sum += term;
        if term.abs() < T::epsilon() * lit(0.1) * sum.abs() {
            break;
        }
    }
    x - lit::<T>(0.5) * (T::TAU() * x).ln() + sum.ln()
}

/// `ln I_ν(x)`; `-∞` at `x = 0` for `ν > 0`.
pub fn log_bessel_i<T: Real>(nu: T, x: T) -> T {
    if x == T::zero() {
        return if nu == T::zero() { T::zero() } else { T::neg_infinity() };
    }
    if x < bessel_crossover(nu) {
        log_bessel_i_series(nu, x)
    } else {
        log_bessel_i_asymptotic(nu, x)
    }
}

/// Modified Bessel function of the first kind.
pub fn bessel_i<T: Real>(nu: T, x: T) -> Result<T, SpecialFnError> {
    if nu < T::zero() || x < T::zero() {
        return Err(SpecialFnError::Domain(format!("I_nu(x) needs nu >= 0, x >= 0; got nu = {nu}, x = {x}")));
    }
    let v = log_bessel_i(nu, x).exp();
    if v.is_infinite() {
        return Err(SpecialFnError::Overflow { nu: to_f64(nu), x: to_f64(x) });
    }
    Ok(v)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BesselOrder<T> {
    pub nu: T,
}

impl<T: Real> BesselOrder<T> {
    /// `ν = 1/(2+α)` for the polynomial lower bound exponent `α > -2`.
    pub fn from_alpha(alpha: T) -> Self {
        Self { nu: T::one() / (lit::<T>(2.0) + alpha) }
    }
}

/// `ln sinh u` for `u > 0` without overflow.
pub(crate) fn ln_sinh<T: Real>(u: T) -> T {
    if u > lit(20.0) {
        u - T::LN_2() + (-(-(u + u)).exp()).ln_1p()
    } else {
        u.sinh().ln()
    }
}

/// `ln(e^y - 1)` for `y > 0` without overflow.
pub(crate) fn ln_expm1<T: Real>(y: T) -> T {
    if y > lit(30.0) {
        y + (-(-y).exp()).ln_1p()
    } else {
        y.exp_m1().ln()
    }
}

fn param_map(pairs: &[(&str, f64)]) -> std::collections::BTreeMap<String, f64> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

/// Positive `w` with `w'' - B²(1+t²)^{α/2} w >= 0` on `ℝ⁺`.
///
/// * `α >= 0`: `sinh(c[(1+t)^p - 1])`,
/// * `-2 < α < 0`: `t^{1/2} I_ν(c t^p)`,
/// * `α = -2`: `t^{B'}`, `B' = (1 + √(1+4B²))/2`,
///
/// with `c = 2B/(2+α)`, `p = 1 + α/2`, `ν = 1/(2+α)`.
pub fn shift_solution_negative_part<T: Real>(alpha: T, b: T) -> ShiftWeight<T> {
    let two = lit::<T>(2.0);
    let (af, bf) = (to_f64(alpha), to_f64(b));
    let shift = PotentialSpec::parse("B^2*(1+t^2)^(alpha/2)", &param_map(&[("B", bf), ("alpha", af)]))
        .expect("static expression")
        .with_label(format!("B^2 (1+t^2)^(alpha/2), B = {bf}, alpha = {af}"));
    let inequality = "w'' - B^2 (1+t^2)^(alpha/2) w >= 0".to_string();
    if alpha <= -two + lit(1e-12) {
        let d = (T::one() + lit::<T>(4.0) * b * b).sqrt();
        let bp = (T::one() + d) / two;
        return ShiftWeight::new(format!("t^{}", to_f64(bp)), Arc::new(move |t: T| bp * t.ln()), shift, ResidualKind::Supersolution)
            .with_inequality(inequality)
            .with_ln_tail_sq(Arc::new(move |t: T| -d * t.ln() - d.ln()))
            .with_normalization(format!("B' = {}", to_f64(bp)));
    }
    let c = two * b / (two + alpha);
    let p = T::one() + alpha / two;
    if alpha >= T::zero() {
        let ln_w: Arc<dyn Fn(T) -> T + Send + Sync> = Arc::new(move |t: T| ln_sinh(c * ((T::one() + t).powf(p) - T::one())));
        let mut sw = ShiftWeight::new(format!("sinh({}*((1+t)^{} - 1))", to_f64(c), to_f64(p)), ln_w, shift, ResidualKind::Supersolution)
            .with_inequality(inequality)
            .vanishing_at_origin();
        if alpha == T::zero() {
            // ∫_t^∞ ds/sinh²(Bs) = (coth(Bt) - 1)/B = 2/(B (e^{2Bt} - 1))
            sw = sw.with_ln_tail_sq(Arc::new(move |t: T| T::LN_2() - ln_expm1(two * b * t) - b.ln()));
        }
        return sw;
    }
    let nu = BesselOrder::from_alpha(alpha).nu;
    let ln_w: Arc<dyn Fn(T) -> T + Send + Sync> =
        Arc::new(move |t: T| lit::<T>(0.5) * t.ln() + log_bessel_i(nu, c * t.powf(p)));
    ShiftWeight::new(format!("t^(1/2) I_{}({}*t^{})", to_f64(nu), to_f64(c), to_f64(p)), ln_w, shift, ResidualKind::Supersolution)
        .with_inequality(inequality)
        .vanishing_at_origin()
}

/// Exact positive solution of `w'' = B² t^α w` used on `[1, ∞)`:
/// `√t I_ν(c t^p)` for `α > -2`, `t^{B'}` for `α = -2`.
pub fn shift_solution_unit_interval<T: Real>(alpha: T, b: T) -> ShiftWeight<T> {
    let two = lit::<T>(2.0);
    let (af, bf) = (to_f64(alpha), to_f64(b));
    let shift = PotentialSpec::parse("B^2*t^alpha", &param_map(&[("B", bf), ("alpha", af)]))
        .expect("static expression")
        .with_label(format!("B^2 t^alpha, B = {bf}, alpha = {af}"));
    let eq = "w'' - B^2 t^alpha w = 0 on [1, inf)".to_string();
    if alpha <= -two + lit(1e-12) {
        let d = (T::one() + lit::<T>(4.0) * b * b).sqrt();
        let bp = (T::one() + d) / two;
        return ShiftWeight::new(format!("t^{}", to_f64(bp)), Arc::new(move |t: T| bp * t.ln()), shift, ResidualKind::Equality)
            .with_inequality(eq)
            .with_ln_tail_sq(Arc::new(move |t: T| -d * t.ln() - d.ln()));
    }
    let c = two * b / (two + alpha);
    let p = T::one() + alpha / two;
    let nu = BesselOrder::from_alpha(alpha).nu;
    let ln_w: Arc<dyn Fn(T) -> T + Send + Sync> =
        Arc::new(move |t: T| lit::<T>(0.5) * t.ln() + log_bessel_i(nu, c * t.powf(p)));
    ShiftWeight::new(format!("t^(1/2) I_{}({}*t^{})", to_f64(nu), to_f64(c), to_f64(p)), ln_w, shift, ResidualKind::Equality)
        .with_inequality(eq)
}

/// Positive solution of `w'' + B²/(1+t)² w = 0`, `w(0) = 0`, `w'(0) = 1`, `0 <= B <= 1/2`.
///
/// `B = 1/2`: `√(1+t) log(1+t)`; otherwise `((1+t)^{B''} - (1+t)^{1-B''})/√(1-4B²)`.
pub fn euler_solution<T: Real>(b: T) -> ShiftWeight<T> {
    let half = lit::<T>(0.5);
    let bf = to_f64(b);
    let shift = PotentialSpec::parse("-B^2/(1+t)^2", &param_map(&[("B", bf)]))
        .expect("static expression")
        .with_label(format!("-B^2/(1+t)^2, B = {bf}"));
    let eq = "w'' + B^2/(1+t)^2 w = 0".to_string();
    let d2 = T::one() - lit::<T>(4.0) * b * b;
    if d2 <= lit(1e-14) {
        let ln_w: Arc<dyn Fn(T) -> T + Send + Sync> = Arc::new(move |t: T| {
            let l = t.ln_1p();
            half * l + l.ln()
        });
        return ShiftWeight::new("sqrt(1+t)*log(1+t)", ln_w, shift, ResidualKind::Equality)
            .with_inequality(eq)
            .with_ln_tail_sq(Arc::new(|t: T| -t.ln_1p().ln()))
            .vanishing_at_origin()
            .with_normalization("none (w'(0) = 1)".into());
    }
    let d = d2.sqrt();
    let bpp = (T::one() + d) / lit(2.0);
    let ln_w: Arc<dyn Fn(T) -> T + Send + Sync> = Arc::new(move |t: T| {
        let l = t.ln_1p();
        (T::one() - bpp) * l + ln_expm1(d * l) - d.ln()
    });
    ShiftWeight::new(
        format!("((1+t)^{} - (1+t)^{})/{}", to_f64(bpp), to_f64(T::one() - bpp), to_f64(d)),
        ln_w,
        shift,
        ResidualKind::Equality,
    )
    .with_inequality(eq)
    // ∫_t^∞ ds/w² = d / ((1+t)^d - 1)
    .with_ln_tail_sq(Arc::new(move |t: T| d.ln() - ln_expm1(d * t.ln_1p())))
    .vanishing_at_origin()
    .with_normalization(format!("1/sqrt(1-4B^2) = {} (w'(0) = 1)", to_f64(T::one() / d)))
}

/// Positive solution of `w'' + B²/t² w = 0` on `(t0, ∞)`: `t^{B''}` or `√t log t` (on `t > 1`).
pub fn euler_solution_unit_interval<T: Real>(b: T) -> ShiftWeight<T> {
    let half = lit::<T>(0.5);
    let bf = to_f64(b);
    let shift = PotentialSpec::parse("-B^2/t^2", &param_map(&[("B", bf)]))
        .expect("static expression")
        .with_label(format!("-B^2/t^2, B = {bf}"));
    let eq = "w'' + B^2/t^2 w = 0".to_string();
    let d2 = T::one() - lit::<T>(4.0) * b * b;
    if d2 <= lit(1e-14) {
        let ln_w: Arc<dyn Fn(T) -> T + Send + Sync> = Arc::new(move |t: T| half * t.ln() + t.ln().ln());
        return ShiftWeight::new("sqrt(t)*log(t)", ln_w, shift, ResidualKind::Equality)
            .with_inequality(eq)
            .with_ln_tail_sq(Arc::new(|t: T| -t.ln().ln()))
            .with_positivity_start(T::one());
    }
    let d = d2.sqrt();
    let bpp = (T::one() + d) / lit(2.0);
    ShiftWeight::new(format!("t^{}", to_f64(bpp)), Arc::new(move |t: T| bpp * t.ln()), shift, ResidualKind::Equality)
        .with_inequality(eq)
        .with_ln_tail_sq(Arc::new(move |t: T| -d * t.ln() - d.ln()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_values() {
        assert!((gamma(5.0_f64) - 24.0).abs() < 1e-12);
        assert!((gamma(0.5_f64) - std::f64::consts::PI.sqrt()).abs() < 1e-14);
        assert!((gamma(-0.5_f64) + 2.0 * std::f64::consts::PI.sqrt()).abs() < 1e-13);
        assert!((ln_gamma(100.0_f64) - 359.134_205_369_575_4).abs() < 1e-10);
        // Γ(4/3) = 0.8929795115692492...
        assert!((gamma(4.0_f64 / 3.0) / 0.892_979_511_569_249_2 - 1.0).abs() < 1e-13);
    }

    #[test]
    fn half_integer_bessel() {
        let v = bessel_i(0.5_f64, 2.0).unwrap();
        let exact = (2.0 / (std::f64::consts::PI * 2.0)).sqrt() * 2.0_f64.sinh();
        assert!((v - exact).abs() < 1e-13 * exact);
        assert!((v - 2.0462).abs() < 1e-4);
        let small = bessel_i(0.5_f64, 1e-6).unwrap() / 1e-6_f64.sqrt();
        assert!((small - (2.0 / std::f64::consts::PI).sqrt()).abs() < 1e-10);
    }

    #[test]
    fn reference_values() {
        // mpmath.besseli(mpf(1)/3, 10) and besseli(0, 50)
        let a = bessel_i(1.0_f64 / 3.0, 10.0).unwrap();
        assert!((a / 2_799.239_609_705_679_4 - 1.0).abs() < 1e-12, "{a}");
        let b = bessel_i(0.0_f64, 50.0).unwrap();
        assert!((b / 2.932_553_783_849_336e20 - 1.0).abs() < 1e-12, "{b}");
    }

    #[test]
    fn overflow_is_reported() {
        assert!(matches!(bessel_i(0.5_f64, 800.0), Err(SpecialFnError::Overflow { .. })));
        assert!(log_bessel_i(0.5_f64, 800.0).is_finite());
    }

    #[test]
    fn shift_family_shapes() {
        let s = shift_solution_negative_part(0.0_f64, 1.0);
        assert!((s.eval(1.3) - 1.3_f64.sinh()).abs() < 1e-14);
        let p = shift_solution_negative_part(-2.0_f64, 1.0);
        let golden = (1.0 + 5.0_f64.sqrt()) / 2.0;
        assert!((p.eval(3.0) - 3.0_f64.powf(golden)).abs() < 1e-12);
        let lim = shift_solution_negative_part(-2.0_f64, 1e-9);
        assert!((lim.eval(7.0) - 7.0).abs() < 1e-9);
        let e = euler_solution(0.5_f64);
        assert!((e.eval(1.0) - 2.0_f64.sqrt() * 2.0_f64.ln()).abs() < 1e-15);
        assert!((e.eval(1.0) - 0.9803).abs() < 1e-4);
        let z = euler_solution(0.0_f64);
        assert!((z.eval(4.5) - 4.5).abs() < 1e-13);
        let m = euler_solution(0.3_f64);
        let t = 2.0_f64;
        assert!((m.eval(t) - (3.0_f64.powf(0.9) - 3.0_f64.powf(0.1)) / 0.8).abs() < 1e-13);
    }
}
