//! Bracketing root finders.

use thiserror::Error;

use crate::scalar::{lit, to_f64, Real};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RootError {
    #[error("no sign change on [{lo:e}, {hi:e}] (f = {flo:e}, {fhi:e})")]
    NotBracketed { lo: f64, hi: f64, flo: f64, fhi: f64 },
    #[error("no bracket found up to {limit:e}")]
    BracketFailure { limit: f64 },
    #[error("root finder did not converge in {iterations} iterations")]
    NoConvergence { iterations: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root<T> {
    pub x: T,
    pub fx: T,
    pub bracket: (T, T),
    pub iterations: usize,
}

/// Brent's method on a sign-changing bracket.
///
/// Stops when the bracket is narrower than `xtol·(1 + |x|)` or `|f| <= ftol`.
pub fn brent<T: Real, F: FnMut(T) -> T>(mut f: F, lo: T, hi: T, xtol: T, ftol: T) -> Result<Root<T>, RootError> {
    let (mut a, mut b) = (lo, hi);
    let (mut fa, mut fb) = (f(a), f(b));
    if fa == T::zero() {
        return Ok(Root { x: a, fx: fa, bracket: (a, a), iterations: 0 });
    }
    if fb == T::zero() {
        return Ok(Root { x: b, fx: fb, bracket: (b, b), iterations: 0 });
    }
    if (fa > T::zero()) == (fb > T::zero()) || fa.is_nan() || fb.is_nan() {
        return Err(RootError::NotBracketed { lo: to_f64(a), hi: to_f64(b), flo: to_f64(fa), fhi: to_f64(fb) });
    }
    let half = lit::<T>(0.5);
    let two = lit::<T>(2.0);
    let three = lit::<T>(3.0);
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for it in 1..=200 {
        if (fb > T::zero()) == (fc > T::zero()) {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = two * T::epsilon() * b.abs() + half * xtol * (T::one() + b.abs());
        let xm = half * (c - b);
        if xm.abs() <= tol1 || fb.abs() <= ftol {
            let (l, h) = if b < c { (b, c) } else { (c, b) };
            return Ok(Root { x: b, fx: fb, bracket: (l, h), iterations: it });
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = two * xm * s;
                q = T::one() - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (two * xm * qq * (qq - r) - (b - a) * (r - T::one()));
                q = (qq - T::one()) * (r - T::one()) * (s - T::one());
            }
            if p > T::zero() {
                q = -q;
            }
            p = p.abs();
            let min1 = three * xm * q - (tol1 * q).abs();
            let min2 = (e * q).abs();
            if two * p < min1.min(min2) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        if d.abs() > tol1 {
            b += d;
        } else {
            b += if xm > T::zero() { tol1 } else { -tol1 };
        }
        fb = f(b);
    }
    Err(RootError::NoConvergence { iterations: 200 })
}

/// Expands `hi` geometrically from `start` until `f` changes sign relative to `f(lo)`.
pub fn expand_upward<T: Real, F: FnMut(T) -> T>(mut f: F, lo: T, start: T, factor: T, limit: T) -> Result<(T, T), RootError> {
    let flo = f(lo);
    let mut prev = lo;
    let mut hi = start;
    loop {
        let fhi = f(hi);
        if fhi.is_nan() {
            return Err(RootError::BracketFailure { limit: to_f64(limit) });
        }
        if (fhi > T::zero()) != (flo > T::zero()) || fhi == T::zero() {
            return Ok((prev, hi));
        }
        if hi >= limit {
            return Err(RootError::BracketFailure { limit: to_f64(limit) });
        }
        prev = hi;
        hi = (hi * factor).min(limit);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_cubic_root() {
        let r = brent(|x: f64| x * x * x - 2.0, 0.0, 2.0, 1e-15, 0.0).unwrap();
        assert!((r.x - 2f64.cbrt()).abs() < 1e-13);
    }

    #[test]
    fn rejects_unbracketed() {
        assert!(matches!(brent(|x: f64| x * x + 1.0, -1.0, 1.0, 1e-12, 0.0), Err(RootError::NotBracketed { .. })));
    }

    #[test]
    fn expands_to_bracket() {
        let (lo, hi) = expand_upward(|x: f64| x - 1000.0, 1.0, 2.0, 2.0, 1e12).unwrap();
        assert!(lo < 1000.0 && hi >= 1000.0);
        assert!(expand_upward(|x: f64| -x, 1.0, 2.0, 2.0, 1e3).is_err());
    }

    #[test]
    fn single_precision_root() {
        let r = brent(|x: f32| x.cos() - x, 0.0, 1.0, 1e-6, 0.0).unwrap();
        assert!((r.x - 0.739_085_1).abs() < 1e-5);
    }
}
