//! Dormand–Prince 5(4) stepper specialised to planar linear systems
//! `y₀' = a(t) y₁`, `y₁' = −b(t) y₀`.

use crate::roots::brent;
use crate::scalar::{lit, Real};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

pub(crate) type State<T> = [T; 2];

/// `(a, b)` of the system at `t`.
pub(crate) trait Coefficients<T> {
    fn at(&self, t: T) -> (T, T);
}

impl<T, F: Fn(T) -> (T, T)> Coefficients<T> for F {
    fn at(&self, t: T) -> (T, T) {
        self(t)
    }
}

#[inline]
fn rhs<T: Real>(c: (T, T), y: &State<T>) -> State<T> {
    [c.0 * y[1], -c.1 * y[0]]
}

#[inline]
fn axpy<T: Real>(y: &State<T>, h: T, terms: &[(f64, &State<T>)]) -> State<T> {
    let mut out = *y;
    for &(w, k) in terms {
        if w != 0.0 {
            let w = h * lit::<T>(w);
            out[0] += w * k[0];
            out[1] += w * k[1];
        }
    }
    out
}

/// Continuous extension of one accepted step.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Dense<T> {
    pub t0: T,
    pub h: T,
    r: [State<T>; 5],
}

impl<T: Real> Dense<T> {
    pub fn eval_theta(&self, th: T) -> State<T> {
        let one = T::one();
        let s = one - th;
        let mut out = [T::zero(); 2];
        for (i, o) in out.iter_mut().enumerate() {
            let r = &self.r;
            *o = r[0][i] + th * (r[1][i] + s * (r[2][i] + th * (r[3][i] + s * r[4][i])));
        }
        out
    }

    pub fn eval(&self, t: T) -> State<T> {
        self.eval_theta((t - self.t0) / self.h)
    }

    /// Sign changes of the first component inside the step, refined on the
    /// interpolant. An exact zero at the right endpoint counts; one at the
    /// left endpoint does not.
    pub fn zeros(&self, probes: usize, xtol: T) -> Vec<T> {
        let n = probes + 1;
        let mut out = Vec::new();
        let mut prev_th = T::zero();
        let mut prev = self.eval_theta(T::zero())[0];
        for i in 1..=n {
            let th = lit::<T>(i as f64 / n as f64);
            let cur = self.eval_theta(th)[0];
            if cur == T::zero() {
                out.push(self.t0 + th * self.h);
            } else if prev != T::zero() && (prev < T::zero()) != (cur < T::zero()) {
                let g = |x: T| self.eval_theta(x)[0];
                let th_star = match brent(g, prev_th, th, xtol, T::zero()) {
                    Ok(root) => root.x,
                    Err(_) => (prev_th + th) * lit(0.5),
                };
                out.push(self.t0 + th_star * self.h);
            }
            prev = cur;
            prev_th = th;
        }
        out
    }
}

pub(crate) struct StepOutcome<T> {
    pub y: State<T>,
    pub k_last: State<T>,
    pub err: T,
    pub dense: Dense<T>,
}

/// One trial step from `(t, y)` with first stage `k1`. `eval_t` maps stage
/// abscissae to evaluation points (used to stay on one side of a jump).
pub(crate) fn trial<T: Real, C: Coefficients<T>>(
    sys: &C,
    eval_t: &dyn Fn(T) -> T,
    t: T,
    y: &State<T>,
    k1: &State<T>,
    h: T,
    atol: &State<T>,
    rtol: T,
) -> Option<StepOutcome<T>> {
    let stage = |c: f64, y: &State<T>| -> Option<State<T>> {
        let co = sys.at(eval_t(t + lit::<T>(c) * h));
        if !(co.0.is_finite() && co.1.is_finite()) {
            return None;
        }
        Some(rhs(co, y))
    };
    let k2 = stage(C2, &axpy(y, h, &[(A21, k1)]))?;
    let k3 = stage(C3, &axpy(y, h, &[(A31, k1), (A32, &k2)]))?;
    let k4 = stage(C4, &axpy(y, h, &[(A41, k1), (A42, &k2), (A43, &k3)]))?;
    let k5 = stage(C5, &axpy(y, h, &[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)]))?;
    let k6 = stage(1.0, &axpy(y, h, &[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]))?;
    let y_new = axpy(y, h, &[(A71, k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
    let k7 = stage(1.0, &y_new)?;
    let e = axpy(&[T::zero(); 2], h, &[(E1, k1), (E3, &k3), (E4, &k4), (E5, &k5), (E6, &k6), (E7, &k7)]);
    let mut acc = T::zero();
    for i in 0..2 {
        let sc = atol[i] + rtol * y[i].abs().max(y_new[i].abs());
        let q = if sc > T::zero() { e[i] / sc } else if e[i] == T::zero() { T::zero() } else { T::infinity() };
        acc += q * q;
    }
    let err = (acc * lit(0.5)).sqrt();
    let r1 = [y_new[0] - y[0], y_new[1] - y[1]];
    let r2 = [h * k1[0] - r1[0], h * k1[1] - r1[1]];
    let r3 = [r1[0] - h * k7[0] - r2[0], r1[1] - h * k7[1] - r2[1]];
    let r4 = axpy(&[T::zero(); 2], h, &[(D1, k1), (D3, &k3), (D4, &k4), (D5, &k5), (D6, &k6), (D7, &k7)]);
    Some(StepOutcome { y: y_new, k_last: k7, err, dense: Dense { t0: t, h, r: [*y, r1, r2, r3, r4] } })
}

/// Step size multiplier from a normalised error estimate.
pub(crate) fn step_factor<T: Real>(err: T) -> T {
    if err == T::zero() {
        return lit(5.0);
    }
    (lit::<T>(0.9) * err.powf(lit(-0.2))).max(lit(0.2)).min(lit(5.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_step_matches_harmonic_oscillator() {
        let sys = |_t: f64| (1.0, 1.0);
        let y = [0.0, 1.0];
        let k1 = rhs(sys(0.0), &y);
        let id = |t: f64| t;
        let out = trial(&sys, &id, 0.0, &y, &k1, 0.1, &[1e-12, 1e-12], 1e-10).unwrap();
        assert!((out.y[0] - 0.1_f64.sin()).abs() < 1e-9);
        assert!((out.y[1] - 0.1_f64.cos()).abs() < 1e-9);
        let mid = out.dense.eval(0.05);
        assert!((mid[0] - 0.05_f64.sin()).abs() < 1e-8);
    }

    #[test]
    fn dense_zero_inside_step() {
        let sys = |_t: f64| (1.0, 1.0);
        let (t0, y) = (3.0, [3.0_f64.sin(), 3.0_f64.cos()]);
        let k1 = rhs(sys(t0), &y);
        let id = |t: f64| t;
        let out = trial(&sys, &id, t0, &y, &k1, 0.25, &[1e-12, 1e-12], 1e-10).unwrap();
        let z = out.dense.zeros(3, 1e-15);
        assert_eq!(z.len(), 1);
        assert!((z[0] - std::f64::consts::PI).abs() < 1e-6);
    }
}
