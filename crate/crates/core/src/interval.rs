//! Outward-rounded interval evaluation of [`Expr`] trees.
//!
//! Used as a second, independent evaluation path and for sign certificates:
//! if the enclosure of `f` over `[lo, hi]` lies strictly on one side of zero,
//! so does `f` on that cell. Endpoints may be infinite.

use crate::expr::{BinOp, CmpOp, Cond, Expr, Func, Node};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

const WIDEN: f64 = 4.0 * f64::EPSILON;

impl Interval {
    pub const ENTIRE: Interval = Interval { lo: f64::NEG_INFINITY, hi: f64::INFINITY };

    pub fn new(lo: f64, hi: f64) -> Self {
        if lo.is_nan() || hi.is_nan() {
            return Self::ENTIRE;
        }
        Self { lo: lo.min(hi), hi: hi.max(lo) }
    }

    pub fn point(x: f64) -> Self {
        Self { lo: x, hi: x }
    }

    fn widened(lo: f64, hi: f64) -> Self {
        if lo.is_nan() || hi.is_nan() {
            return Self::ENTIRE;
        }
        // Exact zeros (products with a zero factor, exact cancellation) stay put.
        let down = |x: f64| if x.is_finite() && x != 0.0 { x - x.abs() * WIDEN - f64::MIN_POSITIVE } else { x };
        let up = |x: f64| if x.is_finite() && x != 0.0 { x + x.abs() * WIDEN + f64::MIN_POSITIVE } else { x };
        Self { lo: down(lo.min(hi)), hi: up(hi.max(lo)) }
    }

    pub fn contains_zero(&self) -> bool {
        self.lo <= 0.0 && self.hi >= 0.0
    }

    pub fn hull(self, other: Self) -> Self {
        Self { lo: self.lo.min(other.lo), hi: self.hi.max(other.hi) }
    }

    fn add(self, o: Self) -> Self {
        Self::widened(self.lo + o.lo, self.hi + o.hi)
    }

    fn neg(self) -> Self {
        Self { lo: -self.hi, hi: -self.lo }
    }

    fn mul(self, o: Self) -> Self {
        let prod = |a: f64, b: f64| if a == 0.0 || b == 0.0 { 0.0 } else { a * b };
        let c = [prod(self.lo, o.lo), prod(self.lo, o.hi), prod(self.hi, o.lo), prod(self.hi, o.hi)];
        let lo = c.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = c.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Self::widened(lo, hi)
    }

    fn recip(self) -> Self {
        if self.contains_zero() {
            return Self::ENTIRE;
        }
        Self::widened(1.0 / self.hi, 1.0 / self.lo)
    }

    fn monotone(self, f: impl Fn(f64) -> f64, increasing: bool) -> Self {
        if increasing {
            Self::widened(f(self.lo), f(self.hi))
        } else {
            Self::widened(f(self.hi), f(self.lo))
        }
    }

    fn powi(self, n: i32) -> Self {
        if n == 0 {
            return Self::point(1.0);
        }
        if n < 0 {
            return self.powi(-n).recip();
        }
        if n % 2 == 1 {
            return self.monotone(|x| x.powi(n), true);
        }
        if self.lo >= 0.0 {
            self.monotone(|x| x.powi(n), true)
        } else if self.hi <= 0.0 {
            self.monotone(|x| x.powi(n), false)
        } else {
            Self::widened(0.0, self.lo.abs().max(self.hi).powi(n))
        }
    }

    fn pow(self, e: Self) -> Self {
        if e.lo == e.hi && e.lo == e.lo.round() && e.lo.abs() <= 64.0 {
            return self.powi(e.lo as i32);
        }
        if self.lo <= 0.0 {
            return Self::ENTIRE;
        }
        // x^y = exp(y ln x) is monotone in each argument separately on x > 0.
        self.log().mul(e).exp()
    }

    fn exp(self) -> Self {
        self.monotone(f64::exp, true)
    }

    fn log(self) -> Self {
        if self.lo <= 0.0 {
            return Self::ENTIRE;
        }
        self.monotone(f64::ln, true)
    }

    fn sqrt(self) -> Self {
        if self.lo < 0.0 {
            return Self::ENTIRE;
        }
        self.monotone(f64::sqrt, true)
    }

    fn abs(self) -> Self {
        if self.lo >= 0.0 {
            self
        } else if self.hi <= 0.0 {
            self.neg()
        } else {
            Self { lo: 0.0, hi: (-self.lo).max(self.hi) }
        }
    }

    fn cosh(self) -> Self {
        let a = self.abs();
        a.monotone(f64::cosh, true)
    }

    fn coth(self) -> Self {
        if self.contains_zero() {
            return Self::ENTIRE;
        }
        self.monotone(|x| 1.0 / x.tanh(), false)
    }

    /// sin over an interval, via the extrema `π/2 + kπ` it contains.
    fn sin(self) -> Self {
        use std::f64::consts::{FRAC_PI_2, PI};
        if !(self.hi - self.lo).is_finite() || self.hi - self.lo >= 2.0 * PI {
            return Self { lo: -1.0, hi: 1.0 };
        }
        let (a, b) = (self.lo.sin(), self.hi.sin());
        let mut lo = a.min(b);
        let mut hi = a.max(b);
        let first = ((self.lo - FRAC_PI_2) / PI).ceil() as i64;
        let last = ((self.hi - FRAC_PI_2) / PI).floor() as i64;
        for k in first..=last {
            if k.rem_euclid(2) == 0 {
                hi = 1.0;
            } else {
                lo = -1.0;
            }
        }
        Self::widened(lo, hi).clamp_unit()
    }

    fn clamp_unit(self) -> Self {
        Self { lo: self.lo.max(-1.0), hi: self.hi.min(1.0) }
    }

    fn min(self, o: Self) -> Self {
        Self { lo: self.lo.min(o.lo), hi: self.hi.min(o.hi) }
    }

    fn max(self, o: Self) -> Self {
        Self { lo: self.lo.max(o.lo), hi: self.hi.max(o.hi) }
    }
}

enum Truth {
    True,
    False,
    Unknown,
}

fn cond_truth(c: &Cond, t: Interval) -> Truth {
    let (a, b) = (eval(&c.lhs, t), eval(&c.rhs, t));
    let (sure, never) = match c.op {
        CmpOp::Lt => (a.hi < b.lo, a.lo >= b.hi),
        CmpOp::Le => (a.hi <= b.lo, a.lo > b.hi),
        CmpOp::Gt => (a.lo > b.hi, a.hi <= b.lo),
        CmpOp::Ge => (a.lo >= b.hi, a.hi < b.lo),
    };
    if sure {
        Truth::True
    } else if never {
        Truth::False
    } else {
        Truth::Unknown
    }
}

fn eval(n: &Node, t: Interval) -> Interval {
    match n {
        Node::Num(v) => Interval::point(*v),
        Node::Var => t,
        Node::Param(_) => Interval::ENTIRE,
        Node::Neg(a) => eval(a, t).neg(),
        Node::Bin(op, a, b) => {
            let (x, y) = (eval(a, t), eval(b, t));
            match op {
                BinOp::Add => x.add(y),
                BinOp::Sub => x.add(y.neg()),
                BinOp::Mul => x.mul(y),
                BinOp::Div => x.mul(y.recip()),
                BinOp::Pow => x.pow(y),
            }
        }
        Node::Call(f, args) => {
            let x = eval(&args[0], t);
            match f {
                Func::Log => x.log(),
                Func::Exp => x.exp(),
                Func::Sqrt => x.sqrt(),
                Func::Sin => x.sin(),
                Func::Cos => x.add(Interval::point(std::f64::consts::FRAC_PI_2)).sin(),
                Func::Sinh => x.monotone(f64::sinh, true),
                Func::Cosh => x.cosh(),
                Func::Tanh => x.monotone(f64::tanh, true),
                Func::Coth => x.coth(),
                Func::Pow => x.pow(eval(&args[1], t)),
                Func::Abs => x.abs(),
                Func::Min => args[1..].iter().fold(x, |m, a| m.min(eval(a, t))),
                Func::Max => args[1..].iter().fold(x, |m, a| m.max(eval(a, t))),
            }
        }
        Node::Case(branches, default) => {
            let mut acc: Option<Interval> = None;
            for (c, e) in branches {
                match cond_truth(c, t) {
                    Truth::False => continue,
                    Truth::True => {
                        let v = eval(e, t);
                        return acc.map_or(v, |a| a.hull(v));
                    }
                    Truth::Unknown => {
                        let v = eval(e, t);
                        acc = Some(acc.map_or(v, |a| a.hull(v)));
                    }
                }
            }
            let v = eval(default, t);
            acc.map_or(v, |a| a.hull(v))
        }
    }
}

impl Expr {
    /// Enclosure of the expression over `t ∈ [lo, hi]`.
    pub fn eval_interval(&self, t: Interval) -> Interval {
        eval(self.root(), t)
    }
}

/// Subdivides `[lo, hi]` geometrically (plus one unbounded cell `[hi, ∞)` when
/// `unbounded`) and reports whether every cell's enclosure is `<= 0`.
pub fn certify_nonpositive(expr: &Expr, lo: f64, hi: f64, cells: usize, unbounded: bool) -> bool {
    let pts = crate::scalar::geomspace(lo.max(f64::MIN_POSITIVE), hi, cells.max(1) + 1);
    let mut ok = pts.windows(2).all(|w| refine_nonpositive(expr, w[0], w[1], 12));
    if ok && unbounded {
        ok = expr.eval_interval(Interval::new(hi, f64::INFINITY)).hi <= 0.0;
    }
    ok
}

fn refine_nonpositive(expr: &Expr, lo: f64, hi: f64, depth: u32) -> bool {
    if expr.eval_interval(Interval::new(lo, hi)).hi <= 0.0 {
        return true;
    }
    if depth == 0 {
        return false;
    }
    let mid = if lo > 0.0 { (lo * hi).sqrt() } else { 0.5 * (lo + hi) };
    refine_nonpositive(expr, lo, mid, depth - 1) && refine_nonpositive(expr, mid, hi, depth - 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_expression;
    use std::collections::BTreeMap;

    fn enclose(src: &str, lo: f64, hi: f64) -> Interval {
        parse_expression(src).unwrap().bind(&BTreeMap::new()).unwrap().eval_interval(Interval::new(lo, hi))
    }

    #[test]
    fn encloses_point_values() {
        let src = "1/(4*t^2) + 9/(4*t^2*log(t)^2) - sin(3*t)*exp(-t)";
        let e = parse_expression(src).unwrap();
        for k in 0..50 {
            let a = 2.0 + k as f64 * 0.37;
            let b = a + 0.2;
            let enc = e.eval_interval(Interval::new(a, b));
            for j in 0..=10 {
                let x = a + (b - a) * j as f64 / 10.0;
                let v: f64 = e.eval(x);
                assert!(enc.lo <= v && v <= enc.hi, "{x}: {v} not in {enc:?}");
            }
        }
    }

    #[test]
    fn unbounded_cells() {
        let i = enclose("1/t^2", 10.0, f64::INFINITY);
        assert!(i.lo <= 0.0 && i.hi >= 0.01 && i.hi < 0.0101);
    }

    #[test]
    fn sign_certificate() {
        let e = parse_expression("-1/(8*t^2) - exp(-t)").unwrap();
        assert!(certify_nonpositive(&e, 1.0, 1e6, 30, true));
        let f = parse_expression("sin(t)").unwrap();
        assert!(!certify_nonpositive(&f, 1.0, 10.0, 10, false));
    }

    #[test]
    fn case_hulls_uncertain_branches() {
        let i = enclose("case(t < 1, -1, t < 2, 49, -1)", 0.5, 1.5);
        assert_eq!((i.lo, i.hi), (-1.0, 49.0));
        let j = enclose("case(t < 1, -1, t < 2, 49, -1)", 2.5, 3.0);
        assert_eq!((j.lo, j.hi), (-1.0, -1.0));
    }
}
