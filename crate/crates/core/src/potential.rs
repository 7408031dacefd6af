//! Scalar potentials `K(t)`, `A(r)`, `W(t)`.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::expr::{parse_expression, BinOp, Expr, ExprError};
use crate::interval::{certify_nonpositive, Interval};
use crate::scalar::{lit, to_f64, Real};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PotentialError {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error("potential `{label}` is not finite at t = {at:e}")]
    NonFinite { label: String, at: f64 },
    #[error("potential `{label}` declared nonnegative but equals {value:e} at t = {at:e}")]
    Negative { label: String, at: f64, value: f64 },
    #[error("potential `{label}` falls below its declared lower bound at t = {at:e}")]
    BelowBound { label: String, at: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum SignHint {
    Nonnegative,
    SignChanging,
    BoundedBelowBy(Expr),
}

type ScalarFn<T> = Arc<dyn Fn(T) -> T + Send + Sync>;

#[derive(Clone)]
enum Body<T> {
    Expr(Expr),
    Func(ScalarFn<T>),
}

#[derive(Clone)]
pub struct PotentialSpec<T> {
    body: Body<T>,
    params: BTreeMap<String, f64>,
    pub domain_start: T,
    pub sign_hint: Option<SignHint>,
    pub label: String,
    breakpoints: Vec<T>,
}

impl<T: fmt::Debug> fmt::Debug for PotentialSpec<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PotentialSpec")
            .field("label", &self.label)
            .field("params", &self.params)
            .field("domain_start", &self.domain_start)
            .field("sign_hint", &self.sign_hint)
            .finish()
    }
}

impl<T: Real> PotentialSpec<T> {
    /// Parses `src` and binds `params`; unbound names are an error.
    pub fn parse(src: &str, params: &BTreeMap<String, f64>) -> Result<Self, PotentialError> {
        let expr = parse_expression(src)?.bind(params)?;
        Ok(Self::from_expr(expr, params.clone()))
    }

    pub fn from_expr(expr: Expr, params: BTreeMap<String, f64>) -> Self {
        let breakpoints = expr.breakpoints().into_iter().map(lit).collect();
        Self {
            label: expr.source().to_string(),
            body: Body::Expr(expr),
            params,
            domain_start: T::zero(),
            sign_hint: None,
            breakpoints,
        }
    }

    pub fn from_fn(label: impl Into<String>, f: impl Fn(T) -> T + Send + Sync + 'static) -> Self {
        Self {
            body: Body::Func(Arc::new(f)),
            params: BTreeMap::new(),
            domain_start: T::zero(),
            sign_hint: None,
            label: label.into(),
            breakpoints: Vec::new(),
        }
    }

    pub fn zero() -> Self {
        Self::from_expr(Expr::constant(0.0), BTreeMap::new()).with_sign_hint(SignHint::Nonnegative)
    }

    pub fn constant(c: f64) -> Self {
        let s = Self::from_expr(Expr::constant(c), BTreeMap::new());
        if c >= 0.0 {
            s.with_sign_hint(SignHint::Nonnegative)
        } else {
            s
        }
    }

    pub fn with_domain_start(mut self, t0: T) -> Self {
        self.domain_start = t0;
        self
    }

    pub fn with_sign_hint(mut self, hint: SignHint) -> Self {
        self.sign_hint = Some(hint);
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn with_breakpoints(mut self, mut pts: Vec<T>) -> Self {
        self.breakpoints.append(&mut pts);
        self.breakpoints.sort_by(|a, b| a.partial_cmp(b).expect("finite breakpoints"));
        self.breakpoints.dedup();
        self
    }

    #[inline]
    pub fn eval(&self, t: T) -> T {
        match &self.body {
            Body::Expr(e) => e.eval(t),
            Body::Func(f) => f(t),
        }
    }

    pub fn expr(&self) -> Option<&Expr> {
        match &self.body {
            Body::Expr(e) => Some(e),
            Body::Func(_) => None,
        }
    }

    pub fn params(&self) -> &BTreeMap<String, f64> {
        &self.params
    }

    pub fn breakpoints(&self) -> &[T] {
        &self.breakpoints
    }

    /// True when the potential is the literal constant 0.
    pub fn is_identically_zero(&self) -> bool {
        matches!(self.expr(), Some(e) if e.is_constant() && e.eval(1.0_f64) == 0.0)
    }

    /// Pointwise `self + other`. Expression structure is kept when both sides have one.
    pub fn plus(&self, other: &Self) -> Self {
        self.combine(other, BinOp::Add)
    }

    pub fn minus(&self, other: &Self) -> Self {
        self.combine(other, BinOp::Sub)
    }

    fn combine(&self, other: &Self, op: BinOp) -> Self {
        let mut params = self.params.clone();
        params.extend(other.params.clone());
        let domain_start = self.domain_start.max(other.domain_start);
        let sym = if op == BinOp::Add { "+" } else { "-" };
        let label = format!("({}) {sym} ({})", self.label, other.label);
        let mut out = match (&self.body, &other.body) {
            (Body::Expr(a), Body::Expr(b)) => Self::from_expr(a.combine(op, b), params),
            _ => {
                let (a, b) = (self.clone(), other.clone());
                let mut s = if op == BinOp::Add {
                    Self::from_fn(label.clone(), move |t| a.eval(t) + b.eval(t))
                } else {
                    Self::from_fn(label.clone(), move |t| a.eval(t) - b.eval(t))
                };
                s.params = params;
                s
            }
        };
        out.label = label;
        out.domain_start = domain_start;
        out.with_breakpoints([self.breakpoints.clone(), other.breakpoints.clone()].concat())
    }

    /// Samples the potential on `grid`; rejects NaN/inf and sign-hint violations.
    pub fn validate(&self, grid: &[T]) -> Result<(), PotentialError> {
        let bound = match &self.sign_hint {
            Some(SignHint::BoundedBelowBy(e)) => Some(e),
            _ => None,
        };
        for &t in grid.iter().filter(|&&t| t > self.domain_start) {
            let v = self.eval(t);
            if !v.is_finite() {
                return Err(PotentialError::NonFinite { label: self.label.clone(), at: to_f64(t) });
            }
            if matches!(self.sign_hint, Some(SignHint::Nonnegative)) && v < lit(-1e-12) {
                return Err(PotentialError::Negative { label: self.label.clone(), at: to_f64(t), value: to_f64(v) });
            }
            if let Some(b) = bound {
                if v < b.eval(t) - lit::<T>(1e-12) {
                    return Err(PotentialError::BelowBound { label: self.label.clone(), at: to_f64(t) });
                }
            }
        }
        Ok(())
    }

    /// Interval proof that the potential is `<= 0` on `[lo, ∞)`; false when
    /// the potential is a closure or the enclosure is too wide.
    pub fn certify_nonpositive_from(&self, lo: f64, horizon: f64) -> bool {
        match self.expr() {
            Some(e) => certify_nonpositive(e, lo, horizon.max(lo * 2.0), 64, true),
            None => false,
        }
    }

    /// Enclosure over `[lo, hi]` (expression potentials only).
    pub fn enclose(&self, lo: f64, hi: f64) -> Option<Interval> {
        self.expr().map(|e| e.eval_interval(Interval::new(lo, hi)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_combine() {
        let mut p = BTreeMap::new();
        p.insert("B".to_string(), 1.0);
        let k: PotentialSpec<f64> = PotentialSpec::parse("-1 + 50*case(t < 1, 0, t < 2, 1, 0)", &p).unwrap();
        let w: PotentialSpec<f64> = PotentialSpec::parse("B^2", &p).unwrap();
        let a = k.plus(&w);
        assert_eq!(a.eval(1.5), 50.0);
        assert_eq!(a.eval(3.0), 0.0);
        assert_eq!(a.breakpoints(), &[1.0, 2.0]);
        assert!(a.expr().is_some());
        let closure = PotentialSpec::from_fn("double", |t: f64| 2.0 * t);
        assert_eq!(closure.minus(&w).eval(2.0), 3.0);
    }

    #[test]
    fn validation_catches_domain_errors() {
        let k: PotentialSpec<f64> = PotentialSpec::parse("1/(t-1)", &BTreeMap::new()).unwrap();
        assert!(matches!(k.validate(&[0.5, 1.0, 2.0]), Err(PotentialError::NonFinite { .. })));
        let n = PotentialSpec::<f64>::parse("t - 3", &BTreeMap::new()).unwrap().with_sign_hint(SignHint::Nonnegative);
        assert!(matches!(n.validate(&[1.0, 4.0]), Err(PotentialError::Negative { .. })));
        assert!(n.clone().with_domain_start(3.0).validate(&[1.0, 4.0]).is_ok());
    }

    #[test]
    fn unbound_parameter() {
        let e = PotentialSpec::<f64>::parse("c^2/t", &BTreeMap::new()).unwrap_err();
        assert_eq!(e, PotentialError::Expr(ExprError::UnboundParameter("c".into())));
    }

    #[test]
    fn zero_is_recognised() {
        assert!(PotentialSpec::<f64>::zero().is_identically_zero());
        assert!(PotentialSpec::<f64>::zero().certify_nonpositive_from(1.0, 1e8));
        assert!(!PotentialSpec::<f64>::constant(1.0).is_identically_zero());
    }
}
