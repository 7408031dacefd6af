//! Verdict-producing criteria: critical-curve tests in a weighted frame,
//! classical baselines, shifted and iterated refinements, and the
//! compactness certifier.

mod certificate;
mod classical;
mod refined;
mod weighted;

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::potential::PotentialSpec;
use crate::quad::{integrate_split, QuadConfig};
use crate::scalar::{lit, to_f64, Real};
use crate::transforms::TransformError;
use crate::weights::WeightError;

pub use certificate::{compactness_certificate, CertificateReport, CertifyStrategy, ShiftFamily};
pub use classical::{calabi_finite_form, calabi_rhs, hille_nehari, moore, mrv_first_zero, mrv_rhs, HilleNehariConfig};
pub use refined::{
    generalized_calabi, nested_log_threshold, refined_nonoscillation, LowerBoundFamily, RefinedConfig,
    GLOBAL_THRESHOLD,
};
pub use weighted::{
    check_first_zero, check_nonoscillation, check_oscillation, check_positivity, first_zero_margin, solve_position_bound,
    CheckConfig, SearchGrid, SearchMode,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Classification {
    Positive,
    Nonoscillatory,
    FirstZero,
    OscillationEvidence,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EvidenceGrade {
    /// Sign established by interval enclosure.
    Certified,
    /// A strict finite-form inequality evaluated by quadrature.
    FiniteFormCertified,
    /// Sampled or checkpointed evidence for an asymptotic condition.
    AsymptoticEvidence,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub classification: Classification,
    pub criterion: String,
    pub witnesses: BTreeMap<String, f64>,
    pub bound: Option<f64>,
    pub evidence_grade: Option<EvidenceGrade>,
    pub notes: Vec<String>,
}

impl Verdict {
    pub fn new(criterion: impl Into<String>, classification: Classification, grade: Option<EvidenceGrade>) -> Self {
        Self {
            classification,
            criterion: criterion.into(),
            witnesses: BTreeMap::new(),
            bound: None,
            evidence_grade: grade,
            notes: Vec::new(),
        }
    }

    pub fn inconclusive(criterion: impl Into<String>, why: impl Into<String>) -> Self {
        Self::new(criterion, Classification::Inconclusive, None).note(why)
    }

    pub fn witness(mut self, key: &str, value: f64) -> Self {
        self.witnesses.insert(key.to_string(), value);
        self
    }

    pub fn note(mut self, s: impl Into<String>) -> Self {
        self.notes.push(s.into());
        self
    }

    pub fn with_bound(mut self, b: f64) -> Self {
        self.bound = Some(b);
        self
    }

    pub fn fired(&self) -> bool {
        self.classification != Classification::Inconclusive
    }
}

/// Position bound for the first zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ZeroBound {
    pub r_bar: f64,
    /// `R̄ − r`, kept separately since it may be far below the spacing of floats near `r`.
    pub offset: f64,
    pub bracket: (f64, f64),
    pub residual: f64,
    /// The inequality held only by a hair; `r_bar` is then very large.
    pub marginal: bool,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CriteriaError {
    #[error("invalid range: need 0 < a < b, got a = {a}, b = {b}")]
    InvalidRange { a: f64, b: f64 },
    #[error("could not bracket the position bound: {0}")]
    BracketFailure(String),
    #[error("potential violates the lower bound of the family at t = {at:e} (value {value:e}, bound {bound:e})")]
    FamilyMismatch { at: f64, value: f64, bound: f64 },
    #[error("shifted potential is negative at t = {at:e} (value {value:e})")]
    NegativeShiftedPotential { at: f64, value: f64 },
    #[error(transparent)]
    Weight(#[from] WeightError),
    #[error(transparent)]
    Transform(#[from] TransformError),
}

/// Margin used for every strict inequality.
pub const STRICT_MARGIN: f64 = 1e-9;

/// Checkpoint schedule `t_k = t0·ratio^k` with the divergent-trend rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DivergenceProtocol {
    pub ratio: f64,
    pub max_k: usize,
    /// Number of trailing increments that must be positive.
    pub window: usize,
    /// Required rise above the first checkpoint value.
    pub threshold: f64,
}

impl Default for DivergenceProtocol {
    fn default() -> Self {
        Self { ratio: 2.0, max_k: 40, window: 5, threshold: 10.0 }
    }
}

impl DivergenceProtocol {
    /// Stretched schedule for gauges growing like `log log t`; the default
    /// threshold is out of reach for those within floating range.
    pub fn nested_log() -> Self {
        Self { ratio: 4096.0, max_k: 40, window: 5, threshold: 1.0 }
    }

    pub fn checkpoints(&self, t0: f64, horizon: f64) -> Vec<f64> {
        (0..=self.max_k).map(|k| t0 * self.ratio.powi(k as i32)).take_while(|&t| t <= horizon && t.is_finite()).collect()
    }

    pub fn assess(&self, points: Vec<(f64, f64)>) -> DivergenceEvidence {
        let n = points.len();
        let increasing_tail =
            n > self.window && points[n - self.window - 1..].windows(2).all(|w| w[1].1 > w[0].1);
        let rise = if n > 0 { points[n - 1].1 - points[0].1 } else { 0.0 };
        let diverges = increasing_tail && rise > self.threshold && points.iter().all(|p| p.1.is_finite());
        DivergenceEvidence { checkpoints: points, rise, increasing_tail, diverges }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DivergenceEvidence {
    pub checkpoints: Vec<(f64, f64)>,
    pub rise: f64,
    pub increasing_tail: bool,
    pub diverges: bool,
}

impl DivergenceEvidence {
    fn annotate(&self, v: Verdict) -> Verdict {
        let last = self.checkpoints.last().copied().unwrap_or((f64::NAN, f64::NAN));
        v.witness("rise", self.rise)
            .witness("checkpoint_count", self.checkpoints.len() as f64)
            .witness("last_checkpoint", last.0)
            .witness("last_value", last.1)
    }
}

/// Cumulative `∫_{x0}^{x_i} f` over sorted nodes.
pub(crate) fn cumulative<T: Real>(f: &dyn Fn(T) -> T, nodes: &[T], breaks: &[T], cfg: &QuadConfig<T>) -> Vec<T> {
    let mut out = Vec::with_capacity(nodes.len());
    let mut acc = T::zero();
    for (i, &x) in nodes.iter().enumerate() {
        if i > 0 {
            acc += integrate_split(&f, nodes[i - 1], x, breaks, cfg).value;
        }
        out.push(acc);
    }
    out
}

pub(crate) fn sqrt_pos<T: Real>(x: T) -> T {
    if x > T::zero() {
        x.sqrt()
    } else {
        T::zero()
    }
}

/// Smallest sampled value of `a` on `grid`, with its location.
pub(crate) fn sampled_min<T: Real>(a: &PotentialSpec<T>, grid: &[T]) -> (f64, f64) {
    grid.iter().map(|&t| (to_f64(t), to_f64(a.eval(t)))).fold((f64::NAN, f64::INFINITY), |m, p| if p.1 < m.1 { p } else { m })
}

pub(crate) fn log_grid<T: Real>(lo: T, hi: T, n: usize, breaks: &[T]) -> Vec<T> {
    let mut g = crate::scalar::geomspace(lo, hi, n);
    for &b in breaks {
        if b > lo && b < hi {
            for off in [-1e-7, 1e-7] {
                g.push(b * (T::one() + lit::<T>(off)));
            }
        }
    }
    g.sort_by(|a, b| a.partial_cmp(b).expect("finite grid"));
    g.dedup();
    g
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn protocol_detects_linear_growth_only() {
        let p = DivergenceProtocol::default();
        let cps = p.checkpoints(1.0, 1e12);
        assert_eq!(cps.len(), 40);
        let grow = p.assess(cps.iter().map(|&t| (t, t.ln())).collect());
        assert!(grow.diverges);
        let flat = p.assess(cps.iter().map(|&t| (t, 1.0 - 1.0 / t)).collect());
        assert!(flat.increasing_tail && !flat.diverges);
        let wiggle = p.assess(cps.iter().enumerate().map(|(k, &t)| (t, k as f64 * if k % 2 == 0 { 1.0 } else { 0.5 })).collect());
        assert!(!wiggle.diverges);
    }

    #[test]
    fn nested_schedule_stays_in_range() {
        let cps = DivergenceProtocol::nested_log().checkpoints(2.0, 1e300);
        assert_eq!(cps.len(), 41);
        assert!(cps.last().unwrap() < &1e150);
    }
}
