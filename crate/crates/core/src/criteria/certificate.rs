//! Compactness certificate from a first zero of the radial comparison problem.

use serde::Serialize;

use super::weighted::{check_first_zero, SearchGrid, SearchMode};
use super::{Classification, CriteriaError, Verdict};
use crate::potential::PotentialSpec;
use crate::scalar::{lit, Real};
use crate::specialfn::{euler_solution, shift_solution_negative_part};
use crate::transforms::{weight_shift, ShiftWeight, TransformError};
use crate::weights::Weight;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum ShiftFamily {
    /// Absorbs `K ≥ −B²(1+t²)^{α/2}`.
    NegativePart { alpha: f64, b: f64 },
    /// Absorbs `K ≥ B²/(1+t)²`, `0 ≤ B ≤ ½`.
    Euler { b: f64 },
}

impl ShiftFamily {
    fn weight<T: Real>(&self) -> ShiftWeight<T> {
        match *self {
            Self::NegativePart { alpha, b } => shift_solution_negative_part(lit(alpha), lit(b)),
            Self::Euler { b } => euler_solution(lit(b)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CertifyStrategy {
    pub family: ShiftFamily,
    pub grid: SearchGrid,
}

impl CertifyStrategy {
    pub fn new(family: ShiftFamily) -> Self {
        Self { family, grid: SearchGrid::default() }
    }

    pub fn minimizing(mut self) -> Self {
        self.grid.mode = SearchMode::MinimizeBound;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificateReport {
    pub compact: bool,
    /// `"compact with finite fundamental group"` or `"inconclusive"`.
    pub conclusion: String,
    pub dimension: usize,
    pub family: ShiftFamily,
    pub shift: String,
    pub shifted_potential: String,
    /// `(S, t)` pair satisfying the finite-form inequality.
    pub witness: Option<(f64, f64)>,
    pub r_bar: Option<f64>,
    pub diameter_bound: Option<f64>,
    pub verdict: Verdict,
    pub notes: Vec<String>,
}

pub fn compactness_certificate<T: Real>(
    k_gamma: &PotentialSpec<T>,
    m: usize,
    strategy: &CertifyStrategy,
) -> Result<CertificateReport, CriteriaError> {
    if m < 2 {
        return Err(CriteriaError::InvalidRange { a: 2.0, b: m as f64 });
    }
    let w = strategy.family.weight::<T>();
    let prob = weight_shift(&Weight::unit(), k_gamma, &w.shift, &w).map_err(|e| match e {
        TransformError::NegativeShiftedPotential { at, value } => CriteriaError::NegativeShiftedPotential { at, value },
        other => CriteriaError::Transform(other),
    })?;
    let verdict = check_first_zero(&prob.potential, &prob.weight, &prob.weight, &strategy.grid);
    let mut notes = vec![
        "diameter bound is 2 R_bar: every point lies within R_bar of the origin".to_string(),
    ];
    notes.extend(prob.provenance.iter().cloned());
    let fired = verdict.classification == Classification::FirstZero;
    let (witness, r_bar) = if fired {
        (Some((verdict.witnesses["R"], verdict.witnesses["r"])), verdict.bound)
    } else {
        (None, None)
    };
    Ok(CertificateReport {
        compact: fired,
        conclusion: if fired { "compact with finite fundamental group".into() } else { "inconclusive".into() },
        dimension: m,
        family: strategy.family,
        shift: w.label.clone(),
        shifted_potential: prob.potential.label.clone(),
        witness,
        r_bar,
        diameter_bound: r_bar.map(|r| 2.0 * r),
        verdict,
        notes,
    })
}
