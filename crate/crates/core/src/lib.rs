//! Qualitative analysis of `g'' + K g = 0` and `(v z')' + A v z = 0`:
//! positivity, first zeros with position bounds, oscillation, and a
//! compactness certifier, checked against an adaptive ODE oracle.
//!
//! Numerical types are generic over [`scalar::Real`]; the aliases below fix
//! the scalar to `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::too_many_arguments)]

pub mod app;
pub mod criteria;
pub mod expr;
pub mod interval;
pub mod oracle;
pub mod potential;
pub mod quad;
pub mod roots;
pub mod scalar;
pub mod specialfn;
pub mod transforms;
pub mod weights;

pub use criteria::{
    calabi_finite_form, check_first_zero, check_nonoscillation, check_oscillation, check_positivity,
    compactness_certificate, generalized_calabi, hille_nehari, moore, mrv_first_zero, refined_nonoscillation,
    solve_position_bound, Classification, EvidenceGrade, Verdict, ZeroBound,
};
pub use oracle::{cross_validate, growth_envelope_fit, integrate_cp, integrate_weighted, Agreement, AgreementRecord};
pub use potential::PotentialSpec;
pub use transforms::{refine_ladder, to_weighted, weight_shift};
pub use weights::{critical_curve, Weight};

pub type Potential = potential::PotentialSpec<f64>;
pub type Weight64 = weights::Weight<f64>;
pub type CriticalCurve64 = weights::CriticalCurve<f64>;
pub type ShiftWeight64 = transforms::ShiftWeight<f64>;
pub type TransformedProblem64 = transforms::TransformedProblem<f64>;
pub type ZeroReport64 = oracle::ZeroReport<f64>;
pub type OdeConfig64 = oracle::OdeConfig<f64>;
pub type EnvelopeFit64 = oracle::EnvelopeFit<f64>;
