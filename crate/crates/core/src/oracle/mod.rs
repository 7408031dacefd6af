//! Numerical ground truth: adaptive integration of `g'' + K g = 0` and of
//! `(v z')' + A v z = 0` with zero localisation.

mod dopri;

use std::fmt::Write as _;
use std::io;

use serde::Serialize;
use thiserror::Error;

use crate::criteria::{Classification, Verdict};
use crate::potential::PotentialSpec;
use crate::scalar::{geomspace, lit, to_f64, Real};
use crate::weights::Weight;

use dopri::{step_factor, trial, Coefficients, Dense, State};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("horizon {horizon:e} does not exceed the start {start:e}")]
    InvalidHorizon { start: f64, horizon: f64 },
    #[error("potential is not finite at t = {at:e}")]
    PotentialNotFinite { at: f64 },
    #[error("weight is not positive at r = {at:e}")]
    WeightVanishes { at: f64 },
    #[error("no positive constant fits the envelope ({reason})")]
    EnvelopeViolated { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Sampling<T> {
    /// Every accepted step, thinned to at most `max` samples.
    Steps { max: usize },
    /// Dense output at the given abscissae.
    At(Vec<T>),
}

impl<T: Real> Sampling<T> {
    pub fn log_grid(lo: T, hi: T, n: usize) -> Self {
        Sampling::At(geomspace(lo, hi, n))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OdeConfig<T> {
    pub rtol: T,
    /// Absolute floor, relative to the running peak of each component.
    pub atol: T,
    pub max_step: T,
    pub min_step_rel: T,
    pub rescale_above: T,
    pub max_steps: usize,
    pub sampling: Sampling<T>,
    /// Start offset for weighted problems posed at a vanishing origin.
    pub origin_offset: T,
    pub zero_probes: usize,
}

impl<T: Real> Default for OdeConfig<T> {
    fn default() -> Self {
        let floor = T::epsilon() * lit(100.0);
        Self {
            rtol: lit::<T>(1e-10).max(floor),
            atol: lit::<T>(1e-12).max(floor),
            max_step: T::infinity(),
            min_step_rel: lit::<T>(1e-14).max(T::epsilon()),
            rescale_above: lit::<T>(1e150).min(T::max_value().sqrt().sqrt()),
            max_steps: 20_000_000,
            sampling: Sampling::Steps { max: 4096 },
            origin_offset: lit(1e-6),
            zero_probes: 3,
        }
    }
}

impl<T: Real> OdeConfig<T> {
    pub fn with_sampling(mut self, s: Sampling<T>) -> Self {
        self.sampling = s;
        self
    }

    pub fn with_rtol(mut self, rtol: T) -> Self {
        self.rtol = rtol;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Termination {
    HorizonReached,
    Overflow,
    StepUnderflow,
    StepLimit,
}

/// One trajectory point; the true solution value is `g · exp(logscale)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Sample<T> {
    pub t: T,
    pub g: T,
    pub gprime: T,
    pub logscale: T,
}

impl<T: Real> Sample<T> {
    pub fn value(&self) -> T {
        self.g * self.logscale.exp()
    }

    pub fn derivative(&self) -> T {
        self.gprime * self.logscale.exp()
    }

    /// `ln |g|` including the accumulated scale.
    pub fn ln_abs(&self) -> T {
        self.g.abs().ln() + self.logscale
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZeroReport<T> {
    pub zeros: Vec<T>,
    pub count: usize,
    pub start: T,
    pub horizon: T,
    /// Last abscissa reached (equals `horizon` unless terminated early).
    pub reached: T,
    pub trajectory: Vec<Sample<T>>,
    pub max_error_estimate: T,
    pub terminated: Termination,
    pub steps: usize,
    pub rejected: usize,
    /// Minimum of `g` over accepted steps after the start.
    pub min_value: T,
}

impl<T: Real> ZeroReport<T> {
    pub fn first_zero(&self) -> Option<T> {
        self.zeros.first().copied()
    }

    pub fn zeros_in(&self, lo: T, hi: T) -> usize {
        self.zeros.iter().filter(|&&z| z >= lo && z <= hi).count()
    }

    /// `t, g, gprime, logscale` with a header row and LF endings.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,g,gprime,logscale\n");
        for p in &self.trajectory {
            let _ = writeln!(s, "{:?},{:?},{:?},{:?}", to_f64(p.t), to_f64(p.g), to_f64(p.gprime), to_f64(p.logscale));
        }
        s
    }

    pub fn write_csv<W: io::Write>(&self, mut w: W) -> io::Result<()> {
        w.write_all(self.to_csv().as_bytes())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitialData<T> {
    pub t0: T,
    pub g: T,
    pub dg: T,
}

impl<T: Real> InitialData<T> {
    /// `g(t0) = 0`, `g'(t0) = 1`.
    pub fn standard(t0: T) -> Self {
        Self { t0, g: T::zero(), dg: T::one() }
    }
}

struct Run<'a, T> {
    cfg: &'a OdeConfig<T>,
    report: ZeroReport<T>,
    stride: usize,
    since_push: usize,
    next_at: usize,
}

impl<'a, T: Real> Run<'a, T> {
    fn push(&mut self, s: Sample<T>) {
        self.report.trajectory.push(s);
        if let Sampling::Steps { max } = self.cfg.sampling {
            if self.report.trajectory.len() >= 2 * max.max(2) {
                let kept: Vec<_> = self.report.trajectory.iter().copied().step_by(2).collect();
                self.report.trajectory = kept;
                self.stride *= 2;
            }
        }
    }

    fn record_step(&mut self, d: &Dense<T>, t_end: T, y_end: &State<T>, logscale: T, deriv: &dyn Fn(T, &State<T>) -> T) {
        match &self.cfg.sampling {
            Sampling::Steps { .. } => {
                self.since_push += 1;
                if self.since_push >= self.stride {
                    self.since_push = 0;
                    self.push(Sample { t: t_end, g: y_end[0], gprime: deriv(t_end, y_end), logscale });
                }
            }
            Sampling::At(points) => {
                let mut out = Vec::new();
                while self.next_at < points.len() && points[self.next_at] <= t_end {
                    let p = points[self.next_at];
                    if p >= d.t0 {
                        let y = if p == t_end { *y_end } else { d.eval(p) };
                        out.push(Sample { t: p, g: y[0], gprime: deriv(p, &y), logscale });
                    }
                    self.next_at += 1;
                }
                self.report.trajectory.extend(out);
            }
        }
    }
}

/// Integrates the planar system segment by segment, restarting at `breaks`.
fn drive<T: Real, C: Coefficients<T>>(
    sys: &C,
    t0: T,
    y0: State<T>,
    horizon: T,
    breaks: &[T],
    cfg: &OdeConfig<T>,
    deriv: &dyn Fn(T, &State<T>) -> T,
) -> ZeroReport<T> {
    let mut cuts: Vec<T> = vec![t0];
    cuts.extend(breaks.iter().copied().filter(|&b| b > t0 && b < horizon));
    cuts.push(horizon);
    cuts.sort_by(|a, b| a.partial_cmp(b).expect("finite cuts"));
    cuts.dedup();

    let mut run = Run {
        cfg,
        report: ZeroReport {
            zeros: Vec::new(),
            count: 0,
            start: t0,
            horizon,
            reached: t0,
            trajectory: Vec::new(),
            max_error_estimate: T::zero(),
            terminated: Termination::HorizonReached,
            steps: 0,
            rejected: 0,
            min_value: T::infinity(),
        },
        stride: 1,
        since_push: 0,
        next_at: 0,
    };
    let mut y = y0;
    let mut logscale = T::zero();
    let mut peak = [y[0].abs(), y[1].abs()];
    if let Sampling::At(points) = &cfg.sampling {
        while run.next_at < points.len() && points[run.next_at] < t0 {
            run.next_at += 1;
        }
    }
    match &cfg.sampling {
        Sampling::Steps { .. } => run.push(Sample { t: t0, g: y[0], gprime: deriv(t0, &y), logscale }),
        Sampling::At(points) => {
            if run.next_at < points.len() && points[run.next_at] == t0 {
                run.report.trajectory.push(Sample { t: t0, g: y[0], gprime: deriv(t0, &y), logscale });
                run.next_at += 1;
            }
        }
    }
    if y0[0] != T::zero() {
        run.report.min_value = y0[0];
    }

    let eps4 = T::epsilon() * lit(4.0);
    let mut t = t0;
    let mut h = (lit::<T>(1e-3) * t0.abs()).max(lit(1e-6)).min(cfg.max_step);
    let xtol = T::epsilon() * lit(4.0);
    let mut total = 0usize;

    'segments: for seg in cuts.windows(2) {
        let (lo, hi) = (seg[0], seg[1]);
        let lo_in = lo + eps4 * lo.abs().max(T::one());
        let hi_in = hi - eps4 * hi.abs().max(T::one());
        let eval_t = move |s: T| s.max(lo_in).min(hi_in);
        let c = sys.at(eval_t(t));
        if !(c.0.is_finite() && c.1.is_finite()) {
            run.report.terminated = Termination::Overflow;
            break;
        }
        let mut k1: State<T> = [c.0 * y[1], -c.1 * y[0]];
        let mut last_rejected = false;
        while t < hi {
            if total >= cfg.max_steps {
                run.report.terminated = Termination::StepLimit;
                break 'segments;
            }
            total += 1;
            h = h.min(cfg.max_step);
            let mut hit_end = false;
            if t + h * lit(1.01) >= hi {
                h = hi - t;
                hit_end = true;
            }
            let atol = [cfg.atol * peak[0], cfg.atol * peak[1]];
            let Some(out) = trial(sys, &eval_t, t, &y, &k1, h, &atol, cfg.rtol) else {
                run.report.terminated = Termination::Overflow;
                break 'segments;
            };
            if out.err.is_finite() && out.err <= T::one() {
                let t_new = if hit_end { hi } else { t + h };
                let mut zs = out.dense.zeros(cfg.zero_probes, xtol);
                zs.retain(|&z| z > t0 && z <= t_new);
                for z in zs {
                    if run.report.zeros.last().is_none_or(|&p| z > p) {
                        run.report.zeros.push(z);
                    }
                }
                run.record_step(&out.dense, t_new, &out.y, logscale, deriv);
                run.report.steps += 1;
                run.report.max_error_estimate = run.report.max_error_estimate.max(out.err * cfg.rtol);
                t = t_new;
                y = out.y;
                k1 = out.k_last;
                let gv = y[0] * logscale.exp();
                if gv < run.report.min_value {
                    run.report.min_value = gv;
                }
                peak = [peak[0].max(y[0].abs()), peak[1].max(y[1].abs())];
                let m = y[0].abs().max(y[1].abs());
                if m > cfg.rescale_above || (m > T::zero() && m < cfg.rescale_above.recip()) {
                    let f = m.recip();
                    y = [y[0] * f, y[1] * f];
                    k1 = [k1[0] * f, k1[1] * f];
                    peak = [peak[0] * f, peak[1] * f];
                    logscale += m.ln();
                }
                let mut fac = step_factor(out.err);
                if last_rejected {
                    fac = fac.min(T::one());
                }
                last_rejected = false;
                if !hit_end {
                    h *= fac;
                } else {
                    h = (h * fac).max(h);
                }
            } else {
                run.report.rejected += 1;
                last_rejected = true;
                let fac = if out.err.is_finite() { step_factor(out.err).min(lit(0.9)) } else { lit(0.2) };
                h *= fac;
                if h < cfg.min_step_rel * t.abs().max(lit(1e-300)) {
                    run.report.terminated = Termination::StepUnderflow;
                    break 'segments;
                }
            }
        }
    }
    run.report.reached = t;
    run.report.count = run.report.zeros.len();
    if let Sampling::Steps { .. } = cfg.sampling {
        if run.report.trajectory.last().is_none_or(|s| s.t < t) {
            run.report.trajectory.push(Sample { t, g: y[0], gprime: deriv(t, &y), logscale });
        }
    }
    run.report
}

fn check_horizon<T: Real>(start: T, horizon: T) -> Result<(), OracleError> {
    if !(horizon > start) || !horizon.is_finite() {
        return Err(OracleError::InvalidHorizon { start: to_f64(start), horizon: to_f64(horizon) });
    }
    Ok(())
}

fn sample_potential<T: Real>(k: &PotentialSpec<T>, lo: T, hi: T) -> Result<(), OracleError> {
    let base = lo.max(lit(1e-9));
    for t in geomspace(base, hi.max(base * lit(2.0)), 256) {
        if t > lo && !k.eval(t).is_finite() {
            return Err(OracleError::PotentialNotFinite { at: to_f64(t) });
        }
    }
    Ok(())
}

/// `g'' + K g = 0` from `g(t0) = 0`, `g'(t0) = 1` at the potential's domain start.
pub fn integrate_cp<T: Real>(k: &PotentialSpec<T>, horizon: T) -> Result<ZeroReport<T>, OracleError> {
    integrate_cp_with(k, InitialData::standard(k.domain_start), horizon, &OdeConfig::default())
}

pub fn integrate_cp_with<T: Real>(
    k: &PotentialSpec<T>,
    init: InitialData<T>,
    horizon: T,
    cfg: &OdeConfig<T>,
) -> Result<ZeroReport<T>, OracleError> {
    check_horizon(init.t0, horizon)?;
    sample_potential(k, init.t0, horizon)?;
    let sys = |t: T| (T::one(), k.eval(t));
    let deriv = |_t: T, y: &State<T>| y[1];
    Ok(drive(&sys, init.t0, [init.g, init.dg], horizon, k.breakpoints(), cfg, &deriv))
}

fn vanishes_at_origin<T: Real>(v: &Weight<T>) -> bool {
    let (a, b) = (v.ln_value(lit(1e-10)), v.ln_value(lit(1e-8)));
    !a.is_finite() || a < b - lit(1.0)
}

/// `z' = p/v`, `p' = −A v z` from `(r0, z0, p0)`.
///
/// With `r0 = 0` and `v(0+) = 0` the run starts at `cfg.origin_offset`
/// with `p = 0`, so that `(v z')(0) = 0`.
pub fn integrate_weighted<T: Real>(
    v: &Weight<T>,
    a: &PotentialSpec<T>,
    r0: T,
    z0: T,
    p0: T,
    horizon: T,
    cfg: &OdeConfig<T>,
) -> Result<ZeroReport<T>, OracleError> {
    let (start, p_start) = if r0 <= T::zero() && vanishes_at_origin(v) { (cfg.origin_offset, T::zero()) } else { (r0, p0) };
    check_horizon(start, horizon)?;
    let lo = start.max(v.domain_start);
    for r in geomspace(lo.max(lit(1e-9)), horizon, 256) {
        if r > v.domain_start && !v.ln_value(r).is_finite() {
            return Err(OracleError::WeightVanishes { at: to_f64(r) });
        }
    }
    sample_potential(a, start, horizon)?;
    let sys = |r: T| {
        let l = v.ln_value(r);
        ((-l).exp(), a.eval(r) * l.exp())
    };
    let deriv = |r: T, y: &State<T>| y[1] * (-v.ln_value(r)).exp();
    let mut breaks: Vec<T> = a.breakpoints().to_vec();
    breaks.extend_from_slice(v.breakpoints());
    Ok(drive(&sys, start, [z0, p_start], horizon, &breaks, cfg, &deriv))
}

/// Largest shift of any zero when the origin offset is divided by ten.
pub fn origin_sensitivity<T: Real>(
    v: &Weight<T>,
    a: &PotentialSpec<T>,
    z0: T,
    horizon: T,
    cfg: &OdeConfig<T>,
) -> Result<T, OracleError> {
    let coarse = integrate_weighted(v, a, T::zero(), z0, T::zero(), horizon, cfg)?;
    let fine_cfg = OdeConfig { origin_offset: cfg.origin_offset / lit(10.0), ..cfg.clone() };
    let fine = integrate_weighted(v, a, T::zero(), z0, T::zero(), horizon, &fine_cfg)?;
    if coarse.count != fine.count {
        return Ok(T::infinity());
    }
    Ok(coarse.zeros.iter().zip(&fine.zeros).map(|(a, b)| (*a - *b).abs()).fold(T::zero(), T::max))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Agreement {
    Agree,
    AgreeWithAnnotation,
    /// The oracle run cannot settle the claim (horizon too short).
    Unresolved,
    NotApplicable,
    Contradiction,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgreementRecord {
    pub criterion: String,
    pub classification: Classification,
    pub agreement: Agreement,
    pub detail: String,
}

/// Witness key carrying the spacing of consecutive zeros in `ln ln t`.
pub const LOG_LOG_SPACING: &str = "log_log_spacing";

/// Checks a verdict against an oracle run of the same problem.
pub fn cross_validate<T: Real>(verdict: &Verdict, report: &ZeroReport<T>) -> AgreementRecord {
    let zeros: Vec<f64> = report.zeros.iter().map(|&z| to_f64(z)).collect();
    let horizon = to_f64(report.horizon);
    let reached = to_f64(report.reached);
    let complete = report.terminated == Termination::HorizonReached;
    let (agreement, detail) = match verdict.classification {
        Classification::Inconclusive => (Agreement::NotApplicable, "no claim".to_string()),
        Classification::FirstZero => {
            let bound = verdict.bound.unwrap_or(f64::INFINITY);
            match zeros.first() {
                Some(&z) if z <= bound * (1.0 + 1e-9) + 1e-9 => {
                    (Agreement::Agree, format!("first zero {z} <= bound {bound}"))
                }
                Some(&z) => (Agreement::Contradiction, format!("first zero {z} beyond bound {bound}")),
                None if complete && reached >= bound => {
                    (Agreement::Contradiction, format!("no zero up to {reached} but bound is {bound}"))
                }
                None => (Agreement::Unresolved, format!("no zero up to {reached}; bound {bound} not reached")),
            }
        }
        Classification::Nonoscillatory => {
            let late = zeros.iter().filter(|&&z| z >= horizon / 10.0).count();
            if !complete {
                (Agreement::Unresolved, format!("run stopped at {reached} ({:?})", report.terminated))
            } else if late == 0 {
                (Agreement::Agree, format!("{} zeros, none in the last decade", zeros.len()))
            } else {
                (Agreement::Contradiction, format!("{late} zeros in [{}, {horizon}]", horizon / 10.0))
            }
        }
        Classification::Positive => {
            if zeros.is_empty() && report.min_value > T::zero() {
                (Agreement::Agree, "zero-free with positive minimum".to_string())
            } else if zeros.is_empty() && !complete {
                (Agreement::Unresolved, format!("run stopped at {reached}"))
            } else {
                (Agreement::Contradiction, format!("{} zeros, min value {:?}", zeros.len(), to_f64(report.min_value)))
            }
        }
        Classification::OscillationEvidence => match zeros.len() {
            n if n >= 2 => (Agreement::Agree, format!("{n} zeros")),
            1 => match verdict.witnesses.get(LOG_LOG_SPACING) {
                Some(&gap) if gap.is_finite() && gap > 0.0 => {
                    let z = zeros[0];
                    let next_ln = if z > std::f64::consts::E { z.ln().ln() + gap } else { gap };
                    let beyond = next_ln.exp().exp() > horizon;
                    if beyond {
                        (
                            Agreement::AgreeWithAnnotation,
                            format!("one zero at {z}; next zero predicted near exp(exp({next_ln:.3})), beyond horizon {horizon}"),
                        )
                    } else {
                        (Agreement::Contradiction, format!("one zero at {z}; next predicted within horizon"))
                    }
                }
                _ => (Agreement::Contradiction, format!("only one zero at {} by {horizon}", zeros[0])),
            },
            _ if !complete => (Agreement::Unresolved, format!("run stopped at {reached}")),
            _ => (Agreement::Contradiction, format!("zero-free up to {horizon}")),
        },
    };
    AgreementRecord { criterion: verdict.criterion.clone(), classification: verdict.classification, agreement, detail }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnvelopeFit<T> {
    /// Largest `C` with `g ≥ C·envelope` on the fit window.
    pub c_fit: T,
    /// Least-squares `C` on the same window.
    pub c_least_squares: T,
    /// RMS of `g/(C_ls·envelope) − 1`.
    pub residual: T,
    pub points: usize,
}

/// Fits `g(t) ≥ C·envelope(t)` over the last two decades of the trajectory.
pub fn growth_envelope_fit<T: Real>(report: &ZeroReport<T>, envelope: impl Fn(T) -> T) -> Result<EnvelopeFit<T>, OracleError> {
    if report.count > 0 {
        return Err(OracleError::EnvelopeViolated { reason: format!("trajectory has {} zeros", report.count) });
    }
    let lo = report.reached / lit(100.0);
    let mut ratios = Vec::new();
    for s in report.trajectory.iter().filter(|s| s.t >= lo && s.t > report.start) {
        let e = envelope(s.t);
        if !(e > T::zero()) || !e.is_finite() {
            continue;
        }
        if !(s.g > T::zero()) {
            return Err(OracleError::EnvelopeViolated { reason: format!("g <= 0 at t = {:e}", to_f64(s.t)) });
        }
        ratios.push((s.ln_abs() - e.ln()).exp());
    }
    if ratios.is_empty() {
        return Err(OracleError::EnvelopeViolated { reason: "no samples in the fit window".into() });
    }
    let c_fit = ratios.iter().copied().fold(T::infinity(), T::min);
    if !(c_fit > T::zero()) || !c_fit.is_finite() {
        return Err(OracleError::EnvelopeViolated { reason: format!("min ratio {:e}", to_f64(c_fit)) });
    }
    // least squares on the ratio g/envelope
    let n = lit::<T>(ratios.len() as f64);
    let c_ls = ratios.iter().copied().sum::<T>() / n;
    let residual = (ratios.iter().map(|&r| (r / c_ls - T::one()).powi(2)).sum::<T>() / n).sqrt();
    Ok(EnvelopeFit { c_fit, c_least_squares: c_ls, residual, points: ratios.len() })
}

#[cfg(test)]
mod tests;
