//! Decay-rate fits and envelope adjudication.

use crate::certificates::{
    envelope_formula, solution_envelope_formula, BoundedQuantity, Certificate, InitialNorms, Theorem,
};
use crate::controllers::{cell_means, ControllerSpec, SteeringTarget};
use crate::domain::{compute_norms, eigen_system, to_modal, Field};
use crate::dynamics::TrajectoryRecord;
use crate::error::{Error, Result};

/// Values at or below this are dropped before taking logarithms.
pub const FIT_FLOOR: f64 = 1e-12;
pub const MIN_FIT_SAMPLES: usize = 8;
pub const DEFAULT_WINDOW_FRACTION: f64 = 0.5;

/// Default relative slack for envelope checks at step `dt`.
pub fn default_slack(dt: f64) -> f64 {
    1e-6 + 10.0 * dt * dt
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    /// Negated slope of `log(value)` against `t`.
    pub rate: f64,
    pub log_intercept: f64,
    pub residual_rms: f64,
    pub window: (f64, f64),
    pub samples: usize,
}

/// Least-squares fit of `log(value) = c − rate·t` over the trailing
/// `window_fraction` of the samples.
pub fn fit_decay_rate(times: &[f64], values: &[f64], window_fraction: f64) -> Result<DecayFit> {
    if times.len() != values.len() {
        return Err(Error::Analysis("times and values differ in length".into()));
    }
    if !(window_fraction > 0.0 && window_fraction <= 1.0) {
        return Err(Error::Analysis("window fraction must lie in (0, 1]".into()));
    }
    let n = times.len();
    let take = ((n as f64 * window_fraction).ceil() as usize).min(n);
    let start = n - take;
    let points: Vec<(f64, f64)> = times[start..]
        .iter()
        .zip(&values[start..])
        .filter(|(_, v)| **v > FIT_FLOOR && v.is_finite())
        .map(|(t, v)| (*t, v.ln()))
        .collect();
    if points.len() < MIN_FIT_SAMPLES {
        return Err(Error::Analysis(format!(
            "{} usable samples in the fit window, need {MIN_FIT_SAMPLES}",
            points.len()
        )));
    }
    let m = points.len() as f64;
    let t_mean = points.iter().map(|p| p.0).sum::<f64>() / m;
    let y_mean = points.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = points.iter().map(|p| (p.0 - t_mean).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - t_mean) * (p.1 - y_mean)).sum();
    if sxx == 0.0 {
        return Err(Error::Analysis("fit window has zero time span".into()));
    }
    let slope = sxy / sxx;
    let intercept = y_mean - slope * t_mean;
    let residual_rms = (points
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum::<f64>()
        / m)
        .sqrt();
    Ok(DecayFit {
        rate: -slope,
        log_intercept: intercept,
        residual_rms,
        window: (points[0].0, points[points.len() - 1].0),
        samples: points.len(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeReport {
    pub passed: bool,
    pub first_violation: Option<f64>,
    /// Largest `observed / envelope` over the samples.
    pub worst_ratio: f64,
    pub quantity: BoundedQuantity,
    /// Envelope value at each sample.
    pub envelope: Vec<f64>,
}

fn theorem_matches(controller: &ControllerSpec, theorem: Theorem) -> bool {
    matches!(
        (controller, theorem),
        (ControllerSpec::VolumeElements, Theorem::Volume)
            | (ControllerSpec::Modal, Theorem::ModalL2 | Theorem::ModalH1)
            | (ControllerSpec::Nodal(_), Theorem::Nodal)
            | (ControllerSpec::Steering(SteeringTarget::AnySolution), Theorem::Steering1)
            | (ControllerSpec::Steering(SteeringTarget::StableTarget), Theorem::Steering2)
    )
}

/// Norms at the first sample of a record.
pub fn initial_norms(record: &TrajectoryRecord) -> Result<InitialNorms> {
    let l2_sq = *record
        .l2_sq
        .first()
        .ok_or_else(|| Error::Analysis("empty trajectory".into()))?;
    let first = |s: &Option<Vec<f64>>| s.as_ref().and_then(|v| v.first().copied()).unwrap_or(0.0);
    Ok(InitialNorms {
        l2_sq,
        error_l2_sq: first(&record.z_l2_sq),
        target_l2_sq: first(&record.v_l2_sq),
    })
}

fn observed(record: &TrajectoryRecord, quantity: BoundedQuantity) -> Result<Vec<f64>> {
    match quantity {
        BoundedQuantity::SolutionL2Sq => Ok(record.l2_sq.clone()),
        BoundedQuantity::SolutionL2 => Ok(record.l2_sq.iter().map(|v| v.sqrt()).collect()),
        BoundedQuantity::GradientL2Sq => Ok(record.h1_semi_sq.clone()),
        BoundedQuantity::ErrorL2Sq => record
            .z_l2_sq
            .clone()
            .ok_or_else(|| Error::Analysis("record carries no error norms".into())),
    }
}

fn compare(values: &[f64], times: &[f64], envelope: Vec<f64>, slack: f64, quantity: BoundedQuantity) -> EnvelopeReport {
    let mut first_violation = None;
    let mut worst_ratio: f64 = 0.0;
    for ((v, e), t) in values.iter().zip(&envelope).zip(times) {
        let ratio = if *v == 0.0 { 0.0 } else { v / e };
        worst_ratio = worst_ratio.max(if ratio.is_nan() { f64::INFINITY } else { ratio });
        if !(*v <= e * (1.0 + slack)) && first_violation.is_none() {
            first_violation = Some(*t);
        }
    }
    EnvelopeReport {
        passed: first_violation.is_none(),
        first_violation,
        worst_ratio,
        quantity,
        envelope,
    }
}

fn check_pairing(record: &TrajectoryRecord, cert: &Certificate) -> Result<()> {
    if !theorem_matches(&record.controller, cert.theorem) {
        return Err(Error::Analysis(format!(
            "a {} run cannot be judged by the {} result",
            record.controller,
            cert.theorem.name()
        )));
    }
    if cert.theorem == Theorem::ModalH1 {
        return Err(Error::Analysis(
            "the gradient result is rate-only; use verify_rate".into(),
        ));
    }
    Ok(())
}

/// Checks the theorem's bounded quantity against its envelope at every sample.
pub fn verify_envelope(record: &TrajectoryRecord, cert: &Certificate, rel_slack: f64) -> Result<EnvelopeReport> {
    if !cert.satisfied() {
        return Err(Error::Analysis(format!(
            "hypotheses of the {} result are violated",
            cert.theorem.name()
        )));
    }
    verify_envelope_unchecked(record, cert, rel_slack)
}

/// As [`verify_envelope`] but evaluates the envelope formulas even when
/// hypotheses fail (forced runs).
pub fn verify_envelope_unchecked(record: &TrajectoryRecord, cert: &Certificate, rel_slack: f64) -> Result<EnvelopeReport> {
    check_pairing(record, cert)?;
    let init = initial_norms(record)?;
    let quantity = cert.bounded_quantity();
    let values = observed(record, quantity)?;
    let envelope = record
        .times
        .iter()
        .map(|t| envelope_formula(cert, &init, *t))
        .collect::<Result<Vec<_>>>()?;
    Ok(compare(&values, &record.times, envelope, rel_slack, quantity))
}

/// Checks `‖u(t)‖²` against the solution envelope of steering to a decaying
/// target.
pub fn verify_solution_envelope(record: &TrajectoryRecord, cert: &Certificate, rel_slack: f64) -> Result<EnvelopeReport> {
    if !cert.satisfied() {
        return Err(Error::Analysis("steering hypotheses are violated".into()));
    }
    verify_solution_envelope_unchecked(record, cert, rel_slack)
}

pub fn verify_solution_envelope_unchecked(
    record: &TrajectoryRecord,
    cert: &Certificate,
    rel_slack: f64,
) -> Result<EnvelopeReport> {
    check_pairing(record, cert)?;
    let init = initial_norms(record)?;
    let envelope = record
        .times
        .iter()
        .map(|t| solution_envelope_formula(cert, &init, *t))
        .collect::<Result<Vec<_>>>()?;
    Ok(compare(
        &record.l2_sq,
        &record.times,
        envelope,
        rel_slack,
        BoundedQuantity::SolutionL2Sq,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateReport {
    pub passed: bool,
    pub fit: DecayFit,
    pub required: f64,
}

/// Rate-only check: the fitted decay rate of `values` is at least `required`.
pub fn verify_rate(times: &[f64], values: &[f64], required: f64, window_fraction: f64) -> Result<RateReport> {
    let fit = fit_decay_rate(times, values, window_fraction)?;
    Ok(RateReport {
        passed: fit.rate >= required,
        fit,
        required,
    })
}

/// `h·‖u‖_{H¹,equiv} − ‖u − I_h u‖` with `h = L/N`.
pub fn interpolant_margin(u: &Field, n: usize) -> Result<f64> {
    let domain = u.domain();
    if !domain.is_interval() {
        return Err(Error::Analysis("the interpolant is defined on intervals".into()));
    }
    let means = cell_means(u, n)?;
    let h = domain.characteristic_length() / n as f64;
    let rhs = h * compute_norms(u, 2.0).h1_equiv_sq.sqrt();
    // I_h is the L² projection onto cell-wise constants, so
    // ‖u − I_h u‖² = ‖u‖² − h Σ|ū_k|²; this avoids quadrature across the jumps.
    let projected: f64 = h * means.iter().map(|m| m.norm_sqr()).sum::<f64>();
    let lhs = (u.l2_sq() - projected).max(0.0).sqrt();
    Ok(rhs - lhs)
}

/// `|‖f‖² − Σ_k |(f, ω_k)|²|` over every representable mode.
pub fn parseval_residual(f: &Field) -> f64 {
    let count = f.domain().max_modes();
    let energy = to_modal(f, count).expect("max_modes is representable").energy();
    (f.l2_sq() - energy).abs()
}

/// Largest entry of `|G − I|` for the Gram matrix of the first `count`
/// eigenfunctions.
pub fn gram_deviation(domain: &crate::domain::Domain, count: usize) -> Result<f64> {
    let es = eigen_system(domain, count)?;
    let fns: Vec<Field> = (0..count).map(|i| es.eigenfunction(i)).collect();
    let mut worst: f64 = 0.0;
    for (i, a) in fns.iter().enumerate() {
        for (j, b) in fns.iter().enumerate() {
            let want = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((a.inner(b)? - want).norm());
        }
    }
    Ok(worst)
}
