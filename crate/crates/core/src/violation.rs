//! Violation functionals and certificate evaluation.
//!
//! The central quantity is the decrease-condition scan along a trajectory,
//!
//! ```text
//! h = max_k <grad V(x_k), x'_k> + eta V(x_k),
//! ```
//!
//! whose sign certifies exponential decrease at rate `eta` (the supremum
//! over continuous time is approximated by the max over the rollout grid).
//! The adversarial variant maximizes the same scan over a finite set of
//! tube realizations and subtracts the practical-stability slack `nu`; it
//! is a lower bound on the true tube supremum and is labeled as such in
//! reports.

use thiserror::Error;

use crate::adversary::{perturbed_rollout, AdversaryError, AdversarySpec, Disturbance};
use crate::certificate::Certificate;
use crate::exec;
use crate::linalg::dot;
use crate::sim::{rollout, Trajectory, VectorField};

#[derive(Debug, Error)]
pub enum ViolationError {
    #[error("adversary set must not be empty")]
    EmptyAdversarySet,
    #[error(transparent)]
    Adversary(#[from] AdversaryError),
    #[error("trajectory too short: need at least {need} samples, got {got}")]
    TooShort { need: usize, got: usize },
    #[error("discrete-time rate must satisfy 0 < eta < 1, got {0}")]
    BadDtRate(f64),
}

/// Per-trajectory violation diagnostics.
#[derive(Debug, Clone)]
pub struct ViolationReport {
    /// Max of the per-sample values: the violation functional itself.
    pub value: f64,
    /// The scanned decrease expression at every grid sample, with the
    /// slack `nu` already subtracted.
    pub per_sample: Vec<f64>,
    /// Index of the maximizing sample.
    pub worst_index: usize,
    /// Time of the maximizing sample.
    pub worst_time: f64,
    /// Decrease rate the scan used.
    pub eta: f64,
    /// Practical-stability slack subtracted from the scan (adversarial only).
    pub nu: f64,
    /// True when the value is a finite-realization lower bound on the tube
    /// supremum rather than an exact nominal scan.
    pub lower_bound_on_sup: bool,
}

/// Per-sample decrease values `<grad V, x'> + eta V` along a trajectory.
pub fn per_sample_values(traj: &Trajectory, cert: &dyn Certificate, eta: f64) -> Vec<f64> {
    traj.states
        .iter()
        .zip(&traj.derivs)
        .map(|(x, dx)| {
            let (v, g) = cert.value_and_grad(x);
            dot(&g, dx) + eta * v
        })
        .collect()
}

fn scan(traj: &Trajectory, cert: &dyn Certificate, eta: f64, nu: f64, lower: bool) -> ViolationReport {
    let mut per_sample = per_sample_values(traj, cert, eta);
    // Fold the practical-stability slack into the stored samples so the
    // report's value is exactly the max of its per-sample values.
    if nu != 0.0 {
        for v in &mut per_sample {
            *v -= nu;
        }
    }
    let (worst_index, max) = per_sample
        .iter()
        .enumerate()
        .fold((0usize, f64::NEG_INFINITY), |(bi, bv), (i, &v)| {
            if v > bv {
                (i, v)
            } else {
                (bi, bv)
            }
        });
    ViolationReport {
        value: max,
        per_sample,
        worst_index,
        worst_time: traj.times[worst_index],
        eta,
        nu,
        lower_bound_on_sup: lower,
    }
}

/// Nominal violation functional: max over the trajectory grid of the
/// decrease expression.
pub fn h_nominal(traj: &Trajectory, cert: &dyn Certificate, eta: f64) -> f64 {
    scan(traj, cert, eta, 0.0, false).value
}

/// Nominal scan with full diagnostics.
pub fn h_nominal_report(traj: &Trajectory, cert: &dyn Certificate, eta: f64) -> ViolationReport {
    scan(traj, cert, eta, 0.0, false)
}

/// Adversarial violation: max over the supplied tube realizations of the
/// perturbed-trajectory scan, minus `nu`. A lower bound on the supremum
/// over the full tube.
#[allow(clippy::too_many_arguments)]
pub fn h_adversarial(
    xi: &[f64],
    cert: &dyn Certificate,
    field: &VectorField,
    adversaries: &[(Disturbance, AdversarySpec)],
    eta: f64,
    nu: f64,
    horizon: f64,
    dt: f64,
    wrap_dims: &[usize],
) -> Result<f64, ViolationError> {
    Ok(h_adversarial_report(xi, cert, field, adversaries, eta, nu, horizon, dt, wrap_dims)?.value)
}

/// [`h_adversarial`] with diagnostics from the worst realization.
#[allow(clippy::too_many_arguments)]
pub fn h_adversarial_report(
    xi: &[f64],
    cert: &dyn Certificate,
    field: &VectorField,
    adversaries: &[(Disturbance, AdversarySpec)],
    eta: f64,
    nu: f64,
    horizon: f64,
    dt: f64,
    wrap_dims: &[usize],
) -> Result<ViolationReport, ViolationError> {
    if adversaries.is_empty() {
        return Err(ViolationError::EmptyAdversarySet);
    }
    let mut best: Option<ViolationReport> = None;
    for (d, spec) in adversaries {
        let traj = perturbed_rollout(field, d, spec, xi, horizon, dt, wrap_dims)?;
        let report = scan(&traj, cert, eta, nu, true);
        if best.as_ref().is_none_or(|b| report.value > b.value) {
            best = Some(report);
        }
    }
    Ok(best.expect("non-empty adversary set"))
}

/// Margin feasibility over a set of violation values: feasible when all
/// values are `<= -tau`; counts how many entries miss the margin.
pub fn feasibility_check(h_values: &[f64], tau: f64) -> (bool, usize) {
    assert!(tau >= 0.0);
    let violations = h_values.iter().filter(|v| **v > -tau).count();
    (violations == 0, violations)
}

/// 0-1 empirical risk at margin `tau`: fraction of values above `-tau`.
/// Zero exactly when [`feasibility_check`] passes.
pub fn empirical_risk(h_values: &[f64], tau: f64) -> f64 {
    if h_values.is_empty() {
        return 0.0;
    }
    let (_, violations) = feasibility_check(h_values, tau);
    violations as f64 / h_values.len() as f64
}

/// One row of a satisfaction sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SatisfactionPoint {
    pub eta: f64,
    pub traj_rate: f64,
    pub point_rate: f64,
}

/// Fractions of whole trajectories (`h <= 0`) and of individual samples
/// (decrease value `<= 0`) satisfying the decrease condition, per rate in
/// `eta_grid`. Both rates are non-increasing in `eta`.
pub fn satisfaction_rates(
    trajs: &[Trajectory],
    cert: &dyn Certificate,
    eta_grid: &[f64],
) -> Vec<SatisfactionPoint> {
    if eta_grid.is_empty() || trajs.is_empty() {
        return Vec::new();
    }
    // The decrease value is affine in eta: a + eta b with b = V >= 0, so
    // evaluate (a, b) once per sample and sweep eta cheaply.
    let per_traj: Vec<Vec<(f64, f64)>> = exec::map(trajs, |_, traj| {
        traj.states
            .iter()
            .zip(&traj.derivs)
            .map(|(x, dx)| {
                let (v, g) = cert.value_and_grad(x);
                (dot(&g, dx), v)
            })
            .collect()
    });
    let total_points: usize = per_traj.iter().map(|t| t.len()).sum();
    eta_grid
        .iter()
        .map(|&eta| {
            let mut traj_ok = 0usize;
            let mut point_ok = 0usize;
            for samples in &per_traj {
                let mut all = true;
                for &(a, b) in samples {
                    if a + eta * b <= 0.0 {
                        point_ok += 1;
                    } else {
                        all = false;
                    }
                }
                if all {
                    traj_ok += 1;
                }
            }
            SatisfactionPoint {
                eta,
                traj_rate: traj_ok as f64 / trajs.len() as f64,
                point_rate: point_ok as f64 / total_points as f64,
            }
        })
        .collect()
}

/// Monte Carlo estimate of the adversarial generalization error
/// `P[h_nu(xi, V) > 0]` over fresh initial conditions, with a 95% Wilson
/// interval.
#[derive(Debug, Clone, Copy)]
pub struct GeneralizationEstimate {
    pub err_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n_test: usize,
    pub failures: usize,
}

/// Experiment geometry for generalization estimates.
pub struct RolloutSetup<'a> {
    pub field: &'a VectorField,
    pub horizon: f64,
    pub dt: f64,
    pub wrap_dims: &'a [usize],
    pub ic_lo: &'a [f64],
    pub ic_hi: &'a [f64],
}

#[allow(clippy::too_many_arguments)]
pub fn estimate_generalization_error(
    cert: &dyn Certificate,
    setup: &RolloutSetup<'_>,
    adversaries: &[(Disturbance, AdversarySpec)],
    n_test: usize,
    eta: f64,
    nu: f64,
    seed: u64,
) -> Result<GeneralizationEstimate, ViolationError> {
    assert!(n_test >= 1);
    let ics = crate::sim::sample_initial_conditions(n_test, setup.ic_lo, setup.ic_hi, seed)
        .map_err(AdversaryError::from)?;
    let outcomes = exec::map(&ics, |_, xi| -> Result<bool, ViolationError> {
        let h = if adversaries.is_empty() {
            let traj = rollout(setup.field, xi, setup.horizon, setup.dt, setup.wrap_dims)
                .map_err(AdversaryError::from)?;
            h_nominal(&traj, cert, eta) - nu
        } else {
            h_adversarial(
                xi,
                cert,
                setup.field,
                adversaries,
                eta,
                nu,
                setup.horizon,
                setup.dt,
                setup.wrap_dims,
            )?
        };
        Ok(h > 0.0)
    });
    let mut failures = 0usize;
    for o in outcomes {
        if o? {
            failures += 1;
        }
    }
    let (lo, hi) = wilson_interval(failures, n_test);
    Ok(GeneralizationEstimate {
        err_hat: failures as f64 / n_test as f64,
        ci_low: lo,
        ci_high: hi,
        n_test,
        failures,
    })
}

/// 95% Wilson score interval; stable at the 0/n and n/n extremes.
pub fn wilson_interval(successes: usize, n: usize) -> (f64, f64) {
    assert!(n >= 1 && successes <= n);
    let z = 1.959963984540054_f64;
    let nf = n as f64;
    let p = successes as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Discrete-time violation functional
/// `max_t V(x_{t+1}) - eta^2 V(x_t)` over consecutive sample pairs.
pub fn h_dt(traj: &Trajectory, cert: &dyn Certificate, eta: f64) -> Result<f64, ViolationError> {
    if !(0.0 < eta && eta < 1.0) {
        return Err(ViolationError::BadDtRate(eta));
    }
    if traj.len() < 2 {
        return Err(ViolationError::TooShort { need: 2, got: traj.len() });
    }
    let values: Vec<f64> = traj.states.iter().map(|x| cert.value(x)).collect();
    let eta2 = eta * eta;
    Ok(values
        .windows(2)
        .map(|w| w[1] - eta2 * w[0])
        .fold(f64::NEG_INFINITY, f64::max))
}
