//! Perturbation tubes, disturbance realizations, and perturbed rollouts.
//!
//! Three tube kinds constrain an additive disturbance entering the dynamics
//! `x' = f(x) + delta`:
//!
//! - norm-bounded: `||delta_t|| <= eps_u` (process noise),
//! - Lipschitz: `||delta(x)|| <= eps_x ||x||` (model error),
//! - combined: `delta = delta_x(x) + delta_u_t` with both part budgets.
//!
//! The exact supremum over a tube is intractable, so evaluations realize the
//! tube through finitely many concrete disturbances (greedy
//! certificate-ascent, radial growth, fixed signals, custom closures). Any
//! quantity maximized over such a set is a lower bound on the tube supremum
//! and is labeled as such by the callers.

use std::sync::Arc;

use thiserror::Error;

use crate::certificate::Certificate;
use crate::linalg::norm2;
use crate::sim::{self, DiscreteMap, SimError, Trajectory, VectorField};

/// Below this gradient norm the greedy direction is undefined and the
/// disturbance is zero; prevents division blow-up at the equilibrium.
pub const GRADIENT_FLOOR: f64 = 1e-12;

/// Relative slack absorbed by budget checks before declaring a violation;
/// covers floating-point normalization error only.
pub const BUDGET_SLACK: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum AdversaryError {
    #[error("disturbance exceeded its budget at step {step} (t = {time}): |delta| = {measured}, budget = {budget}")]
    BudgetViolation { step: usize, time: f64, measured: f64, budget: f64 },
    #[error("adversary set must not be empty")]
    EmptyAdversarySet,
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("adversary spec invalid: {0}")]
    InvalidSpec(String),
}

/// Tube kind for an adversary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TubeKind {
    None,
    NormBounded,
    Lipschitz,
    Combined,
}

/// How a disturbance realization is constructed; metadata used by runners.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    GreedyCertificate,
    Radial,
    FixedSignal,
    Custom,
}

/// An adversary class: tube kind plus budgets.
///
/// `eps_u` is the instantaneous norm budget (state units / s), `eps_x` the
/// linear-growth rate (1/s). Norm-bounded uses `eps_u` only, Lipschitz
/// `eps_x` only, combined both; `None` forces both to zero.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AdversarySpec {
    pub kind: TubeKind,
    #[serde(default)]
    pub eps_u: f64,
    #[serde(default)]
    pub eps_x: f64,
    #[serde(default = "default_strategy")]
    pub strategy: Strategy,
}

fn default_strategy() -> Strategy {
    Strategy::GreedyCertificate
}

impl AdversarySpec {
    pub fn none() -> Self {
        Self { kind: TubeKind::None, eps_u: 0.0, eps_x: 0.0, strategy: Strategy::FixedSignal }
    }

    pub fn norm_bounded(eps_u: f64, strategy: Strategy) -> Self {
        Self { kind: TubeKind::NormBounded, eps_u, eps_x: 0.0, strategy }
    }

    pub fn lipschitz(eps_x: f64, strategy: Strategy) -> Self {
        Self { kind: TubeKind::Lipschitz, eps_u: 0.0, eps_x, strategy }
    }

    pub fn combined(eps_x: f64, eps_u: f64, strategy: Strategy) -> Self {
        Self { kind: TubeKind::Combined, eps_u, eps_x, strategy }
    }

    pub fn validate(&self) -> Result<(), AdversaryError> {
        let bad = |msg: &str| Err(AdversaryError::InvalidSpec(msg.to_string()));
        if self.eps_u < 0.0 || self.eps_x < 0.0 {
            return bad("budgets must be non-negative");
        }
        match self.kind {
            TubeKind::None if self.eps_u != 0.0 || self.eps_x != 0.0 => {
                bad("kind none forces eps_u = eps_x = 0")
            }
            TubeKind::NormBounded if self.eps_x != 0.0 => bad("norm-bounded uses eps_u only"),
            TubeKind::Lipschitz if self.eps_u != 0.0 => bad("lipschitz uses eps_x only"),
            _ => Ok(()),
        }
    }
}

/// A realized disturbance split into its state-feedback and free-input
/// parts, so combined budgets can be checked per part.
#[derive(Debug, Clone, PartialEq)]
pub struct DisturbanceValue {
    pub state_part: Vec<f64>,
    pub input_part: Vec<f64>,
}

impl DisturbanceValue {
    pub fn zero(dim: usize) -> Self {
        Self { state_part: vec![0.0; dim], input_part: vec![0.0; dim] }
    }

    pub fn total(&self) -> Vec<f64> {
        self.state_part
            .iter()
            .zip(&self.input_part)
            .map(|(a, b)| a + b)
            .collect()
    }

    pub fn is_zero(&self) -> bool {
        self.state_part.iter().all(|v| *v == 0.0) && self.input_part.iter().all(|v| *v == 0.0)
    }
}

type SignalFn = dyn Fn(f64) -> Vec<f64> + Send + Sync;
type FeedbackFn = dyn Fn(&[f64]) -> Vec<f64> + Send + Sync;
type CustomFn = dyn Fn(f64, &[f64]) -> DisturbanceValue + Send + Sync;

/// A concrete disturbance `delta(t, x)`, deterministic in its inputs.
#[derive(Clone)]
pub enum Disturbance {
    Zero,
    /// `delta(x) = eps_x * x`; greedily grows `||x||^2`.
    Radial { eps_x: f64 },
    /// Certificate-directed ascent `delta = c * grad V(x)` with `c` chosen
    /// to saturate the budget of `kind`.
    Greedy {
        cert: Arc<dyn Certificate>,
        kind: TubeKind,
        eps_u: f64,
        eps_x: f64,
    },
    /// Time-only input signal (free part).
    Signal { f: Arc<SignalFn> },
    /// State-feedback disturbance (state part).
    Feedback { f: Arc<FeedbackFn> },
    /// Anything else; the closure declares its own decomposition.
    Custom { f: Arc<CustomFn> },
}

impl Disturbance {
    pub fn constant(value: Vec<f64>) -> Self {
        Disturbance::Signal { f: Arc::new(move |_t| value.clone()) }
    }

    /// Evaluates the disturbance at `(t, x)`.
    pub fn eval(&self, t: f64, x: &[f64]) -> DisturbanceValue {
        let dim = x.len();
        match self {
            Disturbance::Zero => DisturbanceValue::zero(dim),
            Disturbance::Radial { eps_x } => DisturbanceValue {
                state_part: x.iter().map(|v| eps_x * v).collect(),
                input_part: vec![0.0; dim],
            },
            Disturbance::Greedy { cert, kind, eps_u, eps_x } => {
                greedy_value(cert.as_ref(), *kind, *eps_u, *eps_x, x)
            }
            Disturbance::Signal { f } => DisturbanceValue {
                state_part: vec![0.0; dim],
                input_part: f(t),
            },
            Disturbance::Feedback { f } => DisturbanceValue {
                state_part: f(x),
                input_part: vec![0.0; dim],
            },
            Disturbance::Custom { f } => f(t, x),
        }
    }
}

fn greedy_value(
    cert: &dyn Certificate,
    kind: TubeKind,
    eps_u: f64,
    eps_x: f64,
    x: &[f64],
) -> DisturbanceValue {
    let dim = x.len();
    let g = cert.grad(x);
    let gn = norm2(&g);
    if gn < GRADIENT_FLOOR {
        return DisturbanceValue::zero(dim);
    }
    let mut out = DisturbanceValue::zero(dim);
    match kind {
        TubeKind::Lipschitz => {
            let c = eps_x * norm2(x) / gn;
            out.state_part = g.iter().map(|v| c * v).collect();
        }
        TubeKind::NormBounded => {
            let c = eps_u / gn;
            out.input_part = g.iter().map(|v| c * v).collect();
        }
        TubeKind::Combined => {
            let cx = eps_x * norm2(x) / gn;
            let cu = eps_u / gn;
            out.state_part = g.iter().map(|v| cx * v).collect();
            out.input_part = g.iter().map(|v| cu * v).collect();
        }
        TubeKind::None => {}
    }
    out
}

/// The greedy certificate-ascent disturbance: `delta ∝ grad V(x)`, scaled to
/// saturate the budget (`c = eps_x ||x|| / ||grad V||` for the Lipschitz
/// tube, `c = eps_u / ||grad V||` for the norm-bounded tube). Gradients
/// below [`GRADIENT_FLOOR`] give `delta = 0`.
pub fn greedy_disturbance(cert: Arc<dyn Certificate>, spec: &AdversarySpec) -> Disturbance {
    assert!(
        matches!(spec.kind, TubeKind::NormBounded | TubeKind::Lipschitz | TubeKind::Combined),
        "greedy disturbance needs an active tube kind"
    );
    Disturbance::Greedy { cert, kind: spec.kind, eps_u: spec.eps_u, eps_x: spec.eps_x }
}

/// The radial disturbance `delta(x) = eps_x * x`.
pub fn radial_disturbance(eps_x: f64) -> Disturbance {
    assert!(eps_x >= 0.0);
    Disturbance::Radial { eps_x }
}

/// Outcome of a budget check: whether every applicable constraint holds
/// (with relative slack [`BUDGET_SLACK`]) and the smallest absolute margin
/// `budget - measured` across the binding constraints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BudgetCheck {
    pub pass: bool,
    pub slack: f64,
}

fn check_one(measured: f64, budget: f64) -> BudgetCheck {
    BudgetCheck { pass: measured <= budget * (1.0 + BUDGET_SLACK), slack: budget - measured }
}

fn merge(a: BudgetCheck, b: BudgetCheck) -> BudgetCheck {
    BudgetCheck { pass: a.pass && b.pass, slack: a.slack.min(b.slack) }
}

/// Checks a realized disturbance (with declared decomposition) against the
/// budgets of `spec`. Never fails; reports pass/fail plus measured slack.
pub fn budget_check_value(value: &DisturbanceValue, x: &[f64], spec: &AdversarySpec) -> BudgetCheck {
    match spec.kind {
        TubeKind::None => check_one(norm2(&value.total()), 0.0),
        TubeKind::NormBounded => check_one(norm2(&value.total()), spec.eps_u),
        TubeKind::Lipschitz => check_one(norm2(&value.total()), spec.eps_x * norm2(x)),
        TubeKind::Combined => merge(
            check_one(norm2(&value.state_part), spec.eps_x * norm2(x)),
            check_one(norm2(&value.input_part), spec.eps_u),
        ),
    }
}

/// Budget check for a bare disturbance vector. For the combined tube, where
/// only the total is known, this checks that *some* admissible decomposition
/// exists (`||delta|| <= eps_x ||x|| + eps_u`; a collinear split attains it).
pub fn budget_check(delta: &[f64], x: &[f64], spec: &AdversarySpec) -> BudgetCheck {
    let measured = norm2(delta);
    match spec.kind {
        TubeKind::None => check_one(measured, 0.0),
        TubeKind::NormBounded => check_one(measured, spec.eps_u),
        TubeKind::Lipschitz => check_one(measured, spec.eps_x * norm2(x)),
        TubeKind::Combined => check_one(measured, spec.eps_x * norm2(x) + spec.eps_u),
    }
}

fn checked_total(
    d: &Disturbance,
    spec: &AdversarySpec,
    t: f64,
    x: &[f64],
    step: usize,
) -> Result<Option<Vec<f64>>, AdversaryError> {
    let value = d.eval(t, x);
    if value.is_zero() {
        // Skipping the addition keeps zero-budget rollouts bit-identical to
        // nominal ones.
        return Ok(None);
    }
    let check = budget_check_value(&value, x, spec);
    if !check.pass {
        let measured = norm2(&value.total());
        return Err(AdversaryError::BudgetViolation {
            step,
            time: t,
            measured,
            budget: measured - check.slack,
        });
    }
    Ok(Some(value.total()))
}

fn eval_perturbed(
    f: &VectorField,
    d: &Disturbance,
    spec: &AdversarySpec,
    t: f64,
    x: &[f64],
    step: usize,
) -> Result<Vec<f64>, AdversaryError> {
    let mut fx = f.eval(t, x);
    if let Some(total) = checked_total(d, spec, t, x, step)? {
        for (v, dv) in fx.iter_mut().zip(&total) {
            *v += dv;
        }
    }
    if fx.iter().all(|v| v.is_finite()) {
        Ok(fx)
    } else {
        Err(SimError::NonFiniteState { step, time: t }.into())
    }
}

/// RK4 rollout of `x' = f(x) + delta(t, x)`. Every disturbance evaluation is
/// budget-checked against `spec`; stored derivatives include the
/// disturbance. With a zero disturbance the arithmetic matches
/// [`sim::rollout`] bit for bit.
pub fn perturbed_rollout(
    f: &VectorField,
    d: &Disturbance,
    spec: &AdversarySpec,
    xi: &[f64],
    horizon: f64,
    dt: f64,
    wrap_dims: &[usize],
) -> Result<Trajectory, AdversaryError> {
    spec.validate()?;
    if xi.len() != f.dim() {
        return Err(SimError::DimensionMismatch { expected: f.dim(), got: xi.len() }.into());
    }
    let n = sim::step_count(horizon, dt)?;
    let p = f.dim();
    let mut times = Vec::with_capacity(n + 1);
    let mut states = Vec::with_capacity(n + 1);
    let mut derivs = Vec::with_capacity(n + 1);
    let mut x = xi.to_vec();
    for &dim in wrap_dims {
        x[dim] = sim::wrap_angle(x[dim]);
    }
    let initial_condition = x.clone();
    let mut stage = vec![0.0; p];
    for k in 0..=n {
        let t = k as f64 * dt;
        times.push(t);
        let k1 = eval_perturbed(f, d, spec, t, &x, k)?;
        derivs.push(k1.clone());
        states.push(x.clone());
        if k < n {
            // Same stage arithmetic as sim::rk4_step, with k1 reused.
            for i in 0..p {
                stage[i] = x[i] + 0.5 * dt * k1[i];
            }
            let k2 = eval_perturbed(f, d, spec, t + 0.5 * dt, &stage, k)?;
            for i in 0..p {
                stage[i] = x[i] + 0.5 * dt * k2[i];
            }
            let k3 = eval_perturbed(f, d, spec, t + 0.5 * dt, &stage, k)?;
            for i in 0..p {
                stage[i] = x[i] + dt * k3[i];
            }
            let k4 = eval_perturbed(f, d, spec, t + dt, &stage, k)?;
            for i in 0..p {
                x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            if !x.iter().all(|v| v.is_finite()) {
                return Err(SimError::NonFiniteState { step: k + 1, time: t + dt }.into());
            }
            for &dim in wrap_dims {
                x[dim] = sim::wrap_angle(x[dim]);
            }
        }
    }
    Ok(Trajectory { times, states, derivs, initial_condition })
}

/// Perturbed rollouts over a batch of initial conditions, parallel across
/// trajectories with order preserved.
pub fn perturbed_rollout_many(
    f: &VectorField,
    d: &Disturbance,
    spec: &AdversarySpec,
    ics: &[Vec<f64>],
    horizon: f64,
    dt: f64,
    wrap_dims: &[usize],
) -> Result<Vec<Trajectory>, AdversaryError> {
    crate::exec::map(ics, |_, xi| perturbed_rollout(f, d, spec, xi, horizon, dt, wrap_dims))
        .into_iter()
        .collect()
}

/// Iterates `x_{t+1} = f(x_t) + delta(t, x_t)` with per-step budget checks.
/// The `derivs` field holds next-state increments.
pub fn dt_perturbed_rollout(
    map: &DiscreteMap,
    d: &Disturbance,
    spec: &AdversarySpec,
    xi: &[f64],
    steps: usize,
) -> Result<Trajectory, AdversaryError> {
    assert!(steps >= 1, "need at least one step");
    spec.validate()?;
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    let mut derivs = Vec::with_capacity(steps + 1);
    let mut x = xi.to_vec();
    for k in 0..=steps {
        let t = k as f64;
        if !x.iter().all(|v| v.is_finite()) {
            return Err(SimError::NonFiniteState { step: k, time: t }.into());
        }
        let mut next = map.eval(&x);
        if let Some(total) = checked_total(d, spec, t, &x, k)? {
            for (v, dv) in next.iter_mut().zip(&total) {
                *v += dv;
            }
        }
        times.push(t);
        derivs.push(next.iter().zip(&x).map(|(n, c)| n - c).collect());
        states.push(x.clone());
        if k < steps {
            x = next;
        }
    }
    Ok(Trajectory { times, states, derivs, initial_condition: xi.to_vec() })
}
