//! Closed-form stability bounds and their empirical verifiers.
//!
//! Covers, in both continuous and discrete time:
//!
//! - trajectory deviation bounds under norm-bounded / Lipschitz / combined
//!   adversaries for `(beta, rho, gamma)`-E-dISS systems,
//! - the matching additive Rademacher-complexity terms,
//! - the margin-based generalization bound (up to its universal constant),
//! - Lipschitz-constant bounds for the adversarial violation functional,
//! - a pointwise contraction (LMI) check yielding E-dISS constants,
//! - randomized verification of the E-dISS inequality and of every
//!   deviation bound on oracle systems,
//! - brute-force checks of the combinatorial identities used in the
//!   discrete-time derivation.
//!
//! Every bound evaluation returns a [`BoundResult`] that echoes its inputs
//! and carries an explicit validity flag instead of silently returning
//! numbers outside a formula's precondition.

use std::f64::consts::E;

use rand::Rng;
use thiserror::Error;

use crate::adversary::TubeKind;
use crate::certificate::Certificate;
use crate::exec;
use crate::linalg::{dot, max_symmetric_eigenvalue, norm2};
use crate::sim::{rollout, DiscreteMap, VectorField};

/// Eigenvalue tolerance for the pointwise LMI checks.
const LMI_TOL: f64 = 1e-9;

/// Multiplicative slack allowed when comparing measured deviations against
/// closed-form bounds; absorbs integrator round-off only.
const VERIFY_SLACK: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum TheoryError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid E-dISS parameters: {0}")]
    BadEdiss(String),
}

/// Continuous or discrete time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeMode {
    Continuous,
    Discrete,
}

/// Incremental-stability constants `(beta, rho, gamma)` of a system.
///
/// `beta >= 1` is the overshoot, `rho` the decay (a rate in continuous
/// time, a multiplier in `(0, 1)` in discrete time), `gamma` the input
/// gain.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EdissParams {
    pub beta: f64,
    pub rho: f64,
    pub gamma: f64,
    pub mode: TimeMode,
}

impl EdissParams {
    pub fn continuous(beta: f64, rho: f64, gamma: f64) -> Result<Self, TheoryError> {
        let p = Self { beta, rho, gamma, mode: TimeMode::Continuous };
        p.validate()?;
        Ok(p)
    }

    pub fn discrete(beta: f64, rho: f64, gamma: f64) -> Result<Self, TheoryError> {
        let p = Self { beta, rho, gamma, mode: TimeMode::Discrete };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), TheoryError> {
        if !(self.beta >= 1.0) {
            return Err(TheoryError::BadEdiss(format!("beta must be >= 1, got {}", self.beta)));
        }
        if !(self.gamma > 0.0) {
            return Err(TheoryError::BadEdiss(format!("gamma must be > 0, got {}", self.gamma)));
        }
        match self.mode {
            TimeMode::Continuous if !(self.rho > 0.0) => {
                Err(TheoryError::BadEdiss(format!("rho must be > 0, got {}", self.rho)))
            }
            TimeMode::Discrete if !(self.rho > 0.0 && self.rho < 1.0) => Err(TheoryError::BadEdiss(
                format!("discrete-time rho must lie in (0, 1), got {}", self.rho),
            )),
            _ => Ok(()),
        }
    }
}

/// Bounds on a certificate family over a compact set `S`.
///
/// `l_v` / `l_grad_v` bound the Lipschitz constants of `x -> V(x)` and
/// `x -> <grad V(x), f(x)>`; `b_v` / `b_grad_v` their sups; `b_x` the
/// largest initial-condition norm; `b_htilde` the sup of the adversarial
/// violation magnitude.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RegularityConstants {
    pub l_v: f64,
    pub l_grad_v: f64,
    pub b_v: f64,
    pub b_grad_v: f64,
    pub b_x: f64,
    pub b_htilde: f64,
}

impl RegularityConstants {
    pub fn validate(&self) -> Result<(), TheoryError> {
        let vals = [self.l_v, self.l_grad_v, self.b_v, self.b_grad_v, self.b_x, self.b_htilde];
        if vals.iter().all(|v| v.is_finite() && *v >= 0.0) {
            Ok(())
        } else {
            Err(TheoryError::Domain("regularity constants must be finite and non-negative".into()))
        }
    }
}

/// Which theorem clause produced a value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormulaId {
    CtDeviationNormBounded,
    CtDeviationLipschitz,
    CtDeviationCombined,
    DtDeviationNormBounded,
    DtDeviationLipschitz,
    DtDeviationCombined,
    CtRademacherNormBounded,
    CtRademacherLipschitz,
    CtRademacherCombined,
    DtRademacherNormBounded,
    DtRademacherLipschitz,
    DtRademacherCombined,
    ZeroTube,
}

/// Echo of the inputs a bound was evaluated with.
#[derive(Debug, Clone, serde::Serialize)]
pub struct BoundInputs {
    pub kind: TubeKind,
    pub ediss: EdissParams,
    pub eps_u: f64,
    pub eps_x: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub xi_norm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub constants: Option<RegularityConstants>,
}

/// Validity of a bound evaluation.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Validity {
    Ok,
    PreconditionViolated { reason: String },
}

/// A bound evaluation: the clause, echoed inputs, the value when the
/// clause's precondition holds, and the validity flag.
#[derive(Debug, Clone, serde::Serialize)]
pub struct BoundResult {
    pub formula: FormulaId,
    pub inputs: BoundInputs,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    pub validity: Validity,
    /// Human-readable precondition this clause checked.
    pub precondition: String,
}

impl BoundResult {
    fn ok(formula: FormulaId, inputs: BoundInputs, precondition: &str, value: f64) -> Self {
        Self { formula, inputs, value: Some(value), validity: Validity::Ok, precondition: precondition.into() }
    }

    fn violated(formula: FormulaId, inputs: BoundInputs, precondition: &str, reason: String) -> Self {
        Self {
            formula,
            inputs,
            value: None,
            validity: Validity::PreconditionViolated { reason },
            precondition: precondition.into(),
        }
    }

    pub fn is_ok(&self) -> bool {
        matches!(self.validity, Validity::Ok)
    }
}

fn inputs_for(
    kind: TubeKind,
    p: &EdissParams,
    eps_u: f64,
    eps_x: f64,
    xi_norm: Option<f64>,
) -> BoundInputs {
    BoundInputs {
        kind,
        ediss: *p,
        eps_u,
        eps_x,
        xi_norm,
        nu: None,
        eta: None,
        n: None,
        constants: None,
    }
}

/// Continuous-time deviation bound `sup_t ||phi_t - phi~_t||` for the given
/// tube:
///
/// - norm-bounded: `gamma eps_u / rho`;
/// - Lipschitz (needs `gamma eps_x < rho`):
///   `(a / (1 - a)) beta e^{-1} ||xi||` with `a = gamma eps_x / rho`;
/// - combined (same precondition):
///   `(gamma eps_u / rho + gamma eps_x / rho * beta e^{-1} ||xi||) / (1 - a)`.
pub fn deviation_bound_ct(
    kind: TubeKind,
    p: &EdissParams,
    eps_u: f64,
    eps_x: f64,
    xi_norm: f64,
) -> BoundResult {
    let inputs = inputs_for(kind, p, eps_u, eps_x, Some(xi_norm));
    if p.mode != TimeMode::Continuous {
        return BoundResult::violated(
            FormulaId::CtDeviationNormBounded,
            inputs,
            "continuous-time E-dISS parameters",
            "constants are not continuous-time".into(),
        );
    }
    let a = p.gamma * eps_x / p.rho;
    match kind {
        TubeKind::None => BoundResult::ok(FormulaId::ZeroTube, inputs, "none", 0.0),
        TubeKind::NormBounded => BoundResult::ok(
            FormulaId::CtDeviationNormBounded,
            inputs,
            "none",
            p.gamma * eps_u / p.rho,
        ),
        TubeKind::Lipschitz => {
            if a >= 1.0 {
                return BoundResult::violated(
                    FormulaId::CtDeviationLipschitz,
                    inputs,
                    "gamma * eps_x < rho",
                    format!("gamma*eps_x = {} >= rho = {}", p.gamma * eps_x, p.rho),
                );
            }
            BoundResult::ok(
                FormulaId::CtDeviationLipschitz,
                inputs,
                "gamma * eps_x < rho",
                a / (1.0 - a) * p.beta * xi_norm / E,
            )
        }
        TubeKind::Combined => {
            if a >= 1.0 {
                return BoundResult::violated(
                    FormulaId::CtDeviationCombined,
                    inputs,
                    "gamma * eps_x < rho",
                    format!("gamma*eps_x = {} >= rho = {}", p.gamma * eps_x, p.rho),
                );
            }
            let num = p.gamma * eps_u / p.rho + p.gamma * eps_x / p.rho * p.beta * xi_norm / E;
            BoundResult::ok(FormulaId::CtDeviationCombined, inputs, "gamma * eps_x < rho", num / (1.0 - a))
        }
    }
}

/// Per-step discrete-time Lipschitz deviation envelope
/// `beta ||xi|| (rho + gamma eps_x)^t`.
pub fn dt_lipschitz_envelope(p: &EdissParams, eps_x: f64, xi_norm: f64, t: usize) -> f64 {
    p.beta * xi_norm * (p.rho + p.gamma * eps_x).powi(t as i32)
}

/// Discrete-time deviation bound for the given tube:
///
/// - norm-bounded: `gamma eps_u / (1 - rho)`;
/// - Lipschitz (needs `rho + gamma eps_x < 1`): the per-step envelope
///   [`dt_lipschitz_envelope`]; the scalar reported here is its supremum
///   over steps `t >= 1`, `beta ||xi|| (rho + gamma eps_x)`;
/// - combined (same precondition):
///   `(1 - rho)/(1 - (rho + gamma eps_x)) * gamma * (beta ||xi|| eps_x / (e rho ln(1/rho)) + eps_u / (1 - rho))`.
pub fn deviation_bound_dt(
    kind: TubeKind,
    p: &EdissParams,
    eps_u: f64,
    eps_x: f64,
    xi_norm: f64,
) -> BoundResult {
    let inputs = inputs_for(kind, p, eps_u, eps_x, Some(xi_norm));
    if p.mode != TimeMode::Discrete {
        return BoundResult::violated(
            FormulaId::DtDeviationNormBounded,
            inputs,
            "discrete-time E-dISS parameters",
            "constants are not discrete-time".into(),
        );
    }
    let shifted = p.rho + p.gamma * eps_x;
    match kind {
        TubeKind::None => BoundResult::ok(FormulaId::ZeroTube, inputs, "none", 0.0),
        TubeKind::NormBounded => BoundResult::ok(
            FormulaId::DtDeviationNormBounded,
            inputs,
            "rho < 1",
            p.gamma * eps_u / (1.0 - p.rho),
        ),
        TubeKind::Lipschitz => {
            if shifted >= 1.0 {
                return BoundResult::violated(
                    FormulaId::DtDeviationLipschitz,
                    inputs,
                    "rho + gamma * eps_x < 1",
                    format!("rho + gamma*eps_x = {shifted} >= 1"),
                );
            }
            BoundResult::ok(
                FormulaId::DtDeviationLipschitz,
                inputs,
                "rho + gamma * eps_x < 1",
                p.beta * xi_norm * shifted,
            )
        }
        TubeKind::Combined => {
            if shifted >= 1.0 {
                return BoundResult::violated(
                    FormulaId::DtDeviationCombined,
                    inputs,
                    "rho + gamma * eps_x < 1",
                    format!("rho + gamma*eps_x = {shifted} >= 1"),
                );
            }
            let peak = 1.0 / (E * p.rho * (1.0 / p.rho).ln());
            let value = (1.0 - p.rho) / (1.0 - shifted)
                * p.gamma
                * (p.beta * xi_norm * eps_x * peak + eps_u / (1.0 - p.rho));
            BoundResult::ok(FormulaId::DtDeviationCombined, inputs, "rho + gamma * eps_x < 1", value)
        }
    }
}

/// Continuous-time additive Rademacher term for the adversarial loss class;
/// the caller adds it to a supplied nominal complexity.
///
/// Norm-bounded: `[(L_gv + eta L_v) gamma eps / rho + B_gv eps + nu] / sqrt(n)`.
/// Lipschitz and combined clauses as stated in the source theorem, with the
/// same `gamma eps_x < rho` precondition as the deviation bounds.
#[allow(clippy::too_many_arguments)]
pub fn rademacher_additive_ct(
    kind: TubeKind,
    c: &RegularityConstants,
    p: &EdissParams,
    eps_u: f64,
    eps_x: f64,
    nu: f64,
    eta: f64,
    n: usize,
) -> BoundResult {
    let mut inputs = inputs_for(kind, p, eps_u, eps_x, None);
    inputs.nu = Some(nu);
    inputs.eta = Some(eta);
    inputs.n = Some(n);
    inputs.constants = Some(*c);
    if p.mode != TimeMode::Continuous {
        return BoundResult::violated(
            FormulaId::CtRademacherNormBounded,
            inputs,
            "continuous-time E-dISS parameters",
            "constants are not continuous-time".into(),
        );
    }
    if n < 1 {
        return BoundResult::violated(
            FormulaId::CtRademacherNormBounded,
            inputs,
            "n >= 1",
            "sample count must be at least 1".into(),
        );
    }
    let sqrt_n = (n as f64).sqrt();
    let a = p.gamma * eps_x / p.rho;
    match kind {
        TubeKind::None => BoundResult::ok(FormulaId::ZeroTube, inputs, "none", nu / sqrt_n),
        TubeKind::NormBounded => {
            let term = (c.l_grad_v + eta * c.l_v) * p.gamma * eps_u / p.rho + c.b_grad_v * eps_u + nu;
            BoundResult::ok(FormulaId::CtRademacherNormBounded, inputs, "none", term / sqrt_n)
        }
        TubeKind::Lipschitz => {
            if a >= 1.0 {
                return BoundResult::violated(
                    FormulaId::CtRademacherLipschitz,
                    inputs,
                    "gamma * eps_x < rho",
                    format!("gamma*eps_x = {} >= rho = {}", p.gamma * eps_x, p.rho),
                );
            }
            let term = (c.l_grad_v + eta * c.l_v + c.b_grad_v * eps_x) * (a / (1.0 - a)) / E
                * c.b_x
                * p.beta
                * eps_x
                + c.b_grad_v * c.b_x * p.beta * eps_x
                + nu;
            BoundResult::ok(FormulaId::CtRademacherLipschitz, inputs, "gamma * eps_x < rho", term / sqrt_n)
        }
        TubeKind::Combined => {
            if a >= 1.0 {
                return BoundResult::violated(
                    FormulaId::CtRademacherCombined,
                    inputs,
                    "gamma * eps_x < rho",
                    format!("gamma*eps_x = {} >= rho = {}", p.gamma * eps_x, p.rho),
                );
            }
            let frac = (p.gamma * eps_u / p.rho + p.gamma * eps_x / p.rho / E * c.b_x * p.beta * eps_x)
                / (1.0 - a);
            let term = (c.l_grad_v + eta * c.l_v + c.b_grad_v * eps_x) * frac
                + c.b_grad_v * p.beta * eps_x * c.b_x
                + c.b_grad_v * eps_u
                + nu;
            BoundResult::ok(FormulaId::CtRademacherCombined, inputs, "gamma * eps_x < rho", term / sqrt_n)
        }
    }
}

/// Discrete-time additive Rademacher term:
///
/// - norm-bounded: `[(1 + eta^2) L_v gamma eps / (1 - rho) + nu] / sqrt(n)`;
/// - Lipschitz (needs `rho + gamma eps_x < 1`):
///   `[L_v beta B_x (rho + gamma eps + eta^2) + nu] / sqrt(n)`;
/// - combined (same precondition):
///   `[(1 + eta^2) L_v ((1-rho)/(1-(rho+gamma eps_x)) * gamma beta B_x eps_x / (e rho ln(1/rho)) + gamma eps_u / (1-rho)) + nu] / sqrt(n)`.
#[allow(clippy::too_many_arguments)]
pub fn rademacher_additive_dt(
    kind: TubeKind,
    c: &RegularityConstants,
    p: &EdissParams,
    eps_u: f64,
    eps_x: f64,
    nu: f64,
    eta: f64,
    n: usize,
) -> BoundResult {
    let mut inputs = inputs_for(kind, p, eps_u, eps_x, None);
    inputs.nu = Some(nu);
    inputs.eta = Some(eta);
    inputs.n = Some(n);
    inputs.constants = Some(*c);
    if p.mode != TimeMode::Discrete {
        return BoundResult::violated(
            FormulaId::DtRademacherNormBounded,
            inputs,
            "discrete-time E-dISS parameters",
            "constants are not discrete-time".into(),
        );
    }
    if n < 1 {
        return BoundResult::violated(
            FormulaId::DtRademacherNormBounded,
            inputs,
            "n >= 1",
            "sample count must be at least 1".into(),
        );
    }
    let sqrt_n = (n as f64).sqrt();
    let shifted = p.rho + p.gamma * eps_x;
    let eta2 = eta * eta;
    match kind {
        TubeKind::None => BoundResult::ok(FormulaId::ZeroTube, inputs, "none", nu / sqrt_n),
        TubeKind::NormBounded => {
            let term = (1.0 + eta2) * c.l_v * p.gamma * eps_u / (1.0 - p.rho) + nu;
            BoundResult::ok(FormulaId::DtRademacherNormBounded, inputs, "rho < 1", term / sqrt_n)
        }
        TubeKind::Lipschitz => {
            if shifted >= 1.0 {
                return BoundResult::violated(
                    FormulaId::DtRademacherLipschitz,
                    inputs,
                    "rho + gamma * eps_x < 1",
                    format!("rho + gamma*eps_x = {shifted} >= 1"),
                );
            }
            let term = c.l_v * p.beta * c.b_x * (p.rho + p.gamma * eps_x + eta2) + nu;
            BoundResult::ok(FormulaId::DtRademacherLipschitz, inputs, "rho + gamma * eps_x < 1", term / sqrt_n)
        }
        TubeKind::Combined => {
            if shifted >= 1.0 {
                return BoundResult::violated(
                    FormulaId::DtRademacherCombined,
                    inputs,
                    "rho + gamma * eps_x < 1",
                    format!("rho + gamma*eps_x = {shifted} >= 1"),
                );
            }
            let peak = 1.0 / (E * p.rho * (1.0 / p.rho).ln());
            let inner = (1.0 - p.rho) / (1.0 - shifted) * p.gamma * p.beta * c.b_x * eps_x * peak
                + p.gamma * eps_u / (1.0 - p.rho);
            let term = (1.0 + eta2) * c.l_v * inner + nu;
            BoundResult::ok(FormulaId::DtRademacherCombined, inputs, "rho + gamma * eps_x < 1", term / sqrt_n)
        }
    }
}

/// Margin-based generalization bound, up to the universal constant `k_const`
/// (echoed, never inferred):
///
/// ```text
/// err <= K ( log^3(n) / tau^2 * Rn^2 + log( log(B_h / tau) / delta ) / n )
/// ```
///
/// Requires `K > 0`, `0 < delta < 1`, `tau > 0`, `n >= 2`, and
/// `B_h / tau > e` so the nested logarithm is positive.
pub fn gen_bound(
    rn: f64,
    tau: f64,
    b_h: f64,
    n: usize,
    delta: f64,
    k_const: f64,
) -> Result<f64, TheoryError> {
    if !(k_const > 0.0) {
        return Err(TheoryError::Domain("K must be positive".into()));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(TheoryError::Domain("delta must lie in (0, 1)".into()));
    }
    if !(tau > 0.0) {
        return Err(TheoryError::Domain("tau must be positive".into()));
    }
    if n < 2 {
        return Err(TheoryError::Domain("n must be at least 2".into()));
    }
    if !(rn >= 0.0) {
        return Err(TheoryError::Domain("Rn must be non-negative".into()));
    }
    if !(b_h / tau > E) {
        return Err(TheoryError::Domain("need B_h / tau > e for the nested log".into()));
    }
    let nf = n as f64;
    let log_n = nf.ln();
    Ok(k_const * (log_n.powi(3) / (tau * tau) * rn * rn + ((b_h / tau).ln() / delta).ln() / nf))
}

/// Lipschitz bound for the adversarial violation functional in terms of the
/// nominal one: continuous time `L_h + B_delta`, discrete time `L_h + 2`
/// (the uniform disturbance bound does not enter).
pub fn lipschitz_bound_htilde(l_h: f64, b_delta: f64, mode: TimeMode) -> f64 {
    assert!(l_h >= 0.0);
    match mode {
        TimeMode::Continuous => {
            assert!(b_delta >= 0.0);
            l_h + b_delta
        }
        TimeMode::Discrete => l_h + 2.0,
    }
}

/// Outcome of a pointwise contraction check.
#[derive(Debug, Clone)]
pub struct ContractionOutcome {
    pub pass: bool,
    /// E-dISS constants `(sqrt(L/mu), lambda, sqrt(L/mu))` when the check
    /// passes at every grid point.
    pub ediss: Option<EdissParams>,
    pub counterexample: Option<ContractionFailure>,
    pub points_checked: usize,
}

#[derive(Debug, Clone)]
pub struct ContractionFailure {
    pub point: Vec<f64>,
    pub reason: String,
    pub max_eigenvalue: f64,
}

/// Checks, at every grid point, the metric sandwich `mu I <= M(x) <= L I`
/// and the contraction LMI
/// `J^T M + M J + 2 lambda M <= 0` (time-invariant metric, so `M' = 0`),
/// via max-eigenvalue tests with tolerance `1e-9`. Grid sampling only; no
/// formal verification between grid points.
pub fn check_contraction(
    f: &VectorField,
    metric: impl Fn(&[f64]) -> Vec<f64>,
    lambda: f64,
    mu: f64,
    l_bound: f64,
    grid: &[Vec<f64>],
) -> ContractionOutcome {
    assert!(!grid.is_empty(), "grid must not be empty");
    assert!(0.0 < mu && mu <= l_bound);
    assert!(lambda > 0.0);
    let p = f.dim();
    for x in grid {
        let m = metric(x);
        assert_eq!(m.len(), p * p, "metric must be p x p");
        // mu I <= M  <=>  max eig(mu I - M) <= tol
        let mut lower = vec![0.0; p * p];
        let mut upper = vec![0.0; p * p];
        for i in 0..p {
            for j in 0..p {
                lower[i * p + j] = -m[i * p + j];
                upper[i * p + j] = m[i * p + j];
            }
            lower[i * p + i] += mu;
            upper[i * p + i] -= l_bound;
        }
        let e_lower = max_symmetric_eigenvalue(&lower, p);
        if e_lower > LMI_TOL {
            return fail(x, "metric lower bound mu I <= M(x) violated", e_lower, grid.len());
        }
        let e_upper = max_symmetric_eigenvalue(&upper, p);
        if e_upper > LMI_TOL {
            return fail(x, "metric upper bound M(x) <= L I violated", e_upper, grid.len());
        }
        let jac = f.jacobian(x);
        let mut lmi = vec![0.0; p * p];
        for i in 0..p {
            for j in 0..p {
                let mut acc = 2.0 * lambda * m[i * p + j];
                for k in 0..p {
                    // (J^T M)_{ij} = sum_k J_{ki} M_{kj}; (M J)_{ij} = sum_k M_{ik} J_{kj}
                    acc += jac[k * p + i] * m[k * p + j] + m[i * p + k] * jac[k * p + j];
                }
                lmi[i * p + j] = acc;
            }
        }
        let e_lmi = max_symmetric_eigenvalue(&lmi, p);
        if e_lmi > LMI_TOL {
            return fail(x, "contraction LMI violated", e_lmi, grid.len());
        }
    }
    let ratio = (l_bound / mu).sqrt();
    ContractionOutcome {
        pass: true,
        ediss: Some(EdissParams { beta: ratio.max(1.0), rho: lambda, gamma: ratio, mode: TimeMode::Continuous }),
        counterexample: None,
        points_checked: grid.len(),
    }
}

fn fail(x: &[f64], reason: &str, eig: f64, points: usize) -> ContractionOutcome {
    ContractionOutcome {
        pass: false,
        ediss: None,
        counterexample: Some(ContractionFailure {
            point: x.to_vec(),
            reason: reason.into(),
            max_eigenvalue: eig,
        }),
        points_checked: points,
    }
}

/// A system under verification: continuous field or discrete map.
#[derive(Clone)]
pub enum OracleSystem {
    Continuous(VectorField),
    Discrete(DiscreteMap),
}

impl OracleSystem {
    pub fn dim(&self) -> usize {
        match self {
            OracleSystem::Continuous(f) => f.dim(),
            OracleSystem::Discrete(m) => m.dim(),
        }
    }

    fn mode(&self) -> TimeMode {
        match self {
            OracleSystem::Continuous(_) => TimeMode::Continuous,
            OracleSystem::Discrete(_) => TimeMode::Discrete,
        }
    }
}

/// Test-signal family for the E-dISS verifier.
#[derive(Debug, Clone, Copy)]
pub enum SignalFamily {
    Zero,
    /// Mix of zero, constant, and sinusoidal signals with `||u(t)|| <= max_amplitude`.
    Bounded { max_amplitude: f64 },
}

#[derive(Clone)]
enum TestSignal {
    Zero,
    Constant(Vec<f64>),
    Sinusoid { amp: Vec<f64>, omega: f64, phase: f64 },
}

impl TestSignal {
    fn eval(&self, t: f64, dim: usize) -> Vec<f64> {
        match self {
            TestSignal::Zero => vec![0.0; dim],
            TestSignal::Constant(v) => v.clone(),
            TestSignal::Sinusoid { amp, omega, phase } => {
                let s = (omega * t + phase).sin();
                amp.iter().map(|a| a * s).collect()
            }
        }
    }

    fn draw(family: SignalFamily, dim: usize, trial: usize, rng: &mut impl Rng) -> TestSignal {
        let max_amp = match family {
            SignalFamily::Zero => return TestSignal::Zero,
            SignalFamily::Bounded { max_amplitude } => max_amplitude,
        };
        match trial % 4 {
            0 => TestSignal::Zero,
            1 => TestSignal::Constant(random_ball_vector(dim, max_amp, rng)),
            _ => TestSignal::Sinusoid {
                amp: random_ball_vector(dim, max_amp, rng),
                omega: rng.gen_range(0.2..3.0),
                phase: rng.gen_range(0.0..std::f64::consts::TAU),
            },
        }
    }
}

fn random_ball_vector(dim: usize, radius: f64, rng: &mut impl Rng) -> Vec<f64> {
    let dir: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let n = norm2(&dir);
    let scale = if n < 1e-12 { 0.0 } else { rng.gen_range(0.0..1.0) * radius / n };
    dir.iter().map(|d| d * scale).collect()
}

/// Verification geometry.
#[derive(Debug, Clone, Copy)]
pub struct VerifyOptions {
    /// Continuous-time rollout horizon.
    pub horizon: f64,
    /// Continuous-time grid step; finer than the training grid so the
    /// trapezoid convolution error stays far below the pass tolerance.
    pub dt: f64,
    /// Discrete-time step count.
    pub steps: usize,
    /// Initial-condition box half-width (box is `[-w, w]^p`).
    pub ic_halfwidth: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self { horizon: 8.0, dt: 0.005, steps: 45, ic_halfwidth: 2.0 }
    }
}

/// Report from randomized E-dISS verification.
#[derive(Debug, Clone)]
pub struct EdissReport {
    pub pass: bool,
    /// Largest observed `||x_t - y_t|| / RHS` over all trials and grid
    /// points; must stay below `1 + 1e-6`.
    pub max_ratio: f64,
    pub trials: usize,
    pub worst_trial: usize,
}

/// Checks the E-dISS inequality on random initial-condition pairs and
/// random bounded input signals. The discounted input integral uses the
/// trapezoid rule on the rollout grid (exact geometric sums in discrete
/// time).
pub fn verify_ediss(
    sys: &OracleSystem,
    p: &EdissParams,
    trials: usize,
    family: SignalFamily,
    seed: u64,
    opts: &VerifyOptions,
) -> Result<EdissReport, TheoryError> {
    assert!(trials >= 1, "need at least one trial");
    p.validate()?;
    if p.mode != sys.mode() {
        return Err(TheoryError::BadEdiss("system and constants disagree on time mode".into()));
    }
    let dim = sys.dim();
    let ratios = exec::map(&(0..trials).collect::<Vec<_>>(), |_, &trial| {
        let mut rng = crate::rng::substream(seed, trial as u64);
        let x0: Vec<f64> = (0..dim).map(|_| rng.gen_range(-opts.ic_halfwidth..opts.ic_halfwidth)).collect();
        let y0: Vec<f64> = if trial % 5 == 0 {
            x0.clone()
        } else {
            (0..dim).map(|_| rng.gen_range(-opts.ic_halfwidth..opts.ic_halfwidth)).collect()
        };
        let signal = TestSignal::draw(family, dim, trial, &mut rng);
        ediss_trial_ratio(sys, p, &x0, &y0, &signal, opts)
    });
    let (worst_trial, max_ratio) = ratios
        .iter()
        .enumerate()
        .fold((0usize, 0.0f64), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) });
    Ok(EdissReport { pass: max_ratio <= 1.0 + 1e-6, max_ratio, trials, worst_trial })
}

fn ediss_trial_ratio(
    sys: &OracleSystem,
    p: &EdissParams,
    x0: &[f64],
    y0: &[f64],
    signal: &TestSignal,
    opts: &VerifyOptions,
) -> f64 {
    let dim = x0.len();
    let init_gap: Vec<f64> = x0.iter().zip(y0).map(|(a, b)| a - b).collect();
    let init_norm = norm2(&init_gap);
    let mut max_ratio: f64 = 0.0;
    match sys {
        OracleSystem::Continuous(f) => {
            let sig = signal.clone();
            let perturbed = VectorField::new(dim, {
                let f = f.clone();
                move |t, y| {
                    let mut fy = f.eval(t, y);
                    for (v, u) in fy.iter_mut().zip(sig.eval(t, dim)) {
                        *v += u;
                    }
                    fy
                }
            });
            let x_traj = rollout(f, x0, opts.horizon, opts.dt, &[]).expect("oracle rollout");
            let y_traj = rollout(&perturbed, y0, opts.horizon, opts.dt, &[]).expect("oracle rollout");
            // Discounted input integral by composite trapezoid on a refined
            // subgrid; the refinement keeps quadrature error two orders
            // below the 1e-6 pass tolerance even for oscillatory signals.
            const SUBSTEPS: usize = 16;
            let h = opts.dt / SUBSTEPS as f64;
            let sub_decay = (-p.rho * h).exp();
            let mut integral = 0.0;
            let mut prev_norm = norm2(&signal.eval(0.0, dim));
            for k in 0..x_traj.len() {
                let t = x_traj.times[k];
                if k > 0 {
                    let base = x_traj.times[k - 1];
                    for s in 1..=SUBSTEPS {
                        let cur_norm = norm2(&signal.eval(base + s as f64 * h, dim));
                        integral = sub_decay * integral + 0.5 * h * (sub_decay * prev_norm + cur_norm);
                        prev_norm = cur_norm;
                    }
                }
                let gap: Vec<f64> =
                    x_traj.states[k].iter().zip(&y_traj.states[k]).map(|(a, b)| a - b).collect();
                let lhs = norm2(&gap);
                let rhs = p.beta * init_norm * (-p.rho * t).exp() + p.gamma * integral;
                max_ratio = max_ratio.max(ratio(lhs, rhs));
            }
        }
        OracleSystem::Discrete(m) => {
            let mut x = x0.to_vec();
            let mut y = y0.to_vec();
            let mut weighted_sum = 0.0; // sum_{k<t} rho^{t-1-k} ||u_k||
            for t in 0..=opts.steps {
                let gap: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
                let lhs = norm2(&gap);
                let rhs = p.beta * p.rho.powi(t as i32) * init_norm + p.gamma * weighted_sum;
                max_ratio = max_ratio.max(ratio(lhs, rhs));
                if t < opts.steps {
                    let u = signal.eval(t as f64, x.len());
                    weighted_sum = p.rho * weighted_sum + norm2(&u);
                    x = m.eval(&x);
                    let mut ny = m.eval(&y);
                    for (v, uv) in ny.iter_mut().zip(&u) {
                        *v += uv;
                    }
                    y = ny;
                }
            }
        }
    }
    max_ratio
}

fn ratio(lhs: f64, rhs: f64) -> f64 {
    if rhs > 1e-300 {
        lhs / rhs
    } else if lhs <= 1e-12 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Report from randomized deviation-bound verification.
#[derive(Debug, Clone)]
pub struct DeviationReport {
    pub pass: bool,
    /// Largest observed deviation / bound ratio (must stay below
    /// `1 + 1e-9`).
    pub max_ratio: f64,
    /// Smallest observed `bound - deviation` gap: how tight the bound got.
    pub min_gap: f64,
    pub trials: usize,
}

/// Empirically checks a deviation bound on an oracle system: for random
/// in-tube realizations (trial 0 is the worst-case full-budget
/// realization), the measured `sup_t ||phi_t - phi~_t||` must stay below
/// the closed-form bound. The discrete-time Lipschitz tube is checked
/// against the per-step envelope.
#[allow(clippy::too_many_arguments)]
pub fn verify_deviation_bound(
    sys: &OracleSystem,
    p: &EdissParams,
    kind: TubeKind,
    eps_u: f64,
    eps_x: f64,
    trials: usize,
    seed: u64,
    opts: &VerifyOptions,
) -> Result<DeviationReport, TheoryError> {
    assert!(trials >= 1);
    p.validate()?;
    if p.mode != sys.mode() {
        return Err(TheoryError::BadEdiss("system and constants disagree on time mode".into()));
    }
    // Surface bad preconditions before running trials.
    let probe = match p.mode {
        TimeMode::Continuous => deviation_bound_ct(kind, p, eps_u, eps_x, 1.0),
        TimeMode::Discrete => deviation_bound_dt(kind, p, eps_u, eps_x, 1.0),
    };
    if let Validity::PreconditionViolated { reason } = probe.validity {
        return Err(TheoryError::Domain(reason));
    }
    let dim = sys.dim();
    let outcomes = exec::map(&(0..trials).collect::<Vec<_>>(), |_, &trial| {
        let mut rng = crate::rng::substream(seed, trial as u64);
        let xi: Vec<f64> = (0..dim)
            .map(|_| {
                let v: f64 = rng.gen_range(0.25..2.0);
                if rng.gen_bool(0.5) {
                    v
                } else {
                    -v
                }
            })
            .collect();
        // Worst-case realization on trial 0, random sub-budget otherwise.
        let (c, u_amp) = if trial == 0 {
            (eps_x, eps_u)
        } else {
            (rng.gen_range(-eps_x..=eps_x), rng.gen_range(0.0..=eps_u))
        };
        let feedback_scale = match kind {
            TubeKind::Lipschitz | TubeKind::Combined => c,
            _ => 0.0,
        };
        let input = match kind {
            TubeKind::NormBounded | TubeKind::Combined => {
                if trial % 3 == 2 {
                    TestSignal::Sinusoid {
                        amp: random_ball_vector(dim, u_amp, &mut rng),
                        omega: rng.gen_range(0.2..3.0),
                        phase: rng.gen_range(0.0..std::f64::consts::TAU),
                    }
                } else {
                    let dir = if dim == 1 {
                        vec![u_amp]
                    } else {
                        let mut v = random_ball_vector(dim, 1.0, &mut rng);
                        let n = norm2(&v).max(1e-12);
                        v.iter_mut().for_each(|e| *e *= u_amp / n);
                        v
                    };
                    TestSignal::Constant(dir)
                }
            }
            _ => TestSignal::Zero,
        };
        deviation_trial(sys, p, kind, eps_u, eps_x, &xi, feedback_scale, &input, opts)
    });
    let mut max_ratio: f64 = 0.0;
    let mut min_gap = f64::INFINITY;
    for (r, g) in outcomes {
        max_ratio = max_ratio.max(r);
        min_gap = min_gap.min(g);
    }
    Ok(DeviationReport { pass: max_ratio <= 1.0 + VERIFY_SLACK, max_ratio, min_gap, trials })
}

#[allow(clippy::too_many_arguments)]
fn deviation_trial(
    sys: &OracleSystem,
    p: &EdissParams,
    kind: TubeKind,
    eps_u: f64,
    eps_x: f64,
    xi: &[f64],
    feedback_scale: f64,
    input: &TestSignal,
    opts: &VerifyOptions,
) -> (f64, f64) {
    let dim = xi.len();
    match sys {
        OracleSystem::Continuous(f) => {
            let bound = deviation_bound_ct(kind, p, eps_u, eps_x, norm2(xi))
                .value
                .expect("precondition pre-checked");
            let sig = input.clone();
            let perturbed = VectorField::new(dim, {
                let f = f.clone();
                move |t, x| {
                    let mut fx = f.eval(t, x);
                    for (i, v) in fx.iter_mut().enumerate() {
                        *v += feedback_scale * x[i];
                    }
                    for (v, u) in fx.iter_mut().zip(sig.eval(t, dim)) {
                        *v += u;
                    }
                    fx
                }
            });
            let nom = rollout(f, xi, opts.horizon, opts.dt, &[]).expect("oracle rollout");
            let per = rollout(&perturbed, xi, opts.horizon, opts.dt, &[]).expect("oracle rollout");
            let mut sup_dev: f64 = 0.0;
            for k in 0..nom.len() {
                let gap: Vec<f64> =
                    nom.states[k].iter().zip(&per.states[k]).map(|(a, b)| a - b).collect();
                sup_dev = sup_dev.max(norm2(&gap));
            }
            (ratio(sup_dev, bound), bound - sup_dev)
        }
        OracleSystem::Discrete(m) => {
            let mut x = xi.to_vec();
            let mut y = xi.to_vec();
            let mut max_ratio: f64 = 0.0;
            let mut min_gap = f64::INFINITY;
            let scalar_bound = deviation_bound_dt(kind, p, eps_u, eps_x, norm2(xi))
                .value
                .expect("precondition pre-checked");
            for t in 0..=opts.steps {
                let gap: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
                let dev = norm2(&gap);
                let bound_t = match kind {
                    TubeKind::Lipschitz => dt_lipschitz_envelope(p, eps_x, norm2(xi), t),
                    _ => scalar_bound,
                };
                max_ratio = max_ratio.max(ratio(dev, bound_t));
                if t >= 1 {
                    min_gap = min_gap.min(bound_t - dev);
                }
                if t < opts.steps {
                    let u = input.eval(t as f64, dim);
                    x = m.eval(&x);
                    let mut ny = m.eval(&y);
                    for (i, v) in ny.iter_mut().enumerate() {
                        *v += feedback_scale * y[i] + u[i];
                    }
                    y = ny;
                }
            }
            (max_ratio, min_gap)
        }
    }
}

/// Brute-force enumeration of the nested index sum
/// `sum_{k1=1}^{t-1} sum_{k2=1}^{k1-1} ... sum_{kj=0}^{k_{j-1}-1} 1`
/// from the discrete-time deviation derivation; equals `C(t, j)`.
pub fn nested_sum_count(t: u64, j: u64) -> Result<u64, TheoryError> {
    if !(1 <= j && t >= 2 && j < t) {
        return Err(TheoryError::Domain(format!("need 1 <= j <= t-1, got t = {t}, j = {j}")));
    }
    fn recurse(level: u64, j: u64, upper: u64) -> u64 {
        if level == j {
            // innermost index ranges over 0..=upper-1
            return upper;
        }
        (1..upper).map(|k| recurse(level + 1, j, k)).sum()
    }
    Ok(recurse(1, j, t))
}

/// Exact binomial coefficient for the identity checks.
pub fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc as u64
}

/// Maximizer and maximum of the decay-weighted ramp:
/// continuous time `max_t t e^{-rho t} = 1/(rho e)` at `t = 1/rho`;
/// discrete time (continuous relaxation, as used by the combined-tube
/// derivation) `max_t t rho^{t-1} = 1/(e rho ln(1/rho))` at
/// `t = 1/ln(1/rho)`.
pub fn peak_t_exp(rho: f64, mode: TimeMode) -> Result<(f64, f64), TheoryError> {
    match mode {
        TimeMode::Continuous => {
            if !(rho > 0.0) {
                return Err(TheoryError::Domain("rho must be positive".into()));
            }
            Ok((1.0 / rho, 1.0 / (rho * E)))
        }
        TimeMode::Discrete => {
            if !(rho > 0.0 && rho < 1.0) {
                return Err(TheoryError::Domain("discrete-time rho must lie in (0, 1)".into()));
            }
            let log_inv = (1.0 / rho).ln();
            Ok((1.0 / log_inv, 1.0 / (E * rho * log_inv)))
        }
    }
}

/// Empirical regularity constants for a family of certificates over a
/// compact grid `s_grid`, plus `B_x` over the initial-condition grid.
/// Lipschitz constants come from finite-difference quotients over grid
/// pairs, so every value is a lower bound on the true supremum.
/// `eta` enters only the violation-magnitude proxy `b_htilde`.
pub fn estimate_regularity_constants(
    certs: &[&dyn Certificate],
    f: &VectorField,
    s_grid: &[Vec<f64>],
    x_grid: &[Vec<f64>],
    eta: f64,
) -> RegularityConstants {
    assert!(!certs.is_empty() && !s_grid.is_empty() && !x_grid.is_empty());
    let mut out = RegularityConstants {
        l_v: 0.0,
        l_grad_v: 0.0,
        b_v: 0.0,
        b_grad_v: 0.0,
        b_x: 0.0,
        b_htilde: 0.0,
    };
    for xi in x_grid {
        out.b_x = out.b_x.max(norm2(xi));
    }
    for cert in certs {
        // Per-point values first, then pairwise quotients.
        let pointwise: Vec<(f64, f64, f64)> = exec::map(s_grid, |_, x| {
            let (v, g) = cert.value_and_grad(x);
            let gf = dot(&g, &f.eval(0.0, x));
            (v, norm2(&g), gf)
        });
        for (v, gn, gf) in &pointwise {
            out.b_v = out.b_v.max(v.abs());
            out.b_grad_v = out.b_grad_v.max(*gn);
            out.b_htilde = out.b_htilde.max((gf + eta * v).abs());
        }
        for i in 0..s_grid.len() {
            for jdx in (i + 1)..s_grid.len() {
                let gap: Vec<f64> =
                    s_grid[i].iter().zip(&s_grid[jdx]).map(|(a, b)| a - b).collect();
                let dist = norm2(&gap);
                if dist < 1e-12 {
                    continue;
                }
                let (vi, _, gfi) = pointwise[i];
                let (vj, _, gfj) = pointwise[jdx];
                out.l_v = out.l_v.max((vi - vj).abs() / dist);
                out.l_grad_v = out.l_grad_v.max((gfi - gfj).abs() / dist);
            }
        }
    }
    out
}

/// Order-of-magnitude nominal Rademacher complexity for a `k`-parameter
/// Lipschitz class: `C sqrt(k/n)`. A proxy, not a certified bound.
pub fn parametric_rademacher_estimate(k: usize, c: f64, n: usize) -> f64 {
    assert!(k >= 1 && n >= 1 && c > 0.0);
    c * (k as f64 / n as f64).sqrt()
}

/// Uniform grid over a box, `counts[i]` points per dimension.
pub fn uniform_grid(lo: &[f64], hi: &[f64], counts: &[usize]) -> Vec<Vec<f64>> {
    assert_eq!(lo.len(), hi.len());
    assert_eq!(lo.len(), counts.len());
    let dim = lo.len();
    let mut pts = vec![Vec::new()];
    for d in 0..dim {
        let n = counts[d].max(1);
        let mut next = Vec::with_capacity(pts.len() * n);
        for base in &pts {
            for i in 0..n {
                let frac = if n == 1 { 0.5 } else { i as f64 / (n - 1) as f64 };
                let mut p = base.clone();
                p.push(lo[d] + (hi[d] - lo[d]) * frac);
                next.push(p);
            }
        }
        pts = next;
    }
    pts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversary::TubeKind;
    use crate::sim::{scalar_decay_field, scalar_decay_map};

    fn unit_ct() -> EdissParams {
        EdissParams::continuous(1.0, 1.0, 1.0).unwrap()
    }

    fn consts_ones() -> RegularityConstants {
        RegularityConstants { l_v: 1.0, l_grad_v: 1.0, b_v: 1.0, b_grad_v: 1.0, b_x: 1.0, b_htilde: 1.0 }
    }

    #[test]
    fn ct_deviation_substitutions() {
        let b = deviation_bound_ct(TubeKind::NormBounded, &unit_ct(), 0.1, 0.0, 1.0);
        assert!((b.value.unwrap() - 0.1).abs() < 1e-15);

        let p = EdissParams::continuous(1.0, 2.0, 1.0).unwrap();
        let b = deviation_bound_ct(TubeKind::Lipschitz, &p, 0.0, 1.0, 1.0);
        assert!((b.value.unwrap() - 1.0 / E).abs() < 1e-15);

        let b = deviation_bound_ct(TubeKind::Lipschitz, &unit_ct(), 0.0, 1.0, 1.0);
        assert!(!b.is_ok());
    }

    #[test]
    fn ct_combined_deviation_formula() {
        // (gamma eps_u / rho + gamma eps_x / rho * beta e^-1 ||xi||)/(1 - a)
        let p = EdissParams::continuous(1.5, 2.0, 1.0).unwrap();
        let b = deviation_bound_ct(TubeKind::Combined, &p, 0.2, 0.5, 2.0).value.unwrap();
        let a = 0.5 / 2.0;
        let expect = (0.2 / 2.0 + 0.5 / 2.0 * 1.5 * 2.0 / E) / (1.0 - a);
        assert!((b - expect).abs() < 1e-15);
    }

    #[test]
    fn ct_rademacher_substitutions() {
        let b = rademacher_additive_ct(TubeKind::NormBounded, &consts_ones(), &unit_ct(), 0.1, 0.0, 0.0, 0.4, 100);
        assert!((b.value.unwrap() - 0.024).abs() < 1e-15);

        let b = rademacher_additive_ct(TubeKind::NormBounded, &consts_ones(), &unit_ct(), 0.0, 0.0, 0.0, 0.4, 100);
        assert_eq!(b.value.unwrap(), 0.0);

        let b = rademacher_additive_ct(TubeKind::NormBounded, &consts_ones(), &unit_ct(), 0.0, 0.0, 0.5, 0.4, 4);
        assert!((b.value.unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn ct_lipschitz_additive_vanishes_with_budget() {
        let b = rademacher_additive_ct(
            TubeKind::Lipschitz,
            &consts_ones(),
            &unit_ct(),
            0.0,
            1e-8,
            0.0,
            1.0,
            1,
        );
        assert!(b.value.unwrap() < 1e-6);
    }

    #[test]
    fn dt_rademacher_substitutions() {
        let p = EdissParams::discrete(1.0, 0.5, 1.0).unwrap();
        let b = rademacher_additive_dt(TubeKind::NormBounded, &consts_ones(), &p, 0.1, 0.0, 0.0, 0.9, 100);
        assert!((b.value.unwrap() - 0.0362).abs() < 1e-15);

        let c = RegularityConstants { b_x: 2.0, ..consts_ones() };
        let b = rademacher_additive_dt(TubeKind::Lipschitz, &c, &p, 0.0, 0.2, 0.0, 0.9, 1);
        assert!((b.value.unwrap() - 3.02).abs() < 1e-12);

        let p_tight = EdissParams::discrete(1.0, 0.9, 1.0).unwrap();
        let b = rademacher_additive_dt(TubeKind::Lipschitz, &c, &p_tight, 0.0, 0.2, 0.0, 0.9, 1);
        assert!(!b.is_ok());
    }

    #[test]
    fn precondition_boundaries_are_exact() {
        // CT: gamma * eps_x == rho must be rejected.
        let b = deviation_bound_ct(TubeKind::Lipschitz, &unit_ct(), 0.0, 1.0, 1.0);
        assert!(matches!(b.validity, Validity::PreconditionViolated { .. }));
        // DT: rho + gamma * eps_x == 1 must be rejected.
        let p = EdissParams::discrete(1.0, 0.5, 1.0).unwrap();
        let b = deviation_bound_dt(TubeKind::Lipschitz, &p, 0.0, 0.5, 1.0);
        assert!(matches!(b.validity, Validity::PreconditionViolated { .. }));
        let b = rademacher_additive_dt(TubeKind::Combined, &consts_ones(), &p, 0.1, 0.5, 0.0, 0.9, 10);
        assert!(!b.is_ok());
    }

    #[test]
    fn gen_bound_substitution_and_domain() {
        let v = gen_bound(0.0, 0.1, 1.0, 100, 0.05, 1.0).unwrap();
        let expect = ((10.0f64).ln() / 0.05).ln() / 100.0;
        assert!((v - expect).abs() < 1e-15);
        assert!((v - 0.03830).abs() < 5e-6);

        assert!(gen_bound(0.0, 0.1, 1.0, 100, 0.05, 0.0).is_err());
        // doubling n halves the Rn = 0 value exactly
        let v200 = gen_bound(0.0, 0.1, 1.0, 200, 0.05, 1.0).unwrap();
        assert_eq!(v200, v / 2.0);
        // nested log domain: B_h / tau must exceed e
        assert!(gen_bound(0.0, 0.5, 1.0, 100, 0.05, 1.0).is_err());
    }

    #[test]
    fn gen_bound_composition_monotonicity() {
        for rn in [0.0, 0.05, 0.3] {
            for add in [0.0, 0.01, 0.2] {
                let base = gen_bound(rn, 0.1, 1.0, 50, 0.05, 1.0).unwrap();
                let bumped = gen_bound(rn + add, 0.1, 1.0, 50, 0.05, 1.0).unwrap();
                assert!(bumped >= base);
            }
        }
    }

    #[test]
    fn lipschitz_bound_clauses() {
        assert_eq!(lipschitz_bound_htilde(2.0, 0.5, TimeMode::Continuous), 2.5);
        assert_eq!(lipschitz_bound_htilde(2.0, 123.0, TimeMode::Discrete), 4.0);
        assert_eq!(lipschitz_bound_htilde(0.0, 0.0, TimeMode::Continuous), 0.0);
    }

    #[test]
    fn contraction_scalar_cases() {
        let lambda = 0.7;
        let f = scalar_decay_field(lambda);
        let grid: Vec<Vec<f64>> = (-5..=5).map(|i| vec![i as f64 * 0.4]).collect();
        let out = check_contraction(&f, |_x| vec![1.0], lambda, 1.0, 1.0, &grid);
        assert!(out.pass);
        let e = out.ediss.unwrap();
        assert_eq!((e.beta, e.rho, e.gamma), (1.0, lambda, 1.0));

        let unstable = VectorField::new(1, |_t, x| vec![x[0]]).with_jacobian(|_| vec![1.0]);
        let out = check_contraction(&unstable, |_x| vec![1.0], 0.1, 1.0, 1.0, &grid);
        assert!(!out.pass);
        assert!(out.counterexample.is_some());
    }

    #[test]
    fn contraction_fails_for_pendulum_with_identity_metric() {
        let f = crate::sim::pendulum_field(crate::sim::PendulumParams::default());
        let grid = uniform_grid(&[-2.0, -2.0], &[2.0, 2.0], &[11, 11]);
        let out = check_contraction(&f, |_x| vec![1.0, 0.0, 0.0, 1.0], 0.1, 1.0, 1.0, &grid);
        assert!(!out.pass, "identity metric cannot contract the pendulum");
    }

    #[test]
    fn ediss_verifies_scalar_decay_and_rejects_overclaim() {
        let opts = VerifyOptions { horizon: 6.0, ..VerifyOptions::default() };
        for rho in [0.5, 1.0, 2.0] {
            let sys = OracleSystem::Continuous(scalar_decay_field(rho));
            let good = EdissParams::continuous(1.0, rho, 1.0).unwrap();
            let rep = verify_ediss(&sys, &good, 50, SignalFamily::Bounded { max_amplitude: 0.5 }, 3, &opts).unwrap();
            assert!(rep.pass, "rho = {rho}: max ratio {}", rep.max_ratio);

            let over = EdissParams::continuous(1.0, 2.0 * rho, 1.0).unwrap();
            let rep = verify_ediss(&sys, &over, 50, SignalFamily::Bounded { max_amplitude: 0.5 }, 3, &opts).unwrap();
            assert!(!rep.pass, "overclaimed decay must fail");
        }
    }

    #[test]
    fn ediss_equal_initial_conditions_zero_signal_trivially_pass() {
        let sys = OracleSystem::Continuous(scalar_decay_field(1.0));
        let p = unit_ct();
        let rep = verify_ediss(&sys, &p, 5, SignalFamily::Zero, 1, &VerifyOptions::default()).unwrap();
        assert!(rep.pass);
        assert!(rep.max_ratio <= 1.0 + 1e-9);
    }

    #[test]
    fn ediss_discrete_map_verifies() {
        let sys = OracleSystem::Discrete(scalar_decay_map(0.8));
        let p = EdissParams::discrete(1.0, 0.8, 1.0).unwrap();
        let rep = verify_ediss(&sys, &p, 100, SignalFamily::Bounded { max_amplitude: 0.3 }, 9, &VerifyOptions::default()).unwrap();
        assert!(rep.pass, "max ratio {}", rep.max_ratio);
        let over = EdissParams::discrete(1.0, 0.4, 1.0).unwrap();
        let rep = verify_ediss(&sys, &over, 100, SignalFamily::Bounded { max_amplitude: 0.3 }, 9, &VerifyOptions::default()).unwrap();
        assert!(!rep.pass);
    }

    #[test]
    fn deviation_verifier_ct_norm_bounded_tight_case() {
        // Constant delta = 0.1 on x' = -x: deviation 0.1(1 - e^{-t}) <= 0.1.
        let sys = OracleSystem::Continuous(scalar_decay_field(1.0));
        let rep = verify_deviation_bound(&sys, &unit_ct(), TubeKind::NormBounded, 0.1, 0.0, 20, 4, &VerifyOptions::default()).unwrap();
        assert!(rep.pass, "max ratio {}", rep.max_ratio);
        // sup deviation approaches the bound as t grows
        assert!(rep.min_gap < 0.1 * 0.01, "gap {}", rep.min_gap);
    }

    #[test]
    fn deviation_verifier_dt_lipschitz_is_tight() {
        let sys = OracleSystem::Discrete(scalar_decay_map(0.5));
        let p = EdissParams::discrete(1.0, 0.5, 1.0).unwrap();
        let rep = verify_deviation_bound(&sys, &p, TubeKind::Lipschitz, 0.0, 0.1, 50, 6, &VerifyOptions::default()).unwrap();
        assert!(rep.pass, "max ratio {}", rep.max_ratio);
        assert!(rep.min_gap <= 1e-9, "bound should be tight, gap {}", rep.min_gap);
    }

    #[test]
    fn deviation_verifier_zero_adversary() {
        let sys = OracleSystem::Continuous(scalar_decay_field(1.0));
        let rep = verify_deviation_bound(&sys, &unit_ct(), TubeKind::NormBounded, 0.0, 0.0, 5, 8, &VerifyOptions::default()).unwrap();
        assert!(rep.pass);
        assert!(rep.max_ratio == 0.0);
    }

    #[test]
    fn deviation_verifier_rejects_destabilizing_budget() {
        let sys = OracleSystem::Continuous(scalar_decay_field(1.0));
        let err = verify_deviation_bound(&sys, &unit_ct(), TubeKind::Lipschitz, 0.0, 1.0, 5, 8, &VerifyOptions::default());
        assert!(err.is_err());
    }

    #[test]
    fn nested_sum_hand_cases() {
        assert_eq!(nested_sum_count(5, 2).unwrap(), 10);
        assert_eq!(nested_sum_count(3, 1).unwrap(), 3);
        assert_eq!(nested_sum_count(2, 1).unwrap(), 2);
        assert!(nested_sum_count(3, 3).is_err());
        assert!(nested_sum_count(1, 1).is_err());
    }

    #[test]
    fn nested_sum_equals_binomial_small_range() {
        for t in 2..=10u64 {
            for j in 1..t {
                assert_eq!(nested_sum_count(t, j).unwrap(), binomial(t, j), "t={t} j={j}");
            }
        }
    }

    #[test]
    fn peak_identities() {
        let (t, v) = peak_t_exp(1.0, TimeMode::Continuous).unwrap();
        assert!((t - 1.0).abs() < 1e-15 && (v - 1.0 / E).abs() < 1e-15);
        let (t, v) = peak_t_exp(2.0, TimeMode::Continuous).unwrap();
        assert!((t - 0.5).abs() < 1e-15 && (v - 1.0 / (2.0 * E)).abs() < 1e-15);
        let (_, v) = peak_t_exp(1.0 / E, TimeMode::Discrete).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
        assert!(peak_t_exp(1.0, TimeMode::Discrete).is_err());
    }

    #[test]
    fn regularity_estimates_for_quadratic_on_unit_ball() {
        let cert = crate::certificate::QuadraticCertificate::new(2);
        let f = crate::sim::linearized_pendulum_field(crate::sim::PendulumParams::default());
        let full = uniform_grid(&[-1.0, -1.0], &[1.0, 1.0], &[41, 41]);
        let ball: Vec<Vec<f64>> = full.into_iter().filter(|x| norm2(x) <= 1.0).collect();
        let corners = vec![vec![2.0, 2.0], vec![-2.0, 2.0], vec![2.0, -2.0], vec![-2.0, -2.0]];
        let c = estimate_regularity_constants(&[&cert], &f, &ball, &corners, 0.4);
        assert!((c.b_v - 1.0).abs() / 1.0 < 0.05, "b_v = {}", c.b_v);
        assert!((c.b_grad_v - 2.0).abs() / 2.0 < 0.05, "b_grad_v = {}", c.b_grad_v);
        assert!((c.l_v - 2.0).abs() / 2.0 < 0.05, "l_v = {}", c.l_v);
        assert!((c.b_x - 2.0 * 2.0f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn regularity_single_point_grid_gives_zero_lipschitz() {
        let cert = crate::certificate::QuadraticCertificate::new(1);
        let f = scalar_decay_field(1.0);
        let c = estimate_regularity_constants(&[&cert], &f, &[vec![0.5]], &[vec![0.5]], 0.4);
        assert_eq!(c.l_v, 0.0);
        assert_eq!(c.l_grad_v, 0.0);
    }

    #[test]
    fn parametric_estimate_values() {
        assert!((parametric_rademacher_estimate(648, 1.0, 648) - 1.0).abs() < 1e-15);
        assert!((parametric_rademacher_estimate(4, 2.0, 100) - 0.4).abs() < 1e-15);
        let a = parametric_rademacher_estimate(1, 1.0, 100);
        let b = parametric_rademacher_estimate(1, 1.0, 400);
        assert!((a - 0.1).abs() < 1e-15 && (b - 0.05).abs() < 1e-15);
    }

    #[test]
    fn rademacher_monotone_in_budgets_and_n() {
        let c = consts_ones();
        let p = unit_ct();
        let base = rademacher_additive_ct(TubeKind::Combined, &c, &p, 0.1, 0.2, 0.1, 0.4, 100).value.unwrap();
        for (du, dx, dnu) in [(0.05, 0.0, 0.0), (0.0, 0.05, 0.0), (0.0, 0.0, 0.05)] {
            let bumped = rademacher_additive_ct(TubeKind::Combined, &c, &p, 0.1 + du, 0.2 + dx, 0.1 + dnu, 0.4, 100)
                .value
                .unwrap();
            assert!(bumped >= base);
        }
        let more_data = rademacher_additive_ct(TubeKind::Combined, &c, &p, 0.1, 0.2, 0.1, 0.4, 400).value.unwrap();
        assert_eq!(more_data, base / 2.0);
    }
}
