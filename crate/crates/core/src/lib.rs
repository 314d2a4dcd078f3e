//! Learning and evaluating adversarially robust Lyapunov stability
//! certificates for nonlinear dynamical systems.
//!
//! The crate covers the full pipeline:
//!
//! - [`sim`]: dynamical systems (damped pendulum family, scalar oracle
//!   systems) and fixed-step RK4 trajectory generation;
//! - [`adversary`]: norm-bounded / Lipschitz / combined perturbation tubes,
//!   greedy certificate-directed disturbances, perturbed rollouts;
//! - [`certnet`]: the certificate class `V(x) = x^T (L(x)^T L(x) + I) x`
//!   with a small tanh MLP producing `L(x)`, exact hand-derived gradients in
//!   both the state and the parameters, and Adam with cosine decay;
//! - [`trainer`]: nominal training and alternating adversarial training;
//! - [`violation`]: decrease-condition scans, feasibility margins,
//!   satisfaction-rate sweeps, Monte Carlo generalization-error estimates;
//! - [`theory`]: incremental-stability deviation bounds, Rademacher
//!   complexity additive terms (continuous and discrete time), the
//!   generalization bound, contraction checks, and randomized verifiers for
//!   all of them.
//!
//! Batch work (rollouts, batch gradients, Monte Carlo trials) runs on rayon
//! when the default `parallel` feature is enabled and falls back to plain
//! loops otherwise; either way results are bit-identical thanks to fixed
//! chunking and pairwise tree reductions.

// Index loops mirror the written-out linear algebra; `!(x > 0)` guards
// intentionally reject NaN parameters.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod adversary;
pub mod certificate;
pub mod certnet;
pub mod exec;
pub mod linalg;
pub mod report;
pub mod rng;
pub mod sim;
pub mod theory;
pub mod trainer;
pub mod violation;

pub use certificate::{Certificate, QuadraticCertificate};
