//! Certificate training: nominal minimization and the alternating
//! adversarial scheme.
//!
//! Nominal training minimizes the hinge surrogate over `(x, x')` samples
//! pooled from rollouts. Adversarial training alternates `m` times between
//! minimizing on the current trajectory set and re-rolling every trajectory
//! under the greedy certificate-directed disturbance built from the current
//! certificate; the final minimization yields the robust certificate. Both
//! paths share one optimizer whose cosine schedule spans the whole planned
//! step budget, and Adam moments are warm-started across alternations.
//!
//! Everything is deterministic given the config seed: epoch shuffles come
//! from a dedicated substream and batch gradients use fixed-tree
//! reductions.

use std::sync::Arc;

use rand::seq::SliceRandom;
use thiserror::Error;

use crate::adversary::{greedy_disturbance, perturbed_rollout_many, AdversaryError, AdversarySpec, TubeKind};
use crate::certnet::{
    adam_step, surrogate_loss, surrogate_loss_grad, CertificateParams, CertnetError,
    OptimizerState,
};
use crate::linalg::dot;
use crate::sim::{rollout_many, SimError, Trajectory, VectorField};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("trajectories do not share a grid shape")]
    ShapeMismatch,
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("loss became non-finite at epoch {epoch}, step {step}; last finite parameters attached")]
    NonFiniteLoss { epoch: usize, step: usize, last: Box<CertificateParams> },
    #[error("adversary destabilized the system during re-rollout of phase {phase}: {source}")]
    Diverged { phase: usize, source: AdversaryError },
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Certnet(#[from] CertnetError),
}

/// Flat training set of `(state, state-derivative)` pairs.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub dim: usize,
    pub xs: Vec<f64>,
    pub dxs: Vec<f64>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.xs.len().checked_div(self.dim).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn sample(&self, i: usize) -> (&[f64], &[f64]) {
        let d = self.dim;
        (&self.xs[i * d..(i + 1) * d], &self.dxs[i * d..(i + 1) * d])
    }

    /// Canonical byte serialization for manifest content hashes.
    pub fn content_hash(&self) -> String {
        crate::report::content_hash(&crate::report::dataset_bytes(self.dim, &self.xs, &self.dxs))
    }
}

/// Concatenates `(x, x')` pairs from trajectories sharing a grid shape, in
/// input order.
pub fn build_dataset(trajs: &[Trajectory]) -> Result<Dataset, TrainError> {
    let Some(first) = trajs.first() else {
        return Ok(Dataset::default());
    };
    let dim = first.dim();
    let len = first.len();
    let mut ds = Dataset {
        dim,
        xs: Vec::with_capacity(trajs.len() * len * dim),
        dxs: Vec::with_capacity(trajs.len() * len * dim),
    };
    for traj in trajs {
        if traj.dim() != dim || traj.len() != len {
            return Err(TrainError::ShapeMismatch);
        }
        for k in 0..traj.len() {
            ds.xs.extend_from_slice(&traj.states[k]);
            ds.dxs.extend_from_slice(&traj.derivs[k]);
        }
    }
    Ok(ds)
}

/// Training configuration. `epochs` drives nominal training; adversarial
/// training runs `alternations` phases of `inner_epochs` each.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TrainConfig {
    pub eta: f64,
    pub lambda: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub base_lr: f64,
    pub alternations: usize,
    pub inner_epochs: usize,
    pub adversary: AdversarySpec,
    pub horizon: f64,
    pub dt: f64,
    pub n_train: usize,
    pub ic_lo: Vec<f64>,
    pub ic_hi: Vec<f64>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            eta: 0.4,
            lambda: 0.1,
            epochs: 500,
            batch_size: 1000,
            base_lr: 0.005,
            alternations: 5,
            inner_epochs: 100,
            adversary: AdversarySpec::lipschitz(0.1, crate::adversary::Strategy::GreedyCertificate),
            horizon: 8.0,
            dt: 0.05,
            n_train: 1000,
            ic_lo: vec![-2.0, -2.0],
            ic_hi: vec![2.0, 2.0],
            seed: 0,
        }
    }
}

impl TrainConfig {
    fn validate_common(&self) -> Result<(), TrainError> {
        if self.eta < 0.0 || self.lambda < 0.0 {
            return Err(TrainError::InvalidConfig("eta and lambda must be non-negative".into()));
        }
        if self.batch_size == 0 {
            return Err(TrainError::InvalidConfig("batch_size must be positive".into()));
        }
        Ok(())
    }

    /// Samples retained per trajectory when pooling datasets: the rollout
    /// grid minus its final sample, i.e. samples on `[0, horizon)`.
    pub fn retained_samples(&self) -> Result<usize, TrainError> {
        Ok(crate::sim::step_count(self.horizon, self.dt)?)
    }
}

/// One inner-minimization phase of adversarial training (nominal training
/// is a single phase). Losses are full-dataset surrogate values at the
/// phase boundary.
#[derive(Debug, Clone, serde::Serialize)]
pub struct PhaseRecord {
    pub phase: usize,
    pub start_epoch: usize,
    pub end_epoch: usize,
    pub loss_start: f64,
    pub loss_end: f64,
}

/// Training result with per-epoch logs and instrumentation counters.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: CertificateParams,
    /// `(epoch, summed hinge loss over the epoch + final regularizer, lr)`.
    pub loss_log: Vec<(usize, f64, f64)>,
    pub phases: Vec<PhaseRecord>,
    pub minimizations: usize,
    pub rerollouts: usize,
    /// Content hash of the initial training dataset.
    pub dataset_hash: String,
    /// Epoch whose iterate was returned (feasibility-first selection).
    pub selected_epoch: usize,
    /// Full-dataset hinge residual of the returned iterate; zero means the
    /// returned certificate satisfies the decrease condition on every
    /// training sample.
    pub selected_hinge: f64,
}

/// Feasibility-first iterate tracking. Adam rides the feasibility boundary
/// (the regularizer erodes slack until hinge terms reactivate, and the
/// cosine tail freezes whichever side of the boundary the last oscillation
/// landed on), so the returned certificate is the iterate that best solves
/// the feasibility program: smallest full-dataset hinge, ties broken by
/// smaller parameter norm.
#[derive(Debug, Clone)]
struct Incumbent {
    params: CertificateParams,
    hinge: f64,
    reg: f64,
    epoch: usize,
}

impl Incumbent {
    fn better_than(&self, other: &Incumbent) -> bool {
        (self.hinge, self.reg) < (other.hinge, other.reg)
    }
}

struct Minimizer {
    params: CertificateParams,
    theta: Vec<f64>,
    opt: OptimizerState,
    shuffle_rng: rand_chacha::ChaCha8Rng,
    // Persisted across phases so a phased run shuffles exactly like an
    // uninterrupted one.
    order: Vec<usize>,
    epoch: usize,
    loss_log: Vec<(usize, f64, f64)>,
    best: Option<Incumbent>,
}

impl Minimizer {
    fn new(init: &CertificateParams, config: &TrainConfig, total_steps: usize) -> Self {
        Self {
            params: init.clone(),
            theta: init.flatten(),
            opt: OptimizerState::new(init.arch.param_count(), config.base_lr, total_steps.max(1)),
            shuffle_rng: crate::rng::substream(config.seed, 0xA),
            order: Vec::new(),
            epoch: 0,
            loss_log: Vec::new(),
            best: None,
        }
    }

    fn full_loss(&self, dataset: &Dataset, config: &TrainConfig) -> f64 {
        full_hinge(&self.params, dataset, config) + config.lambda * dot(&self.theta, &self.theta)
    }

    fn track_incumbent(&mut self, dataset: &Dataset, config: &TrainConfig) {
        let hinge = full_hinge(&self.params, dataset, config);
        let reg = config.lambda * dot(&self.theta, &self.theta);
        let candidate =
            Incumbent { params: self.params.clone(), hinge, reg, epoch: self.epoch };
        if self.best.as_ref().is_none_or(|b| candidate.better_than(b)) {
            self.best = Some(candidate);
        }
    }

    /// Rescores the incumbent against a refreshed dataset; its feasibility
    /// claim must hold for the data it competes on.
    fn rescore_incumbent(&mut self, dataset: &Dataset, config: &TrainConfig) {
        if let Some(best) = &mut self.best {
            best.hinge = full_hinge(&best.params, dataset, config);
        }
    }

    fn selected(&self) -> Incumbent {
        self.best.clone().expect("at least one epoch ran")
    }

    fn run_epochs(
        &mut self,
        dataset: &Dataset,
        epochs: usize,
        config: &TrainConfig,
    ) -> Result<(), TrainError> {
        let n = dataset.len();
        if self.order.len() != n {
            self.order = (0..n).collect();
        }
        let mut order = std::mem::take(&mut self.order);
        for _ in 0..epochs {
            self.epoch += 1;
            order.shuffle(&mut self.shuffle_rng);
            let mut hinge_sum = 0.0;
            let mut last_lr = self.opt.learning_rate();
            for batch in order.chunks(config.batch_size) {
                let reg = config.lambda * dot(&self.theta, &self.theta);
                let (loss, grad) = surrogate_loss_grad(
                    &self.params,
                    dataset.dim,
                    &dataset.xs,
                    &dataset.dxs,
                    batch,
                    config.eta,
                    config.lambda,
                );
                if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                    return Err(TrainError::NonFiniteLoss {
                        epoch: self.epoch,
                        step: self.opt.step,
                        last: Box::new(self.params.clone()),
                    });
                }
                hinge_sum += loss - reg;
                last_lr = self.opt.learning_rate();
                let snapshot = self.params.clone();
                adam_step(&mut self.opt, &mut self.theta, &grad);
                if !self.theta.iter().all(|v| v.is_finite()) {
                    return Err(TrainError::NonFiniteLoss {
                        epoch: self.epoch,
                        step: self.opt.step,
                        last: Box::new(snapshot),
                    });
                }
                self.params.assign_flat(&self.theta)?;
            }
            let reg_final = config.lambda * dot(&self.theta, &self.theta);
            self.loss_log.push((self.epoch, hinge_sum + reg_final, last_lr));
            self.track_incumbent(dataset, config);
        }
        self.order = order;
        Ok(())
    }
}

fn full_hinge(params: &CertificateParams, dataset: &Dataset, config: &TrainConfig) -> f64 {
    let indices: Vec<usize> = (0..dataset.len()).collect();
    surrogate_loss(params, dataset.dim, &dataset.xs, &dataset.dxs, &indices, config.eta, 0.0)
}

/// Minimizes the surrogate loss over a fixed dataset for `config.epochs`
/// epochs of Adam with a cosine schedule spanning the full run.
pub fn train_nominal(
    dataset: &Dataset,
    config: &TrainConfig,
    init: &CertificateParams,
) -> Result<TrainOutcome, TrainError> {
    config.validate_common()?;
    if config.epochs == 0 {
        return Ok(TrainOutcome {
            params: init.clone(),
            loss_log: Vec::new(),
            phases: Vec::new(),
            minimizations: 0,
            rerollouts: 0,
            dataset_hash: dataset.content_hash(),
            selected_epoch: 0,
            selected_hinge: if dataset.is_empty() {
                0.0
            } else {
                full_hinge(init, dataset, config)
            },
        });
    }
    if dataset.is_empty() {
        return Err(TrainError::InvalidConfig("dataset must be non-empty".into()));
    }
    if config.batch_size > dataset.len() {
        return Err(TrainError::InvalidConfig(format!(
            "batch_size {} exceeds dataset size {}",
            config.batch_size,
            dataset.len()
        )));
    }
    let steps_per_epoch = dataset.len().div_ceil(config.batch_size);
    let mut min = Minimizer::new(init, config, config.epochs * steps_per_epoch);
    let loss_start = min.full_loss(dataset, config);
    min.run_epochs(dataset, config.epochs, config)?;
    let loss_end = min.full_loss(dataset, config);
    let chosen = min.selected();
    Ok(TrainOutcome {
        params: chosen.params,
        loss_log: min.loss_log,
        phases: vec![PhaseRecord { phase: 0, start_epoch: 1, end_epoch: config.epochs, loss_start, loss_end }],
        minimizations: 1,
        rerollouts: 0,
        dataset_hash: dataset.content_hash(),
        selected_epoch: chosen.epoch,
        selected_hinge: chosen.hinge,
    })
}

/// Alternating adversarial training:
///
/// 1. roll nominal trajectories from the given initial conditions;
/// 2. `alternations - 1` times: minimize the surrogate on the current
///    trajectory set, then re-roll every trajectory from its original
///    initial condition under `x' = f(x) + greedy delta` built from the
///    current certificate;
/// 3. one final minimization.
///
/// Exactly `alternations` minimizations and `alternations - 1` re-rollouts
/// occur. A re-rollout diverging to non-finite states aborts with a
/// diagnostic: that means the adversary budget destabilizes the system.
pub fn train_adversarial(
    field: &VectorField,
    ics: &[Vec<f64>],
    config: &TrainConfig,
    init: &CertificateParams,
    wrap_dims: &[usize],
) -> Result<TrainOutcome, TrainError> {
    config.validate_common()?;
    if config.alternations < 1 {
        return Err(TrainError::InvalidConfig("alternations must be at least 1".into()));
    }
    if config.inner_epochs < 1 {
        return Err(TrainError::InvalidConfig("inner_epochs must be at least 1".into()));
    }
    if !matches!(
        config.adversary.kind,
        TubeKind::Lipschitz | TubeKind::NormBounded | TubeKind::Combined
    ) {
        return Err(TrainError::InvalidConfig(
            "adversarial training needs an active tube kind".into(),
        ));
    }
    if ics.is_empty() {
        return Err(TrainError::InvalidConfig("need at least one initial condition".into()));
    }
    let retained = config.retained_samples()?;
    let trajs = rollout_many(field, ics, config.horizon, config.dt, wrap_dims)?;
    let mut dataset = pooled(&trajs, retained)?;
    let dataset_hash = dataset.content_hash();
    if config.batch_size > dataset.len() {
        return Err(TrainError::InvalidConfig(format!(
            "batch_size {} exceeds dataset size {}",
            config.batch_size,
            dataset.len()
        )));
    }
    let steps_per_epoch = dataset.len().div_ceil(config.batch_size);
    let m = config.alternations;
    let total_steps = m * config.inner_epochs * steps_per_epoch;
    let mut min = Minimizer::new(init, config, total_steps);
    let mut phases = Vec::with_capacity(m);
    let mut rerollouts = 0usize;
    for phase in 0..m {
        let start_epoch = min.epoch + 1;
        let loss_start = min.full_loss(&dataset, config);
        min.run_epochs(&dataset, config.inner_epochs, config)?;
        let loss_end = min.full_loss(&dataset, config);
        phases.push(PhaseRecord { phase, start_epoch, end_epoch: min.epoch, loss_start, loss_end });
        if phase < m - 1 {
            // Re-roll with the certificate this phase would return.
            let cert: Arc<dyn crate::certificate::Certificate> =
                Arc::new(min.selected().params);
            let disturbance = greedy_disturbance(cert, &config.adversary);
            let rerolled = perturbed_rollout_many(
                field,
                &disturbance,
                &config.adversary,
                ics,
                config.horizon,
                config.dt,
                wrap_dims,
            )
            .map_err(|source| TrainError::Diverged { phase, source })?;
            dataset = pooled(&rerolled, retained)?;
            min.rescore_incumbent(&dataset, config);
            rerollouts += 1;
        }
    }
    let chosen = min.selected();
    Ok(TrainOutcome {
        params: chosen.params,
        loss_log: min.loss_log,
        phases,
        minimizations: m,
        rerollouts,
        dataset_hash,
        selected_epoch: chosen.epoch,
        selected_hinge: chosen.hinge,
    })
}

fn pooled(trajs: &[Trajectory], retained: usize) -> Result<Dataset, TrainError> {
    let truncated: Vec<Trajectory> = trajs.iter().map(|t| t.truncated(retained)).collect();
    build_dataset(&truncated)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversary::Strategy;
    use crate::certnet::{init_params, MlpArchitecture};
    use crate::sim::{pendulum_field, rollout, sample_initial_conditions, scalar_decay_field, PendulumParams};

    fn scalar_dataset(n_traj: usize) -> Dataset {
        let f = scalar_decay_field(1.0);
        let ics = sample_initial_conditions(n_traj, &[-2.0], &[2.0], 17).unwrap();
        let trajs: Vec<_> = ics.iter().map(|xi| rollout(&f, xi, 2.0, 0.05, &[]).unwrap()).collect();
        build_dataset(&trajs).unwrap()
    }

    #[test]
    fn build_dataset_counts_and_order() {
        let f = scalar_decay_field(1.0);
        let t1 = rollout(&f, &[1.0], 0.2, 0.05, &[]).unwrap();
        let t2 = rollout(&f, &[-0.5], 0.2, 0.05, &[]).unwrap();
        let ds = build_dataset(&[t1.clone(), t2.clone()]).unwrap();
        assert_eq!(ds.len(), 10);
        assert_eq!(ds.sample(0).0, &t1.states[0][..]);
        assert_eq!(ds.sample(5).0, &t2.states[0][..]);
        assert!(build_dataset(&[]).unwrap().is_empty());
    }

    #[test]
    fn build_dataset_rejects_mixed_shapes() {
        let f = scalar_decay_field(1.0);
        let t1 = rollout(&f, &[1.0], 0.2, 0.05, &[]).unwrap();
        let t2 = rollout(&f, &[1.0], 0.4, 0.05, &[]).unwrap();
        assert!(matches!(build_dataset(&[t1, t2]), Err(TrainError::ShapeMismatch)));
    }

    #[test]
    fn full_scale_dataset_dimensions() {
        // 1000 trajectories x 160 retained samples x dimension 2 is the
        // full experiment's dataset shape; checked here at 1/100 scale.
        let f = pendulum_field(PendulumParams::default());
        let ics = sample_initial_conditions(10, &[-2.0, -2.0], &[2.0, 2.0], 3).unwrap();
        let config = TrainConfig::default();
        let retained = config.retained_samples().unwrap();
        assert_eq!(retained, 160);
        let trajs = crate::sim::rollout_many(&f, &ics, config.horizon, config.dt, &[0]).unwrap();
        let ds = pooled(&trajs, retained).unwrap();
        assert_eq!(ds.len(), 10 * 160);
        assert_eq!(ds.dim, 2);
    }

    #[test]
    fn zero_epochs_returns_init_unchanged() {
        let ds = scalar_dataset(3);
        let init = init_params(MlpArchitecture::new(1, 20), 1);
        let config = TrainConfig { epochs: 0, ..TrainConfig::default() };
        let out = train_nominal(&ds, &config, &init).unwrap();
        assert_eq!(out.params, init);
        assert!(out.loss_log.is_empty());
    }

    #[test]
    fn degenerate_quadratic_on_stable_scalar_keeps_hinge_inactive() {
        // V = x^2 gives decrease value (eta - 2) x^2 < 0 on x' = -x, so only
        // the regularizer trains; final loss <= lambda ||theta||^2 + 1e-6.
        let ds = scalar_dataset(5);
        let mut init = init_params(MlpArchitecture::new(1, 20), 2);
        init.w3.fill(0.0);
        init.b3.fill(0.0);
        let config = TrainConfig {
            epochs: 50,
            batch_size: ds.len(),
            ..TrainConfig::default()
        };
        let out = train_nominal(&ds, &config, &init).unwrap();
        let theta = out.params.flatten();
        let reg = config.lambda * dot(&theta, &theta);
        let final_loss = out.phases[0].loss_end;
        assert!(
            final_loss <= reg + 1e-6,
            "hinge terms activated: loss {final_loss} vs reg {reg}"
        );
    }

    #[test]
    fn training_is_deterministic() {
        let ds = scalar_dataset(4);
        let init = init_params(MlpArchitecture::new(1, 20), 7);
        let config = TrainConfig { epochs: 5, batch_size: 32, ..TrainConfig::default() };
        let a = train_nominal(&ds, &config, &init).unwrap();
        let b = train_nominal(&ds, &config, &init).unwrap();
        let (ta, tb) = (a.params.flatten(), b.params.flatten());
        for (x, y) in ta.iter().zip(&tb) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
        assert_eq!(a.loss_log, b.loss_log);
    }

    #[test]
    fn loss_log_has_one_row_per_epoch_with_decaying_lr() {
        let ds = scalar_dataset(4);
        let init = init_params(MlpArchitecture::new(1, 20), 7);
        let config = TrainConfig { epochs: 8, batch_size: 64, ..TrainConfig::default() };
        let out = train_nominal(&ds, &config, &init).unwrap();
        assert_eq!(out.loss_log.len(), 8);
        assert_eq!(out.loss_log.first().unwrap().0, 1);
        assert!(out.loss_log.last().unwrap().2 < out.loss_log.first().unwrap().2);
    }

    fn small_pendulum_setup() -> (VectorField, Vec<Vec<f64>>, TrainConfig, CertificateParams) {
        let f = pendulum_field(PendulumParams::default());
        let ics = sample_initial_conditions(6, &[-2.0, -2.0], &[2.0, 2.0], 5).unwrap();
        let config = TrainConfig {
            epochs: 10,
            inner_epochs: 10,
            alternations: 3,
            batch_size: 120,
            horizon: 2.0,
            n_train: 6,
            seed: 5,
            ..TrainConfig::default()
        };
        let init = init_params(MlpArchitecture::new(2, 20), 11);
        (f, ics, config, init)
    }

    #[test]
    fn algorithm_counters_match_alternations() {
        let (f, ics, config, init) = small_pendulum_setup();
        let out = train_adversarial(&f, &ics, &config, &init, &[0]).unwrap();
        assert_eq!(out.minimizations, 3);
        assert_eq!(out.rerollouts, 2);
        assert_eq!(out.phases.len(), 3);
        assert_eq!(out.loss_log.len(), 30);
    }

    #[test]
    fn single_alternation_equals_nominal_training() {
        let (f, ics, mut config, init) = small_pendulum_setup();
        config.alternations = 1;
        let adv = train_adversarial(&f, &ics, &config, &init, &[0]).unwrap();

        let trajs = crate::sim::rollout_many(&f, &ics, config.horizon, config.dt, &[0]).unwrap();
        let ds = pooled(&trajs, config.retained_samples().unwrap()).unwrap();
        let nominal_config = TrainConfig { epochs: config.inner_epochs, ..config.clone() };
        let nom = train_nominal(&ds, &nominal_config, &init).unwrap();
        assert_eq!(adv.params, nom.params);
    }

    #[test]
    fn zero_budget_adversarial_equals_long_nominal_run() {
        let (f, ics, mut config, init) = small_pendulum_setup();
        config.adversary = AdversarySpec::lipschitz(0.0, Strategy::GreedyCertificate);
        let adv = train_adversarial(&f, &ics, &config, &init, &[0]).unwrap();

        let trajs = crate::sim::rollout_many(&f, &ics, config.horizon, config.dt, &[0]).unwrap();
        let ds = pooled(&trajs, config.retained_samples().unwrap()).unwrap();
        let nominal_config = TrainConfig {
            epochs: config.alternations * config.inner_epochs,
            ..config.clone()
        };
        let nom = train_nominal(&ds, &nominal_config, &init).unwrap();
        let (ta, tb) = (adv.params.flatten(), nom.params.flatten());
        for (x, y) in ta.iter().zip(&tb) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn inner_minimizations_do_not_increase_loss() {
        let (f, ics, config, init) = small_pendulum_setup();
        let out = train_adversarial(&f, &ics, &config, &init, &[0]).unwrap();
        for phase in &out.phases {
            assert!(
                phase.loss_end <= phase.loss_start * (1.0 + 1e-9) + 1e-9,
                "phase {} went {} -> {}",
                phase.phase,
                phase.loss_start,
                phase.loss_end
            );
        }
    }

    #[test]
    fn adversarial_requires_active_tube() {
        let (f, ics, mut config, init) = small_pendulum_setup();
        config.adversary = AdversarySpec::none();
        assert!(matches!(
            train_adversarial(&f, &ics, &config, &init, &[0]),
            Err(TrainError::InvalidConfig(_))
        ));
    }

    #[test]
    fn divergent_rerollout_aborts_with_phase() {
        // Radial-equivalent greedy budget far above the decay rate blows up
        // the scalar system during the first re-rollout.
        let f = scalar_decay_field(0.2);
        let ics = vec![vec![1.0], vec![-1.5]];
        let config = TrainConfig {
            inner_epochs: 2,
            alternations: 3,
            batch_size: 10,
            horizon: 40.0,
            dt: 0.05,
            adversary: AdversarySpec::lipschitz(50.0, Strategy::GreedyCertificate),
            ..TrainConfig::default()
        };
        let init = init_params(MlpArchitecture::new(1, 20), 3);
        match train_adversarial(&f, &ics, &config, &init, &[]) {
            Err(TrainError::Diverged { phase, .. }) => assert_eq!(phase, 0),
            other => panic!("expected divergence, got {other:?}"),
        }
    }
}
