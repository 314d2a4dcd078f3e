//! Command implementations shared by the binary and the integration tests.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Serialize;

use lyacert::adversary::{greedy_disturbance, radial_disturbance, AdversarySpec, Disturbance, Strategy, TubeKind};
use lyacert::certificate::Certificate;
use lyacert::certnet::{from_checkpoint_json, init_params, to_checkpoint_json, CertificateParams, MlpArchitecture};
use lyacert::report;
use lyacert::sim::{pendulum_field, sample_initial_conditions, PendulumParams, Trajectory, VectorField};
use lyacert::theory::{
    self, binomial, deviation_bound_ct, deviation_bound_dt, gen_bound, nested_sum_count,
    parametric_rademacher_estimate, peak_t_exp, rademacher_additive_ct, rademacher_additive_dt,
    verify_deviation_bound, verify_ediss, BoundResult, EdissParams, OracleSystem,
    RegularityConstants, SignalFamily, TimeMode, Validity, VerifyOptions,
};
use lyacert::trainer::{self, train_adversarial, train_nominal, TrainConfig, TrainError};
use lyacert::violation::satisfaction_rates;

use crate::config::*;

/// Command failures mapped to process exit codes.
#[derive(Debug)]
pub enum CmdError {
    /// Exit 1: I/O trouble outside the config.
    Io(String),
    /// Exit 2: config parse or validation failure (no outputs written).
    Config(String),
    /// Exit 3: numeric failure during training/rollout (diagnostic written).
    Numeric(String),
    /// Exit 4: missing or unreadable checkpoint.
    MissingCheckpoint(String),
    /// Exit 5: a requested bound clause's precondition is violated.
    Precondition(String),
    /// Exit 6: a verification property failed.
    PropertyFailure(String),
}

impl CmdError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CmdError::Io(_) => 1,
            CmdError::Config(_) => 2,
            CmdError::Numeric(_) => 3,
            CmdError::MissingCheckpoint(_) => 4,
            CmdError::Precondition(_) => 5,
            CmdError::PropertyFailure(_) => 6,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CmdError::Io(m)
            | CmdError::Config(m)
            | CmdError::Numeric(m)
            | CmdError::MissingCheckpoint(m)
            | CmdError::Precondition(m)
            | CmdError::PropertyFailure(m) => m,
        }
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), CmdError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| CmdError::Io(format!("mkdir {}: {e}", parent.display())))?;
    }
    fs::write(path, contents).map_err(|e| CmdError::Io(format!("write {}: {e}", path.display())))
}

#[derive(Serialize)]
struct Manifest<'a, C: Serialize> {
    command: &'a str,
    seed: u64,
    config: &'a C,
    #[serde(skip_serializing_if = "Option::is_none")]
    dataset_hash: Option<String>,
    outputs: Vec<String>,
    tool: ToolInfo,
}

#[derive(Serialize)]
struct ToolInfo {
    name: &'static str,
    version: &'static str,
}

fn tool_info() -> ToolInfo {
    ToolInfo { name: "lyacert", version: env!("CARGO_PKG_VERSION") }
}

fn write_manifest<C: Serialize>(
    dir: &Path,
    command: &str,
    seed: u64,
    config: &C,
    dataset_hash: Option<String>,
    outputs: &[PathBuf],
) -> Result<PathBuf, CmdError> {
    let manifest = Manifest {
        command,
        seed,
        config,
        dataset_hash,
        outputs: outputs.iter().map(|p| p.display().to_string()).collect(),
        tool: tool_info(),
    };
    let text = serde_json::to_string_pretty(&manifest)
        .map_err(|e| CmdError::Io(format!("manifest serialization: {e}")))?;
    let path = dir.join("manifest.json");
    write_file(&path, &text)?;
    Ok(path)
}

fn map_train_error(name: &str, dir: &Path, err: TrainError) -> CmdError {
    match &err {
        TrainError::InvalidConfig(_) | TrainError::ShapeMismatch => CmdError::Config(err.to_string()),
        TrainError::Sim(lyacert::sim::SimError::NonFiniteState { .. }) => {
            write_diagnostic(name, dir, &err);
            CmdError::Numeric(err.to_string())
        }
        TrainError::Sim(_) => CmdError::Config(err.to_string()),
        TrainError::NonFiniteLoss { .. } | TrainError::Diverged { .. } => {
            write_diagnostic(name, dir, &err);
            CmdError::Numeric(err.to_string())
        }
        TrainError::Certnet(_) => CmdError::Numeric(err.to_string()),
    }
}

fn write_diagnostic(name: &str, dir: &Path, err: &TrainError) {
    let mut doc = serde_json::json!({ "error": err.to_string() });
    if let TrainError::NonFiniteLoss { last, epoch, step } = err {
        doc["epoch"] = (*epoch).into();
        doc["step"] = (*step).into();
        doc["last_finite_checkpoint"] =
            serde_json::from_str(&to_checkpoint_json(last)).unwrap_or(serde_json::Value::Null);
    }
    let path = dir.join(format!("{name}.diagnostic.json"));
    let _ = fs::create_dir_all(dir);
    let _ = fs::write(path, serde_json::to_string_pretty(&doc).unwrap_or_default());
}

/// `train`: roll the training set, fit the certificate, persist
/// checkpoint + loss log + manifest.
pub fn cmd_train(
    mut file: TrainFile,
    out_override: Option<PathBuf>,
    seed_override: Option<u64>,
) -> Result<(), CmdError> {
    if let Some(out) = out_override {
        file.output.dir = out.display().to_string();
    }
    if let Some(seed) = seed_override {
        file.train.seed = seed;
    }
    let dim = file.system.dim();
    if file.train.ic_lo.len() != dim || file.train.ic_hi.len() != dim {
        return Err(CmdError::Config(format!(
            "initial-condition box must have dimension {dim}"
        )));
    }
    let (field, wrap_dims) = file.system.build().map_err(CmdError::Config)?;
    let t = &file.train;
    let adversary = match (t.mode, &t.adversary) {
        (TrainMode::Adversarial, Some(spec)) => {
            spec.validate().map_err(|e| CmdError::Config(e.to_string()))?;
            *spec
        }
        (TrainMode::Adversarial, None) => {
            return Err(CmdError::Config("adversarial mode needs a [train.adversary] section".into()))
        }
        (TrainMode::Nominal, _) => AdversarySpec::none(),
    };
    let config = TrainConfig {
        eta: t.eta,
        lambda: t.lambda,
        epochs: t.epochs,
        batch_size: t.batch_size,
        base_lr: t.base_lr,
        alternations: t.alternations,
        inner_epochs: t.inner_epochs,
        adversary,
        horizon: t.horizon,
        dt: t.dt,
        n_train: t.n_train,
        ic_lo: t.ic_lo.clone(),
        ic_hi: t.ic_hi.clone(),
        seed: t.seed,
    };
    let dir = PathBuf::from(&file.output.dir);
    let name = file.output.name.clone();
    let ics = sample_initial_conditions(config.n_train, &config.ic_lo, &config.ic_hi, config.seed)
        .map_err(|e| CmdError::Config(e.to_string()))?;
    let init = init_params(MlpArchitecture::new(dim, t.hidden), config.seed);
    println!(
        "train: mode {:?}, {} trajectories, horizon {} at dt {}",
        t.mode, config.n_train, config.horizon, config.dt
    );
    let outcome = match t.mode {
        TrainMode::Nominal => {
            let trajs = lyacert::sim::rollout_many(&field, &ics, config.horizon, config.dt, &wrap_dims)
                .map_err(|e| map_train_error(&name, &dir, e.into()))?;
            let retained = config.retained_samples().map_err(|e| map_train_error(&name, &dir, e))?;
            let truncated: Vec<Trajectory> = trajs.iter().map(|t| t.truncated(retained)).collect();
            let dataset = trainer::build_dataset(&truncated).map_err(|e| map_train_error(&name, &dir, e))?;
            train_nominal(&dataset, &config, &init).map_err(|e| map_train_error(&name, &dir, e))?
        }
        TrainMode::Adversarial => train_adversarial(&field, &ics, &config, &init, &wrap_dims)
            .map_err(|e| map_train_error(&name, &dir, e))?,
    };
    for phase in &outcome.phases {
        println!(
            "  phase {}: epochs {}..{} loss {:.6e} -> {:.6e}",
            phase.phase, phase.start_epoch, phase.end_epoch, phase.loss_start, phase.loss_end
        );
    }
    let checkpoint_path = dir.join(format!("{name}.checkpoint.json"));
    write_file(&checkpoint_path, &to_checkpoint_json(&outcome.params))?;
    let loss_path = dir.join(format!("{name}.loss.csv"));
    write_file(&loss_path, &report::loss_csv(&outcome.loss_log))?;
    let phases_json = serde_json::to_string_pretty(&outcome.phases)
        .map_err(|e| CmdError::Io(e.to_string()))?;
    let phases_path = dir.join(format!("{name}.phases.json"));
    write_file(&phases_path, &phases_json)?;
    write_manifest(
        &dir,
        "train",
        config.seed,
        &file,
        Some(outcome.dataset_hash.clone()),
        &[checkpoint_path.clone(), loss_path, phases_path],
    )?;
    println!(
        "train: done ({} minimizations, {} re-rollouts); selected epoch {} (hinge {:.3e}); checkpoint at {}",
        outcome.minimizations,
        outcome.rerollouts,
        outcome.selected_epoch,
        outcome.selected_hinge,
        checkpoint_path.display()
    );
    Ok(())
}

fn load_certificate(path: &str) -> Result<CertificateParams, CmdError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CmdError::MissingCheckpoint(format!("checkpoint {path}: {e}")))?;
    from_checkpoint_json(&text)
        .map_err(|e| CmdError::MissingCheckpoint(format!("checkpoint {path}: {e}")))
}

struct ClassSetup {
    label: &'static str,
    field: VectorField,
    disturbance: Option<(Disturbance, AdversarySpec)>,
}

fn build_class(
    class: PerturbationClass,
    system: &SystemConfig,
    section: &EvaluateSection,
    certs: &[(String, Arc<CertificateParams>)],
) -> Result<ClassSetup, CmdError> {
    let (base_field, _) = system.build().map_err(CmdError::Config)?;
    match class {
        PerturbationClass::GreedyAdv => {
            let source = certs
                .iter()
                .find(|(n, _)| *n == section.greedy_source)
                .ok_or_else(|| {
                    CmdError::Config(format!(
                        "greedy_source '{}' is not among the configured certificates",
                        section.greedy_source
                    ))
                })?;
            let spec = AdversarySpec::lipschitz(section.eps, Strategy::GreedyCertificate);
            let cert: Arc<dyn Certificate> = source.1.clone();
            Ok(ClassSetup {
                label: class.label(),
                field: base_field,
                disturbance: Some((greedy_disturbance(cert, &spec), spec)),
            })
        }
        PerturbationClass::Radial => {
            let spec = AdversarySpec::lipschitz(section.eps, Strategy::Radial);
            Ok(ClassSetup {
                label: class.label(),
                field: base_field,
                disturbance: Some((radial_disturbance(section.eps), spec)),
            })
        }
        PerturbationClass::Linearized => {
            let params = system.pendulum_params().ok_or_else(|| {
                CmdError::Config("the linearized class needs a pendulum system".into())
            })?;
            Ok(ClassSetup {
                label: class.label(),
                field: lyacert::sim::linearized_pendulum_field(params),
                disturbance: None,
            })
        }
        PerturbationClass::PerturbedParams => {
            if system.pendulum_params().is_none() {
                return Err(CmdError::Config(
                    "the perturbed-params class needs a pendulum system".into(),
                ));
            }
            let p = &section.perturbed_params;
            let params = PendulumParams::new(p.mass, p.length, p.damping, p.gravity)
                .map_err(|e| CmdError::Config(e.to_string()))?;
            Ok(ClassSetup {
                label: class.label(),
                field: pendulum_field(params),
                disturbance: None,
            })
        }
    }
}

/// `evaluate`: roll the test set under each perturbation class and write
/// one satisfaction-rate CSV per `(certificate, class)` pair.
pub fn cmd_evaluate(
    mut file: EvaluateFile,
    out_override: Option<PathBuf>,
    seed_override: Option<u64>,
) -> Result<(), CmdError> {
    if let Some(out) = out_override {
        file.output.dir = out.display().to_string();
    }
    if let Some(seed) = seed_override {
        file.evaluate.seed = seed;
    }
    let section = &file.evaluate;
    let dim = file.system.dim();
    if section.certificates.is_empty() {
        return Err(CmdError::Config("evaluate needs at least one certificate".into()));
    }
    if section.ic_lo.len() != dim || section.ic_hi.len() != dim {
        return Err(CmdError::Config(format!("initial-condition box must have dimension {dim}")));
    }
    if section.eta_grid_points < 1 {
        return Err(CmdError::Config("eta_grid_points must be at least 1".into()));
    }
    let mut certs: Vec<(String, Arc<CertificateParams>)> = Vec::new();
    for c in &section.certificates {
        let params = load_certificate(&c.path)?;
        if params.arch.input_dim != dim {
            return Err(CmdError::Config(format!(
                "certificate '{}' has dimension {}, system has {dim}",
                c.name, params.arch.input_dim
            )));
        }
        certs.push((c.name.clone(), Arc::new(params)));
    }
    let (_, wrap_dims) = file.system.build().map_err(CmdError::Config)?;
    let ics = sample_initial_conditions(section.n_test, &section.ic_lo, &section.ic_hi, section.seed)
        .map_err(|e| CmdError::Config(e.to_string()))?;
    let retained = lyacert::sim::step_count(section.horizon, section.dt)
        .map_err(|e| CmdError::Config(e.to_string()))?;
    let eta_grid: Vec<f64> = if section.eta_grid_points == 1 {
        vec![section.eta_max]
    } else {
        (0..section.eta_grid_points)
            .map(|i| section.eta_max * i as f64 / (section.eta_grid_points - 1) as f64)
            .collect()
    };
    let dir = PathBuf::from(&file.output.dir);
    let mut outputs = Vec::new();
    for class in &section.classes {
        let setup = build_class(*class, &file.system, section, &certs)?;
        let trajs: Vec<Trajectory> = match &setup.disturbance {
            Some((d, spec)) => lyacert::adversary::perturbed_rollout_many(
                &setup.field,
                d,
                spec,
                &ics,
                section.horizon,
                section.dt,
                &wrap_dims,
            )
            .map_err(|e| CmdError::Numeric(format!("class {}: {e}", setup.label)))?,
            None => lyacert::sim::rollout_many(&setup.field, &ics, section.horizon, section.dt, &wrap_dims)
                .map_err(|e| CmdError::Numeric(format!("class {}: {e}", setup.label)))?,
        };
        let truncated: Vec<Trajectory> = trajs.iter().map(|t| t.truncated(retained)).collect();
        for (name, params) in &certs {
            let rates = satisfaction_rates(&truncated, params.as_ref(), &eta_grid);
            let rows: Vec<(f64, f64, f64)> =
                rates.iter().map(|r| (r.eta, r.traj_rate, r.point_rate)).collect();
            let csv = report::satisfaction_csv(&rows, name, setup.label);
            let path = dir.join(format!("satisfaction_{name}_{}.csv", setup.label));
            write_file(&path, &csv)?;
            if let Some(at) = rates
                .iter()
                .min_by(|a, b| (a.eta - 0.4).abs().partial_cmp(&(b.eta - 0.4).abs()).unwrap())
            {
                println!(
                    "evaluate: {name} on {}: traj rate {:.3} at eta {:.2}",
                    setup.label, at.traj_rate, at.eta
                );
            }
            outputs.push(path);
        }
        for (i, traj) in trajs.iter().take(section.export_trajectories).enumerate() {
            let csv = match &setup.disturbance {
                Some((d, _)) => report::perturbed_trajectory_csv(traj, d),
                None => report::trajectory_csv(traj),
            };
            let path = dir.join(format!("traj_{}_{i:04}.csv", setup.label));
            write_file(&path, &csv)?;
            outputs.push(path);
        }
    }
    let flat_ics: Vec<f64> = ics.iter().flatten().copied().collect();
    let ic_hash = report::content_hash(&report::dataset_bytes(dim, &flat_ics, &[]));
    write_manifest(&dir, "evaluate", section.seed, &file, Some(ic_hash), &outputs)?;
    Ok(())
}

#[derive(Serialize)]
struct BoundsReport {
    mode: TimeMode,
    constants: RegularityConstants,
    constants_source: String,
    deviation: Vec<BoundResult>,
    rademacher: Vec<BoundResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    generalization: Option<GenReport>,
}

#[derive(Serialize)]
struct GenReport {
    rn_nominal: f64,
    rn_source: String,
    additive_tube: TubeKind,
    additive_term: f64,
    rn_adversarial: f64,
    tau: f64,
    delta: f64,
    k_const: f64,
    b_h: f64,
    b_h_factor: f64,
    /// Right-hand side of the margin bound, valid up to the universal
    /// constant `k_const`.
    value: f64,
}

/// `bounds`: evaluate every applicable deviation and Rademacher clause (and
/// optionally the generalization bound) and write a JSON report. Exits 5 if
/// any requested clause has a violated precondition.
pub fn cmd_bounds(
    mut file: BoundsFile,
    out_override: Option<PathBuf>,
    _seed_override: Option<u64>,
) -> Result<(), CmdError> {
    if let Some(out) = out_override {
        file.output.dir = out.display().to_string();
    }
    let b = &file.bounds;
    let ediss = match b.ediss.mode {
        TimeMode::Continuous => EdissParams::continuous(b.ediss.beta, b.ediss.rho, b.ediss.gamma),
        TimeMode::Discrete => EdissParams::discrete(b.ediss.beta, b.ediss.rho, b.ediss.gamma),
    }
    .map_err(|e| CmdError::Config(e.to_string()))?;
    let (constants, constants_source) = match (&b.constants, &b.estimate) {
        (Some(direct), None) => (
            RegularityConstants {
                l_v: direct.l_v,
                l_grad_v: direct.l_grad_v,
                b_v: direct.b_v,
                b_grad_v: direct.b_grad_v,
                b_x: direct.b_x,
                b_htilde: direct.b_htilde,
            },
            "direct".to_string(),
        ),
        (None, Some(est)) => {
            let params = load_certificate(&est.checkpoint)?;
            let dim = params.arch.input_dim;
            if est.grid_lo.len() != dim || est.ic_lo.len() != dim {
                return Err(CmdError::Config(format!("estimate grids must have dimension {dim}")));
            }
            let (field, _) = file.system.build().map_err(CmdError::Config)?;
            if field.dim() != dim {
                return Err(CmdError::Config(format!(
                    "system dimension {} does not match checkpoint dimension {dim}",
                    field.dim()
                )));
            }
            let s_grid = theory::uniform_grid(&est.grid_lo, &est.grid_hi, &vec![est.grid_points; dim]);
            let x_grid = theory::uniform_grid(&est.ic_lo, &est.ic_hi, &vec![est.ic_points; dim]);
            let c = theory::estimate_regularity_constants(
                &[&params],
                &field,
                &s_grid,
                &x_grid,
                b.budgets.eta,
            );
            (c, format!("estimated from {}", est.checkpoint))
        }
        (Some(_), Some(_)) => {
            return Err(CmdError::Config(
                "give either [bounds.constants] or [bounds.estimate], not both".into(),
            ))
        }
        (None, None) => {
            return Err(CmdError::Config(
                "bounds need [bounds.constants] or [bounds.estimate]".into(),
            ))
        }
    };
    constants.validate().map_err(|e| CmdError::Config(e.to_string()))?;
    let xi_norm = b.budgets.xi_norm.unwrap_or(constants.b_x);
    let tubes = [TubeKind::NormBounded, TubeKind::Lipschitz, TubeKind::Combined];
    let deviation: Vec<BoundResult> = tubes
        .iter()
        .map(|&kind| match ediss.mode {
            TimeMode::Continuous => deviation_bound_ct(kind, &ediss, b.budgets.eps_u, b.budgets.eps_x, xi_norm),
            TimeMode::Discrete => deviation_bound_dt(kind, &ediss, b.budgets.eps_u, b.budgets.eps_x, xi_norm),
        })
        .collect();
    let rademacher: Vec<BoundResult> = tubes
        .iter()
        .map(|&kind| match ediss.mode {
            TimeMode::Continuous => rademacher_additive_ct(
                kind,
                &constants,
                &ediss,
                b.budgets.eps_u,
                b.budgets.eps_x,
                b.budgets.nu,
                b.budgets.eta,
                b.budgets.n,
            ),
            TimeMode::Discrete => rademacher_additive_dt(
                kind,
                &constants,
                &ediss,
                b.budgets.eps_u,
                b.budgets.eps_x,
                b.budgets.nu,
                b.budgets.eta,
                b.budgets.n,
            ),
        })
        .collect();
    let generalization = match &b.generalization {
        None => None,
        Some(g) => {
            let (rn, rn_source) = match (g.rn, g.param_k) {
                (Some(rn), _) => (rn, "direct".to_string()),
                (None, Some(k)) => (
                    parametric_rademacher_estimate(k, g.param_c, b.budgets.n),
                    format!("parametric C sqrt(k/n), k = {k}, C = {}", g.param_c),
                ),
                (None, None) => {
                    return Err(CmdError::Config(
                        "generalization section needs `rn` or `param_k`".into(),
                    ))
                }
            };
            let tube = if b.budgets.eps_x > 0.0 && b.budgets.eps_u > 0.0 {
                TubeKind::Combined
            } else if b.budgets.eps_x > 0.0 {
                TubeKind::Lipschitz
            } else if b.budgets.eps_u > 0.0 {
                TubeKind::NormBounded
            } else {
                TubeKind::None
            };
            let additive = rademacher
                .iter()
                .find(|r| r.inputs.kind == tube)
                .and_then(|r| r.value)
                .unwrap_or(if tube == TubeKind::None {
                    b.budgets.nu / (b.budgets.n as f64).sqrt()
                } else {
                    f64::NAN
                });
            if !additive.is_finite() {
                // fall through; the violated clause below triggers exit 5.
                None
            } else {
                let b_h = g.b_h_factor * constants.b_htilde;
                let value = gen_bound(rn + additive, g.tau, b_h, b.budgets.n, g.delta, g.k_const)
                    .map_err(|e| CmdError::Precondition(e.to_string()))?;
                Some(GenReport {
                    rn_nominal: rn,
                    rn_source,
                    additive_tube: tube,
                    additive_term: additive,
                    rn_adversarial: rn + additive,
                    tau: g.tau,
                    delta: g.delta,
                    k_const: g.k_const,
                    b_h,
                    b_h_factor: g.b_h_factor,
                    value,
                })
            }
        }
    };
    let report_doc = BoundsReport {
        mode: ediss.mode,
        constants,
        constants_source,
        deviation,
        rademacher,
        generalization,
    };
    let dir = PathBuf::from(&file.output.dir);
    let json = serde_json::to_string_pretty(&report_doc).map_err(|e| CmdError::Io(e.to_string()))?;
    let path = dir.join("bounds.json");
    write_file(&path, &json)?;
    write_manifest(&dir, "bounds", 0, &file, None, std::slice::from_ref(&path))?;
    println!("bounds: report at {}", path.display());
    for r in report_doc.deviation.iter().chain(&report_doc.rademacher) {
        if let Validity::PreconditionViolated { reason } = &r.validity {
            return Err(CmdError::Precondition(format!("{:?}: {reason}", r.formula)));
        }
    }
    Ok(())
}

struct PropertyResult {
    name: String,
    pass: bool,
    detail: String,
}

fn prop(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> PropertyResult {
    PropertyResult { name: name.into(), pass, detail: detail.into() }
}

/// `verify`: run the built-in property suite (E-dISS certification of the
/// scalar oracles, all six deviation-bound combinations, the combinatorial
/// identities) and emit a JUnit-style XML summary. Exits 6 when any
/// property fails.
pub fn cmd_verify(
    mut file: VerifyFile,
    out_override: Option<PathBuf>,
    seed_override: Option<u64>,
) -> Result<(), CmdError> {
    if let Some(out) = out_override {
        file.output.dir = out.display().to_string();
    }
    if let Some(seed) = seed_override {
        file.verify.seed = seed;
    }
    let v = &file.verify;
    if v.trials == 0 || v.ediss_trials == 0 {
        return Err(CmdError::Config("trial counts must be positive".into()));
    }
    if !(v.rho_dt > 0.0 && v.rho_dt < 1.0) {
        return Err(CmdError::Config("rho_dt must lie in (0, 1)".into()));
    }
    let opts = VerifyOptions {
        horizon: v.horizon,
        dt: v.dt,
        steps: v.steps,
        ic_halfwidth: 2.0,
    };
    let family = SignalFamily::Bounded { max_amplitude: v.signal_amplitude };
    let mut results: Vec<PropertyResult> = Vec::new();

    if !(v.claim_rho_factor > 0.0) {
        return Err(CmdError::Config("claim_rho_factor must be positive".into()));
    }
    for &rho in &v.rhos_ct {
        if !(rho > 0.0) {
            return Err(CmdError::Config("ct rates must be positive".into()));
        }
        let sys = OracleSystem::Continuous(lyacert::sim::scalar_decay_field(rho));
        let good = EdissParams::continuous(1.0, v.claim_rho_factor * rho, 1.0)
            .map_err(|e| CmdError::Config(e.to_string()))?;
        match verify_ediss(&sys, &good, v.ediss_trials, family, v.seed, &opts) {
            Ok(rep) => results.push(prop(
                format!("ediss_ct_rho_{rho}"),
                rep.pass,
                format!("max ratio {:.3e} over {} trials", rep.max_ratio, rep.trials),
            )),
            Err(e) => results.push(prop(format!("ediss_ct_rho_{rho}"), false, e.to_string())),
        }
        let over = EdissParams::continuous(1.0, 2.0 * rho, 1.0).map_err(|e| CmdError::Config(e.to_string()))?;
        match verify_ediss(&sys, &over, v.ediss_trials, family, v.seed, &opts) {
            Ok(rep) => results.push(prop(
                format!("ediss_ct_overclaim_detected_rho_{rho}"),
                !rep.pass,
                format!("overclaimed (1, {}, 1) max ratio {:.3e}", 2.0 * rho, rep.max_ratio),
            )),
            Err(e) => results.push(prop(
                format!("ediss_ct_overclaim_detected_rho_{rho}"),
                false,
                e.to_string(),
            )),
        }
    }
    {
        let sys = OracleSystem::Discrete(lyacert::sim::scalar_decay_map(v.rho_dt));
        let claimed_dt = (v.claim_rho_factor * v.rho_dt).min(1.0 - 1e-9);
        let good = EdissParams::discrete(1.0, claimed_dt, 1.0)
            .map_err(|e| CmdError::Config(e.to_string()))?;
        match verify_ediss(&sys, &good, v.ediss_trials, family, v.seed, &opts) {
            Ok(rep) => results.push(prop(
                "ediss_dt",
                rep.pass,
                format!("max ratio {:.3e}", rep.max_ratio),
            )),
            Err(e) => results.push(prop("ediss_dt", false, e.to_string())),
        }
    }

    let ct_rho = 1.0;
    let ct_sys = OracleSystem::Continuous(lyacert::sim::scalar_decay_field(ct_rho));
    let ct_params = EdissParams::continuous(1.0, ct_rho, 1.0).unwrap();
    let dt_sys = OracleSystem::Discrete(lyacert::sim::scalar_decay_map(v.rho_dt));
    let dt_params = EdissParams::discrete(1.0, v.rho_dt, 1.0).unwrap();
    let ct_eps_x = v.eps_x_fraction * ct_rho;
    let dt_eps_x = v.eps_x_fraction * (1.0 - v.rho_dt);
    let combos: [(&str, &OracleSystem, &EdissParams, TubeKind, f64, f64); 6] = [
        ("deviation_ct_norm_bounded", &ct_sys, &ct_params, TubeKind::NormBounded, v.eps_u, 0.0),
        ("deviation_ct_lipschitz", &ct_sys, &ct_params, TubeKind::Lipschitz, 0.0, ct_eps_x),
        ("deviation_ct_combined", &ct_sys, &ct_params, TubeKind::Combined, v.eps_u, ct_eps_x),
        ("deviation_dt_norm_bounded", &dt_sys, &dt_params, TubeKind::NormBounded, v.eps_u, 0.0),
        ("deviation_dt_lipschitz", &dt_sys, &dt_params, TubeKind::Lipschitz, 0.0, dt_eps_x),
        ("deviation_dt_combined", &dt_sys, &dt_params, TubeKind::Combined, v.eps_u, dt_eps_x),
    ];
    for (name, sys, params, kind, eps_u, eps_x) in combos {
        match verify_deviation_bound(sys, params, kind, eps_u, eps_x, v.trials, v.seed, &opts) {
            Ok(rep) => {
                results.push(prop(
                    name,
                    rep.pass,
                    format!("max ratio {:.6e}, min gap {:.3e}, {} trials", rep.max_ratio, rep.min_gap, rep.trials),
                ));
                if name == "deviation_dt_lipschitz" {
                    results.push(prop(
                        "deviation_dt_lipschitz_tightness",
                        rep.min_gap <= 1e-9,
                        format!("worst-case envelope gap {:.3e} (must be <= 1e-9)", rep.min_gap),
                    ));
                }
            }
            Err(e) => results.push(prop(name, false, e.to_string())),
        }
    }

    if v.check_identities {
        let mut ok = true;
        let mut detail = String::new();
        for t in 2..=v.identities_max_t {
            for j in 1..t {
                let lhs = nested_sum_count(t, j).unwrap_or(u64::MAX);
                let rhs = binomial(t, j);
                if lhs != rhs {
                    ok = false;
                    detail = format!("t = {t}, j = {j}: {lhs} != {rhs}");
                }
            }
        }
        results.push(prop(
            "nested_sum_equals_binomial",
            ok,
            if ok { format!("exhaustive for t <= {}", v.identities_max_t) } else { detail },
        ));
        let mut peak_ok = true;
        let mut peak_detail = String::new();
        for rho in [0.5, 1.0, 2.0] {
            match peak_t_exp(rho, TimeMode::Continuous) {
                Ok((t_star, value)) => {
                    let et = (t_star - 1.0 / rho).abs();
                    let ev = (value - 1.0 / (rho * std::f64::consts::E)).abs();
                    if et > 1e-12 || ev > 1e-12 {
                        peak_ok = false;
                        peak_detail = format!("rho = {rho}: errors {et:.2e}, {ev:.2e}");
                    }
                }
                Err(e) => {
                    peak_ok = false;
                    peak_detail = e.to_string();
                }
            }
        }
        if peak_t_exp(1.0, TimeMode::Discrete).is_ok() {
            peak_ok = false;
            peak_detail = "discrete-time rho = 1 must be rejected".into();
        }
        results.push(prop(
            "peak_ramp_identities",
            peak_ok,
            if peak_ok { "ct peaks match (1/rho, 1/(rho e)) to 1e-12".into() } else { peak_detail },
        ));
    }

    let failures = results.iter().filter(|r| !r.pass).count();
    let mut xml = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    xml.push_str(&format!(
        "<testsuite name=\"lyacert-verify\" tests=\"{}\" failures=\"{failures}\">\n",
        results.len()
    ));
    for r in &results {
        println!("verify: {:<44} {}  ({})", r.name, if r.pass { "PASS" } else { "FAIL" }, r.detail);
        if r.pass {
            xml.push_str(&format!("  <testcase name=\"{}\"/>\n", r.name));
        } else {
            xml.push_str(&format!(
                "  <testcase name=\"{}\"><failure message=\"{}\"/></testcase>\n",
                r.name,
                r.detail.replace('"', "'")
            ));
        }
    }
    xml.push_str("</testsuite>\n");
    let dir = PathBuf::from(&file.output.dir);
    let path = dir.join("verify.xml");
    write_file(&path, &xml)?;
    write_manifest(&dir, "verify", file.verify.seed, &file, None, &[path])?;
    if failures > 0 {
        return Err(CmdError::PropertyFailure(format!("{failures} properties failed")));
    }
    Ok(())
}
