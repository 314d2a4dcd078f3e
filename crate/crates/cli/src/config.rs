//! TOML experiment configurations. Unknown keys are rejected everywhere so
//! a typo cannot silently change an experiment.

use serde::{Deserialize, Serialize};

use lyacert::adversary::AdversarySpec;
use lyacert::sim::{
    linearized_pendulum_field, pendulum_field, scalar_decay_field, PendulumParams, VectorField,
};
use lyacert::theory::TimeMode;

/// The dynamical system an experiment runs on.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SystemConfig {
    Pendulum {
        #[serde(default = "one")]
        mass: f64,
        #[serde(default = "one")]
        length: f64,
        #[serde(default = "two")]
        damping: f64,
        #[serde(default = "g_default")]
        gravity: f64,
        #[serde(default = "yes")]
        wrap_theta: bool,
    },
    LinearizedPendulum {
        #[serde(default = "one")]
        mass: f64,
        #[serde(default = "one")]
        length: f64,
        #[serde(default = "two")]
        damping: f64,
        #[serde(default = "g_default")]
        gravity: f64,
        #[serde(default = "yes")]
        wrap_theta: bool,
    },
    ScalarDecay { rho: f64 },
}

fn one() -> f64 {
    1.0
}
fn two() -> f64 {
    2.0
}
fn g_default() -> f64 {
    9.81
}
fn yes() -> bool {
    true
}

impl Default for SystemConfig {
    fn default() -> Self {
        SystemConfig::Pendulum {
            mass: 1.0,
            length: 1.0,
            damping: 2.0,
            gravity: 9.81,
            wrap_theta: true,
        }
    }
}

impl SystemConfig {
    pub fn pendulum_params(&self) -> Option<PendulumParams> {
        match *self {
            SystemConfig::Pendulum { mass, length, damping, gravity, .. }
            | SystemConfig::LinearizedPendulum { mass, length, damping, gravity, .. } => {
                Some(PendulumParams { mass, length, damping, gravity })
            }
            SystemConfig::ScalarDecay { .. } => None,
        }
    }

    pub fn build(&self) -> Result<(VectorField, Vec<usize>), String> {
        match self {
            SystemConfig::Pendulum { wrap_theta, .. } => {
                let p = self.pendulum_params().unwrap();
                PendulumParams::new(p.mass, p.length, p.damping, p.gravity)
                    .map_err(|e| e.to_string())?;
                Ok((pendulum_field(p), if *wrap_theta { vec![0] } else { vec![] }))
            }
            SystemConfig::LinearizedPendulum { wrap_theta, .. } => {
                let p = self.pendulum_params().unwrap();
                PendulumParams::new(p.mass, p.length, p.damping, p.gravity)
                    .map_err(|e| e.to_string())?;
                Ok((linearized_pendulum_field(p), if *wrap_theta { vec![0] } else { vec![] }))
            }
            SystemConfig::ScalarDecay { rho } => {
                if !(*rho > 0.0) {
                    return Err("scalar_decay needs rho > 0".into());
                }
                Ok((scalar_decay_field(*rho), vec![]))
            }
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            SystemConfig::ScalarDecay { .. } => 1,
            _ => 2,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: String,
    #[serde(default = "default_name")]
    pub name: String,
}

fn default_name() -> String {
    "certificate".into()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainMode {
    Nominal,
    Adversarial,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub mode: TrainMode,
    #[serde(default = "d_eta")]
    pub eta: f64,
    #[serde(default = "d_lambda")]
    pub lambda: f64,
    #[serde(default = "d_epochs")]
    pub epochs: usize,
    #[serde(default = "d_batch")]
    pub batch_size: usize,
    #[serde(default = "d_lr")]
    pub base_lr: f64,
    #[serde(default = "d_alternations")]
    pub alternations: usize,
    #[serde(default = "d_inner")]
    pub inner_epochs: usize,
    #[serde(default = "d_horizon")]
    pub horizon: f64,
    #[serde(default = "d_dt")]
    pub dt: f64,
    #[serde(default = "d_ntrain")]
    pub n_train: usize,
    #[serde(default = "d_ic_lo")]
    pub ic_lo: Vec<f64>,
    #[serde(default = "d_ic_hi")]
    pub ic_hi: Vec<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "d_hidden")]
    pub hidden: usize,
    pub adversary: Option<AdversarySpec>,
}

fn d_eta() -> f64 {
    0.4
}
fn d_lambda() -> f64 {
    0.1
}
fn d_epochs() -> usize {
    500
}
fn d_batch() -> usize {
    1000
}
fn d_lr() -> f64 {
    0.005
}
fn d_alternations() -> usize {
    5
}
fn d_inner() -> usize {
    100
}
fn d_horizon() -> f64 {
    8.0
}
fn d_dt() -> f64 {
    0.05
}
fn d_ntrain() -> usize {
    1000
}
fn d_ic_lo() -> Vec<f64> {
    vec![-2.0, -2.0]
}
fn d_ic_hi() -> Vec<f64> {
    vec![2.0, 2.0]
}
fn d_hidden() -> usize {
    20
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainFile {
    #[serde(default)]
    pub system: SystemConfig,
    pub train: TrainSection,
    pub output: OutputConfig,
}

/// Figure-style perturbation classes for `evaluate`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationClass {
    /// Greedy ascent on a designated certificate's gradient.
    GreedyAdv,
    /// Radial growth `x' = f(x) + eps x`.
    Radial,
    /// Dynamics linearized at the origin.
    Linearized,
    /// Pendulum with perturbed physical parameters.
    PerturbedParams,
}

impl PerturbationClass {
    pub fn label(&self) -> &'static str {
        match self {
            PerturbationClass::GreedyAdv => "greedy_adv",
            PerturbationClass::Radial => "radial",
            PerturbationClass::Linearized => "linearized",
            PerturbationClass::PerturbedParams => "perturbed_params",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificateRef {
    pub name: String,
    pub path: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbedParamsSection {
    #[serde(default = "perturbed_default")]
    pub mass: f64,
    #[serde(default = "perturbed_default")]
    pub length: f64,
    #[serde(default = "two")]
    pub damping: f64,
    #[serde(default = "g_default")]
    pub gravity: f64,
}

fn perturbed_default() -> f64 {
    1.1
}

impl Default for PerturbedParamsSection {
    fn default() -> Self {
        Self { mass: 1.1, length: 1.1, damping: 2.0, gravity: 9.81 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluateSection {
    #[serde(default = "d_ntest")]
    pub n_test: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "d_horizon")]
    pub horizon: f64,
    #[serde(default = "d_dt")]
    pub dt: f64,
    /// Budget for the greedy and radial classes; echo of the training
    /// budget.
    pub eps: f64,
    #[serde(default = "d_grid_points")]
    pub eta_grid_points: usize,
    #[serde(default = "one")]
    pub eta_max: f64,
    #[serde(default = "d_classes")]
    pub classes: Vec<PerturbationClass>,
    /// Which certificate's gradient drives the greedy class.
    pub greedy_source: String,
    #[serde(default = "d_ic_lo")]
    pub ic_lo: Vec<f64>,
    #[serde(default = "d_ic_hi")]
    pub ic_hi: Vec<f64>,
    /// Export the first N rolled trajectories per class as CSV.
    #[serde(default)]
    pub export_trajectories: usize,
    pub certificates: Vec<CertificateRef>,
    #[serde(default)]
    pub perturbed_params: PerturbedParamsSection,
}

fn d_ntest() -> usize {
    1000
}
fn d_grid_points() -> usize {
    51
}
fn d_classes() -> Vec<PerturbationClass> {
    vec![
        PerturbationClass::GreedyAdv,
        PerturbationClass::Radial,
        PerturbationClass::Linearized,
        PerturbationClass::PerturbedParams,
    ]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluateFile {
    #[serde(default)]
    pub system: SystemConfig,
    pub evaluate: EvaluateSection,
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdissSection {
    pub beta: f64,
    pub rho: f64,
    pub gamma: f64,
    pub mode: TimeMode,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetSection {
    #[serde(default)]
    pub eps_u: f64,
    #[serde(default)]
    pub eps_x: f64,
    #[serde(default)]
    pub nu: f64,
    #[serde(default = "d_eta")]
    pub eta: f64,
    #[serde(default = "d_ntrain")]
    pub n: usize,
    /// Initial-condition norm for the deviation clauses; defaults to the
    /// constants' `b_x`.
    pub xi_norm: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantsSection {
    pub l_v: f64,
    pub l_grad_v: f64,
    pub b_v: f64,
    pub b_grad_v: f64,
    pub b_x: f64,
    pub b_htilde: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateSection {
    pub checkpoint: String,
    #[serde(default = "d_grid_lo")]
    pub grid_lo: Vec<f64>,
    #[serde(default = "d_grid_hi")]
    pub grid_hi: Vec<f64>,
    #[serde(default = "d_grid_n")]
    pub grid_points: usize,
    #[serde(default = "d_ic_lo")]
    pub ic_lo: Vec<f64>,
    #[serde(default = "d_ic_hi")]
    pub ic_hi: Vec<f64>,
    #[serde(default = "d_ic_n")]
    pub ic_points: usize,
}

fn d_grid_lo() -> Vec<f64> {
    vec![-3.0, -3.0]
}
fn d_grid_hi() -> Vec<f64> {
    vec![3.0, 3.0]
}
fn d_grid_n() -> usize {
    25
}
fn d_ic_n() -> usize {
    9
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneralizationSection {
    pub tau: f64,
    #[serde(default = "d_delta")]
    pub delta: f64,
    #[serde(default = "one")]
    pub k_const: f64,
    /// Inner-constant knob multiplying `B_h` inside the nested log.
    #[serde(default = "one")]
    pub b_h_factor: f64,
    /// Nominal Rademacher complexity, given directly...
    pub rn: Option<f64>,
    /// ...or as the parametric `C sqrt(k/n)` proxy.
    pub param_k: Option<usize>,
    #[serde(default = "one")]
    pub param_c: f64,
}

fn d_delta() -> f64 {
    0.05
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsSection {
    pub ediss: EdissSection,
    pub budgets: BudgetSection,
    pub constants: Option<ConstantsSection>,
    pub estimate: Option<EstimateSection>,
    pub generalization: Option<GeneralizationSection>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsFile {
    #[serde(default)]
    pub system: SystemConfig,
    pub bounds: BoundsSection,
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySection {
    #[serde(default = "d_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "d_horizon")]
    pub horizon: f64,
    #[serde(default = "d_verify_dt")]
    pub dt: f64,
    #[serde(default = "d_steps")]
    pub steps: usize,
    #[serde(default = "d_rhos")]
    pub rhos_ct: Vec<f64>,
    #[serde(default = "d_rho_dt")]
    pub rho_dt: f64,
    #[serde(default = "d_eps_u")]
    pub eps_u: f64,
    /// Lipschitz budget as a fraction of the decay rate, so the bound
    /// preconditions hold by construction.
    #[serde(default = "d_eps_frac")]
    pub eps_x_fraction: f64,
    #[serde(default = "d_ediss_trials")]
    pub ediss_trials: usize,
    #[serde(default = "d_amp")]
    pub signal_amplitude: f64,
    #[serde(default = "yes")]
    pub check_identities: bool,
    #[serde(default = "d_max_t")]
    pub identities_max_t: u64,
    /// Scales the decay rate the suite claims for the oracle systems.
    /// 1.0 claims the true constants; above 1.0 injects an over-claim that
    /// the E-dISS properties must catch (designed-failure path).
    #[serde(default = "one")]
    pub claim_rho_factor: f64,
}

fn d_trials() -> usize {
    1000
}
fn d_verify_dt() -> f64 {
    0.005
}
fn d_steps() -> usize {
    45
}
fn d_rhos() -> Vec<f64> {
    vec![0.5, 1.0, 2.0]
}
fn d_rho_dt() -> f64 {
    0.5
}
fn d_eps_u() -> f64 {
    0.1
}
fn d_eps_frac() -> f64 {
    0.25
}
fn d_ediss_trials() -> usize {
    200
}
fn d_amp() -> f64 {
    0.5
}
fn d_max_t() -> u64 {
    12
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyFile {
    pub verify: VerifySection,
    pub output: OutputConfig,
}

/// Loads and parses a TOML config file of type `T`.
pub fn load<T: serde::de::DeserializeOwned>(path: &std::path::Path) -> Result<T, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
    toml::from_str(&text).map_err(|e| format!("config {}: {e}", path.display()))
}
