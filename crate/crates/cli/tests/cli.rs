//! End-to-end tests of the `lyacert` binary: artifact layout, exit codes,
//! manifest contents.

use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lyacert"))
}

fn temp_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("lyacert-cli-{name}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write(path: &Path, contents: &str) {
    std::fs::write(path, contents).unwrap();
}

const TINY_TRAIN: &str = r#"
[system]
kind = "pendulum"

[train]
mode = "nominal"
epochs = 2
batch_size = 64
n_train = 4
horizon = 2.0
seed = 3

[output]
dir = "OUTDIR"
name = "cert"
"#;

#[test]
fn train_writes_checkpoint_loss_log_and_manifest() {
    let dir = temp_dir("train");
    let config = dir.join("train.toml");
    write(&config, &TINY_TRAIN.replace("OUTDIR", dir.join("run").to_str().unwrap()));
    let out = bin().args(["train", "--config"]).arg(&config).args(["--threads", "2"]).output().unwrap();
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));

    let run = dir.join("run");
    let checkpoint = std::fs::read_to_string(run.join("cert.checkpoint.json")).unwrap();
    assert!(checkpoint.starts_with("{\"version\":1,"));
    let loss = std::fs::read_to_string(run.join("cert.loss.csv")).unwrap();
    assert_eq!(loss.lines().count(), 3, "header + one row per epoch");
    assert_eq!(loss.lines().next().unwrap(), "epoch,loss,lr");
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(run.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "train");
    assert_eq!(manifest["seed"], 3);
    assert!(manifest["dataset_hash"].as_str().unwrap().len() == 64);
    assert_eq!(manifest["config"]["train"]["mode"], "nominal");
}

#[test]
fn malformed_config_exits_2_without_outputs() {
    let dir = temp_dir("badcfg");
    let config = dir.join("bad.toml");
    write(&config, "[train]\nmode = \"nominal\"\nunknown_key = 1\n[output]\ndir = \"x\"\n");
    let out = bin().args(["train", "--config"]).arg(&config).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.join("x").exists());

    // invalid TOML syntax
    write(&config, "not toml at all [[[");
    let out = bin().args(["train", "--config"]).arg(&config).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn evaluate_missing_checkpoint_exits_4() {
    let dir = temp_dir("nockpt");
    let config = dir.join("eval.toml");
    write(
        &config,
        &format!(
            r#"
[system]
kind = "pendulum"

[evaluate]
n_test = 4
eps = 0.1
greedy_source = "v"

[[evaluate.certificates]]
name = "v"
path = "{}"

[output]
dir = "{}"
"#,
            dir.join("missing.json").display(),
            dir.join("out").display()
        ),
    );
    let out = bin().args(["evaluate", "--config"]).arg(&config).output().unwrap();
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn evaluate_writes_one_csv_per_certificate_class_pair() {
    let dir = temp_dir("eval");
    let train_cfg = dir.join("train.toml");
    write(&train_cfg, &TINY_TRAIN.replace("OUTDIR", dir.join("run").to_str().unwrap()));
    assert!(bin().args(["train", "--config"]).arg(&train_cfg).status().unwrap().success());

    let eval_cfg = dir.join("eval.toml");
    write(
        &eval_cfg,
        &format!(
            r#"
[system]
kind = "pendulum"

[evaluate]
n_test = 8
seed = 5
horizon = 2.0
eps = 0.1
eta_grid_points = 3
greedy_source = "cert"
export_trajectories = 1

[[evaluate.certificates]]
name = "cert"
path = "{}"

[output]
dir = "{}"
"#,
            dir.join("run/cert.checkpoint.json").display(),
            dir.join("eval_out").display()
        ),
    );
    let out = bin().args(["evaluate", "--config"]).arg(&eval_cfg).output().unwrap();
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    for class in ["greedy_adv", "radial", "linearized", "perturbed_params"] {
        let csv = std::fs::read_to_string(dir.join(format!("eval_out/satisfaction_cert_{class}.csv"))).unwrap();
        assert_eq!(
            csv.lines().next().unwrap(),
            "eta,traj_rate,point_rate,certificate,perturbation_class"
        );
        assert_eq!(csv.lines().count(), 4, "header + 3 grid rows");
        assert!(dir.join(format!("eval_out/traj_{class}_0000.csv")).exists());
    }
    // exported greedy trajectory carries the disturbance block
    let traj = std::fs::read_to_string(dir.join("eval_out/traj_greedy_adv_0000.csv")).unwrap();
    assert_eq!(traj.lines().next().unwrap(), "t,x0,x1,dx0,dx1,d0,d1");
}

#[test]
fn bounds_precondition_violation_exits_5_with_reason() {
    let dir = temp_dir("bounds5");
    let config = dir.join("bounds.toml");
    write(
        &config,
        &format!(
            r#"
[bounds.ediss]
beta = 1.0
rho = 1.0
gamma = 1.0
mode = "continuous"

[bounds.budgets]
eps_u = 0.1
eps_x = 1.5
eta = 0.4
n = 100

[bounds.constants]
l_v = 1.0
l_grad_v = 1.0
b_v = 1.0
b_grad_v = 1.0
b_x = 2.0
b_htilde = 1.0

[output]
dir = "{}"
"#,
            dir.join("out").display()
        ),
    );
    let out = bin().args(["bounds", "--config"]).arg(&config).output().unwrap();
    assert_eq!(out.status.code(), Some(5));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("eps_x"), "reason must name the precondition: {stderr}");
    // the report is still written, carrying the violated clauses
    let report = std::fs::read_to_string(dir.join("out/bounds.json")).unwrap();
    assert!(report.contains("precondition_violated"));
}

#[test]
fn bounds_zero_budgets_give_zero_terms() {
    let dir = temp_dir("bounds0");
    let config = dir.join("bounds.toml");
    write(
        &config,
        &format!(
            r#"
[bounds.ediss]
beta = 1.0
rho = 1.0
gamma = 1.0
mode = "continuous"

[bounds.budgets]
eps_u = 0.0
eps_x = 0.0
nu = 0.0
eta = 0.4
n = 100

[bounds.constants]
l_v = 1.0
l_grad_v = 1.0
b_v = 1.0
b_grad_v = 1.0
b_x = 2.0
b_htilde = 1.0

[output]
dir = "{}"
"#,
            dir.join("out").display()
        ),
    );
    let out = bin().args(["bounds", "--config"]).arg(&config).output().unwrap();
    assert!(out.status.success());
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("out/bounds.json")).unwrap()).unwrap();
    for clause in report["rademacher"].as_array().unwrap() {
        assert_eq!(clause["value"].as_f64().unwrap(), 0.0);
    }
}

fn verify_config(dir: &Path, extra: &str) -> PathBuf {
    let config = dir.join("verify.toml");
    write(
        &config,
        &format!(
            r#"
[verify]
trials = 40
ediss_trials = 20
horizon = 4.0
rhos_ct = [1.0]
identities_max_t = 8
{extra}

[output]
dir = "{}"
"#,
            dir.join("out").display()
        ),
    );
    config
}

#[test]
fn verify_suite_passes_and_writes_junit_xml() {
    let dir = temp_dir("verify");
    let config = verify_config(&dir, "");
    let out = bin().args(["verify", "--config"]).arg(&config).output().unwrap();
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let xml = std::fs::read_to_string(dir.join("out/verify.xml")).unwrap();
    assert!(xml.starts_with("<?xml"));
    assert!(xml.contains("failures=\"0\""));
    assert!(xml.contains("deviation_dt_lipschitz_tightness"));
}

#[test]
fn verify_zero_trials_exits_2() {
    let dir = temp_dir("verify0");
    let config = verify_config(&dir, "").to_path_buf();
    write(
        &config,
        &std::fs::read_to_string(&config).unwrap().replace("trials = 40", "trials = 0"),
    );
    let out = bin().args(["verify", "--config"]).arg(&config).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn verify_injected_overclaim_exits_6() {
    let dir = temp_dir("verify6");
    let config = verify_config(&dir, "claim_rho_factor = 1.5");
    let out = bin().args(["verify", "--config"]).arg(&config).output().unwrap();
    assert_eq!(out.status.code(), Some(6));
    let xml = std::fs::read_to_string(dir.join("out/verify.xml")).unwrap();
    assert!(xml.contains("<failure"));
}
