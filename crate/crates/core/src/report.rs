//! Artifact serialization: CSV layouts, float formatting, content hashing.
//!
//! Every float written to disk uses 17 significant decimal digits, enough to
//! round-trip an f64 exactly, so reruns can be compared byte for byte.

use std::fmt::Write as _;

use sha2::{Digest, Sha256};

use crate::adversary::Disturbance;
use crate::sim::Trajectory;

/// Formats with 17 significant digits (16 after the point, scientific).
pub fn float17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Trajectory CSV: header `t,x0..x{p-1},dx0..dx{p-1}`, one row per sample.
pub fn trajectory_csv(traj: &Trajectory) -> String {
    let p = traj.dim();
    let mut s = String::new();
    s.push('t');
    for i in 0..p {
        let _ = write!(s, ",x{i}");
    }
    for i in 0..p {
        let _ = write!(s, ",dx{i}");
    }
    s.push('\n');
    for k in 0..traj.len() {
        s.push_str(&float17(traj.times[k]));
        for v in &traj.states[k] {
            s.push(',');
            s.push_str(&float17(*v));
        }
        for v in &traj.derivs[k] {
            s.push(',');
            s.push_str(&float17(*v));
        }
        s.push('\n');
    }
    s
}

/// Perturbed-trajectory CSV: same layout plus a trailing `d0..d{p-1}` block
/// holding the realized disturbance, re-evaluated at each stored sample.
pub fn perturbed_trajectory_csv(traj: &Trajectory, disturbance: &Disturbance) -> String {
    let p = traj.dim();
    let mut s = String::new();
    s.push('t');
    for i in 0..p {
        let _ = write!(s, ",x{i}");
    }
    for i in 0..p {
        let _ = write!(s, ",dx{i}");
    }
    for i in 0..p {
        let _ = write!(s, ",d{i}");
    }
    s.push('\n');
    for k in 0..traj.len() {
        s.push_str(&float17(traj.times[k]));
        for v in &traj.states[k] {
            s.push(',');
            s.push_str(&float17(*v));
        }
        for v in &traj.derivs[k] {
            s.push(',');
            s.push_str(&float17(*v));
        }
        let d = disturbance.eval(traj.times[k], &traj.states[k]).total();
        for v in &d {
            s.push(',');
            s.push_str(&float17(*v));
        }
        s.push('\n');
    }
    s
}

/// Satisfaction-rate CSV rows for one `(certificate, perturbation class)`
/// pair: `eta,traj_rate,point_rate,certificate,perturbation_class`.
pub fn satisfaction_csv(
    rows: &[(f64, f64, f64)],
    certificate: &str,
    perturbation_class: &str,
) -> String {
    let mut s = String::from("eta,traj_rate,point_rate,certificate,perturbation_class\n");
    for (eta, traj_rate, point_rate) in rows {
        let _ = writeln!(
            s,
            "{},{},{},{certificate},{perturbation_class}",
            float17(*eta),
            float17(*traj_rate),
            float17(*point_rate)
        );
    }
    s
}

/// Per-epoch training log: `epoch,loss,lr`.
pub fn loss_csv(rows: &[(usize, f64, f64)]) -> String {
    let mut s = String::from("epoch,loss,lr\n");
    for (epoch, loss, lr) in rows {
        let _ = writeln!(s, "{epoch},{},{}", float17(*loss), float17(*lr));
    }
    s
}

/// Content hash of a byte blob, git-style framing (`blob <len>\0<bytes>`)
/// over SHA-256, hex encoded.
pub fn content_hash(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(format!("blob {}\0", bytes.len()).as_bytes());
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut s = String::with_capacity(64);
    for b in digest {
        let _ = write!(s, "{b:02x}");
    }
    s
}

/// Canonical little-endian byte serialization of a flat `(x, x')` dataset,
/// used for manifest content hashes.
pub fn dataset_bytes(dim: usize, xs: &[f64], dxs: &[f64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 * (xs.len() + dxs.len()) + 16);
    out.extend_from_slice(&(dim as u64).to_le_bytes());
    out.extend_from_slice(&((xs.len() / dim.max(1)) as u64).to_le_bytes());
    for v in xs.iter().chain(dxs) {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}
