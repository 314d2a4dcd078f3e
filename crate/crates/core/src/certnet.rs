//! The learnable certificate class and its optimizer.
//!
//! Certificates have the form
//!
//! ```text
//! V(x) = x^T (L(x)^T L(x) + I) x = ||L(x) x||^2 + ||x||^2,
//! ```
//!
//! where `L(x)` is the `2p x p` reshape of a fully-connected network with
//! two tanh hidden layers of width `h` (default 20). The form guarantees
//! `V(0) = 0` and `V(x) >= ||x||^2` for any parameters.
//!
//! Gradients are hand-derived rather than taped. The surrogate training
//! loss needs `d/dtheta [ <grad_x V(x), x'> + eta V(x) ]`, a mixed
//! second-order quantity; we obtain it by running a forward (tangent) pass
//! in `x` with tangent `x'` and then reverse-accumulating the augmented
//! primal+tangent graph with respect to the parameters. The architecture is
//! three linear layers, so the whole backward pass is a page of algebra.

use rand::Rng;
use thiserror::Error;

use crate::certificate::Certificate;
use crate::exec;
use crate::linalg::{dot, matvec, matvec_t, outer_acc};
use crate::rng;

#[derive(Debug, Error)]
pub enum CertnetError {
    #[error("checkpoint rejected: {0}")]
    BadCheckpoint(String),
    #[error("parameter vector has wrong length: expected {expected}, got {got}")]
    BadFlatLength { expected: usize, got: usize },
}

/// Architecture metadata: `p -> h -> h -> 2p^2`, tanh activations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct MlpArchitecture {
    /// State dimension p.
    pub input_dim: usize,
    /// Width of both hidden layers.
    pub hidden: usize,
}

impl MlpArchitecture {
    pub fn new(input_dim: usize, hidden: usize) -> Self {
        assert!(input_dim >= 1 && hidden >= 1);
        Self { input_dim, hidden }
    }

    /// Rows of `L(x)`.
    pub fn l_rows(&self) -> usize {
        2 * self.input_dim
    }

    /// Flattened network output size `p * 2p`.
    pub fn output_dim(&self) -> usize {
        2 * self.input_dim * self.input_dim
    }

    /// Total parameter count.
    pub fn param_count(&self) -> usize {
        let (p, h, q) = (self.input_dim, self.hidden, self.output_dim());
        h * p + h + h * h + h + q * h + q
    }
}

/// Network weights, stored per layer with a lossless flat view.
#[derive(Debug, Clone, PartialEq)]
pub struct CertificateParams {
    pub arch: MlpArchitecture,
    pub w1: Vec<f64>, // h x p
    pub b1: Vec<f64>, // h
    pub w2: Vec<f64>, // h x h
    pub b2: Vec<f64>, // h
    pub w3: Vec<f64>, // q x h
    pub b3: Vec<f64>, // q
}

impl CertificateParams {
    pub fn zeros(arch: MlpArchitecture) -> Self {
        let (p, h, q) = (arch.input_dim, arch.hidden, arch.output_dim());
        Self {
            arch,
            w1: vec![0.0; h * p],
            b1: vec![0.0; h],
            w2: vec![0.0; h * h],
            b2: vec![0.0; h],
            w3: vec![0.0; q * h],
            b3: vec![0.0; q],
        }
    }

    /// Flat view in layer order `w1, b1, w2, b2, w3, b3`.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.arch.param_count());
        out.extend_from_slice(&self.w1);
        out.extend_from_slice(&self.b1);
        out.extend_from_slice(&self.w2);
        out.extend_from_slice(&self.b2);
        out.extend_from_slice(&self.w3);
        out.extend_from_slice(&self.b3);
        out
    }

    /// Inverse of [`CertificateParams::flatten`].
    pub fn from_flat(arch: MlpArchitecture, theta: &[f64]) -> Result<Self, CertnetError> {
        if theta.len() != arch.param_count() {
            return Err(CertnetError::BadFlatLength {
                expected: arch.param_count(),
                got: theta.len(),
            });
        }
        let (p, h, q) = (arch.input_dim, arch.hidden, arch.output_dim());
        let mut at = 0usize;
        let mut take = |n: usize| {
            let s = theta[at..at + n].to_vec();
            at += n;
            s
        };
        Ok(Self {
            arch,
            w1: take(h * p),
            b1: take(h),
            w2: take(h * h),
            b2: take(h),
            w3: take(q * h),
            b3: take(q),
        })
    }

    /// Overwrites the weights from a flat vector (same layout as
    /// [`CertificateParams::flatten`]).
    pub fn assign_flat(&mut self, theta: &[f64]) -> Result<(), CertnetError> {
        *self = Self::from_flat(self.arch, theta)?;
        Ok(())
    }

    pub fn all_finite(&self) -> bool {
        self.flatten().iter().all(|v| v.is_finite())
    }
}

/// Glorot-uniform weights (`U(+-sqrt(6 / (fan_in + fan_out)))`), zero
/// biases, deterministic in `seed`. Draws from a dedicated substream so
/// other consumers of the same run seed stay decorrelated.
pub fn init_params(arch: MlpArchitecture, seed: u64) -> CertificateParams {
    let mut rng = rng::substream(seed, 0xB);
    let mut params = CertificateParams::zeros(arch);
    let (p, h, q) = (arch.input_dim, arch.hidden, arch.output_dim());
    for (w, fan_in, fan_out) in [
        (&mut params.w1, p, h),
        (&mut params.w2, h, h),
        (&mut params.w3, h, q),
    ] {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        for v in w.iter_mut() {
            *v = rng.gen_range(-limit..limit);
        }
    }
    params
}

/// Scratch buffers for one forward/tangent/reverse evaluation; reuse across
/// samples to keep the training loop allocation-free.
#[derive(Debug, Clone)]
pub struct Workspace {
    a1: Vec<f64>,
    z1: Vec<f64>,
    a2: Vec<f64>,
    z2: Vec<f64>,
    out: Vec<f64>,
    y: Vec<f64>,
    da1: Vec<f64>,
    dz1: Vec<f64>,
    da2: Vec<f64>,
    dz2: Vec<f64>,
    dout: Vec<f64>,
    dy: Vec<f64>,
    ybar: Vec<f64>,
    dybar: Vec<f64>,
    outbar: Vec<f64>,
    doutbar: Vec<f64>,
    z2bar: Vec<f64>,
    dz2bar: Vec<f64>,
    a2bar: Vec<f64>,
    da2bar: Vec<f64>,
    z1bar: Vec<f64>,
    dz1bar: Vec<f64>,
    a1bar: Vec<f64>,
    da1bar: Vec<f64>,
}

impl Workspace {
    pub fn new(arch: MlpArchitecture) -> Self {
        let h = arch.hidden;
        let q = arch.output_dim();
        let r = arch.l_rows();
        let zh = || vec![0.0; h];
        Self {
            a1: zh(),
            z1: zh(),
            a2: zh(),
            z2: zh(),
            out: vec![0.0; q],
            y: vec![0.0; r],
            da1: zh(),
            dz1: zh(),
            da2: zh(),
            dz2: zh(),
            dout: vec![0.0; q],
            dy: vec![0.0; r],
            ybar: vec![0.0; r],
            dybar: vec![0.0; r],
            outbar: vec![0.0; q],
            doutbar: vec![0.0; q],
            z2bar: zh(),
            dz2bar: zh(),
            a2bar: zh(),
            da2bar: zh(),
            z1bar: zh(),
            dz1bar: zh(),
            a1bar: zh(),
            da1bar: zh(),
        }
    }
}

fn forward(params: &CertificateParams, x: &[f64], ws: &mut Workspace) -> f64 {
    let arch = params.arch;
    let (p, h, q) = (arch.input_dim, arch.hidden, arch.output_dim());
    matvec(&params.w1, h, p, x, &mut ws.a1);
    for i in 0..h {
        ws.a1[i] += params.b1[i];
        ws.z1[i] = ws.a1[i].tanh();
    }
    matvec(&params.w2, h, h, &ws.z1, &mut ws.a2);
    for i in 0..h {
        ws.a2[i] += params.b2[i];
        ws.z2[i] = ws.a2[i].tanh();
    }
    matvec(&params.w3, q, h, &ws.z2, &mut ws.out);
    for i in 0..q {
        ws.out[i] += params.b3[i];
    }
    // y = L x with L the row-major 2p x p reshape of `out`.
    let rows = arch.l_rows();
    for a in 0..rows {
        ws.y[a] = dot(&ws.out[a * p..(a + 1) * p], x);
    }
    dot(&ws.y, &ws.y) + dot(x, x)
}

/// Forward-mode pass in `x` with tangent `v`; returns `<grad_x V, v>`.
/// Requires a prior [`forward`] call on the same workspace.
fn forward_tangent(params: &CertificateParams, x: &[f64], v: &[f64], ws: &mut Workspace) -> f64 {
    let arch = params.arch;
    let (p, h, q) = (arch.input_dim, arch.hidden, arch.output_dim());
    matvec(&params.w1, h, p, v, &mut ws.da1);
    for i in 0..h {
        ws.dz1[i] = (1.0 - ws.z1[i] * ws.z1[i]) * ws.da1[i];
    }
    matvec(&params.w2, h, h, &ws.dz1, &mut ws.da2);
    for i in 0..h {
        ws.dz2[i] = (1.0 - ws.z2[i] * ws.z2[i]) * ws.da2[i];
    }
    matvec(&params.w3, q, h, &ws.dz2, &mut ws.dout);
    let rows = arch.l_rows();
    for a in 0..rows {
        ws.dy[a] = dot(&ws.dout[a * p..(a + 1) * p], x) + dot(&ws.out[a * p..(a + 1) * p], v);
    }
    2.0 * dot(&ws.y, &ws.dy) + 2.0 * dot(x, v)
}

/// `V(x)`.
pub fn eval_v(params: &CertificateParams, x: &[f64]) -> f64 {
    let mut ws = Workspace::new(params.arch);
    forward(params, x, &mut ws)
}

/// Exact `grad_x V(x)` by reverse accumulation through the primal graph.
pub fn grad_x_v(params: &CertificateParams, x: &[f64]) -> Vec<f64> {
    let mut ws = Workspace::new(params.arch);
    forward(params, x, &mut ws);
    grad_x_from_workspace(params, x, &mut ws)
}

/// `(V(x), grad_x V(x))` sharing one forward pass.
pub fn value_and_grad_x(params: &CertificateParams, x: &[f64]) -> (f64, Vec<f64>) {
    let mut ws = Workspace::new(params.arch);
    let v = forward(params, x, &mut ws);
    (v, grad_x_from_workspace(params, x, &mut ws))
}

fn grad_x_from_workspace(params: &CertificateParams, x: &[f64], ws: &mut Workspace) -> Vec<f64> {
    let arch = params.arch;
    let (p, h, q) = (arch.input_dim, arch.hidden, arch.output_dim());
    let rows = arch.l_rows();
    for a in 0..rows {
        ws.ybar[a] = 2.0 * ws.y[a];
    }
    let mut xbar: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
    for a in 0..rows {
        let l_row = &ws.out[a * p..(a + 1) * p];
        let yb = ws.ybar[a];
        for b in 0..p {
            xbar[b] += l_row[b] * yb;
            ws.outbar[a * p + b] = yb * x[b];
        }
    }
    matvec_t(&params.w3, q, h, &ws.outbar, &mut ws.z2bar);
    for i in 0..h {
        ws.a2bar[i] = ws.z2bar[i] * (1.0 - ws.z2[i] * ws.z2[i]);
    }
    matvec_t(&params.w2, h, h, &ws.a2bar, &mut ws.z1bar);
    for i in 0..h {
        ws.a1bar[i] = ws.z1bar[i] * (1.0 - ws.z1[i] * ws.z1[i]);
    }
    let mut w1t = vec![0.0; p];
    matvec_t(&params.w1, h, p, &ws.a1bar, &mut w1t);
    for b in 0..p {
        xbar[b] += w1t[b];
    }
    xbar
}

/// The decrease expression `s = <grad_x V(x), v> + eta V(x)` for one sample.
pub fn decrease_value(params: &CertificateParams, x: &[f64], v: &[f64], eta: f64, ws: &mut Workspace) -> f64 {
    let val = forward(params, x, ws);
    let dir = forward_tangent(params, x, v, ws);
    dir + eta * val
}

/// Reverse pass over the primal+tangent graph: accumulates
/// `coeff * d s / d theta` into `grad` (flat layout). Must follow a
/// [`decrease_value`] call on the same `(x, v)` and workspace.
fn accumulate_grad_theta(
    params: &CertificateParams,
    x: &[f64],
    v: &[f64],
    eta: f64,
    coeff: f64,
    ws: &mut Workspace,
    grad: &mut [f64],
) {
    let arch = params.arch;
    let (p, h, q) = (arch.input_dim, arch.hidden, arch.output_dim());
    let rows = arch.l_rows();
    // s = 2<y, dy> + 2<x, v> + eta (<y, y> + <x, x>)
    for a in 0..rows {
        ws.ybar[a] = 2.0 * ws.dy[a] + 2.0 * eta * ws.y[a];
        ws.dybar[a] = 2.0 * ws.y[a];
    }
    // y = L x, dy = dL x + L v
    for a in 0..rows {
        for b in 0..p {
            ws.outbar[a * p + b] = ws.ybar[a] * x[b] + ws.dybar[a] * v[b];
            ws.doutbar[a * p + b] = ws.dybar[a] * x[b];
        }
    }
    // out = W3 z2 + b3, dout = W3 dz2
    let (w1_at, b1_at, w2_at, b2_at, w3_at, b3_at) = flat_offsets(arch);
    {
        let w3bar = &mut grad[w3_at..w3_at + q * h];
        if coeff == 1.0 {
            outer_acc(w3bar, &ws.outbar, &ws.z2);
            outer_acc(w3bar, &ws.doutbar, &ws.dz2);
        } else {
            scaled_outer_acc(w3bar, &ws.outbar, &ws.z2, coeff);
            scaled_outer_acc(w3bar, &ws.doutbar, &ws.dz2, coeff);
        }
        for i in 0..q {
            grad[b3_at + i] += coeff * ws.outbar[i];
        }
    }
    matvec_t(&params.w3, q, h, &ws.outbar, &mut ws.z2bar);
    matvec_t(&params.w3, q, h, &ws.doutbar, &mut ws.dz2bar);
    // dz2 = (1 - z2^2) . da2
    for i in 0..h {
        ws.z2bar[i] += ws.dz2bar[i] * (-2.0 * ws.z2[i] * ws.da2[i]);
        ws.da2bar[i] = ws.dz2bar[i] * (1.0 - ws.z2[i] * ws.z2[i]);
        ws.a2bar[i] = ws.z2bar[i] * (1.0 - ws.z2[i] * ws.z2[i]);
    }
    {
        let w2bar = &mut grad[w2_at..w2_at + h * h];
        scaled_outer_acc(w2bar, &ws.a2bar, &ws.z1, coeff);
        scaled_outer_acc(w2bar, &ws.da2bar, &ws.dz1, coeff);
        for i in 0..h {
            grad[b2_at + i] += coeff * ws.a2bar[i];
        }
    }
    matvec_t(&params.w2, h, h, &ws.a2bar, &mut ws.z1bar);
    matvec_t(&params.w2, h, h, &ws.da2bar, &mut ws.dz1bar);
    for i in 0..h {
        ws.z1bar[i] += ws.dz1bar[i] * (-2.0 * ws.z1[i] * ws.da1[i]);
        ws.da1bar[i] = ws.dz1bar[i] * (1.0 - ws.z1[i] * ws.z1[i]);
        ws.a1bar[i] = ws.z1bar[i] * (1.0 - ws.z1[i] * ws.z1[i]);
    }
    {
        let w1bar = &mut grad[w1_at..w1_at + h * p];
        scaled_outer_acc(w1bar, &ws.a1bar, x, coeff);
        scaled_outer_acc(w1bar, &ws.da1bar, v, coeff);
        for i in 0..h {
            grad[b1_at + i] += coeff * ws.a1bar[i];
        }
    }
}

fn scaled_outer_acc(a: &mut [f64], u: &[f64], v: &[f64], coeff: f64) {
    let cols = v.len();
    for (r, ur) in u.iter().enumerate() {
        let s = coeff * ur;
        let row = &mut a[r * cols..(r + 1) * cols];
        for (c, vc) in v.iter().enumerate() {
            row[c] += s * vc;
        }
    }
}

fn flat_offsets(arch: MlpArchitecture) -> (usize, usize, usize, usize, usize, usize) {
    let (p, h, q) = (arch.input_dim, arch.hidden, arch.output_dim());
    let w1 = 0;
    let b1 = w1 + h * p;
    let w2 = b1 + h;
    let b2 = w2 + h * h;
    let w3 = b2 + h;
    let b3 = w3 + q * h;
    (w1, b1, w2, b2, w3, b3)
}

/// Surrogate training loss over a batch of `(x, x')` samples:
///
/// ```text
/// L(theta; eta, lambda) = sum_i relu(<grad V(x_i), x'_i> + eta V(x_i)) + lambda ||theta||^2
/// ```
///
/// Returns the loss and its exact parameter gradient (flat layout). The
/// relu subgradient at exactly zero is taken as zero. Work is chunked and
/// tree-reduced, so the result is independent of thread count.
pub fn surrogate_loss_grad(
    params: &CertificateParams,
    dim: usize,
    xs: &[f64],
    dxs: &[f64],
    indices: &[usize],
    eta: f64,
    lambda: f64,
) -> (f64, Vec<f64>) {
    assert!(!indices.is_empty(), "batch must be non-empty");
    assert!(eta >= 0.0 && lambda >= 0.0);
    let k = params.arch.param_count();
    let parts = exec::map_chunks(indices.len(), |a, b| {
        let mut ws = Workspace::new(params.arch);
        let mut grad = vec![0.0; k];
        let mut loss = 0.0;
        for &i in &indices[a..b] {
            let x = &xs[i * dim..(i + 1) * dim];
            let v = &dxs[i * dim..(i + 1) * dim];
            let s = decrease_value(params, x, v, eta, &mut ws);
            if s > 0.0 {
                loss += s;
                accumulate_grad_theta(params, x, v, eta, 1.0, &mut ws, &mut grad);
            }
        }
        (loss, grad)
    });
    let (losses, grads): (Vec<f64>, Vec<Vec<f64>>) = parts.into_iter().unzip();
    let mut grad = exec::tree_sum_vecs(grads);
    let mut loss = exec::tree_sum(losses);
    let theta = params.flatten();
    loss += lambda * dot(&theta, &theta);
    for (g, t) in grad.iter_mut().zip(&theta) {
        *g += 2.0 * lambda * t;
    }
    (loss, grad)
}

/// Value-only surrogate loss (no parameter gradient); used for feasibility
/// tracking and phase diagnostics. Same chunked tree accumulation as
/// [`surrogate_loss_grad`], so the two agree bitwise on the loss.
pub fn surrogate_loss(
    params: &CertificateParams,
    dim: usize,
    xs: &[f64],
    dxs: &[f64],
    indices: &[usize],
    eta: f64,
    lambda: f64,
) -> f64 {
    assert!(!indices.is_empty(), "batch must be non-empty");
    let parts = exec::map_chunks(indices.len(), |a, b| {
        let mut ws = Workspace::new(params.arch);
        let mut loss = 0.0;
        for &i in &indices[a..b] {
            let x = &xs[i * dim..(i + 1) * dim];
            let v = &dxs[i * dim..(i + 1) * dim];
            let s = decrease_value(params, x, v, eta, &mut ws);
            if s > 0.0 {
                loss += s;
            }
        }
        loss
    });
    let theta = params.flatten();
    exec::tree_sum(parts) + lambda * dot(&theta, &theta)
}

/// Always-sequential twin of [`surrogate_loss_grad`]; exists so the benches
/// can compare execution paths. Bit-identical to the parallel path.
pub fn surrogate_loss_grad_seq(
    params: &CertificateParams,
    dim: usize,
    xs: &[f64],
    dxs: &[f64],
    indices: &[usize],
    eta: f64,
    lambda: f64,
) -> (f64, Vec<f64>) {
    assert!(!indices.is_empty(), "batch must be non-empty");
    let k = params.arch.param_count();
    let parts = exec::map_chunks_seq(indices.len(), |a, b| {
        let mut ws = Workspace::new(params.arch);
        let mut grad = vec![0.0; k];
        let mut loss = 0.0;
        for &i in &indices[a..b] {
            let x = &xs[i * dim..(i + 1) * dim];
            let v = &dxs[i * dim..(i + 1) * dim];
            let s = decrease_value(params, x, v, eta, &mut ws);
            if s > 0.0 {
                loss += s;
                accumulate_grad_theta(params, x, v, eta, 1.0, &mut ws, &mut grad);
            }
        }
        (loss, grad)
    });
    let (losses, grads): (Vec<f64>, Vec<Vec<f64>>) = parts.into_iter().unzip();
    let mut grad = exec::tree_sum_vecs(grads);
    let mut loss = exec::tree_sum(losses);
    let theta = params.flatten();
    loss += lambda * dot(&theta, &theta);
    for (g, t) in grad.iter_mut().zip(&theta) {
        *g += 2.0 * lambda * t;
    }
    (loss, grad)
}

impl Certificate for CertificateParams {
    fn dim(&self) -> usize {
        self.arch.input_dim
    }

    fn value(&self, x: &[f64]) -> f64 {
        eval_v(self, x)
    }

    fn grad(&self, x: &[f64]) -> Vec<f64> {
        grad_x_v(self, x)
    }

    fn value_and_grad(&self, x: &[f64]) -> (f64, Vec<f64>) {
        value_and_grad_x(self, x)
    }
}

/// Adam state with a cosine learning-rate schedule.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    pub step: usize,
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub base_lr: f64,
    pub total_steps: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl OptimizerState {
    pub fn new(param_count: usize, base_lr: f64, total_steps: usize) -> Self {
        assert!(total_steps >= 1);
        Self {
            step: 0,
            first_moment: vec![0.0; param_count],
            second_moment: vec![0.0; param_count],
            base_lr,
            total_steps,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    /// `base_lr * 0.5 * (1 + cos(pi * step / total))`, clamped past the end.
    pub fn learning_rate(&self) -> f64 {
        let frac = (self.step.min(self.total_steps) as f64) / (self.total_steps as f64);
        self.base_lr * 0.5 * (1.0 + (std::f64::consts::PI * frac).cos())
    }
}

/// One bias-corrected Adam update in place.
pub fn adam_step(state: &mut OptimizerState, theta: &mut [f64], grad: &[f64]) {
    assert_eq!(theta.len(), grad.len());
    assert_eq!(theta.len(), state.first_moment.len());
    let lr = state.learning_rate();
    let t = (state.step + 1) as i32;
    let bc1 = 1.0 - state.beta1.powi(t);
    let bc2 = 1.0 - state.beta2.powi(t);
    for i in 0..theta.len() {
        let g = grad[i];
        state.first_moment[i] = state.beta1 * state.first_moment[i] + (1.0 - state.beta1) * g;
        state.second_moment[i] = state.beta2 * state.second_moment[i] + (1.0 - state.beta2) * g * g;
        let mhat = state.first_moment[i] / bc1;
        let vhat = state.second_moment[i] / bc2;
        theta[i] -= lr * mhat / (vhat.sqrt() + state.eps);
    }
    state.step += 1;
}

/// Renders the versioned checkpoint document with 17-significant-digit
/// floats.
pub fn to_checkpoint_json(params: &CertificateParams) -> String {
    let theta = params.flatten();
    let mut s = String::with_capacity(theta.len() * 26 + 64);
    s.push_str(&format!(
        "{{\"version\":1,\"arch\":{{\"p\":{},\"h\":{}}},\"theta\":[",
        params.arch.input_dim, params.arch.hidden
    ));
    for (i, v) in theta.iter().enumerate() {
        if i > 0 {
            s.push(',');
        }
        s.push_str(&crate::report::float17(*v));
    }
    s.push_str("]}");
    s
}

#[derive(serde::Deserialize)]
struct CheckpointDoc {
    version: u32,
    arch: ArchDoc,
    theta: Vec<f64>,
}

#[derive(serde::Deserialize)]
struct ArchDoc {
    p: usize,
    h: usize,
}

/// Parses a checkpoint, rejecting version or dimension mismatches.
pub fn from_checkpoint_json(text: &str) -> Result<CertificateParams, CertnetError> {
    let doc: CheckpointDoc =
        serde_json::from_str(text).map_err(|e| CertnetError::BadCheckpoint(e.to_string()))?;
    if doc.version != 1 {
        return Err(CertnetError::BadCheckpoint(format!(
            "unsupported version {}",
            doc.version
        )));
    }
    if doc.arch.p < 1 || doc.arch.h < 1 {
        return Err(CertnetError::BadCheckpoint("degenerate architecture".into()));
    }
    let arch = MlpArchitecture::new(doc.arch.p, doc.arch.h);
    if doc.theta.len() != arch.param_count() {
        return Err(CertnetError::BadCheckpoint(format!(
            "theta length {} does not match architecture (expected {})",
            doc.theta.len(),
            arch.param_count()
        )));
    }
    if !doc.theta.iter().all(|v| v.is_finite()) {
        return Err(CertnetError::BadCheckpoint("non-finite weight".into()));
    }
    CertificateParams::from_flat(arch, &doc.theta)
}
