//! The candidate-certificate interface shared by the adversary, violation,
//! and theory modules.
//!
//! A certificate is a continuously differentiable `V: R^p -> R_{>=0}` with
//! `V(0) = 0`; everything downstream only needs values and spatial
//! gradients.

/// A candidate Lyapunov function.
pub trait Certificate: Send + Sync {
    fn dim(&self) -> usize;

    /// `V(x)`.
    fn value(&self, x: &[f64]) -> f64;

    /// `grad V(x)`.
    fn grad(&self, x: &[f64]) -> Vec<f64>;

    /// `(V(x), grad V(x))` in one pass; override when a fused evaluation is
    /// cheaper.
    fn value_and_grad(&self, x: &[f64]) -> (f64, Vec<f64>) {
        (self.value(x), self.grad(x))
    }
}

/// The plain quadratic `V(x) = ||x||^2`: the closed-form oracle certificate
/// used throughout the scalar-system checks.
#[derive(Debug, Clone, Copy)]
pub struct QuadraticCertificate {
    dim: usize,
}

impl QuadraticCertificate {
    pub fn new(dim: usize) -> Self {
        Self { dim }
    }
}

impl Certificate for QuadraticCertificate {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &[f64]) -> f64 {
        x.iter().map(|v| v * v).sum()
    }

    fn grad(&self, x: &[f64]) -> Vec<f64> {
        x.iter().map(|v| 2.0 * v).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_value_and_grad() {
        let v = QuadraticCertificate::new(2);
        assert_eq!(v.value(&[3.0, 4.0]), 25.0);
        assert_eq!(v.grad(&[3.0, 4.0]), vec![6.0, 8.0]);
        assert_eq!(v.value(&[0.0, 0.0]), 0.0);
    }
}
