//! Small dense linear-algebra helpers on plain `f64` slices.
//!
//! Everything here operates on row-major buffers. The systems in this crate
//! are low-dimensional (p = 1..4), so we favor simple loops over a matrix
//! library.

/// Euclidean inner product.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Euclidean norm.
pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += alpha * x`.
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// `out = A x` for a row-major `rows x cols` matrix.
pub fn matvec(a: &[f64], rows: usize, cols: usize, x: &[f64], out: &mut [f64]) {
    debug_assert_eq!(a.len(), rows * cols);
    debug_assert_eq!(x.len(), cols);
    debug_assert_eq!(out.len(), rows);
    for r in 0..rows {
        let row = &a[r * cols..(r + 1) * cols];
        out[r] = dot(row, x);
    }
}

/// `out = A^T x` for a row-major `rows x cols` matrix (so `out` has `cols` entries).
pub fn matvec_t(a: &[f64], rows: usize, cols: usize, x: &[f64], out: &mut [f64]) {
    debug_assert_eq!(a.len(), rows * cols);
    debug_assert_eq!(x.len(), rows);
    debug_assert_eq!(out.len(), cols);
    out.fill(0.0);
    for r in 0..rows {
        let row = &a[r * cols..(r + 1) * cols];
        let xr = x[r];
        for c in 0..cols {
            out[c] += row[c] * xr;
        }
    }
}

/// Rank-one accumulation `A += u v^T` into a row-major `rows x cols` buffer.
pub fn outer_acc(a: &mut [f64], u: &[f64], v: &[f64]) {
    debug_assert_eq!(a.len(), u.len() * v.len());
    let cols = v.len();
    for (r, ur) in u.iter().enumerate() {
        let row = &mut a[r * cols..(r + 1) * cols];
        for (c, vc) in v.iter().enumerate() {
            row[c] += ur * vc;
        }
    }
}

/// Eigenvalues of a symmetric `n x n` matrix by the cyclic Jacobi method.
///
/// Input is row-major and is symmetrized internally; returns eigenvalues in
/// ascending order. Adequate for the small metric/Jacobian matrices used by
/// the contraction checks.
pub fn symmetric_eigenvalues(m: &[f64], n: usize) -> Vec<f64> {
    debug_assert_eq!(m.len(), n * n);
    if n == 1 {
        return vec![m[0]];
    }
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            a[i * n + j] = 0.5 * (m[i * n + j] + m[j * n + i]);
        }
    }
    // Cyclic sweeps; convergence is quadratic, 30 sweeps is far beyond need.
    for _ in 0..30 {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += a[i * n + j] * a[i * n + j];
            }
        }
        if off <= 1e-300 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    -1.0 / (-theta + (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut eigs: Vec<f64> = (0..n).map(|i| a[i * n + i]).collect();
    eigs.sort_by(|x, y| x.partial_cmp(y).unwrap());
    eigs
}

/// Largest eigenvalue of a symmetric matrix.
pub fn max_symmetric_eigenvalue(m: &[f64], n: usize) -> f64 {
    *symmetric_eigenvalues(m, n)
        .last()
        .expect("non-empty eigenvalue list")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jacobi_matches_known_2x2_spectrum() {
        // [[2, 1], [1, 2]] has eigenvalues {1, 3}.
        let eigs = symmetric_eigenvalues(&[2.0, 1.0, 1.0, 2.0], 2);
        assert!((eigs[0] - 1.0).abs() < 1e-12);
        assert!((eigs[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn jacobi_diagonal_passthrough() {
        let eigs = symmetric_eigenvalues(&[-4.0, 0.0, 0.0, 7.5], 2);
        assert_eq!(eigs, vec![-4.0, 7.5]);
    }

    #[test]
    fn jacobi_3x3_trace_preserved() {
        let m = [4.0, 1.0, 0.5, 1.0, 3.0, -0.2, 0.5, -0.2, 1.0];
        let eigs = symmetric_eigenvalues(&m, 3);
        let trace: f64 = eigs.iter().sum();
        assert!((trace - 8.0).abs() < 1e-10);
        // Characteristic polynomial check at each eigenvalue via determinant.
        for &l in &eigs {
            let d = det3(
                m[0] - l,
                m[1],
                m[2],
                m[3],
                m[4] - l,
                m[5],
                m[6],
                m[7],
                m[8] - l,
            );
            assert!(d.abs() < 1e-8, "det at eigenvalue {l} was {d}");
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn det3(
        a: f64,
        b: f64,
        c: f64,
        d: f64,
        e: f64,
        f: f64,
        g: f64,
        h: f64,
        i: f64,
    ) -> f64 {
        a * (e * i - f * h) - b * (d * i - f * g) + c * (d * h - e * g)
    }

    #[test]
    fn matvec_and_transpose_agree_with_hand_values() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0]; // 2x3
        let mut out = [0.0; 2];
        matvec(&a, 2, 3, &[1.0, 0.0, -1.0], &mut out);
        assert_eq!(out, [-2.0, -2.0]);
        let mut out_t = [0.0; 3];
        matvec_t(&a, 2, 3, &[1.0, -1.0], &mut out_t);
        assert_eq!(out_t, [-3.0, -3.0, -3.0]);
    }
}
