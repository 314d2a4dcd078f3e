//! Data-parallel execution with a bit-reproducible sequential fallback.
//!
//! The `parallel` feature (on by default) routes batch work through rayon.
//! Reductions always run over fixed index-aligned chunks combined by a
//! pairwise tree, so parallel and sequential builds, and any thread count,
//! produce identical floating-point results.

/// Chunk length for batched gradient/loss accumulation. Fixed so that the
/// reduction tree does not depend on thread count.
pub const CHUNK: usize = 128;

/// Maps `f` over `items`, preserving order. Parallel when the `parallel`
/// feature is enabled, otherwise equivalent to [`map_seq`].
#[cfg(feature = "parallel")]
pub fn map<T: Sync, U: Send, F: Fn(usize, &T) -> U + Sync>(items: &[T], f: F) -> Vec<U> {
    use rayon::prelude::*;
    items.par_iter().enumerate().map(|(i, t)| f(i, t)).collect()
}

/// Maps `f` over `items`, preserving order. Parallel when the `parallel`
/// feature is enabled, otherwise equivalent to [`map_seq`].
#[cfg(not(feature = "parallel"))]
pub fn map<T: Sync, U: Send, F: Fn(usize, &T) -> U + Sync>(items: &[T], f: F) -> Vec<U> {
    map_seq(items, f)
}

/// Always-sequential variant of [`map`]; used by the benches to compare the
/// two execution paths and by tests asserting schedule independence.
pub fn map_seq<T, U, F: Fn(usize, &T) -> U>(items: &[T], f: F) -> Vec<U> {
    items.iter().enumerate().map(|(i, t)| f(i, t)).collect()
}

/// Maps `f` over index ranges `[start, end)` covering `0..len` in fixed
/// [`CHUNK`]-sized blocks.
#[cfg(feature = "parallel")]
pub fn map_chunks<U: Send, F: Fn(usize, usize) -> U + Sync>(len: usize, f: F) -> Vec<U> {
    use rayon::prelude::*;
    chunk_ranges(len)
        .into_par_iter()
        .map(|(a, b)| f(a, b))
        .collect()
}

/// Maps `f` over index ranges `[start, end)` covering `0..len` in fixed
/// [`CHUNK`]-sized blocks.
#[cfg(not(feature = "parallel"))]
pub fn map_chunks<U: Send, F: Fn(usize, usize) -> U + Sync>(len: usize, f: F) -> Vec<U> {
    map_chunks_seq(len, f)
}

/// Always-sequential variant of [`map_chunks`].
pub fn map_chunks_seq<U, F: Fn(usize, usize) -> U>(len: usize, f: F) -> Vec<U> {
    chunk_ranges(len).into_iter().map(|(a, b)| f(a, b)).collect()
}

fn chunk_ranges(len: usize) -> Vec<(usize, usize)> {
    (0..len.div_ceil(CHUNK))
        .map(|c| (c * CHUNK, ((c + 1) * CHUNK).min(len)))
        .collect()
}

/// Sums equal-length vectors by pairwise tree reduction over the input order.
///
/// The association pattern is a pure function of `parts.len()`, never of the
/// thread schedule, which keeps batch gradients bit-reproducible.
pub fn tree_sum_vecs(mut parts: Vec<Vec<f64>>) -> Vec<f64> {
    assert!(!parts.is_empty(), "tree_sum_vecs needs at least one part");
    while parts.len() > 1 {
        let mut next = Vec::with_capacity(parts.len().div_ceil(2));
        let mut it = parts.into_iter();
        while let Some(mut a) = it.next() {
            if let Some(b) = it.next() {
                for (x, y) in a.iter_mut().zip(&b) {
                    *x += y;
                }
            }
            next.push(a);
        }
        parts = next;
    }
    parts.pop().unwrap()
}

/// Pairwise tree sum of scalars, same association pattern as
/// [`tree_sum_vecs`].
pub fn tree_sum(mut parts: Vec<f64>) -> f64 {
    if parts.is_empty() {
        return 0.0;
    }
    while parts.len() > 1 {
        let mut next = Vec::with_capacity(parts.len().div_ceil(2));
        let mut it = parts.into_iter();
        while let Some(a) = it.next() {
            next.push(if let Some(b) = it.next() { a + b } else { a });
        }
        parts = next;
    }
    parts[0]
}

/// Caps the rayon worker pool. No-op in sequential builds; never changes
/// results either way.
#[cfg(feature = "parallel")]
pub fn configure_threads(n: usize) -> Result<(), String> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

/// Caps the rayon worker pool. No-op in sequential builds; never changes
/// results either way.
#[cfg(not(feature = "parallel"))]
pub fn configure_threads(_n: usize) -> Result<(), String> {
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_and_sequential_maps_agree() {
        let xs: Vec<f64> = (0..1000).map(|i| i as f64 * 0.37).collect();
        let a = map(&xs, |i, x| (i as f64).mul_add(1e-3, x.sin()));
        let b = map_seq(&xs, |i, x| (i as f64).mul_add(1e-3, x.sin()));
        assert_eq!(a, b);
    }

    #[test]
    fn tree_sum_is_deterministic_and_close_to_naive() {
        let parts: Vec<f64> = (0..301).map(|i| ((i * 37) % 101) as f64 * 1e-3).collect();
        let naive: f64 = parts.iter().sum();
        let t1 = tree_sum(parts.clone());
        let t2 = tree_sum(parts);
        assert_eq!(t1.to_bits(), t2.to_bits());
        assert!((t1 - naive).abs() < 1e-9);
    }

    #[test]
    fn chunked_map_covers_every_index_once() {
        let got = map_chunks(1000, |a, b| (a, b));
        let mut covered = vec![false; 1000];
        for (a, b) in got {
            for c in covered.iter_mut().take(b).skip(a) {
                assert!(!*c);
                *c = true;
            }
        }
        assert!(covered.iter().all(|&c| c));
    }

    #[test]
    fn tree_sum_vecs_matches_elementwise() {
        let parts: Vec<Vec<f64>> = (0..9).map(|i| vec![i as f64, 2.0 * i as f64]).collect();
        let s = tree_sum_vecs(parts);
        assert_eq!(s, vec![36.0, 72.0]);
    }
}
