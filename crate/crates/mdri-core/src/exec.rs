//! Batch execution: data-parallel by default, sequential fallback.
//!
//! Every hot loop in the crate is phrased as an indexed map whose items are
//! independent and whose results are collected *in index order* before any
//! reduction. That makes the parallel and sequential paths produce identical
//! bytes, which the reproducibility contract of `simulate` relies on.
//!
//! With the `parallel` feature disabled the crate compiles without rayon and
//! `map_indexed` degrades to the sequential implementation.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Maps `f` over `0..n` and collects results in index order.
///
/// Dispatches to rayon when the `parallel` feature is enabled (the default),
/// otherwise runs sequentially. Both paths return identical vectors.
pub fn map_indexed<T: Send>(n: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        map_indexed_seq(n, f)
    }
}

/// Sequential reference implementation of [`map_indexed`].
///
/// Always compiled; the bench suite and the determinism tests compare it
/// against the parallel path.
pub fn map_indexed_seq<T>(n: usize, f: impl Fn(usize) -> T) -> Vec<T> {
    (0..n).map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_and_sequential_agree_bitwise() {
        let f = |i: usize| (i as f64).sin() * (i as f64 + 0.5).sqrt();
        let a = map_indexed(1000, f);
        let b = map_indexed_seq(1000, f);
        assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
}
