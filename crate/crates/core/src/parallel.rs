//! Thin data-parallel helpers.
//!
//! With the `parallel` feature (default) the indexed maps fan out over rayon;
//! without it they run sequentially with identical results. Work is always
//! partitioned by index, never by reduction order, so outputs are bit-identical
//! regardless of thread count.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Evaluate `f(0..n)` and collect the results in index order.
#[cfg(feature = "parallel")]
pub fn map_indexed<T: Send>(n: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    (0..n).into_par_iter().map(f).collect()
}

/// Evaluate `f(0..n)` and collect the results in index order.
#[cfg(not(feature = "parallel"))]
pub fn map_indexed<T: Send>(n: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    (0..n).map(f).collect()
}

/// Sequential twin of [`map_indexed`], always single-threaded. Kept public so
/// benchmarks can compare the two code paths in a single run.
pub fn map_indexed_seq<T: Send>(n: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    (0..n).map(f).collect()
}

/// Apply `f` to disjoint chunks of `items`, in parallel when enabled.
///
/// The chunk boundaries depend only on `chunk` and `items.len()`, so the
/// partition (and therefore every float that comes out) is independent of the
/// thread count.
#[cfg(feature = "parallel")]
pub fn for_each_chunk_mut<T: Send>(
    items: &mut [T],
    chunk: usize,
    f: impl Fn(usize, &mut [T]) + Sync + Send,
) {
    items
        .par_chunks_mut(chunk)
        .enumerate()
        .for_each(|(i, c)| f(i, c));
}

/// Apply `f` to disjoint chunks of `items`, in parallel when enabled.
#[cfg(not(feature = "parallel"))]
pub fn for_each_chunk_mut<T: Send>(
    items: &mut [T],
    chunk: usize,
    f: impl Fn(usize, &mut [T]) + Sync + Send,
) {
    for (i, c) in items.chunks_mut(chunk).enumerate() {
        f(i, c);
    }
}
