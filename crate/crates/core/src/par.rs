//! Data-parallel helpers with a sequential fallback.
//!
//! Every helper produces output in input order, and reductions go through
//! [`chunked_reduce`], which splits work into fixed-size chunks and folds the
//! chunk results in chunk order. Results are therefore bitwise identical for
//! [`Execution::Sequential`], [`Execution::Parallel`] and any rayon thread count.
//!
//! Without the `parallel` feature, `Execution::Parallel` runs sequentially.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Items per chunk in deterministic reductions.
pub const REDUCE_CHUNK: usize = 2048;

/// How data-parallel inner loops are executed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// Whether this build can actually run work on the rayon pool.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// `(0..n).map(f).collect()`, possibly in parallel.
pub fn map_range<R, F>(exec: Execution, n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..n).map(f).collect()
}

/// Applies `f` to every element of `out` together with its index.
pub fn for_each_mut<T, F>(exec: Execution, out: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize, &mut T) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        out.par_iter_mut().enumerate().for_each(|(i, x)| f(i, x));
        return;
    }
    let _ = exec;
    out.iter_mut().enumerate().for_each(|(i, x)| f(i, x));
}

/// Folds `0..n` in chunks of [`REDUCE_CHUNK`] with `chunk_fn(range)`, then
/// combines chunk results left to right with `combine`.
pub fn chunked_reduce<A, F, C>(exec: Execution, n: usize, chunk_fn: F, combine: C) -> Option<A>
where
    A: Send,
    F: Fn(std::ops::Range<usize>) -> A + Sync + Send,
    C: FnMut(A, A) -> A,
{
    let chunks = n.div_ceil(REDUCE_CHUNK);
    let partials = map_range(exec, chunks, |c| {
        let start = c * REDUCE_CHUNK;
        chunk_fn(start..(start + REDUCE_CHUNK).min(n))
    });
    partials.into_iter().reduce(combine)
}

/// Sums `f(i)` over `0..n` with the deterministic chunk order.
pub fn sum_range<F>(exec: Execution, n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    chunked_reduce(exec, n, |r| r.map(&f).sum::<f64>(), |a, b| a + b).unwrap_or(0.0)
}
