//! Execution strategy for the data-parallel loops (Monte Carlo paths,
//! particle blocks, red-black relaxation sweeps).
//!
//! With the `parallel` feature the loops run on the rayon pool; without it,
//! or with [`Execution::Sequential`], they run on the calling thread. Both
//! strategies produce bitwise-identical results: work items own their RNG
//! streams and every reduction is performed in a fixed order.

#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// True when this strategy actually fans out to the thread pool.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// Evaluates `f(i)` for `i in 0..n` and collects in index order.
pub fn map_indexed<T, F>(exec: Execution, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..n).map(f).collect()
}

/// Applies `f(chunk_index, chunk)` over consecutive mutable chunks.
pub fn for_each_chunk_mut<T, F>(exec: Execution, data: &mut [T], chunk: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        data.par_chunks_mut(chunk)
            .enumerate()
            .for_each(|(k, c)| f(k, c));
        return;
    }
    let _ = exec;
    data.chunks_mut(chunk).enumerate().for_each(|(k, c)| f(k, c));
}

/// Zips two equally chunked mutable slices and applies `f` chunkwise.
pub fn for_each_chunk_pair_mut<A, B, F>(
    exec: Execution,
    a: &mut [A],
    b: &mut [B],
    chunk: usize,
    f: F,
) where
    A: Send,
    B: Send,
    F: Fn(usize, &mut [A], &mut [B]) + Sync + Send,
{
    assert_eq!(a.len(), b.len());
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        a.par_chunks_mut(chunk)
            .zip(b.par_chunks_mut(chunk))
            .enumerate()
            .for_each(|(k, (ca, cb))| f(k, ca, cb));
        return;
    }
    let _ = exec;
    a.chunks_mut(chunk)
        .zip(b.chunks_mut(chunk))
        .enumerate()
        .for_each(|(k, (ca, cb))| f(k, ca, cb));
}

/// Like [`for_each_chunk_pair_mut`], with one mutable state (for example an
/// RNG) per chunk.
pub fn for_each_block_mut<A, B, S, F>(
    exec: Execution,
    a: &mut [A],
    b: &mut [B],
    states: &mut [S],
    chunk: usize,
    f: F,
) where
    A: Send,
    B: Send,
    S: Send,
    F: Fn(usize, &mut [A], &mut [B], &mut S) + Sync + Send,
{
    assert_eq!(a.len(), b.len());
    assert_eq!(states.len(), a.len().div_ceil(chunk));
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        a.par_chunks_mut(chunk)
            .zip(b.par_chunks_mut(chunk))
            .zip(states.par_iter_mut())
            .enumerate()
            .for_each(|(k, ((ca, cb), s))| f(k, ca, cb, s));
        return;
    }
    let _ = exec;
    a.chunks_mut(chunk)
        .zip(b.chunks_mut(chunk))
        .zip(states.iter_mut())
        .enumerate()
        .for_each(|(k, ((ca, cb), s))| f(k, ca, cb, s));
}

/// Applies `f(chunk_index, chunk)` over mutable chunks and collects the
/// per-chunk results in chunk order.
pub fn map_chunks_mut<T, R, F>(exec: Execution, data: &mut [T], chunk: usize, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(usize, &mut [T]) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return data
            .par_chunks_mut(chunk)
            .enumerate()
            .map(|(k, c)| f(k, c))
            .collect();
    }
    let _ = exec;
    data.chunks_mut(chunk)
        .enumerate()
        .map(|(k, c)| f(k, c))
        .collect()
}

/// Per-chunk partial results over `0..n`, in chunk order. Summing the
/// returned partials sequentially gives an order-independent reduction.
pub fn chunk_partials<T, F>(exec: Execution, n: usize, chunk: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(std::ops::Range<usize>) -> T + Sync + Send,
{
    let n_chunks = n.div_ceil(chunk.max(1));
    map_indexed(exec, n_chunks, |k| {
        let lo = k * chunk;
        f(lo..(lo + chunk).min(n))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strategies_agree() {
        let seq = map_indexed(Execution::Sequential, 100, |i| (i as f64).sqrt());
        let par = map_indexed(Execution::Parallel, 100, |i| (i as f64).sqrt());
        assert_eq!(seq, par);

        let s: Vec<f64> = chunk_partials(Execution::Parallel, 1000, 64, |r| {
            r.map(|i| 1.0 / (1.0 + i as f64)).sum()
        });
        let t: Vec<f64> = chunk_partials(Execution::Sequential, 1000, 64, |r| {
            r.map(|i| 1.0 / (1.0 + i as f64)).sum()
        });
        assert_eq!(s, t);
    }

    #[test]
    fn chunk_pairs_cover_everything() {
        let mut a = vec![0usize; 37];
        let mut b = vec![0usize; 37];
        for_each_chunk_pair_mut(Execution::Parallel, &mut a, &mut b, 8, |k, ca, cb| {
            for (x, y) in ca.iter_mut().zip(cb.iter_mut()) {
                *x = k;
                *y = k + 1;
            }
        });
        assert_eq!(a[36], 4);
        assert!(a.iter().zip(&b).all(|(x, y)| y - x == 1));
    }
}
