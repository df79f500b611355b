//! Data-parallel helpers with a sequential fallback. With the `parallel`
//! feature (default) the work runs on rayon; without it the same
//! functions run sequentially. Output order always matches input order,
//! and chunked reductions use a fixed chunk size so results do not depend
//! on thread scheduling.

/// Chunk size for deterministic chunked reductions.
pub const REDUCE_CHUNK: usize = 1024;

#[cfg(feature = "parallel")]
pub fn map_collect<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_collect<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U,
{
    items.iter().map(f).collect()
}

/// Always-sequential variant, kept public so benchmarks can compare the
/// two paths within one build.
pub fn map_collect_seq<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U,
{
    items.iter().map(f).collect()
}

/// Map fixed-size index chunks and fold the per-chunk results in chunk
/// order. The fold order is identical however many threads run, so the
/// reduction is deterministic per build configuration.
#[cfg(feature = "parallel")]
pub fn chunked_fold<U, F, G>(n: usize, map_chunk: F, mut fold: G, init: U) -> U
where
    U: Send,
    F: Fn(std::ops::Range<usize>) -> U + Sync + Send,
    G: FnMut(U, U) -> U,
{
    use rayon::prelude::*;
    let chunks: Vec<std::ops::Range<usize>> = (0..n)
        .step_by(REDUCE_CHUNK)
        .map(|start| start..(start + REDUCE_CHUNK).min(n))
        .collect();
    let parts: Vec<U> = chunks.into_par_iter().map(map_chunk).collect();
    parts.into_iter().fold(init, &mut fold)
}

#[cfg(not(feature = "parallel"))]
pub fn chunked_fold<U, F, G>(n: usize, map_chunk: F, mut fold: G, init: U) -> U
where
    F: Fn(std::ops::Range<usize>) -> U,
    G: FnMut(U, U) -> U,
{
    let mut acc = init;
    let mut start = 0;
    while start < n {
        let end = (start + REDUCE_CHUNK).min(n);
        acc = fold(acc, map_chunk(start..end));
        start = end;
    }
    acc
}

/// Always-sequential variant of [`chunked_fold`] with the same chunking,
/// for benchmark comparison. Produces bit-identical results.
pub fn chunked_fold_seq<U, F, G>(n: usize, map_chunk: F, mut fold: G, init: U) -> U
where
    F: Fn(std::ops::Range<usize>) -> U,
    G: FnMut(U, U) -> U,
{
    let mut acc = init;
    let mut start = 0;
    while start < n {
        let end = (start + REDUCE_CHUNK).min(n);
        acc = fold(acc, map_chunk(start..end));
        start = end;
    }
    acc
}
