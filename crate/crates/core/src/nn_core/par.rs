//! Per-sample fan-out over the batch dimension.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Runs `f(n, chunk)` for each `chunk_len`-sized chunk of `out`.
/// Each chunk is written by exactly one call, so the result does not depend
/// on scheduling.
pub(crate) fn for_each_chunk<T, F>(out: &mut [T], chunk_len: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Send + Sync,
{
    if chunk_len == 0 {
        return;
    }
    #[cfg(feature = "parallel")]
    {
        if out.len() > chunk_len {
            out.par_chunks_mut(chunk_len)
                .enumerate()
                .for_each(|(n, c)| f(n, c));
            return;
        }
    }
    for (n, c) in out.chunks_mut(chunk_len).enumerate() {
        f(n, c);
    }
}

/// Maps `0..count` to values, in parallel when enabled. Output order is index order.
pub(crate) fn map_indices<R, F>(count: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Send + Sync,
{
    #[cfg(feature = "parallel")]
    {
        if count > 1 {
            return (0..count).into_par_iter().map(f).collect();
        }
    }
    (0..count).map(f).collect()
}
