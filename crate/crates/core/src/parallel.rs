//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature enabled (default) the helpers dispatch to
//! rayon once the workload is large enough to amortize scheduling; otherwise
//! they run plain loops. Every helper assigns work by index and keeps each
//! unit's floating-point evaluation order fixed, so parallel and sequential
//! execution produce bit-identical results. Tests that assert byte-identical
//! outputs therefore pass under any thread count.

/// Minimum per-call work (in rough flop units) before rayon is used.
pub const PAR_THRESHOLD: usize = 1 << 16;

/// Whether this build can parallelize at all.
pub fn parallel_enabled() -> bool {
    cfg!(feature = "parallel")
}

/// Run `f` on every index in `0..n`, in parallel when worthwhile.
///
/// `work` is an estimate of total flops across all indices.
pub fn for_each_index<F>(n: usize, work: usize, f: F)
where
    F: Fn(usize) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if work >= PAR_THRESHOLD && rayon::current_num_threads() > 1 && n > 1 {
            use rayon::prelude::*;
            (0..n).into_par_iter().for_each(f);
            return;
        }
    }
    let _ = work;
    for i in 0..n {
        f(i);
    }
}

/// Mutate disjoint `chunk`-sized pieces of `data` by chunk index.
pub fn for_each_chunk_mut<T, F>(data: &mut [T], chunk: usize, work: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    assert!(chunk > 0);
    #[cfg(feature = "parallel")]
    {
        if work >= PAR_THRESHOLD && rayon::current_num_threads() > 1 && data.len() > chunk {
            use rayon::prelude::*;
            data.par_chunks_mut(chunk).enumerate().for_each(|(i, c)| f(i, c));
            return;
        }
    }
    let _ = work;
    for (i, c) in data.chunks_mut(chunk).enumerate() {
        f(i, c);
    }
}

/// Map `0..n` to a vector, computing entries in parallel when worthwhile.
pub fn map_indices<T, F>(n: usize, work: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if work >= PAR_THRESHOLD && rayon::current_num_threads() > 1 && n > 1 {
            use rayon::prelude::*;
            return (0..n).into_par_iter().map(f).collect();
        }
    }
    let _ = work;
    (0..n).map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};

    #[test]
    fn for_each_index_visits_all() {
        let hits = AtomicUsize::new(0);
        for_each_index(100, PAR_THRESHOLD * 2, |_| {
            hits.fetch_add(1, Ordering::Relaxed);
        });
        assert_eq!(hits.load(Ordering::Relaxed), 100);
    }

    #[test]
    fn chunk_mut_covers_disjointly() {
        let mut v = vec![0usize; 12];
        for_each_chunk_mut(&mut v, 4, usize::MAX, |i, c| {
            for x in c {
                *x = i + 1;
            }
        });
        assert_eq!(v, vec![1, 1, 1, 1, 2, 2, 2, 2, 3, 3, 3, 3]);
    }

    #[test]
    fn map_indices_ordered() {
        let v = map_indices(8, usize::MAX, |i| i * i);
        assert_eq!(v, vec![0, 1, 4, 9, 16, 25, 36, 49]);
    }
}
