//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (default) the helpers fan out over the rayon
//! global pool. Without it, or after `set_exec_mode(ExecMode::Sequential)`,
//! they run on the calling thread.
//!
//! Every helper partitions work by *output* element: each output slot is
//! computed by exactly one closure call whose internal summation order does
//! not depend on the schedule. Results are therefore bit-identical across
//! thread counts and across the two modes.

use std::sync::atomic::{AtomicU8, Ordering};

/// Execution mode for the data-parallel kernels.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExecMode {
    Sequential,
    Parallel,
}

const SEQUENTIAL: u8 = 0;
const PARALLEL: u8 = 1;

static MODE: AtomicU8 = AtomicU8::new(PARALLEL);

/// Work (in flops, roughly) below which a kernel stays on the calling thread.
pub const MIN_PARALLEL_WORK: usize = 1 << 15;

/// Selects the execution mode process-wide. A no-op request for
/// `Parallel` when the crate is built without the `parallel` feature.
pub fn set_exec_mode(mode: ExecMode) {
    let v = match mode {
        ExecMode::Sequential => SEQUENTIAL,
        ExecMode::Parallel => PARALLEL,
    };
    MODE.store(v, Ordering::Relaxed);
}

pub fn exec_mode() -> ExecMode {
    if cfg!(feature = "parallel") && MODE.load(Ordering::Relaxed) == PARALLEL {
        ExecMode::Parallel
    } else {
        ExecMode::Sequential
    }
}

/// Number of worker threads the parallel mode would use.
pub fn current_num_threads() -> usize {
    #[cfg(feature = "parallel")]
    {
        rayon::current_num_threads()
    }
    #[cfg(not(feature = "parallel"))]
    {
        1
    }
}

#[cfg(feature = "parallel")]
fn go_parallel(work: usize) -> bool {
    work >= MIN_PARALLEL_WORK && exec_mode() == ExecMode::Parallel
}

/// `(0..n).map(f).collect()`, in parallel when `work` is large enough.
pub fn map_collect<T, F>(n: usize, work: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if go_parallel(work) {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = work;
    (0..n).map(f).collect()
}

/// Calls `f(index, chunk)` for each `chunk_len`-sized chunk of `data`.
pub fn for_each_chunk_mut<T, F>(data: &mut [T], chunk_len: usize, work: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    if chunk_len == 0 {
        return;
    }
    #[cfg(feature = "parallel")]
    if go_parallel(work) {
        use rayon::prelude::*;
        data.par_chunks_mut(chunk_len).enumerate().for_each(|(i, c)| f(i, c));
        return;
    }
    let _ = work;
    data.chunks_mut(chunk_len).enumerate().for_each(|(i, c)| f(i, c));
}

/// Runs `f` inside a pool of `workers` threads (0 = rayon default). Falls
/// back to a plain call without the `parallel` feature.
pub fn install<R, F>(workers: usize, f: F) -> R
where
    R: Send,
    F: FnOnce() -> R + Send,
{
    #[cfg(feature = "parallel")]
    {
        match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
            Ok(pool) => pool.install(f),
            Err(e) => {
                log::warn!("could not build a {workers}-thread pool ({e}); using the global pool");
                f()
            }
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = workers;
        f()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_collect_preserves_order() {
        let v = map_collect(100, usize::MAX, |i| i * i);
        assert_eq!(v[7], 49);
        assert_eq!(v.len(), 100);
    }

    #[test]
    fn chunks_cover_every_element() {
        let mut data = vec![0usize; 103];
        for_each_chunk_mut(&mut data, 10, usize::MAX, |ci, c| {
            for (k, x) in c.iter_mut().enumerate() {
                *x = ci * 10 + k;
            }
        });
        assert!(data.iter().enumerate().all(|(i, &x)| i == x));
    }
}
