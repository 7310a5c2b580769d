//! Indexed parallel map with results in index order.
//!
//! Each task owns its random stream, so the output depends only on the
//! indices, never on scheduling or the worker count.

#[cfg(feature = "parallel")]
use crate::error::Error;
use crate::error::Result;

/// Runs `f(0..count)` on `workers` threads (0 = all cores) and returns the
/// results in index order.
#[cfg(feature = "parallel")]
pub fn map_indexed<T, F>(count: u64, workers: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    use rayon::prelude::*;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(|| (0..count).into_par_iter().map(f).collect()))
}

#[cfg(not(feature = "parallel"))]
pub fn map_indexed<T, F>(count: u64, _workers: usize, f: F) -> Result<Vec<T>>
where
    F: Fn(u64) -> T,
{
    Ok((0..count).map(f).collect())
}
