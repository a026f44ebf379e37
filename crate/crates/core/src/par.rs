//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (default) work items run on the current rayon
//! pool; without it they run in order on the calling thread. Results are always
//! returned in index order, so both paths produce identical output.

use crate::error::{Error, Result};

/// Map `f` over `0..n`, collecting results in index order.
#[cfg(feature = "parallel")]
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}

/// Fallible [`map_indexed`]; the first error in index order wins.
pub fn try_map_indexed<T, F>(n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    map_indexed(n, f).into_iter().collect()
}

/// Run `f` with at most `jobs` worker threads.
///
/// `jobs == 0` means "use the global pool". Without the `parallel` feature the
/// value is ignored.
#[cfg(feature = "parallel")]
pub fn with_jobs<T, F>(jobs: usize, f: F) -> Result<T>
where
    T: Send,
    F: FnOnce() -> T + Send,
{
    if jobs == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Argument(format!("cannot build thread pool: {e}")))?;
    Ok(pool.install(f))
}

#[cfg(not(feature = "parallel"))]
pub fn with_jobs<T, F>(_jobs: usize, f: F) -> Result<T>
where
    F: FnOnce() -> T,
{
    Ok(f())
}

/// Whether this build runs work items concurrently.
pub const fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}
