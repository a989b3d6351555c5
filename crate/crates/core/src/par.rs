//! Data-parallel map with a sequential fallback.
//!
//! With the `parallel` feature (default) work runs on a rayon pool whose
//! size is capped by the `STOKESLAB_THREADS` environment variable. Results
//! always come back in input order.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExecMode {
    Sequential,
    #[default]
    Parallel,
}

#[cfg(feature = "parallel")]
fn pool() -> Option<&'static rayon::ThreadPool> {
    use std::sync::OnceLock;
    static POOL: OnceLock<Option<rayon::ThreadPool>> = OnceLock::new();
    POOL.get_or_init(|| {
        let threads = std::env::var("STOKESLAB_THREADS")
            .ok()
            .and_then(|v| v.trim().parse::<usize>().ok())
            .filter(|&n| n > 0)?;
        rayon::ThreadPoolBuilder::new().num_threads(threads).build().ok()
    })
    .as_ref()
}

/// `items.iter().map(f)`, in parallel when enabled and requested.
pub fn map<T, U, F>(mode: ExecMode, items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if mode == ExecMode::Parallel && items.len() > 1 {
        use rayon::prelude::*;
        let run = || items.par_iter().map(&f).collect();
        return match pool() {
            Some(p) => p.install(run),
            None => run(),
        };
    }
    let _ = mode;
    items.iter().map(f).collect()
}

/// `(0..n).map(f)` with the same dispatch rules as [`map`].
pub fn map_range<U, F>(mode: ExecMode, n: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    let idx: Vec<usize> = (0..n).collect();
    map(mode, &idx, |&i| f(i))
}

/// True when this build can run in parallel at all.
pub fn parallel_available() -> bool {
    cfg!(feature = "parallel")
}
