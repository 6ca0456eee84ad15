//! Order-preserving map over index ranges, parallel when the `parallel`
//! feature is enabled. Callers reduce the returned vector sequentially.

use alloc::vec::Vec;

#[cfg(feature = "parallel")]
pub(crate) fn map_range<T, F>(len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..len).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn map_range<T, F>(len: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..len).map(f).collect()
}

/// Like [`map_range`] but only splits when there is enough work to matter.
pub(crate) fn map_range_min<T, F>(len: usize, min_parallel: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    if len < min_parallel {
        (0..len).map(f).collect()
    } else {
        map_range(len, f)
    }
}
