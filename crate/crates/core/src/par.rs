//! Data-parallel helpers.
//!
//! With the `parallel` feature these run on the rayon pool; without it they
//! fall back to plain sequential iteration. Callers must not rely on the
//! evaluation order of the closures; results always come back in input order.

pub use self::actual::{map_indexed, map_slice, set_threads};

#[cfg(feature = "parallel")]
mod actual {
    use rayon::prelude::*;

    /// Maps `0..n` in parallel, collecting results in index order.
    pub fn map_indexed<R, F>(n: usize, f: F) -> Vec<R>
    where
        F: Fn(usize) -> R + Sync + Send,
        R: Send,
    {
        (0..n).into_par_iter().map(f).collect()
    }

    pub fn map_slice<T, R, F>(items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        F: Fn(&T) -> R + Sync + Send,
        R: Send,
    {
        items.par_iter().map(f).collect()
    }

    /// Caps the global worker count. Only the first call has any effect.
    pub fn set_threads(threads: usize) -> bool {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .is_ok()
    }
}

#[cfg(not(feature = "parallel"))]
mod actual {
    pub fn map_indexed<R, F>(n: usize, f: F) -> Vec<R>
    where
        F: Fn(usize) -> R + Sync + Send,
        R: Send,
    {
        (0..n).map(f).collect()
    }

    pub fn map_slice<T, R, F>(items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        F: Fn(&T) -> R + Sync + Send,
        R: Send,
    {
        items.iter().map(f).collect()
    }

    pub fn set_threads(_threads: usize) -> bool {
        false
    }
}
