//! Batch-mapping helper that fans independent work items out across a rayon
//! pool when the `parallel` feature is enabled.
//!
//! Everything in this crate is immutable value-passing, so data parallelism
//! needs no shared state beyond result collection. Callers pick a
//! [`Parallelism`] mode; without the feature only [`Parallelism::Sequential`]
//! exists and rayon is not compiled in at all.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// How a batch of independent work items is executed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parallelism {
    /// Run items one after another on the calling thread.
    Sequential,
    /// Fan items out across the global rayon pool.
    #[cfg(feature = "parallel")]
    Parallel,
}

impl Default for Parallelism {
    #[cfg(feature = "parallel")]
    fn default() -> Self {
        Parallelism::Parallel
    }

    #[cfg(not(feature = "parallel"))]
    fn default() -> Self {
        Parallelism::Sequential
    }
}

/// Maps `f` over `items`, preserving order of results.
pub fn map_vec<T, U, F>(mode: Parallelism, items: Vec<T>, f: F) -> Vec<U>
where
    T: Send,
    U: Send,
    F: Fn(T) -> U + Sync + Send,
{
    match mode {
        Parallelism::Sequential => items.into_iter().map(f).collect(),
        #[cfg(feature = "parallel")]
        Parallelism::Parallel => items.into_par_iter().map(f).collect(),
    }
}
