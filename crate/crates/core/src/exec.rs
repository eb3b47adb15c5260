//! Data-parallel execution helpers.
//!
//! Every parallel loop in the crate goes through [`map_indexed`] so that the
//! output order (and therefore every floating-point result) is independent of
//! the number of worker threads.

/// Execution strategy for the data-parallel loops.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parallelism {
    Sequential,
    /// Uses the rayon global pool. Falls back to sequential execution when
    /// the crate is built without the `parallel` feature.
    Parallel,
}

impl Default for Parallelism {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Parallelism::Parallel
        } else {
            Parallelism::Sequential
        }
    }
}

impl Parallelism {
    /// True when loops will actually run on more than one thread.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Parallelism::Parallel
    }
}

/// Evaluates `f(0..n)` and returns the results in index order.
pub fn map_indexed<T, F>(par: Parallelism, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if par == Parallelism::Parallel {
            use rayon::prelude::*;
            return (0..n).into_par_iter().map(f).collect();
        }
    }
    let _ = par;
    (0..n).map(f).collect()
}

/// Applies `f` to every element of `out` together with its index.
pub fn for_each_mut<T, F>(par: Parallelism, out: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize, &mut T) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if par == Parallelism::Parallel {
            use rayon::prelude::*;
            out.par_iter_mut().enumerate().for_each(|(i, x)| f(i, x));
            return;
        }
    }
    let _ = par;
    out.iter_mut().enumerate().for_each(|(i, x)| f(i, x));
}
