//! Execution context for the data-parallel loops.
//!
//! Every parallel loop in this crate goes through [`Exec::map`], which keeps
//! results in index order, so output never depends on scheduling. Without the
//! `parallel` feature, [`Exec::Parallel`] runs sequentially.

/// Where data-parallel work runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Exec {
    Sequential,
    #[default]
    Parallel,
}

impl Exec {
    /// Map `f` over `0..len`, collecting results in index order.
    pub fn map<T, F>(self, len: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self {
            Exec::Sequential => (0..len).map(f).collect(),
            Exec::Parallel => par_map(len, f),
        }
    }

    /// True when this context actually fans out over threads.
    pub fn is_parallel(self) -> bool {
        self == Exec::Parallel && cfg!(feature = "parallel")
    }
}

#[cfg(feature = "parallel")]
fn par_map<T, F>(len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..len).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn par_map<T, F>(len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..len).map(f).collect()
}
