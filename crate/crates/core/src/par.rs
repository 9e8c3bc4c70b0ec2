//! Index-ordered parallel map with a sequential fallback.
//!
//! With the `parallel` feature (default) work is spread over a rayon pool;
//! without it, or with [`Execution::Sequential`], every closure runs on the
//! calling thread. Results always come back in input order, so output never
//! depends on scheduling.

/// How a batch of independent evaluations is executed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    /// Use the global rayon pool.
    #[default]
    Parallel,
    /// Use a dedicated pool with this many threads.
    Workers(usize),
}

impl Execution {
    pub fn from_workers(workers: usize) -> Self {
        match workers {
            0 | 1 => Execution::Sequential,
            k => Execution::Workers(k),
        }
    }
}

/// Map `f` over `items`, returning results in input order.
pub fn map<T, R, F>(items: &[T], exec: Execution, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    map_indexed(items, exec, |_, item| f(item))
}

/// Like [`map`] but the closure also receives the item index.
pub fn map_indexed<T, R, F>(items: &[T], exec: Execution, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(usize, &T) -> R + Sync + Send,
{
    match exec {
        Execution::Sequential => items.iter().enumerate().map(|(i, t)| f(i, t)).collect(),
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            items.par_iter().enumerate().map(|(i, t)| f(i, t)).collect()
        }
        #[cfg(feature = "parallel")]
        Execution::Workers(k) => {
            use rayon::prelude::*;
            match rayon::ThreadPoolBuilder::new().num_threads(k).build() {
                Ok(pool) => {
                    pool.install(|| items.par_iter().enumerate().map(|(i, t)| f(i, t)).collect())
                }
                Err(_) => items.iter().enumerate().map(|(i, t)| f(i, t)).collect(),
            }
        }
        #[cfg(not(feature = "parallel"))]
        _ => items.iter().enumerate().map(|(i, t)| f(i, t)).collect(),
    }
}
