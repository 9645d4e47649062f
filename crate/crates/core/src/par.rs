//! Data-parallel map used for independent trials and support enumeration.
//!
//! With the `parallel` feature (default) work is spread over a rayon pool;
//! without it, or with [`Parallelism::Sequential`], items run in order on the
//! calling thread. Results are always returned in input order.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parallelism {
    Sequential,
    #[default]
    Parallel,
}

impl Parallelism {
    /// Whether parallel execution is compiled in.
    pub fn available() -> bool {
        cfg!(feature = "parallel")
    }
}

pub fn map<T, R, F>(items: Vec<T>, mode: Parallelism, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Sync + Send,
{
    match mode {
        #[cfg(feature = "parallel")]
        Parallelism::Parallel => {
            use rayon::prelude::*;
            items.into_par_iter().map(f).collect()
        }
        _ => items.into_iter().map(f).collect(),
    }
}

/// Worker threads `map` will use in `mode` (1 when sequential).
pub fn threads(mode: Parallelism) -> usize {
    match mode {
        #[cfg(feature = "parallel")]
        Parallelism::Parallel => rayon::current_num_threads(),
        _ => 1,
    }
}

/// Runs `f` with at most `jobs` worker threads (`None` = rayon default).
pub fn with_jobs<R: Send>(jobs: Option<usize>, f: impl FnOnce() -> R + Send) -> R {
    #[cfg(feature = "parallel")]
    if let Some(n) = jobs {
        if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build() {
            return pool.install(f);
        }
    }
    let _ = jobs;
    f()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn both_modes_preserve_order() {
        let items: Vec<u64> = (0..100).collect();
        let seq = map(items.clone(), Parallelism::Sequential, |x| x * x);
        let par = with_jobs(Some(2), || map(items, Parallelism::Parallel, |x| x * x));
        assert_eq!(seq, par);
    }
}
