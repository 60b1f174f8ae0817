//! Switch between rayon-backed and sequential execution of the data-parallel
//! loops (trial sweeps, per-term equation assembly, Gram construction).
//!
//! With the `parallel` feature disabled every path runs sequentially and
//! [`Parallelism::Rayon`] silently degrades to [`Parallelism::Sequential`].

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Parallelism {
    Sequential,
    Rayon,
}

impl Default for Parallelism {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Parallelism::Rayon
        } else {
            Parallelism::Sequential
        }
    }
}

impl Parallelism {
    /// Whether work will actually be spread over the rayon pool.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Parallelism::Rayon
    }
}

macro_rules! if_rayon {
    ($rayon_value: expr, $else_value: expr) => {{
        #[cfg(feature = "parallel")]
        {
            ($rayon_value)
        }
        #[cfg(not(feature = "parallel"))]
        {
            ($else_value)
        }
    }};
}

/// Map `f` over `0..len`, preserving index order in the output.
pub fn map_indexed<T, F>(par: Parallelism, len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    if par.is_parallel() {
        if_rayon!(
            (0..len).into_par_iter().map(f).collect(),
            (0..len).map(f).collect()
        )
    } else {
        (0..len).map(f).collect()
    }
}

/// Run `f` inside a dedicated pool of `workers` threads when parallel
/// execution is requested; otherwise call it directly.
pub fn with_workers<R, F>(par: Parallelism, workers: Option<usize>, f: F) -> R
where
    R: Send,
    F: FnOnce() -> R + Send,
{
    match (par.is_parallel(), workers) {
        (true, Some(n)) if n > 0 => if_rayon!(
            match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
                Ok(pool) => pool.install(f),
                Err(err) => {
                    log::warn!("could not build a {n}-thread pool ({err}); using the global pool");
                    f()
                }
            },
            f()
        ),
        _ => f(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved_in_both_modes() {
        let seq = map_indexed(Parallelism::Sequential, 100, |i| i * i);
        let par = map_indexed(Parallelism::Rayon, 100, |i| i * i);
        assert_eq!(seq, par);
        assert_eq!(seq[7], 49);
    }

    #[test]
    fn worker_pool_runs_closure() {
        let out = with_workers(Parallelism::Rayon, Some(2), || {
            map_indexed(Parallelism::Rayon, 10, |i| i + 1)
        });
        assert_eq!(out.iter().sum::<usize>(), 55);
    }
}
