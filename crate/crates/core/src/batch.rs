//! Order-preserving batch evaluation.
//!
//! With the `parallel` feature (on by default) work items are spread over a
//! rayon pool; without it the same functions run sequentially. Either way the
//! output is in input order, so results are identical across both builds.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::spectral::RateSet;
use crate::stationary::{stationary_closed_form, stationary_null_space, StationaryError, StationaryReport};
use crate::kinetics::AtomState;

/// Whether this build evaluates batches on a thread pool.
pub const PARALLEL: bool = cfg!(feature = "parallel");

/// Maps `f` over `items`, keeping input order.
#[cfg(feature = "parallel")]
pub fn map_ordered<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_ordered<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    items.iter().map(f).collect()
}

/// Sequential reference path, always available.
pub fn map_sequential<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    F: Fn(&T) -> R,
{
    items.iter().map(f).collect()
}

/// Runs `op` with at most `workers` threads. `None` uses the global pool.
#[cfg(feature = "parallel")]
pub fn with_workers<R: Send>(workers: Option<usize>, op: impl FnOnce() -> R + Send) -> R {
    match workers {
        Some(n) if n > 0 => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(op),
            Err(e) => {
                log::warn!("could not build a {n}-thread pool ({e}); using the global pool");
                op()
            }
        },
        _ => op(),
    }
}

#[cfg(not(feature = "parallel"))]
pub fn with_workers<R: Send>(_workers: Option<usize>, op: impl FnOnce() -> R + Send) -> R {
    op()
}

pub fn closed_form_batch(rates: &[RateSet]) -> Vec<Result<StationaryReport, StationaryError>> {
    map_ordered(rates, stationary_closed_form)
}

pub fn null_space_batch(rates: &[RateSet]) -> Vec<Result<AtomState, StationaryError>> {
    map_ordered(rates, stationary_null_space)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved() {
        let items: Vec<u64> = (0..10_000).collect();
        let out = map_ordered(&items, |x| x * 3);
        assert_eq!(out, map_sequential(&items, |x| x * 3));
    }

    #[test]
    fn worker_limit_is_honoured() {
        let items: Vec<u64> = (0..100).collect();
        let out = with_workers(Some(2), || map_ordered(&items, |x| x + 1));
        assert_eq!(out[99], 100);
        #[cfg(feature = "parallel")]
        assert_eq!(with_workers(Some(3), rayon::current_num_threads), 3);
    }

    #[test]
    fn batches_match_single_calls() {
        let rates: Vec<RateSet> = (1..20)
            .map(|k| {
                let k = k as f64;
                RateSet::new([k, 2.0 * k, 0.5], [0.1 * k, 0.3, 0.2]).unwrap()
            })
            .collect();
        let batch = closed_form_batch(&rates);
        for (r, b) in rates.iter().zip(&batch) {
            assert_eq!(b.as_ref().unwrap(), &stationary_closed_form(r).unwrap());
        }
        assert_eq!(null_space_batch(&rates).len(), rates.len());
    }
}
