//! Data-parallel map over independent runs.
//!
//! With the `parallel` feature (default) work is spread over the rayon
//! pool; without it the same calls run sequentially. Results keep input
//! order either way, so outputs do not depend on the feature.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// `f(0), f(1), ..., f(n - 1)`, possibly in parallel.
#[cfg(feature = "parallel")]
pub fn map_indices<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_indices<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    map_indices_sequential(n, f)
}

pub fn map_indices_sequential<R, F: Fn(usize) -> R>(n: usize, f: F) -> Vec<R> {
    (0..n).map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_matches_sequential() {
        let f = |i: usize| (i * 7919) % 101;
        assert_eq!(map_indices(500, f), map_indices_sequential(500, f));
    }
}
