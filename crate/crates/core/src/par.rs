//! Data-parallel facade.
//!
//! Batch gradients, corpus degradation, and Monte-Carlo sweeps are
//! embarrassingly parallel over items. With the `parallel` feature (on by
//! default) [`map_indexed`] runs on the rayon pool; without it the same
//! call is a plain sequential loop, so downstream code never branches on
//! the feature. Output order always matches input order, and callers pass
//! the item index into their closure so per-item RNG seeding stays
//! deterministic regardless of thread count.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Map `f` over `items`, preserving order. Parallel when the `parallel`
/// feature is enabled.
#[cfg(feature = "parallel")]
pub fn map_indexed<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(usize, &T) -> U + Sync + Send,
{
    items.par_iter().enumerate().map(|(i, t)| f(i, t)).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_indexed<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(usize, &T) -> U,
{
    items.iter().enumerate().map(|(i, t)| f(i, t)).collect()
}

/// Sequential twin of [`map_indexed`], available regardless of features.
/// Benches use it as the baseline side of parallel-vs-sequential runs.
pub fn map_indexed_seq<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(usize, &T) -> U,
{
    items.iter().enumerate().map(|(i, t)| f(i, t)).collect()
}

/// Map over a range of indices (no backing slice needed).
#[cfg(feature = "parallel")]
pub fn map_range<U, F>(n: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_range<U, F>(n: usize, f: F) -> Vec<U>
where
    F: Fn(usize) -> U,
{
    (0..n).map(f).collect()
}

/// Sequential twin of [`map_range`].
pub fn map_range_seq<U, F>(n: usize, f: F) -> Vec<U>
where
    F: Fn(usize) -> U,
{
    (0..n).map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preserves_order() {
        let items: Vec<u64> = (0..257).collect();
        let out = map_indexed(&items, |i, v| i as u64 * 1000 + v);
        let seq = map_indexed_seq(&items, |i, v| i as u64 * 1000 + v);
        assert_eq!(out, seq);
    }

    #[test]
    fn range_matches_seq() {
        assert_eq!(map_range(100, |i| i * i), map_range_seq(100, |i| i * i));
    }
}
