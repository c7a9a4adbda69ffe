//! Index-keyed parallel maps.
//!
//! Every helper returns results in index order, so downstream reductions see
//! the same summation order whether or not the `parallel` feature is on.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// `(0..n).map(f).collect()`, spread over the rayon pool when available.
#[cfg(feature = "parallel")]
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).map(f).collect()
}

/// Maps over a slice, preserving order.
#[cfg(feature = "parallel")]
pub fn map_slice<S, T, F>(items: &[S], f: F) -> Vec<T>
where
    S: Sync,
    T: Send,
    F: Fn(&S) -> T + Sync + Send,
{
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_slice<S, T, F>(items: &[S], f: F) -> Vec<T>
where
    S: Sync,
    T: Send,
    F: Fn(&S) -> T + Sync + Send,
{
    items.iter().map(f).collect()
}

/// Deterministic sum of `f(i)` over `0..n`: values are computed (possibly in
/// parallel) and then added left to right.
pub fn sum_indexed<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    map_indexed(n, f).into_iter().sum()
}

pub fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preserves_order() {
        let v = map_indexed(1000, |i| i * i);
        assert!(v.iter().enumerate().all(|(i, &x)| x == i * i));
        let w = map_slice(&v, |x| x + 1);
        assert_eq!(w[10], 101);
    }

    #[test]
    fn sum_is_reproducible() {
        let f = |i: usize| 1.0 / (1.0 + i as f64);
        let a = sum_indexed(10_000, f);
        let b: f64 = (0..10_000).map(f).sum();
        assert_eq!(a.to_bits(), b.to_bits());
    }
}
