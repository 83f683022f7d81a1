//! Thin data-parallel layer. With the `parallel` feature these helpers fan
//! out over rayon's pool; without it they run the same closures in order.
//!
//! Every helper returns results in index order, so any floating-point
//! reduction done afterwards by the caller is deterministic regardless of
//! scheduling.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// `(0..n).map(f).collect()`, possibly in parallel.
pub fn map_range<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Maps a slice, preserving order.
pub fn map_slice<S, T, F>(items: &[S], f: F) -> Vec<T>
where
    S: Sync,
    T: Send,
    F: Fn(&S) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

/// Fallible variant of [`map_range`]; the first error in index order wins.
pub fn try_map_range<T, E, F>(n: usize, f: F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(usize) -> Result<T, E> + Sync + Send,
{
    map_range(n, f).into_iter().collect()
}

/// Elementwise maximum over per-task vectors of length `len`.
///
/// `f(task, out)` may only raise entries of `out`. Max is exact and
/// order-independent, so the merged result does not depend on scheduling.
pub fn max_scatter<F>(tasks: usize, len: usize, init: f64, f: F) -> Vec<f64>
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..tasks)
            .into_par_iter()
            .fold(
                || vec![init; len],
                |mut acc, t| {
                    f(t, &mut acc);
                    acc
                },
            )
            .reduce(
                || vec![init; len],
                |mut a, b| {
                    for (x, y) in a.iter_mut().zip(b) {
                        if y > *x {
                            *x = y;
                        }
                    }
                    a
                },
            )
    }
    #[cfg(not(feature = "parallel"))]
    {
        let mut acc = vec![init; len];
        for t in 0..tasks {
            f(t, &mut acc);
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_range_preserves_order() {
        let v = map_range(100, |i| i * i);
        assert_eq!(v[7], 49);
        assert_eq!(v.len(), 100);
    }

    #[test]
    fn max_scatter_matches_sequential() {
        let got = max_scatter(10, 5, 0.0, |t, out| {
            out[t % 5] = out[t % 5].max(t as f64);
        });
        assert_eq!(got, vec![5.0, 6.0, 7.0, 8.0, 9.0]);
    }
}
