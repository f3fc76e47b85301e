//! Data-parallel helpers with a sequential fallback.
//!
//! Every parallelizable loop in the crate funnels through these functions.
//! With the default `parallel` feature they fan out over rayon; without it
//! they compile to plain iterator code. Both paths are always expressible so
//! benchmarks can compare them in a single build — see
//! `benches/parallel_vs_sequential.rs`.
//!
//! The helpers require `Send + Sync` closures in both modes, so switching the
//! feature can never change what compiles, only how it runs.

/// Maps `f` over `items`, preserving order.
#[cfg(feature = "parallel")]
pub fn map_vec<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Send + Sync,
{
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

/// Maps `f` over `items`, preserving order.
#[cfg(not(feature = "parallel"))]
pub fn map_vec<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Send + Sync,
{
    items.iter().map(f).collect()
}

/// Maps `f` over index pairs `(i, j)` for `i in 0..rows`, `j in 0..cols`,
/// row-major.
pub fn map_grid<U, F>(rows: usize, cols: usize, f: F) -> Vec<Vec<U>>
where
    U: Send,
    F: Fn(usize, usize) -> U + Send + Sync,
{
    let row_idx: Vec<usize> = (0..rows).collect();
    map_vec(&row_idx, |&i| (0..cols).map(|j| f(i, j)).collect())
}

/// Sequential map with the same signature as [`map_vec`], available in every
/// build so benchmarks can pit the two against each other directly.
pub fn map_vec_seq<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Send + Sync,
{
    items.iter().map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_and_sequential_maps_agree() {
        let items: Vec<u64> = (0..257).collect();
        let f = |x: &u64| x * x + 1;
        assert_eq!(map_vec(&items, f), map_vec_seq(&items, f));
    }

    #[test]
    fn grid_is_row_major() {
        let g = map_grid(2, 3, |i, j| 10 * i + j);
        assert_eq!(g, vec![vec![0, 1, 2], vec![10, 11, 12]]);
    }
}
