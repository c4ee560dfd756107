//! Trial fan-out: `map_indices(n, f)` evaluates `f(0..n)` and returns results
//! in index order. With the `parallel` feature the map runs on rayon; without
//! it, sequentially. Because each index carries its own seed and results come
//! back ordered, outputs are byte-identical either way.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[cfg(feature = "parallel")]
pub fn map_indices<T: Send, F: Fn(usize) -> T + Sync + Send>(n: usize, f: F) -> Vec<T> {
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_indices<T, F: Fn(usize) -> T>(n: usize, f: F) -> Vec<T> {
    (0..n).map(f).collect()
}
