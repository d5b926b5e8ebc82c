//! Order-preserving execution helpers.
//!
//! Every hot loop in the crate is expressed as an indexed map whose results
//! are collected in index order and reduced sequentially. With the
//! `parallel` feature this runs on rayon; without it the same closures run
//! on a plain iterator. Either way the output is bit-identical, so thread
//! count never changes a result.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Maps `f` over `0..n`, collecting results in index order.
pub(crate) fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
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

/// Sum of `f` over `0..n`, folded sequentially over ordered partials.
pub(crate) fn sum_indexed<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    map_indexed(n, f).into_iter().sum()
}
