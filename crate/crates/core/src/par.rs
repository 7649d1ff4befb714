//! Per-node maps, data-parallel when `std` is enabled.
//!
//! Only element-wise maps go through here; reductions stay sequential so that
//! results do not depend on the thread count.

#[cfg(feature = "std")]
pub(crate) fn fill<F>(out: &mut [f64], f: F)
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    use rayon::prelude::*;
    out.par_iter_mut()
        .with_min_len(256)
        .enumerate()
        .for_each(|(i, v)| *v = f(i));
}

#[cfg(not(feature = "std"))]
pub(crate) fn fill<F>(out: &mut [f64], f: F)
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    for (i, v) in out.iter_mut().enumerate() {
        *v = f(i);
    }
}

/// Fill fixed-width chunks, `out.len()` must be a multiple of `width`.
#[cfg(feature = "std")]
pub(crate) fn fill_chunks<F>(out: &mut [f64], width: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    use rayon::prelude::*;
    out.par_chunks_mut(width)
        .with_min_len(64)
        .enumerate()
        .for_each(|(i, c)| f(i, c));
}

#[cfg(not(feature = "std"))]
pub(crate) fn fill_chunks<F>(out: &mut [f64], width: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    for (i, c) in out.chunks_mut(width).enumerate() {
        f(i, c);
    }
}

/// Collect `f(0..n)`.
#[cfg(feature = "std")]
pub(crate) fn map<T, F>(n: usize, f: F) -> alloc::vec::Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "std"))]
pub(crate) fn map<T, F>(n: usize, f: F) -> alloc::vec::Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).map(f).collect()
}
