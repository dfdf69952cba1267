//! Thin switch between rayon and sequential execution.
//!
//! Everything funnels through these helpers so the `parallel` feature changes
//! only where work runs, never what it computes: outputs are collected in
//! index order and any floating-point reduction happens afterwards in a
//! deterministic sequential fold.

/// Applies `f` to `0..n` and returns the results in index order.
#[cfg(feature = "parallel")]
pub(crate) fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}

/// Runs `f` on equally sized mutable chunks, passing each chunk's index.
#[cfg(feature = "parallel")]
pub(crate) fn for_each_chunk_mut<T, F>(data: &mut [T], chunk: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    use rayon::prelude::*;
    data.par_chunks_mut(chunk).enumerate().for_each(|(idx, c)| f(idx, c));
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn for_each_chunk_mut<T, F>(data: &mut [T], chunk: usize, f: F)
where
    F: Fn(usize, &mut [T]),
{
    for (idx, c) in data.chunks_mut(chunk).enumerate() {
        f(idx, c);
    }
}

/// Applies `f` to every element of `data` with its index, collecting the
/// results in index order.
#[cfg(feature = "parallel")]
pub(crate) fn map_each_mut<T, R, F>(data: &mut [T], f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(usize, &mut T) -> R + Sync + Send,
{
    use rayon::prelude::*;
    data.par_iter_mut().enumerate().map(|(idx, t)| f(idx, t)).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn map_each_mut<T, R, F>(data: &mut [T], f: F) -> Vec<R>
where
    F: Fn(usize, &mut T) -> R,
{
    data.iter_mut().enumerate().map(|(idx, t)| f(idx, t)).collect()
}

/// Runs `f` inside a dedicated pool of `width` threads when given (and the
/// parallel feature is on); otherwise on the ambient pool or current thread.
#[cfg(feature = "parallel")]
pub(crate) fn with_thread_pool<R: Send>(width: Option<usize>, f: impl FnOnce() -> R + Send) -> R {
    match width {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .expect("thread pool construction")
            .install(f),
        None => f(),
    }
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn with_thread_pool<R>(width: Option<usize>, f: impl FnOnce() -> R) -> R {
    let _ = width;
    f()
}
