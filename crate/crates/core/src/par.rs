//! Parallel execution helpers.
//!
//! With the `parallel` feature the macros expand to rayon parallel
//! iterators; without it they expand to the sequential std equivalents. Only
//! the combinators shared by both (`map`, `filter_map`, `for_each`, indexed
//! `collect`) are used through them, so results are identical either way.

/// Runs `f` on a pool of `jobs` worker threads. `None` or `Some(0)` uses the
/// global pool. Sequential builds just call `f`.
#[cfg(feature = "parallel")]
pub fn with_jobs<R, F>(jobs: Option<usize>, f: F) -> R
where
    R: Send,
    F: FnOnce() -> R + Send,
{
    match jobs {
        Some(n) if n > 0 => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(f),
            Err(_) => f(),
        },
        _ => f(),
    }
}

#[cfg(not(feature = "parallel"))]
pub fn with_jobs<R, F>(_jobs: Option<usize>, f: F) -> R
where
    R: Send,
    F: FnOnce() -> R + Send,
{
    f()
}

/// Traits the parallel macros' return values need at the call site.
pub mod prelude {
    #[cfg(feature = "parallel")]
    pub use rayon::prelude::*;
}

/// Whether this build was compiled with rayon support.
pub const fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}

#[cfg(feature = "parallel")]
#[macro_export]
#[doc(hidden)]
macro_rules! par_iter {
    ($e:expr) => {{
        use rayon::prelude::*;
        ($e).par_iter()
    }};
}

#[cfg(not(feature = "parallel"))]
#[macro_export]
#[doc(hidden)]
macro_rules! par_iter {
    ($e:expr) => {
        ($e).iter()
    };
}

#[cfg(feature = "parallel")]
#[macro_export]
#[doc(hidden)]
macro_rules! par_iter_mut {
    ($e:expr) => {{
        use rayon::prelude::*;
        ($e).par_iter_mut()
    }};
}

#[cfg(not(feature = "parallel"))]
#[macro_export]
#[doc(hidden)]
macro_rules! par_iter_mut {
    ($e:expr) => {
        ($e).iter_mut()
    };
}

#[cfg(feature = "parallel")]
#[macro_export]
#[doc(hidden)]
macro_rules! par_chunks {
    ($e:expr, $n:expr) => {{
        use rayon::prelude::*;
        ($e).par_chunks($n)
    }};
}

#[cfg(not(feature = "parallel"))]
#[macro_export]
#[doc(hidden)]
macro_rules! par_chunks {
    ($e:expr, $n:expr) => {
        ($e).chunks($n)
    };
}

#[cfg(feature = "parallel")]
#[macro_export]
#[doc(hidden)]
macro_rules! par_chunks_mut {
    ($e:expr, $n:expr) => {{
        use rayon::prelude::*;
        ($e).par_chunks_mut($n)
    }};
}

#[cfg(not(feature = "parallel"))]
#[macro_export]
#[doc(hidden)]
macro_rules! par_chunks_mut {
    ($e:expr, $n:expr) => {
        ($e).chunks_mut($n)
    };
}

#[cfg(feature = "parallel")]
#[macro_export]
#[doc(hidden)]
macro_rules! par_range {
    ($e:expr) => {{
        use rayon::prelude::*;
        ($e).into_par_iter()
    }};
}

#[cfg(not(feature = "parallel"))]
#[macro_export]
#[doc(hidden)]
macro_rules! par_range {
    ($e:expr) => {
        ($e).into_iter()
    };
}

#[cfg(feature = "parallel")]
pub fn sort_unstable_by_key<T: Send, K: Ord>(v: &mut [T], f: impl Fn(&T) -> K + Sync) {
    use rayon::prelude::*;
    v.par_sort_unstable_by_key(f)
}

#[cfg(not(feature = "parallel"))]
pub fn sort_unstable_by_key<T: Send, K: Ord>(v: &mut [T], f: impl Fn(&T) -> K + Sync) {
    v.sort_unstable_by_key(f)
}
