//! Thin shim over rayon so every data-parallel sweep has a sequential
//! fallback when the `parallel` feature is disabled.

#[cfg(feature = "parallel")]
pub fn find_map_first<T, R>(items: Vec<T>, f: impl Fn(&T) -> Option<R> + Sync) -> Option<R>
where
    T: Sync,
    R: Send,
{
    use rayon::prelude::*;
    items.par_iter().find_map_first(&f)
}

#[cfg(not(feature = "parallel"))]
pub fn find_map_first<T, R>(items: Vec<T>, f: impl Fn(&T) -> Option<R>) -> Option<R> {
    items.iter().find_map(|t| f(t))
}

#[cfg(feature = "parallel")]
pub fn map<T, R>(items: Vec<T>, f: impl Fn(&T) -> R + Sync) -> Vec<R>
where
    T: Sync,
    R: Send,
{
    use rayon::prelude::*;
    items.par_iter().map(&f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map<T, R>(items: Vec<T>, f: impl Fn(&T) -> R) -> Vec<R> {
    items.iter().map(|t| f(t)).collect()
}
