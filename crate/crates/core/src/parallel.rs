//! Bounded, order-preserving parallel map.

use rayon::prelude::*;

/// Applies `f` to every item with at most `cap` items in flight. Output
/// order matches input order regardless of completion order.
pub fn bounded_map<T, U, F>(items: &[T], cap: usize, f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    if cap <= 1 || items.len() <= 1 {
        return items.iter().map(f).collect();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(cap).build() {
        Ok(pool) => pool.install(|| items.par_iter().map(&f).collect()),
        Err(e) => {
            tracing::warn!(error = %e, "cannot build worker pool, running sequentially");
            items.iter().map(f).collect()
        }
    }
}
