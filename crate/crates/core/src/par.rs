//! Data-parallel map with a sequential fallback. The `parallel` feature pulls
//! in rayon; without it the same API runs single-threaded. Outputs are
//! collected in input order either way, so artifacts are byte-identical
//! across feature settings and thread counts.

/// Maps `f` over `items`, preserving order. Each item must carry its own
/// state (e.g. a derived rng seed); `f` must not rely on call order.
#[cfg(feature = "parallel")]
pub fn par_map<T, U, F>(items: Vec<T>, f: F) -> Vec<U>
where
    T: Send,
    U: Send,
    F: Fn(T) -> U + Sync + Send,
{
    use rayon::prelude::*;
    items.into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn par_map<T, U, F>(items: Vec<T>, f: F) -> Vec<U>
where
    T: Send,
    U: Send,
    F: Fn(T) -> U + Sync + Send,
{
    items.into_iter().map(f).collect()
}

/// Always-sequential map, for benchmark comparison against `par_map`.
pub fn seq_map<T, U, F>(items: Vec<T>, f: F) -> Vec<U>
where
    F: Fn(T) -> U,
{
    items.into_iter().map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn par_map_preserves_order() {
        let xs: Vec<u64> = (0..1000).collect();
        let ys = par_map(xs.clone(), |x| x * x);
        let zs = seq_map(xs, |x| x * x);
        assert_eq!(ys, zs);
    }
}
