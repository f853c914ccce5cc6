//! Index-parallel map with a sequential fallback.
//!
//! With the `parallel` feature the map runs on rayon; without it the same
//! closure runs in a plain loop. Results always come back in index order, so
//! callers reduce them in a fixed order and get bit-identical answers either
//! way.

/// Replications per Monte Carlo chunk; chunk k uses random stream k.
pub const CHUNK: usize = 1 << 14;

#[cfg(feature = "parallel")]
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).map(f).collect()
}

/// Split `reps` replications into (chunk index, count) pairs of size CHUNK.
pub fn chunks(reps: usize) -> Vec<(usize, usize)> {
    let n = reps.div_ceil(CHUNK);
    (0..n).map(|k| (k, CHUNK.min(reps - k * CHUNK))).collect()
}

/// Run `f` with at most `threads` worker threads (None keeps the global pool).
#[cfg(feature = "parallel")]
pub fn with_threads<R: Send>(threads: Option<usize>, f: impl FnOnce() -> R + Send) -> R {
    match threads {
        Some(t) if t > 0 => match rayon::ThreadPoolBuilder::new().num_threads(t).build() {
            Ok(pool) => pool.install(f),
            Err(_) => f(),
        },
        _ => f(),
    }
}

#[cfg(not(feature = "parallel"))]
pub fn with_threads<R: Send>(_threads: Option<usize>, f: impl FnOnce() -> R + Send) -> R {
    f()
}

pub fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chunks_cover_reps() {
        let c = chunks(3 * CHUNK + 5);
        assert_eq!(c.len(), 4);
        assert_eq!(c.iter().map(|p| p.1).sum::<usize>(), 3 * CHUNK + 5);
        assert!(chunks(0).is_empty());
    }

    #[test]
    fn map_is_ordered() {
        let v = map_indexed(1000, |i| i * i);
        assert!(v.iter().enumerate().all(|(i, &x)| x == i * i));
    }
}
