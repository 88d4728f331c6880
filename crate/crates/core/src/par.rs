//! Data-parallel helpers.
//!
//! With the `parallel` feature the maps below run on the current rayon pool;
//! without it they run sequentially. Reductions are always performed
//! sequentially over the collected values, so floating point results do not
//! depend on the thread schedule.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Map `f` over `items`, preserving order.
pub fn map<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

/// Map `f` over `0..len`, preserving order.
pub fn map_range<U, F>(len: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..len).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..len).map(f).collect()
    }
}

/// Fallible ordered map; returns the first error in index order.
pub fn try_map_range<U, E, F>(len: usize, f: F) -> Result<Vec<U>, E>
where
    U: Send,
    E: Send,
    F: Fn(usize) -> Result<U, E> + Sync + Send,
{
    map_range(len, f).into_iter().collect()
}

/// Fill `out[i] = f(i)` in place.
pub fn fill<U, F>(out: &mut [U], f: F)
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        out.par_iter_mut().enumerate().for_each(|(i, o)| *o = f(i));
    }
    #[cfg(not(feature = "parallel"))]
    {
        out.iter_mut().enumerate().for_each(|(i, o)| *o = f(i));
    }
}

const CHUNK: usize = 4096;

/// Sum of `f(i)` over `0..len` with fixed-size chunks, so the result is
/// bitwise reproducible regardless of thread count.
pub fn sum_range<F>(len: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    let chunks = len.div_ceil(CHUNK);
    let partial = map_range(chunks, |c| {
        let lo = c * CHUNK;
        let hi = (lo + CHUNK).min(len);
        (lo..hi).map(&f).sum::<f64>()
    });
    partial.into_iter().sum()
}

/// Whether this build runs maps on a thread pool.
pub const fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_range_matches_sequential_chunks() {
        let n = 10_001;
        let got = sum_range(n, |i| 1.0 / (i as f64 + 1.0));
        let mut want = 0.0;
        for c in 0..n.div_ceil(CHUNK) {
            let lo = c * CHUNK;
            let hi = (lo + CHUNK).min(n);
            want += (lo..hi).map(|i| 1.0 / (i as f64 + 1.0)).sum::<f64>();
        }
        assert_eq!(got.to_bits(), want.to_bits());
    }

    #[test]
    fn try_map_range_reports_first_error() {
        let r: Result<Vec<usize>, usize> = try_map_range(100, |i| if i % 30 == 29 { Err(i) } else { Ok(i) });
        assert_eq!(r, Err(29));
    }
}
