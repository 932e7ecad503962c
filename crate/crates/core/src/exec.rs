//! Execution policy for the data-parallel loops.
//!
//! Every hot loop in the crate (node-wise nonlinearity evaluation, the two
//! components of the operator, independent condition checks, sweep cells)
//! goes through [`Execution`]. With the `parallel` feature the `Parallel`
//! variant dispatches to rayon; without it both variants run sequentially.
//! Results are always collected in input order, so the numeric output does
//! not depend on the policy.

use serde::{Deserialize, Serialize};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Minimum number of items handed to one rayon task.
#[cfg(feature = "parallel")]
const MIN_CHUNK: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// True when this policy actually fans out to a thread pool.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }

    /// `(0..n).map(f)` collected in order.
    pub fn map_range<R, F>(self, n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            return (0..n).into_par_iter().with_min_len(MIN_CHUNK).map(f).collect();
        }
        (0..n).map(f).collect()
    }

    /// Like [`Execution::map_range`] but for coarse-grained jobs (one task each).
    pub fn map_jobs<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            return items.par_iter().map(f).collect();
        }
        items.iter().map(f).collect()
    }

    pub fn join<A, B, RA, RB>(self, a: A, b: B) -> (RA, RB)
    where
        A: FnOnce() -> RA + Send,
        B: FnOnce() -> RB + Send,
        RA: Send,
        RB: Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            return rayon::join(a, b);
        }
        (a(), b())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn policies_agree() {
        let f = |i: usize| (i as f64).sqrt() * 3.0;
        let s = Execution::Sequential.map_range(5000, f);
        let p = Execution::Parallel.map_range(5000, f);
        assert_eq!(s, p);

        let items: Vec<u32> = (0..40).collect();
        let s = Execution::Sequential.map_jobs(&items, |x| x * x);
        let p = Execution::Parallel.map_jobs(&items, |x| x * x);
        assert_eq!(s, p);

        assert_eq!(Execution::Parallel.join(|| 1, || 2), (1, 2));
    }
}
