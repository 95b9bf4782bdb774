//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature enabled the default [`Execution`] fans work out
//! over the rayon global pool. Without it every helper runs sequentially. Both
//! paths return results in index order, so reductions performed by callers on
//! the returned vectors are bit-identical across modes.

/// How an index-parallel loop is executed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    /// Uses rayon when compiled with the `parallel` feature, otherwise
    /// behaves like `Sequential`.
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

impl Execution {
    /// Evaluates `f(0..n)` and collects the results in index order.
    pub fn map<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel => {
                use rayon::prelude::*;
                (0..n).into_par_iter().map(f).collect()
            }
            _ => (0..n).map(f).collect(),
        }
    }

    /// Applies `f` to each chunk of `data` of length `chunk` along with the
    /// chunk index.
    pub fn for_each_chunk<T, F>(self, data: &mut [T], chunk: usize, f: F)
    where
        T: Send,
        F: Fn(usize, &mut [T]) + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel => {
                use rayon::prelude::*;
                data.par_chunks_mut(chunk)
                    .enumerate()
                    .for_each(|(i, c)| f(i, c));
            }
            _ => data
                .chunks_mut(chunk)
                .enumerate()
                .for_each(|(i, c)| f(i, c)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree() {
        let f = |i: usize| (i as f64).sqrt();
        assert_eq!(
            Execution::Sequential.map(257, f),
            Execution::Parallel.map(257, f)
        );

        let mut a = vec![1.0f32; 100];
        let mut b = a.clone();
        let g = |i: usize, c: &mut [f32]| c.iter_mut().for_each(|v| *v += i as f32);
        Execution::Sequential.for_each_chunk(&mut a, 7, g);
        Execution::Parallel.for_each_chunk(&mut b, 7, g);
        assert_eq!(a, b);
    }
}
