//! Data-parallel execution with a sequential fallback.
//!
//! With the `parallel` feature (default) [`Execution::Parallel`] fans work
//! out over a rayon pool; without it every policy runs sequentially. Both
//! paths return results in input order, so outputs are bitwise identical.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    /// Parallel over `workers` threads; `0` means the available parallelism.
    Parallel { workers: usize },
    #[default]
    Auto,
}

impl Execution {
    pub fn with_workers(workers: usize) -> Self {
        if workers == 1 {
            Execution::Sequential
        } else {
            Execution::Parallel { workers }
        }
    }

    /// True if this policy will actually use more than one thread.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && !matches!(self, Execution::Sequential)
    }

    /// Applies `f` to every item, preserving order.
    pub fn map<T, R, F>(self, items: Vec<T>, f: F) -> Vec<R>
    where
        T: Send,
        R: Send,
        F: Fn(T) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        {
            match self {
                Execution::Sequential => items.into_iter().map(f).collect(),
                Execution::Auto | Execution::Parallel { workers: 0 } => {
                    items.into_par_iter().map(f).collect()
                }
                Execution::Parallel { workers } => {
                    match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
                        Ok(pool) => pool.install(|| items.into_par_iter().map(f).collect()),
                        Err(_) => items.into_iter().map(f).collect(),
                    }
                }
            }
        }
        #[cfg(not(feature = "parallel"))]
        {
            items.into_iter().map(f).collect()
        }
    }

    /// `out[i] = Σ_j matrix[i*n + j] * x[j]` for a dense row-major `n×n` matrix.
    pub fn matvec(self, matrix: &[f64], x: &[f64], out: &mut [f64]) {
        let n = x.len();
        debug_assert_eq!(matrix.len(), n * n);
        debug_assert_eq!(out.len(), n);
        let row = |(i, o): (usize, &mut f64)| {
            *o = dot(&matrix[i * n..(i + 1) * n], x);
        };
        #[cfg(feature = "parallel")]
        {
            // Small systems are faster on one thread.
            if !matches!(self, Execution::Sequential) && n >= 256 {
                out.par_iter_mut().enumerate().for_each(row);
                return;
            }
        }
        out.iter_mut().enumerate().for_each(row);
    }
}

/// Four-way unrolled dot product; the fixed association order keeps results
/// independent of the execution policy.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for k in 0..chunks {
        let i = 4 * k;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut tail = 0.0;
    for i in 4 * chunks..a.len() {
        tail += a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn policies_agree_bitwise() {
        let items: Vec<u64> = (0..64).collect();
        let f = |x: u64| (x as f64).sqrt().sin();
        let a = Execution::Sequential.map(items.clone(), f);
        let b = Execution::Auto.map(items.clone(), f);
        let c = Execution::Parallel { workers: 3 }.map(items, f);
        assert_eq!(a, b);
        assert_eq!(a, c);
    }

    #[test]
    fn matvec_matches_naive() {
        let n = 300;
        let m: Vec<f64> = (0..n * n).map(|k| ((k * 7919) % 1000) as f64 / 997.0).collect();
        let x: Vec<f64> = (0..n).map(|k| (k as f64).cos()).collect();
        let mut seq = vec![0.0; n];
        let mut par = vec![0.0; n];
        Execution::Sequential.matvec(&m, &x, &mut seq);
        Execution::Auto.matvec(&m, &x, &mut par);
        assert_eq!(seq, par);
        for i in 0..n {
            let naive: f64 = (0..n).map(|j| m[i * n + j] * x[j]).sum();
            assert!((naive - seq[i]).abs() < 1e-10);
        }
    }
}
