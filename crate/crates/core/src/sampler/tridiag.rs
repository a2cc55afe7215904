//! Exact sampler for the quadratic potential via the tridiagonal model.

use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

/// Eigenvalues of the quadratic-potential ensemble, ascending.
///
/// The matrix has `N(0, 2)` diagonal and `χ_{β(N-k)}` off-diagonal entries,
/// scaled by `1/√2` (density `∝ |Δ|^β e^{-Σλ²/2}`) and then by `1/√(Nβ)`,
/// which gives `∝ |Δ|^β e^{-(Nβ/2) Σ λ²}`.
pub fn tridiagonal_sample<R: Rng + ?Sized>(n: usize, beta: f64, rng: &mut R) -> Vec<f64> {
    let scale = 1.0 / (2.0 * n as f64 * beta).sqrt();
    let diag: Vec<f64> = (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            z * 2f64.sqrt() * scale
        })
        .collect();
    let off: Vec<f64> = (1..n)
        .map(|k| {
            let dof = beta * (n - k) as f64;
            ChiSquared::new(dof).expect("positive degrees of freedom").sample(rng).sqrt() * scale
        })
        .collect();
    symmetric_tridiagonal_eigenvalues(diag, off)
}

/// Eigenvalues of a symmetric tridiagonal matrix by implicit-shift QL,
/// sorted ascending.
pub fn symmetric_tridiagonal_eigenvalues(mut d: Vec<f64>, off: Vec<f64>) -> Vec<f64> {
    let n = d.len();
    let mut e = off;
    e.push(0.0);
    e.truncate(n);
    for l in 0..n {
        let mut iterations = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iterations += 1;
            if iterations > 60 {
                break;
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut i = m;
            let mut deflated = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    d.sort_by(f64::total_cmp);
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    #[test]
    fn matches_dense_solver() {
        let d = vec![1.0, -2.0, 0.5, 3.0, 0.0, -1.5];
        let e = vec![0.7, 1.1, -0.3, 2.0, 0.4];
        let n = d.len();
        let mut m = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = d[i];
        }
        for i in 0..n - 1 {
            m[(i, i + 1)] = e[i];
            m[(i + 1, i)] = e[i];
        }
        let mut dense: Vec<f64> = m.symmetric_eigen().eigenvalues.iter().copied().collect();
        dense.sort_by(f64::total_cmp);
        let ql = symmetric_tridiagonal_eigenvalues(d, e);
        for (a, b) in dense.iter().zip(&ql) {
            assert!((a - b).abs() < 1e-12, "{a} {b}");
        }
    }

    #[test]
    fn one_by_one() {
        assert_eq!(symmetric_tridiagonal_eigenvalues(vec![2.5], vec![]), vec![2.5]);
    }
}
