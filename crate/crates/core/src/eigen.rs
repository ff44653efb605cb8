//! Iterative eigen-solvers for symmetric sparse operators.
//!
//! Operators are passed as closures `y ← A·x`. Small problems fall back to a
//! dense symmetric eigendecomposition; larger ones use Lanczos with full
//! reorthogonalization.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Below this size the dense path is both faster and exact.
pub const DENSE_LIMIT: usize = 512;

const LANCZOS_TOL: f64 = 1e-10;
const START_SEED: u64 = 0x1a2c_0550;

fn random_unit(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let norm = dot(&v, &v).sqrt();
    v.iter_mut().for_each(|x| *x /= norm);
    v
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(y, x)| *y += alpha * x);
}

/// Largest eigenvalue magnitude by power iteration.
///
/// Tracks `‖A·x‖` for unit `x`, which converges to `max |λ|` even when `λ`
/// and `-λ` are both present. Stops once successive estimates agree to
/// `1e-12`; after `max_iter` steps a relative change below `tol` is still
/// accepted.
pub fn power_magnitude(op: impl Fn(&[f64], &mut [f64]), n: usize, tol: f64, max_iter: usize) -> Result<f64> {
    if n == 0 {
        return Ok(0.0);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(START_SEED);
    let mut x = random_unit(n, &mut rng);
    let mut y = vec![0.0; n];
    let mut mu = 0.0;
    let mut change = f64::INFINITY;
    for _ in 0..max_iter {
        op(&x, &mut y);
        let next = dot(&y, &y).sqrt();
        if next == 0.0 {
            return Ok(0.0);
        }
        y.iter_mut().for_each(|v| *v /= next);
        std::mem::swap(&mut x, &mut y);
        change = (next - mu).abs() / next;
        mu = next;
        if change <= 1e-12 {
            return Ok(mu);
        }
    }
    if change <= tol {
        Ok(mu)
    } else {
        Err(Error::ConvergenceFailure("power iteration", max_iter))
    }
}

/// Flips each column so its entries sum to a non-negative value (first
/// nonzero entry positive when the sum vanishes).
fn canonical_signs(vecs: &mut DMatrix<f64>) {
    for mut col in vecs.column_iter_mut() {
        let sum: f64 = col.iter().sum();
        let flip = if sum.abs() > 1e-10 {
            sum < 0.0
        } else {
            col.iter().find(|v| v.abs() > 1e-12).is_some_and(|v| *v < 0.0)
        };
        if flip {
            col.neg_mut();
        }
    }
}

fn sorted_desc(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    idx
}

/// Top-`b` eigenpairs (largest algebraic eigenvalues, descending) of the
/// symmetric operator `op` of size `n`.
pub fn top_eigenpairs(op: impl Fn(&[f64], &mut [f64]), n: usize, b: usize) -> Result<(Vec<f64>, DMatrix<f64>)> {
    if b == 0 || b > n {
        return Err(Error::BandwidthTooLarge { bandwidth: b, n });
    }
    let (values, mut vectors) = if n <= DENSE_LIMIT {
        dense_top(&op, n, b)
    } else {
        lanczos_top(&op, n, b)?
    };
    canonical_signs(&mut vectors);
    Ok((values, vectors))
}

fn dense_top(op: &impl Fn(&[f64], &mut [f64]), n: usize, b: usize) -> (Vec<f64>, DMatrix<f64>) {
    let mut dense = DMatrix::zeros(n, n);
    let mut e = vec![0.0; n];
    let mut col = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        op(&e, &mut col);
        e[j] = 0.0;
        dense.column_mut(j).copy_from_slice(&col);
    }
    let sym = (&dense + dense.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let order = sorted_desc(eig.eigenvalues.as_slice());
    let values = order[..b].iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, b, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

fn lanczos_top(op: &impl Fn(&[f64], &mut [f64]), n: usize, b: usize) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(START_SEED);
    let mut basis: Vec<Vec<f64>> = vec![random_unit(n, &mut rng)];
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut w = vec![0.0; n];
    let mut scale: f64 = 0.0;
    let check_every = 10;

    loop {
        let k = basis.len() - 1;
        op(&basis[k], &mut w);
        let a = dot(&w, &basis[k]);
        alpha.push(a);
        axpy(-a, &basis[k], &mut w);
        if k > 0 {
            axpy(-beta[k - 1], &basis[k - 1], &mut w);
        }
        // two passes of classical Gram-Schmidt keep the basis orthonormal
        for _ in 0..2 {
            for q in &basis {
                let c = dot(&w, q);
                axpy(-c, q, &mut w);
            }
        }
        let bnorm = dot(&w, &w).sqrt();
        scale = scale.max(a.abs()).max(bnorm);
        let steps = basis.len();
        let exhausted = steps == n;
        let breakdown = bnorm <= 1e-12 * scale.max(1.0);

        if steps >= b && (steps.is_multiple_of(check_every) || exhausted || breakdown) {
            let (vals, coeffs) = tridiagonal_eigen(&alpha, &beta);
            let order = sorted_desc(&vals);
            let top = &order[..b];
            let converged = exhausted
                || top.iter().all(|&j| {
                    let resid = bnorm * coeffs[(steps - 1, j)].abs();
                    resid <= LANCZOS_TOL * vals[j].abs().max(scale).max(1e-300)
                });
            if converged {
                let values: Vec<f64> = top.iter().map(|&j| vals[j]).collect();
                let mut vectors = DMatrix::zeros(n, b);
                for (c, &j) in top.iter().enumerate() {
                    for (r, q) in basis.iter().enumerate() {
                        let s = coeffs[(r, j)];
                        for i in 0..n {
                            vectors[(i, c)] += s * q[i];
                        }
                    }
                }
                return Ok((values, vectors));
            }
        }
        if exhausted {
            return Err(Error::ConvergenceFailure("Lanczos", n));
        }
        if breakdown {
            // invariant subspace found: continue from a fresh direction
            let mut fresh = random_unit(n, &mut rng);
            for _ in 0..2 {
                for q in &basis {
                    let c = dot(&fresh, q);
                    axpy(-c, q, &mut fresh);
                }
            }
            let norm = dot(&fresh, &fresh).sqrt();
            if norm <= 1e-10 {
                return Err(Error::ConvergenceFailure("Lanczos restart", steps));
            }
            fresh.iter_mut().for_each(|v| *v /= norm);
            beta.push(0.0);
            basis.push(fresh);
            continue;
        }
        beta.push(bnorm);
        w.iter_mut().for_each(|v| *v /= bnorm);
        basis.push(std::mem::replace(&mut w, vec![0.0; n]));
    }
}

fn tridiagonal_eigen(alpha: &[f64], beta: &[f64]) -> (Vec<f64>, DMatrix<f64>) {
    let k = alpha.len();
    let mut t = DMatrix::zeros(k, k);
    for i in 0..k {
        t[(i, i)] = alpha[i];
        if i + 1 < k {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    let eig = SymmetricEigen::new(t);
    (eig.eigenvalues.as_slice().to_vec(), eig.eigenvectors)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_sym(n: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        (&a + a.transpose()) * 0.5
    }

    fn as_op(m: &DMatrix<f64>) -> impl Fn(&[f64], &mut [f64]) + '_ {
        move |x, y| {
            let v = m * nalgebra::DVector::from_column_slice(x);
            y.copy_from_slice(v.as_slice());
        }
    }

    #[test]
    fn power_magnitude_matches_dense() {
        for seed in 0..5 {
            let m = random_sym(30, seed);
            let oracle = SymmetricEigen::new(m.clone()).eigenvalues.amax();
            let got = power_magnitude(as_op(&m), 30, 1e-9, 100_000).unwrap();
            assert!((got - oracle).abs() < 1e-7, "{got} vs {oracle}");
        }
    }

    #[test]
    fn power_magnitude_handles_plus_minus_pair() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 0.7, 0.7, 0.0]);
        let got = power_magnitude(as_op(&m), 2, 1e-9, 1000).unwrap();
        assert!((got - 0.7).abs() < 1e-12);
    }

    #[test]
    fn lanczos_agrees_with_dense() {
        // a sparse-ish banded matrix well above the dense cutoff
        let n = 700;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let diag: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let off: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..0.5)).collect();
        let op = |x: &[f64], y: &mut [f64]| {
            for i in 0..n {
                let mut s = diag[i] * x[i];
                if i > 0 {
                    s += off[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    s += off[i] * x[i + 1];
                }
                y[i] = s;
            }
        };
        let (vals, vecs) = lanczos_top(&op, n, 6).unwrap();
        let (dvals, _) = dense_top(&op, n, 6);
        for (a, b) in vals.iter().zip(&dvals) {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
        let gram = vecs.transpose() * &vecs;
        assert!((gram - DMatrix::identity(6, 6)).amax() < 1e-8);
    }

    #[test]
    fn bandwidth_checked() {
        let m = random_sym(4, 1);
        assert!(matches!(
            top_eigenpairs(as_op(&m), 4, 5),
            Err(Error::BandwidthTooLarge { .. })
        ));
        assert!(top_eigenpairs(as_op(&m), 4, 0).is_err());
    }
}
