//! Restarted Lanczos for the lowest eigenpair of a real symmetric operator.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::tridiag::tridiag_eigen;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Fixed seed of the Lanczos start vector; eigen-solves are deterministic.
const START_SEED: u64 = 0x1a2c_2059;

/// Restriction of the iteration to one eigenspace of the global spin flip
/// `prod_i sx_i`, which maps basis state `s` to `s ^ mask`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FlipSector {
    pub mask: usize,
    pub even: bool,
}

impl FlipSector {
    pub fn project<T: Real>(&self, v: &mut [T]) {
        let half = T::lit(0.5);
        for s in 0..v.len() {
            let p = s ^ self.mask;
            if s < p {
                let (a, b) = (v[s], v[p]);
                if self.even {
                    let m = (a + b) * half;
                    v[s] = m;
                    v[p] = m;
                } else {
                    let m = (a - b) * half;
                    v[s] = m;
                    v[p] = -m;
                }
            }
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct LanczosOptions<T> {
    pub krylov_dim: usize,
    pub max_restarts: usize,
    /// Residual target relative to the operator scale.
    pub tol_rel: T,
}

impl<T: Real> Default for LanczosOptions<T> {
    fn default() -> Self {
        Self {
            krylov_dim: 60,
            max_restarts: 400,
            tol_rel: T::lit(1e-8).max(T::epsilon() * T::lit(100.0)),
        }
    }
}

pub(crate) fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

pub(crate) fn norm<T: Real>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

pub(crate) fn start_vector<T: Real>(dim: usize) -> Vec<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(START_SEED);
    (0..dim).map(|_| T::lit(rng.random::<f64>() - 0.5)).collect()
}

/// Lowest eigenpair `(theta, x, residual)` of the operator `apply`.
pub fn lowest_eigenpair<T, F>(
    apply: F,
    dim: usize,
    scale: T,
    sector: Option<FlipSector>,
    opts: &LanczosOptions<T>,
) -> Result<(T, Vec<T>, T)>
where
    T: Real,
    F: Fn(&[T], &mut [T]),
{
    let scale = scale.max(T::min_positive_value().sqrt());
    let tol = opts.tol_rel * scale;
    let m = opts.krylov_dim.max(2).min(dim);
    let mut x = start_vector::<T>(dim);
    if let Some(sec) = sector {
        sec.project(&mut x);
    }
    let nx = norm(&x);
    if nx.is_zero() {
        return Err(Error::NoConvergence("empty symmetry sector".into()));
    }
    x.iter_mut().for_each(|v| *v = *v / nx);

    let mut w = vec![T::zero(); dim];
    let mut last_residual = T::infinity();
    for _ in 0..opts.max_restarts {
        let mut basis: Vec<Vec<T>> = vec![x.clone()];
        let mut alpha = Vec::with_capacity(m);
        let mut beta: Vec<T> = Vec::with_capacity(m);
        let tail;
        loop {
            let j = basis.len() - 1;
            apply(&basis[j], &mut w);
            let a = dot(&basis[j], &w);
            alpha.push(a);
            for _ in 0..2 {
                for v in &basis {
                    let c = dot(v, &w);
                    w.iter_mut().zip(v).for_each(|(wi, &vi)| *wi = *wi - c * vi);
                }
            }
            if let Some(sec) = sector {
                sec.project(&mut w);
            }
            let b = norm(&w);
            if basis.len() == m || b <= tol * T::lit(1e-3) {
                tail = b;
                break;
            }
            beta.push(b);
            basis.push(w.iter().map(|&wi| wi / b).collect());
        }
        let (vals, vecs) = tridiag_eigen(&alpha, &beta)?;
        let k = alpha.len();
        let theta = vals[0];
        let mut next = vec![T::zero(); dim];
        for (row, v) in basis.iter().enumerate() {
            let c = vecs[row * k];
            next.iter_mut().zip(v).for_each(|(xi, &vi)| *xi = *xi + c * vi);
        }
        if let Some(sec) = sector {
            sec.project(&mut next);
        }
        let nn = norm(&next);
        next.iter_mut().for_each(|v| *v = *v / nn);
        x = next;
        let estimate = tail * vecs[(k - 1) * k].abs();
        if estimate <= tol {
            apply(&x, &mut w);
            let r = w.iter().zip(&x).map(|(&hv, &xv)| (hv - theta * xv) * (hv - theta * xv)).sum::<T>().sqrt();
            last_residual = r;
            if r <= tol {
                return Ok((theta, x, r));
            }
        } else {
            last_residual = estimate;
        }
    }
    Err(Error::NoConvergence(format!(
        "Lanczos residual {:e} above target {:e} after {} restarts",
        last_residual.to_f64_lossy(),
        tol.to_f64_lossy(),
        opts.max_restarts
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn laplacian(x: &[f64], y: &mut [f64]) {
        let n = x.len();
        for i in 0..n {
            let l = if i > 0 { x[i - 1] } else { 0.0 };
            let r = if i + 1 < n { x[i + 1] } else { 0.0 };
            y[i] = 2.0 * x[i] - l - r;
        }
    }

    #[test]
    fn open_chain_laplacian() {
        let n = 300;
        let (theta, v, r) = lowest_eigenpair(laplacian, n, 4.0, None, &LanczosOptions::default()).unwrap();
        let exact = 2.0 - 2.0 * (std::f64::consts::PI / (n as f64 + 1.0)).cos();
        assert_abs_diff_eq!(theta, exact, epsilon = 1e-9);
        assert!(r <= 4e-8);
        assert_abs_diff_eq!(norm(&v), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn small_dimension_exact() {
        let diag = [3.0, -1.0, 2.0];
        let apply = |x: &[f64], y: &mut [f64]| {
            for i in 0..3 {
                y[i] = diag[i] * x[i];
            }
        };
        let (theta, v, _) = lowest_eigenpair(apply, 3, 3.0, None, &LanczosOptions::default()).unwrap();
        assert_abs_diff_eq!(theta, -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(v[1].abs(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn sector_projection() {
        let mut v = vec![1.0, 2.0, 3.0, 5.0];
        FlipSector { mask: 3, even: false }.project(&mut v);
        assert_eq!(v, vec![-2.0, -0.5, 0.5, 2.0]);
    }
}
