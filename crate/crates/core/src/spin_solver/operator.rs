//! Matrix-free action of a [`SpinHamiltonian`] on the computational basis.

use std::ops::{Add, Mul};

use num_traits::Zero;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::spin_model::SpinHamiltonian;

/// Output chunk handed to one worker. Output-parallel, so the result does
/// not depend on the worker count.
const CHUNK: usize = 1 << 12;

/// `sz` eigenvalue of site `i` in basis state `s`.
#[inline]
pub fn sz_of<T: Real>(s: usize, i: usize) -> T {
    if s >> i & 1 == 1 {
        T::one()
    } else {
        -T::one()
    }
}

/// Precompiled Hamiltonian:
/// `H = D + z_offset * M + transverse_scale * sum_i g_i X_i`
/// with `D` the diagonal part and `M = sum_i sz_i`.
#[derive(Clone, Debug)]
pub struct SpinOperator<T> {
    n_sites: usize,
    diag: Vec<T>,
    mag: Vec<T>,
    flips: Vec<(usize, T)>,
    norm_bound: T,
    flip_symmetric: bool,
}

impl<T: Real> SpinOperator<T> {
    pub fn new(h: &SpinHamiltonian<T>, cap: usize) -> Result<Self> {
        let n = h.n_sites();
        if n > cap {
            return Err(Error::TooManySites { sites: n, cap });
        }
        let dim = 1usize << n;
        let b = h.longitudinal();
        let zz = h.zz_terms();
        let mut diag = vec![T::zero(); dim];
        let mut mag = vec![T::zero(); dim];
        diag.par_chunks_mut(CHUNK)
            .zip(mag.par_chunks_mut(CHUNK))
            .enumerate()
            .for_each(|(c, (d, m))| {
                for (k, (dk, mk)) in d.iter_mut().zip(m.iter_mut()).enumerate() {
                    let s = c * CHUNK + k;
                    let mut e = T::zero();
                    for t in zz {
                        e = e + t.w * sz_of::<T>(s, t.i) * sz_of::<T>(s, t.j);
                    }
                    let mut mz = T::zero();
                    for (i, &bi) in b.iter().enumerate() {
                        let z = sz_of::<T>(s, i);
                        e = e + bi * z;
                        mz = mz + z;
                    }
                    *dk = e;
                    *mk = mz;
                }
            });
        let flips = h
            .transverse()
            .iter()
            .enumerate()
            .filter(|(_, g)| !g.is_zero())
            .map(|(i, &g)| (1usize << i, g))
            .collect();
        Ok(Self { n_sites: n, diag, mag, flips, norm_bound: h.norm_bound(), flip_symmetric: h.has_flip_symmetry() })
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn diagonal(&self) -> &[T] {
        &self.diag
    }

    /// `sum_i sz_i` per basis state.
    pub fn magnetization(&self) -> &[T] {
        &self.mag
    }

    /// Commutes with the global flip `prod_i sx_i` (no longitudinal fields).
    pub fn flip_symmetric(&self) -> bool {
        self.flip_symmetric
    }

    pub fn is_diagonal(&self) -> bool {
        self.flips.is_empty()
    }

    /// Upper bound on the spectral radius (at unit drive).
    pub fn norm_bound(&self) -> T {
        self.norm_bound
    }

    /// `y = sign * H(z_offset, transverse_scale) x`.
    pub fn apply<V>(&self, x: &[V], y: &mut [V], sign: T, z_offset: T, transverse_scale: T)
    where
        V: Copy + Zero + Add<Output = V> + Mul<T, Output = V> + Send + Sync,
    {
        let flips: Vec<(usize, T)> = self.flips.iter().map(|&(m, g)| (m, g * transverse_scale * sign)).collect();
        let zoff = z_offset;
        y.par_chunks_mut(CHUNK).enumerate().for_each(|(c, out)| {
            let base = c * CHUNK;
            for (k, yk) in out.iter_mut().enumerate() {
                let s = base + k;
                let d = (self.diag[s] + zoff * self.mag[s]) * sign;
                let mut acc = x[s] * d;
                for &(m, g) in &flips {
                    acc = acc + x[s ^ m] * g;
                }
                *yk = acc;
            }
        });
    }
}
