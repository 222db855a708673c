//! Closed-form solution of the decoupled free-fermion problem on a periodic
//! `k` grid, plus a dense real-space oracle used to validate it.
//!
//! The pseudo-fermions are spinless; the spin degeneracy lives in the
//! prefactor `4 t_a` of the spin couplings `J_a = 4 t_a Re<f+_i f_{i+a}>`.
//! The Bloch sum is normalised per k-point, i.e.
//! `J_a = (4 t_a / N_k) sum_k cos(k_a) n_F(E_k)`.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::Axis;
use crate::scalar::{CompensatedSum, Real};

/// Exponent clamp applied inside the Fermi factor.
pub const FERMI_EXPONENT_CLAMP: f64 = 500.0;

/// A pair of values, one per bond orientation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct XY<T> {
    pub x: T,
    pub y: T,
}

impl<T: Copy> XY<T> {
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    pub fn get(&self, axis: Axis) -> T {
        match axis {
            Axis::X => self.x,
            Axis::Y => self.y,
        }
    }

    pub fn map<U>(self, f: impl Fn(T) -> U) -> XY<U> {
        XY { x: f(self.x), y: f(self.y) }
    }
}

/// Hubbard model parameters at half filling. The chemical potential is
/// pinned to `U/2` and not stored.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HubbardParams<T> {
    pub t_x: T,
    pub t_y: T,
    pub u: T,
    pub beta: T,
}

impl<T: Real> HubbardParams<T> {
    pub fn new(t_x: T, t_y: T, u: T, beta: T) -> Result<Self> {
        let p = Self { t_x, t_y, u, beta };
        p.validate()?;
        Ok(p)
    }

    /// `t_x = 1` units with `k_B T / t_x = 0.05`.
    pub fn with_defaults(t_y: T, u: T) -> Result<Self> {
        Self::new(T::one(), t_y, u, T::lit(20.0))
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: T| v.is_finite();
        if !(ok(self.t_x) && self.t_x > T::zero()) || !(ok(self.t_y) && self.t_y > T::zero()) {
            return Err(Error::InvalidParameter(format!(
                "hoppings must be positive (t_x = {}, t_y = {})",
                self.t_x, self.t_y
            )));
        }
        if !(ok(self.u) && self.u >= T::zero()) {
            return Err(Error::InvalidParameter(format!("U = {} must be >= 0", self.u)));
        }
        if !(ok(self.beta) && self.beta > T::zero()) {
            return Err(Error::InvalidParameter(format!("beta = {} must be positive and finite", self.beta)));
        }
        Ok(())
    }

    pub fn mu(&self) -> T {
        self.u / T::lit(2.0)
    }

    pub fn hoppings(&self) -> XY<T> {
        XY::new(self.t_x, self.t_y)
    }

    pub fn with_u(&self, u: T) -> Self {
        Self { u, ..*self }
    }
}

/// The self-consistent quantities exchanged between the two halves of the
/// solver: fermion hoppings `q` and spin couplings `j`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanFields<T> {
    pub q: XY<T>,
    pub j: XY<T>,
}

/// Periodic Brillouin-zone grid, `k_a = 2 pi m / N_a`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KGrid {
    pub nkx: usize,
    pub nky: usize,
}

impl Default for KGrid {
    fn default() -> Self {
        Self { nkx: 20, nky: 20 }
    }
}

impl KGrid {
    pub fn new(nkx: usize, nky: usize) -> Result<Self> {
        if nkx == 0 || nky == 0 {
            return Err(Error::InvalidParameter("k grid must be nonempty".into()));
        }
        Ok(Self { nkx, nky })
    }

    pub fn len(&self) -> usize {
        self.nkx * self.nky
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn cosines<T: Real>(n: usize) -> Vec<T> {
        (0..n)
            .map(|m| (T::TAU() * T::from_usize_lossy(m) / T::from_usize_lossy(n)).cos())
            .collect()
    }
}

/// `E_k = -2 Q_x cos k_x - 2 Q_y cos k_y`.
pub fn band_energy<T: Real>(kx: T, ky: T, q: XY<T>) -> T {
    let two = T::lit(2.0);
    -two * q.x * kx.cos() - two * q.y * ky.cos()
}

/// Fermi-Dirac occupation at zero chemical-potential offset, with the
/// exponent clamped so large `beta` never overflows.
pub fn fermi<T: Real>(beta: T, energy: T) -> T {
    let lim = T::lit(FERMI_EXPONENT_CLAMP);
    let x = (beta * energy).max(-lim).min(lim);
    T::one() / (T::one() + x.exp())
}

/// Spin couplings `J_a` generated by fermions hopping with amplitudes `q`.
pub fn spin_couplings<T: Real>(q: XY<T>, params: &HubbardParams<T>, grid: KGrid) -> Result<XY<T>> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("k grid must be nonempty".into()));
    }
    if !params.beta.is_finite() {
        return Err(Error::InvalidParameter("beta must be finite".into()));
    }
    let cx = KGrid::cosines::<T>(grid.nkx);
    let cy = KGrid::cosines::<T>(grid.nky);
    let two = T::lit(2.0);
    let mut sx = CompensatedSum::new();
    let mut sy = CompensatedSum::new();
    for &cky in &cy {
        for &ckx in &cx {
            let e = -two * q.x * ckx - two * q.y * cky;
            let n = fermi(params.beta, e);
            sx.add(ckx * n);
            sy.add(cky * n);
        }
    }
    let norm = T::lit(4.0) / T::from_usize_lossy(grid.len());
    Ok(XY::new(norm * params.t_x * sx.total(), norm * params.t_y * sy.total()))
}

/// Couplings of the non-interacting (`U = 0`) metal, where every spin
/// correlator equals one and `Q_a = t_a`.
pub fn metallic_couplings<T: Real>(params: &HubbardParams<T>, grid: KGrid) -> Result<XY<T>> {
    spin_couplings(params.hoppings(), params, grid)
}

/// Largest lattice accepted by [`real_space_oracle`].
pub const ORACLE_MAX_SITES: usize = 1600;

/// Dense real-space check of [`spin_couplings`] on an `lx * ly` torus.
///
/// Builds the single-particle hopping matrix, diagonalises it, fills the
/// modes with Fermi-Dirac weights and averages `4 t_a <f+_i f_{i+a}>` over
/// all bonds. Computed in `f64` regardless of `T`.
pub fn real_space_oracle<T: Real>(lx: usize, ly: usize, q: XY<T>, params: &HubbardParams<T>) -> Result<XY<T>> {
    let n = lx * ly;
    if n == 0 || n > ORACLE_MAX_SITES {
        return Err(Error::InvalidParameter(format!("oracle lattice has {n} sites (max {ORACLE_MAX_SITES})")));
    }
    let qx = q.x.to_f64_lossy();
    let qy = q.y.to_f64_lossy();
    let beta = params.beta.to_f64_lossy();
    let idx = |x: usize, y: usize| x + lx * y;
    let mut h = DMatrix::<f64>::zeros(n, n);
    for y in 0..ly {
        for x in 0..lx {
            let i = idx(x, y);
            let jx = idx((x + 1) % lx, y);
            let jy = idx(x, (y + 1) % ly);
            h[(i, jx)] -= qx;
            h[(jx, i)] -= qx;
            h[(i, jy)] -= qy;
            h[(jy, i)] -= qy;
        }
    }
    let eig = SymmetricEigen::try_new(h, 1e-14, 10_000)
        .ok_or_else(|| Error::NoConvergence("dense hopping matrix".into()))?;
    let occ: Vec<f64> = eig.eigenvalues.iter().map(|&e| fermi(beta, e)).collect();
    let v = &eig.eigenvectors;
    let corr = |i: usize, j: usize| -> f64 { (0..n).map(|m| v[(i, m)] * v[(j, m)] * occ[m]).sum() };
    let mut sx = 0.0;
    let mut sy = 0.0;
    for y in 0..ly {
        for x in 0..lx {
            let i = idx(x, y);
            sx += corr(i, idx((x + 1) % lx, y));
            sy += corr(i, idx(x, (y + 1) % ly));
        }
    }
    let jx = 4.0 * params.t_x.to_f64_lossy() * sx / n as f64;
    let jy = 4.0 * params.t_y.to_f64_lossy() * sy / n as f64;
    Ok(XY::new(T::lit(jx), T::lit(jy)))
}
