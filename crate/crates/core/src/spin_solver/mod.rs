//! Exact state-vector backend: extremal eigenstates, annealing, quench
//! propagation and spin observables.
//!
//! Basis convention: bit `i` of a basis index is site `i`; a set bit is the
//! Rydberg state with `sz = +1`.

mod lanczos;
mod operator;
mod propagate;
mod tridiag;

use num_complex::Complex;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

pub use lanczos::{lowest_eigenpair, FlipSector, LanczosOptions};
pub use operator::{sz_of, SpinOperator};
pub use propagate::{anneal, evolve, evolve_observe, AnnealSchedule, Drive, EvolveOptions};
pub use tridiag::tridiag_eigen;

use crate::error::{Error, Result};
use crate::fermion::XY;
use crate::lattice::{Axis, BulkRegion, LatticeSpec};
use crate::scalar::Real;

/// Normalized state vector over `2^N` basis states.
#[derive(Clone, Debug, PartialEq)]
pub struct SpinState<T> {
    n_sites: usize,
    amps: Vec<Complex<T>>,
}

impl<T: Real> SpinState<T> {
    pub fn basis(n_sites: usize, index: usize) -> Self {
        let mut amps = vec![Complex::zero(); 1 << n_sites];
        amps[index] = Complex::new(T::one(), T::zero());
        Self { n_sites, amps }
    }

    /// `|0...0>`, every atom in the ground state.
    pub fn all_ground(n_sites: usize) -> Self {
        Self::basis(n_sites, 0)
    }

    pub fn from_real(n_sites: usize, v: &[T]) -> Result<Self> {
        Self::from_amplitudes(n_sites, v.iter().map(|&x| Complex::new(x, T::zero())).collect())
    }

    /// Normalizes the supplied amplitudes.
    pub fn from_amplitudes(n_sites: usize, mut amps: Vec<Complex<T>>) -> Result<Self> {
        if amps.len() != 1 << n_sites {
            return Err(Error::SiteMismatch(amps.len(), 1 << n_sites));
        }
        let n = amps.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt();
        if !(n > T::zero()) {
            return Err(Error::InvalidParameter("zero state vector".into()));
        }
        amps.iter_mut().for_each(|z| *z = *z / n);
        Ok(Self { n_sites, amps })
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn amplitudes(&self) -> &[Complex<T>] {
        &self.amps
    }

    pub(crate) fn amplitudes_mut(&mut self) -> &mut [Complex<T>] {
        &mut self.amps
    }

    pub fn norm(&self) -> T {
        self.amps.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt()
    }

    pub fn probabilities(&self) -> Vec<T> {
        self.amps.iter().map(|z| z.norm_sqr()).collect()
    }

    pub fn overlap(&self, other: &Self) -> Complex<T> {
        self.amps.iter().zip(&other.amps).fold(Complex::zero(), |acc, (a, b)| acc + a.conj() * b)
    }

    /// `<psi| sign * H |psi>`.
    pub fn energy(&self, op: &SpinOperator<T>) -> T {
        let mut w = vec![Complex::zero(); self.amps.len()];
        op.apply(&self.amps, &mut w, T::one(), T::zero(), T::one());
        self.overlap_with(&w).re
    }

    fn overlap_with(&self, w: &[Complex<T>]) -> Complex<T> {
        self.amps.iter().zip(w).fold(Complex::zero(), |acc, (a, b)| acc + a.conj() * b)
    }
}

/// Which end of the spectrum to extract.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Extremal {
    Ground,
    Top,
}

#[derive(Clone, Copy, Debug)]
pub struct EigenOptions<T> {
    pub lanczos: LanczosOptions<T>,
    /// Energy window, relative to the operator scale, inside which two
    /// flip sectors count as degenerate.
    pub degeneracy_rel: T,
}

impl<T: Real> Default for EigenOptions<T> {
    fn default() -> Self {
        Self { lanczos: LanczosOptions::default(), degeneracy_rel: T::lit(1e-8).max(T::epsilon() * T::lit(1e3)) }
    }
}

#[derive(Clone, Debug)]
pub struct Eigenstate<T> {
    pub energy: T,
    pub state: SpinState<T>,
    /// The extremal level is degenerate; `state` is the maximally
    /// polarized representative.
    pub degenerate: bool,
    /// Energy splitting between the two flip sectors, when resolved.
    pub sector_gap: Option<T>,
    pub residual: T,
}

/// Extremal eigenstate of `op`.
///
/// Without longitudinal fields the spectrum splits into the two sectors of
/// the global spin flip; each is solved separately. When their extremal
/// levels are degenerate the returned state is the equal-weight
/// combination with the largest `|sum_i <sz_i>|`.
pub fn eigenstate<T: Real>(op: &SpinOperator<T>, which: Extremal, opts: &EigenOptions<T>) -> Result<Eigenstate<T>> {
    let sign = match which {
        Extremal::Ground => T::one(),
        Extremal::Top => -T::one(),
    };
    let n = op.n_sites();
    let scale = op.norm_bound().max(T::one());
    let tol = opts.degeneracy_rel * scale;
    if op.is_diagonal() {
        return Ok(diagonal_extremal(op, sign, tol));
    }
    let apply = |x: &[T], y: &mut [T]| op.apply(x, y, sign, T::zero(), T::one());
    let dim = op.dim();
    if !op.flip_symmetric() {
        let (theta, v, residual) = lowest_eigenpair(apply, dim, scale, None, &opts.lanczos)?;
        return Ok(Eigenstate {
            energy: theta * sign,
            state: SpinState::from_real(n, &v)?,
            degenerate: false,
            sector_gap: None,
            residual,
        });
    }
    let mask = dim - 1;
    let even = lowest_eigenpair(apply, dim, scale, Some(FlipSector { mask, even: true }), &opts.lanczos)?;
    let odd = lowest_eigenpair(apply, dim, scale, Some(FlipSector { mask, even: false }), &opts.lanczos)?;
    let gap = (even.0 - odd.0).abs();
    if gap > tol {
        let (theta, v, residual) = if even.0 <= odd.0 { even } else { odd };
        return Ok(Eigenstate {
            energy: theta * sign,
            state: SpinState::from_real(n, &v)?,
            degenerate: false,
            sector_gap: Some(gap),
            residual,
        });
    }
    let mag = op.magnetization();
    let cross: T = (0..dim).map(|s| even.1[s] * mag[s] * odd.1[s]).sum();
    let sgn = if cross >= T::zero() { T::one() } else { -T::one() };
    let v: Vec<T> = even.1.iter().zip(&odd.1).map(|(&a, &b)| a + sgn * b).collect();
    Ok(Eigenstate {
        energy: even.0.min(odd.0) * sign,
        state: SpinState::from_real(n, &v)?,
        degenerate: true,
        sector_gap: Some(gap),
        residual: even.2.max(odd.2),
    })
}

fn diagonal_extremal<T: Real>(op: &SpinOperator<T>, sign: T, tol: T) -> Eigenstate<T> {
    let d = op.diagonal();
    let best = d.iter().map(|&e| e * sign).fold(T::infinity(), T::min);
    let mag = op.magnetization();
    let mut pick = 0;
    let mut count = 0;
    for s in 0..d.len() {
        if d[s] * sign - best <= tol {
            count += 1;
            if count == 1 || mag[s].abs() > mag[pick].abs() {
                pick = s;
            }
        }
    }
    Eigenstate {
        energy: d[pick],
        state: SpinState::basis(op.n_sites(), pick),
        degenerate: count > 1,
        sector_gap: None,
        residual: T::zero(),
    }
}

/// Spin expectation values and the bulk quantities fed back to the fermions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observables<T> {
    pub sz: Vec<T>,
    /// `<sz_a sz_b>` per lattice bond, in lattice bond order.
    pub bond_zz: Vec<T>,
    /// `t_a` times the mean bulk `a`-bond correlator.
    pub q_bulk: XY<T>,
    /// Squared mean plaquette magnetization.
    pub z_bulk: T,
    /// Mean `<sz_i sz_j>` over distinct plaquette pairs; `None` on a
    /// single-site plaquette.
    pub z_bulk_pair: Option<T>,
}

/// Observables from basis-state probabilities.
pub fn observables_from_probabilities<T: Real>(
    probs: &[T],
    lattice: &LatticeSpec<T>,
    bulk: &BulkRegion,
    hoppings: XY<T>,
) -> Observables<T> {
    let n = lattice.n_sites();
    let mut sz = vec![T::zero(); n];
    let bonds = lattice.bonds();
    let mut bond_zz = vec![T::zero(); bonds.len()];
    let plaq = &bulk.plaquette_sites;
    let pairs: Vec<(usize, usize)> =
        (0..plaq.len()).flat_map(|a| (a + 1..plaq.len()).map(move |b| (plaq[a], plaq[b]))).collect();
    let mut pair_zz = vec![T::zero(); pairs.len()];
    for (s, &p) in probs.iter().enumerate() {
        if p.is_zero() {
            continue;
        }
        for (i, v) in sz.iter_mut().enumerate() {
            *v = *v + p * sz_of::<T>(s, i);
        }
        for (k, b) in bonds.iter().enumerate() {
            bond_zz[k] = bond_zz[k] + p * sz_of::<T>(s, b.a) * sz_of::<T>(s, b.b);
        }
        for (k, &(i, j)) in pairs.iter().enumerate() {
            pair_zz[k] = pair_zz[k] + p * sz_of::<T>(s, i) * sz_of::<T>(s, j);
        }
    }
    let mean = |xs: &mut dyn Iterator<Item = T>| {
        let (s, c) = xs.fold((T::zero(), 0usize), |(s, c), x| (s + x, c + 1));
        if c == 0 {
            T::zero()
        } else {
            s / T::from_usize_lossy(c)
        }
    };
    let q = |axis: Axis| hoppings.get(axis) * mean(&mut bulk.bonds(axis).iter().map(|&k| bond_zz[k]));
    let m = mean(&mut plaq.iter().map(|&i| sz[i]));
    let z_bulk_pair = if pairs.is_empty() { None } else { Some(mean(&mut pair_zz.iter().copied())) };
    Observables { q_bulk: XY::new(q(Axis::X), q(Axis::Y)), z_bulk: m * m, z_bulk_pair, sz, bond_zz }
}

pub fn observables<T: Real>(state: &SpinState<T>, lattice: &LatticeSpec<T>, bulk: &BulkRegion, hoppings: XY<T>) -> Observables<T> {
    observables_from_probabilities(&state.probabilities(), lattice, bulk, hoppings)
}

#[cfg(test)]
mod tests;
