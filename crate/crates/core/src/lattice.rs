//! Rectangular open-boundary lattices, bond enumeration, and the central
//! plaquette used for bulk averages.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Default cap on the number of sites handled by the exact state-vector
/// backends.
pub const DEFAULT_EXACT_SITE_CAP: usize = 20;

/// Bond orientation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
}

/// Nearest-neighbour bond `a -> b` with `b` the `+axis` neighbour of `a`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Bond {
    pub a: usize,
    pub b: usize,
    pub axis: Axis,
}

/// Rectangular `lx * ly` register. Site `i = x + lx * y`.
///
/// Spacings are optional: dimensionless runs never need physical positions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeSpec<T> {
    lx: usize,
    ly: usize,
    rx: Option<T>,
    ry: Option<T>,
    #[serde(skip)]
    bonds: Vec<Bond>,
    #[serde(skip)]
    n_x_bonds: usize,
}

impl<T: Real> LatticeSpec<T> {
    /// Builds the lattice with x-bonds scanned row-major, followed by
    /// y-bonds scanned row-major.
    ///
    /// Degenerate `1 x L` chains and the single site are accepted; the
    /// bulk plaquette then shrinks accordingly.
    pub fn new(lx: usize, ly: usize, rx: Option<T>, ry: Option<T>) -> Result<Self> {
        if lx == 0 || ly == 0 {
            return Err(Error::InvalidLattice(format!("{lx}x{ly} has no sites")));
        }
        for r in [rx, ry].into_iter().flatten() {
            if !(r > T::zero()) || !r.is_finite() {
                return Err(Error::InvalidLattice(format!("spacing {r} must be positive")));
            }
        }
        let mut bonds = Vec::with_capacity((lx - 1) * ly + lx * (ly - 1));
        for y in 0..ly {
            for x in 0..lx - 1 {
                let a = x + lx * y;
                bonds.push(Bond { a, b: a + 1, axis: Axis::X });
            }
        }
        let n_x_bonds = bonds.len();
        for y in 0..ly - 1 {
            for x in 0..lx {
                let a = x + lx * y;
                bonds.push(Bond { a, b: a + lx, axis: Axis::Y });
            }
        }
        Ok(Self { lx, ly, rx, ry, bonds, n_x_bonds })
    }

    /// Dimensionless lattice without physical spacings.
    pub fn dimensionless(lx: usize, ly: usize) -> Result<Self> {
        Self::new(lx, ly, None, None)
    }

    pub fn lx(&self) -> usize {
        self.lx
    }

    pub fn ly(&self) -> usize {
        self.ly
    }

    pub fn n_sites(&self) -> usize {
        self.lx * self.ly
    }

    pub fn spacings(&self) -> Option<(T, T)> {
        Some((self.rx?, self.ry?))
    }

    /// Copy of this lattice with new physical spacings.
    pub fn with_spacings(&self, rx: T, ry: T) -> Result<Self> {
        Self::new(self.lx, self.ly, Some(rx), Some(ry))
    }

    /// Whether the exact backends can hold this many sites.
    pub fn exceeds_exact_cap(&self, cap: usize) -> bool {
        self.n_sites() > cap
    }

    pub fn site(&self, x: usize, y: usize) -> usize {
        debug_assert!(x < self.lx && y < self.ly);
        x + self.lx * y
    }

    pub fn coords(&self, i: usize) -> (usize, usize) {
        (i % self.lx, i / self.lx)
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    pub fn x_bonds(&self) -> &[Bond] {
        &self.bonds[..self.n_x_bonds]
    }

    pub fn y_bonds(&self) -> &[Bond] {
        &self.bonds[self.n_x_bonds..]
    }

    /// Index into [`Self::bonds`] of the bond joining `a` and `b`, if any.
    pub fn bond_index(&self, a: usize, b: usize) -> Option<usize> {
        let (a, b) = if a < b { (a, b) } else { (b, a) };
        self.bonds.iter().position(|bd| bd.a == a && bd.b == b)
    }

    pub fn are_neighbours(&self, a: usize, b: usize) -> bool {
        self.bond_index(a, b).is_some()
    }

    /// Physical positions `(x*rx, y*ry, 0)`.
    pub fn positions(&self) -> Result<Vec<[T; 3]>> {
        let (rx, ry) = self.spacings().ok_or(Error::MissingSpacings)?;
        Ok((0..self.n_sites())
            .map(|i| {
                let (x, y) = self.coords(i);
                [T::from_usize_lossy(x) * rx, T::from_usize_lossy(y) * ry, T::zero()]
            })
            .collect())
    }

    /// Site nearest the geometric centre, ties broken by lowest index.
    pub fn center_site(&self) -> usize {
        let cx = (self.lx as f64 - 1.0) / 2.0;
        let cy = (self.ly as f64 - 1.0) / 2.0;
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for i in 0..self.n_sites() {
            let (x, y) = self.coords(i);
            let d = (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2);
            if d < best_d - 1e-12 {
                best = i;
                best_d = d;
            }
        }
        best
    }

    /// Central plaquette. Its lower-left corner is `((L-2)/2, (L-2)/2)`
    /// (integer division) along each axis of length at least two.
    pub fn bulk_region(&self) -> BulkRegion {
        let x0 = self.lx.saturating_sub(2) / 2;
        let y0 = self.ly.saturating_sub(2) / 2;
        let xs: Vec<usize> = (x0..(x0 + 2).min(self.lx)).collect();
        let ys: Vec<usize> = (y0..(y0 + 2).min(self.ly)).collect();
        let mut sites = Vec::with_capacity(4);
        for &y in &ys {
            for &x in &xs {
                sites.push(self.site(x, y));
            }
        }
        let mut x_bonds = Vec::new();
        let mut y_bonds = Vec::new();
        for (k, bd) in self.bonds.iter().enumerate() {
            if sites.contains(&bd.a) && sites.contains(&bd.b) {
                match bd.axis {
                    Axis::X => x_bonds.push(k),
                    Axis::Y => y_bonds.push(k),
                }
            }
        }
        BulkRegion { plaquette_sites: sites, bulk_x_bonds: x_bonds, bulk_y_bonds: y_bonds }
    }
}

/// Sites and bonds of the central plaquette. Bond entries index
/// [`LatticeSpec::bonds`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BulkRegion {
    pub plaquette_sites: Vec<usize>,
    pub bulk_x_bonds: Vec<usize>,
    pub bulk_y_bonds: Vec<usize>,
}

impl BulkRegion {
    pub fn bonds(&self, axis: Axis) -> &[usize] {
        match axis {
            Axis::X => &self.bulk_x_bonds,
            Axis::Y => &self.bulk_y_bonds,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::HashSet;

    fn lat(lx: usize, ly: usize) -> LatticeSpec<f64> {
        LatticeSpec::dimensionless(lx, ly).unwrap()
    }

    #[test]
    fn bond_counts() {
        for (lx, ly, nx, ny) in [(2, 2, 2, 2), (6, 6, 30, 30), (4, 3, 9, 8)] {
            let l = lat(lx, ly);
            assert_eq!(l.n_sites(), lx * ly);
            assert_eq!(l.x_bonds().len(), nx);
            assert_eq!(l.y_bonds().len(), ny);
        }
    }

    #[test]
    fn plaquettes_of_even_grids() {
        let l = lat(6, 6);
        let b = l.bulk_region();
        let want: HashSet<usize> = [(2, 2), (3, 2), (2, 3), (3, 3)].iter().map(|&(x, y)| l.site(x, y)).collect();
        assert_eq!(b.plaquette_sites.iter().copied().collect::<HashSet<_>>(), want);
        assert_eq!(b.bulk_x_bonds.len(), 2);
        assert_eq!(b.bulk_y_bonds.len(), 2);

        let l = lat(4, 4);
        let want: HashSet<usize> = [(1, 1), (2, 1), (1, 2), (2, 2)].iter().map(|&(x, y)| l.site(x, y)).collect();
        assert_eq!(l.bulk_region().plaquette_sites.iter().copied().collect::<HashSet<_>>(), want);

        let l = lat(2, 2);
        let b = l.bulk_region();
        assert_eq!(b.plaquette_sites.len(), 4);
        assert_eq!(b.bulk_x_bonds.len() + b.bulk_y_bonds.len(), 4);
    }

    #[test]
    fn odd_grid_plaquette_convention() {
        let l = lat(5, 5);
        let b = l.bulk_region();
        assert_eq!(b.plaquette_sites, vec![l.site(1, 1), l.site(2, 1), l.site(1, 2), l.site(2, 2)]);
        let l = lat(3, 3);
        assert_eq!(l.bulk_region().plaquette_sites, vec![0, 1, 3, 4]);
        assert_eq!(l.center_site(), 4);
    }

    #[test]
    fn chains_and_single_site() {
        let l = lat(1, 1);
        assert!(l.bonds().is_empty());
        assert_eq!(l.bulk_region().plaquette_sites, vec![0]);
        let l = lat(2, 1);
        assert_eq!(l.bonds().len(), 1);
        assert_eq!(l.bulk_region().bulk_x_bonds, vec![0]);
    }

    #[test]
    fn positions_need_spacings() {
        assert!(matches!(lat(2, 2).positions(), Err(Error::MissingSpacings)));
        let l = LatticeSpec::new(3, 2, Some(6.0), Some(7.0)).unwrap();
        let p = l.positions().unwrap();
        assert_eq!(p[l.site(2, 1)], [12.0, 7.0, 0.0]);
    }

    #[test]
    fn rejects_empty_and_bad_spacing() {
        assert!(LatticeSpec::<f64>::dimensionless(0, 3).is_err());
        assert!(LatticeSpec::new(2, 2, Some(-1.0), Some(1.0)).is_err());
    }

    #[test]
    fn exact_cap_flag() {
        assert!(lat(6, 6).exceeds_exact_cap(DEFAULT_EXACT_SITE_CAP));
        assert!(!lat(4, 4).exceeds_exact_cap(DEFAULT_EXACT_SITE_CAP));
    }

    proptest! {
        #[test]
        fn lattice_invariants(lx in 1usize..9, ly in 1usize..9) {
            let l = lat(lx, ly);
            // index bijection
            for i in 0..l.n_sites() {
                let (x, y) = l.coords(i);
                prop_assert_eq!(l.site(x, y), i);
            }
            // unit-length bonds along one axis, no duplicates
            let mut seen = HashSet::new();
            for bd in l.bonds() {
                let (xa, ya) = l.coords(bd.a);
                let (xb, yb) = l.coords(bd.b);
                let d = (xb as i64 - xa as i64).abs() + (yb as i64 - ya as i64).abs();
                prop_assert_eq!(d, 1);
                prop_assert!(seen.insert((bd.a, bd.b)));
            }
            prop_assert_eq!(l.x_bonds().len(), (lx - 1) * ly);
            prop_assert_eq!(l.y_bonds().len(), lx * (ly - 1));
            // reflection x -> lx-1-x maps bonds onto bonds
            let refl = |i: usize| { let (x, y) = l.coords(i); l.site(lx - 1 - x, y) };
            for bd in l.bonds() {
                prop_assert!(l.are_neighbours(refl(bd.a), refl(bd.b)));
            }
            // bulk region is a subset of the lattice
            let b = l.bulk_region();
            if lx >= 2 && ly >= 2 {
                prop_assert_eq!(b.plaquette_sites.len(), 4);
                prop_assert_eq!(b.bulk_x_bonds.len(), 2);
                prop_assert_eq!(b.bulk_y_bonds.len(), 2);
            }
            for &k in b.bulk_x_bonds.iter().chain(&b.bulk_y_bonds) {
                prop_assert!(k < l.bonds().len());
            }
        }
    }
}
