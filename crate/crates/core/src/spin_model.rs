//! Spin Hamiltonians of the form
//!
//! ```text
//! H = sum_{i<j} W_ij sz_i sz_j + sum_i g_i sx_i + sum_i b_i sz_i
//! ```
//!
//! covering both the ideal auxiliary-spin model and the Rydberg register
//! that emulates it, plus the setpoint algebra connecting the two.
//!
//! Units: the Rydberg side uses `hbar = 1`, so `Omega` and `delta` are
//! angular frequencies in the same energy unit as `C6 / r^6`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fermion::XY;
use crate::lattice::{Axis, LatticeSpec};
use crate::scalar::Real;

/// Default minimum tweezer spacing (um) below which the van der Waals
/// form of the interaction is not trusted.
pub const DEFAULT_MIN_SPACING: f64 = 4.0;

/// Default quasi-adiabatic ramp duration (us).
pub const DEFAULT_T_MAX: f64 = 4.0;

/// One `W sz_i sz_j` term with `i < j`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZzTerm<T> {
    pub i: usize,
    pub j: usize,
    pub w: T,
}

/// Generic ZZ + transverse + longitudinal spin Hamiltonian on `n` qubits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpinHamiltonian<T> {
    n_sites: usize,
    zz: Vec<ZzTerm<T>>,
    transverse: Vec<T>,
    longitudinal: Vec<T>,
}

impl<T: Real> SpinHamiltonian<T> {
    /// Builds a Hamiltonian, merging repeated pairs (in either order).
    pub fn new(
        n_sites: usize,
        zz: impl IntoIterator<Item = (usize, usize, T)>,
        transverse: Vec<T>,
        longitudinal: Vec<T>,
    ) -> Result<Self> {
        if transverse.len() != n_sites {
            return Err(Error::SiteMismatch(transverse.len(), n_sites));
        }
        if longitudinal.len() != n_sites {
            return Err(Error::SiteMismatch(longitudinal.len(), n_sites));
        }
        let mut merged: BTreeMap<(usize, usize), T> = BTreeMap::new();
        for (i, j, w) in zz {
            if i == j {
                return Err(Error::InvalidParameter(format!("self coupling on site {i}")));
            }
            if i >= n_sites || j >= n_sites {
                return Err(Error::InvalidParameter(format!("pair ({i}, {j}) outside {n_sites} sites")));
            }
            let key = (i.min(j), i.max(j));
            let e = merged.entry(key).or_insert(T::zero());
            *e = *e + w;
        }
        let zz = merged.into_iter().map(|((i, j), w)| ZzTerm { i, j, w }).collect();
        Ok(Self { n_sites, zz, transverse, longitudinal })
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn zz_terms(&self) -> &[ZzTerm<T>] {
        &self.zz
    }

    pub fn transverse(&self) -> &[T] {
        &self.transverse
    }

    pub fn longitudinal(&self) -> &[T] {
        &self.longitudinal
    }

    /// `W_ij` (zero when absent), symmetric in its arguments.
    pub fn coupling(&self, i: usize, j: usize) -> T {
        let key = (i.min(j), i.max(j));
        self.zz
            .binary_search_by(|t| (t.i, t.j).cmp(&key))
            .map(|k| self.zz[k].w)
            .unwrap_or(T::zero())
    }

    pub fn is_diagonal(&self) -> bool {
        self.transverse.iter().all(|g| g.is_zero())
    }

    /// True when the Hamiltonian commutes with the global spin flip.
    pub fn has_flip_symmetry(&self) -> bool {
        self.longitudinal.iter().all(|b| b.is_zero())
    }

    pub fn scaled(&self, s: T) -> Self {
        Self {
            n_sites: self.n_sites,
            zz: self.zz.iter().map(|t| ZzTerm { w: t.w * s, ..*t }).collect(),
            transverse: self.transverse.iter().map(|&g| g * s).collect(),
            longitudinal: self.longitudinal.iter().map(|&b| b * s).collect(),
        }
    }

    pub fn negated(&self) -> Self {
        self.scaled(-T::one())
    }

    /// Image of the ideal model in Rydberg sign conventions: the overall
    /// sign is flipped and the register is rotated by `prod_i sz_i`, which
    /// restores the sign of the transverse field. Energies are multiplied
    /// by `scale`.
    pub fn qpu_form(&self, scale: T) -> Self {
        Self {
            n_sites: self.n_sites,
            zz: self.zz.iter().map(|t| ZzTerm { w: -t.w * scale, ..*t }).collect(),
            transverse: self.transverse.iter().map(|&g| g * scale).collect(),
            longitudinal: self.longitudinal.iter().map(|&b| -b * scale).collect(),
        }
    }

    /// Term-wise difference `self - other`.
    pub fn difference(&self, other: &Self) -> Result<Self> {
        if self.n_sites != other.n_sites {
            return Err(Error::SiteMismatch(self.n_sites, other.n_sites));
        }
        let zz = self
            .zz
            .iter()
            .map(|t| (t.i, t.j, t.w))
            .chain(other.zz.iter().map(|t| (t.i, t.j, -t.w)));
        let g = self.transverse.iter().zip(&other.transverse).map(|(&a, &b)| a - b).collect();
        let b = self.longitudinal.iter().zip(&other.longitudinal).map(|(&a, &b)| a - b).collect();
        let mut out = Self::new(self.n_sites, zz, g, b)?;
        out.zz.retain(|t| !t.w.is_zero());
        Ok(out)
    }

    /// Hilbert-Schmidt norm divided by `sqrt(2^N)`; Pauli strings are
    /// orthonormal in this inner product.
    pub fn pauli_norm(&self) -> T {
        let sq = |v: T| v * v;
        (self.zz.iter().map(|t| sq(t.w)).sum::<T>()
            + self.transverse.iter().map(|&g| sq(g)).sum::<T>()
            + self.longitudinal.iter().map(|&b| sq(b)).sum::<T>())
        .sqrt()
    }

    /// Upper bound on the spectral radius.
    pub fn norm_bound(&self) -> T {
        self.zz.iter().map(|t| t.w.abs()).sum::<T>()
            + self.transverse.iter().map(|g| g.abs()).sum::<T>()
            + self.longitudinal.iter().map(|b| b.abs()).sum::<T>()
    }

    /// Plain-text coupling list, one term per row:
    ///
    /// ```text
    /// sites <N>
    /// zz <i> <j> <W_ij>
    /// field <i> <g_i> <b_i>
    /// ```
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# W_ij sz_i sz_j + g_i sx_i + b_i sz_i");
        let _ = writeln!(s, "sites {}", self.n_sites);
        for t in &self.zz {
            let _ = writeln!(s, "zz {} {} {:e}", t.i, t.j, t.w);
        }
        for i in 0..self.n_sites {
            let _ = writeln!(s, "field {} {:e} {:e}", i, self.transverse[i], self.longitudinal[i]);
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let perr = |line: usize, msg: &str| Error::Parse { line, msg: msg.to_string() };
        let mut n = None;
        let mut zz = Vec::new();
        let mut fields = Vec::new();
        for (k, raw) in text.lines().enumerate() {
            let line = k + 1;
            let row = raw.split('#').next().unwrap_or("").trim();
            if row.is_empty() {
                continue;
            }
            let tok: Vec<&str> = row.split_whitespace().collect();
            let idx = |s: &str| s.parse::<usize>().map_err(|_| perr(line, "bad site index"));
            let num = |s: &str| s.parse::<f64>().map(T::lit).map_err(|_| perr(line, "bad number"));
            match (tok[0], tok.len()) {
                ("sites", 2) => n = Some(idx(tok[1])?),
                ("zz", 4) => zz.push((idx(tok[1])?, idx(tok[2])?, num(tok[3])?)),
                ("field", 4) => fields.push((idx(tok[1])?, num(tok[2])?, num(tok[3])?)),
                _ => return Err(perr(line, "unrecognised row")),
            }
        }
        let n = n.ok_or_else(|| perr(0, "missing `sites` row"))?;
        let mut g = vec![T::zero(); n];
        let mut b = vec![T::zero(); n];
        for (i, gi, bi) in fields {
            if i >= n {
                return Err(Error::InvalidParameter(format!("field row for site {i} of {n}")));
            }
            g[i] = gi;
            b[i] = bi;
        }
        Self::new(n, zz, g, b)
    }
}

/// Ideal auxiliary-spin model: `-J_a` on every `a`-bond, `U/4` transverse
/// field, no longitudinal field.
pub fn build_ideal<T: Real>(lattice: &LatticeSpec<T>, j: XY<T>, u: T) -> SpinHamiltonian<T> {
    let zz = lattice.bonds().iter().map(|b| (b.a, b.b, -j.get(b.axis)));
    let n = lattice.n_sites();
    SpinHamiltonian::new(n, zz, vec![u / T::lit(4.0); n], vec![T::zero(); n])
        .expect("lattice bonds are valid pairs")
}

/// Physical knobs of the Rydberg register realizing a target spin model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QpuSetpoint<T> {
    pub r_x: T,
    pub r_y: T,
    pub omega: T,
    pub delta: T,
    pub c6: T,
    pub t_max: T,
    /// QPU energy per model energy unit: `C6 / (4 R_x^6) = scale * J_x`.
    pub scale: T,
}

/// How the detuning removes the mean-field `sz` terms.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetuningMode {
    /// One global detuning matched to the bulk reference site.
    #[default]
    Global,
    /// Per-site detunings `delta_i = 2 Jt(r_i)`, cancelling all edge terms.
    Local,
}

fn distance<T: Real>(a: &[T; 3], b: &[T; 3]) -> T {
    let d = |k: usize| a[k] - b[k];
    (d(0) * d(0) + d(1) * d(1) + d(2) * d(2)).sqrt()
}

/// All-pairs couplings `C6 / (4 r^6)`, returned as `(i, j, W)` with `i < j`.
pub fn pair_couplings<T: Real>(positions: &[[T; 3]], c6: T) -> Result<Vec<(usize, usize, T)>> {
    let mut out = Vec::with_capacity(positions.len() * positions.len().saturating_sub(1) / 2);
    for i in 0..positions.len() {
        for j in i + 1..positions.len() {
            let r = distance(&positions[i], &positions[j]);
            if !(r > T::zero()) {
                return Err(Error::CoincidentAtoms(i, j));
            }
            out.push((i, j, c6 / (T::lit(4.0) * r.powi(6))));
        }
    }
    Ok(out)
}

/// Interaction strength per site, `Jt(r_i) = sum_{j != i} C6 / (4 r_ij^6)`.
pub fn interaction_per_site<T: Real>(positions: &[[T; 3]], c6: T) -> Result<Vec<T>> {
    let mut jt = vec![T::zero(); positions.len()];
    for (i, j, w) in pair_couplings(positions, c6)? {
        jt[i] = jt[i] + w;
        jt[j] = jt[j] + w;
    }
    Ok(jt)
}

/// Index of the site closest to the centroid, ties broken by lowest index.
pub fn reference_site<T: Real>(positions: &[[T; 3]]) -> usize {
    let n = T::from_usize_lossy(positions.len().max(1));
    let mut c = [T::zero(); 3];
    for p in positions {
        for k in 0..3 {
            c[k] = c[k] + p[k] / n;
        }
    }
    let tol = T::lit(1e-9);
    let mut best = 0;
    let mut best_d = T::infinity();
    for (i, p) in positions.iter().enumerate() {
        let d = distance(p, &c);
        if d < best_d - tol {
            best = i;
            best_d = d;
        }
    }
    best
}

/// Global detuning `delta = 2 Jt(r_0)` cancelling the `sz` field at the
/// bulk reference site `r_0`.
pub fn detuning_for<T: Real>(positions: &[[T; 3]], c6: T) -> Result<T> {
    let jt = interaction_per_site(positions, c6)?;
    Ok(T::lit(2.0) * jt[reference_site(positions)])
}

/// Rydberg Hamiltonian for atoms at `positions`:
/// `W_ij = C6/(4 r^6)` on all pairs, `g_i = Omega/2`,
/// `b_i = -(delta_i/2 - Jt(r_i))`.
pub fn build_qpu<T: Real>(positions: &[[T; 3]], setpoint: &QpuSetpoint<T>, mode: DetuningMode) -> Result<SpinHamiltonian<T>> {
    let pairs = pair_couplings(positions, setpoint.c6)?;
    let n = positions.len();
    let mut jt = vec![T::zero(); n];
    for &(i, j, w) in &pairs {
        jt[i] = jt[i] + w;
        jt[j] = jt[j] + w;
    }
    let half = T::lit(0.5);
    let b = match mode {
        DetuningMode::Global => jt.iter().map(|&x| x - setpoint.delta * half).collect(),
        DetuningMode::Local => vec![T::zero(); n],
    };
    SpinHamiltonian::new(n, pairs, vec![setpoint.omega * half; n], b)
}

/// Rydberg side parameters held fixed across a self-consistent loop.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QpuConfig<T> {
    pub c6: T,
    pub r_x: T,
    pub t_max: T,
    #[serde(default)]
    pub detuning: DetuningMode,
    pub min_spacing: T,
}

impl<T: Real> QpuConfig<T> {
    /// Physical configuration with the default spacing floor and ramp time.
    pub fn physical(c6: T, r_x: T) -> Self {
        Self {
            c6,
            r_x,
            t_max: T::lit(DEFAULT_T_MAX),
            detuning: DetuningMode::Global,
            min_spacing: T::lit(DEFAULT_MIN_SPACING),
        }
    }

    /// Unit-spacing register with `C6/(4 R_x^6) = 1`, so QPU energies are
    /// measured in units of the x nearest-neighbour coupling.
    pub fn dimensionless(t_max: T) -> Self {
        Self {
            c6: T::lit(4.0),
            r_x: T::one(),
            t_max,
            detuning: DetuningMode::Global,
            min_spacing: T::zero(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c6 > T::zero()) {
            return Err(Error::InvalidParameter(format!("C6 = {} must be positive", self.c6)));
        }
        if !(self.r_x > self.min_spacing) {
            return Err(Error::InvalidParameter(format!(
                "R_x = {} must exceed the spacing floor {}",
                self.r_x, self.min_spacing
            )));
        }
        if !(self.t_max > T::zero()) {
            return Err(Error::InvalidParameter("t_max must be positive".into()));
        }
        Ok(())
    }
}

/// Setpoint realizing couplings `j` and interaction `u` at fixed `R_x`.
///
/// `scale = [C6/(4 R_x^6)] / J_x`, `R_y = R_x (J_x/J_y)^{1/6}`,
/// `Omega = scale * U / 2`, and `delta` cancels the bulk `sz` field on the
/// resulting layout. Equivalent to `J_a / U = C6 / (8 Omega R_a^6)`.
pub fn setpoint_from_meanfields<T: Real>(
    lattice: &LatticeSpec<T>,
    j: XY<T>,
    u: T,
    cfg: &QpuConfig<T>,
) -> Result<QpuSetpoint<T>> {
    cfg.validate()?;
    if !(j.x > T::zero()) || !(j.y > T::zero()) {
        return Err(Error::InvalidParameter(format!(
            "couplings must be ferromagnetic (J_x = {}, J_y = {})",
            j.x, j.y
        )));
    }
    if !(u >= T::zero()) {
        return Err(Error::InvalidParameter(format!("U = {u} must be >= 0")));
    }
    let nn_x = cfg.c6 / (T::lit(4.0) * cfg.r_x.powi(6));
    let scale = nn_x / j.x;
    let r_y = cfg.r_x * (j.x / j.y).powf(T::one() / T::lit(6.0));
    if !(r_y > cfg.min_spacing) {
        return Err(Error::InvalidParameter(format!("R_y = {r_y} falls below the spacing floor")));
    }
    let layout = lattice.with_spacings(cfg.r_x, r_y)?;
    let delta = detuning_for(&layout.positions()?, cfg.c6)?;
    Ok(QpuSetpoint { r_x: cfg.r_x, r_y, omega: scale * u / T::lit(2.0), delta, c6: cfg.c6, t_max: cfg.t_max, scale })
}

/// Error operator `H_QPU - target` where the target is the ideal model in
/// Rydberg conventions ([`SpinHamiltonian::qpu_form`]). For a matched
/// setpoint this holds the beyond-nearest-neighbour tail and the edge
/// fields `(Jt(r_i) - Jt_0) sz_i`.
pub fn error_hamiltonian<T: Real>(h_qpu: &SpinHamiltonian<T>, target: &SpinHamiltonian<T>) -> Result<SpinHamiltonian<T>> {
    h_qpu.difference(target)
}

/// Split of an error operator into tail and edge content.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorContent<T> {
    pub tail_norm: T,
    pub edge_norm: T,
    /// Relative to the target norm.
    pub relative: T,
    pub relative_per_site: T,
}

pub fn error_content<T: Real>(err: &SpinHamiltonian<T>, target: &SpinHamiltonian<T>) -> ErrorContent<T> {
    let tail_norm = err.zz_terms().iter().map(|t| t.w * t.w).sum::<T>().sqrt();
    let edge_norm = err.longitudinal().iter().map(|&b| b * b).sum::<T>().sqrt();
    let relative = err.pauli_norm() / target.pauli_norm();
    let n = T::from_usize_lossy(err.n_sites().max(1));
    ErrorContent { tail_norm, edge_norm, relative, relative_per_site: relative / n.sqrt() }
}

/// Nearest-neighbour couplings of `h` grouped by lattice axis. Returns the
/// mean coupling per axis.
pub fn mean_nn_couplings<T: Real>(h: &SpinHamiltonian<T>, lattice: &LatticeSpec<T>) -> XY<T> {
    let mean = |axis: Axis| {
        let bonds: Vec<_> = lattice.bonds().iter().filter(|b| b.axis == axis).collect();
        if bonds.is_empty() {
            return T::zero();
        }
        bonds.iter().map(|b| h.coupling(b.a, b.b)).sum::<T>() / T::from_usize_lossy(bonds.len())
    };
    XY::new(mean(Axis::X), mean(Axis::Y))
}
