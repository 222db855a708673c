//! Equilibrium driver: fixed-point iteration between the fermion k-sum and
//! a spin backend, per interaction strength.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fermion::{metallic_couplings, spin_couplings, HubbardParams, KGrid, XY};
use crate::lattice::{LatticeSpec, DEFAULT_EXACT_SITE_CAP};
use crate::measurement::{sample, shot_observables, ReadoutModel, SpamParams};
use crate::noise::{run_ensemble, NoiseConfig, NoisyInstance};
use crate::scalar::Real;
use crate::seeding::derive_seed;
use crate::spin_model::{build_ideal, build_qpu, setpoint_from_meanfields, QpuConfig, QpuSetpoint, SpinHamiltonian};
use crate::spin_solver::{
    anneal, eigenstate, observables, AnnealSchedule, EigenOptions, EvolveOptions, Extremal, SpinOperator, SpinState,
};

/// Spin backend of the loop.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Backend {
    /// Ground state of the ideal nearest-neighbour model.
    #[default]
    #[serde(rename = "exact_Hs")]
    ExactHs,
    /// Extremal eigenstate of the emulated Rydberg Hamiltonian.
    #[serde(rename = "exact_HQPU")]
    ExactHqpu,
    /// Linear Rabi ramp on the emulated register from `|0...0>`.
    #[serde(rename = "anneal_HQPU")]
    AnnealHqpu,
}

impl Backend {
    pub fn tag(&self) -> &'static str {
        match self {
            Backend::ExactHs => "exact_Hs",
            Backend::ExactHqpu => "exact_HQPU",
            Backend::AnnealHqpu => "anneal_HQPU",
        }
    }

    pub fn is_qpu(&self) -> bool {
        !matches!(self, Backend::ExactHs)
    }
}

/// Projective readout settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Real + Deserialize<'de>"))]
pub struct ShotConfig<T> {
    #[serde(default = "default_shots")]
    pub n_shots: usize,
    #[serde(default = "SpamParams::none")]
    pub spam: SpamParams<T>,
    #[serde(default)]
    pub readout: ReadoutModel,
}

fn default_shots() -> usize {
    500
}

impl<T: Real> Default for ShotConfig<T> {
    fn default() -> Self {
        Self { n_shots: default_shots(), spam: SpamParams::none(), readout: ReadoutModel::default() }
    }
}

/// Everything that stays fixed while the loop runs.
#[derive(Clone, Debug, PartialEq)]
pub struct LoopConfig<T> {
    pub backend: Backend,
    pub qpu: QpuConfig<T>,
    /// Piecewise-constant steps of the anneal ramp.
    pub anneal_steps: usize,
    pub n_iter: usize,
    /// `J <- (1 - damping) J_new + damping J_old`.
    pub damping: T,
    pub k_grid: KGrid,
    pub shots: Option<ShotConfig<T>>,
    pub noise: Option<NoiseConfig<T>>,
    pub site_cap: usize,
    pub seed: u64,
}

impl<T: Real> Default for LoopConfig<T> {
    fn default() -> Self {
        Self {
            backend: Backend::ExactHs,
            qpu: QpuConfig::dimensionless(T::lit(30.0)),
            anneal_steps: 150,
            n_iter: 5,
            damping: T::zero(),
            k_grid: KGrid::default(),
            shots: None,
            noise: None,
            site_cap: DEFAULT_EXACT_SITE_CAP,
            seed: 0,
        }
    }
}

impl<T: Real> LoopConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if self.n_iter == 0 {
            return Err(Error::InvalidParameter("n_iter must be >= 1".into()));
        }
        if !(self.damping >= T::zero() && self.damping < T::one()) {
            return Err(Error::InvalidParameter("damping must lie in [0, 1)".into()));
        }
        if self.anneal_steps == 0 {
            return Err(Error::InvalidParameter("anneal_steps must be >= 1".into()));
        }
        self.qpu.validate()?;
        if let Some(s) = &self.shots {
            if s.n_shots == 0 {
                return Err(Error::InvalidParameter("shots.n_shots must be >= 1".into()));
            }
            s.spam.validate()?;
        }
        if let Some(n) = &self.noise {
            n.validate()?;
            if !self.backend.is_qpu() && !n.is_off() {
                return Err(Error::InvalidParameter("hardware noise needs a QPU backend".into()));
            }
        }
        Ok(())
    }
}

/// Summary of the sampled estimators at one iteration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShotStats {
    pub n_shots: usize,
    pub out_of_range: usize,
}

/// One pass through the loop.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord<T> {
    pub iteration: usize,
    pub j_in: XY<T>,
    pub q_bulk: XY<T>,
    /// Mean pair correlator on the central plaquette.
    pub z_bulk: T,
    /// Squared mean plaquette magnetization.
    pub z_bulk_mag: T,
    pub setpoint: Option<QpuSetpoint<T>>,
    pub backend: Backend,
    pub shots: Option<ShotStats>,
    /// 70% band of `z_bulk` over the noise ensemble.
    pub z_band: Option<(T, T)>,
    pub degenerate: bool,
}

/// Trace of a single interaction strength.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointResult<T> {
    pub u: T,
    pub trace: Vec<IterationRecord<T>>,
    /// The loop reached `J = 0`, the insulating fixed point.
    pub trivial_fixed_point: bool,
    pub seed: u64,
}

impl<T: Real> PointResult<T> {
    pub fn converged(&self) -> &IterationRecord<T> {
        self.trace.last().expect("trace is never empty")
    }
}

/// Output of one spin solve.
#[derive(Clone, Debug, PartialEq)]
pub struct SpinSolution<T> {
    pub q_bulk: XY<T>,
    pub z_bulk: T,
    pub z_bulk_mag: T,
    pub shots: Option<ShotStats>,
    pub z_band: Option<(T, T)>,
    pub degenerate: bool,
}

fn measure<T: Real>(
    state: &SpinState<T>,
    lattice: &LatticeSpec<T>,
    hoppings: XY<T>,
    shots: Option<&ShotConfig<T>>,
    seed: u64,
) -> Result<(XY<T>, T, T, Option<ShotStats>)> {
    let bulk = lattice.bulk_region();
    match shots {
        None => {
            let o = observables(state, lattice, &bulk, hoppings);
            Ok((o.q_bulk, o.z_bulk_pair.unwrap_or(o.z_bulk), o.z_bulk, None))
        }
        Some(cfg) => {
            let mut set = sample(state, cfg.n_shots, derive_seed(seed, "shots", 0))?;
            let correction = if cfg.spam.is_zero() {
                None
            } else {
                set = set.apply_spam(&cfg.spam, derive_seed(seed, "spam", 0))?;
                Some((&cfg.spam, cfg.readout))
            };
            let o = shot_observables(&set, lattice, &bulk, hoppings, correction)?;
            let stats = ShotStats { n_shots: cfg.n_shots, out_of_range: o.out_of_range };
            Ok((o.q_bulk, o.z_bulk_pair.unwrap_or(o.z_bulk), o.z_bulk, Some(stats)))
        }
    }
}

/// Solves the spin problem for couplings `j` at interaction `params.u` and
/// returns the setpoint it was realized with (when one exists).
pub fn solve_spin<T: Real>(
    lattice: &LatticeSpec<T>,
    params: &HubbardParams<T>,
    j: XY<T>,
    backend: Backend,
    cfg: &LoopConfig<T>,
    seed: u64,
) -> Result<(Option<QpuSetpoint<T>>, SpinSolution<T>)> {
    let hoppings = params.hoppings();
    let n = lattice.n_sites();
    let eig = EigenOptions::default();
    if !backend.is_qpu() {
        let op = SpinOperator::new(&build_ideal(lattice, j, params.u), cfg.site_cap)?;
        let e = eigenstate(&op, Extremal::Ground, &eig)?;
        let (q, z, zm, shots) = measure(&e.state, lattice, hoppings, cfg.shots.as_ref(), seed)?;
        let setpoint = setpoint_from_meanfields(lattice, j, params.u, &cfg.qpu).ok();
        let sol = SpinSolution { q_bulk: q, z_bulk: z, z_bulk_mag: zm, shots, z_band: None, degenerate: e.degenerate };
        return Ok((setpoint, sol));
    }
    if n > cfg.site_cap {
        return Err(Error::TooManySites { sites: n, cap: cfg.site_cap });
    }
    let sp = setpoint_from_meanfields(lattice, j, params.u, &cfg.qpu)?;
    let layout = lattice.with_spacings(sp.r_x, sp.r_y)?;
    let half = T::lit(0.5);
    let simulate = |inst: &NoisyInstance<T>| -> Result<(Vec<T>, bool, Option<ShotStats>)> {
        let positions = match &inst.positions {
            Some(p) => p.clone(),
            None => layout.positions()?,
        };
        let realized = QpuSetpoint { omega: sp.omega * inst.rabi_factor, ..sp };
        let h = build_qpu(&positions, &realized, cfg.qpu.detuning)?;
        let op = SpinOperator::new(&h, cfg.site_cap)?;
        let (state, degenerate) = match backend {
            Backend::AnnealHqpu => {
                let schedule = AnnealSchedule::new(sp.t_max, cfg.anneal_steps)?;
                let zoff = |t: T| -inst.detuning_error(t) * half;
                let noisy = !inst.detuning_offset.is_zero() || !inst.lpn.amplitudes().is_empty();
                let z: Option<&(dyn Fn(T) -> T + Sync)> = if noisy { Some(&zoff) } else { None };
                let s = anneal(&op, &schedule, &SpinState::all_ground(n), z, &EvolveOptions::default())?;
                (s, false)
            }
            _ => {
                let op = if inst.detuning_offset.is_zero() {
                    op
                } else {
                    let shift = -inst.detuning_offset * half;
                    let b: Vec<T> = h.longitudinal().iter().map(|&b| b + shift).collect();
                    let shifted = SpinHamiltonian::new(
                        n,
                        h.zz_terms().iter().map(|t| (t.i, t.j, t.w)),
                        h.transverse().to_vec(),
                        b,
                    )?;
                    SpinOperator::new(&shifted, cfg.site_cap)?
                };
                let e = eigenstate(&op, Extremal::Top, &eig)?;
                (e.state, e.degenerate)
            }
        };
        let (q, z, zm, shots) =
            measure(&state, lattice, hoppings, cfg.shots.as_ref(), derive_seed(seed, "instance", inst.index as u64))?;
        Ok((vec![q.x, q.y, z, zm], degenerate, shots))
    };
    match cfg.noise.as_ref().filter(|n| !n.is_off()) {
        None => {
            let (v, degenerate, shots) = simulate(&NoisyInstance::ideal(None))?;
            let sol = SpinSolution {
                q_bulk: XY::new(v[0], v[1]),
                z_bulk: v[2],
                z_bulk_mag: v[3],
                shots,
                z_band: None,
                degenerate,
            };
            Ok((Some(sp), sol))
        }
        Some(noise) => {
            let band = run_ensemble(noise, Some(&layout), derive_seed(seed, "noise", 0), |inst| simulate(inst).map(|r| r.0))?;
            let shots = cfg.shots.map(|s| ShotStats { n_shots: s.n_shots, out_of_range: 0 });
            let sol = SpinSolution {
                q_bulk: XY::new(band.mean[0], band.mean[1]),
                z_bulk: band.mean[2],
                z_bulk_mag: band.mean[3],
                shots,
                z_band: Some((band.lo[2], band.hi[2])),
                degenerate: false,
            };
            Ok((Some(sp), sol))
        }
    }
}

/// Seed of the point at interaction `u`; independent of the grid it sits in.
pub fn point_seed<T: Real>(master: u64, u: T) -> u64 {
    derive_seed(master, "point", u.to_f64_lossy().to_bits())
}

/// Rejects an update that flips the sign of a coupling relative to the
/// metallic start.
pub fn check_sign<T: Real>(j0: XY<T>, j: XY<T>, iteration: usize) -> Result<()> {
    let flipped = |a: T, b: T| (a > T::zero() && b < T::zero()) || (a < T::zero() && b > T::zero());
    if flipped(j0.x, j.x) || flipped(j0.y, j.y) {
        return Err(Error::CouplingSignFlip { iteration, jx: j.x.to_f64_lossy(), jy: j.y.to_f64_lossy() });
    }
    Ok(())
}

fn is_trivial<T: Real>(j: XY<T>, params: &HubbardParams<T>) -> bool {
    let tiny = T::lit(1e-12) * params.t_x.abs().max(params.t_y.abs()).max(T::min_positive_value());
    j.x.abs() <= tiny && j.y.abs() <= tiny
}

/// Runs `cfg.n_iter` passes of the loop at interaction `u`, starting from
/// the metallic couplings.
pub fn run_point<T: Real>(u: T, base: &HubbardParams<T>, lattice: &LatticeSpec<T>, cfg: &LoopConfig<T>) -> Result<PointResult<T>> {
    cfg.validate()?;
    let params = base.with_u(u);
    params.validate()?;
    let seed = point_seed(cfg.seed, u);
    let j0 = metallic_couplings(&params, cfg.k_grid)?;
    let mut j = j0;
    let mut trace = Vec::with_capacity(cfg.n_iter);
    let mut trivial = false;
    for it in 0..cfg.n_iter {
        let backend = if is_trivial(j, &params) {
            trivial = true;
            Backend::ExactHs
        } else {
            cfg.backend
        };
        let (setpoint, sol) = solve_spin(lattice, &params, j, backend, cfg, derive_seed(seed, "iteration", it as u64))?;
        trace.push(IterationRecord {
            iteration: it,
            j_in: j,
            q_bulk: sol.q_bulk,
            z_bulk: sol.z_bulk,
            z_bulk_mag: sol.z_bulk_mag,
            setpoint,
            backend: cfg.backend,
            shots: sol.shots,
            z_band: sol.z_band,
            degenerate: sol.degenerate,
        });
        let j_new = spin_couplings(sol.q_bulk, &params, cfg.k_grid)?;
        if let Err(e) = check_sign(j0, j_new, it) {
            log::error!("loop aborted at U = {}: {:?}", u, trace);
            return Err(e);
        }
        j = XY::new(
            j_new.x * (T::one() - cfg.damping) + j.x * cfg.damping,
            j_new.y * (T::one() - cfg.damping) + j.y * cfg.damping,
        );
    }
    trivial |= is_trivial(j, &params);
    Ok(PointResult { u, trace, trivial_fixed_point: trivial, seed })
}

/// Converged and full traces, one per requested `U`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult<T> {
    pub points: Vec<PointResult<T>>,
    pub t_x: T,
    pub backend: Backend,
    pub seed: u64,
}

/// Independent loops over `u_grid`, evaluated in parallel.
pub fn run_sweep<T: Real>(u_grid: &[T], base: &HubbardParams<T>, lattice: &LatticeSpec<T>, cfg: &LoopConfig<T>) -> Result<SweepResult<T>> {
    if u_grid.is_empty() {
        return Err(Error::InvalidParameter("U grid is empty".into()));
    }
    let points = u_grid
        .par_iter()
        .map(|&u| run_point(u, base, lattice, cfg).map_err(|e| Error::AtInteraction { u: (u / base.t_x).to_f64_lossy(), source: Box::new(e) }))
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult { points, t_x: base.t_x, backend: cfg.backend, seed: cfg.seed })
}

pub const SWEEP_CSV_HEADER: &str = "U_over_tx,iter,J_x,J_y,Q_x_bulk,Q_y_bulk,Z_bulk,R_y,Omega,delta,backend,seed";

impl<T: Real> SweepResult<T> {
    /// One row per iteration of every point.
    pub fn to_csv(&self) -> String {
        self.csv_rows(false)
    }

    /// The final iteration of every point.
    pub fn to_converged_csv(&self) -> String {
        self.csv_rows(true)
    }

    fn csv_rows(&self, converged_only: bool) -> String {
        let mut out = String::from(SWEEP_CSV_HEADER);
        out.push('\n');
        for p in &self.points {
            let skip = if converged_only { p.trace.len() - 1 } else { 0 };
            for r in p.trace.iter().skip(skip) {
                let (ry, om, de) = match &r.setpoint {
                    Some(s) => (s.r_y.to_string(), s.omega.to_string(), s.delta.to_string()),
                    None => (String::new(), String::new(), String::new()),
                };
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{},{},{},{}",
                    p.u / self.t_x,
                    r.iteration,
                    r.j_in.x,
                    r.j_in.y,
                    r.q_bulk.x,
                    r.q_bulk.y,
                    r.z_bulk,
                    ry,
                    om,
                    de,
                    r.backend.tag(),
                    self.seed
                );
            }
        }
        out
    }

    pub fn converged_z(&self) -> Vec<(T, T)> {
        self.points.iter().map(|p| (p.u / self.t_x, p.converged().z_bulk)).collect()
    }
}

/// Largest change between consecutive iterations.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepDelta<T> {
    /// Index of the later iteration.
    pub iteration: usize,
    pub j: T,
    pub q: T,
    pub z: T,
}

pub fn convergence_report<T: Real>(trace: &[IterationRecord<T>]) -> Vec<StepDelta<T>> {
    trace
        .windows(2)
        .map(|w| {
            let d = |a: XY<T>, b: XY<T>| (a.x - b.x).abs().max((a.y - b.y).abs());
            StepDelta {
                iteration: w[1].iteration,
                j: d(w[1].j_in, w[0].j_in),
                q: d(w[1].q_bulk, w[0].q_bulk),
                z: (w[1].z_bulk - w[0].z_bulk).abs(),
            }
        })
        .collect()
}

/// Converged `Z` of the ideal and the Rydberg model at one size and `U`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscrepancyRow<T> {
    pub lx: usize,
    pub ly: usize,
    pub u_over_tx: T,
    pub z_hs: T,
    pub z_hqpu: T,
    pub abs_delta: T,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscrepancyReport<T> {
    pub rows: Vec<DiscrepancyRow<T>>,
    /// `(lx, ly, mean |dZ|)` in the order the sizes were given.
    pub means: Vec<(usize, usize, T)>,
    /// Mean discrepancy does not grow from one size to the next.
    pub shrinks_with_size: bool,
}

/// `exact_Hs` against `exact_HQPU` loops over sizes and `U`.
pub fn discrepancy_report<T: Real>(
    sizes: &[(usize, usize)],
    u_grid: &[T],
    base: &HubbardParams<T>,
    cfg: &LoopConfig<T>,
) -> Result<DiscrepancyReport<T>> {
    if sizes.is_empty() {
        return Err(Error::InvalidParameter("no lattice sizes".into()));
    }
    let mut rows = Vec::new();
    let mut means = Vec::new();
    for &(lx, ly) in sizes {
        let lattice = LatticeSpec::dimensionless(lx, ly)?;
        let hs = run_sweep(u_grid, base, &lattice, &LoopConfig { backend: Backend::ExactHs, shots: None, noise: None, ..cfg.clone() })?;
        let hq = run_sweep(u_grid, base, &lattice, &LoopConfig { backend: Backend::ExactHqpu, shots: None, noise: None, ..cfg.clone() })?;
        let mut acc = T::zero();
        for (a, b) in hs.converged_z().into_iter().zip(hq.converged_z()) {
            let abs_delta = (a.1 - b.1).abs();
            acc = acc + abs_delta;
            rows.push(DiscrepancyRow { lx, ly, u_over_tx: a.0, z_hs: a.1, z_hqpu: b.1, abs_delta });
        }
        means.push((lx, ly, acc / T::from_usize_lossy(u_grid.len())));
    }
    let shrinks_with_size = means.windows(2).all(|w| w[1].2 <= w[0].2);
    if !shrinks_with_size {
        log::warn!("mean |dZ| grows with lattice size: {:?}", means.iter().map(|m| m.2.to_f64_lossy()).collect::<Vec<_>>());
    }
    Ok(DiscrepancyReport { rows, means, shrinks_with_size })
}

pub const DISCREPANCY_CSV_HEADER: &str = "Lx,Ly,U_over_tx,Z_Hs,Z_HQPU,abs_delta";

impl<T: Real> DiscrepancyReport<T> {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(DISCREPANCY_CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{},{},{},{}", r.lx, r.ly, r.u_over_tx, r.z_hs, r.z_hqpu, r.abs_delta);
        }
        out
    }

    pub fn summary(&self) -> String {
        let mut out = String::new();
        for (lx, ly, m) in &self.means {
            let _ = writeln!(out, "{lx}x{ly}: mean |dZ| = {m}");
        }
        let verdict = if self.shrinks_with_size { "ok" } else { "FLAGGED: discrepancy grows with size" };
        let _ = writeln!(out, "trend: {verdict}");
        out
    }
}
