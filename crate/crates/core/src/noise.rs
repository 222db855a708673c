//! Hardware noise: static position jitter, laser phase noise as a
//! time-dependent detuning, systematic Rabi/detuning offsets, and the
//! Monte Carlo ensemble that turns them into mean trajectories with 70%
//! bands.
//!
//! Units: positions in um, times in us, frequencies in MHz (cycles per us),
//! detunings in rad/us and the phase-noise PSD in (rad/us)^2/MHz. Tables
//! read from disk are in Hz and (rad/s)^2/Hz and are converted on load.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::LatticeSpec;
use crate::scalar::{compensated_sum, Real};
use crate::seeding::stream_rng;

/// Atoms closer than this after jitter trigger a resample (um).
pub const MIN_SEPARATION: f64 = 0.5;
const MAX_RESAMPLES: usize = 10_000;

/// Tabulated one-sided phase-noise PSD.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsdTable<T> {
    freqs: Vec<T>,
    values: Vec<T>,
}

impl<T: Real> PsdTable<T> {
    pub fn new(freqs: Vec<T>, values: Vec<T>) -> Result<Self> {
        if freqs.is_empty() || freqs.len() != values.len() {
            return Err(Error::InvalidParameter("PSD table needs matching, nonempty columns".into()));
        }
        if freqs.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter("PSD frequencies must be strictly increasing".into()));
        }
        if values.iter().any(|s| !(*s >= T::zero())) {
            return Err(Error::InvalidParameter("PSD values must be >= 0".into()));
        }
        Ok(Self { freqs, values })
    }

    /// Flat density `s0` on `points` evenly spaced frequencies in `[f_lo, f_hi]`.
    pub fn flat(s0: T, f_lo: T, f_hi: T, points: usize) -> Result<Self> {
        if points < 2 || !(f_hi > f_lo) {
            return Err(Error::InvalidParameter("flat PSD needs f_hi > f_lo and >= 2 points".into()));
        }
        let df = (f_hi - f_lo) / T::from_usize_lossy(points - 1);
        let freqs = (0..points).map(|i| f_lo + df * T::from_usize_lossy(i)).collect();
        Self::new(freqs, vec![s0; points])
    }

    /// One spectral line of density `s1` at `f1`, bin width `df`.
    pub fn single_line(f1: T, s1: T, df: T) -> Result<Self> {
        Self::new(vec![f1, f1 + df], vec![s1, T::zero()])
    }

    /// Two-column text table, frequency in Hz and density in (rad/s)^2/Hz;
    /// `#` starts a comment.
    pub fn from_text(text: &str) -> Result<Self> {
        let hz = T::lit(1e-6);
        let mut f = Vec::new();
        let mut s = Vec::new();
        for (k, raw) in text.lines().enumerate() {
            let row = raw.split('#').next().unwrap_or("").trim();
            if row.is_empty() {
                continue;
            }
            let cols: Vec<&str> = row.split(|c: char| c.is_whitespace() || c == ',').filter(|c| !c.is_empty()).collect();
            if cols.len() != 2 {
                return Err(Error::Parse { line: k + 1, msg: "expected two columns".into() });
            }
            let num = |x: &str| x.parse::<f64>().map_err(|_| Error::Parse { line: k + 1, msg: format!("bad number {x:?}") });
            f.push(T::lit(num(cols[0])?) * hz);
            s.push(T::lit(num(cols[1])?) * hz);
        }
        Self::new(f, s)
    }

    pub fn freqs(&self) -> &[T] {
        &self.freqs
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// `sum_i (f_{i+1} - f_i) S(f_i)`, the variance of the synthesized noise.
    pub fn variance(&self) -> T {
        compensated_sum(self.freqs.windows(2).zip(&self.values).map(|(w, &s)| (w[1] - w[0]) * s))
    }
}

/// Source of the phase-noise spectrum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Real + Deserialize<'de>"))]
pub enum PsdSpec<T> {
    Off,
    /// Synthetic flat spectrum (the default: `s0 = 0.01` (rad/us)^2/MHz
    /// over 10 kHz to 1 MHz on 100 points).
    Flat { s0: T, f_lo: T, f_hi: T, points: usize },
    /// Explicit table in internal units.
    Table { freqs: Vec<T>, values: Vec<T> },
}

impl<T: Real> Default for PsdSpec<T> {
    fn default() -> Self {
        PsdSpec::Flat { s0: T::lit(0.01), f_lo: T::lit(0.01), f_hi: T::one(), points: 100 }
    }
}

impl<T: Real> PsdSpec<T> {
    pub fn table(&self) -> Result<Option<PsdTable<T>>> {
        match self {
            PsdSpec::Off => Ok(None),
            PsdSpec::Flat { s0, f_lo, f_hi, points } => PsdTable::flat(*s0, *f_lo, *f_hi, *points).map(Some),
            PsdSpec::Table { freqs, values } => PsdTable::new(freqs.clone(), values.clone()).map(Some),
        }
    }
}

/// One realization of the random-phase cosine sum
/// `sqrt(2) sum_i sqrt((f_{i+1} - f_i) S(f_i)) cos(2 pi (f_i t + phi_i))`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LpnTrace<T> {
    freqs: Vec<T>,
    amps: Vec<T>,
    phases: Vec<T>,
}

impl<T: Real> LpnTrace<T> {
    pub fn sample<R: Rng>(psd: &PsdTable<T>, rng: &mut R) -> Self {
        let two = T::lit(2.0);
        let mut freqs = Vec::new();
        let mut amps = Vec::new();
        let mut phases = Vec::new();
        for (w, &s) in psd.freqs.windows(2).zip(&psd.values) {
            freqs.push(w[0]);
            amps.push((two * (w[1] - w[0]) * s).sqrt());
            phases.push(T::lit(rng.random::<f64>() * std::f64::consts::TAU));
        }
        Self { freqs, amps, phases }
    }

    pub fn zero() -> Self {
        Self { freqs: Vec::new(), amps: Vec::new(), phases: Vec::new() }
    }

    pub fn amplitudes(&self) -> &[T] {
        &self.amps
    }

    pub fn phases(&self) -> &[T] {
        &self.phases
    }

    pub fn eval(&self, t: T) -> T {
        let tau = T::TAU();
        self.freqs
            .iter()
            .zip(&self.amps)
            .zip(&self.phases)
            .map(|((&f, &a), &p)| a * (tau * (f * t + p)).cos())
            .sum()
    }
}

/// Detuning noise sampled on `times` for one seeded instance.
pub fn sample_lpn<T: Real>(psd: &PsdTable<T>, times: &[T], master_seed: u64, instance: u64) -> Vec<T> {
    let trace = LpnTrace::sample(psd, &mut stream_rng(master_seed, "lpn", instance));
    times.iter().map(|&t| trace.eval(t)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Real + Deserialize<'de>"))]
pub struct NoiseConfig<T> {
    /// In-plane position standard deviation (um).
    #[serde(default = "default_sigma_xy")]
    pub sigma_xy: T,
    /// Off-plane position standard deviation (um).
    #[serde(default = "default_sigma_z")]
    pub sigma_z: T,
    #[serde(default)]
    pub psd: PsdSpec<T>,
    #[serde(default = "default_instances")]
    pub n_instances: usize,
    /// Relative Rabi error, `Omega -> Omega (1 + rabi_offset_frac)`.
    #[serde(default)]
    pub rabi_offset_frac: T,
    /// Systematic detuning error added to the programmed detuning (rad/us).
    #[serde(default)]
    pub detuning_offset: T,
}

fn default_sigma_xy<T: Real>() -> T {
    T::lit(0.2)
}

fn default_sigma_z<T: Real>() -> T {
    T::lit(0.8)
}

fn default_instances() -> usize {
    50
}

impl<T: Real> Default for NoiseConfig<T> {
    fn default() -> Self {
        Self {
            sigma_xy: default_sigma_xy(),
            sigma_z: default_sigma_z(),
            psd: PsdSpec::default(),
            n_instances: default_instances(),
            rabi_offset_frac: T::zero(),
            detuning_offset: T::zero(),
        }
    }
}

impl<T: Real> NoiseConfig<T> {
    /// Every channel disabled.
    pub fn off() -> Self {
        Self {
            sigma_xy: T::zero(),
            sigma_z: T::zero(),
            psd: PsdSpec::Off,
            n_instances: 1,
            rabi_offset_frac: T::zero(),
            detuning_offset: T::zero(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_xy >= T::zero()) || !(self.sigma_z >= T::zero()) {
            return Err(Error::InvalidParameter("noise.sigma_xy and noise.sigma_z must be >= 0".into()));
        }
        if self.n_instances == 0 {
            return Err(Error::InvalidParameter("noise.n_instances must be >= 1".into()));
        }
        if !(self.rabi_offset_frac > -T::one()) {
            return Err(Error::InvalidParameter("noise.rabi_offset_frac must exceed -1".into()));
        }
        self.psd.table()?;
        Ok(())
    }

    pub fn has_stochastic(&self) -> bool {
        !self.sigma_xy.is_zero() || !self.sigma_z.is_zero() || self.psd.table().ok().flatten().is_some_and(|p| p.variance() > T::zero())
    }

    pub fn is_off(&self) -> bool {
        !self.has_stochastic() && self.rabi_offset_frac.is_zero() && self.detuning_offset.is_zero()
    }
}

/// Jittered positions for one instance; returns the positions and the
/// number of rejected draws.
pub fn sample_positions<T: Real>(
    lattice: &LatticeSpec<T>,
    cfg: &NoiseConfig<T>,
    master_seed: u64,
    instance: u64,
) -> Result<(Vec<[T; 3]>, usize)> {
    let ideal = lattice.positions()?;
    if cfg.sigma_xy.is_zero() && cfg.sigma_z.is_zero() {
        return Ok((ideal, 0));
    }
    let nxy = Normal::new(0.0, cfg.sigma_xy.to_f64_lossy()).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let nz = Normal::new(0.0, cfg.sigma_z.to_f64_lossy()).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let mut rng = stream_rng(master_seed, "positions", instance);
    let min2 = T::lit(MIN_SEPARATION * MIN_SEPARATION);
    for attempt in 0..MAX_RESAMPLES {
        let pos: Vec<[T; 3]> = ideal
            .iter()
            .map(|p| {
                let dx = T::lit(nxy.sample(&mut rng));
                let dy = T::lit(nxy.sample(&mut rng));
                let dz = T::lit(nz.sample(&mut rng));
                [p[0] + dx, p[1] + dy, p[2] + dz]
            })
            .collect();
        let too_close = (0..pos.len()).any(|i| {
            (i + 1..pos.len()).any(|j| (0..3).map(|k| (pos[i][k] - pos[j][k]) * (pos[i][k] - pos[j][k])).sum::<T>() < min2)
        });
        if !too_close {
            return Ok((pos, attempt));
        }
    }
    Err(Error::InvalidParameter(format!("no admissible jittered register after {MAX_RESAMPLES} draws")))
}

/// Everything random about one noisy run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoisyInstance<T> {
    pub index: usize,
    pub positions: Option<Vec<[T; 3]>>,
    pub lpn: LpnTrace<T>,
    pub rabi_factor: T,
    pub detuning_offset: T,
    pub position_resamples: usize,
}

impl<T: Real> NoisyInstance<T> {
    /// The noiseless instance: ideal positions, no offsets.
    pub fn ideal(positions: Option<Vec<[T; 3]>>) -> Self {
        Self {
            index: 0,
            positions,
            lpn: LpnTrace::zero(),
            rabi_factor: T::one(),
            detuning_offset: T::zero(),
            position_resamples: 0,
        }
    }

    /// Reproducible from `(cfg, master_seed, index)`.
    pub fn draw(cfg: &NoiseConfig<T>, lattice: Option<&LatticeSpec<T>>, master_seed: u64, index: usize) -> Result<Self> {
        let (positions, position_resamples) = match lattice {
            Some(l) if l.spacings().is_some() => {
                let (p, r) = sample_positions(l, cfg, master_seed, index as u64)?;
                (Some(p), r)
            }
            _ => (None, 0),
        };
        let lpn = match cfg.psd.table()? {
            Some(t) => LpnTrace::sample(&t, &mut stream_rng(master_seed, "lpn", index as u64)),
            None => LpnTrace::zero(),
        };
        Ok(Self {
            index,
            positions,
            lpn,
            rabi_factor: T::one() + cfg.rabi_offset_frac,
            detuning_offset: cfg.detuning_offset,
            position_resamples,
        })
    }

    /// Total detuning error at time `t` (static offset plus phase noise).
    pub fn detuning_error(&self, t: T) -> T {
        self.detuning_offset + self.lpn.eval(t)
    }
}

/// Per-time ensemble statistics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleBand<T> {
    pub mean: Vec<T>,
    pub lo: Vec<T>,
    pub hi: Vec<T>,
    pub n_instances: usize,
    pub position_resamples: usize,
}

/// Linear-interpolated empirical quantile of sorted data.
pub fn quantile_sorted<T: Real>(sorted: &[T], q: T) -> T {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q * T::from_usize_lossy(n - 1);
    let k = pos.floor().to_usize().unwrap_or(0).min(n - 2);
    let frac = pos - T::from_usize_lossy(k);
    sorted[k] + (sorted[k + 1] - sorted[k]) * frac
}

/// Central 70% interval (15th to 85th percentile).
pub fn ci70<T: Real>(values: &[T]) -> (T, T) {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite observable"));
    (quantile_sorted(&v, T::lit(0.15)), quantile_sorted(&v, T::lit(0.85)))
}

/// Runs `simulate` on every instance and aggregates per time. Instances run
/// in parallel; aggregation follows instance order, so the output does not
/// depend on the worker count. With every channel off the base simulation
/// runs once on the ideal instance and the band collapses onto it.
pub fn run_ensemble<T, F>(
    cfg: &NoiseConfig<T>,
    lattice: Option<&LatticeSpec<T>>,
    master_seed: u64,
    simulate: F,
) -> Result<EnsembleBand<T>>
where
    T: Real,
    F: Fn(&NoisyInstance<T>) -> Result<Vec<T>> + Sync,
{
    cfg.validate()?;
    if cfg.is_off() {
        let ideal = NoisyInstance::ideal(lattice.and_then(|l| l.positions().ok()));
        let v = simulate(&ideal).map_err(|e| Error::Instance { index: 0, source: Box::new(e) })?;
        return Ok(EnsembleBand { lo: v.clone(), hi: v.clone(), mean: v, n_instances: 1, position_resamples: 0 });
    }
    let runs: Vec<Result<(Vec<T>, usize)>> = (0..cfg.n_instances)
        .into_par_iter()
        .map(|i| {
            let wrap = |e: Error| Error::Instance { index: i, source: Box::new(e) };
            let inst = NoisyInstance::draw(cfg, lattice, master_seed, i).map_err(wrap)?;
            let v = simulate(&inst).map_err(wrap)?;
            Ok((v, inst.position_resamples))
        })
        .collect();
    let mut series = Vec::with_capacity(runs.len());
    let mut resamples = 0;
    for r in runs {
        let (v, k) = r?;
        resamples += k;
        series.push(v);
    }
    aggregate(&series).map(|(mean, lo, hi)| EnsembleBand { mean, lo, hi, n_instances: series.len(), position_resamples: resamples })
}

/// Per-time mean and 70% interval over equally long series.
pub fn aggregate<T: Real>(series: &[Vec<T>]) -> Result<(Vec<T>, Vec<T>, Vec<T>)> {
    let len = series.first().map(|s| s.len()).unwrap_or(0);
    if series.iter().any(|s| s.len() != len) {
        return Err(Error::InvalidParameter("instances returned series of different length".into()));
    }
    let n = T::from_usize_lossy(series.len().max(1));
    let mut mean = Vec::with_capacity(len);
    let mut lo = Vec::with_capacity(len);
    let mut hi = Vec::with_capacity(len);
    for k in 0..len {
        let col: Vec<T> = series.iter().map(|s| s[k]).collect();
        mean.push(compensated_sum(col.iter().copied()) / n);
        let (a, b) = ci70(&col);
        lo.push(a);
        hi.push(b);
    }
    Ok((mean, lo, hi))
}
