//! Interaction quench from the `U = 0` metal: constant-pulse spin dynamics,
//! `Z_bulk(t)` with shots and noise, and windowed Fourier spectroscopy.

use std::fmt::Write as _;

use num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fermion::{metallic_couplings, HubbardParams, KGrid, XY};
use crate::lattice::{LatticeSpec, DEFAULT_EXACT_SITE_CAP};
use crate::measurement::{sample, shot_observables};
use crate::noise::{run_ensemble, NoiseConfig, NoisyInstance};
use crate::scalar::{compensated_sum, Real};
use crate::scf::ShotConfig;
use crate::seeding::derive_seed;
use crate::spin_model::{build_ideal, build_qpu, setpoint_from_meanfields, QpuConfig, QpuSetpoint};
use crate::spin_solver::{evolve_observe, observables, Drive, EvolveOptions, SpinOperator, SpinState};

/// Hamiltonian the quench is run with.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum QuenchBackend {
    /// Ideal nearest-neighbour model.
    #[default]
    #[serde(rename = "exact_Hs")]
    ExactHs,
    /// Emulated Rydberg register at the matching setpoint.
    #[serde(rename = "exact_HQPU")]
    ExactHqpu,
}

impl QuenchBackend {
    pub fn tag(&self) -> &'static str {
        match self {
            QuenchBackend::ExactHs => "exact_Hs",
            QuenchBackend::ExactHqpu => "exact_HQPU",
        }
    }
}

/// Default grid: 60 points on `[0, 3]` in units of `1/t_x`.
pub fn default_times<T: Real>() -> Vec<T> {
    uniform_times(T::lit(3.0), 60)
}

/// `n` evenly spaced times on `[0, span]`.
pub fn uniform_times<T: Real>(span: T, n: usize) -> Vec<T> {
    if n < 2 {
        return vec![T::zero(); n];
    }
    let dt = span / T::from_usize_lossy(n - 1);
    (0..n).map(|k| dt * T::from_usize_lossy(k)).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuenchPlan<T> {
    pub u_f: T,
    /// Model times (units of `1/t_x`), ascending from `>= 0`.
    pub times: Vec<T>,
    pub backend: QuenchBackend,
    pub shots: Option<ShotConfig<T>>,
    pub noise: Option<NoiseConfig<T>>,
    pub qpu: QpuConfig<T>,
    pub k_grid: KGrid,
    pub site_cap: usize,
    pub seed: u64,
}

impl<T: Real> QuenchPlan<T> {
    pub fn new(u_f: T) -> Self {
        Self {
            u_f,
            times: default_times(),
            backend: QuenchBackend::ExactHs,
            shots: None,
            noise: None,
            qpu: QpuConfig::dimensionless(T::one()),
            k_grid: KGrid::default(),
            site_cap: DEFAULT_EXACT_SITE_CAP,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.u_f >= T::zero()) {
            return Err(Error::InvalidParameter(format!("U_f = {} must be >= 0", self.u_f)));
        }
        if self.times.is_empty() {
            return Err(Error::TimeGrid("no times requested".into()));
        }
        if self.times[0] < T::zero() || self.times.windows(2).any(|w| !(w[1] >= w[0])) {
            return Err(Error::TimeGrid("times must be ascending from t >= 0".into()));
        }
        if let Some(s) = &self.shots {
            if s.n_shots == 0 {
                return Err(Error::InvalidParameter("shots.n_shots must be >= 1".into()));
            }
            s.spam.validate()?;
        }
        if let Some(n) = &self.noise {
            n.validate()?;
            if self.backend == QuenchBackend::ExactHs && !n.is_off() {
                return Err(Error::InvalidParameter("hardware noise needs the exact_HQPU backend".into()));
            }
        }
        self.qpu.validate()
    }
}

/// `Z_bulk(t)` with its ensemble band.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries<T> {
    pub times: Vec<T>,
    pub z_mean: Vec<T>,
    pub ci_lo: Vec<T>,
    pub ci_hi: Vec<T>,
    pub backend: QuenchBackend,
    pub u_f: T,
    pub seed: u64,
    /// Couplings frozen at the `U = 0` solution.
    pub j: XY<T>,
    pub setpoint: Option<QpuSetpoint<T>>,
    /// Number of fermion solves performed; always one.
    pub fermion_solves: usize,
}

pub const QUENCH_CSV_HEADER: &str = "time,Z_bulk_mean,ci_lo,ci_hi,backend,U_f,seed";

impl<T: Real> TimeSeries<T> {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(QUENCH_CSV_HEADER);
        out.push('\n');
        for k in 0..self.times.len() {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                self.times[k],
                self.z_mean[k],
                self.ci_lo[k],
                self.ci_hi[k],
                self.backend.tag(),
                self.u_f,
                self.seed
            );
        }
        out
    }

    /// Reads `(time, Z_bulk_mean)` back from a quench CSV.
    pub fn columns_from_csv(text: &str) -> Result<(Vec<T>, Vec<T>)> {
        let mut lines = text.lines().enumerate();
        let header = lines.next().map(|(_, h)| h.trim()).unwrap_or("");
        let cols: Vec<&str> = header.split(',').collect();
        let find = |name: &str| {
            cols.iter().position(|c| *c == name).ok_or_else(|| Error::Parse { line: 1, msg: format!("missing column {name}") })
        };
        let (ti, zi) = (find("time")?, find("Z_bulk_mean")?);
        let mut t = Vec::new();
        let mut z = Vec::new();
        for (k, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            let num = |i: usize| {
                f.get(i)
                    .and_then(|s| s.trim().parse::<f64>().ok())
                    .map(T::lit)
                    .ok_or_else(|| Error::Parse { line: k + 1, msg: format!("bad field {i}") })
            };
            t.push(num(ti)?);
            z.push(num(zi)?);
        }
        Ok((t, z))
    }
}

fn bulk_z<T: Real>(
    state: &SpinState<T>,
    lattice: &LatticeSpec<T>,
    hoppings: XY<T>,
    shots: Option<&ShotConfig<T>>,
    seed: u64,
) -> Result<T> {
    let bulk = lattice.bulk_region();
    match shots {
        None => Ok(observables(state, lattice, &bulk, hoppings).z_bulk),
        Some(cfg) => {
            let mut set = sample(state, cfg.n_shots, derive_seed(seed, "shots", 0))?;
            let correction = if cfg.spam.is_zero() {
                None
            } else {
                set = set.apply_spam(&cfg.spam, derive_seed(seed, "spam", 0))?;
                Some((&cfg.spam, cfg.readout))
            };
            Ok(shot_observables(&set, lattice, &bulk, hoppings, correction)?.z_bulk)
        }
    }
}

/// Evolves `|0...0>` under the quenched Hamiltonian and records `Z_bulk`
/// (squared mean plaquette magnetization) at every plan time.
pub fn run_quench<T: Real>(lattice: &LatticeSpec<T>, base: &HubbardParams<T>, plan: &QuenchPlan<T>) -> Result<TimeSeries<T>> {
    plan.validate()?;
    let n = lattice.n_sites();
    if n > plan.site_cap {
        return Err(Error::TooManySites { sites: n, cap: plan.site_cap });
    }
    let metal = base.with_u(T::zero());
    metal.validate()?;
    let j = metallic_couplings(&metal, plan.k_grid)?;
    let hoppings = base.hoppings();
    let opts = EvolveOptions::default();
    let initial = SpinState::all_ground(n);
    let shots = plan.shots.as_ref();

    let (z_mean, ci_lo, ci_hi, setpoint) = match plan.backend {
        QuenchBackend::ExactHs => {
            let op = SpinOperator::new(&build_ideal(lattice, j, plan.u_f), plan.site_cap)?;
            let states = evolve_observe(&op, T::one(), &Drive::constant(), &initial, &plan.times, &opts, |_, s| s.clone())?;
            let z = states
                .iter()
                .enumerate()
                .map(|(k, s)| bulk_z(s, lattice, hoppings, shots, derive_seed(plan.seed, "time", k as u64)))
                .collect::<Result<Vec<_>>>()?;
            (z.clone(), z.clone(), z, None)
        }
        QuenchBackend::ExactHqpu => {
            let sp = setpoint_from_meanfields(lattice, j, plan.u_f, &plan.qpu)?;
            let layout = lattice.with_spacings(sp.r_x, sp.r_y)?;
            let qpu_times: Vec<T> = plan.times.iter().map(|&t| t / sp.scale).collect();
            let half = T::lit(0.5);
            let simulate = |inst: &NoisyInstance<T>| -> Result<Vec<T>> {
                let positions = match &inst.positions {
                    Some(p) => p.clone(),
                    None => layout.positions()?,
                };
                let realized = QpuSetpoint { omega: sp.omega * inst.rabi_factor, ..sp };
                let op = SpinOperator::new(&build_qpu(&positions, &realized, plan.qpu.detuning)?, plan.site_cap)?;
                let zoff = |t: T| -inst.detuning_error(t) * half;
                let noisy = !inst.detuning_offset.is_zero() || !inst.lpn.amplitudes().is_empty();
                let drive = if noisy { Drive::constant().with_z_offset(&zoff) } else { Drive::constant() };
                let opts = EvolveOptions { max_segment: Some(qpu_segment(&qpu_times)), ..opts };
                let states = evolve_observe(&op, T::one(), &drive, &initial, &qpu_times, &opts, |_, s| s.clone())?;
                let inst_seed = derive_seed(plan.seed, "instance", inst.index as u64);
                states
                    .iter()
                    .enumerate()
                    .map(|(k, s)| bulk_z(s, lattice, hoppings, shots, derive_seed(inst_seed, "time", k as u64)))
                    .collect()
            };
            match plan.noise.as_ref().filter(|n| !n.is_off()) {
                None => {
                    let z = simulate(&NoisyInstance::ideal(None))?;
                    (z.clone(), z.clone(), z, Some(sp))
                }
                Some(noise) => {
                    let band = run_ensemble(noise, Some(&layout), derive_seed(plan.seed, "noise", 0), simulate)?;
                    (band.mean, band.lo, band.hi, Some(sp))
                }
            }
        }
    };
    Ok(TimeSeries {
        times: plan.times.clone(),
        z_mean,
        ci_lo,
        ci_hi,
        backend: plan.backend,
        u_f: plan.u_f,
        seed: plan.seed,
        j,
        setpoint,
        fermion_solves: 1,
    })
}

/// Frozen-detuning segment for the noise drive: a tenth of the smallest
/// positive gap in the output grid.
fn qpu_segment<T: Real>(times: &[T]) -> T {
    let mut h = times.last().copied().unwrap_or(T::one()).max(T::min_positive_value());
    let mut prev = T::zero();
    for &t in times {
        if t > prev {
            h = h.min(t - prev);
        }
        prev = t;
    }
    h / T::lit(10.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumOptions<T> {
    /// Gaussian window width; one third of the span when `None`.
    pub window_sigma: Option<T>,
    /// Window centre; the first sample when `None`.
    pub window_center: Option<T>,
    /// The FFT length is the next power of two above `pad * n`.
    pub pad: usize,
    /// Linearly interpolate a non-uniform grid onto `n` uniform points.
    pub resample: bool,
}

impl<T: Real> Default for SpectrumOptions<T> {
    fn default() -> Self {
        Self { window_sigma: None, window_center: None, pad: 8, resample: false }
    }
}

/// One-sided amplitude spectrum over angular frequency.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralResult<T> {
    /// Angular frequencies `2 pi j / (N dt)`.
    pub freqs: Vec<T>,
    /// `|X(omega)| dt`.
    pub amplitude: Vec<T>,
    pub window_sigma: T,
    pub peak_freq: T,
    pub peak_amplitude: T,
    /// `sum_k |x_k|^2` of the windowed signal.
    pub signal_energy: T,
    /// The same energy recovered from the spectrum.
    pub spectral_energy: T,
}

pub const SPECTRUM_CSV_HEADER: &str = "freq,amplitude";

impl<T: Real> SpectralResult<T> {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(SPECTRUM_CSV_HEADER);
        out.push('\n');
        for (f, a) in self.freqs.iter().zip(&self.amplitude) {
            let _ = writeln!(out, "{f},{a}");
        }
        out
    }
}

fn resample_uniform<T: Real>(times: &[T], values: &[T]) -> (Vec<T>, Vec<T>) {
    let n = times.len();
    let grid = {
        let t0 = times[0];
        let dt = (times[n - 1] - t0) / T::from_usize_lossy(n - 1);
        (0..n).map(|k| t0 + dt * T::from_usize_lossy(k)).collect::<Vec<_>>()
    };
    let mut seg = 0;
    let vals = grid
        .iter()
        .map(|&t| {
            while seg + 2 < n && times[seg + 1] < t {
                seg += 1;
            }
            let (ta, tb) = (times[seg], times[seg + 1]);
            let w = if tb > ta { ((t - ta) / (tb - ta)).max(T::zero()).min(T::one()) } else { T::zero() };
            values[seg] + (values[seg + 1] - values[seg]) * w
        })
        .collect();
    (grid, vals)
}

/// Gaussian-windowed, mean-subtracted, zero-padded DFT of a uniformly
/// sampled signal.
pub fn spectrum<T: Real>(times: &[T], values: &[T], opts: &SpectrumOptions<T>) -> Result<SpectralResult<T>> {
    let n = times.len();
    if n != values.len() {
        return Err(Error::TimeGrid(format!("{} times for {} values", n, values.len())));
    }
    if n < 16 {
        return Err(Error::TimeGrid(format!("{n} samples; need at least 16")));
    }
    let span = times[n - 1] - times[0];
    if !(span > T::zero()) {
        return Err(Error::TimeGrid("zero time span".into()));
    }
    let dt = span / T::from_usize_lossy(n - 1);
    let uniform = times.windows(2).all(|w| ((w[1] - w[0]) - dt).abs() <= dt * T::lit(1e-6));
    let (times, values) = if uniform {
        (times.to_vec(), values.to_vec())
    } else if opts.resample {
        resample_uniform(times, values)
    } else {
        return Err(Error::TimeGrid("non-uniform grid; enable resampling".into()));
    };
    let sigma = opts.window_sigma.unwrap_or(span / T::lit(3.0));
    if !(sigma > T::zero()) {
        return Err(Error::InvalidParameter("window sigma must be positive".into()));
    }
    let center = opts.window_center.unwrap_or(times[0]);
    let mean = compensated_sum(values.iter().copied()) / T::from_usize_lossy(n);
    let two = T::lit(2.0);
    let x: Vec<T> = times
        .iter()
        .zip(&values)
        .map(|(&t, &v)| (v - mean) * (-(t - center) * (t - center) / (two * sigma * sigma)).exp())
        .collect();
    let len = (opts.pad.max(1) * n).next_power_of_two();
    let mut buf: Vec<Complex<T>> = x.iter().map(|&v| Complex::new(v, T::zero())).collect();
    buf.resize(len, Complex::new(T::zero(), T::zero()));
    FftPlanner::new().plan_fft_forward(len).process(&mut buf);
    let half = len / 2;
    let amplitude: Vec<T> = buf[..=half].iter().map(|z| z.norm() * dt).collect();
    let df = T::TAU() / (T::from_usize_lossy(len) * dt);
    let freqs: Vec<T> = (0..=half).map(|j| df * T::from_usize_lossy(j)).collect();
    let signal_energy = compensated_sum(x.iter().map(|&v| v * v));
    let spectral_energy = compensated_sum(buf.iter().map(|z| z.norm_sqr())) / T::from_usize_lossy(len);
    let mut peak = 1.min(half);
    for j in 1..=half {
        if amplitude[j] > amplitude[peak] {
            peak = j;
        }
    }
    Ok(SpectralResult {
        peak_freq: freqs[peak],
        peak_amplitude: amplitude[peak],
        freqs,
        amplitude,
        window_sigma: sigma,
        signal_energy,
        spectral_energy,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Metallic,
    Crossover,
    Mott,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegimeThresholds<T> {
    pub metallic: T,
    pub mott: T,
}

impl<T: Real> Default for RegimeThresholds<T> {
    fn default() -> Self {
        Self { metallic: T::lit(0.2), mott: T::lit(0.05) }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport<T> {
    pub regime: Regime,
    /// Mean over the last third of the span.
    pub late_mean: T,
    /// Span in units of the `U_f` period `2 pi / U_f`.
    pub periods: T,
}

/// Mean of the samples in the last third of the time span.
pub fn late_window_mean<T: Real>(times: &[T], values: &[T]) -> T {
    let (Some(&t0), Some(&t1)) = (times.first(), times.last()) else {
        return T::zero();
    };
    let cut = t0 + (t1 - t0) * T::lit(2.0) / T::lit(3.0) - (t1 - t0) * T::lit(1e-12);
    let late: Vec<T> = times.iter().zip(values).filter(|(&t, _)| t >= cut).map(|(_, &v)| v).collect();
    compensated_sum(late.iter().copied()) / T::from_usize_lossy(late.len().max(1))
}

/// Labels a trajectory by its late-window mean. Diagnostic only.
pub fn regime_classifier<T: Real>(series: &TimeSeries<T>, thresholds: &RegimeThresholds<T>) -> RegimeReport<T> {
    let late_mean = late_window_mean(&series.times, &series.z_mean);
    let span = match (series.times.first(), series.times.last()) {
        (Some(&a), Some(&b)) => b - a,
        _ => T::zero(),
    };
    let periods = span * series.u_f / T::TAU();
    if series.u_f > T::zero() && periods < T::lit(3.0) {
        log::warn!("series covers {periods} periods of U_f; classification is unreliable");
    }
    let regime = if late_mean >= thresholds.metallic {
        Regime::Metallic
    } else if late_mean < thresholds.mott {
        Regime::Mott
    } else {
        Regime::Crossover
    };
    RegimeReport { regime, late_mean, periods }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn iso() -> HubbardParams<f64> {
        HubbardParams::new(1.0, 1.0, 0.0, 20.0).unwrap()
    }

    #[test]
    fn classical_quench_is_frozen() {
        let lat = LatticeSpec::dimensionless(2, 2).unwrap();
        let s = run_quench(&lat, &iso(), &QuenchPlan::new(0.0)).unwrap();
        assert!(s.z_mean.iter().all(|&z| (z - 1.0).abs() <= 1e-12));
        assert_eq!(s.z_mean[0], 1.0);
        assert_eq!(s.fermion_solves, 1);
        let r = regime_classifier(&s, &RegimeThresholds::default());
        assert_eq!(r.regime, Regime::Metallic);
    }

    #[test]
    fn single_site_rabi() {
        let lat = LatticeSpec::dimensionless(1, 1).unwrap();
        let plan = QuenchPlan { times: uniform_times(2.0, 21), ..QuenchPlan::new(5.0) };
        let s = run_quench(&lat, &iso(), &plan).unwrap();
        assert_eq!(s.z_mean[0], 1.0);
        for (t, z) in s.times.iter().zip(&s.z_mean) {
            assert_abs_diff_eq!(*z, (5.0 * t / 2.0).cos().powi(2), epsilon = 1e-9);
        }
    }

    #[test]
    fn cosine_peak_within_a_bin() {
        let w0: f64 = 7.3;
        let t: Vec<f64> = uniform_times(40.0, 400);
        let v: Vec<f64> = t.iter().map(|&x| (w0 * x).cos() + 0.3).collect();
        let opts = SpectrumOptions { window_center: Some(20.0), ..SpectrumOptions::default() };
        let s = spectrum(&t, &v, &opts).unwrap();
        let bin = s.freqs[1];
        assert!((s.peak_freq - w0).abs() <= bin);
        assert!(s.amplitude.iter().all(|&a| a >= 0.0));
        assert!(((s.signal_energy - s.spectral_energy) / s.signal_energy).abs() <= 1e-8);
    }

    #[test]
    fn constant_signal_has_no_spectrum() {
        let t = uniform_times(3.0, 32);
        let s = spectrum(&t, &vec![0.4; 32], &SpectrumOptions::default()).unwrap();
        assert!(s.amplitude.iter().all(|&a| a <= 1e-15));
    }

    #[test]
    fn grid_checks() {
        let mut t: Vec<f64> = uniform_times(3.0, 32);
        let v: Vec<f64> = t.iter().map(|x| (5.0 * x).sin()).collect();
        assert!(spectrum(&t[..10], &v[..10], &SpectrumOptions::default()).is_err());
        t[5] += 0.01;
        assert!(matches!(spectrum(&t, &v, &SpectrumOptions::default()), Err(Error::TimeGrid(_))));
        let opts = SpectrumOptions { resample: true, ..SpectrumOptions::default() };
        assert!(spectrum(&t, &v, &opts).is_ok());
    }

    #[test]
    fn resampling_is_linear() {
        let t = vec![0.0, 0.5, 2.0, 3.0];
        let v = vec![0.0, 1.0, 4.0, 6.0];
        let (g, r) = resample_uniform(&t, &v);
        assert_eq!(g, vec![0.0, 1.0, 2.0, 3.0]);
        assert_abs_diff_eq!(r[1], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r[3], 6.0, epsilon = 1e-12);
    }

    #[test]
    fn qpu_form_tracks_ideal_within_error_bound() {
        use crate::spin_model::{error_hamiltonian, SpinHamiltonian};
        let lat = LatticeSpec::dimensionless(2, 2).unwrap();
        let times = uniform_times(1.0, 11);
        let ideal = run_quench(&lat, &iso(), &QuenchPlan { times: times.clone(), ..QuenchPlan::new(6.0) }).unwrap();
        let plan = QuenchPlan { times: times.clone(), backend: QuenchBackend::ExactHqpu, ..QuenchPlan::new(6.0) };
        let qpu = run_quench(&lat, &iso(), &plan).unwrap();
        let sp = qpu.setpoint.unwrap();
        let target: SpinHamiltonian<f64> = build_ideal(&lat, ideal.j, 6.0).qpu_form(sp.scale);
        let h = build_qpu(&lat.with_spacings(sp.r_x, sp.r_y).unwrap().positions().unwrap(), &sp, plan.qpu.detuning).unwrap();
        let err = error_hamiltonian(&h, &target).unwrap().norm_bound() / sp.scale;
        assert!(err > 0.0);
        for k in 0..times.len() {
            let dev = (ideal.z_mean[k] - qpu.z_mean[k]).abs();
            assert!(dev <= 4.0 * times[k] * err + 1e-9, "t = {}: {dev} > {}", times[k], 4.0 * times[k] * err);
        }
    }

    #[test]
    fn noisy_quench_is_reproducible() {
        let lat = LatticeSpec::new(2, 2, Some(8.0), Some(8.0)).unwrap();
        let plan = QuenchPlan {
            times: uniform_times(0.5, 6),
            backend: QuenchBackend::ExactHqpu,
            qpu: QpuConfig::physical(5420.0, 8.0),
            noise: Some(NoiseConfig { n_instances: 6, ..NoiseConfig::default() }),
            shots: Some(ShotConfig { n_shots: 100, ..ShotConfig::default() }),
            seed: 9,
            ..QuenchPlan::new(6.0)
        };
        let a = run_quench(&lat, &iso(), &plan).unwrap();
        let b = run_quench(&lat, &iso(), &plan).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
        assert!(a.ci_lo.iter().zip(&a.ci_hi).all(|(l, h)| l <= h));
        assert_eq!(a.z_mean[0], 1.0);
    }

    #[test]
    fn csv_round_trip() {
        let lat = LatticeSpec::dimensionless(2, 1).unwrap();
        let s = run_quench(&lat, &iso(), &QuenchPlan::new(4.0)).unwrap();
        let csv = s.to_csv();
        assert!(csv.starts_with(QUENCH_CSV_HEADER));
        let (t, z) = TimeSeries::<f64>::columns_from_csv(&csv).unwrap();
        assert_eq!(t, s.times);
        assert_eq!(z, s.z_mean);
    }

    #[test]
    fn late_window() {
        let t = uniform_times(3.0, 7);
        let v = vec![9.0, 9.0, 9.0, 9.0, 1.0, 2.0, 3.0];
        assert_eq!(late_window_mean(&t, &v), 2.0);
    }
}
