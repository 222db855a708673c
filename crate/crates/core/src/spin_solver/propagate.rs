//! Krylov propagation `exp(-i H t)` and piecewise-constant driven evolution.

use num_complex::Complex;
use num_traits::Zero;

use super::operator::SpinOperator;
use super::tridiag::tridiag_eigen;
use super::SpinState;
use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug)]
pub struct EvolveOptions<T> {
    /// Largest Krylov dimension per substep.
    pub krylov_dim: usize,
    /// A posteriori error bound accepted per substep.
    pub step_tol: T,
    /// Norm loss tolerated before aborting.
    pub norm_tol: T,
    /// Longest piecewise-constant segment of a time-dependent drive.
    pub max_segment: Option<T>,
}

impl<T: Real> Default for EvolveOptions<T> {
    fn default() -> Self {
        Self {
            krylov_dim: 30,
            step_tol: T::lit(1e-10).max(T::epsilon() * T::lit(10.0)),
            norm_tol: T::lit(1e-6),
            max_segment: None,
        }
    }
}

/// Time-dependence of `H(t) = D + z(t) M + r(t) X`.
///
/// `r(t)` scales every transverse field, `z(t)` is added to every `sz`
/// coefficient (the detuning noise channel).
#[derive(Clone, Copy)]
pub struct Drive<'a, T> {
    pub ramp_t_max: Option<T>,
    pub z_offset: Option<&'a (dyn Fn(T) -> T + Sync)>,
}

impl<T: Real> Default for Drive<'_, T> {
    fn default() -> Self {
        Self::constant()
    }
}

impl<'a, T: Real> Drive<'a, T> {
    pub fn constant() -> Self {
        Self { ramp_t_max: None, z_offset: None }
    }

    /// Linear ramp `r(t) = t / t_max`.
    pub fn ramp(t_max: T) -> Self {
        Self { ramp_t_max: Some(t_max), z_offset: None }
    }

    pub fn with_z_offset(mut self, f: &'a (dyn Fn(T) -> T + Sync)) -> Self {
        self.z_offset = Some(f);
        self
    }

    pub fn is_constant(&self) -> bool {
        self.ramp_t_max.is_none() && self.z_offset.is_none()
    }

    pub fn transverse_scale(&self, t: T) -> T {
        match self.ramp_t_max {
            Some(tm) => (t / tm).min(T::one()),
            None => T::one(),
        }
    }

    pub fn z_offset(&self, t: T) -> T {
        self.z_offset.map(|f| f(t)).unwrap_or(T::zero())
    }
}

fn cdot<T: Real>(a: &[Complex<T>], b: &[Complex<T>]) -> Complex<T> {
    a.iter().zip(b).fold(Complex::zero(), |acc, (x, y)| acc + x.conj() * y)
}

fn cnorm<T: Real>(a: &[Complex<T>]) -> T {
    a.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt()
}

/// Propagates `psi` by `duration` under the frozen Hamiltonian
/// `sign * H(z_offset, transverse_scale)` with adaptive Krylov substeps.
/// `dt_hint` carries the last accepted substep between calls. The Krylov
/// basis uses the three-term recurrence without global reorthogonalization.
#[allow(clippy::too_many_arguments)]
pub(crate) fn propagate_constant<T: Real>(
    op: &SpinOperator<T>,
    sign: T,
    z_offset: T,
    transverse_scale: T,
    psi: &mut [Complex<T>],
    duration: T,
    dt_hint: &mut T,
    opts: &EvolveOptions<T>,
) -> Result<()> {
    let dim = psi.len();
    let scale = op.norm_bound() + z_offset.abs() * T::from_usize_lossy(op.n_sites());
    let breakdown = T::epsilon() * scale.max(T::one()) * T::lit(10.0);
    let m_max = opts.krylov_dim.max(2).min(dim);
    let mut remaining = duration;
    let mut w = vec![Complex::<T>::zero(); dim];
    while remaining > T::zero() {
        let nrm = cnorm(psi);
        let mut basis: Vec<Vec<Complex<T>>> = vec![psi.iter().map(|z| z / nrm).collect()];
        let mut alpha = Vec::with_capacity(m_max);
        let mut beta = Vec::with_capacity(m_max);
        let mut tail = T::zero();
        loop {
            let j = basis.len() - 1;
            op.apply(&basis[j], &mut w, sign, z_offset, transverse_scale);
            alpha.push(cdot(&basis[j], &w).re);
            for v in basis.iter().skip(j.saturating_sub(1)) {
                let c = cdot(v, &w);
                w.iter_mut().zip(v).for_each(|(wi, vi)| *wi = *wi - vi * c);
            }
            let b = cnorm(&w);
            if b <= breakdown {
                break;
            }
            if basis.len() == m_max {
                tail = b;
                break;
            }
            beta.push(b);
            basis.push(w.iter().map(|z| z / b).collect());
        }
        let k = alpha.len();
        let (vals, vecs) = tridiag_eigen(&alpha, &beta)?;
        let coeffs = |tau: T| -> Vec<Complex<T>> {
            (0..k)
                .map(|row| {
                    (0..k).fold(Complex::zero(), |acc, col| {
                        let ph = Complex::new(T::zero(), -vals[col] * tau).exp();
                        acc + ph * (vecs[row * k + col] * vecs[col])
                    })
                })
                .collect()
        };
        let mut tau = if dt_hint.is_zero() { remaining } else { dt_hint.min(remaining) };
        let mut halvings = 0;
        let (tau, u) = loop {
            let u = coeffs(tau);
            let err = tail * u[k - 1].norm();
            if err <= opts.step_tol {
                break (tau, u);
            }
            tau = tau * T::lit(0.5);
            halvings += 1;
            if halvings > 60 {
                return Err(Error::NoConvergence(format!("Krylov step error {:e} above tolerance", err.to_f64_lossy())));
            }
        };
        *dt_hint = if halvings == 0 { tau * T::lit(2.0) } else { tau };
        psi.iter_mut().for_each(|z| *z = Complex::zero());
        for (row, v) in basis.iter().enumerate() {
            let c = u[row] * nrm;
            psi.iter_mut().zip(v).for_each(|(p, vi)| *p = *p + vi * c);
        }
        remaining = if tau >= remaining { T::zero() } else { remaining - tau };
    }
    Ok(())
}

fn renormalize<T: Real>(psi: &mut [Complex<T>], tol: T) -> Result<()> {
    let n = cnorm(psi);
    if (n - T::one()).abs() > tol {
        return Err(Error::NormDrift((n - T::one()).to_f64_lossy()));
    }
    psi.iter_mut().for_each(|z| *z = *z / n);
    Ok(())
}

fn check_times<T: Real>(times: &[T]) -> Result<()> {
    if let Some(&t0) = times.first() {
        if t0 < T::zero() {
            return Err(Error::TimeGrid(format!("first time {t0} is negative")));
        }
    }
    if times.windows(2).any(|w| !(w[1] >= w[0])) {
        return Err(Error::TimeGrid("times must be ascending".into()));
    }
    Ok(())
}

/// Evolves `initial` (taken at `t = 0`) under `sign * H(t)` and calls
/// `observe` at every requested time. Time-dependent drives are frozen at
/// segment midpoints.
pub fn evolve_observe<T: Real, R>(
    op: &SpinOperator<T>,
    sign: T,
    drive: &Drive<'_, T>,
    initial: &SpinState<T>,
    times: &[T],
    opts: &EvolveOptions<T>,
    mut observe: impl FnMut(usize, &SpinState<T>) -> R,
) -> Result<Vec<R>> {
    check_times(times)?;
    if initial.n_sites() != op.n_sites() {
        return Err(Error::SiteMismatch(initial.n_sites(), op.n_sites()));
    }
    let mut state = initial.clone();
    let mut t = T::zero();
    let mut dt_hint = T::zero();
    let mut out = Vec::with_capacity(times.len());
    for (k, &target) in times.iter().enumerate() {
        let span = target - t;
        if span > T::zero() {
            let segments = match opts.max_segment {
                Some(h) if !drive.is_constant() => {
                    let slack = T::one() - T::epsilon() * T::lit(64.0);
                    (span / h * slack).ceil().to_usize().unwrap_or(1).max(1)
                }
                _ => 1,
            };
            let h = span / T::from_usize_lossy(segments);
            for s in 0..segments {
                let mid = t + h * (T::from_usize_lossy(s) + T::lit(0.5));
                let zoff = drive.z_offset(mid);
                let rs = drive.transverse_scale(mid);
                propagate_constant(op, sign, zoff, rs, state.amplitudes_mut(), h, &mut dt_hint, opts)?;
                renormalize(state.amplitudes_mut(), opts.norm_tol)?;
            }
            t = target;
        }
        out.push(observe(k, &state));
    }
    Ok(out)
}

/// Snapshots of `exp(-i H t) initial` at each time.
pub fn evolve<T: Real>(
    op: &SpinOperator<T>,
    initial: &SpinState<T>,
    times: &[T],
    opts: &EvolveOptions<T>,
) -> Result<Vec<SpinState<T>>> {
    evolve_observe(op, T::one(), &Drive::constant(), initial, times, opts, |_, s| s.clone())
}

/// Quasi-adiabatic schedule: the transverse field is ramped linearly from
/// zero to its full value over `t_max`, all other terms held fixed.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AnnealSchedule<T> {
    pub t_max: T,
    pub n_steps: usize,
}

impl<T: Real> AnnealSchedule<T> {
    pub fn new(t_max: T, n_steps: usize) -> Result<Self> {
        if !(t_max > T::zero()) || n_steps == 0 {
            return Err(Error::InvalidParameter("anneal needs t_max > 0 and at least one step".into()));
        }
        Ok(Self { t_max, n_steps })
    }
}

/// Time-ordered evolution under the ramped Hamiltonian (exponential
/// midpoint rule, `n_steps` segments). `z_offset` injects a time-dependent
/// detuning error.
pub fn anneal<T: Real>(
    op: &SpinOperator<T>,
    schedule: &AnnealSchedule<T>,
    initial: &SpinState<T>,
    z_offset: Option<&(dyn Fn(T) -> T + Sync)>,
    opts: &EvolveOptions<T>,
) -> Result<SpinState<T>> {
    let drive = Drive { ramp_t_max: Some(schedule.t_max), z_offset };
    let opts = EvolveOptions { max_segment: Some(schedule.t_max / T::from_usize_lossy(schedule.n_steps)), ..*opts };
    let mut out = evolve_observe(op, T::one(), &drive, initial, &[schedule.t_max], &opts, |_, s| s.clone())?;
    Ok(out.pop().expect("one snapshot"))
}
