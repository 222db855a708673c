//! Projective z-basis sampling, the SPAM readout channel and its inversion.
//!
//! Bit convention: bit `i` of a shot word is site `i`; `1` is the Rydberg
//! state with `sz = +1`. `eps` is the probability of reading `1` for a
//! ground-state atom (false Rydberg), `eps_prime` the probability of
//! reading `0` for a Rydberg atom (false ground).

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fermion::XY;
use crate::lattice::{Axis, BulkRegion, LatticeSpec};
use crate::scalar::Real;
use crate::spin_solver::SpinState;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpamParams<T> {
    pub eps: T,
    pub eps_prime: T,
}

impl<T: Real> SpamParams<T> {
    pub fn new(eps: T, eps_prime: T) -> Result<Self> {
        let p = Self { eps, eps_prime };
        p.validate()?;
        Ok(p)
    }

    pub fn none() -> Self {
        Self { eps: T::zero(), eps_prime: T::zero() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps >= T::zero()) || !(self.eps_prime >= T::zero()) {
            return Err(Error::InvalidParameter("SPAM probabilities must be >= 0".into()));
        }
        let s = self.eps + self.eps_prime;
        if !(s < T::one()) {
            return Err(Error::SingularCorrection(s.to_f64_lossy()));
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        self.eps.is_zero() && self.eps_prime.is_zero()
    }
}

/// Sampled bitstrings.
#[derive(Clone, Debug, PartialEq)]
pub struct ShotSet {
    n_sites: usize,
    words: Vec<u64>,
    seed: u64,
    spam: Option<(f64, f64, u64)>,
}

/// Born-rule sampling of `n_shots` basis states.
pub fn sample<T: Real>(state: &SpinState<T>, n_shots: usize, seed: u64) -> Result<ShotSet> {
    if n_shots == 0 {
        return Err(Error::InvalidParameter("need at least one shot".into()));
    }
    if state.n_sites() > 64 {
        return Err(Error::TooManySites { sites: state.n_sites(), cap: 64 });
    }
    let mut cdf = Vec::with_capacity(state.amplitudes().len());
    let mut acc = 0.0f64;
    for a in state.amplitudes() {
        acc += a.norm_sqr().to_f64_lossy();
        cdf.push(acc);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let words = (0..n_shots)
        .map(|_| {
            let u = rng.random::<f64>() * acc;
            cdf.partition_point(|&c| c <= u).min(cdf.len() - 1) as u64
        })
        .collect();
    Ok(ShotSet { n_sites: state.n_sites(), words, seed, spam: None })
}

impl ShotSet {
    pub fn from_words(n_sites: usize, words: Vec<u64>, seed: u64) -> Result<Self> {
        if words.is_empty() {
            return Err(Error::InvalidParameter("need at least one shot".into()));
        }
        if n_sites < 64 && words.iter().any(|&w| w >> n_sites != 0) {
            return Err(Error::InvalidParameter(format!("word wider than {n_sites} bits")));
        }
        Ok(Self { n_sites, words, seed, spam: None })
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn n_shots(&self) -> usize {
        self.words.len()
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn spam_applied(&self) -> bool {
        self.spam.is_some()
    }

    /// Independent readout flips: `0 -> 1` with `eps`, `1 -> 0` with `eps_prime`.
    pub fn apply_spam<T: Real>(&self, p: &SpamParams<T>, seed: u64) -> Result<ShotSet> {
        if self.spam.is_some() {
            return Err(Error::SpamAlreadyApplied);
        }
        p.validate()?;
        let (e0, e1) = (p.eps.to_f64_lossy(), p.eps_prime.to_f64_lossy());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let words = self
            .words
            .iter()
            .map(|&w| {
                let mut out = w;
                for i in 0..self.n_sites {
                    let flip = if w >> i & 1 == 1 { e1 } else { e0 };
                    if rng.random::<f64>() < flip {
                        out ^= 1 << i;
                    }
                }
                out
            })
            .collect();
        Ok(ShotSet { n_sites: self.n_sites, words, seed: self.seed, spam: Some((e0, e1, seed)) })
    }

    pub fn bit(&self, shot: usize, site: usize) -> bool {
        self.words[shot] >> site & 1 == 1
    }

    /// Mean of `sz_i` over shots with its standard error.
    pub fn raw_magnetization(&self, i: usize) -> Estimate<f64> {
        let n = self.n_shots() as f64;
        let ones = self.words.iter().filter(|&&w| w >> i & 1 == 1).count() as f64;
        let p = ones / n;
        Estimate { value: 2.0 * p - 1.0, stderr: 2.0 * (p * (1.0 - p) / n).sqrt() }
    }

    pub fn pair_frequencies(&self, i: usize, j: usize) -> PairFrequencies<f64> {
        let mut c = [0usize; 3];
        for &w in &self.words {
            match (w >> i & 1, w >> j & 1) {
                (0, 0) => c[0] += 1,
                (1, 1) => c[1] += 1,
                _ => c[2] += 1,
            }
        }
        let n = self.n_shots() as f64;
        PairFrequencies { down_down: c[0] as f64 / n, up_up: c[1] as f64 / n, mixed: c[2] as f64 / n, n_shots: self.n_shots() }
    }

    /// Text form: a `#` header with seed, width and SPAM state, then one
    /// bitstring per shot with site 0 as the first character.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# auxspin shots v1");
        let _ = writeln!(s, "# n_sites {}", self.n_sites);
        let _ = writeln!(s, "# n_shots {}", self.n_shots());
        let _ = writeln!(s, "# rng_seed {}", self.seed);
        match self.spam {
            Some((e0, e1, seed)) => {
                let _ = writeln!(s, "# spam {e0:e} {e1:e} {seed}");
            }
            None => {
                let _ = writeln!(s, "# spam none");
            }
        }
        for &w in &self.words {
            let line: String = (0..self.n_sites).map(|i| if w >> i & 1 == 1 { '1' } else { '0' }).collect();
            s.push_str(&line);
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let perr = |line: usize, msg: &str| Error::Parse { line, msg: msg.to_string() };
        let mut n_sites = None;
        let mut seed = 0;
        let mut spam = None;
        let mut words = Vec::new();
        for (k, raw) in text.lines().enumerate() {
            let line = k + 1;
            let row = raw.trim();
            if row.is_empty() {
                continue;
            }
            if let Some(h) = row.strip_prefix('#') {
                let tok: Vec<&str> = h.split_whitespace().collect();
                match tok.as_slice() {
                    ["n_sites", v] => n_sites = Some(v.parse().map_err(|_| perr(line, "bad n_sites"))?),
                    ["rng_seed", v] => seed = v.parse().map_err(|_| perr(line, "bad seed"))?,
                    ["spam", e0, e1, s] => {
                        let f = |x: &str| x.parse::<f64>().map_err(|_| perr(line, "bad spam value"));
                        spam = Some((f(e0)?, f(e1)?, s.parse().map_err(|_| perr(line, "bad spam seed"))?));
                    }
                    _ => {}
                }
                continue;
            }
            let n = n_sites.ok_or_else(|| perr(line, "bitstring before n_sites header"))?;
            if row.len() != n {
                return Err(perr(line, "bitstring width differs from n_sites"));
            }
            let mut w = 0u64;
            for (i, ch) in row.chars().enumerate() {
                match ch {
                    '1' => w |= 1 << i,
                    '0' => {}
                    _ => return Err(perr(line, "bitstrings may only contain 0 and 1")),
                }
            }
            words.push(w);
        }
        let mut set = Self::from_words(n_sites.ok_or_else(|| perr(0, "missing n_sites header"))?, words, seed)?;
        set.spam = spam;
        Ok(set)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate<T> {
    pub value: T,
    pub stderr: T,
}

/// Observed two-site outcome frequencies.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairFrequencies<T> {
    pub down_down: T,
    pub up_up: T,
    pub mixed: T,
    pub n_shots: usize,
}

impl<T: Real> PairFrequencies<T> {
    pub fn as_array(&self) -> [T; 3] {
        [self.down_down, self.up_up, self.mixed]
    }

    pub fn correlation(&self) -> T {
        self.down_down + self.up_up - self.mixed
    }
}

/// Inverse of the single-site readout channel:
/// `(raw + eps' - eps) / (1 - eps - eps')`.
pub fn corrected_magnetization<T: Real>(raw: T, p: &SpamParams<T>) -> Result<T> {
    p.validate()?;
    Ok((raw + p.eps_prime - p.eps) / (T::one() - p.eps - p.eps_prime))
}

/// Which two-site confusion matrix to invert.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReadoutModel {
    /// Published matrix; its first two columns drop `O(eps^2)` terms, so
    /// the corrected correlator keeps an `O(eps'^2)` bias at any shot count.
    Printed,
    /// Product of two independent single-site channels, the inverse of
    /// [`ShotSet::apply_spam`].
    #[default]
    Exact,
}

/// Column-stochastic map from true to observed `(dd, uu, mixed)`
/// probabilities.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReadoutMatrix<T> {
    pub m: [[T; 3]; 3],
}

impl<T: Real> ReadoutMatrix<T> {
    pub fn new(p: &SpamParams<T>, model: ReadoutModel) -> Result<Self> {
        p.validate()?;
        let (e, f) = (p.eps, p.eps_prime);
        let one = T::one();
        let two = T::lit(2.0);
        let col3 = [f * (one - e), (one - f) * e, one - e - f + two * e * f];
        let (col1, col2) = match model {
            ReadoutModel::Printed => ([one - two * e, e * e, two * e - e * e], [f * f, one - two * f, two * f - f * f]),
            ReadoutModel::Exact => {
                ([(one - e) * (one - e), e * e, two * e * (one - e)], [f * f, (one - f) * (one - f), two * f * (one - f)])
            }
        };
        let mut m = [[T::zero(); 3]; 3];
        for r in 0..3 {
            m[r] = [col1[r], col2[r], col3[r]];
        }
        Ok(Self { m })
    }

    pub fn apply(&self, p: &[T; 3]) -> [T; 3] {
        let mut out = [T::zero(); 3];
        for (r, o) in out.iter_mut().enumerate() {
            *o = (0..3).map(|c| self.m[r][c] * p[c]).sum();
        }
        out
    }

    pub fn determinant(&self) -> T {
        let m = &self.m;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    pub fn inverse(&self) -> Result<[[T; 3]; 3]> {
        let det = self.determinant();
        if !(det.abs() > T::lit(1e-12)) {
            return Err(Error::SingularCorrection(det.to_f64_lossy()));
        }
        let m = &self.m;
        let cof = |r0: usize, r1: usize, c0: usize, c1: usize| m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0];
        let adj = [
            [cof(1, 2, 1, 2), -cof(0, 2, 1, 2), cof(0, 1, 1, 2)],
            [-cof(1, 2, 0, 2), cof(0, 2, 0, 2), -cof(0, 1, 0, 2)],
            [cof(1, 2, 0, 1), -cof(0, 2, 0, 1), cof(0, 1, 0, 1)],
        ];
        let mut inv = [[T::zero(); 3]; 3];
        for r in 0..3 {
            for c in 0..3 {
                inv[r][c] = adj[r][c] / det;
            }
        }
        Ok(inv)
    }
}

/// SPAM-corrected `<sz_i sz_j>` from observed pair frequencies.
pub fn corrected_correlation<T: Real>(raw: &PairFrequencies<T>, p: &SpamParams<T>, model: ReadoutModel) -> Result<T> {
    Ok(corrected_correlation_estimate(raw, p, model)?.value)
}

/// Corrected correlation with a multinomial (delta-method) standard error.
pub fn corrected_correlation_estimate<T: Real>(
    raw: &PairFrequencies<T>,
    p: &SpamParams<T>,
    model: ReadoutModel,
) -> Result<Estimate<T>> {
    let f = raw.as_array();
    let total: T = f.iter().copied().sum();
    if (total - T::one()).abs() > T::lit(1e-6) {
        return Err(Error::InvalidParameter(format!("pair frequencies sum to {total}")));
    }
    let inv = ReadoutMatrix::new(p, model)?.inverse()?;
    let sign = [T::one(), T::one(), -T::one()];
    let mut g = [T::zero(); 3];
    for (c, gc) in g.iter_mut().enumerate() {
        *gc = (0..3).map(|r| sign[r] * inv[r][c]).sum();
    }
    let value = (0..3).map(|c| g[c] * f[c]).sum();
    let mean: T = (0..3).map(|c| g[c] * f[c]).sum();
    let second: T = (0..3).map(|c| g[c] * g[c] * f[c]).sum();
    let n = T::from_usize_lossy(raw.n_shots.max(1));
    let stderr = ((second - mean * mean).max(T::zero()) / n).sqrt();
    Ok(Estimate { value, stderr })
}

/// Bulk estimators from shots, optionally SPAM-corrected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShotObservables<T> {
    pub sz: Vec<Estimate<T>>,
    pub bond_zz: Vec<Estimate<T>>,
    pub q_bulk: XY<T>,
    pub z_bulk: T,
    pub z_bulk_pair: Option<T>,
    /// Corrected values outside `[-1, 1]` by more than three standard errors.
    pub out_of_range: usize,
}

pub fn shot_observables<T: Real>(
    shots: &ShotSet,
    lattice: &LatticeSpec<T>,
    bulk: &BulkRegion,
    hoppings: XY<T>,
    correction: Option<(&SpamParams<T>, ReadoutModel)>,
) -> Result<ShotObservables<T>> {
    if shots.n_sites() != lattice.n_sites() {
        return Err(Error::SiteMismatch(shots.n_sites(), lattice.n_sites()));
    }
    let mut out_of_range = 0;
    let mut flag = |e: &Estimate<T>| {
        if e.value.abs() > T::one() + T::lit(3.0) * e.stderr {
            out_of_range += 1;
        }
    };
    let n = T::from_usize_lossy(shots.n_shots());
    let conv = |f: PairFrequencies<f64>| PairFrequencies {
        down_down: T::lit(f.down_down),
        up_up: T::lit(f.up_up),
        mixed: T::lit(f.mixed),
        n_shots: f.n_shots,
    };
    let corr = |i: usize, j: usize| -> Result<Estimate<T>> {
        let f = conv(shots.pair_frequencies(i, j));
        match correction {
            Some((p, model)) => corrected_correlation_estimate(&f, p, model),
            None => {
                let v = f.correlation();
                Ok(Estimate { value: v, stderr: ((T::one() - v * v).max(T::zero()) / n).sqrt() })
            }
        }
    };
    let mut sz = Vec::with_capacity(lattice.n_sites());
    for i in 0..lattice.n_sites() {
        let raw = shots.raw_magnetization(i);
        let e = match correction {
            Some((p, _)) => {
                let d = T::one() - p.eps - p.eps_prime;
                Estimate { value: corrected_magnetization(T::lit(raw.value), p)?, stderr: T::lit(raw.stderr) / d }
            }
            None => Estimate { value: T::lit(raw.value), stderr: T::lit(raw.stderr) },
        };
        flag(&e);
        sz.push(e);
    }
    let mut bond_zz = Vec::with_capacity(lattice.bonds().len());
    for b in lattice.bonds() {
        let e = corr(b.a, b.b)?;
        flag(&e);
        bond_zz.push(e);
    }
    if out_of_range > 0 {
        log::warn!("{out_of_range} corrected estimators fall outside [-1, 1]");
    }
    let mean = |v: Vec<T>| -> Option<T> {
        if v.is_empty() {
            None
        } else {
            let k = T::from_usize_lossy(v.len());
            Some(v.into_iter().sum::<T>() / k)
        }
    };
    let q = |axis: Axis| {
        hoppings.get(axis) * mean(bulk.bonds(axis).iter().map(|&k| bond_zz[k].value).collect()).unwrap_or(T::zero())
    };
    let plaq = &bulk.plaquette_sites;
    let m = mean(plaq.iter().map(|&i| sz[i].value).collect()).unwrap_or(T::zero());
    let mut pairs = Vec::new();
    for a in 0..plaq.len() {
        for b in a + 1..plaq.len() {
            pairs.push(corr(plaq[a], plaq[b])?.value);
        }
    }
    Ok(ShotObservables {
        q_bulk: XY::new(q(Axis::X), q(Axis::Y)),
        z_bulk: m * m,
        z_bulk_pair: mean(pairs),
        sz,
        bond_zz,
        out_of_range,
    })
}
