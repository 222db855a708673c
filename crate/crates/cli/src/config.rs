//! Run configuration: a TOML document with one table per concern.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use auxspin::fermion::{HubbardParams, KGrid};
use auxspin::lattice::{LatticeSpec, DEFAULT_EXACT_SITE_CAP};
use auxspin::noise::NoiseConfig;
use auxspin::quench::{uniform_times, QuenchBackend, QuenchPlan, RegimeThresholds, SpectrumOptions};
use auxspin::measurement::{ReadoutModel, SpamParams};
use auxspin::scf::{Backend, LoopConfig, ShotConfig};
use auxspin::spin_model::{DetuningMode, QpuConfig, DEFAULT_MIN_SPACING, DEFAULT_T_MAX};
use serde::{Deserialize, Serialize};

use crate::manifest::Manifest;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Equilibrium,
    Quench,
    Spectrum,
    Oracle,
    ReportS1,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Equilibrium => "equilibrium",
            Mode::Quench => "quench",
            Mode::Spectrum => "spectrum",
            Mode::Oracle => "oracle",
            Mode::ReportS1 => "report-s1",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Mode,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub lattice: LatticeSection,
    #[serde(default)]
    pub hubbard: HubbardSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qpu: Option<QpuSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shots: Option<ShotsSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseConfig<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub equilibrium: Option<EquilibriumSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quench: Option<QuenchSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<SpectrumSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report_s1: Option<ReportSection>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSection {
    pub lx: usize,
    pub ly: usize,
    #[serde(default = "default_site_cap")]
    pub site_cap: usize,
}

fn default_site_cap() -> usize {
    DEFAULT_EXACT_SITE_CAP
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HubbardSection {
    #[serde(default = "one")]
    pub t_x: f64,
    #[serde(default = "one")]
    pub t_y: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default = "default_k_grid")]
    pub k_grid: [usize; 2],
}

impl Default for HubbardSection {
    fn default() -> Self {
        Self { t_x: 1.0, t_y: 1.0, beta: default_beta(), k_grid: default_k_grid() }
    }
}

fn one() -> f64 {
    1.0
}

fn default_beta() -> f64 {
    20.0
}

fn default_k_grid() -> [usize; 2] {
    [20, 20]
}

/// Physical register. Without this table the register is dimensionless:
/// unit spacing and `C6 / (4 R_x^6) = 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QpuSection {
    /// rad um^6 / us
    pub c6: f64,
    /// um
    pub r_x: f64,
    /// us
    #[serde(default = "default_t_max")]
    pub t_max: f64,
    #[serde(default)]
    pub detuning: DetuningMode,
    /// um
    #[serde(default = "default_min_spacing")]
    pub min_spacing: f64,
}

fn default_t_max() -> f64 {
    DEFAULT_T_MAX
}

fn default_min_spacing() -> f64 {
    DEFAULT_MIN_SPACING
}

/// Projective readout. `n_shots` defaults to 500 per loop iteration and to
/// 250 per quench time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShotsSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_shots: Option<usize>,
    #[serde(default = "SpamParams::none")]
    pub spam: SpamParams<f64>,
    #[serde(default)]
    pub readout: ReadoutModel,
}

impl ShotsSection {
    fn to_core(&self) -> ShotConfig<f64> {
        ShotConfig { n_shots: self.n_shots.unwrap_or(500), spam: self.spam, readout: self.readout }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquilibriumSection {
    pub u_grid: Vec<f64>,
    #[serde(default)]
    pub backend: Backend,
    #[serde(default = "default_n_iter")]
    pub n_iter: usize,
    #[serde(default)]
    pub damping: f64,
    #[serde(default = "default_anneal_steps")]
    pub anneal_steps: usize,
    /// Dimensionless ramp time, used without a `[qpu]` table.
    #[serde(default = "default_anneal_t_max")]
    pub anneal_t_max: f64,
}

fn default_n_iter() -> usize {
    5
}

fn default_anneal_steps() -> usize {
    150
}

fn default_anneal_t_max() -> f64 {
    30.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuenchSection {
    pub u_f: f64,
    #[serde(default)]
    pub backend: QuenchBackend,
    /// Explicit model times; overrides `t_max` and `n_times`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub times: Option<Vec<f64>>,
    #[serde(default = "default_quench_span")]
    pub t_max: f64,
    #[serde(default = "default_n_times")]
    pub n_times: usize,
}

fn default_quench_span() -> f64 {
    3.0
}

fn default_n_times() -> usize {
    60
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumSection {
    /// Quench CSV to transform; the `[quench]` table is run when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window_sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window_center: Option<f64>,
    #[serde(default = "default_pad")]
    pub pad: usize,
    #[serde(default)]
    pub resample: bool,
    #[serde(default = "default_metallic")]
    pub metallic_threshold: f64,
    #[serde(default = "default_mott")]
    pub mott_threshold: f64,
}

impl Default for SpectrumSection {
    fn default() -> Self {
        Self {
            input: None,
            window_sigma: None,
            window_center: None,
            pad: default_pad(),
            resample: false,
            metallic_threshold: default_metallic(),
            mott_threshold: default_mott(),
        }
    }
}

fn default_pad() -> usize {
    8
}

fn default_metallic() -> f64 {
    0.2
}

fn default_mott() -> f64 {
    0.05
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSection {
    /// `(Q_x, Q_y)` settings.
    #[serde(default = "default_q_settings")]
    pub q: Vec<[f64; 2]>,
}

impl Default for OracleSection {
    fn default() -> Self {
        Self { q: default_q_settings() }
    }
}

fn default_q_settings() -> Vec<[f64; 2]> {
    vec![[1.0, 1.0], [1.0, 0.65], [0.3, 0.9], [-0.7, 0.2], [0.05, 0.05]]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportSection {
    #[serde(default = "default_sizes")]
    pub sizes: Vec<[usize; 2]>,
    #[serde(default = "default_report_grid")]
    pub u_grid: Vec<f64>,
}

impl Default for ReportSection {
    fn default() -> Self {
        Self { sizes: default_sizes(), u_grid: default_report_grid() }
    }
}

fn default_sizes() -> Vec<[usize; 2]> {
    vec![[3, 3], [4, 4]]
}

fn default_report_grid() -> Vec<f64> {
    vec![2.0, 4.0, 6.0, 8.0, 10.0, 12.0, 14.0]
}

/// Defaults filled in for keys absent from the input, as `(path, note)`.
const DEFAULT_NOTES: &[(&str, &str)] = &[
    ("seed", "master seed for every random stream"),
    ("lattice.site_cap", "largest register handled by state-vector solvers"),
    ("hubbard.t_x", "energy unit"),
    ("hubbard.t_y", "isotropic hopping"),
    ("hubbard.beta", "k_B T = 0.05 t_x"),
    ("hubbard.k_grid", "Brillouin-zone sampling for the fermion solve"),
    ("shots.n_shots", "shots per loop iteration or per quench time"),
    ("shots.readout", "inverse of two independent single-site channels"),
    ("equilibrium.backend", "exact ground state of the ideal spin model"),
    ("equilibrium.n_iter", "self-consistent iterations"),
    ("equilibrium.damping", "no mixing of successive couplings"),
    ("equilibrium.anneal_steps", "piecewise-constant ramp segments"),
    ("equilibrium.anneal_t_max", "dimensionless ramp time"),
    ("quench.backend", "ideal spin model"),
    ("quench.t_max", "model time span in units of 1/t_x"),
    ("quench.n_times", "uniform samples including t = 0"),
    ("qpu.t_max", "ramp time in us"),
    ("qpu.detuning", "global detuning set from the reference-site interaction sum"),
    ("qpu.min_spacing", "interaction-validity floor in um"),
    ("spectrum.pad", "zero padding factor"),
    ("spectrum.metallic_threshold", "late-window mean at or above which the run is labelled metallic"),
    ("spectrum.mott_threshold", "late-window mean below which the run is labelled Mott"),
    ("oracle.q", "bond-correlator settings compared on a 20x20 torus"),
    ("report_s1.sizes", "lattice sizes compared"),
    ("report_s1.u_grid", "interaction values compared"),
];

fn has_path(table: &toml::Table, path: &str) -> bool {
    let mut cur = table;
    let mut parts = path.split('.').peekable();
    while let Some(p) = parts.next() {
        match cur.get(p) {
            None => return false,
            Some(_) if parts.peek().is_none() => return true,
            Some(toml::Value::Table(t)) => cur = t,
            Some(_) => return false,
        }
    }
    true
}

/// A parsed configuration and the defaults that were filled in.
#[derive(Clone, Debug, PartialEq)]
pub struct Loaded {
    pub config: RunConfig,
    pub defaults: Vec<(String, String)>,
}

/// Parses a run configuration or a manifest written by a previous run.
/// `mode` replaces the mode given in the document.
pub fn parse_config_str(text: &str, mode: Option<Mode>) -> Result<Loaded> {
    let mut table: toml::Table = toml::from_str(text).context("config is not valid TOML")?;
    if table.contains_key("manifest_version") {
        let m: Manifest = toml::from_str(text).context("invalid manifest")?;
        let mut config = m.config;
        if let Some(mode) = mode {
            config.mode = mode;
            config.resolve();
        }
        config.validate()?;
        return Ok(Loaded { config, defaults: m.defaults.into_iter().collect() });
    }
    if let Some(mode) = mode {
        table.insert("mode".into(), toml::Value::String(mode.as_str().into()));
    }
    let mut config: RunConfig = table.clone().try_into().context("invalid config")?;
    config.resolve();
    config.validate()?;
    let resolved = toml::Table::try_from(&config).context("serializing config")?;
    let defaults = DEFAULT_NOTES
        .iter()
        .filter(|(path, _)| has_path(&resolved, path) && !has_path(&table, path))
        .map(|(path, note)| (path.to_string(), note.to_string()))
        .collect();
    Ok(Loaded { config, defaults })
}

pub fn parse_config(path: &Path, mode: Option<Mode>) -> Result<Loaded> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_config_str(&text, mode).with_context(|| format!("in {}", path.display()))
}

fn field<E: std::fmt::Display>(path: &str, r: std::result::Result<(), E>) -> Result<()> {
    r.map_err(|e| anyhow::anyhow!("{path}: {e}"))
}

impl RunConfig {
    /// Materializes the optional table the selected mode reads.
    pub fn resolve(&mut self) {
        let quench_like = matches!(self.mode, Mode::Quench | Mode::Spectrum);
        if let Some(s) = &mut self.shots {
            s.n_shots.get_or_insert(if quench_like { 250 } else { 500 });
        }
        match self.mode {
            Mode::Spectrum => {
                self.spectrum.get_or_insert_with(SpectrumSection::default);
            }
            Mode::Oracle => {
                self.oracle.get_or_insert_with(OracleSection::default);
            }
            Mode::ReportS1 => {
                self.report_s1.get_or_insert_with(ReportSection::default);
            }
            Mode::Equilibrium | Mode::Quench => {}
        }
    }

    pub fn validate(&self) -> Result<()> {
        field("lattice", LatticeSpec::<f64>::dimensionless(self.lattice.lx, self.lattice.ly).map(|_| ()))?;
        field("hubbard", self.base_params().map(|_| ()))?;
        field("hubbard.k_grid", KGrid::new(self.hubbard.k_grid[0], self.hubbard.k_grid[1]).map(|_| ()))?;
        if let Some(q) = &self.qpu {
            field("qpu", self.qpu_config(q.t_max).validate())?;
        }
        if let Some(s) = &self.shots {
            if s.n_shots == Some(0) {
                bail!("shots.n_shots: must be >= 1");
            }
            field("shots.spam", s.spam.validate())?;
        }
        if let Some(n) = &self.noise {
            field("noise", n.validate())?;
        }
        match self.mode {
            Mode::Equilibrium => {
                let Some(e) = &self.equilibrium else { bail!("equilibrium: table required for mode equilibrium") };
                if e.u_grid.is_empty() {
                    bail!("equilibrium.u_grid: must not be empty");
                }
                if let Some(u) = e.u_grid.iter().find(|u| !(**u >= 0.0)) {
                    bail!("equilibrium.u_grid: U = {u} must be >= 0");
                }
                field("equilibrium", self.loop_config()?.validate())?;
            }
            Mode::Quench => {
                field("quench", self.quench_plan()?.validate())?;
            }
            Mode::Spectrum => {
                let s = self.spectrum.clone().unwrap_or_default();
                if s.input.is_none() {
                    field("quench", self.quench_plan()?.validate())?;
                }
                if s.pad == 0 {
                    bail!("spectrum.pad: must be >= 1");
                }
                if !(s.mott_threshold <= s.metallic_threshold) {
                    bail!("spectrum.mott_threshold: must not exceed metallic_threshold");
                }
            }
            Mode::Oracle => {
                if self.oracle.as_ref().is_some_and(|o| o.q.is_empty()) {
                    bail!("oracle.q: must not be empty");
                }
            }
            Mode::ReportS1 => {
                let r = self.report_s1.clone().unwrap_or_default();
                if r.sizes.is_empty() || r.u_grid.is_empty() {
                    bail!("report_s1: sizes and u_grid must not be empty");
                }
            }
        }
        Ok(())
    }

    pub fn lattice(&self) -> Result<LatticeSpec<f64>> {
        Ok(LatticeSpec::dimensionless(self.lattice.lx, self.lattice.ly)?)
    }

    pub fn base_params(&self) -> Result<HubbardParams<f64>> {
        let h = &self.hubbard;
        Ok(HubbardParams::new(h.t_x, h.t_y, 0.0, h.beta)?)
    }

    pub fn k_grid(&self) -> KGrid {
        KGrid { nkx: self.hubbard.k_grid[0], nky: self.hubbard.k_grid[1] }
    }

    fn qpu_config(&self, dimensionless_t_max: f64) -> QpuConfig<f64> {
        match &self.qpu {
            Some(q) => QpuConfig { c6: q.c6, r_x: q.r_x, t_max: q.t_max, detuning: q.detuning, min_spacing: q.min_spacing },
            None => QpuConfig::dimensionless(dimensionless_t_max),
        }
    }

    pub fn loop_config(&self) -> Result<LoopConfig<f64>> {
        let e = self.equilibrium.as_ref().context("equilibrium: table required")?;
        Ok(LoopConfig {
            backend: e.backend,
            qpu: self.qpu_config(e.anneal_t_max),
            anneal_steps: e.anneal_steps,
            n_iter: e.n_iter,
            damping: e.damping,
            k_grid: self.k_grid(),
            shots: self.shots.as_ref().map(ShotsSection::to_core),
            noise: self.noise.clone(),
            site_cap: self.lattice.site_cap,
            seed: self.seed,
        })
    }

    pub fn quench_plan(&self) -> Result<QuenchPlan<f64>> {
        let q = self.quench.as_ref().context("quench: table required")?;
        let times = match &q.times {
            Some(t) => t.clone(),
            None => {
                if q.n_times < 2 {
                    bail!("quench.n_times: must be >= 2");
                }
                uniform_times(q.t_max, q.n_times)
            }
        };
        Ok(QuenchPlan {
            u_f: q.u_f,
            times,
            backend: q.backend,
            shots: self.shots.as_ref().map(ShotsSection::to_core),
            noise: self.noise.clone(),
            qpu: self.qpu_config(1.0),
            k_grid: self.k_grid(),
            site_cap: self.lattice.site_cap,
            seed: self.seed,
        })
    }

    pub fn spectrum_options(&self) -> (SpectrumOptions<f64>, RegimeThresholds<f64>) {
        let s = self.spectrum.clone().unwrap_or_default();
        (
            SpectrumOptions { window_sigma: s.window_sigma, window_center: s.window_center, pad: s.pad, resample: s.resample },
            RegimeThresholds { metallic: s.metallic_threshold, mott: s.mott_threshold },
        )
    }
}
