//! Mode drivers. Every artifact lands next to a manifest written first.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use auxspin::fermion::{real_space_oracle, spin_couplings, XY};
use auxspin::quench::{regime_classifier, run_quench, spectrum, QuenchBackend, TimeSeries};
use auxspin::scf::{discrepancy_report, run_sweep, LoopConfig};

use crate::config::{Loaded, Mode, RunConfig};
use crate::manifest::{Manifest, Status};

pub const ORACLE_CSV_HEADER: &str = "Q_x,Q_y,J_x_k,J_y_k,J_x_real,J_y_real,max_abs_diff";

struct Sink<'a> {
    dir: &'a Path,
    manifest: Manifest,
}

impl Sink<'_> {
    fn output(&mut self, name: &str, content: &str) -> Result<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, content).with_context(|| format!("writing {}", path.display()))?;
        self.manifest.outputs.push(name.to_string());
        self.manifest.write(self.dir)
    }

    fn note(&mut self, key: &str, value: impl ToString) {
        self.manifest.summary.insert(key.to_string(), value.to_string());
    }
}

/// Output directory: the flag, then the config, then `out`.
pub fn output_dir(config: &RunConfig, flag: Option<&Path>) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| config.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"))
}

/// Runs the configured mode into `dir` and returns the final manifest.
/// The manifest is marked incomplete when the driver fails.
pub fn run(loaded: &Loaded, dir: &Path) -> Result<Manifest> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut sink = Sink { dir, manifest: Manifest::start(&loaded.config, &loaded.defaults) };
    sink.manifest.write(dir)?;
    let start = Instant::now();
    let result = dispatch(&loaded.config, &mut sink);
    sink.manifest.wall_time_s = start.elapsed().as_secs_f64();
    match &result {
        Ok(()) => sink.manifest.status = Status::Complete,
        Err(e) => {
            sink.manifest.status = Status::Incomplete;
            sink.manifest.error = Some(format!("{e:#}"));
        }
    }
    sink.manifest.write(dir)?;
    result.map(|()| sink.manifest)
}

fn dispatch(cfg: &RunConfig, sink: &mut Sink<'_>) -> Result<()> {
    match cfg.mode {
        Mode::Equilibrium => equilibrium(cfg, sink),
        Mode::Quench => {
            quench(cfg, sink)?;
            Ok(())
        }
        Mode::Spectrum => spectral(cfg, sink),
        Mode::Oracle => oracle(cfg, sink),
        Mode::ReportS1 => report(cfg, sink),
    }
}

fn equilibrium(cfg: &RunConfig, sink: &mut Sink<'_>) -> Result<()> {
    let e = cfg.equilibrium.as_ref().context("equilibrium: table required")?;
    let sweep = run_sweep(&e.u_grid, &cfg.base_params()?, &cfg.lattice()?, &cfg.loop_config()?)?;
    sink.output("sweep.csv", &sweep.to_converged_csv())?;
    sink.output("sweep_trace.csv", &sweep.to_csv())?;
    for p in &sweep.points {
        let last = p.converged();
        sink.note(&format!("Z_bulk[U={}]", p.u), last.z_bulk);
        if let Some((lo, hi)) = last.z_band {
            sink.note(&format!("Z_bulk_ci70[U={}]", p.u), format!("{lo}..{hi}"));
        }
        if p.trivial_fixed_point {
            sink.note(&format!("trivial[U={}]", p.u), true);
        }
    }
    Ok(())
}

fn quench(cfg: &RunConfig, sink: &mut Sink<'_>) -> Result<TimeSeries<f64>> {
    let series = run_quench(&cfg.lattice()?, &cfg.base_params()?, &cfg.quench_plan()?)?;
    sink.output("quench.csv", &series.to_csv())?;
    sink.note("J_x", series.j.x);
    sink.note("J_y", series.j.y);
    if let Some(sp) = &series.setpoint {
        sink.note("R_y", sp.r_y);
        sink.note("Omega", sp.omega);
        sink.note("delta", sp.delta);
    }
    let (_, thresholds) = cfg.spectrum_options();
    let r = regime_classifier(&series, &thresholds);
    sink.note("late_window_mean", r.late_mean);
    sink.note("regime", format!("{:?}", r.regime).to_lowercase());
    sink.note("periods", r.periods);
    Ok(series)
}

fn spectral(cfg: &RunConfig, sink: &mut Sink<'_>) -> Result<()> {
    let (opts, thresholds) = cfg.spectrum_options();
    let input = cfg.spectrum.as_ref().and_then(|s| s.input.clone());
    let (times, z) = match input {
        Some(path) => {
            let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
            let (t, z) = TimeSeries::<f64>::columns_from_csv(&text).with_context(|| format!("in {}", path.display()))?;
            let u_f = cfg.quench.as_ref().map_or(0.0, |q| q.u_f);
            let series = TimeSeries {
                times: t.clone(),
                z_mean: z.clone(),
                ci_lo: z.clone(),
                ci_hi: z.clone(),
                backend: QuenchBackend::ExactHs,
                u_f,
                seed: cfg.seed,
                j: XY::new(0.0, 0.0),
                setpoint: None,
                fermion_solves: 0,
            };
            let r = regime_classifier(&series, &thresholds);
            sink.note("late_window_mean", r.late_mean);
            sink.note("regime", format!("{:?}", r.regime).to_lowercase());
            (t, z)
        }
        None => {
            let s = quench(cfg, sink)?;
            (s.times, s.z_mean)
        }
    };
    let spec = spectrum(&times, &z, &opts)?;
    sink.output("spectrum.csv", &spec.to_csv())?;
    sink.note("peak_freq", spec.peak_freq);
    sink.note("peak_amplitude", spec.peak_amplitude);
    sink.note("window_sigma", spec.window_sigma);
    Ok(())
}

fn oracle(cfg: &RunConfig, sink: &mut Sink<'_>) -> Result<()> {
    let params = cfg.base_params()?;
    let grid = cfg.k_grid();
    let settings = cfg.oracle.clone().unwrap_or_default().q;
    let mut csv = format!("{ORACLE_CSV_HEADER}\n");
    let mut worst: f64 = 0.0;
    for [qx, qy] in settings {
        let q = XY::new(qx, qy);
        let a = spin_couplings(q, &params, grid)?;
        let b = real_space_oracle(grid.nkx, grid.nky, q, &params)?;
        let d = (a.x - b.x).abs().max((a.y - b.y).abs());
        worst = worst.max(d);
        csv.push_str(&format!("{qx},{qy},{},{},{},{},{d}\n", a.x, a.y, b.x, b.y));
    }
    sink.output("oracle.csv", &csv)?;
    sink.note("max_abs_diff", worst);
    Ok(())
}

fn report(cfg: &RunConfig, sink: &mut Sink<'_>) -> Result<()> {
    let r = cfg.report_s1.clone().unwrap_or_default();
    let sizes: Vec<(usize, usize)> = r.sizes.iter().map(|s| (s[0], s[1])).collect();
    let loop_cfg = match cfg.equilibrium {
        Some(_) => cfg.loop_config()?,
        None => LoopConfig { k_grid: cfg.k_grid(), site_cap: cfg.lattice.site_cap, seed: cfg.seed, ..LoopConfig::default() },
    };
    let rep = discrepancy_report(&sizes, &r.u_grid, &cfg.base_params()?, &loop_cfg)?;
    sink.output("report_s1.csv", &rep.to_csv())?;
    for (lx, ly, m) in &rep.means {
        sink.note(&format!("mean_abs_delta[{lx}x{ly}]"), m);
    }
    sink.note("trend", if rep.shrinks_with_size { "ok" } else { "flagged" });
    log::info!("{}", rep.summary().trim_end());
    Ok(())
}
