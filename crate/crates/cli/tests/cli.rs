use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use auxspin_cli::{parse_config, parse_config_str, Manifest, Mode, Status, MANIFEST_FILE};

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_auxspin")).args(args).env("RUST_LOG", "warn").output().unwrap()
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn run_ok(config: &Path, out: &Path) -> Manifest {
    let o = bin(&["run", config.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    Manifest::read(&out.join(MANIFEST_FILE)).unwrap()
}

const SMALL_NOISY: &str = r#"
mode = "quench"
seed = 5

[lattice]
lx = 2
ly = 2

[qpu]
c6 = 865723.02
r_x = 7.5

[quench]
u_f = 16.0
backend = "exact_HQPU"
t_max = 0.5
n_times = 8

[noise]
n_instances = 6

[shots]
n_shots = 200
spam = { eps = 0.01, eps_prime = 0.07 }
"#;

#[test]
fn minimal_equilibrium_config_fills_defaults() {
    let loaded = parse_config_str("mode = \"equilibrium\"\n[lattice]\nlx = 4\nly = 4\n[equilibrium]\nu_grid = [2.0, 8.0]\n", None).unwrap();
    let c = &loaded.config;
    assert_eq!(c.hubbard.beta, 20.0);
    assert_eq!(c.hubbard.k_grid, [20, 20]);
    let e = c.equilibrium.as_ref().unwrap();
    assert_eq!(e.n_iter, 5);
    let paths: Vec<&str> = loaded.defaults.iter().map(|d| d.0.as_str()).collect();
    for p in ["hubbard.beta", "hubbard.k_grid", "equilibrium.n_iter", "seed"] {
        assert!(paths.contains(&p), "{p} missing from {paths:?}");
    }
    assert!(!paths.contains(&"equilibrium.u_grid"));
}

#[test]
fn shot_count_default_depends_on_mode() {
    let base = "[lattice]\nlx = 2\nly = 2\n[quench]\nu_f = 4.0\n[equilibrium]\nu_grid = [1.0]\n[shots]\n";
    let n = |mode: &str| {
        let c = parse_config_str(&format!("mode = \"{mode}\"\n{base}"), None).unwrap().config;
        c.shots.unwrap().n_shots.unwrap()
    };
    assert_eq!(n("quench"), 250);
    assert_eq!(n("equilibrium"), 500);
}

#[test]
fn singular_spam_is_rejected_with_field_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.toml",
        "mode = \"quench\"\n[lattice]\nlx = 2\nly = 2\n[quench]\nu_f = 4.0\n[shots]\nspam = { eps = 0.25, eps_prime = 0.75 }\n",
    );
    let o = bin(&["check", cfg.to_str().unwrap()]);
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("shots.spam"), "{err}");
}

#[test]
fn unknown_keys_are_hard_errors() {
    let err = parse_config_str("mode = \"oracle\"\n[lattice]\nlx = 2\nly = 2\n[hubbard]\nbeta = 20.0\ntemperature = 0.05\n", None).unwrap_err();
    let msg = format!("{err:#}");
    assert!(msg.contains("temperature") && msg.contains("hubbard"), "{msg}");
    assert!(parse_config_str("mode = \"oracle\"\nsede = 1\n[lattice]\nlx = 2\nly = 2\n", None).is_err());
}

#[test]
fn invariant_violations_name_the_field() {
    let err = parse_config_str("mode = \"equilibrium\"\n[lattice]\nlx = 2\nly = 2\n[equilibrium]\nu_grid = [1.0]\ndamping = 1.5\n", None)
        .unwrap_err();
    assert!(format!("{err:#}").starts_with("equilibrium"), "{err:#}");
    let err = parse_config_str("mode = \"quench\"\n[lattice]\nlx = 2\nly = 2\n[hubbard]\nt_y = -1.0\n[quench]\nu_f = 1.0\n", None).unwrap_err();
    assert!(format!("{err:#}").starts_with("hubbard"), "{err:#}");
}

#[test]
fn isotropic_quench_config_is_accepted_with_default_notes() {
    let loaded = parse_config(&configs().join("quench_uf16.toml"), None).unwrap();
    assert_eq!(loaded.config.mode, Mode::Quench);
    assert_eq!(loaded.config.hubbard.t_y, 1.0);
    let paths: Vec<&str> = loaded.defaults.iter().map(|d| d.0.as_str()).collect();
    for p in ["hubbard.t_y", "hubbard.beta", "quench.t_max", "quench.n_times", "quench.backend"] {
        assert!(paths.contains(&p), "{p} missing from {paths:?}");
    }
    assert!(loaded.defaults.iter().all(|d| !d.1.is_empty()));
}

#[test]
fn shipped_configs_parse() {
    for entry in std::fs::read_dir(configs()).unwrap() {
        let p = entry.unwrap().path();
        parse_config(&p, None).unwrap_or_else(|e| panic!("{}: {e:#}", p.display()));
    }
}

#[test]
fn equilibrium_sweep_writes_converged_rows_and_traces() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", "mode = \"equilibrium\"\n[lattice]\nlx = 3\nly = 3\n[equilibrium]\nu_grid = [0.0, 3.0, 9.0]\n");
    let out = dir.path().join("out");
    let m = run_ok(&cfg, &out);
    assert_eq!(m.status, Status::Complete);
    assert_eq!(m.outputs, ["sweep.csv", "sweep_trace.csv"]);
    let sweep = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    let trace = std::fs::read_to_string(out.join("sweep_trace.csv")).unwrap();
    let header = "U_over_tx,iter,J_x,J_y,Q_x_bulk,Q_y_bulk,Z_bulk,R_y,Omega,delta,backend,seed";
    assert_eq!(sweep.lines().next(), Some(header));
    assert_eq!(sweep.lines().count(), 1 + 3);
    assert_eq!(trace.lines().count(), 1 + 3 * 5);
    assert!(sweep.lines().skip(1).all(|l| l.split(',').nth(1) == Some("4")));
    assert!(out.join("run.log").exists());
}

#[test]
fn noisy_quench_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", SMALL_NOISY);
    run_ok(&cfg, &dir.path().join("a"));
    run_ok(&cfg, &dir.path().join("b"));
    let a = std::fs::read(dir.path().join("a/quench.csv")).unwrap();
    let b = std::fs::read(dir.path().join("b/quench.csv")).unwrap();
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    assert_eq!(text.lines().next(), Some("time,Z_bulk_mean,ci_lo,ci_hi,backend,U_f,seed"));
    assert_eq!(text.lines().count(), 9);
}

#[test]
fn manifest_replay_reproduces_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", SMALL_NOISY);
    let first = dir.path().join("first");
    let m = run_ok(&cfg, &first);
    let second = dir.path().join("second");
    let m2 = run_ok(&first.join(MANIFEST_FILE), &second);
    assert_eq!(m.config, m2.config);
    assert_eq!(m.defaults, m2.defaults);
    for name in &m.outputs {
        assert_eq!(std::fs::read(first.join(name)).unwrap(), std::fs::read(second.join(name)).unwrap(), "{name}");
    }
}

#[test]
fn failed_run_leaves_an_incomplete_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", "mode = \"quench\"\n[lattice]\nlx = 5\nly = 5\n[quench]\nu_f = 4.0\n");
    let out = dir.path().join("out");
    let o = bin(&["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(!o.status.success());
    let m = Manifest::read(&out.join(MANIFEST_FILE)).unwrap();
    assert_eq!(m.status, Status::Incomplete);
    assert!(m.error.unwrap().contains("25 sites"));
    assert!(m.outputs.is_empty());
    assert!(!out.join("quench.csv").exists());
}

#[test]
fn mode_flag_overrides_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = bin(&["run", configs().join("quench_uf16.toml").to_str().unwrap(), "--mode", "oracle", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m = Manifest::read(&out.join(MANIFEST_FILE)).unwrap();
    assert_eq!(m.config.mode, Mode::Oracle);
    let csv = std::fs::read_to_string(out.join("oracle.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 5);
    assert!(m.summary["max_abs_diff"].parse::<f64>().unwrap() <= 1e-8);
}

#[test]
fn spectrum_of_a_quench_csv() {
    let dir = tempfile::tempdir().unwrap();
    let q = write(dir.path(), "q.toml", "mode = \"quench\"\n[lattice]\nlx = 2\nly = 2\n[quench]\nu_f = 16.0\n");
    run_ok(&q, &dir.path().join("q"));
    let input = dir.path().join("q/quench.csv");
    let s = write(
        dir.path(),
        "s.toml",
        &format!("mode = \"spectrum\"\n[lattice]\nlx = 2\nly = 2\n[spectrum]\ninput = {:?}\n", input.to_str().unwrap()),
    );
    let m = run_ok(&s, &dir.path().join("s"));
    assert_eq!(m.outputs, ["spectrum.csv"]);
    let csv = std::fs::read_to_string(dir.path().join("s/spectrum.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("freq,amplitude"));
    // Same peak as the dense-propagation reference for this register.
    let peak: f64 = m.summary["peak_freq"].parse().unwrap();
    assert!((peak - 1.689424174391386).abs() < 1e-9, "{peak}");
}

#[test]
fn report_s1_tabulates_every_size_and_interaction() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.toml",
        "mode = \"report-s1\"\n[lattice]\nlx = 2\nly = 2\n[hubbard]\nt_y = 0.65\n[report_s1]\nsizes = [[2, 2], [3, 3]]\nu_grid = [2.0, 6.0]\n",
    );
    let m = run_ok(&cfg, &dir.path().join("out"));
    let csv = std::fs::read_to_string(dir.path().join("out/report_s1.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("Lx,Ly,U_over_tx,Z_Hs,Z_HQPU,abs_delta"));
    assert_eq!(csv.lines().count(), 1 + 4);
    assert!(matches!(m.summary["trend"].as_str(), "ok" | "flagged"));
}
