use std::fs::File;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Mutex;

use anyhow::{Context, Result};
use auxspin_cli::{output_dir, parse_config, run, Mode};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "auxspin", version, about = "Auxiliary-spin solver for the anisotropic Fermi-Hubbard model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a configuration or replay a manifest.
    Run {
        config: PathBuf,
        /// Output directory; overrides `output_dir` in the config.
        #[arg(short, long)]
        out: Option<PathBuf>,
        /// Overrides `mode` in the config.
        #[arg(short, long, value_enum)]
        mode: Option<Mode>,
    },
    /// Validate a configuration and print it with all defaults resolved.
    Check {
        config: PathBuf,
        #[arg(short, long, value_enum)]
        mode: Option<Mode>,
    },
}

/// Log lines go to stderr and to `run.log` in the output directory.
struct Tee {
    file: Mutex<File>,
}

impl Write for Tee {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        std::io::stderr().write_all(buf)?;
        self.file.lock().expect("log file lock").write_all(buf)?;
        Ok(buf.len())
    }

    fn flush(&mut self) -> std::io::Result<()> {
        std::io::stderr().flush()?;
        self.file.lock().expect("log file lock").flush()
    }
}

fn init_logging(log_file: Option<File>) {
    let mut b = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"));
    if let Some(file) = log_file {
        b.target(env_logger::Target::Pipe(Box::new(Tee { file: Mutex::new(file) })));
    }
    let _ = b.try_init();
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Check { config, mode } => {
            init_logging(None);
            let loaded = parse_config(&config, mode)?;
            print!("{}", toml::to_string(&loaded.config)?);
            for (path, note) in &loaded.defaults {
                println!("# default {path}: {note}");
            }
            Ok(())
        }
        Command::Run { config, out, mode } => {
            let loaded = parse_config(&config, mode)?;
            let dir = output_dir(&loaded.config, out.as_deref());
            std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
            init_logging(Some(File::create(dir.join("run.log"))?));
            log::info!("{} run into {}", loaded.config.mode.as_str(), dir.display());
            let manifest = run(&loaded, &dir)?;
            log::info!("complete in {:.2} s: {}", manifest.wall_time_s, manifest.outputs.join(", "));
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
