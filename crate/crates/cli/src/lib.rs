//! Configuration, manifests and mode drivers behind the `auxspin` binary.

pub mod config;
pub mod manifest;
pub mod run;

pub use config::{parse_config, parse_config_str, Loaded, Mode, RunConfig};
pub use manifest::{Manifest, Status, MANIFEST_FILE};
pub use run::{output_dir, run};
