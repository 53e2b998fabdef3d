//! Experiment harness: presets, Monte-Carlo sweeps and their on-disk outputs.

pub mod config;
pub mod csv_io;
pub mod sweep;

use std::fmt::Write as _;
use std::path::Path;

pub use config::{
    config_to_toml, parse_config, parse_file_config, resolve_config, CliOverrides, ExperimentConfig, FileConfig,
    Preset, SolverKind,
};
pub use csv_io::{gnuplot_columns, read_csv, to_csv_string, write_csv, SweepRow};
pub use sweep::{run_phase_grid, run_phase_grid_detailed, run_snr_sweep, run_snr_sweep_detailed, se_table, TrialLog};

use crate::error::{Error, Result};

/// Writes `results.csv`, `config.toml` and `run.log` into `dir`, creating it if needed.
pub fn write_run_outputs(dir: &Path, cfg: &ExperimentConfig, rows: &[SweepRow], logs: &[TrialLog]) -> Result<()> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| Error::Io { path, source }
    };
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    write_csv(rows, &dir.join("results.csv"))?;
    let toml_path = dir.join("config.toml");
    std::fs::write(&toml_path, config_to_toml(cfg)).map_err(io(&toml_path))?;
    let mut log = String::new();
    for l in logs {
        let _ = writeln!(log, "{}", l.log_line());
    }
    let failed = logs.iter().filter(|l| l.failed()).count();
    let _ = writeln!(log, "trials={} failures={failed}", logs.len());
    let log_path = dir.join("run.log");
    std::fs::write(&log_path, log).map_err(io(&log_path))
}
