//! Command-line harness: SNR sweeps, solver comparisons, phase grids and SE trajectories.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use bigvamp::experiments::{
    config_to_toml, gnuplot_columns, parse_config, read_csv, run_phase_grid_detailed, run_snr_sweep_detailed,
    se_table, write_run_outputs, CliOverrides, ExperimentConfig, SolverKind,
};
use bigvamp::state_evolution::SeMode;
use bigvamp::{Error, Result};

#[derive(Parser)]
#[command(name = "bigvamp", version, about = "Bi-VAMP / BiG-VAMP experiment harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte-Carlo NRMSE over the SNR grid.
    Sweep(Common),
    /// BiG-VAMP over the SNR × rank grid.
    Phase(Common),
    /// SE trajectories only.
    Se {
        #[command(flatten)]
        common: Common,
        /// Recursion variant; defaults to the one matching the first solver.
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
    },
    /// Sweep with every solver applicable to the configuration.
    Compare(Common),
    /// Rewrites a results CSV as gnuplot column blocks on stdout.
    Columns {
        /// CSV written by `sweep`, `phase` or `compare`.
        input: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Bivamp,
    Bigvamp,
}

#[derive(Args)]
struct Common {
    /// dictionary_learning, matrix_factorization, matrix_completion,
    /// dictionary_learning_binary_small, dictionary_learning_binary_large or custom.
    #[arg(long)]
    preset: Option<String>,
    /// Flat TOML file; CLI flags take precedence over its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated SNR grid in dB.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    snr: Option<Vec<f64>>,
    /// Comma-separated rank grid (phase mode).
    #[arg(long, value_delimiter = ',')]
    ranks: Option<Vec<usize>>,
    #[arg(long)]
    n_trials: Option<usize>,
    /// Comma-separated subset of bigvamp, bivamp, baseline_amp.
    #[arg(long, value_delimiter = ',')]
    solvers: Option<Vec<String>>,
    /// Attach SE predictions to every row.
    #[arg(long)]
    se_overlay: bool,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long)]
    jobs: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Use the full-size dimensions instead of desk scale.
    #[arg(long)]
    full_scale: bool,
}

impl Common {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let cli = CliOverrides {
            preset: self.preset.clone(),
            snr_grid_db: self.snr.clone(),
            rank_grid: self.ranks.clone(),
            n_trials: self.n_trials,
            solvers: self.solvers.clone(),
            se_overlay: self.se_overlay.then_some(true),
            seed: self.seed,
            jobs: self.jobs,
            output: self.out.as_ref().map(|p| p.display().to_string()),
            full_scale: self.full_scale.then_some(true),
        };
        parse_config(&cli, self.config.as_deref())
    }
}

fn applicable_solvers(cfg: &ExperimentConfig) -> Vec<SolverKind> {
    let mut s = vec![SolverKind::Bigvamp];
    if !cfg.channel.is_selection() {
        s.push(SolverKind::Bivamp);
        if cfg.prior_u.is_gaussian() && cfg.prior_v.is_gaussian() {
            s.push(SolverKind::BaselineAmp);
        }
    }
    s
}

fn report(dir: &Path, rows: usize, failures: usize) {
    log::info!("wrote {rows} rows to {}", dir.join("results.csv").display());
    if failures > 0 {
        log::warn!("{failures} trials failed, see {}", dir.join("run.log").display());
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Sweep(c) => {
            let cfg = c.resolve()?;
            let (rows, logs) = run_snr_sweep_detailed(&cfg)?;
            write_run_outputs(&cfg.output_path, &cfg, &rows, &logs)?;
            report(&cfg.output_path, rows.len(), logs.iter().filter(|l| l.failed()).count());
        }
        Command::Compare(c) => {
            let mut cfg = c.resolve()?;
            if c.solvers.is_none() {
                cfg.solvers = applicable_solvers(&cfg);
            }
            let (rows, logs) = run_snr_sweep_detailed(&cfg)?;
            write_run_outputs(&cfg.output_path, &cfg, &rows, &logs)?;
            report(&cfg.output_path, rows.len(), logs.iter().filter(|l| l.failed()).count());
        }
        Command::Phase(c) => {
            let cfg = c.resolve()?;
            let (rows, logs) = run_phase_grid_detailed(&cfg)?;
            write_run_outputs(&cfg.output_path, &cfg, &rows, &logs)?;
            report(&cfg.output_path, rows.len(), logs.iter().filter(|l| l.failed()).count());
        }
        Command::Se { common, mode } => {
            let cfg = common.resolve()?;
            let mode = match mode {
                Some(ModeArg::Bivamp) => SeMode::BiVamp,
                Some(ModeArg::Bigvamp) => SeMode::BigVamp,
                None if cfg.solvers.first() == Some(&SolverKind::Bigvamp) => SeMode::BigVamp,
                None => SeMode::BiVamp,
            };
            let table = se_table(&cfg, mode)?;
            let dir = &cfg.output_path;
            let io = |p: PathBuf| move |source| Error::Io { path: p, source };
            std::fs::create_dir_all(dir).map_err(io(dir.clone()))?;
            std::fs::write(dir.join("se.csv"), table).map_err(io(dir.join("se.csv")))?;
            std::fs::write(dir.join("config.toml"), config_to_toml(&cfg)).map_err(io(dir.join("config.toml")))?;
            log::info!("wrote {}", dir.join("se.csv").display());
        }
        Command::Columns { input } => print!("{}", gnuplot_columns(&read_csv(&input)?)),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
