//! Monte-Carlo sweeps over SNR and rank.

use std::fmt::Write as _;

use rayon::prelude::*;

use super::config::{ExperimentConfig, SolverKind};
use super::csv_io::{format_float, SweepRow};
use crate::error::{Error, Result};
use crate::model::{generate_instance, nrmse, ProblemDims};
use crate::solver::{run_baseline_amp, run_bigvamp, run_bivamp, Termination};
use crate::state_evolution::{run_se, se_predicted_nrmse, SEParams, SeMode};

/// SE iteration budget used for overlays.
pub const SE_T_MAX: usize = 1000;

/// Outcome of a single trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialLog {
    pub solver: SolverKind,
    pub snr_db: f64,
    pub rank: usize,
    pub trial: usize,
    pub seed: u64,
    /// `None` when the trial produced no estimate.
    pub nrmse: Option<f64>,
    pub iterations: usize,
    /// `converged`, `iteration_cap`, `numerical_failure` or `error`.
    pub termination: String,
    pub message: Option<String>,
}

impl TrialLog {
    /// Trials that errored or stopped on a numerical failure.
    pub fn failed(&self) -> bool {
        self.termination == Termination::NumericalFailure.as_str() || self.termination == "error"
    }

    pub fn log_line(&self) -> String {
        let nrmse = self.nrmse.map(format_float).unwrap_or_else(|| "-".into());
        let mut line = format!(
            "solver={} snr_db={} rank={} trial={} seed={} termination={} iterations={} nrmse={}",
            self.solver, self.snr_db, self.rank, self.trial, self.seed, self.termination, self.iterations, nrmse
        );
        if let Some(m) = &self.message {
            let _ = write!(line, " message=\"{}\"", m.replace('"', "'"));
        }
        line
    }
}

fn se_mode(solver: SolverKind) -> SeMode {
    match solver {
        SolverKind::Bigvamp => SeMode::BigVamp,
        SolverKind::Bivamp | SolverKind::BaselineAmp => SeMode::BiVamp,
    }
}

fn run_trial(cfg: &ExperimentConfig, solver: SolverKind, dims: ProblemDims, snr_db: f64, trial: usize) -> TrialLog {
    let seed = cfg.seed_base.wrapping_add(trial as u64);
    let mut log = TrialLog {
        solver,
        snr_db,
        rank: dims.rank,
        trial,
        seed,
        nrmse: None,
        iterations: 0,
        termination: "error".into(),
        message: None,
    };
    let outcome = (|| -> Result<_> {
        let inst = generate_instance(dims, cfg.prior_u, cfg.prior_v, cfg.channel, snr_db, seed)?;
        let obs = inst.observation();
        let mut rc = cfg.run_config;
        rc.seed = seed;
        let res = match solver {
            SolverKind::Bigvamp => run_bigvamp(&obs, &cfg.prior_u, &cfg.prior_v, &dims, &rc, None)?,
            SolverKind::Bivamp => run_bivamp(&obs, &cfg.prior_u, &cfg.prior_v, &dims, &rc, None)?,
            SolverKind::BaselineAmp => run_baseline_amp(&obs, &cfg.prior_u, &cfg.prior_v, &dims, &rc, None)?,
        };
        let e = nrmse(&res.z_hat, &inst.z_true)?;
        Ok((res, e))
    })();
    match outcome {
        Ok((res, e)) => {
            log.nrmse = e.is_finite().then_some(e);
            log.iterations = res.iterations_run;
            log.termination = res.termination.as_str().into();
            log.message = res.failure;
        }
        Err(e) => log.message = Some(e.to_string()),
    }
    log
}

/// SE prediction for one cell, `None` if the recursion breaks down.
pub fn se_overlay(cfg: &ExperimentConfig, solver: SolverKind, dims: &ProblemDims, snr_db: f64) -> Option<f64> {
    let params = SEParams::for_snr(dims, cfg.prior_u, cfg.prior_v, cfg.channel, snr_db);
    let traj = run_se(&params, se_mode(solver), SE_T_MAX).ok()?;
    if traj.truncated {
        return None;
    }
    let v = se_predicted_nrmse(traj.last(), &params);
    v.is_finite().then_some(v)
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn aggregate(cfg: &ExperimentConfig, cell: (SolverKind, f64, usize), logs: &[TrialLog]) -> SweepRow {
    let (solver, snr_db, rank) = cell;
    let errs: Vec<f64> = logs.iter().filter_map(|l| l.nrmse).collect();
    let (nrmse_mean, nrmse_std) = mean_std(&errs);
    let mean_iterations = logs.iter().map(|l| l.iterations as f64).sum::<f64>() / logs.len().max(1) as f64;
    let se_nrmse = if cfg.se_overlay {
        let dims = ProblemDims { rank, ..cfg.dims };
        se_overlay(cfg, solver, &dims, snr_db)
    } else {
        None
    };
    SweepRow {
        preset: cfg.preset.as_str().into(),
        solver: solver.as_str().into(),
        snr_db,
        rank,
        trial_count: logs.len(),
        nrmse_mean,
        nrmse_std,
        se_nrmse,
        mean_iterations,
        failure_count: logs.iter().filter(|l| l.failed()).count(),
        seed_base: cfg.seed_base,
    }
}

fn run_cells(cfg: &ExperimentConfig, mut cells: Vec<(SolverKind, f64, usize)>) -> Result<(Vec<SweepRow>, Vec<TrialLog>)> {
    cfg.validate()?;
    cells.sort_by(|a, b| a.0.as_str().cmp(b.0.as_str()).then(a.1.total_cmp(&b.1)).then(a.2.cmp(&b.2)));
    let tasks: Vec<(usize, usize)> = (0..cells.len()).flat_map(|c| (0..cfg.n_trials).map(move |t| (c, t))).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {} worker threads: {e}", cfg.jobs)))?;
    let logs: Vec<TrialLog> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(c, t)| {
                let (solver, snr, rank) = cells[c];
                let dims = ProblemDims { rank, ..cfg.dims };
                run_trial(cfg, solver, dims, snr, t)
            })
            .collect()
    });
    let rows = pool.install(|| {
        cells
            .par_iter()
            .enumerate()
            .map(|(c, &cell)| aggregate(cfg, cell, &logs[c * cfg.n_trials..(c + 1) * cfg.n_trials]))
            .collect()
    });
    Ok((rows, logs))
}

/// Every solver at every SNR with the configured rank, plus per-trial logs.
pub fn run_snr_sweep_detailed(cfg: &ExperimentConfig) -> Result<(Vec<SweepRow>, Vec<TrialLog>)> {
    let cells = cfg
        .solvers
        .iter()
        .flat_map(|&s| cfg.snr_grid_db.iter().map(move |&snr| (s, snr, cfg.dims.rank)))
        .collect();
    run_cells(cfg, cells)
}

pub fn run_snr_sweep(cfg: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    run_snr_sweep_detailed(cfg).map(|(rows, _)| rows)
}

/// BiG-VAMP over the `snr_grid_db × rank_grid` cross product, plus per-trial logs.
pub fn run_phase_grid_detailed(cfg: &ExperimentConfig) -> Result<(Vec<SweepRow>, Vec<TrialLog>)> {
    let cells = cfg
        .snr_grid_db
        .iter()
        .flat_map(|&snr| cfg.rank_grid.iter().map(move |&r| (SolverKind::Bigvamp, snr, r)))
        .collect();
    run_cells(cfg, cells)
}

pub fn run_phase_grid(cfg: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    run_phase_grid_detailed(cfg).map(|(rows, _)| rows)
}

/// SE trajectories for every SNR of the grid, as CSV text with columns
/// `snr_db,iteration,gamma_u_post_minus,gamma_v_post_minus,gamma_u_post_plus,gamma_v_post_plus,gamma_z_post_minus,gamma_z_post_plus,se_nrmse`.
pub fn se_table(cfg: &ExperimentConfig, mode: SeMode) -> Result<String> {
    cfg.validate()?;
    let mut out = String::from(
        "snr_db,iteration,gamma_u_post_minus,gamma_v_post_minus,gamma_u_post_plus,gamma_v_post_plus,gamma_z_post_minus,gamma_z_post_plus,se_nrmse\n",
    );
    let opt = |x: Option<f64>| x.map(format_float).unwrap_or_default();
    for &snr in &cfg.snr_grid_db {
        let params = SEParams::for_snr(&cfg.dims, cfg.prior_u, cfg.prior_v, cfg.channel, snr);
        let traj = run_se(&params, mode, SE_T_MAX)?;
        for (t, s) in traj.states.iter().enumerate() {
            let _ = writeln!(
                out,
                "{},{t},{},{},{},{},{},{},{}",
                format_float(snr),
                format_float(s.gamma_u_post_minus),
                format_float(s.gamma_v_post_minus),
                format_float(s.gamma_u_post_plus),
                format_float(s.gamma_v_post_plus),
                opt(s.gamma_z_post_minus),
                opt(s.gamma_z_post_plus),
                format_float(se_predicted_nrmse(s, &params)),
            );
        }
    }
    Ok(out)
}
