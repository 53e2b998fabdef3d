//! Python module `bigvamp`: instance generation, the three solvers, the state
//! evolution and SNR sweeps. Matrices cross the boundary as lists of rows.

use nalgebra::DMatrix;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use bigvamp::experiments::{run_snr_sweep, ExperimentConfig, Preset, SolverKind, SweepRow};
use bigvamp::model::{self, ChannelSpec, PriorSpec, ProblemDims, RunConfig};
use bigvamp::solver::{run_baseline_amp, run_bigvamp, run_bivamp, RunResult};
use bigvamp::state_evolution::{run_se, se_predicted_nrmse, SEParams, SeMode};

fn err(e: bigvamp::Error) -> PyErr {
    match e {
        bigvamp::Error::Numerical(_) | bigvamp::Error::NotPositiveDefinite { .. } | bigvamp::Error::Quadrature { .. } => {
            PyRuntimeError::new_err(e.to_string())
        }
        _ => PyValueError::new_err(e.to_string()),
    }
}

/// `"gaussian"`, `"binary"` or `"bernoulli_gaussian"`.
fn parse_prior(name: &str, rho: f64) -> PyResult<PriorSpec> {
    match name {
        "gaussian" => Ok(PriorSpec::Gaussian { mean: 0.0, var: 1.0 }),
        "binary" => Ok(PriorSpec::Binary),
        "bernoulli_gaussian" => Ok(PriorSpec::BernoulliGaussian { rho, var: 1.0 }),
        other => Err(PyValueError::new_err(format!("unknown prior '{other}'"))),
    }
}

fn parse_channel(name: &str, selection_rate: f64, se_scaling: bool) -> PyResult<ChannelSpec> {
    let ch = match name {
        "awgn" => ChannelSpec::awgn(1.0),
        "selection" => ChannelSpec::selection(selection_rate, 1.0),
        other => return Err(PyValueError::new_err(format!("unknown channel '{other}'"))),
    };
    Ok(ch.with_se_scaling(se_scaling))
}

pub fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// A synthetic problem with its ground truth.
#[pyclass(module = "bigvamp", frozen)]
pub struct Instance {
    inner: model::Instance,
    prior_u: PriorSpec,
    prior_v: PriorSpec,
}

#[pymethods]
impl Instance {
    #[new]
    #[pyo3(signature = (n, m, rank, snr_db, seed=0, prior_u="gaussian", prior_v="gaussian", rho=0.05, channel="awgn", selection_rate=0.2, se_scaling=false))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        n: usize,
        m: usize,
        rank: usize,
        snr_db: f64,
        seed: u64,
        prior_u: &str,
        prior_v: &str,
        rho: f64,
        channel: &str,
        selection_rate: f64,
        se_scaling: bool,
    ) -> PyResult<Self> {
        let dims = ProblemDims::new(n, m, rank).map_err(err)?;
        let (pu, pv) = (parse_prior(prior_u, rho)?, parse_prior(prior_v, rho)?);
        let ch = parse_channel(channel, selection_rate, se_scaling)?;
        let inner = model::generate_instance(dims, pu, pv, ch, snr_db, seed).map_err(err)?;
        Ok(Self { inner, prior_u: pu, prior_v: pv })
    }

    #[getter]
    fn shape(&self) -> (usize, usize, usize) {
        let d = self.inner.dims;
        (d.n_rows_u, d.n_rows_v, d.rank)
    }

    #[getter]
    fn noise_precision(&self) -> f64 {
        self.inner.noise_precision()
    }

    #[getter]
    fn z_true(&self) -> Vec<Vec<f64>> {
        to_rows(&self.inner.z_true)
    }

    #[getter]
    fn y(&self) -> Vec<Vec<f64>> {
        to_rows(&self.inner.y_obs)
    }

    #[getter]
    fn mask(&self) -> Vec<Vec<bool>> {
        self.inner.mask.row_iter().map(|r| r.iter().copied().collect()).collect()
    }

    /// Runs `"bigvamp"`, `"bivamp"` or `"baseline_amp"` with the default
    /// controls for the instance's priors and channel.
    #[pyo3(signature = (solver="bigvamp", t_max=None, damping=None, seed=None))]
    fn solve(&self, solver: &str, t_max: Option<usize>, damping: Option<f64>, seed: Option<u64>) -> PyResult<Solution> {
        let mut cfg = RunConfig::for_problem(&self.prior_u, &self.prior_v, &self.inner.channel);
        cfg.seed = seed.unwrap_or(self.inner.seed);
        if let Some(t) = t_max {
            cfg.t_max = t;
        }
        if let Some(d) = damping {
            cfg.damping_rho = d;
        }
        let kind: SolverKind = solver.parse().map_err(err)?;
        let obs = self.inner.observation();
        let dims = &self.inner.dims;
        let (pu, pv) = (&self.prior_u, &self.prior_v);
        let res = match kind {
            SolverKind::Bigvamp => run_bigvamp(&obs, pu, pv, dims, &cfg, Some(&self.inner.z_true)),
            SolverKind::Bivamp => run_bivamp(&obs, pu, pv, dims, &cfg, Some(&self.inner.z_true)),
            SolverKind::BaselineAmp => run_baseline_amp(&obs, pu, pv, dims, &cfg, Some(&self.inner.z_true)),
        }
        .map_err(err)?;
        let nrmse = model::nrmse(&res.z_hat, &self.inner.z_true).map_err(err)?;
        Ok(Solution { res, nrmse })
    }
}

/// Output of [`Instance::solve`].
#[pyclass(module = "bigvamp", frozen)]
pub struct Solution {
    res: RunResult,
    nrmse: f64,
}

#[pymethods]
impl Solution {
    #[getter]
    fn nrmse(&self) -> f64 {
        self.nrmse
    }

    #[getter]
    fn iterations(&self) -> usize {
        self.res.iterations_run
    }

    #[getter]
    fn termination(&self) -> &'static str {
        self.res.termination.as_str()
    }

    /// Per-iteration NRMSE against the ground truth.
    #[getter]
    fn nrmse_history(&self) -> Vec<f64> {
        self.res.history.iter().filter_map(|h| h.nrmse_z).collect()
    }

    #[getter]
    fn z_hat(&self) -> Vec<Vec<f64>> {
        to_rows(&self.res.z_hat)
    }

    #[getter]
    fn u_hat(&self) -> Vec<Vec<f64>> {
        to_rows(&self.res.u_hat)
    }

    #[getter]
    fn v_hat(&self) -> Vec<Vec<f64>> {
        to_rows(&self.res.v_hat)
    }

    fn __repr__(&self) -> String {
        format!("Solution(nrmse={:.4e}, iterations={}, termination='{}')", self.nrmse, self.res.iterations_run, self.termination())
    }
}

/// Predicted NRMSE after each step of the state evolution.
#[pyfunction]
#[pyo3(signature = (n, m, rank, snr_db, mode="bivamp", prior_u="gaussian", prior_v="gaussian", rho=0.05, channel="awgn", selection_rate=0.2, se_scaling=false, t_max=1000))]
#[allow(clippy::too_many_arguments)]
fn state_evolution(
    n: usize,
    m: usize,
    rank: usize,
    snr_db: f64,
    mode: &str,
    prior_u: &str,
    prior_v: &str,
    rho: f64,
    channel: &str,
    selection_rate: f64,
    se_scaling: bool,
    t_max: usize,
) -> PyResult<(Vec<f64>, bool)> {
    let dims = ProblemDims::new(n, m, rank).map_err(err)?;
    let mode = match mode {
        "bivamp" => SeMode::BiVamp,
        "bigvamp" => SeMode::BigVamp,
        other => return Err(PyValueError::new_err(format!("unknown mode '{other}'"))),
    };
    let ch = parse_channel(channel, selection_rate, se_scaling)?;
    let p = SEParams::for_snr(&dims, parse_prior(prior_u, rho)?, parse_prior(prior_v, rho)?, ch, snr_db);
    let tr = run_se(&p, mode, t_max).map_err(err)?;
    Ok((tr.states.iter().map(|s| se_predicted_nrmse(s, &p)).collect(), tr.converged))
}

fn row_dict<'py>(py: Python<'py>, r: &SweepRow) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("preset", &r.preset)?;
    d.set_item("solver", &r.solver)?;
    d.set_item("snr_db", r.snr_db)?;
    d.set_item("rank", r.rank)?;
    d.set_item("trial_count", r.trial_count)?;
    d.set_item("nrmse_mean", r.nrmse_mean)?;
    d.set_item("nrmse_std", r.nrmse_std)?;
    d.set_item("se_nrmse", r.se_nrmse)?;
    d.set_item("mean_iterations", r.mean_iterations)?;
    d.set_item("failure_count", r.failure_count)?;
    d.set_item("seed_base", r.seed_base)?;
    Ok(d)
}

/// Monte-Carlo SNR sweep over a preset; returns one dict per row.
#[pyfunction]
#[pyo3(signature = (preset, snr_db, n_trials=10, solvers=None, se_overlay=false, seed=0, jobs=1))]
#[allow(clippy::too_many_arguments)]
fn sweep<'py>(
    py: Python<'py>,
    preset: &str,
    snr_db: Vec<f64>,
    n_trials: usize,
    solvers: Option<Vec<String>>,
    se_overlay: bool,
    seed: u64,
    jobs: usize,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let preset: Preset = preset.parse().map_err(err)?;
    let mut cfg = ExperimentConfig::preset(preset, false);
    cfg.snr_grid_db = snr_db;
    cfg.n_trials = n_trials;
    cfg.se_overlay = se_overlay;
    cfg.seed_base = seed;
    cfg.run_config.seed = seed;
    cfg.jobs = jobs;
    if let Some(s) = solvers {
        cfg.solvers = s.iter().map(|x| x.parse()).collect::<Result<_, _>>().map_err(err)?;
    }
    let rows = py.detach(|| run_snr_sweep(&cfg)).map_err(err)?;
    rows.iter().map(|r| row_dict(py, r)).collect()
}

#[pymodule]
#[pyo3(name = "bigvamp")]
fn bigvamp_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Instance>()?;
    m.add_class::<Solution>()?;
    m.add_function(wrap_pyfunction!(state_evolution, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    Ok(())
}
