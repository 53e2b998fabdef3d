//! Experiment configuration: presets, a flat TOML file format and CLI
//! overrides.
//!
//! Resolution order: preset defaults, then file keys, then CLI flags.
//!
//! File keys (all optional):
//!
//! | key | type |
//! |---|---|
//! | `preset` | one of the [`Preset`] names |
//! | `n_rows_u`, `n_rows_v`, `rank` | integers |
//! | `prior_u`, `prior_v` | `"gaussian"`, `"binary"`, `"bernoulli_gaussian"` |
//! | `prior_u_mean`, `prior_u_var`, `prior_u_rho` (same for `v`) | floats |
//! | `channel` | `"awgn"` or `"selection"` |
//! | `selection_rate` | float in (0, 1] |
//! | `se_scaling` | bool |
//! | `snr_grid_db` | array of floats |
//! | `rank_grid` | array of integers |
//! | `n_trials`, `seed`, `jobs` | integers |
//! | `solvers` | array of `"bigvamp"`, `"bivamp"`, `"baseline_amp"` |
//! | `se_overlay`, `full_scale` | bool |
//! | `output` | string |
//! | `t_max`, `xi`, `damping_rho`, `gamma_min`, `gamma_max`, `init_scale` | numbers |
//! | `onsager` | `"nishimori"` or `"literal"` |
//! | `z_average` | `"harmonic"` or `"arithmetic"` |
//! | `schedule` | `"parallel"` or `"sequential"` |
//! | `init` | `"random"` or `"zero"` |

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ChannelSpec, InitMode, OnsagerForm, PriorSpec, ProblemDims, RunConfig, Schedule, ZAverage};

/// Named experiment parameter sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    DictionaryLearning,
    MatrixFactorization,
    MatrixCompletion,
    DictionaryLearningBinarySmall,
    DictionaryLearningBinaryLarge,
    Custom,
}

impl Preset {
    pub const ALL: [Preset; 6] = [
        Preset::DictionaryLearning,
        Preset::MatrixFactorization,
        Preset::MatrixCompletion,
        Preset::DictionaryLearningBinarySmall,
        Preset::DictionaryLearningBinaryLarge,
        Preset::Custom,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Preset::DictionaryLearning => "dictionary_learning",
            Preset::MatrixFactorization => "matrix_factorization",
            Preset::MatrixCompletion => "matrix_completion",
            Preset::DictionaryLearningBinarySmall => "dictionary_learning_binary_small",
            Preset::DictionaryLearningBinaryLarge => "dictionary_learning_binary_large",
            Preset::Custom => "custom",
        }
    }

    /// `(N, M, r)` at full scale and at desk scale.
    pub fn sizes(&self) -> ((usize, usize, usize), (usize, usize, usize)) {
        match self {
            Preset::DictionaryLearning => ((1000, 1000, 20), (200, 200, 4)),
            Preset::MatrixFactorization => ((1000, 200, 30), (200, 40, 6)),
            Preset::MatrixCompletion => ((1000, 500, 30), (300, 150, 5)),
            Preset::DictionaryLearningBinarySmall => ((100, 100, 5), (100, 100, 5)),
            Preset::DictionaryLearningBinaryLarge => ((500, 500, 25), (400, 400, 20)),
            Preset::Custom => ((200, 100, 10), (200, 100, 10)),
        }
    }

    pub fn priors(&self) -> (PriorSpec, PriorSpec) {
        let gauss = PriorSpec::Gaussian { mean: 0.0, var: 1.0 };
        let bg = PriorSpec::BernoulliGaussian { rho: 0.05, var: 1.0 };
        match self {
            Preset::DictionaryLearning => (gauss, bg),
            Preset::MatrixFactorization | Preset::MatrixCompletion => (PriorSpec::Binary, gauss),
            Preset::DictionaryLearningBinarySmall | Preset::DictionaryLearningBinaryLarge => (PriorSpec::Binary, bg),
            Preset::Custom => (gauss, gauss),
        }
    }

    pub fn channel(&self) -> ChannelSpec {
        match self {
            Preset::MatrixCompletion => ChannelSpec::selection(0.2, 1.0),
            _ => ChannelSpec::awgn(1.0),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Preset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .iter()
            .find(|p| p.as_str() == s)
            .copied()
            .ok_or_else(|| Error::Config(format!("unknown preset '{s}'")))
    }
}

/// Solvers runnable from the harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    Bigvamp,
    Bivamp,
    BaselineAmp,
}

impl SolverKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolverKind::Bigvamp => "bigvamp",
            SolverKind::Bivamp => "bivamp",
            SolverKind::BaselineAmp => "baseline_amp",
        }
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SolverKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bigvamp" => Ok(SolverKind::Bigvamp),
            "bivamp" => Ok(SolverKind::Bivamp),
            "baseline_amp" => Ok(SolverKind::BaselineAmp),
            _ => Err(Error::Config(format!("unknown solver '{s}'"))),
        }
    }
}

/// A fully resolved experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub preset: Preset,
    pub dims: ProblemDims,
    pub prior_u: PriorSpec,
    pub prior_v: PriorSpec,
    pub channel: ChannelSpec,
    pub snr_grid_db: Vec<f64>,
    pub rank_grid: Vec<usize>,
    pub n_trials: usize,
    pub run_config: RunConfig,
    pub solvers: Vec<SolverKind>,
    pub se_overlay: bool,
    pub output_path: PathBuf,
    pub seed_base: u64,
    pub jobs: usize,
    pub full_scale: bool,
}

impl ExperimentConfig {
    /// Defaults of a preset.
    pub fn preset(preset: Preset, full_scale: bool) -> Self {
        let (full, desk) = preset.sizes();
        let (n, m, r) = if full_scale { full } else { desk };
        let (prior_u, prior_v) = preset.priors();
        let channel = preset.channel();
        let rank_grid = if full_scale { vec![1, 10, 25, 50, 75, 100] } else { vec![1, 5, 10, 20, 30] };
        let solvers = if channel.is_selection() { vec![SolverKind::Bigvamp] } else { vec![SolverKind::Bivamp] };
        Self {
            preset,
            dims: ProblemDims::new(n, m, r).expect("preset sizes are valid"),
            prior_u,
            prior_v,
            channel,
            snr_grid_db: vec![0.0, 10.0, 20.0, 30.0, 40.0],
            rank_grid,
            n_trials: if full_scale { 100 } else { 10 },
            run_config: RunConfig::for_problem(&prior_u, &prior_v, &channel),
            solvers,
            se_overlay: false,
            output_path: PathBuf::from("out"),
            seed_base: 0,
            jobs: 1,
            full_scale,
        }
    }

    /// Checks internal consistency.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.n_trials == 0 {
            problems.push("n_trials must be at least 1".to_string());
        }
        if self.snr_grid_db.is_empty() {
            problems.push("snr_grid_db must not be empty".to_string());
        }
        if self.snr_grid_db.iter().any(|s| !s.is_finite()) {
            problems.push("snr_grid_db entries must be finite".to_string());
        }
        if self.rank_grid.is_empty() {
            problems.push("rank_grid must not be empty".to_string());
        }
        let max_rank = self.dims.n_rows_u.min(self.dims.n_rows_v);
        if let Some(r) = self.rank_grid.iter().find(|&&r| r == 0 || r > max_rank) {
            problems.push(format!("rank_grid entry {r} outside 1..={max_rank}"));
        }
        if self.solvers.is_empty() {
            problems.push("solvers must not be empty".to_string());
        }
        if self.jobs == 0 {
            problems.push("jobs must be at least 1".to_string());
        }
        let completion = self.preset == Preset::MatrixCompletion;
        if completion && !self.channel.is_selection() {
            problems.push("preset matrix_completion conflicts with channel awgn".to_string());
        }
        if !completion && self.preset != Preset::Custom && self.channel.is_selection() {
            problems.push(format!("preset {} conflicts with channel selection", self.preset));
        }
        if self.channel.is_selection() {
            for s in &self.solvers {
                if *s != SolverKind::Bigvamp {
                    problems.push(format!("solver {s} needs a fully observed channel, but channel is selection"));
                }
            }
        }
        if self.solvers.contains(&SolverKind::BaselineAmp) && !(self.prior_u.is_gaussian() && self.prior_v.is_gaussian()) {
            problems.push("solver baseline_amp needs Gaussian priors on both factors".to_string());
        }
        for e in [self.prior_u.validate(), self.prior_v.validate(), self.run_config.validate()] {
            if let Err(e) = e {
                problems.push(e.to_string());
            }
        }
        let s = self.channel.selection_rate();
        if !(s > 0.0 && s <= 1.0) {
            problems.push(format!("selection_rate {s} outside (0, 1]"));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems.join("; ")))
        }
    }
}

/// Flat key-value file schema. Every key is optional; unknown keys are rejected.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub full_scale: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_rows_u: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_rows_v: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rank: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prior_u: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prior_u_mean: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prior_u_var: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prior_u_rho: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prior_v: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prior_v_mean: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prior_v_var: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prior_v_rho: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub channel: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub selection_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub se_scaling: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snr_grid_db: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rank_grid: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_trials: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solvers: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub se_overlay: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jobs: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_max: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub xi: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub damping_rho: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub onsager: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z_average: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub schedule: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub init: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub init_scale: Option<f64>,
}

/// Values given on the command line; `None` means "not given".
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CliOverrides {
    pub preset: Option<String>,
    pub snr_grid_db: Option<Vec<f64>>,
    pub rank_grid: Option<Vec<usize>>,
    pub n_trials: Option<usize>,
    pub solvers: Option<Vec<String>>,
    pub se_overlay: Option<bool>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub output: Option<String>,
    pub full_scale: Option<bool>,
}

fn parse_enum<T>(key: &str, value: &str, options: &[(&str, T)]) -> Result<T>
where
    T: Copy,
{
    options.iter().find(|(name, _)| *name == value).map(|(_, v)| *v).ok_or_else(|| {
        let names: Vec<&str> = options.iter().map(|(n, _)| *n).collect();
        Error::Config(format!("{key} = '{value}' is not one of {names:?}"))
    })
}

fn resolve_prior(
    base: PriorSpec,
    kind: Option<&str>,
    mean: Option<f64>,
    var: Option<f64>,
    rho: Option<f64>,
    side: char,
) -> Result<PriorSpec> {
    let kind = match kind {
        Some(k) => k.to_string(),
        None => match base {
            PriorSpec::Gaussian { .. } => "gaussian".into(),
            PriorSpec::BernoulliGaussian { .. } => "bernoulli_gaussian".into(),
            PriorSpec::Binary => "binary".into(),
        },
    };
    let (base_mean, base_var, base_rho) = match base {
        PriorSpec::Gaussian { mean, var } => (mean, var, 1.0),
        PriorSpec::BernoulliGaussian { rho, var } => (0.0, var, rho),
        PriorSpec::Binary => (0.0, 1.0, 1.0),
    };
    let prior = match kind.as_str() {
        "gaussian" => {
            if rho.is_some() {
                return Err(Error::Config(format!("prior_{side}_rho given for a Gaussian prior")));
            }
            PriorSpec::Gaussian { mean: mean.unwrap_or(base_mean), var: var.unwrap_or(base_var) }
        }
        "bernoulli_gaussian" => {
            if mean.is_some() {
                return Err(Error::Config(format!("prior_{side}_mean given for a Bernoulli-Gaussian prior")));
            }
            let default_rho = if matches!(base, PriorSpec::BernoulliGaussian { .. }) { base_rho } else { 0.05 };
            PriorSpec::BernoulliGaussian { rho: rho.unwrap_or(default_rho), var: var.unwrap_or(base_var) }
        }
        "binary" => {
            if mean.is_some() || var.is_some() || rho.is_some() {
                return Err(Error::Config(format!("prior_{side} = 'binary' takes no parameters")));
            }
            PriorSpec::Binary
        }
        other => {
            return Err(Error::Config(format!(
                "prior_{side} = '{other}' is not one of [\"gaussian\", \"bernoulli_gaussian\", \"binary\"]"
            )))
        }
    };
    prior.validate()?;
    Ok(prior)
}

/// Parses the flat file format.
pub fn parse_file_config(text: &str) -> Result<FileConfig> {
    toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
}

/// Merges preset defaults, an optional file and CLI overrides.
pub fn resolve_config(cli: &CliOverrides, file: &FileConfig) -> Result<ExperimentConfig> {
    let preset: Preset = cli.preset.as_deref().or(file.preset.as_deref()).unwrap_or("custom").parse()?;
    let full_scale = cli.full_scale.or(file.full_scale).unwrap_or(false);
    let mut cfg = ExperimentConfig::preset(preset, full_scale);

    let n = file.n_rows_u.unwrap_or(cfg.dims.n_rows_u);
    let m = file.n_rows_v.unwrap_or(cfg.dims.n_rows_v);
    let r = file.rank.unwrap_or(cfg.dims.rank);
    cfg.dims = ProblemDims::new(n, m, r).map_err(|e| Error::Config(e.to_string()))?;

    let priors_changed = file.prior_u.is_some() || file.prior_v.is_some();
    cfg.prior_u = resolve_prior(
        cfg.prior_u,
        file.prior_u.as_deref(),
        file.prior_u_mean,
        file.prior_u_var,
        file.prior_u_rho,
        'u',
    )?;
    cfg.prior_v = resolve_prior(
        cfg.prior_v,
        file.prior_v.as_deref(),
        file.prior_v_mean,
        file.prior_v_var,
        file.prior_v_rho,
        'v',
    )?;
    let se_scaling = file.se_scaling.unwrap_or(cfg.channel.se_scaling);
    let channel_kind = file.channel.as_deref().unwrap_or(if cfg.channel.is_selection() { "selection" } else { "awgn" });
    cfg.channel = match channel_kind {
        "awgn" => {
            if file.selection_rate.is_some() {
                return Err(Error::Config("selection_rate given with channel = 'awgn'".into()));
            }
            ChannelSpec::awgn(1.0)
        }
        "selection" => ChannelSpec::selection(file.selection_rate.unwrap_or(cfg.channel.selection_rate().min(0.2)), 1.0),
        other => return Err(Error::Config(format!("channel = '{other}' is not one of [\"awgn\", \"selection\"]"))),
    }
    .with_se_scaling(se_scaling);
    if priors_changed || file.channel.is_some() {
        cfg.run_config.damping_rho = RunConfig::for_problem(&cfg.prior_u, &cfg.prior_v, &cfg.channel).damping_rho;
    }
    if file.channel.is_some() && file.solvers.is_none() && cli.solvers.is_none() {
        cfg.solvers = if cfg.channel.is_selection() { vec![SolverKind::Bigvamp] } else { vec![SolverKind::Bivamp] };
    }

    if let Some(v) = &file.snr_grid_db {
        cfg.snr_grid_db = v.clone();
    }
    if let Some(v) = &file.rank_grid {
        cfg.rank_grid = v.clone();
    }
    if let Some(v) = file.n_trials {
        cfg.n_trials = v;
    }
    if let Some(v) = &file.solvers {
        cfg.solvers = v.iter().map(|s| s.parse()).collect::<Result<_>>()?;
    }
    if let Some(v) = file.se_overlay {
        cfg.se_overlay = v;
    }
    if let Some(v) = file.seed {
        cfg.seed_base = v;
    }
    if let Some(v) = file.jobs {
        cfg.jobs = v;
    }
    if let Some(v) = &file.output {
        cfg.output_path = PathBuf::from(v);
    }

    let rc = &mut cfg.run_config;
    if let Some(v) = file.t_max {
        rc.t_max = v;
    }
    if let Some(v) = file.xi {
        rc.xi = v;
    }
    if let Some(v) = file.damping_rho {
        rc.damping_rho = v;
    }
    if let Some(v) = file.gamma_min {
        rc.gamma_min = v;
    }
    if let Some(v) = file.gamma_max {
        rc.gamma_max = v;
    }
    if let Some(v) = file.init_scale {
        rc.init_scale = v;
    }
    if let Some(v) = &file.onsager {
        rc.onsager = parse_enum("onsager", v, &[("nishimori", OnsagerForm::Nishimori), ("literal", OnsagerForm::Literal)])?;
    }
    if let Some(v) = &file.z_average {
        rc.z_average = parse_enum("z_average", v, &[("harmonic", ZAverage::Harmonic), ("arithmetic", ZAverage::Arithmetic)])?;
    }
    if let Some(v) = &file.schedule {
        rc.schedule = parse_enum("schedule", v, &[("parallel", Schedule::Parallel), ("sequential", Schedule::Sequential)])?;
    }
    if let Some(v) = &file.init {
        rc.init = parse_enum("init", v, &[("random", InitMode::Random), ("zero", InitMode::Zero)])?;
    }

    if let Some(v) = &cli.snr_grid_db {
        cfg.snr_grid_db = v.clone();
    }
    if let Some(v) = &cli.rank_grid {
        cfg.rank_grid = v.clone();
    }
    if let Some(v) = cli.n_trials {
        cfg.n_trials = v;
    }
    if let Some(v) = &cli.solvers {
        cfg.solvers = v.iter().map(|s| s.parse()).collect::<Result<_>>()?;
    }
    if let Some(v) = cli.se_overlay {
        cfg.se_overlay = v;
    }
    if let Some(v) = cli.seed {
        cfg.seed_base = v;
    }
    if let Some(v) = cli.jobs {
        cfg.jobs = v;
    }
    if let Some(v) = &cli.output {
        cfg.output_path = PathBuf::from(v);
    }
    cfg.run_config.seed = cfg.seed_base;
    cfg.validate()?;
    Ok(cfg)
}

/// Reads the optional config file and resolves it against the CLI values.
pub fn parse_config(cli: &CliOverrides, config_file: Option<&Path>) -> Result<ExperimentConfig> {
    let file = match config_file {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
            parse_file_config(&text)?
        }
        None => FileConfig::default(),
    };
    resolve_config(cli, &file)
}

fn prior_fields(p: &PriorSpec) -> (String, Option<f64>, Option<f64>, Option<f64>) {
    match *p {
        PriorSpec::Gaussian { mean, var } => ("gaussian".into(), Some(mean), Some(var), None),
        PriorSpec::BernoulliGaussian { rho, var } => ("bernoulli_gaussian".into(), None, Some(var), Some(rho)),
        PriorSpec::Binary => ("binary".into(), None, None, None),
    }
}

/// Every resolved value as a [`FileConfig`].
pub fn to_file_config(cfg: &ExperimentConfig) -> FileConfig {
    let (pu, pu_mean, pu_var, pu_rho) = prior_fields(&cfg.prior_u);
    let (pv, pv_mean, pv_var, pv_rho) = prior_fields(&cfg.prior_v);
    let rc = &cfg.run_config;
    let name = |s: &str| Some(s.to_string());
    FileConfig {
        preset: name(cfg.preset.as_str()),
        full_scale: Some(cfg.full_scale),
        n_rows_u: Some(cfg.dims.n_rows_u),
        n_rows_v: Some(cfg.dims.n_rows_v),
        rank: Some(cfg.dims.rank),
        prior_u: Some(pu),
        prior_u_mean: pu_mean,
        prior_u_var: pu_var,
        prior_u_rho: pu_rho,
        prior_v: Some(pv),
        prior_v_mean: pv_mean,
        prior_v_var: pv_var,
        prior_v_rho: pv_rho,
        channel: name(if cfg.channel.is_selection() { "selection" } else { "awgn" }),
        selection_rate: cfg.channel.is_selection().then(|| cfg.channel.selection_rate()),
        se_scaling: Some(cfg.channel.se_scaling),
        snr_grid_db: Some(cfg.snr_grid_db.clone()),
        rank_grid: Some(cfg.rank_grid.clone()),
        n_trials: Some(cfg.n_trials),
        solvers: Some(cfg.solvers.iter().map(|s| s.as_str().to_string()).collect()),
        se_overlay: Some(cfg.se_overlay),
        seed: Some(cfg.seed_base),
        jobs: Some(cfg.jobs),
        output: Some(cfg.output_path.to_string_lossy().into_owned()),
        t_max: Some(rc.t_max),
        xi: Some(rc.xi),
        damping_rho: Some(rc.damping_rho),
        gamma_min: Some(rc.gamma_min),
        gamma_max: Some(rc.gamma_max),
        onsager: name(match rc.onsager {
            OnsagerForm::Nishimori => "nishimori",
            OnsagerForm::Literal => "literal",
        }),
        z_average: name(match rc.z_average {
            ZAverage::Harmonic => "harmonic",
            ZAverage::Arithmetic => "arithmetic",
        }),
        schedule: name(match rc.schedule {
            Schedule::Parallel => "parallel",
            Schedule::Sequential => "sequential",
        }),
        init: name(match rc.init {
            InitMode::Random => "random",
            InitMode::Zero => "zero",
        }),
        init_scale: Some(rc.init_scale),
    }
}

/// Resolved configuration in the file format; feeding it back through
/// [`parse_config`] reproduces `cfg`.
pub fn config_to_toml(cfg: &ExperimentConfig) -> String {
    toml::to_string(&to_file_config(cfg)).expect("flat config always serializes")
}
