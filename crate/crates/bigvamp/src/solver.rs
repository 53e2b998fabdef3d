//! Iteration drivers: BiG-VAMP, its Bi-VAMP specialization and the
//! Gaussian-prior AMP baseline.
//!
//! Solvers work in factor units: the observation is divided by the scale
//! `c` of [`Observation::z_scale`] and the noise precision multiplied by
//! `c²`. Returned `z_hat` is in observation units.

use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::denoisers::{denoise_output_unchecked, denoise_rows};
use crate::error::{Error, Result};
use crate::message_core::{
    bilmmse_posterior_natural, bilmmse_side, extrinsic_precision, output_posterior_z_parts, posterior_covariance,
    scalarize_covariance, Damp,
};
use crate::model::{
    nrmse, stream_rng, streams, ChannelKind, InitMode, Observation, OnsagerForm, PriorSpec, ProblemDims, RunConfig,
    Schedule, ZAverage,
};

/// Why the iteration stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    IterationCap,
    NumericalFailure,
}

impl Termination {
    pub fn as_str(&self) -> &'static str {
        match self {
            Termination::Converged => "converged",
            Termination::IterationCap => "iteration_cap",
            Termination::NumericalFailure => "numerical_failure",
        }
    }
}

/// Per-iteration diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterRecord {
    /// Present when ground truth was supplied.
    pub nrmse_z: Option<f64>,
    pub gamma_u_post_minus: f64,
    pub gamma_v_post_minus: f64,
    /// Absent for solvers without an output step.
    pub gamma_z_post_minus: Option<f64>,
    /// Precision clips in this iteration.
    pub clips: usize,
    /// Squared relative change of the denoised factors.
    pub rel_change: f64,
}

/// Final estimates and history of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub u_hat: DMatrix<f64>,
    pub v_hat: DMatrix<f64>,
    pub z_hat: DMatrix<f64>,
    pub iterations_run: usize,
    pub termination: Termination,
    pub history: Vec<IterRecord>,
    /// Message of the error that triggered a numerical failure.
    pub failure: Option<String>,
}

fn check_shapes(obs: &Observation, dims: &ProblemDims) -> Result<()> {
    let want = (dims.n_rows_u, dims.n_rows_v);
    if obs.y.shape() != want || obs.mask.shape() != want {
        return Err(Error::Dimension(format!(
            "observation is {:?}, expected {:?}",
            obs.y.shape(),
            want
        )));
    }
    if !(obs.z_scale > 0.0) {
        return Err(Error::Parameter("z_scale must be positive".into()));
    }
    obs.channel.validate()
}

fn init_means(rows: usize, r: usize, prior: &PriorSpec, config: &RunConfig, stream: u64) -> DMatrix<f64> {
    match config.init {
        InitMode::Zero => DMatrix::zeros(rows, r),
        InitMode::Random => {
            let sd = prior.second_moment().sqrt() * config.init_scale;
            let mut rng = stream_rng(config.seed, stream);
            let data: Vec<f64> = (0..rows * r).map(|_| {
                let g: f64 = StandardNormal.sample(&mut rng);
                sd * g
            }).collect();
            DMatrix::from_row_slice(rows, r, &data)
        }
    }
}

fn all_finite(m: &DMatrix<f64>) -> bool {
    m.iter().all(|x| x.is_finite())
}

/// Natural-parameter form of an isotropic Gaussian message: `(γ, h = γ·m)`.
struct Natural {
    prec: f64,
    h: DMatrix<f64>,
}

impl Natural {
    fn mean(&self) -> DMatrix<f64> {
        &self.h / self.prec
    }
}

/// One factor side of the iteration (U or V).
struct Side {
    prior: PriorSpec,
    ext_plus: Natural,
    post_minus: DMatrix<f64>,
    cov: DMatrix<f64>,
    prev: DMatrix<f64>,
    b: Option<DMatrix<f64>>,
    lambda: Option<DMatrix<f64>>,
    post_plus: DMatrix<f64>,
    gamma_post_minus: f64,
    gamma_ext_minus: f64,
    gamma_post_plus: f64,
    ext_minus: DMatrix<f64>,
}

impl Side {
    fn new(rows: usize, r: usize, prior: PriorSpec, config: &RunConfig, stream: u64) -> Self {
        let s2 = prior.second_moment();
        let m0 = init_means(rows, r, &prior, config, stream);
        Self {
            prior,
            ext_plus: Natural { prec: 1.0 / s2, h: &m0 / s2 },
            post_minus: m0.clone(),
            cov: DMatrix::identity(r, r) * s2,
            prev: DMatrix::zeros(rows, r),
            b: None,
            lambda: None,
            post_plus: m0.clone(),
            gamma_post_minus: 1.0 / s2,
            gamma_ext_minus: 1.0,
            gamma_post_plus: 1.0 / s2,
            ext_minus: m0,
        }
    }
}

struct Ctx<'a> {
    config: &'a RunConfig,
    clips: usize,
    first: bool,
}

/// Messages, posterior, denoising and extrinsic update for one side.
///
/// `z` is oriented so that its rows index this side; `other` supplies the
/// opposite posterior mean and covariance; `onsager_prev` the estimate in
/// the Onsager term.
fn update_side(
    side: &mut Side,
    z: &DMatrix<f64>,
    gamma_z: f64,
    other_mean: &DMatrix<f64>,
    other_cov: &DMatrix<f64>,
    onsager_prev: &DMatrix<f64>,
    ctx: &mut Ctx,
) -> Result<()> {
    let cfg = ctx.config;
    let (b_new, l_new) = bilmmse_side(z, gamma_z, other_mean, other_cov, onsager_prev, cfg.onsager, cfg.beta_temp);
    let (b, mut l) = match (side.b.take(), side.lambda.take()) {
        (Some(b_old), Some(l_old)) => (b_new.damp(&b_old, cfg.damping_rho), l_new.damp(&l_old, cfg.damping_rho)),
        _ => (b_new, l_new),
    };
    let lt = l.transpose();
    l += lt;
    l *= 0.5;

    let (mean, cov) = bilmmse_posterior_natural(&b, &l, &side.ext_plus.h, side.ext_plus.prec)?;
    side.b = Some(b);
    side.lambda = Some(l);
    side.prev = std::mem::replace(&mut side.post_minus, mean);
    side.cov = cov;

    let gp = scalarize_covariance(&side.cov)?.min(cfg.gamma_max);
    let (gm, c1) = extrinsic_precision(gp, side.ext_plus.prec, cfg.gamma_min);
    let um = (&side.post_minus * gp - &side.ext_plus.h) / gm;
    let (mu, div) = denoise_rows(&side.prior, &um, 1.0 / gm)?;
    let gpp = if div > 0.0 { (gm / div).min(cfg.gamma_max) } else { cfg.gamma_max };
    let (ge, c2) = extrinsic_precision(gpp, gm, cfg.gamma_min);
    let h = &mu * gpp - &um * gm;
    ctx.clips += c1 as usize + c2 as usize;

    side.ext_plus = if ctx.first {
        Natural { prec: ge, h }
    } else {
        Natural {
            prec: ge.damp(&side.ext_plus.prec, cfg.damping_rho),
            h: h.damp(&side.ext_plus.h, cfg.damping_rho),
        }
    };
    side.gamma_post_minus = gp;
    side.gamma_ext_minus = gm;
    side.gamma_post_plus = gpp;
    side.ext_minus = um;
    side.post_plus = mu;
    Ok(())
}

struct OutputBlock {
    y: DMatrix<f64>,
    mask: DMatrix<bool>,
    kind: ChannelKind,
    ext_plus: Natural,
    gamma_post_minus: f64,
}

fn output_step(
    out: &mut OutputBlock,
    u: &Side,
    v: &Side,
    dims: &ProblemDims,
    ctx: &mut Ctx,
) -> Result<()> {
    let cfg = ctx.config;
    let ze = out.ext_plus.mean();
    let gze = out.ext_plus.prec;
    let (zp, gzp, _) =
        output_posterior_z_parts(&u.post_minus, &u.cov, &v.post_minus, &v.cov, &ze, gze, dims, cfg.beta_temp)?;
    let gzp = gzp.min(cfg.gamma_max);
    let (gzm, c1) = extrinsic_precision(gzp, gze, cfg.gamma_min);
    let zm = (&zp * gzp - &out.ext_plus.h) / gzm;
    let tau = 1.0 / gzm;

    let (n, m) = zm.shape();
    let mut mz = DMatrix::zeros(n, m);
    let mut div_sum = 0.0;
    let mut prec_sum = 0.0;
    for j in 0..m {
        for i in 0..n {
            let d = denoise_output_unchecked(&out.kind, out.y[(i, j)], out.mask[(i, j)], zm[(i, j)], tau);
            mz[(i, j)] = d.mean;
            div_sum += d.divergence;
            prec_sum += gzm / d.divergence;
        }
    }
    let count = (n * m) as f64;
    let gpp = match cfg.z_average {
        ZAverage::Harmonic => gzm / (div_sum / count),
        ZAverage::Arithmetic => prec_sum / count,
    }
    .min(cfg.gamma_max);
    let (ge, c2) = extrinsic_precision(gpp, gzm, cfg.gamma_min);
    let h = &mz * gpp - &zm * gzm;
    ctx.clips += c1 as usize + c2 as usize;
    out.ext_plus = if ctx.first {
        Natural { prec: ge, h }
    } else {
        Natural {
            prec: ge.damp(&out.ext_plus.prec, cfg.damping_rho),
            h: h.damp(&out.ext_plus.h, cfg.damping_rho),
        }
    };
    out.gamma_post_minus = gzp;
    Ok(())
}

fn run_vamp(
    obs: &Observation,
    prior_u: &PriorSpec,
    prior_v: &PriorSpec,
    dims: &ProblemDims,
    config: &RunConfig,
    truth: Option<&DMatrix<f64>>,
    generalized: bool,
) -> Result<RunResult> {
    config.validate()?;
    prior_u.validate()?;
    prior_v.validate()?;
    check_shapes(obs, dims)?;
    let c = obs.z_scale;
    let (n, m, r) = (dims.n_rows_u, dims.n_rows_v, dims.rank);
    let gw = obs.channel.gamma_w() * c * c;
    let y = &obs.y / c;
    let kind = match obs.channel.kind {
        ChannelKind::Awgn { .. } => ChannelKind::Awgn { gamma_w: gw },
        ChannelKind::Selection { rate, .. } => ChannelKind::Selection { rate, gamma_w: gw },
    };

    let mut u = Side::new(n, r, *prior_u, config, streams::INIT_U);
    let mut v = Side::new(m, r, *prior_v, config, streams::INIT_V);
    let mut out = OutputBlock {
        ext_plus: Natural { prec: gw, h: &y * gw },
        y: y.clone(),
        mask: obs.mask.clone(),
        kind,
        gamma_post_minus: gw,
    };
    let yt = y.transpose();

    let mut ctx = Ctx { config, clips: 0, first: true };
    let mut history = Vec::new();
    let mut last_u = DMatrix::zeros(n, r);
    let mut last_v = DMatrix::zeros(m, r);
    let mut termination = Termination::IterationCap;
    let mut failure = None;

    for t in 0..config.t_max {
        ctx.clips = 0;
        let step: Result<()> = (|| {
            let (z, zt, gz) = if generalized {
                let ze = out.ext_plus.mean();
                let zt = ze.transpose();
                (ze, zt, out.ext_plus.prec)
            } else {
                (y.clone(), yt.clone(), gw)
            };
            match config.schedule {
                Schedule::Parallel => {
                    let (u_mean, u_cov) = (u.post_minus.clone(), u.cov.clone());
                    let (v_mean, v_cov) = (v.post_minus.clone(), v.cov.clone());
                    let (u_onsager, v_onsager) = (u.prev.clone(), v.prev.clone());
                    update_side(&mut u, &z, gz, &v_mean, &v_cov, &u_onsager, &mut ctx)?;
                    update_side(&mut v, &zt, gz, &u_mean, &u_cov, &v_onsager, &mut ctx)?;
                }
                Schedule::Sequential => {
                    let (v_mean, v_cov) = (v.post_minus.clone(), v.cov.clone());
                    // No V estimate has been built from the initial U yet.
                    let u_onsager = if ctx.first { u.prev.clone() } else { u.post_minus.clone() };
                    update_side(&mut u, &z, gz, &v_mean, &v_cov, &u_onsager, &mut ctx)?;
                    let v_onsager = v.post_minus.clone();
                    let (u_mean, u_cov) = (u.post_minus.clone(), u.cov.clone());
                    update_side(&mut v, &zt, gz, &u_mean, &u_cov, &v_onsager, &mut ctx)?;
                }
            }
            if generalized {
                output_step(&mut out, &u, &v, dims, &mut ctx)?;
            }
            Ok(())
        })();
        ctx.first = false;

        let precisions_ok = [u.gamma_post_minus, v.gamma_post_minus, u.ext_plus.prec, v.ext_plus.prec, out.ext_plus.prec]
            .iter()
            .all(|g| g.is_finite() && *g > 0.0);
        if let Err(e) = step {
            failure = Some(e.to_string());
        } else if !(precisions_ok && all_finite(&u.post_plus) && all_finite(&v.post_plus)) {
            failure = Some("non-finite iterate".into());
        }
        if failure.is_some() {
            termination = Termination::NumericalFailure;
            break;
        }

        let d = (&u.post_plus - &last_u).norm_squared() + (&v.post_plus - &last_v).norm_squared();
        let nrm = last_u.norm_squared() + last_v.norm_squared();
        let rel = if nrm > 0.0 { d / nrm } else { f64::INFINITY };
        last_u = u.post_plus.clone();
        last_v = v.post_plus.clone();
        let z_now = truth.map(|zt| nrmse(&(&last_u * last_v.transpose() * c), zt)).transpose()?;
        history.push(IterRecord {
            nrmse_z: z_now,
            gamma_u_post_minus: u.gamma_post_minus,
            gamma_v_post_minus: v.gamma_post_minus,
            gamma_z_post_minus: generalized.then_some(out.gamma_post_minus),
            clips: ctx.clips,
            rel_change: rel,
        });
        if t >= 1 && d <= config.xi * nrm {
            termination = Termination::Converged;
            break;
        }
    }
    let z_hat = &last_u * last_v.transpose() * c;
    Ok(RunResult {
        iterations_run: history.len(),
        u_hat: last_u,
        v_hat: last_v,
        z_hat,
        termination,
        history,
        failure,
    })
}

/// BiG-VAMP on an AWGN or selection channel.
pub fn run_bigvamp(
    obs: &Observation,
    prior_u: &PriorSpec,
    prior_v: &PriorSpec,
    dims: &ProblemDims,
    config: &RunConfig,
    truth: Option<&DMatrix<f64>>,
) -> Result<RunResult> {
    run_vamp(obs, prior_u, prior_v, dims, config, truth, true)
}

/// Bi-VAMP: the output block is frozen at `Ẑ+e = Y`, `γ_Z+e = γ_w`.
pub fn run_bivamp(
    obs: &Observation,
    prior_u: &PriorSpec,
    prior_v: &PriorSpec,
    dims: &ProblemDims,
    config: &RunConfig,
    truth: Option<&DMatrix<f64>>,
) -> Result<RunResult> {
    if obs.channel.is_selection() {
        return Err(Error::Parameter("Bi-VAMP requires a fully observed AWGN channel".into()));
    }
    run_vamp(obs, prior_u, prior_v, dims, config, truth, false)
}

/// AMP baseline for Gaussian priors on both factors.
///
/// `B_U = γ_w(Y V̂ − κ Û_prev ΣR_v)`, `Λ_U = γ_w(V̂ᵀV̂ + (1/β − 1) ΣR_v)` and
/// symmetrically for V, followed by the Gaussian-prior LMMSE posteriors.
/// `κ = γ_w` with [`OnsagerForm::Literal`] and `κ = 1` with
/// [`OnsagerForm::Nishimori`] (low-SNR replacement `y² ≈ γ_w⁻¹` applied to
/// the Onsager term as well).
pub fn run_baseline_amp(
    obs: &Observation,
    prior_u: &PriorSpec,
    prior_v: &PriorSpec,
    dims: &ProblemDims,
    config: &RunConfig,
    truth: Option<&DMatrix<f64>>,
) -> Result<RunResult> {
    let (PriorSpec::Gaussian { mean: mu_u, var: var_u }, PriorSpec::Gaussian { mean: mu_v, var: var_v }) =
        (*prior_u, *prior_v)
    else {
        return Err(Error::UnsupportedPrior("the AMP baseline needs Gaussian priors on U and V".into()));
    };
    config.validate()?;
    check_shapes(obs, dims)?;
    if obs.channel.is_selection() {
        return Err(Error::Parameter("the AMP baseline requires a fully observed AWGN channel".into()));
    }
    let c = obs.z_scale;
    let (n, m, r) = (dims.n_rows_u, dims.n_rows_v, dims.rank);
    let gw = obs.channel.gamma_w() * c * c;
    let y = &obs.y / c;
    let yt = y.transpose();
    let kappa = match config.onsager {
        OnsagerForm::Literal => gw,
        OnsagerForm::Nishimori => 1.0,
    };
    let rho = config.damping_rho;
    let beta = config.beta_temp;

    let mut u = init_means(n, r, prior_u, config, streams::INIT_U);
    let mut v = init_means(m, r, prior_v, config, streams::INIT_V);
    let mut u_prev = DMatrix::zeros(n, r);
    let mut v_prev = DMatrix::zeros(m, r);
    let mut ru = DMatrix::identity(r, r) * var_u;
    let mut rv = DMatrix::identity(r, r) * var_v;
    let mut msgs: Option<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>, DMatrix<f64>)> = None;

    let mut history = Vec::new();
    let mut termination = Termination::IterationCap;
    let mut failure = None;
    let (mut last_u, mut last_v) = (u.clone(), v.clone());
    let ones_u = DMatrix::from_element(n, r, mu_u / var_u);
    let ones_v = DMatrix::from_element(m, r, mu_v / var_v);

    for t in 0..config.t_max {
        let sum_rv = &rv * m as f64;
        let mut b_u = (&y * &v - &u_prev * &sum_rv * kappa) * gw;
        let mut l_u = (v.tr_mul(&v) + &sum_rv * (1.0 / beta - 1.0)) * gw;
        if let Some((ob_u, ol_u, _, _)) = &msgs {
            b_u = b_u.damp(ob_u, rho);
            l_u = l_u.damp(ol_u, rho);
        }
        let u_step = posterior_covariance(&l_u, 1.0 / var_u).map(|ru_new| ((&b_u + &ones_u) * &ru_new, ru_new));
        // Sequential: the V messages see the fresh U and correct with the current V.
        let (u_src, ru_src, v_onsager) = match (&u_step, config.schedule) {
            (Ok((u_new, ru_new)), Schedule::Sequential) => (u_new, ru_new, &v),
            _ => (&u, &ru, &v_prev),
        };
        let sum_ru = ru_src * n as f64;
        let mut b_v = (&yt * u_src - v_onsager * &sum_ru * kappa) * gw;
        let mut l_v = (u_src.tr_mul(u_src) + &sum_ru * (1.0 / beta - 1.0)) * gw;
        if let Some((_, _, ob_v, ol_v)) = &msgs {
            b_v = b_v.damp(ob_v, rho);
            l_v = l_v.damp(ol_v, rho);
        }
        let step = u_step.and_then(|(u_new, ru_new)| {
            let rv_new = posterior_covariance(&l_v, 1.0 / var_v)?;
            let v_new = (&b_v + &ones_v) * &rv_new;
            Ok((u_new, v_new, ru_new, rv_new))
        });
        msgs = Some((b_u, l_u, b_v, l_v));
        let (u_new, v_new, ru_new, rv_new) = match step {
            Ok(x) if all_finite(&x.0) && all_finite(&x.1) => x,
            Ok(_) => {
                failure = Some("non-finite iterate".into());
                termination = Termination::NumericalFailure;
                break;
            }
            Err(e) => {
                failure = Some(e.to_string());
                termination = Termination::NumericalFailure;
                break;
            }
        };
        u_prev = std::mem::replace(&mut u, u_new);
        v_prev = std::mem::replace(&mut v, v_new);
        ru = ru_new;
        rv = rv_new;

        let d = (&u - &last_u).norm_squared() + (&v - &last_v).norm_squared();
        let nrm = last_u.norm_squared() + last_v.norm_squared();
        last_u = u.clone();
        last_v = v.clone();
        let z_now = truth.map(|zt| nrmse(&(&u * v.transpose() * c), zt)).transpose()?;
        history.push(IterRecord {
            nrmse_z: z_now,
            gamma_u_post_minus: r as f64 / ru.trace(),
            gamma_v_post_minus: r as f64 / rv.trace(),
            gamma_z_post_minus: None,
            clips: 0,
            rel_change: if nrm > 0.0 { d / nrm } else { f64::INFINITY },
        });
        if t >= 1 && d <= config.xi * nrm {
            termination = Termination::Converged;
            break;
        }
    }
    let z_hat = &last_u * last_v.transpose() * c;
    Ok(RunResult {
        iterations_run: history.len(),
        u_hat: last_u,
        v_hat: last_v,
        z_hat,
        termination,
        history,
        failure,
    })
}
