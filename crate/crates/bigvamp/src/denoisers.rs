//! Scalar MMSE denoisers for the row priors and the output channel.
//!
//! Every denoiser returns the posterior mean of a scalar observed through a
//! Gaussian pseudo-channel `r̂ = x + N(0, τ)` and its derivative in `r̂`.
//!
//! Bernoulli-Gaussian prior `x ~ (1−ρ) δ₀ + ρ N(0, σ²)`: with `k = σ²/(σ²+τ)`
//! the posterior nonzero probability is `π = sigmoid(L)` where
//!
//! ```text
//! L = ln(ρ/(1−ρ)) + ½ ln(τ/(σ²+τ)) + ½ r̂² k/τ
//! ```
//!
//! so that `mean = π k r̂`. Since `dL/dr̂ = r̂ k/τ` and `dπ/dL = π(1−π)`,
//! the product rule gives `div = k π + k² r̂² π(1−π)/τ`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ChannelKind, ChannelSpec, PriorSpec};

/// Posterior mean and its derivative with respect to the pseudo-observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DenoiseResult {
    pub mean: f64,
    pub divergence: f64,
}

/// `1/(1+e^{-x})` without overflow.
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if !(tau > 0.0) || tau.is_nan() {
        return Err(Error::Parameter(format!("pseudo-channel variance must be positive (got {tau})")));
    }
    Ok(())
}

/// Scalar denoiser for a row prior.
pub fn denoise_prior(prior: &PriorSpec, r_hat: f64, tau: f64) -> Result<DenoiseResult> {
    check_tau(tau)?;
    Ok(denoise_prior_unchecked(prior, r_hat, tau))
}

#[inline]
pub(crate) fn denoise_prior_unchecked(prior: &PriorSpec, r_hat: f64, tau: f64) -> DenoiseResult {
    match *prior {
        PriorSpec::Gaussian { mean, var } => {
            let k = var / (var + tau);
            DenoiseResult { mean: mean + k * (r_hat - mean), divergence: k }
        }
        PriorSpec::Binary => {
            let x = r_hat / tau;
            // sech²(x) = 4e^{-2|x|} / (1 + e^{-2|x|})², finite for any x.
            let e = (-2.0 * x.abs()).exp();
            let sech2 = 4.0 * e / ((1.0 + e) * (1.0 + e));
            DenoiseResult { mean: x.tanh(), divergence: sech2 / tau }
        }
        PriorSpec::BernoulliGaussian { rho, var } => {
            let k = var / (var + tau);
            if rho >= 1.0 {
                return DenoiseResult { mean: k * r_hat, divergence: k };
            }
            let logit = (rho / (1.0 - rho)).ln() + 0.5 * (tau / (var + tau)).ln() + 0.5 * r_hat * r_hat * k / tau;
            let pi = sigmoid(logit);
            let pi_q = pi * sigmoid(-logit);
            DenoiseResult {
                mean: pi * k * r_hat,
                divergence: k * pi + k * k * r_hat * r_hat * pi_q / tau,
            }
        }
    }
}

/// Scalar output denoiser for one entry of `Z`.
///
/// Observed entries combine the pseudo-prior `N(ẑ, τ)` with the AWGN
/// likelihood; unobserved entries pass through.
pub fn denoise_output(channel: &ChannelSpec, y: f64, observed: bool, z_hat: f64, tau: f64) -> Result<DenoiseResult> {
    check_tau(tau)?;
    Ok(denoise_output_unchecked(&channel.kind, y, observed, z_hat, tau))
}

#[inline]
pub(crate) fn denoise_output_unchecked(kind: &ChannelKind, y: f64, observed: bool, z_hat: f64, tau: f64) -> DenoiseResult {
    if !observed {
        return DenoiseResult { mean: z_hat, divergence: 1.0 };
    }
    let gamma_w = match *kind {
        ChannelKind::Awgn { gamma_w } | ChannelKind::Selection { gamma_w, .. } => gamma_w,
    };
    let p = 1.0 / tau;
    let post = p + gamma_w;
    DenoiseResult { mean: (p * z_hat + gamma_w * y) / post, divergence: p / post }
}

/// Applies [`denoise_prior`] entrywise; returns the denoised matrix and the
/// average divergence over all entries.
pub fn denoise_rows(prior: &PriorSpec, means: &DMatrix<f64>, tau: f64) -> Result<(DMatrix<f64>, f64)> {
    check_tau(tau)?;
    let mut out = DMatrix::zeros(means.nrows(), means.ncols());
    let mut div_sum = 0.0;
    // Column-major traversal; the reduction order is fixed by the storage order.
    for (o, &x) in out.iter_mut().zip(means.iter()) {
        let d = denoise_prior_unchecked(prior, x, tau);
        *o = d.mean;
        div_sum += d.divergence;
    }
    let n = means.len().max(1) as f64;
    Ok((out, div_sum / n))
}
