//! Scalar state evolution for Bi-VAMP and BiG-VAMP.
//!
//! All quantities are in the scaled convention `Z = (MN)^(-1/4) U Vᵀ`, in
//! which `Var(z) = √(β_u β_v) σ̄_u² σ̄_v²` and `γ_w` is the per-entry noise
//! precision.
//!
//! NRMSE mapping used by [`se_predicted_nrmse`]:
//!
//! ```text
//! NRMSE = √(E_Z / Var(z))
//! E_Z   = 1/γ̄_Z+p                                         (BiG-VAMP)
//! E_Z   = √(β_u β_v) [E_u E_v + (σ̄_v² − E_v) E_u + (σ̄_u² − E_u) E_v]   (Bi-VAMP)
//! ```
//!
//! with `E_u = 1/γ̄_U+p`, `E_v = 1/γ̄_V+p`. [`se_predicted_nrmse_factors`]
//! applies the second line in both modes; it is the error of `Û V̂ᵀ`.

use serde::{Deserialize, Serialize};

use crate::denoisers::denoise_prior_unchecked;
use crate::error::{Error, Result};
use crate::model::{ChannelKind, ChannelSpec, OnsagerForm, PriorSpec, ProblemDims};
use crate::quadrature::expect_adaptive;

/// Floor applied to the random-matrix argument `α`.
pub const ALPHA_FLOOR: f64 = 1e-12;

/// Relative step size below which the recursion counts as converged.
pub const SE_TOL: f64 = 1e-10;

/// Recursion variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeMode {
    BiVamp,
    BigVamp,
}

/// Large-system parameters of the recursion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SEParams {
    pub beta_u: f64,
    pub beta_v: f64,
    pub sigma2_u: f64,
    pub sigma2_v: f64,
    pub prior_u: PriorSpec,
    pub prior_v: PriorSpec,
    pub channel: ChannelSpec,
    /// Per-entry noise precision in the scaled convention.
    pub gamma_w: f64,
    pub beta_temp: f64,
    pub onsager: OnsagerForm,
    pub gamma_min: f64,
    pub gamma_max: f64,
    /// Initial value of every U/V precision.
    pub init_gamma: f64,
}

impl SEParams {
    /// Parameters for a given scaled-convention noise precision.
    pub fn new(dims: &ProblemDims, prior_u: PriorSpec, prior_v: PriorSpec, channel: ChannelSpec, gamma_w: f64) -> Self {
        Self {
            beta_u: dims.beta_u,
            beta_v: dims.beta_v,
            sigma2_u: prior_u.second_moment(),
            sigma2_v: prior_v.second_moment(),
            prior_u,
            prior_v,
            channel: channel.with_gamma_w(gamma_w),
            gamma_w,
            beta_temp: 1.0,
            onsager: OnsagerForm::Nishimori,
            gamma_min: 1e-11,
            gamma_max: 1e10,
            init_gamma: 1.0,
        }
    }

    /// Noise precision set from the SNR via the expected signal variance.
    pub fn for_snr(dims: &ProblemDims, prior_u: PriorSpec, prior_v: PriorSpec, channel: ChannelSpec, snr_db: f64) -> Self {
        let var_z = (dims.beta_u * dims.beta_v).sqrt() * prior_u.second_moment() * prior_v.second_moment();
        Self::new(dims, prior_u, prior_v, channel, 10f64.powf(snr_db / 10.0) / var_z)
    }

    /// Translates the noise precision of a generated instance, whatever its
    /// scaling convention, into the scaled convention.
    pub fn from_instance(inst: &crate::model::Instance, prior_u: PriorSpec, prior_v: PriorSpec) -> Self {
        let c_se = crate::model::z_scale(&inst.dims, true);
        let g = inst.channel.gamma_w() * (inst.z_scale / c_se).powi(2);
        Self::new(&inst.dims, prior_u, prior_v, inst.channel, g)
    }

    /// `Var(z) = √(β_u β_v) σ̄_u² σ̄_v²`.
    pub fn var_z(&self) -> f64 {
        (self.beta_u * self.beta_v).sqrt() * self.sigma2_u * self.sigma2_v
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.beta_u > 0.0
            && self.beta_u <= 1.0
            && self.beta_v > 0.0
            && self.beta_v <= 1.0
            && self.sigma2_u > 0.0
            && self.sigma2_v > 0.0
            && self.gamma_w > 0.0
            && self.init_gamma > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Parameter(format!("invalid SE parameters: {self:?}")))
        }
    }
}

/// Precisions tracked by the recursion. Output-side entries are `None` in
/// Bi-VAMP mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SEState {
    pub gamma_u_ext_plus: f64,
    pub gamma_v_ext_plus: f64,
    pub gamma_u_post_minus: f64,
    pub gamma_v_post_minus: f64,
    pub gamma_u_ext_minus: f64,
    pub gamma_v_ext_minus: f64,
    pub gamma_u_post_plus: f64,
    pub gamma_v_post_plus: f64,
    pub gamma_z_ext_plus: Option<f64>,
    pub gamma_z_post_minus: Option<f64>,
    pub gamma_z_ext_minus: Option<f64>,
    pub gamma_z_post_plus: Option<f64>,
}

impl SEState {
    /// Every U/V precision set to `g`; output precisions start at `γ_w`.
    pub fn initial(params: &SEParams, mode: SeMode) -> Self {
        let g = params.init_gamma;
        let z = (mode == SeMode::BigVamp).then_some(params.gamma_w);
        Self {
            gamma_u_ext_plus: g,
            gamma_v_ext_plus: g,
            gamma_u_post_minus: g,
            gamma_v_post_minus: g,
            gamma_u_ext_minus: g,
            gamma_v_ext_minus: g,
            gamma_u_post_plus: g,
            gamma_v_post_plus: g,
            gamma_z_ext_plus: z,
            gamma_z_post_minus: z,
            gamma_z_ext_minus: z,
            gamma_z_post_plus: z,
        }
    }

    fn values(&self) -> [f64; 12] {
        let o = |x: Option<f64>| x.unwrap_or(1.0);
        [
            self.gamma_u_ext_plus,
            self.gamma_v_ext_plus,
            self.gamma_u_post_minus,
            self.gamma_v_post_minus,
            self.gamma_u_ext_minus,
            self.gamma_v_ext_minus,
            self.gamma_u_post_plus,
            self.gamma_v_post_plus,
            o(self.gamma_z_ext_plus),
            o(self.gamma_z_post_minus),
            o(self.gamma_z_ext_minus),
            o(self.gamma_z_post_plus),
        ]
    }

    pub fn is_finite_positive(&self) -> bool {
        self.values().iter().all(|v| v.is_finite() && *v > 0.0)
    }
}

/// `F(x, z) = (√(x(1+√z)²+1) − √(x(1−√z)²+1))²`, evaluated without
/// cancellation as `(4x√z / (√(x(1+√z)²+1) + √(x(1−√z)²+1)))²`.
pub fn f_rmt(x: f64, z: f64) -> f64 {
    let sz = z.sqrt();
    let a = (x * (1.0 + sz).powi(2) + 1.0).sqrt();
    let b = (x * (1.0 - sz).powi(2) + 1.0).sqrt();
    let num = 4.0 * x * sz;
    (num / (a + b)).powi(2)
}

/// `F(x, z)/(4 z x)`, finite at `x → 0`.
fn f_ratio(x: f64, z: f64) -> f64 {
    let sz = z.sqrt();
    let a = (x * (1.0 + sz).powi(2) + 1.0).sqrt();
    let b = (x * (1.0 - sz).powi(2) + 1.0).sqrt();
    4.0 * x / ((a + b) * (a + b))
}

/// Effective precisions `(γ̃_U+e, γ̃_V+e)` of the Bi-LMMSE pseudo-priors.
///
/// With [`OnsagerForm::Literal`]:
/// `γ̃_U+e = γ̄_U+e + (1/β)√(β_u/β_v) γ/γ̄_V−p − √(β_u/β_v) (γ/γ̄_V−p)(√(β_uβ_v)σ̄_u²σ̄_v²γ + 1)`.
/// With [`OnsagerForm::Nishimori`] the factor `γ⟨z²⟩ = √(β_uβ_v)σ̄_u²σ̄_v²γ + 1`
/// is replaced by 1.
pub fn se_effective_gammas(state: &SEState, params: &SEParams, gamma_noise: f64) -> (f64, f64) {
    let (bu, bv) = (params.beta_u, params.beta_v);
    let g_z2 = match params.onsager {
        OnsagerForm::Literal => (bu * bv).sqrt() * params.sigma2_u * params.sigma2_v * gamma_noise + 1.0,
        OnsagerForm::Nishimori => 1.0,
    };
    let coef = 1.0 / params.beta_temp - g_z2;
    let gu = state.gamma_u_ext_plus + coef * (bu / bv).sqrt() * gamma_noise / state.gamma_v_post_minus;
    let gv = state.gamma_v_ext_plus + coef * (bv / bu).sqrt() * gamma_noise / state.gamma_u_post_minus;
    (gu, gv)
}

/// `γ̃⁻¹ (1 − F(α, β)/(4βα))`, with `α` floored at [`ALPHA_FLOOR`].
pub fn se_mse_bilmmse(gamma_tilde: f64, alpha: f64, beta_ratio: f64) -> f64 {
    let a = if alpha > ALPHA_FLOOR { alpha } else { ALPHA_FLOOR };
    (1.0 - f_ratio(a, beta_ratio)) / gamma_tilde
}

/// Quadrature of `E[g′(û, 1/γ)]` for the scalar channel `û = u + N(0, 1/γ)`.
pub fn expected_divergence(prior: &PriorSpec, gamma_ext: f64) -> crate::quadrature::Adaptive {
    let tau = 1.0 / gamma_ext;
    let st = tau.sqrt();
    let div = |x: f64| denoise_prior_unchecked(prior, x, tau).divergence;
    match *prior {
        PriorSpec::Gaussian { mean, var } => expect_adaptive(|xi| div(mean + (var + tau).sqrt() * xi)),
        PriorSpec::Binary => expect_adaptive(|xi| 0.5 * (div(1.0 + st * xi) + div(-1.0 + st * xi))),
        PriorSpec::BernoulliGaussian { rho, var } => {
            let s1 = (var + tau).sqrt();
            expect_adaptive(|xi| rho * div(s1 * xi) + (1.0 - rho) * div(st * xi))
        }
    }
}

/// MMSE of the row denoiser at extrinsic precision `γ`, computed by
/// quadrature for every prior (used to cross-check the closed forms).
pub fn se_mse_denoiser_quadrature(prior: &PriorSpec, gamma_ext: f64) -> Result<f64> {
    if !(gamma_ext > 0.0) {
        return Err(Error::Parameter(format!("precision must be positive (got {gamma_ext})")));
    }
    let a = expected_divergence(prior, gamma_ext);
    if !a.converged {
        return Err(Error::Quadrature { value: a.value / gamma_ext, rel_change: a.rel_change });
    }
    Ok(a.value / gamma_ext)
}

/// MMSE of the row denoiser: closed form for Gaussian priors, quadrature otherwise.
pub fn se_mse_denoiser(prior: &PriorSpec, gamma_ext: f64) -> Result<f64> {
    if !(gamma_ext > 0.0) {
        return Err(Error::Parameter(format!("precision must be positive (got {gamma_ext})")));
    }
    match *prior {
        PriorSpec::Gaussian { var, .. } => Ok(1.0 / (gamma_ext + 1.0 / var)),
        _ => se_mse_denoiser_quadrature(prior, gamma_ext),
    }
}

fn mse_denoiser_lenient(prior: &PriorSpec, gamma_ext: f64, warnings: &mut usize) -> f64 {
    match *prior {
        PriorSpec::Gaussian { var, .. } => 1.0 / (gamma_ext + 1.0 / var),
        _ => {
            let a = expected_divergence(prior, gamma_ext);
            if !a.converged {
                *warnings += 1;
            }
            a.value / gamma_ext
        }
    }
}

/// Bracket `(1/β) E_u E_v + (σ̄_v² − E_v) E_u + (σ̄_u² − E_u) E_v`.
fn product_bracket(eu: f64, ev: f64, params: &SEParams) -> f64 {
    eu * ev / params.beta_temp + (params.sigma2_v - ev) * eu + (params.sigma2_u - eu) * ev
}

/// `(γ̄_Z+e + (1/√(β_uβ_v)) [bracket]⁻¹)⁻¹` from the `−p` precisions of the
/// state and its `γ̄_Z+e`. A non-positive bracket is clamped to the
/// smallest positive normal number.
pub fn se_mse_output_z(state: &SEState, params: &SEParams) -> f64 {
    let gze = state.gamma_z_ext_plus.unwrap_or(0.0);
    let br = product_bracket(1.0 / state.gamma_u_post_minus, 1.0 / state.gamma_v_post_minus, params);
    let br = if br > 0.0 { br } else { f64::MIN_POSITIVE };
    1.0 / (gze + 1.0 / ((params.beta_u * params.beta_v).sqrt() * br))
}

/// Output-denoiser MMSE at extrinsic precision `γ̄`: `(γ̄ + γ_w)⁻¹` on
/// observed entries, `γ̄⁻¹` on unobserved ones, mixed by the selection rate.
/// The divergence of the AWGN output denoiser does not depend on the data,
/// so `sigma2_z` does not enter.
pub fn se_mse_denoiser_z(channel: &ChannelSpec, gamma_z_ext_minus: f64, _sigma2_z: f64) -> f64 {
    let g = gamma_z_ext_minus;
    match channel.kind {
        ChannelKind::Awgn { gamma_w } => 1.0 / (g + gamma_w),
        ChannelKind::Selection { rate, gamma_w } => rate / (g + gamma_w) + (1.0 - rate) / g,
    }
}

/// Trajectory and diagnostics of one recursion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeTrajectory {
    pub mode: SeMode,
    /// `states[0]` is the initial state.
    pub states: Vec<SEState>,
    /// The last step changed every precision by less than [`SE_TOL`] relative.
    pub converged: bool,
    /// The recursion produced a non-finite state and stopped.
    pub truncated: bool,
    pub alpha_clamps: usize,
    pub precision_clips: usize,
    pub quadrature_warnings: usize,
}

impl SeTrajectory {
    pub fn last(&self) -> &SEState {
        self.states.last().expect("trajectory holds the initial state")
    }
}

fn clip(p: f64, params: &SEParams, clips: &mut usize) -> f64 {
    if p < params.gamma_min || p.is_nan() {
        *clips += 1;
        params.gamma_min
    } else {
        p.min(params.gamma_max)
    }
}

/// One step of the recursion.
fn se_step(s: &SEState, params: &SEParams, mode: SeMode, tr: &mut SeTrajectory) -> SEState {
    let gmax = params.gamma_max;
    let g = match mode {
        SeMode::BiVamp => params.gamma_w,
        SeMode::BigVamp => s.gamma_z_ext_plus.unwrap_or(params.gamma_w),
    };
    let (gtu, gtv) = se_effective_gammas(s, params, g);
    let gtu = clip(gtu, params, &mut tr.precision_clips);
    let gtv = clip(gtv, params, &mut tr.precision_clips);
    let (bu, bv) = (params.beta_u, params.beta_v);
    let alpha_u = (bv / bu).sqrt() * g * (params.sigma2_u - 1.0 / s.gamma_u_post_minus) / gtv;
    let alpha_v = (bu / bv).sqrt() * g * (params.sigma2_v - 1.0 / s.gamma_v_post_minus) / gtu;
    tr.alpha_clamps += (alpha_u <= ALPHA_FLOOR) as usize + (alpha_v <= ALPHA_FLOOR) as usize;

    let mut n = *s;
    n.gamma_u_post_minus = (1.0 / se_mse_bilmmse(gtu, alpha_v, bv)).min(gmax);
    n.gamma_u_ext_minus = clip(n.gamma_u_post_minus - s.gamma_u_ext_plus, params, &mut tr.precision_clips);
    n.gamma_v_post_minus = (1.0 / se_mse_bilmmse(gtv, alpha_u, bu)).min(gmax);
    n.gamma_v_ext_minus = clip(n.gamma_v_post_minus - s.gamma_v_ext_plus, params, &mut tr.precision_clips);

    if mode == SeMode::BigVamp {
        let gze = s.gamma_z_ext_plus.unwrap_or(params.gamma_w);
        let tmp = SEState { gamma_z_ext_plus: Some(gze), ..n };
        let gzp = (1.0 / se_mse_output_z(&tmp, params)).min(gmax);
        n.gamma_z_post_minus = Some(gzp);
        n.gamma_z_ext_minus = Some(clip(gzp - gze, params, &mut tr.precision_clips));
    }

    n.gamma_u_post_plus =
        (1.0 / mse_denoiser_lenient(&params.prior_u, n.gamma_u_ext_minus, &mut tr.quadrature_warnings)).min(gmax);
    n.gamma_u_ext_plus = clip(n.gamma_u_post_plus - n.gamma_u_ext_minus, params, &mut tr.precision_clips);
    n.gamma_v_post_plus =
        (1.0 / mse_denoiser_lenient(&params.prior_v, n.gamma_v_ext_minus, &mut tr.quadrature_warnings)).min(gmax);
    n.gamma_v_ext_plus = clip(n.gamma_v_post_plus - n.gamma_v_ext_minus, params, &mut tr.precision_clips);

    if mode == SeMode::BigVamp {
        let gzm = n.gamma_z_ext_minus.unwrap_or(params.gamma_w);
        let gzpp = (1.0 / se_mse_denoiser_z(&params.channel, gzm, params.var_z())).min(gmax);
        n.gamma_z_post_plus = Some(gzpp);
        n.gamma_z_ext_plus = Some(clip(gzpp - gzm, params, &mut tr.precision_clips));
    }
    n
}

fn rel_close(a: &SEState, b: &SEState, tol: f64) -> bool {
    a.values().iter().zip(b.values().iter()).all(|(x, y)| (x - y).abs() <= tol * x.abs().max(y.abs()))
}

/// Runs the recursion from [`SEState::initial`] for at most `t_max` steps,
/// stopping early once a step changes no precision by more than [`SE_TOL`]
/// relative.
pub fn run_se(params: &SEParams, mode: SeMode, t_max: usize) -> Result<SeTrajectory> {
    run_se_from(params, mode, t_max, SEState::initial(params, mode))
}

/// [`run_se`] from a given initial state.
pub fn run_se_from(params: &SEParams, mode: SeMode, t_max: usize, init: SEState) -> Result<SeTrajectory> {
    params.validate()?;
    let mut tr = SeTrajectory {
        mode,
        states: vec![init],
        converged: false,
        truncated: false,
        alpha_clamps: 0,
        precision_clips: 0,
        quadrature_warnings: 0,
    };
    for _ in 0..t_max {
        let cur = *tr.last();
        let next = se_step(&cur, params, mode, &mut tr);
        if !next.is_finite_positive() {
            tr.truncated = true;
            break;
        }
        tr.states.push(next);
        if rel_close(&cur, &next, SE_TOL) {
            tr.converged = true;
            break;
        }
    }
    Ok(tr)
}

/// Relative gaps `|γ̄_X+p − γ̄_X−p|/γ̄_X+p` for X = U, V and, when present, Z.
pub fn fixed_point_gaps(state: &SEState) -> Vec<(char, f64)> {
    let gap = |plus: f64, minus: f64| (plus - minus).abs() / plus;
    let mut out = vec![
        ('U', gap(state.gamma_u_post_plus, state.gamma_u_post_minus)),
        ('V', gap(state.gamma_v_post_plus, state.gamma_v_post_minus)),
    ];
    if let (Some(p), Some(m)) = (state.gamma_z_post_plus, state.gamma_z_post_minus) {
        out.push(('Z', gap(p, m)));
    }
    out
}

/// Predicted NRMSE of `Û V̂ᵀ` from the `+p` factor precisions.
pub fn se_predicted_nrmse_factors(state: &SEState, params: &SEParams) -> f64 {
    let e = (params.beta_u * params.beta_v).sqrt()
        * product_bracket(1.0 / state.gamma_u_post_plus, 1.0 / state.gamma_v_post_plus, params);
    (e.max(0.0) / params.var_z()).sqrt()
}

/// Predicted NRMSE; see the module documentation for the mapping.
pub fn se_predicted_nrmse(state: &SEState, params: &SEParams) -> f64 {
    match state.gamma_z_post_plus {
        Some(gzp) => (1.0 / gzp / params.var_z()).sqrt(),
        None => se_predicted_nrmse_factors(state, params),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(pu: PriorSpec, pv: PriorSpec, dims: (usize, usize, usize), snr: f64, ch: ChannelSpec) -> SEParams {
        let d = ProblemDims::new(dims.0, dims.1, dims.2).unwrap();
        SEParams::for_snr(&d, pu, pv, ch, snr)
    }

    #[test]
    fn f_rmt_examples() {
        for z in [0.1, 0.5, 1.0] {
            assert_eq!(f_rmt(0.0, z), 0.0);
        }
        for x in [0.3, 2.0, 50.0] {
            let want = ((4.0 * x + 1.0f64).sqrt() - 1.0).powi(2);
            assert!((f_rmt(x, 1.0) - want).abs() < 1e-12 * want.max(1.0));
        }
    }

    #[test]
    fn bilmmse_examples() {
        assert!((se_mse_bilmmse(1.0, 2.0, 1.0) - 0.5).abs() < 1e-14);
        assert!((se_mse_bilmmse(3.0, 0.0, 0.4) - 1.0 / 3.0).abs() < 1e-11);
        for a in [1e-3, 0.5, 7.0, 300.0] {
            assert!(se_mse_bilmmse(2.0, a, 0.3) <= 0.5);
        }
    }

    #[test]
    fn effective_gammas_examples() {
        let p = params(PriorSpec::Binary, PriorSpec::Binary, (100, 100, 10), 10.0, ChannelSpec::awgn(1.0));
        let mut s = SEState::initial(&p, SeMode::BiVamp);
        s.gamma_u_ext_plus = 2.5;
        s.gamma_v_post_minus = f64::INFINITY;
        let lit = SEParams { onsager: OnsagerForm::Literal, ..p };
        assert_eq!(se_effective_gammas(&s, &lit, 3.0).0, 2.5);
        s.gamma_v_post_minus = 4.0;
        let (gu, _) = se_effective_gammas(&s, &lit, 3.0);
        let want = 2.5 - (3.0 / 4.0) * (0.1 * 3.0);
        assert!((gu - want).abs() < 1e-14);
        let (gu, gv) = se_effective_gammas(&SEState { gamma_u_post_minus: 4.0, gamma_v_ext_plus: 2.5, ..s }, &lit, 3.0);
        assert!((gu - gv).abs() < 1e-14);
        assert_eq!(se_effective_gammas(&s, &p, 3.0).0, 2.5);
    }

    #[test]
    fn denoiser_mse_examples() {
        let g = PriorSpec::Gaussian { mean: 0.0, var: 1.0 };
        assert!((se_mse_denoiser(&g, 1.0).unwrap() - 0.5).abs() < 1e-15);
        for gamma in [0.1, 1.0, 30.0] {
            let q = se_mse_denoiser_quadrature(&g, gamma).unwrap();
            assert!((q - 1.0 / (gamma + 1.0)).abs() < 1e-8 * q);
        }
        assert!(se_mse_denoiser(&PriorSpec::Binary, 1e6).unwrap() < 1e-12);
        assert!(se_mse_denoiser(&g, 0.0).is_err());
    }

    #[test]
    fn output_mse_examples() {
        let p = params(PriorSpec::Binary, PriorSpec::Binary, (100, 100, 10), 10.0, ChannelSpec::awgn(1.0));
        let mut s = SEState::initial(&p, SeMode::BigVamp);
        s.gamma_u_post_minus = 1e300;
        s.gamma_v_post_minus = 1e300;
        assert!(se_mse_output_z(&s, &p) < 1e-200);
        s.gamma_u_post_minus = 3.0;
        s.gamma_v_post_minus = 3.0;
        s.gamma_z_ext_plus = Some(0.0);
        let br = 1.0 / 9.0 + 2.0 * (1.0 - 1.0 / 3.0) / 3.0;
        assert!((se_mse_output_z(&s, &p) - 0.1 * br).abs() < 1e-14);
    }

    #[test]
    fn output_denoiser_examples() {
        let a = se_mse_denoiser_z(&ChannelSpec::awgn(3.0), 2.0, 1.0);
        assert!((a - 0.2).abs() < 1e-15);
        let s1 = se_mse_denoiser_z(&ChannelSpec::selection(1.0, 3.0), 2.0, 1.0);
        assert!((a - s1).abs() < 1e-15);
        let s0 = se_mse_denoiser_z(&ChannelSpec::selection(1e-300, 3.0), 2.0, 1.0);
        assert!((s0 - 0.5).abs() < 1e-12);
    }

    #[test]
    fn gaussian_fixed_point() {
        let g = PriorSpec::Gaussian { mean: 0.0, var: 1.0 };
        let p = params(g, g, (200, 100, 10), 20.0, ChannelSpec::awgn(1.0));
        let tr = run_se(&p, SeMode::BiVamp, 500).unwrap();
        assert!(tr.converged);
        for (_, gap) in fixed_point_gaps(tr.last()) {
            assert!(gap < 1e-6);
        }
        let nr = se_predicted_nrmse(tr.last(), &p);
        assert!(nr > 0.0 && nr < 0.2, "{nr}");
    }

    #[test]
    fn predicted_nrmse_limits() {
        let p = params(PriorSpec::Binary, PriorSpec::Binary, (100, 100, 10), 10.0, ChannelSpec::awgn(1.0));
        let mut s = SEState::initial(&p, SeMode::BiVamp);
        s.gamma_u_post_plus = f64::INFINITY;
        s.gamma_v_post_plus = f64::INFINITY;
        assert_eq!(se_predicted_nrmse(&s, &p), 0.0);
        s.gamma_z_post_plus = Some(1.0 / p.var_z());
        assert!((se_predicted_nrmse(&s, &p) - 1.0).abs() < 1e-14);
    }
}
