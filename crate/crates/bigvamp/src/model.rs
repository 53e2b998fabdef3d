//! Problem dimensions, priors, channels, synthetic instances and metrics.
//!
//! Matrices are `nalgebra::DMatrix<f64>` (column-major in memory). Random
//! draws are taken in row-major order so that an instance depends only on
//! its seed, never on the storage layout.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// RNG stream indices. Every (seed, stream) pair is an independent ChaCha20 sequence.
pub mod streams {
    pub const U: u64 = 0;
    pub const V: u64 = 1;
    pub const NOISE: u64 = 2;
    pub const MASK: u64 = 3;
    pub const INIT_U: u64 = 4;
    pub const INIT_V: u64 = 5;
}

/// Seeded generator for one stream.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Sizes of the factorization `Z = U Vᵀ` with `U: N×r`, `V: M×r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemDims {
    pub n_rows_u: usize,
    pub n_rows_v: usize,
    pub rank: usize,
    pub beta_u: f64,
    pub beta_v: f64,
}

impl ProblemDims {
    pub fn new(n_rows_u: usize, n_rows_v: usize, rank: usize) -> Result<Self> {
        if n_rows_u == 0 || n_rows_v == 0 {
            return Err(Error::Dimension(format!(
                "N and M must be positive (got N={n_rows_u}, M={n_rows_v})"
            )));
        }
        if rank == 0 || rank > n_rows_u.min(n_rows_v) {
            return Err(Error::Dimension(format!(
                "rank must satisfy 1 <= r <= min(N, M) (got r={rank}, N={n_rows_u}, M={n_rows_v})"
            )));
        }
        Ok(Self {
            n_rows_u,
            n_rows_v,
            rank,
            beta_u: rank as f64 / n_rows_u as f64,
            beta_v: rank as f64 / n_rows_v as f64,
        })
    }
}

/// Separable prior shared by all entries of U (or V).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PriorSpec {
    Gaussian { mean: f64, var: f64 },
    /// Zero with probability `1 - rho`, otherwise `N(0, var)`.
    BernoulliGaussian { rho: f64, var: f64 },
    /// Uniform on {-1, +1}.
    Binary,
}

impl PriorSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            PriorSpec::Gaussian { mean, var } => {
                if !(var > 0.0 && var.is_finite() && mean.is_finite()) {
                    return Err(Error::Parameter(format!("Gaussian prior needs var > 0 (got {var})")));
                }
            }
            PriorSpec::BernoulliGaussian { rho, var } => {
                if !(rho > 0.0 && rho <= 1.0) {
                    return Err(Error::Parameter(format!("Bernoulli-Gaussian needs 0 < rho <= 1 (got {rho})")));
                }
                if !(var > 0.0 && var.is_finite()) {
                    return Err(Error::Parameter(format!("Bernoulli-Gaussian needs var > 0 (got {var})")));
                }
            }
            PriorSpec::Binary => {}
        }
        Ok(())
    }

    /// Second moment E[u²].
    pub fn second_moment(&self) -> f64 {
        match *self {
            PriorSpec::Gaussian { mean, var } => mean * mean + var,
            PriorSpec::BernoulliGaussian { rho, var } => rho * var,
            PriorSpec::Binary => 1.0,
        }
    }

    pub fn is_gaussian(&self) -> bool {
        matches!(self, PriorSpec::Gaussian { .. })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            PriorSpec::Gaussian { mean, var } => {
                let g: f64 = rng.sample(StandardNormal);
                mean + var.sqrt() * g
            }
            PriorSpec::BernoulliGaussian { rho, var } => {
                // Both draws are always consumed so the stream position is data-independent.
                let active = rng.random::<f64>() < rho;
                let g: f64 = rng.sample(StandardNormal);
                if active {
                    var.sqrt() * g
                } else {
                    0.0
                }
            }
            PriorSpec::Binary => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
        }
    }
}

/// Output likelihood variants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ChannelKind {
    Awgn { gamma_w: f64 },
    /// Each entry observed through AWGN with probability `rate`.
    Selection { rate: f64, gamma_w: f64 },
}

/// Output channel plus the scaling convention.
///
/// With `se_scaling` the stored signal is `Z = (MN)^(-1/4) U Vᵀ` and `gamma_w`
/// is the per-entry noise precision in those units. Equivalently, the
/// unscaled product is observed with noise variance `√(MN)/gamma_w`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelSpec {
    pub kind: ChannelKind,
    pub se_scaling: bool,
}

impl ChannelSpec {
    pub fn awgn(gamma_w: f64) -> Self {
        Self { kind: ChannelKind::Awgn { gamma_w }, se_scaling: false }
    }

    pub fn selection(rate: f64, gamma_w: f64) -> Self {
        Self { kind: ChannelKind::Selection { rate, gamma_w }, se_scaling: false }
    }

    pub fn with_se_scaling(mut self, on: bool) -> Self {
        self.se_scaling = on;
        self
    }

    pub fn gamma_w(&self) -> f64 {
        match self.kind {
            ChannelKind::Awgn { gamma_w } | ChannelKind::Selection { gamma_w, .. } => gamma_w,
        }
    }

    pub fn with_gamma_w(mut self, g: f64) -> Self {
        match &mut self.kind {
            ChannelKind::Awgn { gamma_w } | ChannelKind::Selection { gamma_w, .. } => *gamma_w = g,
        }
        self
    }

    /// Probability that an entry is observed (1 for AWGN).
    pub fn selection_rate(&self) -> f64 {
        match self.kind {
            ChannelKind::Awgn { .. } => 1.0,
            ChannelKind::Selection { rate, .. } => rate,
        }
    }

    pub fn is_selection(&self) -> bool {
        matches!(self.kind, ChannelKind::Selection { .. })
    }

    pub fn validate(&self) -> Result<()> {
        let g = self.gamma_w();
        if !(g > 0.0) {
            return Err(Error::Parameter(format!("noise precision must be positive (got {g})")));
        }
        let s = self.selection_rate();
        if !(s > 0.0 && s <= 1.0) {
            return Err(Error::Parameter(format!("selection rate must lie in (0, 1] (got {s})")));
        }
        Ok(())
    }
}

/// Scale applied to `U Vᵀ` under the given convention.
pub fn z_scale(dims: &ProblemDims, se_scaling: bool) -> f64 {
    if se_scaling {
        ((dims.n_rows_u as f64) * (dims.n_rows_v as f64)).powf(-0.25)
    } else {
        1.0
    }
}

/// What a solver is allowed to see.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub y: DMatrix<f64>,
    pub mask: DMatrix<bool>,
    pub channel: ChannelSpec,
    /// Factor `c` with `Z = c U Vᵀ`.
    pub z_scale: f64,
}

/// A generated ground-truth problem.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub dims: ProblemDims,
    pub u_true: DMatrix<f64>,
    pub v_true: DMatrix<f64>,
    pub z_true: DMatrix<f64>,
    /// Unobserved entries hold 0.
    pub y_obs: DMatrix<f64>,
    pub mask: DMatrix<bool>,
    /// Carries the noise precision derived from the requested SNR.
    pub channel: ChannelSpec,
    pub seed: u64,
    pub z_scale: f64,
}

impl Instance {
    pub fn observation(&self) -> Observation {
        Observation {
            y: self.y_obs.clone(),
            mask: self.mask.clone(),
            channel: self.channel,
            z_scale: self.z_scale,
        }
    }

    pub fn noise_precision(&self) -> f64 {
        self.channel.gamma_w()
    }
}

/// Solver iteration order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Schedule {
    /// U and V blocks both read the previous iterate (literal line order).
    Parallel,
    /// V is updated from the freshly computed U.
    Sequential,
}

/// Form of the Onsager and covariance corrections in the Bi-LMMSE messages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OnsagerForm {
    /// `γ ⟨Ẑ⊙Ẑ⟩` replaced by its matched-condition value 1.
    Nishimori,
    /// Empirical second moment `⟨Ẑ⊙Ẑ⟩` as printed.
    Literal,
}

/// Reduction of per-entry output precisions to one scalar.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZAverage {
    /// Mean of variances: `γ_Z+p = γ_Z−e / ⟨g′_z⟩`.
    Harmonic,
    /// Mean of precisions.
    Arithmetic,
}

/// Starting point for the extrinsic means.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitMode {
    /// i.i.d. `N(0, σ̄²)` draws times `init_scale`.
    Random,
    /// All zeros.
    Zero,
}

/// Default damping on the selection channel.
pub const SELECTION_DAMPING: f64 = 0.5;

/// Iteration controls shared by all solvers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub t_max: usize,
    pub xi: f64,
    pub damping_rho: f64,
    pub gamma_min: f64,
    pub gamma_max: f64,
    pub seed: u64,
    pub beta_temp: f64,
    pub onsager: OnsagerForm,
    pub z_average: ZAverage,
    pub schedule: Schedule,
    pub init: InitMode,
    pub init_scale: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            t_max: 1000,
            xi: 1e-6,
            damping_rho: 0.8,
            gamma_min: 1e-11,
            gamma_max: 1e10,
            seed: 0,
            beta_temp: 1.0,
            onsager: OnsagerForm::Nishimori,
            z_average: ZAverage::Harmonic,
            schedule: Schedule::Sequential,
            init: InitMode::Random,
            init_scale: 1e-2,
        }
    }
}

impl RunConfig {
    /// Defaults with damping 1.0 when both priors are Gaussian, 0.8 otherwise.
    pub fn for_priors(prior_u: &PriorSpec, prior_v: &PriorSpec) -> Self {
        let damping_rho = if prior_u.is_gaussian() && prior_v.is_gaussian() { 1.0 } else { 0.8 };
        Self { damping_rho, ..Self::default() }
    }

    /// As [`RunConfig::for_priors`], but damping is capped at 0.5 on the selection channel.
    pub fn for_problem(prior_u: &PriorSpec, prior_v: &PriorSpec, channel: &ChannelSpec) -> Self {
        let mut cfg = Self::for_priors(prior_u, prior_v);
        if channel.is_selection() {
            cfg.damping_rho = cfg.damping_rho.min(SELECTION_DAMPING);
        }
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        if self.t_max < 1 {
            return Err(Error::Parameter("t_max must be at least 1".into()));
        }
        if !(self.xi > 0.0) {
            return Err(Error::Parameter(format!("xi must be positive (got {})", self.xi)));
        }
        if !(self.damping_rho > 0.0 && self.damping_rho <= 1.0) {
            return Err(Error::Parameter(format!(
                "damping_rho must lie in (0, 1] (got {})",
                self.damping_rho
            )));
        }
        if !(self.gamma_min >= 0.0 && self.gamma_max > self.gamma_min) {
            return Err(Error::Parameter("need 0 <= gamma_min < gamma_max".into()));
        }
        if !(self.beta_temp > 0.0) {
            return Err(Error::Parameter("beta_temp must be positive".into()));
        }
        Ok(())
    }
}

fn draw_matrix(rows: usize, cols: usize, prior: &PriorSpec, rng: &mut ChaCha20Rng) -> DMatrix<f64> {
    let mut data = Vec::with_capacity(rows * cols);
    for _ in 0..rows * cols {
        data.push(prior.sample(rng));
    }
    DMatrix::from_row_slice(rows, cols, &data)
}

/// Noise precision for a target SNR given the realized signal energy.
pub fn gamma_w_for_snr(z: &DMatrix<f64>, snr_db: f64) -> Result<f64> {
    if !snr_db.is_finite() {
        return Err(Error::Parameter(format!("snr_db must be finite (got {snr_db})")));
    }
    let energy = z.norm_squared();
    let g = (z.len() as f64 / energy) * 10f64.powf(snr_db / 10.0);
    if !(g > 0.0 && g.is_finite()) {
        return Err(Error::Parameter(format!(
            "SNR {snr_db} dB implies an invalid noise precision (signal energy {energy})"
        )));
    }
    Ok(g)
}

/// Noise precision for a target SNR using the expected signal energy
/// `E[z²] = c² r σ̄_u² σ̄_v²` instead of the realized one.
pub fn gamma_w_expected(
    dims: &ProblemDims,
    prior_u: &PriorSpec,
    prior_v: &PriorSpec,
    se_scaling: bool,
    snr_db: f64,
) -> Result<f64> {
    if !snr_db.is_finite() {
        return Err(Error::Parameter(format!("snr_db must be finite (got {snr_db})")));
    }
    let c = z_scale(dims, se_scaling);
    let ez2 = c * c * dims.rank as f64 * prior_u.second_moment() * prior_v.second_moment();
    Ok(10f64.powf(snr_db / 10.0) / ez2)
}

/// Draws `U`, `V`, the mask and the noise; `gamma_w` in `channel` is replaced
/// by the value derived from `snr_db` on the realized `Z`.
pub fn generate_instance(
    dims: ProblemDims,
    prior_u: PriorSpec,
    prior_v: PriorSpec,
    channel: ChannelSpec,
    snr_db: f64,
    seed: u64,
) -> Result<Instance> {
    let dims = ProblemDims::new(dims.n_rows_u, dims.n_rows_v, dims.rank)?;
    prior_u.validate()?;
    prior_v.validate()?;
    let rate = channel.selection_rate();
    if !(rate > 0.0 && rate <= 1.0) {
        return Err(Error::Parameter(format!("selection rate must lie in (0, 1] (got {rate})")));
    }
    let (n, m, r) = (dims.n_rows_u, dims.n_rows_v, dims.rank);
    let u = draw_matrix(n, r, &prior_u, &mut stream_rng(seed, streams::U));
    let v = draw_matrix(m, r, &prior_v, &mut stream_rng(seed, streams::V));
    let c = z_scale(&dims, channel.se_scaling);
    let z = (&u * v.transpose()) * c;
    let gamma_w = gamma_w_for_snr(&z, snr_db)?;
    let sd = gamma_w.sqrt().recip();

    let mut noise_rng = stream_rng(seed, streams::NOISE);
    let mut mask_rng = stream_rng(seed, streams::MASK);
    let mut y = DMatrix::zeros(n, m);
    let mut mask = DMatrix::from_element(n, m, true);
    for i in 0..n {
        for j in 0..m {
            let w: f64 = noise_rng.sample(StandardNormal);
            let seen = if channel.is_selection() { mask_rng.random::<f64>() < rate } else { true };
            mask[(i, j)] = seen;
            if seen {
                y[(i, j)] = z[(i, j)] + sd * w;
            }
        }
    }
    Ok(Instance {
        dims,
        u_true: u,
        v_true: v,
        z_true: z,
        y_obs: y,
        mask,
        channel: channel.with_gamma_w(gamma_w),
        seed,
        z_scale: c,
    })
}

/// `‖Z − Ẑ‖_F / ‖Z‖_F`.
pub fn nrmse(z_hat: &DMatrix<f64>, z_true: &DMatrix<f64>) -> Result<f64> {
    if z_hat.shape() != z_true.shape() {
        return Err(Error::Dimension(format!(
            "shape mismatch: {:?} vs {:?}",
            z_hat.shape(),
            z_true.shape()
        )));
    }
    let denom = z_true.norm();
    if denom == 0.0 {
        return Err(Error::UndefinedMetric);
    }
    Ok((z_true - z_hat).norm() / denom)
}

/// `10 log10(‖z‖² / ‖w‖²)`; `+∞` when `w` is zero.
pub fn snr_db_of(z: &DMatrix<f64>, w: &DMatrix<f64>) -> Result<f64> {
    if z.shape() != w.shape() {
        return Err(Error::Dimension(format!("shape mismatch: {:?} vs {:?}", z.shape(), w.shape())));
    }
    let nw = w.norm_squared();
    if nw == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (z.norm_squared() / nw).log10())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dims_reject_bad_rank() {
        assert!(ProblemDims::new(5, 4, 5).is_err());
        assert!(ProblemDims::new(5, 4, 0).is_err());
        let d = ProblemDims::new(10, 4, 2).unwrap();
        assert_eq!(d.beta_u, 0.2);
        assert_eq!(d.beta_v, 0.5);
    }

    #[test]
    fn second_moments() {
        assert_eq!(PriorSpec::Gaussian { mean: 1.0, var: 2.0 }.second_moment(), 3.0);
        assert_eq!(PriorSpec::BernoulliGaussian { rho: 0.05, var: 1.0 }.second_moment(), 0.05);
        assert_eq!(PriorSpec::Binary.second_moment(), 1.0);
    }

    #[test]
    fn binary_support() {
        let d = ProblemDims::new(30, 20, 4).unwrap();
        let inst = generate_instance(d, PriorSpec::Binary, PriorSpec::Binary, ChannelSpec::awgn(1.0), 10.0, 3).unwrap();
        assert!(inst.u_true.iter().all(|&x| x == 1.0 || x == -1.0));
    }

    #[test]
    fn deterministic_generation() {
        let d = ProblemDims::new(20, 15, 3).unwrap();
        let pv = PriorSpec::BernoulliGaussian { rho: 0.3, var: 1.0 };
        let ch = ChannelSpec::selection(0.5, 1.0);
        let a = generate_instance(d, PriorSpec::Binary, pv, ch, 15.0, 42).unwrap();
        let b = generate_instance(d, PriorSpec::Binary, pv, ch, 15.0, 42).unwrap();
        assert_eq!(a, b);
        let c = generate_instance(d, PriorSpec::Binary, pv, ch, 15.0, 43).unwrap();
        assert_ne!(a.u_true, c.u_true);
    }

    #[test]
    fn unobserved_entries_are_zero() {
        let d = ProblemDims::new(40, 30, 3).unwrap();
        let g = PriorSpec::Gaussian { mean: 0.0, var: 1.0 };
        let inst = generate_instance(d, g, g, ChannelSpec::selection(0.2, 1.0), 20.0, 1).unwrap();
        for i in 0..40 {
            for j in 0..30 {
                if !inst.mask[(i, j)] {
                    assert_eq!(inst.y_obs[(i, j)], 0.0);
                }
            }
        }
        let frac = inst.mask.iter().filter(|&&b| b).count() as f64 / 1200.0;
        assert!((frac - 0.2).abs() < 0.05, "{frac}");
    }

    #[test]
    fn se_scaling_scales_z() {
        let d = ProblemDims::new(16, 25, 2).unwrap();
        let g = PriorSpec::Gaussian { mean: 0.0, var: 1.0 };
        let inst = generate_instance(d, g, g, ChannelSpec::awgn(1.0).with_se_scaling(true), 10.0, 9).unwrap();
        let expect = (&inst.u_true * inst.v_true.transpose()) / 20.0f64.sqrt();
        assert!((inst.z_true - expect).amax() < 1e-14);
    }

    #[test]
    fn nrmse_examples() {
        let z = DMatrix::from_row_slice(2, 2, &[1.0, -2.0, 3.0, 0.5]);
        assert_eq!(nrmse(&z, &z).unwrap(), 0.0);
        assert!((nrmse(&DMatrix::zeros(2, 2), &z).unwrap() - 1.0).abs() < 1e-15);
        assert!((nrmse(&(&z * 2.0), &z).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(nrmse(&z, &DMatrix::zeros(2, 2)), Err(Error::UndefinedMetric)));
    }

    #[test]
    fn snr_examples() {
        let z = DMatrix::from_element(2, 2, 1.0);
        assert!((snr_db_of(&z, &z).unwrap()).abs() < 1e-12);
        assert!((snr_db_of(&(&z * 10.0), &z).unwrap() - 20.0).abs() < 1e-12);
        assert!((snr_db_of(&(&z * 10f64.sqrt()), &z).unwrap() - 10.0).abs() < 1e-12);
        assert_eq!(snr_db_of(&z, &DMatrix::zeros(2, 2)).unwrap(), f64::INFINITY);
    }
}
