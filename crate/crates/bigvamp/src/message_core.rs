//! Matrix-valued messages: Bi-LMMSE quadratic messages, Gaussian
//! posterior/extrinsic conversions and the output-side posterior for `Z`.

use nalgebra::{Cholesky, DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::model::{OnsagerForm, ProblemDims};

/// Means, covariances and precisions circulating between the Bi-LMMSE block
/// and the row denoisers.
#[derive(Debug, Clone, PartialEq)]
pub struct UvState {
    pub u_ext_plus: DMatrix<f64>,
    pub gamma_u_ext_plus: f64,
    pub v_ext_plus: DMatrix<f64>,
    pub gamma_v_ext_plus: f64,
    pub u_post_minus: DMatrix<f64>,
    pub r_u_post_minus: DMatrix<f64>,
    pub v_post_minus: DMatrix<f64>,
    pub r_v_post_minus: DMatrix<f64>,
    pub u_ext_minus: DMatrix<f64>,
    pub gamma_u_ext_minus: f64,
    pub v_ext_minus: DMatrix<f64>,
    pub gamma_v_ext_minus: f64,
    pub u_post_plus: DMatrix<f64>,
    pub gamma_u_post_plus: f64,
    pub v_post_plus: DMatrix<f64>,
    pub gamma_v_post_plus: f64,
    pub u_post_minus_prev: DMatrix<f64>,
    pub v_post_minus_prev: DMatrix<f64>,
}

impl UvState {
    /// State with the given Bi-LMMSE posterior means, covariances `cov_u·I`,
    /// `cov_v·I`, matching extrinsic inputs, zero previous means and unit
    /// precisions elsewhere.
    pub fn new(u0: DMatrix<f64>, v0: DMatrix<f64>, cov_u: f64, cov_v: f64) -> Self {
        let r = u0.ncols();
        let (n, m) = (u0.nrows(), v0.nrows());
        Self {
            u_ext_plus: u0.clone(),
            gamma_u_ext_plus: 1.0 / cov_u,
            v_ext_plus: v0.clone(),
            gamma_v_ext_plus: 1.0 / cov_v,
            r_u_post_minus: DMatrix::identity(r, r) * cov_u,
            r_v_post_minus: DMatrix::identity(r, r) * cov_v,
            u_ext_minus: u0.clone(),
            gamma_u_ext_minus: 1.0,
            v_ext_minus: v0.clone(),
            gamma_v_ext_minus: 1.0,
            u_post_plus: u0.clone(),
            gamma_u_post_plus: 1.0,
            v_post_plus: v0.clone(),
            gamma_v_post_plus: 1.0,
            u_post_minus_prev: DMatrix::zeros(n, r),
            v_post_minus_prev: DMatrix::zeros(m, r),
            u_post_minus: u0,
            v_post_minus: v0,
        }
    }
}

/// Output-side means and precisions.
#[derive(Debug, Clone, PartialEq)]
pub struct ZState {
    pub z_ext_plus: DMatrix<f64>,
    pub gamma_z_ext_plus: f64,
    pub z_post_minus: DMatrix<f64>,
    pub gamma_z_post_minus: f64,
    pub z_ext_minus: DMatrix<f64>,
    pub gamma_z_ext_minus: f64,
    pub z_post_plus: DMatrix<f64>,
    pub gamma_z_post_plus: f64,
}

/// Quadratic messages `(B, Λ)` towards the U and V rows.
#[derive(Debug, Clone, PartialEq)]
pub struct BilmmseMessages {
    pub b_u: DMatrix<f64>,
    pub lambda_u: DMatrix<f64>,
    pub b_v: DMatrix<f64>,
    pub lambda_v: DMatrix<f64>,
}

/// Largest absolute entry of `A − Aᵀ`.
pub fn asymmetry(a: &DMatrix<f64>) -> f64 {
    (a - a.transpose()).amax()
}

fn symmetrize(a: &mut DMatrix<f64>) {
    let t = a.transpose();
    *a += t;
    *a *= 0.5;
}

/// One side of the Bi-LMMSE messages.
///
/// `z` is the `n×k` matrix seen from the side being updated, `other_mean`
/// and `other_cov` are the `k×r` posterior mean and `r×r` covariance of the
/// opposite factor, `self_prev` is the estimate entering the Onsager term.
/// The returned `Λ` is not symmetrized.
pub fn bilmmse_side(
    z: &DMatrix<f64>,
    gamma: f64,
    other_mean: &DMatrix<f64>,
    other_cov: &DMatrix<f64>,
    self_prev: &DMatrix<f64>,
    onsager: OnsagerForm,
    beta_temp: f64,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let k = other_mean.nrows() as f64;
    let g_z2 = match onsager {
        OnsagerForm::Nishimori => 1.0,
        OnsagerForm::Literal => gamma * z.norm_squared() / z.len() as f64,
    };
    let b = (z * other_mean - self_prev * other_cov * (k * g_z2)) * gamma;
    let lambda = (other_mean.tr_mul(other_mean) + other_cov * (k / beta_temp - k * g_z2)) * gamma;
    (b, lambda)
}

/// Messages `B_U, Λ_U, B_V, Λ_V` from the current state, with
/// `Λ` symmetrized. Both sides read the same (current) iterate.
pub fn bilmmse_messages(
    z_ext_plus: &DMatrix<f64>,
    gamma_z_ext_plus: f64,
    state: &UvState,
    dims: &ProblemDims,
    onsager: OnsagerForm,
    beta_temp: f64,
) -> Result<BilmmseMessages> {
    let (n, m, r) = (dims.n_rows_u, dims.n_rows_v, dims.rank);
    let shape_ok = z_ext_plus.shape() == (n, m)
        && state.u_post_minus.shape() == (n, r)
        && state.v_post_minus.shape() == (m, r)
        && state.u_post_minus_prev.shape() == (n, r)
        && state.v_post_minus_prev.shape() == (m, r)
        && state.r_u_post_minus.shape() == (r, r)
        && state.r_v_post_minus.shape() == (r, r);
    if !shape_ok {
        return Err(Error::Dimension("message inputs do not match the problem dimensions".into()));
    }
    let (b_u, mut lambda_u) = bilmmse_side(
        z_ext_plus,
        gamma_z_ext_plus,
        &state.v_post_minus,
        &state.r_v_post_minus,
        &state.u_post_minus_prev,
        onsager,
        beta_temp,
    );
    let zt = z_ext_plus.transpose();
    let (b_v, mut lambda_v) = bilmmse_side(
        &zt,
        gamma_z_ext_plus,
        &state.u_post_minus,
        &state.r_u_post_minus,
        &state.v_post_minus_prev,
        onsager,
        beta_temp,
    );
    symmetrize(&mut lambda_u);
    symmetrize(&mut lambda_v);
    Ok(BilmmseMessages { b_u, lambda_u, b_v, lambda_v })
}

fn condition_number(a: &DMatrix<f64>) -> f64 {
    let eig = SymmetricEigen::new(a.clone());
    let mx = eig.eigenvalues.iter().fold(0.0f64, |acc, &x| acc.max(x.abs()));
    let mn = eig.eigenvalues.iter().fold(f64::INFINITY, |acc, &x| acc.min(x.abs()));
    if mn == 0.0 {
        f64::INFINITY
    } else {
        mx / mn
    }
}

/// `(γ I + Λ)⁻¹` via Cholesky.
pub fn posterior_covariance(lambda: &DMatrix<f64>, ext_prec: f64) -> Result<DMatrix<f64>> {
    let r = lambda.nrows();
    let a = lambda + DMatrix::identity(r, r) * ext_prec;
    if !a.iter().all(|x| x.is_finite()) {
        return Err(Error::Numerical("non-finite entries in γI + Λ".into()));
    }
    match Cholesky::new(a.clone()) {
        Some(ch) => {
            let mut inv = ch.inverse();
            symmetrize(&mut inv);
            Ok(inv)
        }
        None => Err(Error::NotPositiveDefinite { condition: condition_number(&a) }),
    }
}

/// Posterior from the quadratic message `(B, Λ)` and the natural mean
/// `h = γ·m` of the incoming extrinsic Gaussian.
pub fn bilmmse_posterior_natural(
    b: &DMatrix<f64>,
    lambda: &DMatrix<f64>,
    ext_natural: &DMatrix<f64>,
    ext_prec: f64,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let cov = posterior_covariance(lambda, ext_prec)?;
    let mean = (b + ext_natural) * &cov;
    Ok((mean, cov))
}

/// `R = (γI + Λ)⁻¹`, `mean = (B + γ·m_ext) R`.
pub fn bilmmse_posterior(
    msgs_b: &DMatrix<f64>,
    msgs_lambda: &DMatrix<f64>,
    ext_mean: &DMatrix<f64>,
    ext_prec: f64,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if !(ext_prec > 0.0) {
        return Err(Error::Parameter(format!("extrinsic precision must be positive (got {ext_prec})")));
    }
    bilmmse_posterior_natural(msgs_b, msgs_lambda, &(ext_mean * ext_prec), ext_prec)
}

/// Result of a Gaussian division.
#[derive(Debug, Clone, PartialEq)]
pub struct Extrinsic {
    pub mean: DMatrix<f64>,
    pub prec: f64,
    /// The raw precision difference fell below the floor.
    pub clipped: bool,
}

/// Clipped precision difference `max(post − in, floor)` and a clip flag.
pub fn extrinsic_precision(post_prec: f64, in_prec: f64, gamma_min: f64) -> (f64, bool) {
    let p = post_prec - in_prec;
    if p < gamma_min || p.is_nan() {
        (gamma_min, true)
    } else {
        (p, false)
    }
}

/// Gaussian division: removes the incoming message `(in_mean, in_prec)`
/// from the posterior `(post_mean, post_prec)`.
pub fn extrinsic_subtract(
    post_mean: &DMatrix<f64>,
    post_prec: f64,
    in_ext_mean: &DMatrix<f64>,
    in_ext_prec: f64,
    gamma_min: f64,
) -> Result<Extrinsic> {
    if !(post_prec > 0.0) {
        return Err(Error::Parameter(format!("posterior precision must be positive (got {post_prec})")));
    }
    if post_mean.shape() != in_ext_mean.shape() {
        return Err(Error::Dimension("posterior and extrinsic means differ in shape".into()));
    }
    let (prec, clipped) = extrinsic_precision(post_prec, in_ext_prec, gamma_min);
    let mean = (post_mean * post_prec - in_ext_mean * in_ext_prec) / prec;
    Ok(Extrinsic { mean, prec, clipped })
}

/// Gaussian product of two isotropic messages.
pub fn gaussian_combine(m1: &DMatrix<f64>, p1: f64, m2: &DMatrix<f64>, p2: f64) -> (DMatrix<f64>, f64) {
    let p = p1 + p2;
    ((m1 * p1 + m2 * p2) / p, p)
}

/// `(Tr(cov)/r)⁻¹`.
pub fn scalarize_covariance(cov: &DMatrix<f64>) -> Result<f64> {
    let tr = cov.trace();
    if !(tr > 0.0) || !tr.is_finite() {
        return Err(Error::Numerical(format!("covariance trace must be positive and finite (got {tr})")));
    }
    Ok(cov.nrows() as f64 / tr)
}

/// Output-side posterior of `Z` from the factor posteriors `(Û, R_U)`,
/// `(V̂, R_V)`.
///
/// Returns `(Ẑ−p, γ_Z−p, γ_direct)` where `γ_direct = γ_Z−p − γ_Z+e` is the
/// precision contributed by the factors alone.
#[allow(clippy::too_many_arguments)]
pub fn output_posterior_z_parts(
    u: &DMatrix<f64>,
    ru: &DMatrix<f64>,
    v: &DMatrix<f64>,
    rv: &DMatrix<f64>,
    z_ext_plus: &DMatrix<f64>,
    gamma_z_ext_plus: f64,
    dims: &ProblemDims,
    beta_temp: f64,
) -> Result<(DMatrix<f64>, f64, f64)> {
    let (n, m) = (dims.n_rows_u as f64, dims.n_rows_v as f64);
    let tr_rr = (ru * rv.transpose()).trace();
    let tr_u = (ru * v.tr_mul(v)).trace();
    let tr_v = (rv * u.tr_mul(u)).trace();
    let denom = tr_rr / beta_temp + tr_u / m + tr_v / n;
    if !(denom > 0.0) || !denom.is_finite() {
        return Err(Error::Numerical(format!("output precision denominator is {denom}")));
    }
    let direct = 1.0 / denom;
    let mean = u * v.transpose() + z_ext_plus * (gamma_z_ext_plus / beta_temp * tr_rr);
    Ok((mean, gamma_z_ext_plus + direct, direct))
}

/// `Ẑ−p = Û V̂ᵀ + (γ_Z+e/β) Ẑ+e Tr(R_U R_Vᵀ)` and
/// `γ_Z−p = γ_Z+e + MN [Tr((MN/β) R_U R_Vᵀ + N R_U V̂ᵀV̂ + M R_V ÛᵀÛ)]⁻¹`.
pub fn output_posterior_z(
    state: &UvState,
    z_ext_plus: &DMatrix<f64>,
    gamma_z_ext_plus: f64,
    dims: &ProblemDims,
    beta_temp: f64,
) -> Result<(DMatrix<f64>, f64)> {
    let (mean, prec, _) = output_posterior_z_parts(
        &state.u_post_minus,
        &state.r_u_post_minus,
        &state.v_post_minus,
        &state.r_v_post_minus,
        z_ext_plus,
        gamma_z_ext_plus,
        dims,
        beta_temp,
    )?;
    Ok((mean, prec))
}

/// Convex combination used for damping.
pub trait Damp: Sized {
    fn damp(self, old: &Self, rho: f64) -> Self;
}

impl Damp for f64 {
    fn damp(self, old: &Self, rho: f64) -> Self {
        rho * self + (1.0 - rho) * old
    }
}

impl Damp for DMatrix<f64> {
    fn damp(mut self, old: &Self, rho: f64) -> Self {
        if rho == 1.0 {
            return self;
        }
        self *= rho;
        self += old * (1.0 - rho);
        self
    }
}

/// `ρ·new + (1−ρ)·old`.
pub fn damp<T: Damp>(new: T, old: &T, rho: f64) -> T {
    new.damp(old, rho)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: usize, cols: usize, v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(rows, cols, v)
    }

    fn state_2x2() -> UvState {
        let mut s = UvState::new(m(2, 1, &[0.7, -0.2]), m(2, 1, &[1.3, 0.4]), 0.3, 0.6);
        s.u_post_minus_prev = m(2, 1, &[0.5, 0.1]);
        s.v_post_minus_prev = m(2, 1, &[-0.9, 0.8]);
        s
    }

    #[test]
    fn zero_observation_messages() {
        let s = state_2x2();
        let d = ProblemDims::new(2, 2, 1).unwrap();
        let msgs = bilmmse_messages(&DMatrix::zeros(2, 2), 3.0, &s, &d, OnsagerForm::Literal, 1.0).unwrap();
        assert!(msgs.b_u.amax() == 0.0);
        let vv = 1.3f64 * 1.3 + 0.4 * 0.4;
        assert!((msgs.lambda_u[(0, 0)] - 3.0 * (vv + 2.0 * 0.6)).abs() < 1e-14);
    }

    #[test]
    fn zero_cov_gives_gram() {
        let mut s = state_2x2();
        s.r_v_post_minus = DMatrix::zeros(1, 1);
        let d = ProblemDims::new(2, 2, 1).unwrap();
        let z = m(2, 2, &[1.0, 2.0, -0.5, 0.3]);
        let msgs = bilmmse_messages(&z, 2.0, &s, &d, OnsagerForm::Literal, 1.0).unwrap();
        let vv = 1.3f64 * 1.3 + 0.4 * 0.4;
        assert!((msgs.lambda_u[(0, 0)] - 2.0 * vv).abs() < 1e-14);
    }

    #[test]
    fn scalar_hand_expansion() {
        let s = state_2x2();
        let d = ProblemDims::new(2, 2, 1).unwrap();
        let z = [[1.0, 2.0], [-0.5, 0.3]];
        let zm = m(2, 2, &[1.0, 2.0, -0.5, 0.3]);
        let g = 1.7;
        let msgs = bilmmse_messages(&zm, g, &s, &d, OnsagerForm::Literal, 1.0).unwrap();
        let z2 = (1.0 + 4.0 + 0.25 + 0.09) / 4.0;
        let (u, v, up, vp, ru, rv) = ([0.7, -0.2], [1.3, 0.4], [0.5, 0.1], [-0.9, 0.8], 0.3, 0.6);
        for i in 0..2 {
            let bu = g * (z[i][0] * v[0] + z[i][1] * v[1] - 2.0 * g * up[i] * rv * z2);
            assert!((msgs.b_u[(i, 0)] - bu).abs() < 1e-13);
            let bv = g * (z[0][i] * u[0] + z[1][i] * u[1] - 2.0 * g * vp[i] * ru * z2);
            assert!((msgs.b_v[(i, 0)] - bv).abs() < 1e-13);
        }
        let lu = g * (v[0] * v[0] + v[1] * v[1] + 2.0 * rv - 2.0 * g * rv * z2);
        let lv = g * (u[0] * u[0] + u[1] * u[1] + 2.0 * ru - 2.0 * g * ru * z2);
        assert!((msgs.lambda_u[(0, 0)] - lu).abs() < 1e-13);
        assert!((msgs.lambda_v[(0, 0)] - lv).abs() < 1e-13);
    }

    #[test]
    fn nishimori_form_at_unit_temperature_is_gram() {
        let s = state_2x2();
        let d = ProblemDims::new(2, 2, 1).unwrap();
        let zm = m(2, 2, &[1.0, 2.0, -0.5, 0.3]);
        let msgs = bilmmse_messages(&zm, 2.0, &s, &d, OnsagerForm::Nishimori, 1.0).unwrap();
        let vv = 1.3f64 * 1.3 + 0.4 * 0.4;
        assert!((msgs.lambda_u[(0, 0)] - 2.0 * vv).abs() < 1e-14);
        let bu0 = 2.0 * (1.0 * 1.3 + 2.0 * 0.4 - 2.0 * 0.5 * 0.6);
        assert!((msgs.b_u[(0, 0)] - bu0).abs() < 1e-14);
    }

    #[test]
    fn shape_mismatch_is_error() {
        let s = state_2x2();
        let d = ProblemDims::new(3, 2, 1).unwrap();
        assert!(bilmmse_messages(&DMatrix::zeros(3, 2), 1.0, &s, &d, OnsagerForm::Nishimori, 1.0).is_err());
    }

    #[test]
    fn posterior_prior_only() {
        let ext = m(3, 2, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let (mean, cov) = bilmmse_posterior(&DMatrix::zeros(3, 2), &DMatrix::zeros(2, 2), &ext, 4.0).unwrap();
        assert!((cov - DMatrix::identity(2, 2) * 0.25).amax() < 1e-15);
        assert!((mean - ext).amax() < 1e-14);
    }

    #[test]
    fn posterior_clamp_limit() {
        let ext = m(1, 2, &[1.0, -1.0]);
        let b = m(1, 2, &[5.0, 3.0]);
        let l = m(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let (mean, _) = bilmmse_posterior(&b, &l, &ext, 1e12).unwrap();
        assert!((mean - ext).amax() < 1e-10);
    }

    #[test]
    fn posterior_residual() {
        let l = m(2, 2, &[2.0, 0.7, 0.7, 1.5]);
        let cov = posterior_covariance(&l, 0.3).unwrap();
        let res = &cov * (DMatrix::identity(2, 2) * 0.3 + &l) - DMatrix::identity(2, 2);
        assert!(res.amax() < 1e-10);
    }

    #[test]
    fn not_pd_reports_condition() {
        let l = m(2, 2, &[-5.0, 0.0, 0.0, 1.0]);
        match posterior_covariance(&l, 1.0) {
            Err(Error::NotPositiveDefinite { condition }) => assert!(condition.is_infinite() || condition > 1.0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn extrinsic_examples() {
        let pm = m(1, 1, &[1.0]);
        let e = extrinsic_subtract(&pm, 2.0, &m(1, 1, &[0.0]), 1.0, 1e-11).unwrap();
        assert_eq!(e.mean[(0, 0)], 2.0);
        assert_eq!(e.prec, 1.0);
        assert!(!e.clipped);
        let e = extrinsic_subtract(&pm, 2.0, &m(1, 1, &[9.0]), 0.0, 1e-11).unwrap();
        assert_eq!((e.mean[(0, 0)], e.prec), (1.0, 2.0));
        let e = extrinsic_subtract(&pm, 1.0, &m(1, 1, &[0.0]), 3.0, 1e-11).unwrap();
        assert!(e.clipped && e.prec == 1e-11);
    }

    #[test]
    fn scalarize_examples() {
        assert_eq!(scalarize_covariance(&DMatrix::identity(3, 3)).unwrap(), 1.0);
        assert_eq!(scalarize_covariance(&(DMatrix::identity(5, 5) * 4.0)).unwrap(), 0.25);
        assert_eq!(scalarize_covariance(&m(2, 2, &[1.0, 0.0, 0.0, 3.0])).unwrap(), 0.5);
        assert!(scalarize_covariance(&DMatrix::zeros(2, 2)).is_err());
    }

    #[test]
    fn output_posterior_zero_ext() {
        let s = state_2x2();
        let d = ProblemDims::new(2, 2, 1).unwrap();
        let (z, _) = output_posterior_z(&s, &DMatrix::zeros(2, 2), 5.0, &d, 1.0).unwrap();
        assert!((z - &s.u_post_minus * s.v_post_minus.transpose()).amax() < 1e-15);
    }

    #[test]
    fn output_posterior_scalar_oracle() {
        let s = state_2x2();
        let d = ProblemDims::new(2, 2, 1).unwrap();
        let ze = m(2, 2, &[0.4, -1.0, 2.0, 0.1]);
        let g = 0.8;
        let (z, p) = output_posterior_z(&s, &ze, g, &d, 1.0).unwrap();
        let (u, v, ru, rv) = ([0.7, -0.2], [1.3, 0.4], 0.3, 0.6);
        let uu = u[0] * u[0] + u[1] * u[1];
        let vv = v[0] * v[0] + v[1] * v[1];
        // Per-entry variance of the product averaged over the N·M entries.
        let var = ru * rv + ru * vv / 2.0 + rv * uu / 2.0;
        assert!((p - (g + 1.0 / var)).abs() < 1e-12);
        for i in 0..2 {
            for j in 0..2 {
                let want = u[i] * v[j] + g * ze[(i, j)] * ru * rv;
                assert!((z[(i, j)] - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn damp_examples() {
        assert_eq!(damp(3.0, &1.0, 1.0), 3.0);
        assert_eq!(damp(2.0, &0.0, 0.5), 1.0);
        assert_eq!(damp(4.0, &4.0, 0.3), 4.0);
        let a = m(1, 2, &[2.0, 4.0]);
        let b = m(1, 2, &[0.0, 0.0]);
        assert_eq!(damp(a, &b, 0.5), m(1, 2, &[1.0, 2.0]));
    }
}
