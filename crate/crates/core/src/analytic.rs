//! Short-time expansions of the stress and market-level expectations, their
//! random-matrix averages, and a quadrature oracle for the exact
//! noise/interaction correlations.
//!
//! Notation: `M̃ = M + Mᵀ`, `u` is the all-ones vector, `c = √β γ` and
//! `Â = β I - c M`. With `x = σ (W + c S)` the bank covariance is
//!
//! ```text
//! E[x_i x_j] / σ² = δ_ij t + c (E[W_i S_j] + E[W_j S_i]) + c² E[S_i S_j]
//! E[W_i S_j] = ∫₀ᵗ dt' ∫₀^t' ds (M e^{-Â(t'-s)})_ji
//! E[S_i S_j] = ∫₀ᵗ dτ (M V(τ) (M V(τ))ᵀ)_ij,   V(τ) = ∫₀^τ e^{-Â u} du
//! ```

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::linalg::{expm, Matrix};
use crate::model::{build_drift_matrix, symmetrize, ModelParams};
use crate::quadrature::GaussLegendre;

/// Nodes per quadrature panel.
const PANEL_NODES: usize = 10;
/// Largest panel count tried before reporting non-convergence.
const MAX_PANELS: usize = 16;

/// Terms of a short-time expansion, grouped by order in `γ`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ExpansionBreakdown {
    /// Pure-noise term `σ² t`.
    pub order1: f64,
    /// First order in `γ` (the `t²` term with its `-βt/3` correction).
    pub order_gamma: f64,
    /// Second order in `γ` (the `t³` term).
    pub order_gamma2: f64,
    /// `order1 + order_gamma + order_gamma2`.
    pub total: f64,
}

impl ExpansionBreakdown {
    fn new(order1: f64, order_gamma: f64, order_gamma2: f64) -> Self {
        Self {
            order1,
            order_gamma,
            order_gamma2,
            total: order1 + order_gamma + order_gamma2,
        }
    }
}

/// Noise/interaction correlations, per unit `σ²`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CorrelationMatrices {
    /// `ws[(i, j)] = E[W_i S_j]`.
    pub ws: Matrix,
    /// `ss[(i, j)] = E[S_i S_j]`.
    pub ss: Matrix,
}

/// Which form of the market-level uncertainty to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum MarketAverage {
    /// Expansion for the given matrix.
    Conditional,
    /// Average over i.i.d. standard normal matrices.
    Ensemble,
}

fn require_time(t: f64) -> Result<()> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(invalid("t", format!("must be finite and >= 0, got {t}")));
    }
    Ok(())
}

fn column_sums(m: &Matrix) -> Vec<f64> {
    let n = m.cols();
    let mut out = vec![0.0; n];
    for i in 0..m.rows() {
        for (o, v) in out.iter_mut().zip(m.row(i)) {
            *o += v;
        }
    }
    out
}

fn row_sums(m: &Matrix) -> Vec<f64> {
    (0..m.rows()).map(|i| m.row(i).iter().sum()).collect()
}

/// The two index contractions of the stress expansion:
///
/// * `tr M - (1/N) Σ_ij M_ij`
/// * `Σ_ik M_ik M̃_ik - (1/N) Σ_k (Σ_i M_ik)(Σ_j M̃_jk)`
pub fn contraction_terms(m: &Matrix) -> Result<(f64, f64)> {
    let n = m.require_square("interaction matrix")?;
    let nf = n as f64;
    let first = m.trace() - m.sum() / nf;
    let mut frob_sym = 0.0;
    for i in 0..n {
        for k in 0..n {
            frob_sym += m[(i, k)] * (m[(i, k)] + m[(k, i)]);
        }
    }
    let col = column_sums(m);
    let row = row_sums(m);
    let cross: f64 = col.iter().zip(&row).map(|(c, r)| c * (c + r)).sum();
    Ok((first, frob_sym - cross / nf))
}

/// Conditional stress expectation for a fixed interaction matrix, to third
/// order in `t`.
pub fn stress_expectation(params: &ModelParams, m: &Matrix, t: f64) -> Result<ExpansionBreakdown> {
    params.validate()?;
    params.require_matrix(m)?;
    require_time(t)?;
    let (first, second) = contraction_terms(m)?;
    let s2 = params.sigma * params.sigma;
    let nm1 = (params.n_banks - 1) as f64;
    let beta = params.beta;
    let gamma = params.gamma;
    let order_gamma = s2 * params.coupling() / nm1 * first * (1.0 - beta * t / 3.0) * t * t;
    let order_gamma2 = s2 * beta * gamma * gamma / (3.0 * nm1) * second * t * t * t;
    Ok(ExpansionBreakdown::new(s2 * t, order_gamma, order_gamma2))
}

/// Stress expectation averaged over i.i.d. standard normal matrices,
/// `σ² t [1 + βγ²(N+1)t²/3]`.
pub fn random_matrix_stress(params: &ModelParams, t: f64) -> Result<f64> {
    Ok(params.sigma * params.sigma * t + random_matrix_correction(params, t)?)
}

/// Interaction part of [`random_matrix_stress`], `σ²βγ²(N+1)t³/3`.
pub fn random_matrix_correction(params: &ModelParams, t: f64) -> Result<f64> {
    params.validate()?;
    require_time(t)?;
    let n = params.n_banks as f64;
    let g2 = params.gamma * params.gamma;
    Ok(params.sigma * params.sigma * params.beta * g2 * (n + 1.0) * t * t * t / 3.0)
}

/// Leading-order variance across matrices of the interaction correction,
/// `σ⁴βγ²t⁴/(N-1)`.
pub fn correction_variance(params: &ModelParams, t: f64) -> Result<f64> {
    params.validate()?;
    require_time(t)?;
    let s4 = libm::pow(params.sigma, 4.0);
    let nm1 = (params.n_banks - 1) as f64;
    Ok(s4 * params.beta * params.gamma * params.gamma * libm::pow(t, 4.0) / nm1)
}

/// `Σ_i (M̃_ii - (1/N) Σ_j M̃_ij)`.
fn symmetric_contraction(m: &Matrix) -> Result<f64> {
    let sym = symmetrize(m)?;
    let n = sym.rows() as f64;
    Ok(sym.trace() - sym.sum() / n)
}

/// Stochastic-volatility correction to the stress expectation in its
/// published form, `σ²√βγν² Σ_i (M̃_ii - (1/N) Σ_j M̃_ij) t³/6`.
///
/// Unlike [`stress_expectation`] it carries no `1/(N-1)`; see
/// [`stochvol_correction_normalized`].
pub fn stochvol_correction(params: &ModelParams, m: &Matrix, t: f64) -> Result<f64> {
    params.validate()?;
    params.require_matrix(m)?;
    require_time(t)?;
    let nu2 = params.volvol * params.volvol;
    let s2 = params.sigma * params.sigma;
    Ok(s2 * params.coupling() * nu2 * symmetric_contraction(m)? * t * t * t / 6.0)
}

/// [`stochvol_correction`] with the `1/(N-1)` of the stress normalisation.
pub fn stochvol_correction_normalized(params: &ModelParams, m: &Matrix, t: f64) -> Result<f64> {
    Ok(stochvol_correction(params, m, t)? / (params.n_banks - 1) as f64)
}

/// Matrix-independent stress shift from the growth of `E σ(t)²` under a
/// driftless geometric Brownian volatility, `σ²[(e^{ν²t} - 1)/ν² - t]`.
pub fn stochvol_level_shift(params: &ModelParams, t: f64) -> Result<f64> {
    params.validate()?;
    require_time(t)?;
    let nu2 = params.volvol * params.volvol;
    if nu2 == 0.0 {
        return Ok(0.0);
    }
    let s2 = params.sigma * params.sigma;
    Ok(s2 * (libm::expm1(nu2 * t) / nu2 - t))
}

/// Total leading-order effect of stochastic volatility on the stress
/// expectation: [`stochvol_level_shift`] plus
/// [`stochvol_correction_normalized`].
pub fn stochvol_stress_shift(params: &ModelParams, m: &Matrix, t: f64) -> Result<f64> {
    Ok(stochvol_level_shift(params, t)? + stochvol_correction_normalized(params, m, t)?)
}

/// Market-level uncertainty `z(t)` to third order in `t`.
///
/// The leading term is reported as `σ² t`. The squared cross-sectional mean
/// of independent noises has expectation `σ² t / N`; see
/// [`market_noise_floor`].
pub fn market_uncertainty(
    params: &ModelParams,
    m: &Matrix,
    t: f64,
    average: MarketAverage,
) -> Result<ExpansionBreakdown> {
    params.validate()?;
    require_time(t)?;
    let s2 = params.sigma * params.sigma;
    let n = params.n_banks as f64;
    let beta = params.beta;
    let g2 = params.gamma * params.gamma;
    match average {
        MarketAverage::Conditional => {
            params.require_matrix(m)?;
            let col = column_sums(m);
            let row = row_sums(m);
            let total: f64 = m.sum();
            let cross: f64 = col.iter().zip(&row).map(|(c, r)| c * (c + r)).sum();
            let order_gamma = s2 * params.coupling() / (n * n) * total * (1.0 - beta * t / 3.0) * t * t;
            let order_gamma2 = s2 * beta * g2 / (3.0 * n * n) * cross * t * t * t;
            Ok(ExpansionBreakdown::new(s2 * t, order_gamma, order_gamma2))
        }
        MarketAverage::Ensemble => {
            let order_gamma2 = s2 * beta * g2 * (1.0 + 1.0 / n) * t * t * t / 3.0;
            Ok(ExpansionBreakdown::new(s2 * t, 0.0, order_gamma2))
        }
    }
}

/// Expectation `σ² t / N` of the squared market level without interactions.
pub fn market_noise_floor(params: &ModelParams, t: f64) -> Result<f64> {
    params.validate()?;
    require_time(t)?;
    Ok(params.sigma * params.sigma * t / params.n_banks as f64)
}

/// True when the `t²` coefficients of the stress and of the market-level
/// uncertainty have opposite signs, or both vanish.
///
/// Intended for matrices without self-interaction, where only off-diagonal
/// entries contribute.
pub fn sign_opposition_check(m: &Matrix) -> Result<bool> {
    let n = m.require_square("interaction matrix")? as f64;
    let (first, _) = contraction_terms(m)?;
    // Positive prefactors σ²√βγ/(N-1) and σ²√βγ/N² drop out of the sign.
    let y_coef = first;
    let z_coef = m.sum() / (n * n);
    Ok((y_coef == 0.0 && z_coef == 0.0) || y_coef * z_coef < 0.0)
}

/// Correlations truncated at the printed orders:
/// `ws_ij = t²/2 [M_ji (1 - βt/3) + c (MM)_ji t/3]`, `ss = M Mᵀ t³/3`.
pub fn expansion_correlations(params: &ModelParams, m: &Matrix, t: f64) -> Result<CorrelationMatrices> {
    params.validate()?;
    params.require_matrix(m)?;
    require_time(t)?;
    let mt = m.transpose();
    let mm_t = m.matmul(m)?.transpose();
    let c = params.coupling();
    let half_t2 = 0.5 * t * t;
    let mut ws = mt.scale(half_t2 * (1.0 - params.beta * t / 3.0));
    let correction = mm_t.scale(half_t2 * c * t / 3.0);
    ws = ws.add(&correction)?;
    let ss = m.matmul(&mt)?.scale(t * t * t / 3.0);
    Ok(CorrelationMatrices { ws, ss })
}

/// Evaluates both correlation integrals with composite Gauss–Legendre rules
/// on `panels` panels.
fn correlation_integrals(
    a_hat: &Matrix,
    m: &Matrix,
    t: f64,
    rule: &GaussLegendre,
    panels: usize,
) -> Result<CorrelationMatrices> {
    let n = m.rows();
    let mut ws_t = Matrix::zeros(n, n);
    let mut ss = Matrix::zeros(n, n);
    for (tau, w_outer) in rule.composite(0.0, t, panels) {
        let mut v = Matrix::zeros(n, n);
        for (u, w_inner) in rule.composite(0.0, tau, panels) {
            let e = expm(a_hat, u)?;
            v = v.add(&e.scale(w_inner))?;
        }
        let mv = m.matmul(&v)?;
        ws_t = ws_t.add(&mv.scale(w_outer))?;
        ss = ss.add(&mv.matmul(&mv.transpose())?.scale(w_outer))?;
    }
    Ok(CorrelationMatrices {
        ws: ws_t.transpose(),
        ss,
    })
}

/// Exact correlations by nested composite Gauss–Legendre quadrature of the
/// matrix-exponential integrands.
///
/// The panel count doubles until successive refinements agree within `tol`
/// in every entry; the finer result is returned.
pub fn correlation_quadrature(
    params: &ModelParams,
    m: &Matrix,
    t: f64,
    tol: f64,
) -> Result<CorrelationMatrices> {
    params.validate()?;
    params.require_matrix(m)?;
    if !(t.is_finite() && t > 0.0) {
        return Err(invalid("t", format!("must be finite and > 0, got {t}")));
    }
    if !(tol.is_finite() && tol > 0.0) {
        return Err(invalid("tol", format!("must be finite and > 0, got {tol}")));
    }
    let a_hat = build_drift_matrix(params, m)?;
    let rule = GaussLegendre::new(PANEL_NODES);
    let mut panels = 1;
    let mut coarse = correlation_integrals(&a_hat, m, t, &rule, panels)?;
    let mut change = f64::INFINITY;
    while panels < MAX_PANELS {
        panels *= 2;
        let fine = correlation_integrals(&a_hat, m, t, &rule, panels)?;
        change = fine.ws.max_abs_diff(&coarse.ws).max(fine.ss.max_abs_diff(&coarse.ss));
        if !change.is_finite() {
            return Err(Error::Divergence(format!("correlation integrals overflowed at t = {t}")));
        }
        if change <= tol {
            return Ok(fine);
        }
        coarse = fine;
    }
    Err(Error::Tolerance { tol, achieved: change })
}

/// Assembles the bank covariance from correlations and contracts it into the
/// stress expectation `σ²/(N-1) Σ_i (C_ii - (1/N) Σ_j C_ij)`.
pub fn stress_from_correlations(corr: &CorrelationMatrices, params: &ModelParams, t: f64) -> Result<f64> {
    params.validate()?;
    params.require_matrix(&corr.ws)?;
    params.require_matrix(&corr.ss)?;
    require_time(t)?;
    let n = params.n_banks;
    let nf = n as f64;
    let c = params.coupling();
    let c2 = c * c;
    let mut acc = 0.0;
    for i in 0..n {
        let mut row = 0.0;
        let mut diag = 0.0;
        for j in 0..n {
            let delta = if i == j { t } else { 0.0 };
            let cij = delta + c2 * corr.ss[(i, j)] + c * (corr.ws[(i, j)] + corr.ws[(j, i)]);
            row += cij;
            if i == j {
                diag = cij;
            }
        }
        acc += diag - row / nf;
    }
    Ok(params.sigma * params.sigma * acc / (nf - 1.0))
}
