//! Residuals and per-iteration certificates.
//!
//! The stationarity residual `‖x − prox_h(x − g)‖` (unit step) is a
//! computable surrogate for `dist(0, g + ∂h(x))`: both vanish exactly at
//! the same points, and for a box it is the familiar projected-gradient
//! residual `‖x − Π_X[x − g]‖`. The certificates check the one-step
//! inequalities behind the convergence analysis of the P-Lagrangian method
//! on actual iterates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::pplag::{self, PplagParams, PplagState};
use crate::problem::CompositeProblem;
use crate::prox::{ExtendedReal, ProxSpec};

/// Relative slack used by all certificates.
pub const CERTIFICATE_SLACK: f64 = 1e-9;

/// `‖x − prox_{1·h}(x − g)‖`.
pub fn stationarity_residual(h: &ProxSpec, x: &[f64], g: &[f64]) -> Result<f64> {
    crate::error::check_len("stationarity gradient", x.len(), g.len())?;
    let v: Vec<f64> = x.iter().zip(g).map(|(xi, gi)| xi - gi).collect();
    let p = h.apply(1.0, &v)?;
    Ok(linalg::dist(x, &p))
}

/// `(stationarity, feasibility)` at `(x, λ)` with `g = ∇f(x) + Aᵀλ`.
pub fn kkt_residual(p: &CompositeProblem, x: &[f64], lambda: &[f64]) -> Result<(f64, f64)> {
    let g = pplag::grad_smooth(p, x, lambda)?;
    let stat = stationarity_residual(p.h(), x, &g)?;
    let feas = crate::problem::feasibility_residual(p, x)?;
    Ok((stat, feas))
}

/// ε-KKT verdict for a point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsKktReport {
    pub eps_stat: f64,
    pub eps_feas: f64,
    pub achieved_stat: f64,
    pub achieved_feas: f64,
    pub satisfied: bool,
    pub iter_at: Option<u64>,
}

impl EpsKktReport {
    pub fn new(eps_stat: f64, eps_feas: f64, achieved_stat: f64, achieved_feas: f64, iter_at: Option<u64>) -> Self {
        Self {
            eps_stat,
            eps_feas,
            achieved_stat,
            achieved_feas,
            satisfied: achieved_stat <= eps_stat && achieved_feas <= eps_feas,
            iter_at,
        }
    }
}

/// The element `d_{k+1} = (d1, 0, 0, d2)` of `∂L_β(w_{k+1})`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubgradientD {
    pub d1: Vec<f64>,
    pub d2: Vec<f64>,
    pub norm: f64,
}

fn check_consecutive(w_k: &PplagState, w_next: &PplagState) -> Result<()> {
    if w_next.k != w_k.k + 1 {
        return Err(Error::invalid(format!(
            "iterates are not consecutive (k = {} and {})",
            w_k.k, w_next.k
        )));
    }
    Ok(())
}

/// `d1 = ∇_xℓ_β(w_{k+1}) − ∇_xℓ_β(w_k) + (x_k − x_{k+1})/η`, `d2 = (1+αβ) z_{k+1}`.
pub fn subgradient_vector_d(
    p: &CompositeProblem,
    params: &PplagParams,
    w_k: &PplagState,
    w_next: &PplagState,
) -> Result<SubgradientD> {
    check_consecutive(w_k, w_next)?;
    let g_k = pplag::grad_smooth(p, &w_k.x, &w_k.lambda)?;
    let g_next = pplag::grad_smooth(p, &w_next.x, &w_next.lambda)?;
    Ok(subgradient_from_grads(params, w_k, w_next, &g_k, &g_next))
}

pub(crate) fn subgradient_from_grads(
    params: &PplagParams,
    w_k: &PplagState,
    w_next: &PplagState,
    g_k: &[f64],
    g_next: &[f64],
) -> SubgradientD {
    let inv_eta = 1.0 / params.eta();
    let d1: Vec<f64> = g_next
        .iter()
        .zip(g_k)
        .zip(w_k.x.iter().zip(&w_next.x))
        .map(|((gn, gk), (xk, xn))| gn - gk + inv_eta * (xk - xn))
        .collect();
    let scale = 1.0 + params.alpha() * params.beta();
    let d2: Vec<f64> = w_next.z.iter().map(|z| scale * z).collect();
    let norm = (linalg::norm_sq(&d1) + linalg::norm_sq(&d2)).sqrt();
    SubgradientD { d1, d2, norm }
}

/// `c₂(‖x_{k+1} − x_k‖ + ‖z_{k+1}‖) + σ_max δ_k`,
/// `c₂ = max{L_f + ρσ_max² + 1/η, 1 + αβ}`.
pub fn d_bound(p: &CompositeProblem, params: &PplagParams, w_k: &PplagState, w_next: &PplagState) -> f64 {
    let sigma = p.sigma_max();
    let c2 = (p.lipschitz() + params.rho() * sigma * sigma + 1.0 / params.eta())
        .max(1.0 + params.alpha() * params.beta());
    c2 * (linalg::dist(&w_next.x, &w_k.x) + linalg::norm(&w_next.z)) + sigma * w_k.delta
}

/// Whether `w` satisfies the relations every iterate produced by
/// [`pplag::iterate`] satisfies: `λ − µ = ρ(Ax − b)` and `z = (λ − µ)/α`.
///
/// The one-step certificates assume these hold at the starting iterate, so
/// they are skipped for an arbitrary initial point.
pub fn is_coupled(p: &CompositeProblem, params: &PplagParams, w: &PplagState) -> bool {
    let mut res = vec![0.0; p.m()];
    p.residual_into(&w.x, &mut res);
    let (rho, alpha) = (params.rho(), params.alpha());
    let mut worst_lambda = 0.0_f64;
    let mut worst_z = 0.0_f64;
    let mut scale = 1.0_f64;
    for i in 0..p.m() {
        let gap = w.lambda[i] - w.mu[i];
        worst_lambda = worst_lambda.max((gap - rho * res[i]).abs());
        worst_z = worst_z.max((w.z[i] - gap / alpha).abs());
        scale = scale.max(w.lambda[i].abs()).max(w.mu[i].abs()).max((rho * res[i]).abs());
    }
    worst_lambda <= 1e-10 * scale && worst_z <= 1e-10 * scale / alpha
}

/// Outcome of the descent check for one step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DescentCertificate {
    /// The step does not start from a coupled iterate, `η` exceeds its
    /// bound, or `L_β` is infinite at either end.
    NotApplicable,
    Checked {
        passed: bool,
        /// `RHS − LHS`; negative means violated.
        gap: f64,
        /// `max(0, LHS − RHS) / (1 + |L_β(w_k)|)`.
        relative_gap: f64,
    },
}

impl DescentCertificate {
    pub fn passed(&self) -> Option<bool> {
        match self {
            DescentCertificate::NotApplicable => None,
            DescentCertificate::Checked { passed, .. } => Some(*passed),
        }
    }
}

/// Checks
///
/// ```text
/// L_β(w_{k+1}) − L_β(w_k) <= −γ‖Δx‖² − (α/2)‖Δz‖² + δ_k/ρ + δ_k²/(8ρ) + 1e-9 (1 + |L_β(w_k)|)
/// ```
///
/// with `γ = ½(1/η − L_f − (2 + 1/(1+αβ)) ρ σ_max²)`. When `η` equals its
/// bound, `γ` rounds to (near) zero and is clamped at zero.
pub fn descent_certificate(
    p: &CompositeProblem,
    params: &PplagParams,
    w_k: &PplagState,
    w_next: &PplagState,
) -> Result<DescentCertificate> {
    check_consecutive(w_k, w_next)?;
    if !is_coupled(p, params, w_k) {
        return Ok(DescentCertificate::NotApplicable);
    }
    let l_k = pplag::lagrangian_value(p, params, w_k)?;
    let l_next = pplag::lagrangian_value(p, params, w_next)?;
    Ok(descent_certificate_from_values(
        params,
        params.descent_modulus(p),
        w_k,
        w_next,
        l_k,
        l_next,
    ))
}

pub(crate) fn descent_certificate_from_values(
    params: &PplagParams,
    gamma: f64,
    w_k: &PplagState,
    w_next: &PplagState,
    l_k: ExtendedReal,
    l_next: ExtendedReal,
) -> DescentCertificate {
    let (Some(l_k), Some(l_next)) = (l_k.finite(), l_next.finite()) else {
        return DescentCertificate::NotApplicable;
    };
    // η on its bound leaves γ at rounding level; anything clearly negative
    // means the step is outside the theory.
    if gamma < -1e-12 / params.eta() {
        return DescentCertificate::NotApplicable;
    }
    let gamma = gamma.max(0.0);
    let rho = params.rho();
    let delta = w_k.delta;
    let rhs = -gamma * linalg::dist_sq(&w_next.x, &w_k.x)
        - 0.5 * params.alpha() * linalg::dist_sq(&w_next.z, &w_k.z)
        + delta / rho
        + delta * delta / (8.0 * rho);
    let lhs = l_next - l_k;
    let tol = CERTIFICATE_SLACK * (1.0 + l_k.abs());
    let gap = rhs - lhs;
    DescentCertificate::Checked {
        passed: gap + tol >= 0.0,
        gap,
        relative_gap: (-gap).max(0.0) / (1.0 + l_k.abs()),
    }
}

/// `δ̂_k = δ_k/ρ + δ_k²/(8ρ)`.
pub fn approximate_descent_allowance(params: &PplagParams, delta_k: f64) -> f64 {
    let rho = params.rho();
    delta_k / rho + delta_k * delta_k / (8.0 * rho)
}

/// `δ₀ / (2(1 − r))`: the closed form of `½ Σ_t δ_t`, bounding every `‖µ_k‖`.
pub fn dual_bound(delta0: f64, r_ratio: f64) -> Result<f64> {
    if !(delta0 > 0.0 && delta0 <= 1.0) {
        return Err(Error::invalid(format!("delta0 must lie in (0, 1], got {delta0}")));
    }
    if !(r_ratio > 0.9 && r_ratio < 1.0) {
        return Err(Error::invalid(format!("r must lie in (0.9, 1), got {r_ratio}")));
    }
    Ok(delta0 / (2.0 * (1.0 - r_ratio)))
}
