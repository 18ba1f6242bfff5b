//! The proximal-perturbed Lagrangian (P-Lagrangian) primal-dual method.
//!
//! For `min f(x) + h(x) s.t. Ax = b` the method works on
//!
//! ```text
//! L_β(x, z, λ, µ) = f(x) + ⟨λ, Ax − b − z⟩ + ⟨µ, z⟩ + (α/2)‖z‖² − (β/2)‖λ − µ‖² + h(x)
//! ```
//!
//! and performs, per iteration and in this order,
//!
//! ```text
//! x⁺ = prox_{ηh}(x − η(∇f(x) + Aᵀλ))
//! τ  = δ / (‖λ − µ‖² + 1),      µ⁺ = µ + τ(λ − µ)
//! λ⁺ = µ⁺ + ρ(Ax⁺ − b),         ρ = α / (1 + αβ)
//! z⁺ = (λ⁺ − µ⁺) / α
//! δ⁺ = r δ
//! ```
//!
//! The penalty `α` stays fixed for the whole run; only `δ` decays.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::diagnostics::{self, DescentCertificate};
use crate::error::{check_len, Error, Result};
use crate::linalg;
use crate::problem::CompositeProblem;
use crate::prox::ExtendedReal;
use crate::rng::NormalStream;
use crate::trace::{
    CertificateSummary, IterationRecord, SolveResult, StoppingRule, Termination, TraceSink,
};

/// `ρ = α / (1 + αβ)`.
pub fn derive_rho(alpha: f64, beta: f64) -> Result<f64> {
    check_alpha_beta(alpha, beta)?;
    Ok(alpha / (1.0 + alpha * beta))
}

fn check_alpha_beta(alpha: f64, beta: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::invalid(format!("alpha must be positive, got {alpha}")));
    }
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::invalid(format!("beta must lie in (0, 1), got {beta}")));
    }
    Ok(())
}

/// `L_f + (2 + 1/(1+αβ)) ρ σ_max²`, the reciprocal of the largest admissible step.
pub fn step_denominator(lipschitz: f64, sigma_max: f64, alpha: f64, beta: f64) -> Result<f64> {
    let rho = derive_rho(alpha, beta)?;
    Ok(lipschitz + (2.0 + 1.0 / (1.0 + alpha * beta)) * rho * sigma_max * sigma_max)
}

/// `η = safety / (L_f + (2 + 1/(1+αβ)) ρ σ_max²)`.
pub fn default_eta(lipschitz: f64, sigma_max: f64, alpha: f64, beta: f64, safety: f64) -> Result<f64> {
    if !(safety > 0.0 && safety <= 1.0) {
        return Err(Error::invalid(format!("eta safety must lie in (0, 1], got {safety}")));
    }
    if !(lipschitz > 0.0 && lipschitz.is_finite()) {
        return Err(Error::invalid(format!("L_f must be positive, got {lipschitz}")));
    }
    if !(sigma_max >= 0.0 && sigma_max.is_finite()) {
        return Err(Error::invalid(format!("sigma_max must be nonnegative, got {sigma_max}")));
    }
    Ok(safety / step_denominator(lipschitz, sigma_max, alpha, beta)?)
}

/// User-facing knobs; [`PplagConfig::resolve`] turns them into [`PplagParams`]
/// for a concrete problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PplagConfig {
    pub alpha: f64,
    pub beta: f64,
    pub r_ratio: f64,
    pub delta0: f64,
    pub eta_safety: f64,
}

impl Default for PplagConfig {
    fn default() -> Self {
        Self {
            alpha: 1e3,
            beta: 0.5,
            r_ratio: 1.0 - 1e-7,
            delta0: 0.5,
            eta_safety: 1.0,
        }
    }
}

impl PplagConfig {
    pub fn resolve(&self, p: &CompositeProblem) -> Result<PplagParams> {
        let eta = default_eta(p.lipschitz(), p.sigma_max(), self.alpha, self.beta, self.eta_safety)?;
        PplagParams::new(self.alpha, self.beta, self.r_ratio, self.delta0, eta)
    }
}

/// Constants of one P-Lagrangian run. `ρ` is always recomputed from `α, β`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PplagParams {
    alpha: f64,
    beta: f64,
    r_ratio: f64,
    delta0: f64,
    eta: f64,
}

impl PplagParams {
    pub fn new(alpha: f64, beta: f64, r_ratio: f64, delta0: f64, eta: f64) -> Result<Self> {
        check_alpha_beta(alpha, beta)?;
        if !(r_ratio > 0.9 && r_ratio < 1.0) {
            return Err(Error::invalid(format!("r must lie in (0.9, 1), got {r_ratio}")));
        }
        if !(delta0 > 0.0 && delta0 <= 1.0) {
            return Err(Error::invalid(format!("delta0 must lie in (0, 1], got {delta0}")));
        }
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::invalid(format!("eta must be positive, got {eta}")));
        }
        Ok(Self {
            alpha,
            beta,
            r_ratio,
            delta0,
            eta,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn rho(&self) -> f64 {
        self.alpha / (1.0 + self.alpha * self.beta)
    }

    pub fn r_ratio(&self) -> f64 {
        self.r_ratio
    }

    pub fn delta0(&self) -> f64 {
        self.delta0
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// `γ = ½(1/η − L_f − (2 + 1/(1+αβ)) ρ σ_max²)`; zero when `η` sits
    /// exactly on its bound, negative when it exceeds it.
    pub fn descent_modulus(&self, p: &CompositeProblem) -> f64 {
        let denom = p.lipschitz()
            + (2.0 + 1.0 / (1.0 + self.alpha * self.beta)) * self.rho() * p.sigma_max().powi(2);
        0.5 * (1.0 / self.eta - denom)
    }

    /// Rejects a step above the admissible bound. A step equal to the bound
    /// (up to rounding) is accepted with a warning.
    pub fn check_step(&self, p: &CompositeProblem) -> Result<()> {
        let bound = 1.0 / step_denominator(p.lipschitz(), p.sigma_max(), self.alpha, self.beta)?;
        let rel = (self.eta - bound) / bound;
        if rel > 1e-12 {
            return Err(Error::invalid(format!(
                "eta = {:e} exceeds the admissible bound {:e}",
                self.eta, bound
            )));
        }
        if rel > -1e-12 {
            log::warn!("eta = {:e} equals its bound; descent is certified only up to the equality case", self.eta);
        }
        Ok(())
    }
}

/// The iterate `w_k = (x, z, λ, µ)` plus `δ_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PplagState {
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    pub lambda: Vec<f64>,
    pub mu: Vec<f64>,
    pub delta: f64,
    pub k: u64,
    /// `τ` of the step that produced this state (0 before the first step).
    pub tau_last: f64,
}

impl PplagState {
    /// `(prox_{ηh}(x0), 0, 0, 0)` with `δ = δ₀`.
    pub fn initial(p: &CompositeProblem, params: &PplagParams, x0: &[f64]) -> Result<Self> {
        p.check_primal(x0)?;
        let x = p.h().apply(params.eta(), x0)?;
        let m = p.m();
        Ok(Self {
            x,
            z: vec![0.0; m],
            lambda: vec![0.0; m],
            mu: vec![0.0; m],
            delta: params.delta0(),
            k: 0,
            tau_last: 0.0,
        })
    }

    /// [`PplagState::initial`] from a standard-normal `x0` drawn with `seed`.
    pub fn random_initial(p: &CompositeProblem, params: &PplagParams, seed: u64) -> Result<Self> {
        let x0 = NormalStream::new(seed).normals(p.n());
        Self::initial(p, params, &x0)
    }

    pub fn validate(&self, p: &CompositeProblem) -> Result<()> {
        p.check_primal(&self.x)?;
        check_len("z", p.m(), self.z.len())?;
        p.check_dual(&self.lambda)?;
        p.check_dual(&self.mu)?;
        Ok(())
    }
}

/// `∇_x ℓ_β(x, ·, λ, ·) = ∇f(x) + Aᵀλ`; independent of `z` and `µ`.
pub fn grad_smooth(p: &CompositeProblem, x: &[f64], lambda: &[f64]) -> Result<Vec<f64>> {
    p.check_primal(x)?;
    p.check_dual(lambda)?;
    Ok(grad_smooth_unchecked(p, x, lambda))
}

pub(crate) fn grad_smooth_unchecked(p: &CompositeProblem, x: &[f64], lambda: &[f64]) -> Vec<f64> {
    let mut g = p.objective().gradient(x);
    let mut at_lambda = vec![0.0; p.n()];
    p.a().tr_mul_vec_into(lambda, &mut at_lambda);
    linalg::axpy(1.0, &at_lambda, &mut g);
    g
}

/// The linearized proximal x-update.
pub fn step_x(p: &CompositeProblem, params: &PplagParams, state: &PplagState) -> Result<Vec<f64>> {
    let g = grad_smooth(p, &state.x, &state.lambda)?;
    step_x_with_grad(p, params, &state.x, &g)
}

fn step_x_with_grad(p: &CompositeProblem, params: &PplagParams, x: &[f64], g: &[f64]) -> Result<Vec<f64>> {
    let eta = params.eta();
    let v: Vec<f64> = x.iter().zip(g).map(|(xi, gi)| xi - eta * gi).collect();
    p.h().apply(eta, &v)
}

/// Returns `(µ_{k+1}, τ_k)`.
pub fn step_mu(state: &PplagState) -> (Vec<f64>, f64) {
    let gap_sq = linalg::dist_sq(&state.lambda, &state.mu);
    let tau = state.delta / (gap_sq + 1.0);
    let mu = state
        .mu
        .iter()
        .zip(&state.lambda)
        .map(|(m, l)| m + tau * (l - m))
        .collect();
    (mu, tau)
}

/// `λ_{k+1} = µ_{k+1} + ρ(Ax_{k+1} − b)`.
pub fn step_lambda(
    p: &CompositeProblem,
    params: &PplagParams,
    x_next: &[f64],
    mu_next: &[f64],
) -> Result<Vec<f64>> {
    p.check_primal(x_next)?;
    p.check_dual(mu_next)?;
    let mut res = vec![0.0; p.m()];
    p.residual_into(x_next, &mut res);
    let rho = params.rho();
    Ok(mu_next.iter().zip(&res).map(|(m, r)| m + rho * r).collect())
}

/// `z_{k+1} = (λ_{k+1} − µ_{k+1}) / α`.
pub fn step_z(params: &PplagParams, lambda_next: &[f64], mu_next: &[f64]) -> Result<Vec<f64>> {
    check_len("z-update", lambda_next.len(), mu_next.len())?;
    let alpha = params.alpha();
    Ok(lambda_next
        .iter()
        .zip(mu_next)
        .map(|(l, m)| (l - m) / alpha)
        .collect())
}

fn finite_or(step: &'static str, iteration: u64, v: &[f64]) -> Result<()> {
    if linalg::all_finite(v) {
        Ok(())
    } else {
        Err(Error::NumericalFailure { step, iteration })
    }
}

/// One full iteration: x, then µ, then λ, then z, then δ.
pub fn iterate(p: &CompositeProblem, params: &PplagParams, state: &PplagState) -> Result<PplagState> {
    state.validate(p)?;
    let g = grad_smooth_unchecked(p, &state.x, &state.lambda);
    advance(p, params, state, &g)
}

/// [`iterate`] with `∇_x ℓ_β(w_k)` supplied by the caller.
fn advance(p: &CompositeProblem, params: &PplagParams, state: &PplagState, g: &[f64]) -> Result<PplagState> {
    let k = state.k;
    finite_or("gradient", k, g)?;
    let x = step_x_with_grad(p, params, &state.x, g)?;
    finite_or("x", k, &x)?;
    let (mu, tau) = step_mu(state);
    finite_or("mu", k, &mu)?;
    let lambda = step_lambda(p, params, &x, &mu)?;
    finite_or("lambda", k, &lambda)?;
    let z = step_z(params, &lambda, &mu)?;
    finite_or("z", k, &z)?;
    Ok(PplagState {
        x,
        z,
        lambda,
        mu,
        delta: params.r_ratio() * state.delta,
        k: k + 1,
        tau_last: tau,
    })
}

/// `L_β(w)`, or `+∞` when `h(x) = +∞`.
pub fn lagrangian_value(p: &CompositeProblem, params: &PplagParams, w: &PplagState) -> Result<ExtendedReal> {
    w.validate(p)?;
    let h = p.h().value(&w.x);
    if !h.is_finite() {
        return Ok(ExtendedReal::PosInfinity);
    }
    Ok(h.plus(smooth_lagrangian(p, params, w, p.objective().value(&w.x))))
}

/// `ℓ_β(w)` given `f(x)`.
fn smooth_lagrangian(p: &CompositeProblem, params: &PplagParams, w: &PplagState, f_value: f64) -> f64 {
    let mut res = vec![0.0; p.m()];
    p.residual_into(&w.x, &mut res);
    let coupling: f64 = w
        .lambda
        .iter()
        .zip(&res)
        .zip(&w.z)
        .map(|((l, r), z)| l * (r - z))
        .sum();
    f_value + coupling + linalg::dot(&w.mu, &w.z) + 0.5 * params.alpha() * linalg::norm_sq(&w.z)
        - 0.5 * params.beta() * linalg::dist_sq(&w.lambda, &w.mu)
}

/// `f(x) + (1/2ρ)‖λ‖² − (1/2ρ)‖µ‖² + h(x)`: equal to [`lagrangian_value`]
/// at every iterate produced by [`iterate`].
pub fn lagrangian_closed_form(p: &CompositeProblem, params: &PplagParams, w: &PplagState) -> Result<ExtendedReal> {
    w.validate(p)?;
    let rho = params.rho();
    let f = p.objective().value(&w.x);
    Ok(p.h()
        .value(&w.x)
        .plus(f + (linalg::norm_sq(&w.lambda) - linalg::norm_sq(&w.mu)) / (2.0 * rho)))
}

/// Partial gradients `(∇_λ L_β, ∇_z L_β, ∇_µ L_β)` at `w`.
pub fn multiplier_gradients(
    p: &CompositeProblem,
    params: &PplagParams,
    w: &PplagState,
) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    w.validate(p)?;
    let mut res = vec![0.0; p.m()];
    p.residual_into(&w.x, &mut res);
    let (alpha, beta) = (params.alpha(), params.beta());
    let mut g_lambda = Vec::with_capacity(p.m());
    let mut g_z = Vec::with_capacity(p.m());
    let mut g_mu = Vec::with_capacity(p.m());
    for i in 0..p.m() {
        let gap = w.lambda[i] - w.mu[i];
        g_lambda.push(res[i] - w.z[i] - beta * gap);
        g_z.push(alpha * w.z[i] - gap);
        g_mu.push(w.z[i] + beta * gap);
    }
    Ok((g_lambda, g_z, g_mu))
}

/// Runs the method from `init` until both residuals fall below tolerance or
/// the iteration cap is hit, streaming records into `sink`.
pub fn solve<S: TraceSink>(
    p: &CompositeProblem,
    params: &PplagParams,
    init: PplagState,
    stop: &StoppingRule,
    mut sink: S,
) -> Result<SolveResult<PplagState>> {
    stop.validate()?;
    init.validate(p)?;
    params.check_step(p)?;
    let started = Instant::now();
    let gamma = params.descent_modulus(p);

    let mut state = init;
    let mut grad = grad_smooth_unchecked(p, &state.x, &state.lambda);
    let mut f_val = p.objective().value(&state.x);
    let mut lag = p.h().value(&state.x).plus(smooth_lagrangian(p, params, &state, f_val));
    let mut summary = CertificateSummary {
        max_mu_norm: linalg::norm(&state.mu),
        ..Default::default()
    };
    let mut residual = vec![0.0; p.m()];

    loop {
        let next = advance(p, params, &state, &grad)?;
        let k = next.k;
        let next_grad = grad_smooth_unchecked(p, &next.x, &next.lambda);
        finite_or("gradient", k, &next_grad)?;
        let next_f = p.objective().value(&next.x);
        let h_next = p.h().value(&next.x);
        let next_lag = h_next.plus(smooth_lagrangian(p, params, &next, next_f));

        let stationarity = diagnostics::stationarity_residual(p.h(), &next.x, &next_grad)?;
        p.residual_into(&next.x, &mut residual);
        let feasibility = linalg::norm(&residual);

        let coupled = diagnostics::is_coupled(p, params, &state);
        let descent = if coupled {
            diagnostics::descent_certificate_from_values(
                params, gamma, &state, &next, lag, next_lag,
            )
        } else {
            DescentCertificate::NotApplicable
        };
        if let DescentCertificate::Checked { passed, relative_gap, .. } = descent {
            summary.descent_checked += 1;
            if !passed {
                summary.descent_failed += 1;
            }
            summary.descent_worst_relative_gap = summary.descent_worst_relative_gap.max(relative_gap);
        }
        let d_norm = {
            let d = diagnostics::subgradient_from_grads(params, &state, &next, &grad, &next_grad);
            if coupled {
                summary.d_bound_checked += 1;
                let bound = diagnostics::d_bound(p, params, &state, &next);
                if d.norm > bound + diagnostics::CERTIFICATE_SLACK * (1.0 + bound) {
                    summary.d_bound_failed += 1;
                }
            }
            d.norm
        };
        let mu_norm = linalg::norm(&next.mu);
        summary.max_mu_norm = summary.max_mu_norm.max(mu_norm);

        let done = stop.satisfied(stationarity, feasibility);
        let last = done || k >= stop.max_iters;
        if stop.should_record(k, last) {
            let dz = linalg::dist(&next.z, &state.z);
            sink.record(&IterationRecord {
                k,
                objective: h_next.plus(next_f).finite().unwrap_or(next_f),
                stationarity,
                feasibility,
                lagrangian: next_lag.finite(),
                dual_norm_lambda: linalg::norm(&next.lambda),
                dual_norm_mu: Some(mu_norm),
                delta: Some(next.delta),
                d_norm: Some(d_norm),
                descent_ok: descent.passed(),
                wallclock_ns: started.elapsed().as_nanos() as u64,
                tau: Some(next.tau_last),
                z_ratio: (dz > 0.0).then(|| linalg::norm(&next.z) / dz),
            })?;
        }

        state = next;
        grad = next_grad;
        f_val = next_f;
        lag = next_lag;

        if last {
            let termination = if done {
                Termination::Tolerance
            } else {
                Termination::IterationCap
            };
            return Ok(SolveResult {
                iterations: state.k,
                objective: h_next.plus(f_val).finite().unwrap_or(f_val),
                state,
                termination,
                stationarity,
                feasibility,
                wallclock_ns: started.elapsed().as_nanos() as u64,
                certificates: Some(summary),
            });
        }
    }
}
