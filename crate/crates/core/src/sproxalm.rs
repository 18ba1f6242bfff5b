//! SProx-ALM, the smoothed proximal augmented Lagrangian baseline.
//!
//! ```text
//! λ⁺ = λ + α̃(Ax − b)
//! x⁺ = Π_X[x − c ∇_x K(x, z, λ⁺)]
//! z⁺ = z + β̃(x⁺ − z)
//! ```
//!
//! with `K(x, z, λ) = f(x) + ⟨λ, Ax − b⟩ + (γ/2)‖Ax − b‖² + (p/2)‖x − z‖²`.
//! Only box-constrained problems are supported.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::diagnostics;
use crate::error::{check_len, Error, Result};
use crate::linalg;
use crate::problem::{BoxSet, CompositeProblem};
use crate::rng::NormalStream;
use crate::trace::{IterationRecord, SolveResult, StoppingRule, Termination, TraceSink};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SproxParams {
    /// Augmented-Lagrangian penalty `γ`.
    pub gamma: f64,
    /// Dual step `α̃`.
    pub alpha_t: f64,
    /// Proximal weight `p`.
    pub p: f64,
    /// Anchor relaxation `β̃`.
    pub beta_t: f64,
    /// Primal step `c`.
    pub c: f64,
}

impl SproxParams {
    pub fn new(gamma: f64, alpha_t: f64, p: f64, beta_t: f64, c: f64) -> Result<Self> {
        let params = Self {
            gamma,
            alpha_t,
            p,
            beta_t,
            c,
        };
        params.validate()?;
        Ok(params)
    }

    /// `α̃ = γ/4`, `p = 2L_f`, `β̃ = 0.5`, `c = 1/(2(L_f + p + γσ_max²))`.
    pub fn defaults(prob: &CompositeProblem, gamma: f64) -> Result<Self> {
        let lf = prob.lipschitz();
        let p = 2.0 * lf;
        let c = 1.0 / (2.0 * (lf + p + gamma * prob.sigma_max().powi(2)));
        Self::new(gamma, gamma / 4.0, p, 0.5, c)
    }

    /// Default penalty `γ = 2L_f`.
    pub fn default_gamma(prob: &CompositeProblem) -> f64 {
        2.0 * prob.lipschitz()
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} must be positive, got {v}")))
            }
        };
        positive("gamma", self.gamma)?;
        positive("alpha_t", self.alpha_t)?;
        positive("p", self.p)?;
        positive("c", self.c)?;
        if !(self.beta_t > 0.0 && self.beta_t <= 1.0) {
            return Err(Error::invalid(format!("beta_t must lie in (0, 1], got {}", self.beta_t)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SproxState {
    pub x: Vec<f64>,
    /// Proximal anchor.
    pub z: Vec<f64>,
    pub lambda: Vec<f64>,
    pub k: u64,
}

impl SproxState {
    /// `x = z = Π_X[x0]`, `λ = 0`.
    pub fn initial(prob: &CompositeProblem, x0: &[f64]) -> Result<Self> {
        prob.check_primal(x0)?;
        let x = box_of(prob)?.project(x0);
        Ok(Self {
            z: x.clone(),
            x,
            lambda: vec![0.0; prob.m()],
            k: 0,
        })
    }

    pub fn random_initial(prob: &CompositeProblem, seed: u64) -> Result<Self> {
        let x0 = NormalStream::new(seed).normals(prob.n());
        Self::initial(prob, &x0)
    }

    fn validate(&self, prob: &CompositeProblem) -> Result<()> {
        prob.check_primal(&self.x)?;
        check_len("anchor", prob.n(), self.z.len())?;
        prob.check_dual(&self.lambda)
    }
}

fn box_of(prob: &CompositeProblem) -> Result<&BoxSet> {
    prob.h()
        .as_box()
        .ok_or_else(|| Error::invalid("SProx-ALM requires a box-indicator h"))
}

/// `∇f(x) + Aᵀλ + γAᵀ(Ax − b) + p(x − z)`.
pub fn grad_k(
    prob: &CompositeProblem,
    params: &SproxParams,
    x: &[f64],
    z: &[f64],
    lambda: &[f64],
) -> Result<Vec<f64>> {
    prob.check_primal(x)?;
    check_len("anchor", prob.n(), z.len())?;
    prob.check_dual(lambda)?;
    let mut res = vec![0.0; prob.m()];
    prob.residual_into(x, &mut res);
    let weights: Vec<f64> = lambda.iter().zip(&res).map(|(l, r)| l + params.gamma * r).collect();
    let mut g = prob.objective().gradient(x);
    let mut at = vec![0.0; prob.n()];
    prob.a().tr_mul_vec_into(&weights, &mut at);
    for i in 0..g.len() {
        g[i] += at[i] + params.p * (x[i] - z[i]);
    }
    Ok(g)
}

/// `K(x, z, λ)`.
pub fn k_value(prob: &CompositeProblem, params: &SproxParams, x: &[f64], z: &[f64], lambda: &[f64]) -> Result<f64> {
    Ok(augmented_lagrangian(prob, params, x, lambda)? + 0.5 * params.p * linalg::dist_sq(x, z))
}

/// `L(x, λ) = f(x) + ⟨λ, Ax − b⟩ + (γ/2)‖Ax − b‖²`.
pub fn augmented_lagrangian(prob: &CompositeProblem, params: &SproxParams, x: &[f64], lambda: &[f64]) -> Result<f64> {
    prob.check_dual(lambda)?;
    let res = prob.constraint_residual(x)?;
    Ok(prob.objective().value(x) + linalg::dot(lambda, &res) + 0.5 * params.gamma * linalg::norm_sq(&res))
}

/// `∇_x L(x, λ) = ∇f(x) + Aᵀ(λ + γ(Ax − b))`.
pub fn grad_augmented_lagrangian(
    prob: &CompositeProblem,
    params: &SproxParams,
    x: &[f64],
    lambda: &[f64],
) -> Result<Vec<f64>> {
    grad_k(prob, &SproxParams { p: 0.0, ..*params }, x, x, lambda)
}

fn nonfinite(step: &'static str, iteration: u64, v: &[f64]) -> Result<()> {
    if linalg::all_finite(v) {
        Ok(())
    } else {
        Err(Error::NumericalFailure { step, iteration })
    }
}

/// One SProx-ALM iteration: λ first, then x, then z.
pub fn sprox_iterate(prob: &CompositeProblem, params: &SproxParams, state: &SproxState) -> Result<SproxState> {
    let bounds = box_of(prob)?;
    state.validate(prob)?;
    let k = state.k;
    let res = prob.constraint_residual(&state.x)?;
    let lambda: Vec<f64> = state
        .lambda
        .iter()
        .zip(&res)
        .map(|(l, r)| l + params.alpha_t * r)
        .collect();
    nonfinite("lambda", k, &lambda)?;
    let g = grad_k(prob, params, &state.x, &state.z, &lambda)?;
    nonfinite("gradient", k, &g)?;
    let trial: Vec<f64> = state.x.iter().zip(&g).map(|(x, gi)| x - params.c * gi).collect();
    let x = bounds.project(&trial);
    nonfinite("x", k, &x)?;
    let z: Vec<f64> = state
        .z
        .iter()
        .zip(&x)
        .map(|(zi, xi)| zi + params.beta_t * (xi - zi))
        .collect();
    nonfinite("z", k, &z)?;
    Ok(SproxState { x, z, lambda, k: k + 1 })
}

/// Runs SProx-ALM. Stationarity is `‖x_k − Π_X[x_k − ∇_x L(x_k, λ_k)]‖`.
pub fn sprox_solve<S: TraceSink>(
    prob: &CompositeProblem,
    params: &SproxParams,
    init: SproxState,
    stop: &StoppingRule,
    mut sink: S,
) -> Result<SolveResult<SproxState>> {
    stop.validate()?;
    params.validate()?;
    box_of(prob)?;
    init.validate(prob)?;
    let started = Instant::now();
    let mut state = init;
    loop {
        state = sprox_iterate(prob, params, &state)?;
        let k = state.k;
        let g = grad_augmented_lagrangian(prob, params, &state.x, &state.lambda)?;
        let stationarity = diagnostics::stationarity_residual(prob.h(), &state.x, &g)?;
        let feasibility = crate::problem::feasibility_residual(prob, &state.x)?;
        let objective = prob.objective().value(&state.x);
        let done = stop.satisfied(stationarity, feasibility);
        let last = done || k >= stop.max_iters;
        if stop.should_record(k, last) {
            sink.record(&IterationRecord {
                k,
                objective,
                stationarity,
                feasibility,
                lagrangian: Some(augmented_lagrangian(prob, params, &state.x, &state.lambda)?),
                dual_norm_lambda: linalg::norm(&state.lambda),
                dual_norm_mu: None,
                delta: None,
                d_norm: None,
                descent_ok: None,
                wallclock_ns: started.elapsed().as_nanos() as u64,
                tau: None,
                z_ratio: None,
            })?;
        }
        if last {
            return Ok(SolveResult {
                iterations: k,
                termination: if done {
                    Termination::Tolerance
                } else {
                    Termination::IterationCap
                },
                stationarity,
                feasibility,
                objective,
                state,
                wallclock_ns: started.elapsed().as_nanos() as u64,
                certificates: None,
            });
        }
    }
}
