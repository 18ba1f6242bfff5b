//! Linearly constrained composite problems `min f(x) + h(x) s.t. Ax = b`,
//! the nonconvex LCQP instance family used for benchmarking, and the
//! spectral constants (`L_f`, `σ_max`) the solvers derive step sizes from.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::linalg::{self, DenseMatrix, LinearMap};
use crate::prox::{ExtendedReal, ProxSpec};
use crate::rng::NormalStream;

/// Floor applied to a computed gradient Lipschitz constant so step-size
/// formulas stay finite on degenerate fixtures (e.g. `Q = 0`).
pub const MIN_LIPSCHITZ: f64 = 1e-12;

/// `X = { x : l_i <= x_i <= u_i }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxSet {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl BoxSet {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        check_len("box bounds", lower.len(), upper.len())?;
        if lower.is_empty() {
            return Err(Error::invalid("box must have at least one coordinate"));
        }
        for (i, (l, u)) in lower.iter().zip(&upper).enumerate() {
            if !(l.is_finite() && u.is_finite()) {
                return Err(Error::invalid(format!("box bound {i} is not finite")));
            }
            if l > u {
                return Err(Error::invalid(format!(
                    "box bound {i} is empty: lower {l} > upper {u}"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    pub fn uniform(n: usize, lower: f64, upper: f64) -> Result<Self> {
        Self::new(vec![lower; n], vec![upper; n])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(&self.lower)
                .zip(&self.upper)
                .all(|((v, l), u)| *v >= l - tol && *v <= u + tol)
    }

    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.lower)
            .zip(&self.upper)
            .map(|((v, l), u)| v.clamp(*l, *u))
            .collect()
    }
}

/// The smooth part `f` of the objective: a value and gradient oracle.
pub trait SmoothObjective: Send + Sync {
    fn dim(&self) -> usize;

    fn value(&self, x: &[f64]) -> f64;

    /// Writes `∇f(x)` into `out`.
    fn gradient_into(&self, x: &[f64], out: &mut [f64]);

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dim()];
        self.gradient_into(x, &mut g);
        g
    }
}

/// `f(x) = ½ xᵀQx + rᵀx` with symmetric `Q`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticObjective {
    q: DenseMatrix,
    r: Vec<f64>,
}

impl QuadraticObjective {
    pub fn new(q: DenseMatrix, r: Vec<f64>) -> Result<Self> {
        if !q.is_square() {
            return Err(Error::invalid("quadratic term must be square"));
        }
        if !q.is_symmetric() {
            return Err(Error::invalid(format!(
                "quadratic term must be symmetric (max asymmetry {:e})",
                q.max_asymmetry()
            )));
        }
        check_len("linear term", q.rows(), r.len())?;
        if !linalg::all_finite(&r) {
            return Err(Error::invalid("linear term must be finite"));
        }
        Ok(Self { q, r })
    }

    pub fn q(&self) -> &DenseMatrix {
        &self.q
    }

    pub fn r(&self) -> &[f64] {
        &self.r
    }
}

impl SmoothObjective for QuadraticObjective {
    fn dim(&self) -> usize {
        self.r.len()
    }

    fn value(&self, x: &[f64]) -> f64 {
        let mut qx = vec![0.0; self.r.len()];
        self.q.mul_vec_into(x, &mut qx);
        0.5 * linalg::dot(x, &qx) + linalg::dot(&self.r, x)
    }

    fn gradient_into(&self, x: &[f64], out: &mut [f64]) {
        self.q.mul_vec_into(x, out);
        linalg::axpy(1.0, &self.r, out);
    }
}

/// A smooth objective from a pair of closures.
pub struct FnObjective<V, G> {
    dim: usize,
    value: V,
    gradient: G,
}

impl<V, G> FnObjective<V, G>
where
    V: Fn(&[f64]) -> f64 + Send + Sync,
    G: Fn(&[f64], &mut [f64]) + Send + Sync,
{
    pub fn new(dim: usize, value: V, gradient: G) -> Self {
        Self {
            dim,
            value,
            gradient,
        }
    }
}

impl<V, G> SmoothObjective for FnObjective<V, G>
where
    V: Fn(&[f64]) -> f64 + Send + Sync,
    G: Fn(&[f64], &mut [f64]) + Send + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &[f64]) -> f64 {
        (self.value)(x)
    }

    fn gradient_into(&self, x: &[f64], out: &mut [f64]) {
        (self.gradient)(x, out)
    }
}

/// `min f(x) + h(x)  s.t.  Ax = b`, together with `L_f` and `σ_max(A)`.
///
/// Immutable once built; solver runs share it by reference.
#[derive(Clone)]
pub struct CompositeProblem {
    f: Arc<dyn SmoothObjective>,
    h: ProxSpec,
    a: LinearMap,
    b: Vec<f64>,
    lipschitz: f64,
    sigma_max: f64,
}

impl fmt::Debug for CompositeProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CompositeProblem")
            .field("n", &self.n())
            .field("m", &self.m())
            .field("h", &self.h)
            .field("lipschitz", &self.lipschitz)
            .field("sigma_max", &self.sigma_max)
            .finish()
    }
}

impl CompositeProblem {
    /// Builds a problem, computing `σ_max(A)` by dense SVD. `lipschitz` is
    /// floored at [`MIN_LIPSCHITZ`].
    pub fn new(
        f: Arc<dyn SmoothObjective>,
        h: ProxSpec,
        a: LinearMap,
        b: Vec<f64>,
        lipschitz: f64,
    ) -> Result<Self> {
        let sigma_max = largest_singular_value(&a);
        Self::with_constants(f, h, a, b, lipschitz, sigma_max)
    }

    /// Builds a problem from precomputed constants.
    pub fn with_constants(
        f: Arc<dyn SmoothObjective>,
        h: ProxSpec,
        a: LinearMap,
        b: Vec<f64>,
        lipschitz: f64,
        sigma_max: f64,
    ) -> Result<Self> {
        let n = a.cols();
        check_len("objective dimension", n, f.dim())?;
        check_len("right-hand side", a.rows(), b.len())?;
        h.validate(n)?;
        if !linalg::all_finite(&b) {
            return Err(Error::invalid("right-hand side must be finite"));
        }
        if !(lipschitz.is_finite() && lipschitz >= 0.0) {
            return Err(Error::invalid(format!(
                "Lipschitz constant must be finite and nonnegative, got {lipschitz}"
            )));
        }
        if !(sigma_max.is_finite() && sigma_max >= 0.0) {
            return Err(Error::invalid(format!(
                "sigma_max must be finite and nonnegative, got {sigma_max}"
            )));
        }
        Ok(Self {
            f,
            h,
            a,
            b,
            lipschitz: lipschitz.max(MIN_LIPSCHITZ),
            sigma_max,
        })
    }

    pub fn n(&self) -> usize {
        self.a.cols()
    }

    pub fn m(&self) -> usize {
        self.a.rows()
    }

    pub fn objective(&self) -> &dyn SmoothObjective {
        self.f.as_ref()
    }

    pub fn h(&self) -> &ProxSpec {
        &self.h
    }

    pub fn a(&self) -> &LinearMap {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    /// `L_f` (after the [`MIN_LIPSCHITZ`] floor).
    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn sigma_max(&self) -> f64 {
        self.sigma_max
    }

    pub(crate) fn check_primal(&self, x: &[f64]) -> Result<()> {
        check_len("primal vector", self.n(), x.len())
    }

    pub(crate) fn check_dual(&self, y: &[f64]) -> Result<()> {
        check_len("dual vector", self.m(), y.len())
    }

    /// `Ax − b` into `out`.
    pub(crate) fn residual_into(&self, x: &[f64], out: &mut [f64]) {
        self.a.mul_vec_into(x, out);
        for (o, bi) in out.iter_mut().zip(&self.b) {
            *o -= bi;
        }
    }

    pub fn constraint_residual(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_primal(x)?;
        let mut out = vec![0.0; self.m()];
        self.residual_into(x, &mut out);
        Ok(out)
    }

    /// `f(x) + h(x)`.
    pub fn composite_value(&self, x: &[f64]) -> Result<ExtendedReal> {
        self.check_primal(x)?;
        Ok(self.h.value(x).plus(self.f.value(x)))
    }
}

/// `‖Ax − b‖`.
pub fn feasibility_residual(p: &CompositeProblem, x: &[f64]) -> Result<f64> {
    Ok(linalg::norm(&p.constraint_residual(x)?))
}

/// Largest eigenvalue magnitude of symmetric `Q` (no floor applied).
pub fn lipschitz_constant(q: &DenseMatrix) -> Result<f64> {
    q.spectral_radius_symmetric()
}

/// `σ_max(A)`.
pub fn largest_singular_value(a: &LinearMap) -> f64 {
    a.largest_singular_value()
}

/// Generator settings for random LCQP instances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub n: usize,
    pub m: usize,
    pub seed: u64,
    #[serde(default = "default_lower")]
    pub lower_value: f64,
    #[serde(default = "default_upper")]
    pub upper_value: f64,
}

fn default_lower() -> f64 {
    0.0
}

fn default_upper() -> f64 {
    5.0
}

impl GeneratorConfig {
    pub fn new(n: usize, m: usize, seed: u64) -> Self {
        Self {
            n,
            m,
            seed,
            lower_value: default_lower(),
            upper_value: default_upper(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.m == 0 {
            return Err(Error::invalid(format!(
                "instance dimensions must be positive, got n={} m={}",
                self.n, self.m
            )));
        }
        if !(self.lower_value.is_finite()
            && self.upper_value.is_finite()
            && self.lower_value <= self.upper_value)
        {
            return Err(Error::invalid(format!(
                "invalid box [{}, {}]",
                self.lower_value, self.upper_value
            )));
        }
        if self.m > self.n {
            log::warn!(
                "m = {} exceeds n = {}; the constraint system is overdetermined",
                self.m,
                self.n
            );
        }
        Ok(())
    }
}

/// A nonconvex box-constrained LCQP:
/// `min ½xᵀQx + rᵀx  s.t.  Ax = b,  l <= x <= u`.
#[derive(Debug, Clone, PartialEq)]
pub struct LcqpInstance {
    objective: QuadraticObjective,
    a: LinearMap,
    b: Vec<f64>,
    bounds: BoxSet,
    seed: u64,
}

impl LcqpInstance {
    pub fn new(
        q: DenseMatrix,
        r: Vec<f64>,
        a: LinearMap,
        b: Vec<f64>,
        bounds: BoxSet,
        seed: u64,
    ) -> Result<Self> {
        let objective = QuadraticObjective::new(q, r)?;
        check_len("constraint columns", objective.dim(), a.cols())?;
        check_len("right-hand side", a.rows(), b.len())?;
        check_len("box dimension", objective.dim(), bounds.dim())?;
        if !linalg::all_finite(&b) {
            return Err(Error::invalid("right-hand side must be finite"));
        }
        Ok(Self {
            objective,
            a,
            b,
            bounds,
            seed,
        })
    }

    pub fn n(&self) -> usize {
        self.a.cols()
    }

    pub fn m(&self) -> usize {
        self.a.rows()
    }

    pub fn q(&self) -> &DenseMatrix {
        self.objective.q()
    }

    pub fn r(&self) -> &[f64] {
        self.objective.r()
    }

    pub fn a(&self) -> &LinearMap {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn bounds(&self) -> &BoxSet {
        &self.bounds
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// `½xᵀQx + rᵀx`.
    pub fn value(&self, x: &[f64]) -> Result<f64> {
        check_len("lcqp point", self.n(), x.len())?;
        Ok(self.objective.value(x))
    }

    /// `Qx + r`.
    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("lcqp point", self.n(), x.len())?;
        Ok(self.objective.gradient(x))
    }

    /// `L_Q = max |eig(Q)|`, unfloored.
    pub fn lipschitz(&self) -> f64 {
        lipschitz_constant(self.q()).expect("instance Q is symmetric by construction")
    }

    /// The composite problem with `h` the box indicator.
    pub fn to_problem(&self) -> Result<CompositeProblem> {
        self.to_problem_with_constants(self.lipschitz(), largest_singular_value(&self.a))
    }

    pub fn to_problem_with_constants(
        &self,
        lipschitz: f64,
        sigma_max: f64,
    ) -> Result<CompositeProblem> {
        CompositeProblem::with_constants(
            Arc::new(self.objective.clone()),
            ProxSpec::BoxIndicator(self.bounds.clone()),
            self.a.clone(),
            self.b.clone(),
            lipschitz,
            sigma_max,
        )
    }
}

/// Generates a random LCQP instance.
///
/// Draw order from a single [`NormalStream`]: `Q̃` row-major, then `r`,
/// then `A` row-major, then the feasible point `x_feas`. `Q = (Q̃ + Q̃ᵀ)/2`
/// and `b = A x_feas`.
pub fn generate_lcqp(cfg: &GeneratorConfig) -> Result<LcqpInstance> {
    generate_lcqp_with_witness(cfg).map(|(inst, _)| inst)
}

/// Like [`generate_lcqp`], also returning the point `x_feas` with `A x_feas = b`.
pub fn generate_lcqp_with_witness(cfg: &GeneratorConfig) -> Result<(LcqpInstance, Vec<f64>)> {
    cfg.validate()?;
    let (n, m) = (cfg.n, cfg.m);
    let mut stream = NormalStream::new(cfg.seed);
    let q_tilde = stream.normals(n * n);
    let r = stream.normals(n);
    let a = DenseMatrix::new(m, n, stream.normals(m * n))?;
    let x_feas = stream.normals(n);

    let mut q = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            q[i * n + j] = (q_tilde[i * n + j] + q_tilde[j * n + i]) / 2.0;
        }
    }
    let q = DenseMatrix::new(n, n, q)?;
    let b = a.mul_vec(&x_feas)?;
    let bounds = BoxSet::uniform(n, cfg.lower_value, cfg.upper_value)?;
    let inst = LcqpInstance::new(q, r, a, b, bounds, cfg.seed)?;
    Ok((inst, x_feas))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inst2(q: [[f64; 2]; 2], r: [f64; 2]) -> LcqpInstance {
        LcqpInstance::new(
            DenseMatrix::from_rows(&[q[0].to_vec(), q[1].to_vec()]).unwrap(),
            r.to_vec(),
            DenseMatrix::identity(2).unwrap(),
            vec![0.0, 0.0],
            BoxSet::uniform(2, 0.0, 5.0).unwrap(),
            0,
        )
        .unwrap()
    }

    #[test]
    fn lcqp_value_examples() {
        assert_eq!(inst2([[0.0; 2]; 2], [1.0, 1.0]).value(&[2.0, 3.0]).unwrap(), 5.0);
        assert_eq!(
            inst2([[2.0, 0.0], [0.0, -2.0]], [0.0, 0.0]).value(&[1.0, 1.0]).unwrap(),
            0.0
        );
        // ½(q11 x1² + 2 q12 x1 x2 + q22 x2²) + rᵀx = ½(1 + 4 − 4) + 1
        let inst = inst2([[1.0, 1.0], [1.0, -1.0]], [1.0, 0.0]);
        assert!((inst.value(&[1.0, 2.0]).unwrap() - 1.5).abs() < 1e-15);
        assert!(inst.value(&[1.0]).is_err());
    }

    #[test]
    fn lcqp_grad_examples() {
        assert_eq!(
            inst2([[0.0; 2]; 2], [1.0, -1.0]).gradient(&[7.0, -3.0]).unwrap(),
            vec![1.0, -1.0]
        );
        assert_eq!(
            inst2([[1.0, 0.0], [0.0, 1.0]], [0.0, 0.0]).gradient(&[3.0, 4.0]).unwrap(),
            vec![3.0, 4.0]
        );
        assert!(inst2([[0.0; 2]; 2], [0.0; 2]).gradient(&[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn rejects_asymmetric_q() {
        let q = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![0.0, 1.0]]).unwrap();
        assert!(QuadraticObjective::new(q, vec![0.0, 0.0]).is_err());
    }

    #[test]
    fn generated_instance_is_symmetric_and_feasible() {
        let (inst, x_feas) = generate_lcqp_with_witness(&GeneratorConfig::new(50, 10, 0)).unwrap();
        assert_eq!(inst.q().max_asymmetry(), 0.0);
        let p = inst.to_problem().unwrap();
        assert_eq!(feasibility_residual(&p, &x_feas).unwrap(), 0.0);
        assert_eq!(inst.bounds().lower()[0], 0.0);
        assert_eq!(inst.bounds().upper()[49], 5.0);
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = GeneratorConfig::new(2, 1, 7);
        let a = generate_lcqp(&cfg).unwrap();
        let b = generate_lcqp(&cfg).unwrap();
        assert_eq!(a, b);
        let bits = |i: &LcqpInstance| -> Vec<u64> {
            i.q().as_slice()
                .iter()
                .chain(i.r())
                .chain(i.a().as_slice())
                .chain(i.b())
                .map(|v| v.to_bits())
                .collect()
        };
        assert_eq!(bits(&a), bits(&b));
        assert_ne!(a, generate_lcqp(&GeneratorConfig::new(2, 1, 8)).unwrap());
    }

    #[test]
    fn invalid_configs() {
        assert!(generate_lcqp(&GeneratorConfig::new(0, 1, 0)).is_err());
        assert!(generate_lcqp(&GeneratorConfig::new(3, 0, 0)).is_err());
        let mut cfg = GeneratorConfig::new(3, 1, 0);
        cfg.lower_value = 6.0;
        assert!(generate_lcqp(&cfg).is_err());
        // overdetermined is allowed (warned)
        assert!(generate_lcqp(&GeneratorConfig::new(2, 3, 0)).is_ok());
    }

    #[test]
    fn feasibility_residual_identity() {
        let p = CompositeProblem::new(
            Arc::new(QuadraticObjective::new(DenseMatrix::zeros(2, 2).unwrap(), vec![0.0; 2]).unwrap()),
            ProxSpec::Zero,
            DenseMatrix::identity(2).unwrap(),
            vec![1.0, 1.0],
            0.0,
        )
        .unwrap();
        assert_eq!(feasibility_residual(&p, &[1.0, 2.0]).unwrap(), 1.0);
        assert!(feasibility_residual(&p, &[1.0]).is_err());
        assert_eq!(p.lipschitz(), MIN_LIPSCHITZ);
    }

    #[test]
    fn box_validation() {
        assert!(BoxSet::new(vec![1.0], vec![0.0]).is_err());
        assert!(BoxSet::new(vec![0.0], vec![f64::INFINITY]).is_err());
        assert!(BoxSet::new(vec![0.0, 0.0], vec![1.0]).is_err());
        let b = BoxSet::uniform(2, 0.0, 1.0).unwrap();
        assert_eq!(b.project(&[-1.0, 0.5]), vec![0.0, 0.5]);
    }
}
