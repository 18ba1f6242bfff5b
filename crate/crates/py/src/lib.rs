//! Python bindings: LCQP instances, both solvers, prox maps and KKT residuals.

use std::path::PathBuf;

use pyo3::exceptions::{PyArithmeticError, PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use pplag_core::diagnostics;
use pplag_core::io;
use pplag_core::pplag::{self as core_pplag, default_eta, derive_rho};
use pplag_core::problem::{generate_lcqp as core_generate, largest_singular_value};
use pplag_core::sproxalm;
use pplag_core::trace::{IterationRecord, SolveResult};
use pplag_core::{
    BoxSet, CompositeProblem, Error, GeneratorConfig, LcqpInstance, PplagState, ProxSpec, SproxParams, SproxState,
    StoppingRule,
};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::NumericalFailure { .. } => PyArithmeticError::new_err(e.to_string()),
        Error::Io { .. } => PyIOError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

/// A box-constrained nonconvex LCQP instance.
#[pyclass(name = "Lcqp", module = "pplag", frozen)]
struct Lcqp {
    inner: LcqpInstance,
    sigma_max: f64,
}

impl Lcqp {
    fn wrap(inner: LcqpInstance) -> Self {
        let sigma_max = largest_singular_value(inner.a());
        Self { inner, sigma_max }
    }

    fn problem(&self) -> PyResult<CompositeProblem> {
        self.inner
            .to_problem_with_constants(self.inner.lipschitz(), self.sigma_max)
            .map_err(to_py)
    }
}

fn rows(m: &pplag_core::DenseMatrix) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
}

#[pymethods]
impl Lcqp {
    /// Build from explicit data; `q` and `a` are lists of rows.
    #[new]
    #[pyo3(signature = (q, r, a, b, lower, upper, seed = 0))]
    fn new(
        q: Vec<Vec<f64>>,
        r: Vec<f64>,
        a: Vec<Vec<f64>>,
        b: Vec<f64>,
        lower: Vec<f64>,
        upper: Vec<f64>,
        seed: u64,
    ) -> PyResult<Self> {
        let q = pplag_core::DenseMatrix::from_rows(&q).map_err(to_py)?;
        let a = pplag_core::DenseMatrix::from_rows(&a).map_err(to_py)?;
        let bounds = BoxSet::new(lower, upper).map_err(to_py)?;
        LcqpInstance::new(q, r, a, b, bounds, seed).map(Self::wrap).map_err(to_py)
    }

    #[staticmethod]
    fn load(dir: PathBuf) -> PyResult<Self> {
        let (inst, meta) = io::read_instance(&dir).map_err(to_py)?;
        Ok(Self {
            inner: inst,
            sigma_max: meta.sigma_max,
        })
    }

    #[pyo3(signature = (dir, force = false))]
    fn write(&self, dir: PathBuf, force: bool) -> PyResult<()> {
        io::write_instance(&self.inner, &dir, force).map(|_| ()).map_err(to_py)
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn m(&self) -> usize {
        self.inner.m()
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed()
    }

    #[getter]
    fn q(&self) -> Vec<Vec<f64>> {
        rows(self.inner.q())
    }

    #[getter]
    fn r(&self) -> Vec<f64> {
        self.inner.r().to_vec()
    }

    #[getter]
    fn a(&self) -> Vec<Vec<f64>> {
        rows(self.inner.a())
    }

    #[getter]
    fn b(&self) -> Vec<f64> {
        self.inner.b().to_vec()
    }

    #[getter]
    fn lower(&self) -> Vec<f64> {
        self.inner.bounds().lower().to_vec()
    }

    #[getter]
    fn upper(&self) -> Vec<f64> {
        self.inner.bounds().upper().to_vec()
    }

    /// `max |eig(Q)|`.
    #[getter]
    fn lipschitz(&self) -> f64 {
        self.inner.lipschitz()
    }

    #[getter]
    fn sigma_max(&self) -> f64 {
        self.sigma_max
    }

    fn value(&self, x: Vec<f64>) -> PyResult<f64> {
        self.inner.value(&x).map_err(to_py)
    }

    fn gradient(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.gradient(&x).map_err(to_py)
    }

    /// `(stationarity, feasibility)` at `(x, λ)`.
    fn kkt_residual(&self, x: Vec<f64>, lam: Vec<f64>) -> PyResult<(f64, f64)> {
        diagnostics::kkt_residual(&self.problem()?, &x, &lam).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!(
            "Lcqp(n={}, m={}, seed={}, lipschitz={:.6e}, sigma_max={:.6e})",
            self.inner.n(),
            self.inner.m(),
            self.inner.seed(),
            self.inner.lipschitz(),
            self.sigma_max
        )
    }
}

#[pyfunction]
#[pyo3(signature = (n, m, seed = 0, lower = 0.0, upper = 5.0))]
fn generate_lcqp(n: usize, m: usize, seed: u64, lower: f64, upper: f64) -> PyResult<Lcqp> {
    let cfg = GeneratorConfig {
        lower_value: lower,
        upper_value: upper,
        ..GeneratorConfig::new(n, m, seed)
    };
    core_generate(&cfg).map(Lcqp::wrap).map_err(to_py)
}

/// Tunable P-Lagrangian settings; `η` is derived per instance.
#[pyclass(name = "PplagConfig", module = "pplag", get_all, set_all, from_py_object)]
#[derive(Clone)]
struct PyPplagConfig {
    alpha: f64,
    beta: f64,
    r_ratio: f64,
    delta0: f64,
    eta_safety: f64,
}

impl From<&PyPplagConfig> for core_pplag::PplagConfig {
    fn from(c: &PyPplagConfig) -> Self {
        Self {
            alpha: c.alpha,
            beta: c.beta,
            r_ratio: c.r_ratio,
            delta0: c.delta0,
            eta_safety: c.eta_safety,
        }
    }
}

#[pymethods]
impl PyPplagConfig {
    #[new]
    #[pyo3(signature = (alpha = None, beta = None, r_ratio = None, delta0 = None, eta_safety = None))]
    fn new(
        alpha: Option<f64>,
        beta: Option<f64>,
        r_ratio: Option<f64>,
        delta0: Option<f64>,
        eta_safety: Option<f64>,
    ) -> Self {
        let d = core_pplag::PplagConfig::default();
        Self {
            alpha: alpha.unwrap_or(d.alpha),
            beta: beta.unwrap_or(d.beta),
            r_ratio: r_ratio.unwrap_or(d.r_ratio),
            delta0: delta0.unwrap_or(d.delta0),
            eta_safety: eta_safety.unwrap_or(d.eta_safety),
        }
    }

    /// Resolved parameters for `inst` as a dict (includes `rho` and `eta`).
    fn resolve<'py>(&self, py: Python<'py>, inst: &Lcqp) -> PyResult<Bound<'py, PyDict>> {
        let params = core_pplag::PplagConfig::from(self).resolve(&inst.problem()?).map_err(to_py)?;
        let d = PyDict::new(py);
        d.set_item("alpha", params.alpha())?;
        d.set_item("beta", params.beta())?;
        d.set_item("rho", params.rho())?;
        d.set_item("r_ratio", params.r_ratio())?;
        d.set_item("delta0", params.delta0())?;
        d.set_item("eta", params.eta())?;
        Ok(d)
    }

    fn __repr__(&self) -> String {
        format!(
            "PplagConfig(alpha={}, beta={}, r_ratio={}, delta0={}, eta_safety={})",
            self.alpha, self.beta, self.r_ratio, self.delta0, self.eta_safety
        )
    }
}

fn record_dict<'py>(py: Python<'py>, r: &IterationRecord) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("k", r.k)?;
    d.set_item("objective", r.objective)?;
    d.set_item("stationarity", r.stationarity)?;
    d.set_item("feasibility", r.feasibility)?;
    d.set_item("lagrangian", r.lagrangian)?;
    d.set_item("dual_lambda", r.dual_norm_lambda)?;
    d.set_item("dual_mu", r.dual_norm_mu)?;
    d.set_item("delta", r.delta)?;
    d.set_item("d_norm", r.d_norm)?;
    d.set_item("descent_ok", r.descent_ok)?;
    Ok(d)
}

fn result_dict<'py, S>(
    py: Python<'py>,
    res: &SolveResult<S>,
    trace: &[IterationRecord],
    x: &[f64],
    lambda: &[f64],
) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    let termination = match res.termination {
        pplag_core::Termination::Tolerance => "tolerance",
        pplag_core::Termination::IterationCap => "iteration_cap",
    };
    d.set_item("termination", termination)?;
    d.set_item("iterations", res.iterations)?;
    d.set_item("stationarity", res.stationarity)?;
    d.set_item("feasibility", res.feasibility)?;
    d.set_item("objective", res.objective)?;
    d.set_item("x", x.to_vec())?;
    d.set_item("lambda", lambda.to_vec())?;
    if let Some(c) = &res.certificates {
        let cd = PyDict::new(py);
        cd.set_item("descent_checked", c.descent_checked)?;
        cd.set_item("descent_failed", c.descent_failed)?;
        cd.set_item("d_bound_checked", c.d_bound_checked)?;
        cd.set_item("d_bound_failed", c.d_bound_failed)?;
        cd.set_item("max_mu_norm", c.max_mu_norm)?;
        d.set_item("certificates", cd)?;
    }
    let rows = trace.iter().map(|r| record_dict(py, r)).collect::<PyResult<Vec<_>>>()?;
    d.set_item("trace", rows)?;
    Ok(d)
}

/// Runs the P-Lagrangian method from a random start (seed defaults to the instance seed).
#[pyfunction]
#[pyo3(signature = (inst, config = None, max_iters = 200_000, eps_stat = 1e-4, eps_feas = 1e-4, record_every = 1, init_seed = None))]
#[allow(clippy::too_many_arguments)]
fn solve_pplag<'py>(
    py: Python<'py>,
    inst: &Lcqp,
    config: Option<PyPplagConfig>,
    max_iters: u64,
    eps_stat: f64,
    eps_feas: f64,
    record_every: u64,
    init_seed: Option<u64>,
) -> PyResult<Bound<'py, PyDict>> {
    let p = inst.problem()?;
    let cfg = config.map(|c| core_pplag::PplagConfig::from(&c)).unwrap_or_default();
    let params = cfg.resolve(&p).map_err(to_py)?;
    let stop = StoppingRule::new(max_iters, eps_stat, eps_feas).with_record_every(record_every);
    let init = PplagState::random_initial(&p, &params, init_seed.unwrap_or(inst.inner.seed())).map_err(to_py)?;
    let mut trace = Vec::new();
    let res = py
        .detach(|| core_pplag::solve(&p, &params, init, &stop, &mut trace))
        .map_err(to_py)?;
    let d = result_dict(py, &res, &trace, &res.state.x, &res.state.lambda)?;
    d.set_item("mu", res.state.mu.clone())?;
    d.set_item("eta", params.eta())?;
    d.set_item("rho", params.rho())?;
    Ok(d)
}

/// Runs SProx-ALM; `gamma` defaults to `2 L_f`.
#[pyfunction]
#[pyo3(signature = (inst, gamma = None, max_iters = 200_000, eps_stat = 1e-4, eps_feas = 1e-4, record_every = 1, init_seed = None))]
#[allow(clippy::too_many_arguments)]
fn solve_sprox<'py>(
    py: Python<'py>,
    inst: &Lcqp,
    gamma: Option<f64>,
    max_iters: u64,
    eps_stat: f64,
    eps_feas: f64,
    record_every: u64,
    init_seed: Option<u64>,
) -> PyResult<Bound<'py, PyDict>> {
    let p = inst.problem()?;
    let gamma = gamma.unwrap_or_else(|| SproxParams::default_gamma(&p));
    let params = SproxParams::defaults(&p, gamma).map_err(to_py)?;
    let stop = StoppingRule::new(max_iters, eps_stat, eps_feas).with_record_every(record_every);
    let init = SproxState::random_initial(&p, init_seed.unwrap_or(inst.inner.seed())).map_err(to_py)?;
    let mut trace = Vec::new();
    let res = py
        .detach(|| sproxalm::sprox_solve(&p, &params, init, &stop, &mut trace))
        .map_err(to_py)?;
    let d = result_dict(py, &res, &trace, &res.state.x, &res.state.lambda)?;
    d.set_item("gamma", gamma)?;
    Ok(d)
}

/// `prox_{ηh}(v)` for `kind` in {"zero", "box", "l1"}.
#[pyfunction]
#[pyo3(signature = (kind, eta, v, lower = None, upper = None, weight = None))]
fn prox(
    kind: &str,
    eta: f64,
    v: Vec<f64>,
    lower: Option<Vec<f64>>,
    upper: Option<Vec<f64>>,
    weight: Option<f64>,
) -> PyResult<Vec<f64>> {
    let spec = match kind {
        "zero" => ProxSpec::Zero,
        "box" => {
            let (Some(l), Some(u)) = (lower, upper) else {
                return Err(PyValueError::new_err("box prox needs lower and upper"));
            };
            ProxSpec::BoxIndicator(BoxSet::new(l, u).map_err(to_py)?)
        }
        "l1" => ProxSpec::l1(weight.unwrap_or(1.0)).map_err(to_py)?,
        other => return Err(PyValueError::new_err(format!("unknown prox kind `{other}`"))),
    };
    spec.apply(eta, &v).map_err(to_py)
}

#[pyfunction(name = "derive_rho")]
fn py_derive_rho(alpha: f64, beta: f64) -> PyResult<f64> {
    derive_rho(alpha, beta).map_err(to_py)
}

#[pyfunction(name = "default_eta")]
#[pyo3(signature = (lipschitz, sigma_max, alpha, beta, safety = 1.0))]
fn py_default_eta(lipschitz: f64, sigma_max: f64, alpha: f64, beta: f64, safety: f64) -> PyResult<f64> {
    default_eta(lipschitz, sigma_max, alpha, beta, safety).map_err(to_py)
}

#[pymodule]
fn pplag(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Lcqp>()?;
    m.add_class::<PyPplagConfig>()?;
    m.add_function(wrap_pyfunction!(generate_lcqp, m)?)?;
    m.add_function(wrap_pyfunction!(solve_pplag, m)?)?;
    m.add_function(wrap_pyfunction!(solve_sprox, m)?)?;
    m.add_function(wrap_pyfunction!(prox, m)?)?;
    m.add_function(wrap_pyfunction!(py_derive_rho, m)?)?;
    m.add_function(wrap_pyfunction!(py_default_eta, m)?)?;
    m.add("GENERATOR_VERSION", pplag_core::rng::GENERATOR_VERSION)?;
    Ok(())
}
