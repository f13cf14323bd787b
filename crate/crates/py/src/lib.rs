use pyo3::create_exception;
use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use diqkd_core::certify::{self, CertifyOptions};
use diqkd_core::easy_bound;
use diqkd_core::hard_bound;
use diqkd_core::keyrate::{self, OptimizeOptions};
use diqkd_core::Error;

create_exception!(diqkd, BudgetExceeded, PyRuntimeError);
create_exception!(diqkd, BracketFailure, PyRuntimeError);

fn to_py(e: Error) -> PyErr {
    match e {
        Error::BudgetExceeded { cap, upper_bound } => {
            BudgetExceeded::new_err((format!("budget of {cap} cubes exceeded"), upper_bound))
        }
        Error::BracketFailure(m) => BracketFailure::new_err(m),
        Error::Io(m) => PyIOError::new_err(m),
        Error::NumericalFailure(m) => PyRuntimeError::new_err(m),
        other => PyValueError::new_err(other.to_string()),
    }
}

type R<T> = PyResult<T>;

#[pyclass(frozen, skip_from_py_object, module = "diqkd")]
#[derive(Clone)]
struct Correlators {
    inner: diqkd_core::Correlators,
}

#[pymethods]
impl Correlators {
    #[new]
    fn new(x: f64, y: f64) -> R<Self> {
        Ok(Self { inner: diqkd_core::Correlators::new(x, y).map_err(to_py)? })
    }

    #[getter]
    fn x(&self) -> f64 {
        self.inner.x()
    }

    #[getter]
    fn y(&self) -> f64 {
        self.inner.y()
    }

    fn chsh(&self) -> f64 {
        self.inner.chsh()
    }

    fn is_nonlocal(&self) -> bool {
        self.inner.is_nonlocal()
    }

    fn __repr__(&self) -> String {
        format!("Correlators(x={}, y={})", self.inner.x(), self.inner.y())
    }
}

#[pyclass(frozen, get_all, module = "diqkd")]
struct BoundResult {
    entropy: f64,
    omega: f64,
    beta: f64,
    method: String,
}

#[pymethods]
impl BoundResult {
    fn __repr__(&self) -> String {
        format!("BoundResult(entropy={}, omega={}, method='{}')", self.entropy, self.omega, self.method)
    }
}

#[pyclass(frozen, get_all, module = "diqkd")]
struct Certificate {
    omega: f64,
    beta_star: f64,
    t_star: f64,
    lipschitz: f64,
    epsilon: f64,
    upper_bound_f: f64,
    best_value: f64,
    entropy_lower_bound: f64,
    cubes_explored: u64,
    max_depth: u32,
    wall_time_s: f64,
    record: String,
}

#[pyclass(frozen, get_all, skip_from_py_object, module = "diqkd")]
#[derive(Clone)]
struct ExperimentSetup {
    theta: f64,
    a0: f64,
    a1: f64,
    b0: f64,
    b1: f64,
    b2: f64,
    eta: f64,
    p: f64,
}

impl ExperimentSetup {
    fn core(&self) -> keyrate::ExperimentSetup {
        keyrate::ExperimentSetup {
            theta: self.theta,
            a0: self.a0,
            a1: self.a1,
            b0: self.b0,
            b1: self.b1,
            b2: self.b2,
            eta: self.eta,
            p: self.p,
        }
    }

    fn from_core(s: keyrate::ExperimentSetup) -> Self {
        Self { theta: s.theta, a0: s.a0, a1: s.a1, b0: s.b0, b1: s.b1, b2: s.b2, eta: s.eta, p: s.p }
    }
}

#[pymethods]
impl ExperimentSetup {
    #[new]
    #[pyo3(signature = (theta, a0, a1, b0, b1, b2, eta, p=0.0))]
    #[allow(clippy::too_many_arguments)]
    fn new(theta: f64, a0: f64, a1: f64, b0: f64, b1: f64, b2: f64, eta: f64, p: f64) -> R<Self> {
        let s = Self { theta, a0, a1, b0, b1, b2, eta, p };
        s.core().validate().map_err(to_py)?;
        Ok(s)
    }

    #[staticmethod]
    fn chsh_singlet(eta: f64) -> Self {
        Self::from_core(keyrate::ExperimentSetup::chsh_singlet(eta))
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.core())
    }
}

#[pyclass(frozen, get_all, module = "diqkd")]
struct KeyRatePoint {
    eta: f64,
    rate: f64,
    raw_rate: f64,
    method: String,
    omega: f64,
    q: f64,
    setup: ExperimentSetup,
}

#[pymethods]
impl KeyRatePoint {
    fn __repr__(&self) -> String {
        format!("KeyRatePoint(eta={}, rate={}, method='{}', omega={}, q={})", self.eta, self.rate, self.method, self.omega, self.q)
    }
}

fn method(tag: &str) -> R<keyrate::Method> {
    keyrate::Method::from_tag(tag).ok_or_else(|| PyValueError::new_err(format!("unknown method '{tag}'")))
}

fn model(tag: &str) -> R<keyrate::Model> {
    match tag {
        "singlet" => Ok(keyrate::Model::Singlet),
        "qubit" => Ok(keyrate::Model::Qubit),
        _ => Err(PyValueError::new_err(format!("unknown model '{tag}'"))),
    }
}

/// Lower bound on H(A|E) from (X, Y) at noise q.
#[pyfunction]
#[pyo3(signature = (corr, q=1.0))]
fn entropy_bound_xy(corr: &Correlators, q: f64) -> R<BoundResult> {
    let b = hard_bound::entropy_bound_xy(&corr.inner, q).map_err(to_py)?;
    Ok(BoundResult { entropy: b.entropy, omega: b.omega, beta: b.beta, method: b.method.to_string() })
}

#[pyfunction]
#[pyo3(signature = (s, q=1.0))]
fn chsh_entropy_bound(s: f64, q: f64) -> R<f64> {
    easy_bound::chsh_entropy_bound(s, q).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (beta, omega, q=1.0))]
fn ansatz_info(beta: f64, omega: f64, q: f64) -> R<f64> {
    let test = diqkd_core::BellTest::new(omega).map_err(to_py)?;
    hard_bound::ansatz_I(beta, &test, q).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (beta, omega, q=1.0, starts=hard_bound::HEURISTIC_STARTS))]
fn heuristic_info(beta: f64, omega: f64, q: f64, starts: usize) -> R<f64> {
    let test = diqkd_core::BellTest::new(omega).map_err(to_py)?;
    Ok(hard_bound::I_heuristic(beta, &test, q, starts))
}

#[pyfunction]
#[pyo3(signature = (corr, q, omega, precision, max_cubes=certify::DEFAULT_MAX_CUBES, s0=certify::DEFAULT_S0))]
fn certify_point(py: Python<'_>, corr: &Correlators, q: f64, omega: f64, precision: f64, max_cubes: u64, s0: f64) -> R<Certificate> {
    let inner = corr.inner;
    let c = py
        .detach(|| certify::certify_point_with(&inner, q, omega, precision, CertifyOptions { s0, max_cubes }))
        .map_err(to_py)?;
    Ok(Certificate {
        omega: c.omega,
        beta_star: c.beta_star,
        t_star: c.t_star,
        lipschitz: c.lipschitz,
        epsilon: c.epsilon,
        upper_bound_f: c.upper_bound_f,
        best_value: c.best_value,
        entropy_lower_bound: c.entropy_lower_bound,
        cubes_explored: c.cubes_explored,
        max_depth: c.max_depth,
        wall_time_s: c.wall_time_s,
        record: c.to_record(),
    })
}

/// Returns (correlators, H(A|B), QBER).
#[pyfunction]
fn simulate(setup: &ExperimentSetup) -> R<(Correlators, f64, f64)> {
    let s = keyrate::simulate(&setup.core()).map_err(to_py)?;
    Ok((Correlators { inner: s.corr }, s.h_ab, s.qber))
}

#[pyfunction]
#[pyo3(signature = (setup, method_tag="xy-noisy"))]
fn key_rate(setup: &ExperimentSetup, method_tag: &str) -> R<f64> {
    keyrate::key_rate(&setup.core(), method(method_tag)?).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (eta, model_tag, method_tag, starts=keyrate::DEFAULT_STARTS, seed=keyrate::DEFAULT_SEED))]
fn optimize_rate(py: Python<'_>, eta: f64, model_tag: &str, method_tag: &str, starts: usize, seed: u64) -> R<KeyRatePoint> {
    let (mo, me) = (model(model_tag)?, method(method_tag)?);
    let opts = OptimizeOptions { starts, seed, warm: Vec::new() };
    let pt = py.detach(|| keyrate::optimize_rate(eta, mo, me, &opts)).map_err(to_py)?;
    Ok(KeyRatePoint {
        eta: pt.eta,
        rate: pt.rate,
        raw_rate: pt.raw_rate,
        method: pt.method.tag().to_string(),
        omega: pt.omega,
        q: pt.q,
        setup: ExperimentSetup::from_core(pt.setup),
    })
}

#[pyfunction]
#[pyo3(signature = (model_tag, method_tag, tol_eta=1e-3, starts=keyrate::DEFAULT_STARTS, seed=keyrate::DEFAULT_SEED))]
fn critical_efficiency(py: Python<'_>, model_tag: &str, method_tag: &str, tol_eta: f64, starts: usize, seed: u64) -> R<f64> {
    let (mo, me) = (model(model_tag)?, method(method_tag)?);
    let opts = OptimizeOptions { starts, seed, warm: Vec::new() };
    py.detach(|| keyrate::critical_efficiency(mo, me, tol_eta, &opts)).map_err(to_py)
}

#[pymodule]
fn diqkd(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Correlators>()?;
    m.add_class::<BoundResult>()?;
    m.add_class::<Certificate>()?;
    m.add_class::<ExperimentSetup>()?;
    m.add_class::<KeyRatePoint>()?;
    m.add_function(wrap_pyfunction!(entropy_bound_xy, m)?)?;
    m.add_function(wrap_pyfunction!(chsh_entropy_bound, m)?)?;
    m.add_function(wrap_pyfunction!(ansatz_info, m)?)?;
    m.add_function(wrap_pyfunction!(heuristic_info, m)?)?;
    m.add_function(wrap_pyfunction!(certify_point, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(key_rate, m)?)?;
    m.add_function(wrap_pyfunction!(optimize_rate, m)?)?;
    m.add_function(wrap_pyfunction!(critical_efficiency, m)?)?;
    m.add("BudgetExceeded", m.py().get_type::<BudgetExceeded>())?;
    m.add("BracketFailure", m.py().get_type::<BracketFailure>())?;
    m.add("METHODS", ["chsh-qber", "chsh", "chsh-noisy", "xy-noisy"])?;
    Ok(())
}
