//! Python bindings: limit laws, Stein solutions, both spin models and the
//! scaling pipelines.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use steinmd_core::cw::{self, RhoMeasure as CoreRho};
use steinmd_core::limit_laws::{check_conditions, GridSpec};
use steinmd_core::verify::{self, ScalingFit, ScalingReport};
use steinmd_core::{md, stein, DriftFunction, Error, LimitLaw as CoreLaw};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Quadrature { .. } | Error::Io(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

/// Drift `g`; the limit density is proportional to `exp(-G)` with `G' = g`.
#[pyclass(name = "Drift", module = "steinmd", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct Drift {
    inner: DriftFunction,
}

#[pymethods]
impl Drift {
    #[staticmethod]
    fn monomial(a: f64, p: f64) -> PyResult<Self> {
        DriftFunction::monomial(a, p).map(|inner| Self { inner }).map_err(to_py)
    }

    #[staticmethod]
    fn gaussian() -> Self {
        Self {
            inner: DriftFunction::gaussian(),
        }
    }

    /// `g(y) = y^3/3`.
    #[staticmethod]
    fn quartic() -> Self {
        Self {
            inner: DriftFunction::quartic_12(),
        }
    }

    /// `sum_i coeffs[i] y^(2i+1)`.
    #[staticmethod]
    fn odd_polynomial(coeffs: Vec<f64>) -> Self {
        Self {
            inner: DriftFunction::odd_polynomial(&coeffs),
        }
    }

    fn __call__(&self, y: f64) -> f64 {
        self.inner.eval(y)
    }

    fn deriv(&self, y: f64) -> f64 {
        self.inner.deriv(y)
    }

    #[getter]
    fn label(&self) -> String {
        self.inner.label().to_string()
    }

    /// Grid checks of monotonicity, sign and the growth constants.
    #[pyo3(signature = (radius = 10.0, points = 1001))]
    fn check_conditions<'py>(&self, py: Python<'py>, radius: f64, points: usize) -> PyResult<Bound<'py, PyDict>> {
        let r = check_conditions(&self.inner, &GridSpec { radius, points }).map_err(to_py)?;
        let d = PyDict::new(py);
        d.set_item("monotone_ok", r.monotone_ok)?;
        d.set_item("sign_ok", r.sign_ok)?;
        d.set_item("c2_est", r.c2_est)?;
        d.set_item("c3_est", r.c3_est)?;
        d.set_item("all_ok", r.all_ok())?;
        Ok(d)
    }

    fn __repr__(&self) -> String {
        format!("Drift({})", self.inner.label())
    }
}

#[pyclass(name = "LimitLaw", module = "steinmd", frozen)]
pub struct LimitLaw {
    inner: CoreLaw,
}

#[pymethods]
impl LimitLaw {
    #[new]
    fn new(drift: &Drift) -> PyResult<Self> {
        CoreLaw::new(drift.inner.clone()).map(|inner| Self { inner }).map_err(to_py)
    }

    /// Density proportional to `exp(-y^4/12)`.
    #[staticmethod]
    fn quartic() -> Self {
        Self {
            inner: CoreLaw::quartic_12(),
        }
    }

    #[staticmethod]
    fn standard_normal() -> Self {
        Self {
            inner: CoreLaw::standard_normal(),
        }
    }

    #[getter]
    fn c1(&self) -> f64 {
        self.inner.c1()
    }

    fn density(&self, y: f64) -> f64 {
        self.inner.density(y)
    }

    fn cdf(&self, y: f64) -> f64 {
        self.inner.cdf(y)
    }

    fn tail(&self, z: f64) -> f64 {
        self.inner.tail(z)
    }

    fn quantile(&self, q: f64) -> PyResult<f64> {
        self.inner.quantile(q).map_err(to_py)
    }

    /// Solution `f_z(w)` of the Stein equation.
    fn stein_solution(&self, z: f64, w: f64) -> f64 {
        stein::stein_solution(&self.inner, z, w)
    }

    /// Largest residual of the Stein equation over `w_grid` with difference step `h`.
    #[pyo3(signature = (z, w_grid, h = 1e-5))]
    fn stein_residual(&self, z: f64, w_grid: Vec<f64>, h: f64) -> PyResult<f64> {
        stein::stein_residual(&self.inner, z, &w_grid, h)
            .map(|r| r.max_residual)
            .map_err(to_py)
    }

    fn zeta(&self, w: f64, s: f64) -> f64 {
        stein::zeta(&self.inner, w, s)
    }

    fn __repr__(&self) -> String {
        format!("LimitLaw({}, c1={})", self.inner.label(), self.inner.c1())
    }
}

/// Symmetric single-spin measure of the Curie-Weiss model.
#[pyclass(name = "RhoMeasure", module = "steinmd", frozen)]
pub struct RhoMeasure {
    inner: CoreRho,
}

#[pymethods]
impl RhoMeasure {
    /// Rescales `weights` to mass 1 and `points` to unit variance.
    #[new]
    fn new(points: Vec<f64>, weights: Vec<f64>) -> PyResult<Self> {
        CoreRho::normalized(points, weights).map(|inner| Self { inner }).map_err(to_py)
    }

    #[staticmethod]
    fn rademacher() -> Self {
        Self {
            inner: CoreRho::rademacher(),
        }
    }

    #[staticmethod]
    fn three_point() -> Self {
        Self {
            inner: CoreRho::three_point(),
        }
    }

    #[getter]
    fn points(&self) -> Vec<f64> {
        self.inner.points().to_vec()
    }

    #[getter]
    fn weights(&self) -> Vec<f64> {
        self.inner.weights().to_vec()
    }

    /// Order `k`, `h^(2k)(0)` and the limit drift coefficient.
    #[pyo3(signature = (max_order = 12))]
    fn analyze<'py>(&self, py: Python<'py>, max_order: usize) -> PyResult<Bound<'py, PyDict>> {
        let a = cw::analyze_rho(&self.inner, max_order).map_err(to_py)?;
        let d = PyDict::new(py);
        d.set_item("k", a.k)?;
        d.set_item("h2k", a.h2k)?;
        d.set_item("drift_scale", a.drift_scale)?;
        d.set_item("cumulants", a.cumulants.clone())?;
        d.set_item("h_prime_positive", a.h_prime_positive)?;
        Ok(d)
    }

    /// Exact law of `S_n` as `(s_values, log_pmf)`.
    fn exact_distribution(&self, n: u64) -> PyResult<(Vec<f64>, Vec<f64>)> {
        let d = cw::exact_magnetization_dist(&self.inner, n).map_err(to_py)?;
        Ok((d.s_values(), d.log_pmf))
    }

    /// Values of `S_n` along a heat-bath Glauber chain.
    #[pyo3(signature = (n, seed, burn_in = 1000, samples = 10000, thin = 1))]
    fn glauber_samples(&self, n: usize, seed: u64, burn_in: usize, samples: usize, thin: usize) -> PyResult<Vec<f64>> {
        Ok(cw::glauber_sampler(&self.inner, n, seed, burn_in, samples, thin)
            .map_err(to_py)?
            .collect())
    }

    /// Worst tail ratio error against the limit law for every `n`, with the log-log fit.
    #[pyo3(signature = (n_list, grid_size = 200))]
    fn scaling<'py>(&self, py: Python<'py>, n_list: Vec<u64>, grid_size: usize) -> PyResult<Bound<'py, PyDict>> {
        let a = cw::analyze_rho(&self.inner, 12).map_err(to_py)?;
        let rep = verify::cw_scaling(&a, &n_list, grid_size).map_err(to_py)?;
        scaling_dict(py, &rep)
    }
}

fn fit_dict<'py>(py: Python<'py>, fit: &ScalingFit) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("slope", fit.slope)?;
    d.set_item("intercept", fit.intercept)?;
    d.set_item("r_squared", fit.r_squared)?;
    Ok(d)
}

fn scaling_dict<'py>(py: Python<'py>, rep: &ScalingReport) -> PyResult<Bound<'py, PyDict>> {
    let d = fit_dict(py, &rep.fit)?;
    d.set_item("range", rep.range.clone())?;
    d.set_item("n", rep.curves.iter().map(|c| c.n).collect::<Vec<_>>())?;
    d.set_item("max_abs_err", rep.curves.iter().map(|c| c.max_abs_err).collect::<Vec<_>>())?;
    d.set_item("target_slope", rep.target_slope)?;
    Ok(d)
}

/// Maximizer `m0`, phase and fluctuation constant of the monomer-dimer model.
#[pyfunction]
#[allow(non_snake_case)]
fn md_stationary<'py>(py: Python<'py>, J: f64, h: f64) -> PyResult<Bound<'py, PyDict>> {
    let st = md::solve_m0(J, h).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("m0", st.m0)?;
    d.set_item("lambda", st.lambda)?;
    d.set_item("critical", st.phase == md::Phase::Critical)?;
    Ok(d)
}

/// Exact law of the monomer count as `(j, log_pmf)`.
#[pyfunction]
#[allow(non_snake_case)]
fn md_exact_distribution(J: f64, h: f64, n: u64) -> PyResult<(Vec<u64>, Vec<f64>)> {
    let params = md::MDParams::new(J, h, n).map_err(to_py)?;
    let d = md::exact_magnetization_dist(&params).map_err(to_py)?;
    Ok((d.j, d.log_pmf))
}

/// `(J_c, h_c, m_c)`.
#[pyfunction]
fn md_critical_point() -> (f64, f64, f64) {
    md::critical_constants()
}

#[pyfunction]
#[pyo3(signature = (J, h, n_list, grid_size = 200))]
#[allow(non_snake_case)]
fn md_scaling<'py>(py: Python<'py>, J: f64, h: f64, n_list: Vec<u64>, grid_size: usize) -> PyResult<Bound<'py, PyDict>> {
    let st = md::solve_m0(J, h).map_err(to_py)?;
    let rep = verify::md_scaling(&st, &n_list, grid_size).map_err(to_py)?;
    scaling_dict(py, &rep)
}

/// OLS of `log err` against `log n`.
#[pyfunction]
fn fit_exponent<'py>(py: Python<'py>, points: Vec<(u64, f64)>) -> PyResult<Bound<'py, PyDict>> {
    let fit = verify::fit_exponent(&points).map_err(to_py)?;
    fit_dict(py, &fit)
}

#[pymodule]
pub fn steinmd(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Drift>()?;
    m.add_class::<LimitLaw>()?;
    m.add_class::<RhoMeasure>()?;
    m.add_function(wrap_pyfunction!(md_stationary, m)?)?;
    m.add_function(wrap_pyfunction!(md_exact_distribution, m)?)?;
    m.add_function(wrap_pyfunction!(md_critical_point, m)?)?;
    m.add_function(wrap_pyfunction!(md_scaling, m)?)?;
    m.add_function(wrap_pyfunction!(fit_exponent, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
