use pyo3::prelude::*;
use pyo3::types::PyDict;

fn with_module<F: FnOnce(Python<'_>, &Bound<'_, PyDict>)>(f: F) {
    Python::initialize();
    Python::attach(|py| {
        let m = pyo3::wrap_pymodule!(steinmd::steinmd)(py);
        let globals = PyDict::new(py);
        globals.set_item("sm", m).unwrap();
        f(py, &globals);
    });
}

fn eval_f64(py: Python<'_>, g: &Bound<'_, PyDict>, expr: &str) -> f64 {
    let code = std::ffi::CString::new(expr).unwrap();
    py.eval(&code, Some(g), None).unwrap().extract().unwrap()
}

#[test]
fn laws_and_stein_solution() {
    with_module(|py, g| {
        let c1 = eval_f64(py, g, "sm.LimitLaw.quartic().c1");
        assert!((c1 - 0.296_383).abs() < 1e-6);
        let f0 = eval_f64(py, g, "sm.LimitLaw.standard_normal().stein_solution(0.0, 0.0)");
        assert!((f0 - (2.0 * std::f64::consts::PI).sqrt() / 4.0).abs() < 1e-12);
        let tail = eval_f64(py, g, "sm.LimitLaw(sm.Drift.monomial(1.0, 1.0)).tail(0.0)");
        assert!((tail - 0.5).abs() < 1e-14);
        let r = eval_f64(py, g, "sm.LimitLaw.quartic().stein_residual(1.0, [-2.0, -0.5, 0.5, 2.0])");
        assert!(r <= 1e-6);
    });
}

#[test]
fn models_and_errors() {
    with_module(|py, g| {
        assert_eq!(eval_f64(py, g, "sm.RhoMeasure.rademacher().analyze()['k']"), 2.0);
        assert_eq!(eval_f64(py, g, "len(sm.RhoMeasure.rademacher().exact_distribution(64)[0])"), 65.0);
        assert_eq!(eval_f64(py, g, "sum(sm.md_exact_distribution(0.0, 0.0, 4)[0])"), 6.0);
        assert_eq!(eval_f64(py, g, "float(sm.Drift.odd_polynomial([-1.0]).check_conditions()['sign_ok'])"), 0.0);
        let code = std::ffi::CString::new("sm.Drift.monomial(-1.0, 3.0)").unwrap();
        let err = py.eval(&code, Some(g), None).unwrap_err();
        assert!(err.is_instance_of::<pyo3::exceptions::PyValueError>(py));
    });
}
