//! Python bindings: grids, fields, the ground state, free propagators,
//! nonlinear evolution, the manifold offset and the experiment runner.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use solmanifold_core::experiments::{self, ExperimentConfig, ExperimentKind};
use solmanifold_core::modulation::{evolve_nonlinear, shoot_h, ManifoldQuery, NonlinearOptions, PicardContext, ShootOptions};
use solmanifold_core::propagators::{free_cosine, free_sine};
use solmanifold_core::{soliton, Error};

fn err(e: Error) -> PyErr {
    match e {
        Error::Usage(_) | Error::Domain(_) | Error::Config { .. } => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

/// Uniform radial grid on [0, R] with n nodes.
#[pyclass(frozen, from_py_object)]
#[derive(Clone)]
struct RadialGrid(solmanifold_core::RadialGrid);

#[pymethods]
impl RadialGrid {
    #[new]
    fn new(radius: f64, n: usize) -> PyResult<Self> {
        solmanifold_core::RadialGrid::new(radius, n).map(RadialGrid).map_err(err)
    }
    #[getter]
    fn radius(&self) -> f64 {
        self.0.radius()
    }
    #[getter]
    fn n(&self) -> usize {
        self.0.len()
    }
    #[getter]
    fn dr(&self) -> f64 {
        self.0.dr()
    }
    fn nodes(&self) -> Vec<f64> {
        self.0.nodes()
    }
    fn __repr__(&self) -> String {
        format!("RadialGrid(R={}, n={})", self.0.radius(), self.0.len())
    }
}

/// Radial function sampled on a grid.
#[pyclass(frozen, from_py_object)]
#[derive(Clone)]
struct RadialField(solmanifold_core::RadialField);

#[pymethods]
impl RadialField {
    #[new]
    fn new(grid: &RadialGrid, values: Vec<f64>) -> PyResult<Self> {
        solmanifold_core::RadialField::new(grid.0, values).map(RadialField).map_err(err)
    }
    /// φ(r, a) sampled on the grid.
    #[staticmethod]
    #[pyo3(signature = (grid, a=1.0))]
    fn soliton(grid: &RadialGrid, a: f64) -> PyResult<Self> {
        soliton::phi(0.0, a).map_err(err)?;
        Ok(RadialField(solmanifold_core::RadialField::from_fn(grid.0, |r| soliton::phi(r, a).unwrap_or(f64::NAN))))
    }
    fn values(&self) -> Vec<f64> {
        self.0.values().to_vec()
    }
    fn inner(&self, other: &RadialField) -> PyResult<f64> {
        self.0.inner_product(&other.0).map_err(err)
    }
    fn l2_norm(&self) -> f64 {
        self.0.l2_norm()
    }
    fn h1_seminorm(&self) -> f64 {
        self.0.h1_seminorm()
    }
    fn scale(&self, c: f64) -> Self {
        RadialField(self.0.scale(c))
    }
    fn __add__(&self, other: &RadialField) -> PyResult<Self> {
        self.0.add(&other.0).map(RadialField).map_err(err)
    }
    fn __sub__(&self, other: &RadialField) -> PyResult<Self> {
        self.0.sub(&other.0).map(RadialField).map_err(err)
    }
    fn __len__(&self) -> usize {
        self.0.values().len()
    }
}

/// Negative eigenpair (−k², g) of −Δ − 5φ(a)⁴.
#[pyclass(frozen)]
struct Spectrum(solmanifold_core::SpectralData);

#[pymethods]
impl Spectrum {
    #[new]
    #[pyo3(signature = (grid, a=1.0))]
    fn new(grid: &RadialGrid, a: f64) -> PyResult<Self> {
        solmanifold_core::ground_state_at(&grid.0, a).map(Spectrum).map_err(err)
    }
    #[getter]
    fn k(&self) -> f64 {
        self.0.k
    }
    #[getter]
    fn residual(&self) -> f64 {
        self.0.residual
    }
    #[getter]
    fn negative_count(&self) -> usize {
        self.0.negative_count
    }
    #[getter]
    fn g(&self) -> RadialField {
        RadialField(self.0.g.clone())
    }
    /// 4π/⟨V,∂ₐφ⟩².
    #[getter]
    fn c_q(&self) -> f64 {
        self.0.c_q()
    }
    fn overlap_g_resonance(&self) -> f64 {
        self.0.overlap_g_resonance()
    }
    fn project_continuous(&self, f: &RadialField) -> PyResult<RadialField> {
        self.0.project_continuous(&f.0).map(RadialField).map_err(err)
    }
}

/// sin(t√−Δ)/√−Δ f.
#[pyfunction(name = "free_sine")]
fn py_free_sine(f: &RadialField, t: f64) -> PyResult<RadialField> {
    free_sine(&f.0, t).map(RadialField).map_err(err)
}

/// cos(t√−Δ) f.
#[pyfunction(name = "free_cosine")]
fn py_free_cosine(f: &RadialField, t: f64) -> PyResult<RadialField> {
    free_cosine(&f.0, t).map(RadialField).map_err(err)
}

/// Energy series along the nonlinear flow from (ψ₀, ψ₁); returns (energies, exit).
#[pyfunction]
#[pyo3(signature = (psi0, psi1, horizon, dt=None, stride=1))]
fn evolve(psi0: &RadialField, psi1: &RadialField, horizon: f64, dt: Option<f64>, stride: usize) -> PyResult<(Vec<f64>, String)> {
    let dt = dt.unwrap_or(psi0.0.grid().dr());
    let opts = NonlinearOptions { energy: true, stride, ..Default::default() };
    let run = evolve_nonlinear(&psi0.0, &psi1.0, horizon, dt, None, opts).map_err(err)?;
    Ok((run.energy, format!("{:?}", run.exit)))
}

/// Manifold offset h for data (φ + u0, u1) by shooting or by the fixed point.
#[pyfunction]
#[pyo3(signature = (spectrum, u0, u1, horizon, method="shoot", dt=None))]
fn manifold_h(spectrum: &Spectrum, u0: &RadialField, u1: &RadialField, horizon: f64, method: &str, dt: Option<f64>) -> PyResult<f64> {
    let s = &spectrum.0;
    let dt = dt.unwrap_or(s.grid.dr());
    let q = ManifoldQuery::new(u0.0.clone(), u1.0.clone(), s).map_err(err)?;
    match method {
        "shoot" => {
            let mut o = ShootOptions::new(horizon, dt);
            o.tol = Some(1e-12 * q.epsilon.max(1e-9));
            shoot_h(&q, s, &o).map(|r| r.h).map_err(err)
        }
        "picard" => {
            let eps = q.epsilon;
            let ctx = PicardContext::new(s, q, horizon, dt, 10.0f64.min(s.grid.radius() - horizon)).map_err(err)?;
            ctx.solve(1e-9 * eps.max(1e-12), 20).map(|p| p.h).map_err(err)
        }
        other => Err(PyValueError::new_err(format!("unknown method `{other}`"))),
    }
}

/// Default TOML config of an experiment.
#[pyfunction]
fn default_config(experiment: &str) -> PyResult<String> {
    let kind: ExperimentKind = experiment.parse().map_err(err)?;
    Ok(ExperimentConfig::default_for(kind).to_toml())
}

/// Static config problems, empty when runnable.
#[pyfunction]
fn validate(config_toml: &str) -> PyResult<Vec<String>> {
    let cfg = ExperimentConfig::from_toml_str(config_toml).map_err(err)?;
    Ok(experiments::validate(&cfg).iter().map(|v| v.to_string()).collect())
}

/// Runs an experiment; returns (passed, report JSON).
#[pyfunction]
fn run_experiment(py: Python<'_>, config_toml: &str) -> PyResult<(bool, String)> {
    let cfg = ExperimentConfig::from_toml_str(config_toml).map_err(err)?;
    let report = py.detach(|| experiments::run(&cfg)).map_err(err)?;
    let json = report.to_json().map_err(err)?;
    Ok((report.passed, json))
}

#[pymodule]
fn solmanifold(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<RadialGrid>()?;
    m.add_class::<RadialField>()?;
    m.add_class::<Spectrum>()?;
    m.add_function(wrap_pyfunction!(py_free_sine, m)?)?;
    m.add_function(wrap_pyfunction!(py_free_cosine, m)?)?;
    m.add_function(wrap_pyfunction!(evolve, m)?)?;
    m.add_function(wrap_pyfunction!(manifold_h, m)?)?;
    m.add_function(wrap_pyfunction!(default_config, m)?)?;
    m.add_function(wrap_pyfunction!(validate, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
