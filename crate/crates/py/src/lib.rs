//! Python bindings: run configuration, analysis, optimization, verification
//! and design extraction.

use pacm_core::error::Error;
use pacm_core::fields::{self, build_filter, Realization};
use pacm_core::io::{extract_contour as contour, RunConfig};
use pacm_core::nlfea::{extract_design, pressure_sweep, HyperelasticParams, NonlinearModel};
use pacm_core::optimizer::Optimizer;
use pacm_core::sensitivity::Analysis;
use pyo3::exceptions::{PyArithmeticError, PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn to_py(e: Error) -> PyErr {
    let msg = e.to_string();
    match e {
        Error::Config(_) | Error::Domain(_) => PyValueError::new_err(msg),
        Error::Numerical { .. } | Error::Inversion { .. } => PyArithmeticError::new_err(msg),
        Error::Io { .. } => PyOSError::new_err(msg),
        Error::Internal(_) => PyRuntimeError::new_err(msg),
    }
}

/// Run configuration with reference defaults for every key.
#[pyclass(name = "RunConfig", from_py_object)]
#[derive(Clone)]
struct PyRunConfig {
    inner: RunConfig,
}

#[pymethods]
impl PyRunConfig {
    #[new]
    #[pyo3(signature = (toml = ""))]
    fn new(toml: &str) -> PyResult<Self> {
        RunConfig::from_toml_str(toml).map(|inner| PyRunConfig { inner }).map_err(to_py)
    }

    #[staticmethod]
    fn load(path: std::path::PathBuf) -> PyResult<Self> {
        RunConfig::load(&path).map(|inner| PyRunConfig { inner }).map_err(to_py)
    }

    fn to_toml(&self) -> String {
        self.inner.to_toml_string()
    }

    /// Element size `min(lx/nex, ly/ney)` in metres.
    #[getter]
    fn h(&self) -> f64 {
        self.inner.h()
    }

    #[getter]
    fn filter_radius(&self) -> f64 {
        self.inner.filter_radius()
    }

    #[getter]
    fn nex(&self) -> usize {
        self.inner.mesh.nex
    }

    #[setter]
    fn set_nex(&mut self, v: usize) {
        self.inner.mesh.nex = v;
    }

    #[getter]
    fn ney(&self) -> usize {
        self.inner.mesh.ney
    }

    #[setter]
    fn set_ney(&mut self, v: usize) {
        self.inner.mesh.ney = v;
    }

    #[getter]
    fn max_iterations(&self) -> usize {
        self.inner.optimizer.max_iterations
    }

    #[setter]
    fn set_max_iterations(&mut self, v: usize) {
        self.inner.optimizer.max_iterations = v;
    }

    #[getter]
    fn volume_fraction(&self) -> f64 {
        self.inner.optimizer.volume_fraction
    }

    #[setter]
    fn set_volume_fraction(&mut self, v: f64) {
        self.inner.optimizer.volume_fraction = v;
    }

    #[getter]
    fn delta_eta(&self) -> f64 {
        self.inner.optimizer.delta_eta
    }

    #[setter]
    fn set_delta_eta(&mut self, v: f64) {
        self.inner.optimizer.delta_eta = v;
    }

    fn validate(&self) -> PyResult<()> {
        self.inner.validate().map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!(
            "RunConfig({} {}×{}, V*={}, Δη={})",
            self.inner.mesh.preset,
            self.inner.mesh.nex,
            self.inner.mesh.ney,
            self.inner.optimizer.volume_fraction,
            self.inner.optimizer.delta_eta
        )
    }
}

/// Response of one physical density field.
#[pyclass(name = "Evaluation", get_all)]
struct PyEvaluation {
    objective: f64,
    /// Output displacement (m).
    delta: f64,
    mutual_strain_energy: f64,
    strain_energy: f64,
    pressure: Vec<f64>,
    displacement: Vec<f64>,
    /// Gradient with respect to the physical densities.
    gradient: Vec<f64>,
}

/// Coupled Darcy and elastic analysis of one problem.
#[pyclass(name = "Analysis")]
struct PyAnalysis {
    inner: Analysis,
}

#[pymethods]
impl PyAnalysis {
    #[new]
    fn new(config: &PyRunConfig) -> PyResult<Self> {
        let cfg = &config.inner;
        cfg.validate().map_err(to_py)?;
        let problem = cfg.build_problem().map_err(to_py)?;
        Analysis::new(problem, cfg.analysis_params())
            .map(|inner| PyAnalysis { inner })
            .map_err(to_py)
    }

    #[getter]
    fn n_elements(&self) -> usize {
        self.inner.problem.mesh.n_elements()
    }

    #[getter]
    fn n_nodes(&self) -> usize {
        self.inner.problem.mesh.n_nodes()
    }

    fn evaluate(&self, py: Python<'_>, rho_bar: Vec<f64>) -> PyResult<PyEvaluation> {
        if rho_bar.len() != self.n_elements() {
            return Err(PyValueError::new_err(format!(
                "expected {} densities, got {}",
                self.n_elements(),
                rho_bar.len()
            )));
        }
        let ev = py.detach(|| self.inner.evaluate(&rho_bar)).map_err(to_py)?;
        Ok(PyEvaluation {
            objective: ev.objective,
            delta: ev.elastic.delta,
            mutual_strain_energy: ev.elastic.mse,
            strain_energy: ev.elastic.se,
            gradient: ev.gradient(true),
            pressure: ev.pressure,
            displacement: ev.elastic.u,
        })
    }
}

/// Final design and convergence history of an optimization run.
#[pyclass(name = "OptimizationResult", get_all)]
struct PyOptimizationResult {
    iterations: usize,
    log_csv: String,
    rho: Vec<f64>,
    eroded: Vec<f64>,
    intermediate: Vec<f64>,
    dilated: Vec<f64>,
    objectives: (f64, f64, f64),
    volume_fraction: f64,
    delta: f64,
}

#[pyfunction]
fn optimize(py: Python<'_>, config: &PyRunConfig) -> PyResult<PyOptimizationResult> {
    let cfg = config.inner.clone();
    py.detach(move || {
        cfg.validate()?;
        let problem = cfg.build_problem()?;
        let filter = build_filter(&problem.mesh, cfg.filter_radius())?;
        let analysis = Analysis::new(problem, cfg.analysis_params())?;
        let optimizer = Optimizer {
            analysis: &analysis,
            filter: &filter,
            settings: cfg.optimizer.clone(),
        };
        let res = optimizer.run()?;
        let last = res.log.last().cloned().ok_or_else(|| Error::Internal("empty log".into()))?;
        let state = &res.state;
        Ok(PyOptimizationResult {
            iterations: last.iter,
            log_csv: res.log.to_csv(),
            rho: state.rho.clone(),
            eroded: state.physical(Realization::Eroded).to_vec(),
            intermediate: state.physical(Realization::Intermediate).to_vec(),
            dilated: state.physical(Realization::Dilated).to_vec(),
            objectives: (last.f0_eroded, last.f0_intermediate, last.f0_dilated),
            volume_fraction: last.vf_intermediate,
            delta: last.delta_intermediate,
        })
    })
    .map_err(to_py)
}

/// Large-deformation output displacement (m) of the thresholded design for
/// each pressure (Pa); `None` where the solve did not reach the pressure.
#[pyfunction]
#[pyo3(signature = (config, rho_bar, pressures = None))]
fn verify(py: Python<'_>, config: &PyRunConfig, rho_bar: Vec<f64>, pressures: Option<Vec<f64>>) -> PyResult<Vec<Option<f64>>> {
    let cfg = config.inner.clone();
    py.detach(move || {
        let problem = cfg.build_problem()?;
        let material = HyperelasticParams::from_young(cfg.material.e_solid, cfg.material.poisson)?;
        let mut ex = extract_design(&problem, &rho_bar, cfg.verify.threshold, cfg.darcy.input_pressure)?;
        if let Some(edges) = &cfg.verify.pressure_edges {
            ex.override_edges(edges)?;
        }
        let model = NonlinearModel::new(&ex.structure, &ex.boundary.edges, material)?;
        let pressures = pressures.unwrap_or_else(|| cfg.verify.pressures.clone());
        let results = pressure_sweep(&model, &pressures, &cfg.verify.newton)?;
        Ok(results.iter().map(|r| r.output_displacement()).collect())
    })
    .map_err(to_py)
}

/// Closed outlines of `rho_bar ≥ threshold` as lists of `(x, y)` points.
#[pyfunction]
#[pyo3(signature = (config, rho_bar, threshold = 0.85))]
fn extract_contour(config: &PyRunConfig, rho_bar: Vec<f64>, threshold: f64) -> PyResult<Vec<Vec<(f64, f64)>>> {
    let problem = config.inner.build_problem().map_err(to_py)?;
    let set = contour(&problem.mesh, &rho_bar, threshold).map_err(to_py)?;
    Ok(set
        .loops
        .into_iter()
        .map(|l| l.into_iter().map(|p| (p[0], p[1])).collect())
        .collect())
}

/// Smoothed Heaviside projection of filtered densities.
#[pyfunction]
fn project(values: Vec<f64>, beta: f64, eta: f64) -> Vec<f64> {
    fields::project(&values, beta, eta)
}

/// Gray-scale indicator of a physical density field (0 for a binary field).
#[pyfunction]
fn gray_indicator(values: Vec<f64>) -> f64 {
    fields::gray_indicator(&values)
}

#[pymodule]
pub fn pacm(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyRunConfig>()?;
    m.add_class::<PyAnalysis>()?;
    m.add_class::<PyEvaluation>()?;
    m.add_class::<PyOptimizationResult>()?;
    m.add_function(wrap_pyfunction!(optimize, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add_function(wrap_pyfunction!(extract_contour, m)?)?;
    m.add_function(wrap_pyfunction!(project, m)?)?;
    m.add_function(wrap_pyfunction!(gray_indicator, m)?)?;
    Ok(())
}
