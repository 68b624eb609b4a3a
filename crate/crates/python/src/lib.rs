//! Python module `casimir`: Lifshitz pressures and force gradients,
//! synthetic campaigns, calibration and model comparison.
//!
//! All quantities are SI (m, Pa, N/m, rad/s, V).

use std::collections::BTreeMap;

use casimir_core::analysis::{self, TheoryCurve, TheoryErrorConfig};
use casimir_core::electrostatics;
use casimir_core::force::{self, BetaTable};
use casimir_core::io;
use casimir_core::lifshitz::{casimir_pressure_zero_temperature, IdealMetal, LifshitzSolver};
use casimir_core::optics::{MaterialConfig, PermittivityModel, Response};
use casimir_core::vexp;
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;

create_exception!(casimir, CasimirError, PyException);

fn err<E: std::fmt::Display>(e: E) -> PyErr {
    CasimirError::new_err(e.to_string())
}

fn response(name: &str) -> PyResult<Response> {
    match name {
        "drude" => Ok(Response::Drude),
        "plasma" => Ok(Response::Plasma),
        other => Err(PyValueError::new_err(format!("unknown response {other:?}, expected \"drude\" or \"plasma\""))),
    }
}

#[pyclass(module = "casimir", name = "Geometry", frozen)]
struct PyGeometry {
    inner: force::Geometry,
}

#[pymethods]
impl PyGeometry {
    #[new]
    #[pyo3(signature = (radius, roughness_sphere = 1.13e-9, roughness_plate = 1.08e-9, temperature = 293.15, max_ratio = None))]
    fn new(radius: f64, roughness_sphere: f64, roughness_plate: f64, temperature: f64, max_ratio: Option<f64>) -> PyResult<Self> {
        let mut inner = force::Geometry::new(radius, roughness_sphere, roughness_plate, temperature).map_err(err)?;
        if let Some(r) = max_ratio {
            inner = inner.with_max_ratio(r);
            inner.validate().map_err(err)?;
        }
        Ok(Self { inner })
    }

    /// Experimental sphere and roughness; `set` selects the a/R limit.
    #[staticmethod]
    #[pyo3(signature = (set = None))]
    fn experiment(set: Option<u32>) -> Self {
        Self {
            inner: set.map_or_else(force::Geometry::experiment, vexp::measurement_geometry),
        }
    }

    #[getter]
    fn radius(&self) -> f64 {
        self.inner.radius
    }

    #[getter]
    fn temperature(&self) -> f64 {
        self.inner.temperature
    }

    #[getter]
    fn max_ratio(&self) -> f64 {
        self.inner.max_ratio
    }

    fn roughness_factor(&self, separation: f64) -> f64 {
        self.inner.roughness_factor(separation)
    }

    fn __repr__(&self) -> String {
        format!(
            "Geometry(radius={:e}, roughness_sphere={:e}, roughness_plate={:e}, temperature={}, max_ratio={})",
            self.inner.radius, self.inner.roughness_sphere, self.inner.roughness_plate, self.inner.temperature, self.inner.max_ratio
        )
    }
}

/// Dielectric permittivity along the imaginary frequency axis.
#[pyclass(module = "casimir", name = "Material", frozen)]
struct PyMaterial {
    inner: PermittivityModel,
}

#[pymethods]
impl PyMaterial {
    /// Gold: oscillator core plus a Drude or plasma free-electron term.
    #[staticmethod]
    #[pyo3(signature = (response = "plasma"))]
    fn gold(response: &str) -> PyResult<Self> {
        Ok(Self {
            inner: PermittivityModel::gold(self::response(response)?),
        })
    }

    /// Material from a TOML text (`plasma_energy_ev`, `relaxation_energy_ev`,
    /// `oscillators`, `table`).
    #[staticmethod]
    #[pyo3(signature = (text, response = "plasma", base_dir = "."))]
    fn from_config(text: &str, response: &str, base_dir: &str) -> PyResult<Self> {
        let cfg = MaterialConfig::parse(text).map_err(err)?;
        let inner = cfg.build(self::response(response)?, std::path::Path::new(base_dir)).map_err(err)?;
        Ok(Self { inner })
    }

    /// ε(iξ) for ξ in rad/s.
    fn eps(&self, xi: f64) -> PyResult<f64> {
        self.inner.eval(xi).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("Material({})", self.inner.tag())
    }
}

/// Casimir pressure between two plates in Pa.
#[pyfunction]
#[pyo3(signature = (material, separation, temperature = 293.15, tol = 1e-8))]
fn pressure(py: Python<'_>, material: &PyMaterial, separation: f64, temperature: f64, tol: f64) -> PyResult<f64> {
    let model = &material.inner;
    py.detach(|| {
        LifshitzSolver::new(model, temperature, tol, separation)
            .and_then(|s| s.pressure(separation))
            .map(|r| r.pressure)
    })
    .map_err(err)
}

/// Zero-temperature pressure between ideal metals, from the frequency integral.
#[pyfunction]
#[pyo3(signature = (separation, tol = 1e-8))]
fn ideal_metal_pressure(separation: f64, tol: f64) -> PyResult<f64> {
    casimir_pressure_zero_temperature(&IdealMetal, separation, tol).map_err(err)
}

/// Sphere-plate force gradients F'(a) in N/m on the given separations.
#[pyfunction]
#[pyo3(signature = (material, geometry, separations, tol = 1e-8, beta = None))]
fn force_gradients(
    py: Python<'_>,
    material: &PyMaterial,
    geometry: &PyGeometry,
    separations: Vec<f64>,
    tol: f64,
    beta: Option<Vec<(f64, f64)>>,
) -> PyResult<Vec<f64>> {
    let beta = match beta {
        Some(knots) => BetaTable::new(&knots, "python").map_err(err)?,
        None => BetaTable::zero(),
    };
    let model = &material.inner;
    let geometry = geometry.inner;
    let results = py
        .detach(|| force::pressure_to_gradient_sweep(model, &geometry, &beta, &separations, tol))
        .map_err(err)?;
    Ok(results.iter().map(|g| g.gradient).collect())
}

/// Electrostatic curvature coefficient γ(a) in rad s⁻¹ V⁻².
#[pyfunction]
#[pyo3(signature = (separation, radius, calibration_constant, tol = 1e-12))]
fn gamma_coefficient(separation: f64, radius: f64, calibration_constant: f64, tol: f64) -> PyResult<f64> {
    electrostatics::gamma_coefficient(separation, radius, calibration_constant, tol).map_err(err)
}

/// C = ω0 / (2k) in s/kg.
#[pyfunction]
fn calibration_constant(spring_constant: f64, resonance: f64) -> PyResult<f64> {
    electrostatics::calibration_constant(spring_constant, resonance).map_err(err)
}

#[pyclass(module = "casimir", name = "CampaignSpec")]
struct PyCampaignSpec {
    inner: vexp::CampaignSpec,
}

#[pymethods]
impl PyCampaignSpec {
    /// Parameters of measurement set 1 to 4 with the given true response.
    #[staticmethod]
    #[pyo3(signature = (set, truth = "plasma"))]
    fn measurement_set(set: u32, truth: &str) -> PyResult<Self> {
        Ok(Self {
            inner: vexp::CampaignSpec::measurement_set(set, response(truth)?).map_err(err)?,
        })
    }

    #[getter]
    fn label(&self) -> String {
        self.inner.label.clone()
    }

    #[getter]
    fn z0_true(&self) -> f64 {
        self.inner.z0_true
    }

    #[getter]
    fn c_true(&self) -> f64 {
        self.inner.c_true
    }

    #[getter]
    fn voltages(&self) -> Vec<f64> {
        self.inner.voltages.clone()
    }

    #[getter]
    fn noise(&self) -> f64 {
        self.inner.freq_systematic
    }

    #[setter]
    fn set_noise(&mut self, value: f64) {
        self.inner.freq_systematic = value;
    }

    #[getter]
    fn repetitions(&self) -> usize {
        self.inner.repetitions
    }

    #[setter]
    fn set_repetitions(&mut self, value: usize) {
        self.inner.repetitions = value;
    }

    #[getter]
    fn separation_range(&self) -> (f64, f64) {
        self.inner.separation_range
    }

    #[setter]
    fn set_separation_range(&mut self, value: (f64, f64)) {
        self.inner.separation_range = value;
    }

    /// Noisy frequency-shift grid; the same seed gives the same grid.
    fn synthesize(&self, py: Python<'_>, geometry: &PyGeometry, seed: u64) -> PyResult<PyMeasurementGrid> {
        let spec = &self.inner;
        let geometry = geometry.inner;
        let inner = py.detach(|| vexp::synthesize_campaign(spec, &geometry, seed)).map_err(err)?;
        Ok(PyMeasurementGrid { inner })
    }

    fn __repr__(&self) -> String {
        format!("CampaignSpec({:?})", self.inner.label)
    }
}

#[pyclass(module = "casimir", name = "MeasurementGrid", frozen)]
struct PyMeasurementGrid {
    inner: vexp::MeasurementGrid,
}

#[pymethods]
impl PyMeasurementGrid {
    #[staticmethod]
    fn from_text(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: io::parse_grid(text).map_err(err)?,
        })
    }

    fn to_text(&self) -> String {
        io::write_grid(&self.inner, &[])
    }

    /// Relative separations z in m.
    #[getter]
    fn z_rel(&self) -> Vec<f64> {
        self.inner.z_rel.clone()
    }

    #[getter]
    fn voltages(&self) -> Vec<f64> {
        self.inner.voltages()
    }

    /// Δω per channel, one list per (voltage, repetition).
    #[getter]
    fn shifts(&self) -> Vec<Vec<f64>> {
        self.inner.channels.iter().map(|c| c.shifts.clone()).collect()
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    fn __len__(&self) -> usize {
        self.inner.z_rel.len()
    }
}

#[pyclass(module = "casimir", name = "Calibration", frozen)]
struct PyCalibration {
    inner: analysis::CalibrationResult,
}

#[pymethods]
impl PyCalibration {
    #[getter]
    fn c(&self) -> f64 {
        self.inner.fit.c
    }

    #[getter]
    fn sigma_c(&self) -> f64 {
        self.inner.fit.sigma_c
    }

    #[getter]
    fn z0(&self) -> f64 {
        self.inner.fit.z0
    }

    #[getter]
    fn sigma_z0(&self) -> f64 {
        self.inner.fit.sigma_z0
    }

    #[getter]
    fn chi2_red(&self) -> f64 {
        self.inner.fit.chi2_red
    }

    /// (slope V/m, intercept V) of the residual-potential line.
    #[getter]
    fn v0_line(&self) -> (f64, f64) {
        (self.inner.v0_line.slope, self.inner.v0_line.intercept)
    }

    #[getter]
    fn v0_mean(&self) -> f64 {
        self.inner.v0_line.mean
    }

    /// Per-point (z_rel, V0, γ) from the parabola fits.
    fn parabolas(&self) -> Vec<(f64, f64, f64)> {
        self.inner.parabolas.iter().map(|p| (p.z_rel, p.v0, p.gamma)).collect()
    }

    fn to_text(&self) -> String {
        io::write_calibration(&self.inner, &[])
    }

    fn __repr__(&self) -> String {
        format!("Calibration(c={:e}, z0={:e})", self.inner.fit.c, self.inner.fit.z0)
    }
}

#[pyclass(module = "casimir", name = "GradientSeries", frozen)]
struct PyGradientSeries {
    inner: analysis::GradientSeries,
}

#[pymethods]
impl PyGradientSeries {
    #[getter]
    fn separations(&self) -> Vec<f64> {
        self.inner.separations.clone()
    }

    #[getter]
    fn mean(&self) -> Vec<f64> {
        self.inner.mean.clone()
    }

    #[getter]
    fn random(&self) -> Vec<f64> {
        self.inner.random.clone()
    }

    #[getter]
    fn systematic(&self) -> Vec<f64> {
        self.inner.systematic.clone()
    }

    #[getter]
    fn total(&self) -> Vec<f64> {
        self.inner.total.clone()
    }

    #[getter]
    fn warnings(&self) -> Vec<String> {
        self.inner.warnings.clone()
    }

    fn to_text(&self) -> String {
        io::write_gradients(&self.inner, &[])
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

/// Fits a parabola at every grid point, the V0 line and C with z0.
#[pyfunction]
fn calibrate(py: Python<'_>, grid: &PyMeasurementGrid) -> PyResult<PyCalibration> {
    let g = &grid.inner;
    let inner = py.detach(|| analysis::calibrate(g)).map_err(err)?;
    Ok(PyCalibration { inner })
}

#[pyfunction]
fn extract_gradients(grid: &PyMeasurementGrid, calibration: &PyCalibration) -> PyResult<PyGradientSeries> {
    let inner = analysis::extract_gradients(&grid.inner, &calibration.inner).map_err(err)?;
    Ok(PyGradientSeries { inner })
}

/// Resamples onto the shared grid and averages the sets.
#[pyfunction]
#[pyo3(signature = (series, step = 1e-9))]
fn average_sets(series: Vec<PyRef<'_, PyGradientSeries>>, step: f64) -> PyResult<PyGradientSeries> {
    let list: Vec<analysis::GradientSeries> = series.iter().map(|s| s.inner.clone()).collect();
    let grid = analysis::common_grid(&list, step).map_err(err)?;
    let resampled = list
        .iter()
        .map(|s| analysis::resample(s, &grid))
        .collect::<Result<Vec<_>, _>>()
        .map_err(err)?;
    Ok(PyGradientSeries {
        inner: analysis::average_sets(&resampled).map_err(err)?,
    })
}

/// Window verdicts `(model, lo, hi, outside, points, verdict)` of each
/// theory against the measured series. Theories are given on the series
/// separations.
#[pyfunction]
#[pyo3(signature = (series, theories, exclusion_percent = 33, optical_fraction = 0.005, separation_error = 0.5e-9, window = 100e-9))]
fn compare(
    series: &PyGradientSeries,
    theories: BTreeMap<String, Vec<f64>>,
    exclusion_percent: u32,
    optical_fraction: f64,
    separation_error: f64,
    window: f64,
) -> PyResult<Vec<(String, f64, f64, usize, usize, String)>> {
    let s = &series.inner;
    let curves: Vec<TheoryCurve> = theories
        .into_iter()
        .map(|(name, values)| TheoryCurve::new(name, s.separations.clone(), values))
        .collect();
    let windows = analysis::default_windows(&s.separations, window);
    let errors = TheoryErrorConfig::new(optical_fraction, separation_error);
    let report = analysis::compare(s, &curves, &errors, Some(&windows), exclusion_percent).map_err(err)?;
    Ok(report
        .models
        .iter()
        .flat_map(|m| {
            m.windows
                .iter()
                .map(|w| (m.label.clone(), w.lo, w.hi, w.outside, w.points, w.verdict.to_string()))
        })
        .collect())
}

#[pymodule]
fn casimir(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("CasimirError", m.py().get_type::<CasimirError>())?;
    m.add_class::<PyGeometry>()?;
    m.add_class::<PyMaterial>()?;
    m.add_class::<PyCampaignSpec>()?;
    m.add_class::<PyMeasurementGrid>()?;
    m.add_class::<PyCalibration>()?;
    m.add_class::<PyGradientSeries>()?;
    m.add_function(wrap_pyfunction!(pressure, m)?)?;
    m.add_function(wrap_pyfunction!(ideal_metal_pressure, m)?)?;
    m.add_function(wrap_pyfunction!(force_gradients, m)?)?;
    m.add_function(wrap_pyfunction!(gamma_coefficient, m)?)?;
    m.add_function(wrap_pyfunction!(calibration_constant, m)?)?;
    m.add_function(wrap_pyfunction!(calibrate, m)?)?;
    m.add_function(wrap_pyfunction!(extract_gradients, m)?)?;
    m.add_function(wrap_pyfunction!(average_sets, m)?)?;
    m.add_function(wrap_pyfunction!(compare, m)?)?;
    Ok(())
}
