//! Python bindings for `nvs-core`.

use num_complex::Complex64;
use nvs_core::conductivity::{bump_gamma_with_floor, DEFAULT_FLOOR};
use nvs_core::dbar::{invert as core_invert, liouville_certificate as core_liouville, DbarSettings};
use nvs_core::faddeev::{solve_mu_with, SolveMethod, SolverSettings, SpectralParameter, DEFAULT_K_MIN};
use nvs_core::io;
use nvs_core::nvdyn::{certificate_from_data, velocity_box, Velocity};
use nvs_core::scattering::{evolve_b, forward_transform_with, shift_b, verify_shift_lemma_with};
use nvs_core::{potential_from_gamma, ComplexField, GridSpec, KGrid, NvsError};
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::{PyBytes, PyDict};

create_exception!(nvs, NumericalError, PyException, "Failure raised by the numerical pipeline.");

fn err(e: NvsError) -> PyErr {
    NumericalError::new_err(e.to_string())
}

fn method(name: &str) -> PyResult<SolverSettings> {
    let method: SolveMethod = name.parse().map_err(|_| {
        pyo3::exceptions::PyValueError::new_err(format!("unknown method {name:?}, expected iterative or dense"))
    })?;
    Ok(SolverSettings {
        method,
        ..SolverSettings::default()
    })
}

#[pyclass(name = "Grid", frozen, from_py_object)]
#[derive(Clone, Copy)]
pub struct PyGrid {
    inner: GridSpec,
}

#[pymethods]
impl PyGrid {
    #[new]
    fn new(half_width: f64, size: usize) -> PyResult<Self> {
        Ok(Self {
            inner: GridSpec::new(half_width, size).map_err(err)?,
        })
    }

    #[getter]
    fn half_width(&self) -> f64 {
        self.inner.half_width()
    }

    #[getter]
    fn size(&self) -> usize {
        self.inner.size()
    }

    #[getter]
    fn spacing(&self) -> f64 {
        self.inner.spacing()
    }

    /// Node coordinates in row-major order.
    fn nodes(&self) -> Vec<Complex64> {
        self.inner.nodes().collect()
    }

    fn __repr__(&self) -> String {
        format!("Grid(half_width={}, size={})", self.inner.half_width(), self.inner.size())
    }
}

#[pyclass(name = "Field", frozen, from_py_object)]
#[derive(Clone)]
pub struct PyField {
    inner: ComplexField,
}

#[pymethods]
impl PyField {
    #[new]
    fn new(grid: PyGrid, values: Vec<Complex64>) -> PyResult<Self> {
        Ok(Self {
            inner: ComplexField::new(grid.inner, values).map_err(err)?,
        })
    }

    #[getter]
    fn grid(&self) -> PyGrid {
        PyGrid { inner: self.inner.grid() }
    }

    fn values(&self) -> Vec<Complex64> {
        self.inner.values().to_vec()
    }

    fn sup_norm(&self) -> f64 {
        self.inner.sup_norm()
    }

    fn is_real(&self) -> bool {
        self.inner.is_real()
    }

    /// NVS1 encoding.
    fn to_bytes<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        PyBytes::new(py, &io::encode_field(&self.inner))
    }

    #[staticmethod]
    fn from_bytes(data: &[u8]) -> PyResult<Self> {
        Ok(Self {
            inner: io::decode_field(data).map_err(err)?,
        })
    }

    fn to_csv(&self) -> String {
        io::field_to_csv(&self.inner)
    }
}

#[pyclass(name = "Conductivity", frozen)]
pub struct PyConductivity {
    inner: nvs_core::Conductivity,
}

#[pymethods]
impl PyConductivity {
    /// Gaussian bump `1 + A exp(-|z - z0|^2 / sigma^2)`.
    #[staticmethod]
    #[pyo3(signature = (grid, amplitude, width, center = Complex64::new(0.0, 0.0), floor = DEFAULT_FLOOR))]
    fn bump(grid: PyGrid, amplitude: f64, width: f64, center: Complex64, floor: f64) -> PyResult<Self> {
        Ok(Self {
            inner: bump_gamma_with_floor(grid.inner, amplitude, width, center, floor).map_err(err)?,
        })
    }

    fn gamma(&self) -> PyField {
        PyField {
            inner: self.inner.gamma().clone(),
        }
    }

    fn sqrt(&self) -> PyField {
        PyField { inner: self.inner.sqrt() }
    }

    /// The potential, certified against `|v| <= q (1 + |z|)^(-2-eps)`;
    /// `q` defaults to `1e3 sup|v|`.
    #[pyo3(signature = (q = None, epsilon = 0.5))]
    fn potential(&self, q: Option<f64>, epsilon: f64) -> PyResult<PyPotential> {
        let p = potential_from_gamma(&self.inner).map_err(err)?;
        PyPotential::certified(p, q, epsilon)
    }
}

#[pyclass(name = "Potential", frozen)]
pub struct PyPotential {
    inner: nvs_core::Potential,
}

impl PyPotential {
    fn certified(mut p: nvs_core::Potential, q: Option<f64>, epsilon: f64) -> PyResult<Self> {
        let sup = p.values().sup_norm();
        let q = q.unwrap_or(if sup > 0.0 { 1e3 * sup } else { 1.0 });
        if !p.verify_decay(q, epsilon) {
            return Err(err(NvsError::Precondition(format!(
                "potential violates |v| <= {q:e} (1 + |z|)^(-2-{epsilon})"
            ))));
        }
        Ok(Self { inner: p })
    }
}

#[pymethods]
impl PyPotential {
    #[staticmethod]
    #[pyo3(signature = (field, q = None, epsilon = 0.5))]
    fn from_field(field: PyField, q: Option<f64>, epsilon: f64) -> PyResult<Self> {
        Self::certified(nvs_core::Potential::new(field.inner).map_err(err)?, q, epsilon)
    }

    #[staticmethod]
    fn zero(grid: PyGrid) -> PyResult<Self> {
        Self::certified(nvs_core::Potential::zero(grid.inner), None, 0.5)
    }

    fn field(&self) -> PyField {
        PyField {
            inner: self.inner.values().clone(),
        }
    }

    fn is_zero(&self) -> bool {
        self.inner.is_zero()
    }

    fn fingerprint(&self) -> String {
        self.inner.fingerprint()
    }
}

#[pyclass(name = "KGrid", frozen, from_py_object)]
#[derive(Clone, Copy)]
pub struct PyKGrid {
    inner: KGrid,
}

#[pymethods]
impl PyKGrid {
    #[new]
    #[pyo3(signature = (half_width, size, k_min = DEFAULT_K_MIN))]
    fn new(half_width: f64, size: usize, k_min: f64) -> PyResult<Self> {
        Ok(Self {
            inner: KGrid::with_min(half_width, size, k_min).map_err(err)?,
        })
    }

    #[getter]
    fn half_width(&self) -> f64 {
        self.inner.half_width()
    }

    #[getter]
    fn size(&self) -> usize {
        self.inner.size()
    }

    #[getter]
    fn k_min(&self) -> f64 {
        self.inner.k_min()
    }

    fn nodes(&self) -> Vec<Complex64> {
        self.inner.nodes().collect()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

#[pyclass(name = "ScatteringData", frozen)]
pub struct PyScattering {
    inner: nvs_core::ScatteringData,
}

#[pymethods]
impl PyScattering {
    #[getter]
    fn kgrid(&self) -> PyKGrid {
        PyKGrid {
            inner: self.inner.kgrid(),
        }
    }

    #[getter]
    fn time(&self) -> f64 {
        self.inner.time()
    }

    /// `b(k, t)` in node order.
    fn values(&self) -> Vec<Complex64> {
        self.inner.values()
    }

    fn sup_norm(&self) -> f64 {
        self.inner.sup_norm()
    }

    fn shift(&self, y: Complex64) -> Self {
        Self {
            inner: shift_b(&self.inner, y),
        }
    }

    fn evolve(&self, t: f64) -> Self {
        Self {
            inner: evolve_b(&self.inner, t),
        }
    }

    fn scaled(&self, c: Complex64) -> Self {
        Self {
            inner: self.inner.scaled(c),
        }
    }

    /// NVB1 encoding.
    fn to_bytes<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        PyBytes::new(py, &io::encode_scattering(&self.inner))
    }

    #[staticmethod]
    fn from_bytes(data: &[u8]) -> PyResult<Self> {
        Ok(Self {
            inner: io::decode_scattering(data).map_err(err)?,
        })
    }

    fn to_csv(&self) -> String {
        io::scattering_to_csv(&self.inner)
    }
}

/// Faddeev field `mu(., k)` and its diagnostics.
#[pyfunction]
#[pyo3(signature = (potential, k, method = "iterative"))]
fn solve_mu<'py>(
    py: Python<'py>,
    potential: &PyPotential,
    k: Complex64,
    method: &str,
) -> PyResult<(PyField, Bound<'py, PyDict>)> {
    let settings = self::method(method)?;
    let k = SpectralParameter::new(k).map_err(err)?;
    let f = py.detach(|| solve_mu_with(&potential.inner, k, &settings)).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("pde_residual", f.diagnostics.pde_residual)?;
    d.set_item("boundary_deviation", f.diagnostics.boundary_deviation)?;
    d.set_item("solver_iterations", f.diagnostics.solver_iterations)?;
    d.set_item("solver_residual", f.diagnostics.solver_residual)?;
    d.set_item("accepted", f.is_accepted())?;
    Ok((PyField { inner: f.mu }, d))
}

#[pyfunction]
#[pyo3(signature = (potential, kgrid, method = "iterative"))]
fn forward_transform(py: Python<'_>, potential: &PyPotential, kgrid: PyKGrid, method: &str) -> PyResult<PyScattering> {
    let settings = self::method(method)?;
    let (s, _) = py
        .detach(|| forward_transform_with(&potential.inner, &kgrid.inner, &settings))
        .map_err(err)?;
    Ok(PyScattering { inner: s })
}

/// Largest relative gap between the transform of `v(. - y)` and the phase law.
#[pyfunction]
fn verify_shift_lemma(py: Python<'_>, potential: &PyPotential, y: Complex64, kgrid: PyKGrid) -> PyResult<f64> {
    let r = py
        .detach(|| verify_shift_lemma_with(&potential.inner, y, &kgrid.inner, &SolverSettings::default()))
        .map_err(err)?;
    Ok(r.max_relative_error)
}

/// Reconstructed `gamma^{1/2}` on `grid` and the inversion diagnostics.
#[pyfunction]
#[pyo3(signature = (data, grid, radius = None))]
fn invert<'py>(
    py: Python<'py>,
    data: &PyScattering,
    grid: PyGrid,
    radius: Option<f64>,
) -> PyResult<(PyField, Bound<'py, PyDict>)> {
    let settings = DbarSettings {
        radius,
        ..DbarSettings::default()
    };
    let inv = py.detach(|| core_invert(&data.inner, grid.inner, &settings, &[])).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("imaginary_residue", inv.imaginary_residue)?;
    d.set_item("positive", inv.positive)?;
    d.set_item("max_iterations", inv.max_iterations)?;
    d.set_item("max_kbar_residual", inv.max_kbar_residual)?;
    d.set_item("max_mu_deviation", inv.max_mu_deviation)?;
    Ok((PyField { inner: inv.gamma_sqrt }, d))
}

#[pyfunction]
fn liouville_certificate<'py>(
    py: Python<'py>,
    data: &PyScattering,
    tol: f64,
    grid: PyGrid,
) -> PyResult<Bound<'py, PyDict>> {
    let r = py.detach(|| core_liouville(&data.inner, tol, grid.inner)).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("sup_b", r.sup_b)?;
    d.set_item("sup_mu_minus_one", r.sup_mu_minus_one)?;
    d.set_item("sup_v", r.sup_v)?;
    d.set_item("mu_constant", r.mu_constant)?;
    d.set_item("v_constant", r.v_constant)?;
    Ok(d)
}

/// Traveling-wave residual floor over the velocity box `[lo, hi]^2`.
#[pyfunction]
#[pyo3(signature = (data, lo = -10.0, hi = 10.0, samples = 21))]
fn soliton_certificate<'py>(
    py: Python<'py>,
    data: &PyScattering,
    lo: f64,
    hi: f64,
    samples: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let grid = velocity_box(lo, hi, samples).map_err(err)?;
    let cert = py.detach(|| certificate_from_data(&data.inner, &grid)).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("floor", cert.floor)?;
    d.set_item("argmin", cert.argmin)?;
    d.set_item("sup_b", cert.sup_b)?;
    d.set_item("median_phase_gap", cert.median_phase_gap)?;
    d.set_item("excludes_solitons", cert.excludes_solitons())?;
    Ok(d)
}

#[pyfunction]
fn phase_gap(k: Complex64, c: Complex64) -> PyResult<f64> {
    Ok(nvs_core::phase_gap(k, Velocity::new(c).map_err(err)?))
}

#[pymodule]
fn nvs(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("NumericalError", m.py().get_type::<NumericalError>())?;
    m.add_class::<PyGrid>()?;
    m.add_class::<PyField>()?;
    m.add_class::<PyConductivity>()?;
    m.add_class::<PyPotential>()?;
    m.add_class::<PyKGrid>()?;
    m.add_class::<PyScattering>()?;
    m.add_function(wrap_pyfunction!(solve_mu, m)?)?;
    m.add_function(wrap_pyfunction!(forward_transform, m)?)?;
    m.add_function(wrap_pyfunction!(verify_shift_lemma, m)?)?;
    m.add_function(wrap_pyfunction!(invert, m)?)?;
    m.add_function(wrap_pyfunction!(liouville_certificate, m)?)?;
    m.add_function(wrap_pyfunction!(soliton_certificate, m)?)?;
    m.add_function(wrap_pyfunction!(phase_gap, m)?)?;
    Ok(())
}
