//! Python module `snode`: nodes, frames, LFTs, density extraction, Wilson
//! factorization and the entropy bound.
//!
//! Matrices cross the boundary as lists of rows of Python complex numbers.
//! Reports come back as dicts with the same layout as the CLI's JSON, where
//! complex entries are `[re, im]` pairs.

use num_complex::Complex64;
use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use snode_core::conformal::{self, CircleGrid, MoebiusMap};
use snode_core::lft::{self, HerglotzEval, PairJ};
use snode_core::linalg::CMatrix;
use snode_core::snode as node;
use snode_core::{entropy, frame, specfact};

create_exception!(
    snode,
    SNodeError,
    PyValueError,
    "Raised when a numerical routine of the toolkit fails."
);

fn err(e: snode_core::Error) -> PyErr {
    SNodeError::new_err(e.to_string())
}

type Rows = Vec<Vec<Complex64>>;

fn to_matrix(name: &str, rows: Rows) -> PyResult<CMatrix> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if nrows == 0 || ncols == 0 || rows.iter().any(|r| r.len() != ncols) {
        return Err(PyValueError::new_err(format!(
            "{name} must be a non-empty rectangular list of rows"
        )));
    }
    Ok(CMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

fn to_rows(m: &CMatrix) -> Rows {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

/// Serializes a report through the deterministic JSON writer and loads it
/// with Python's `json` module.
fn to_dict<'py, T: serde::Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = snode_core::report::to_deterministic_json(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn grid_and_map(grid: usize, z0: Complex64) -> PyResult<(CircleGrid, MoebiusMap)> {
    Ok((
        CircleGrid::for_axis(grid).map_err(err)?,
        MoebiusMap::new(z0).map_err(err)?,
    ))
}

/// An S-node `{A, S, Φ₁, Φ₂}`.
#[pyclass(name = "SNode", module = "snode", frozen)]
struct PySNode(node::SNode);

#[pymethods]
impl PySNode {
    #[new]
    #[pyo3(signature = (a, s, phi1, phi2))]
    fn new(a: Rows, s: Rows, phi1: Rows, phi2: Rows) -> PyResult<Self> {
        let m = node::SNode::new(
            to_matrix("A", a)?,
            to_matrix("S", s)?,
            to_matrix("Phi1", phi1)?,
            to_matrix("Phi2", phi2)?,
        );
        Ok(Self(m.map_err(err)?))
    }

    #[staticmethod]
    fn e0() -> Self {
        Self(node::SNode::e0())
    }

    #[staticmethod]
    fn e_beta() -> Self {
        Self(node::SNode::e_beta())
    }

    #[staticmethod]
    fn a_equals_i() -> Self {
        Self(node::SNode::a_equals_i())
    }

    /// Seeded random moment node with nilpotent `A`; needs `n >= p`.
    #[staticmethod]
    #[pyo3(signature = (p, n, seed=0))]
    fn moment(p: usize, n: usize, seed: u64) -> PyResult<Self> {
        node::build_moment_node(p, n, seed).map(Self).map_err(err)
    }

    /// Parses the node file format used by the CLI.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let doc: node::NodeJson = serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?;
        node::SNode::from_json(&doc).map(Self).map_err(err)
    }

    fn direct_sum(&self, other: &PySNode) -> PyResult<Self> {
        self.0.direct_sum(&other.0).map(Self).map_err(err)
    }

    #[getter]
    fn n(&self) -> usize {
        self.0.n()
    }

    #[getter]
    fn p(&self) -> usize {
        self.0.p()
    }

    #[getter(A)]
    fn a(&self) -> Rows {
        to_rows(self.0.a())
    }

    #[getter(S)]
    fn s(&self) -> Rows {
        to_rows(self.0.s())
    }

    #[getter(Phi1)]
    fn phi1(&self) -> Rows {
        to_rows(self.0.phi1())
    }

    #[getter(Phi2)]
    fn phi2(&self) -> Rows {
        to_rows(self.0.phi2())
    }

    fn identity_residual(&self) -> f64 {
        self.0.identity_residual()
    }

    /// Validation report as a dict; `passed` is true when no issue was found.
    fn validate<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        let report = node::validate_node(&self.0, &node::ToleranceSet::default());
        let dict = to_dict(py, &report)?;
        dict.set_item("passed", report.passed())?;
        Ok(dict)
    }

    fn __repr__(&self) -> String {
        format!("SNode(n={}, p={})", self.0.n(), self.0.p())
    }
}

/// A boundary pair `{R, Q}` for the linear-fractional map.
#[pyclass(name = "Pair", module = "snode", frozen)]
struct PyPair(PairJ);

#[pymethods]
impl PyPair {
    #[staticmethod]
    fn constant(r: Rows, q: Rows) -> PyResult<Self> {
        PairJ::constant(to_matrix("R", r)?, to_matrix("Q", q)?)
            .map(Self)
            .map_err(err)
    }

    /// `{I, I}`.
    #[staticmethod]
    fn identity(p: usize) -> Self {
        Self(PairJ::identity(p))
    }

    /// The pair attaining equality at `lam`.
    #[staticmethod]
    fn equality(node: &PySNode, lam: Complex64) -> PyResult<Self> {
        lft::equality_pair(&node.0, lam).map(Self).map_err(err)
    }

    /// `(R(z), Q(z))`.
    fn eval(&self, z: Complex64) -> PyResult<(Rows, Rows)> {
        let (r, q) = self.0.eval(z).map_err(err)?;
        Ok((to_rows(&r), to_rows(&q)))
    }

    #[getter]
    fn p(&self) -> usize {
        self.0.p()
    }

    fn __repr__(&self) -> String {
        format!("Pair(kind={:?}, p={})", self.0.kind(), self.0.p())
    }
}

/// The frame `𝔄(z)` as a `2p x 2p` matrix.
#[pyfunction]
fn frame_value(node: &PySNode, z: Complex64) -> PyResult<Rows> {
    frame::frame_value(&node.0, z).map(|m| to_rows(&m)).map_err(err)
}

/// `ρ(z, λ)`.
#[pyfunction]
fn rho(node: &PySNode, z: Complex64, lam: Complex64) -> PyResult<Rows> {
    frame::rho(&node.0, z, lam).map(|r| to_rows(&r.value)).map_err(err)
}

/// The J-inequality report at `z`.
#[pyfunction]
fn check_j_inequality<'py>(py: Python<'py>, node: &PySNode, z: Complex64) -> PyResult<Bound<'py, PyAny>> {
    to_dict(py, &frame::check_j_inequality(&node.0, z).map_err(err)?)
}

/// `φ(z) = i N(z) D(z)⁻¹` for the given pair.
#[pyfunction]
fn phi(node: &PySNode, pair: &PyPair, z: Complex64) -> PyResult<Rows> {
    lft::eval_phi(&node.0, &pair.0, z).map(|m| to_rows(&m)).map_err(err)
}

/// Boundary density of `φ` on an `n`-point circle grid transported from the
/// axis. Returns a dict with `theta`, `t` and `values` (one matrix per node).
#[pyfunction]
#[pyo3(signature = (node, pair, grid=4096, z0=Complex64::new(0.0, 1.0)))]
fn extract_density<'py>(
    py: Python<'py>,
    node: &PySNode,
    pair: &PyPair,
    grid: usize,
    z0: Complex64,
) -> PyResult<Bound<'py, PyAny>> {
    let (g, map) = grid_and_map(grid, z0)?;
    let h = HerglotzEval::from_lft(&node.0, pair.0.clone()).map_err(err)?;
    let d = py
        .detach(|| conformal::extract_density(&h, &g, &map, conformal::DEFAULT_EPS))
        .map_err(err)?;
    let out = pyo3::types::PyDict::new(py);
    let (t, values): (Vec<f64>, Vec<Rows>) = d.axis_values().map(|(t, m)| (t, to_rows(m))).unzip();
    out.set_item("theta", (0..g.len()).map(|k| g.angle(k)).collect::<Vec<_>>())?;
    out.set_item("t", t)?;
    out.set_item("values", values)?;
    out.set_item("max_defect", d.max_defect())?;
    out.set_item("flagged_nodes", d.flagged_nodes())?;
    Ok(out.into_any())
}

/// Outer spectral factor on the disk.
#[pyclass(name = "SpectralFactor", module = "snode", frozen)]
struct PyFactor(specfact::SpectralFactor);

#[pymethods]
impl PyFactor {
    /// Taylor coefficients `Ĝ_m` on the disk.
    #[getter]
    fn coeffs(&self) -> Vec<Rows> {
        self.0.coeffs.iter().map(to_rows).collect()
    }

    #[getter]
    fn iterations(&self) -> usize {
        self.0.iterations
    }

    /// `G(z)` at a point of the upper half-plane.
    fn eval(&self, z: Complex64) -> PyResult<Rows> {
        specfact::evaluate_interior(&self.0, z)
            .map(|v| to_rows(&v.value))
            .map_err(err)
    }

    /// `Ĝ(ζ)` at a point of the open disk.
    fn eval_disk(&self, zeta: Complex64) -> Rows {
        to_rows(&self.0.eval_disk(zeta))
    }

    /// Outerness certificate report.
    fn certificate<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_dict(py, &specfact::outer_certificate(&self.0))
    }
}

/// Extracts the density of `φ`, screens it with the Szegő test and runs
/// Wilson's iteration.
#[pyfunction]
#[pyo3(signature = (node, pair, grid=4096, z0=Complex64::new(0.0, 1.0)))]
fn wilson_factorize(py: Python<'_>, node: &PySNode, pair: &PyPair, grid: usize, z0: Complex64) -> PyResult<PyFactor> {
    let (g, map) = grid_and_map(grid, z0)?;
    let h = HerglotzEval::from_lft(&node.0, pair.0.clone()).map_err(err)?;
    py.detach(|| {
        let d = conformal::extract_density(&h, &g, &map, conformal::DEFAULT_EPS)?;
        specfact::szego_check(&d, &map).into_result()?;
        specfact::wilson_factorize(&d)
    })
    .map(PyFactor)
    .map_err(err)
}

/// Runs the entropy inequality pipeline at the points `zs`.
#[pyfunction]
#[pyo3(signature = (node, pair, zs, grid=4096, z0=Complex64::new(0.0, 1.0)))]
fn verify_inequality<'py>(
    py: Python<'py>,
    node: &PySNode,
    pair: &PyPair,
    zs: Vec<Complex64>,
    grid: usize,
    z0: Complex64,
) -> PyResult<Bound<'py, PyAny>> {
    let (g, map) = grid_and_map(grid, z0)?;
    let v = py
        .detach(|| entropy::verify_inequality(&node.0, &pair.0, &zs, &g, &map))
        .map_err(err)?;
    let dict = to_dict(py, &v)?;
    dict.set_item("passed", !v.hypothesis_fail && !v.any_violation())?;
    Ok(dict)
}

#[pymodule]
fn snode(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("SNodeError", m.py().get_type::<SNodeError>())?;
    m.add_class::<PySNode>()?;
    m.add_class::<PyPair>()?;
    m.add_class::<PyFactor>()?;
    m.add_function(wrap_pyfunction!(frame_value, m)?)?;
    m.add_function(wrap_pyfunction!(rho, m)?)?;
    m.add_function(wrap_pyfunction!(check_j_inequality, m)?)?;
    m.add_function(wrap_pyfunction!(phi, m)?)?;
    m.add_function(wrap_pyfunction!(extract_density, m)?)?;
    m.add_function(wrap_pyfunction!(wilson_factorize, m)?)?;
    m.add_function(wrap_pyfunction!(verify_inequality, m)?)?;
    Ok(())
}
