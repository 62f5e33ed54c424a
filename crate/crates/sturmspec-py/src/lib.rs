//! Python bindings for the discrete Sturm-Liouville spectral toolkit.
//!
//! Matrices cross the boundary as nested lists of complex numbers (row
//! major); spectra come back as lists of `(eigenvalue, multiplicity)`
//! pairs.  All operations run with the library's default tolerances.

use num_complex::Complex64;
use pyo3::exceptions::{PyIndexError, PyValueError};
use pyo3::prelude::*;

use sturmspec::atkinson::{self, AtkinsonProblem};
use sturmspec::classify::{self, Space};
use sturmspec::error::Error;
use sturmspec::numkernel::{CMatrix, InertiaSignature, Tolerances};
use sturmspec::perturb::{self, BranchFate, ParamPath};
use sturmspec::problem::{BoundaryChart, BoundaryCondition, BoundaryRaw, SLEquation};
use sturmspec::spectrum::{self, Spectrum};

type Matrix = Vec<Vec<Complex64>>;
type Inertia = (usize, usize, usize);

fn err(e: Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn tols() -> Tolerances {
    Tolerances::default()
}

fn matrix_in(rows: &Matrix, label: &str) -> PyResult<CMatrix> {
    let r = rows.len();
    let c = rows.first().map_or(0, |row| row.len());
    if r == 0 || c == 0 || rows.iter().any(|row| row.len() != c) {
        return Err(PyValueError::new_err(format!(
            "{label} must be a non-empty rectangular nested list"
        )));
    }
    Ok(CMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

fn matrices_in(list: &[Matrix], label: &str) -> PyResult<Vec<CMatrix>> {
    list.iter()
        .enumerate()
        .map(|(i, m)| matrix_in(m, &format!("{label}[{i}]")))
        .collect()
}

fn matrix_out(m: &CMatrix) -> Matrix {
    (0..m.rows())
        .map(|i| (0..m.cols()).map(|j| m[(i, j)]).collect())
        .collect()
}

fn spectrum_out(spec: &Spectrum) -> Vec<(f64, usize)> {
    spec.items().to_vec()
}

fn signature_in(sig: Inertia) -> InertiaSignature {
    InertiaSignature::new(sig.0, sig.1, sig.2)
}

fn space_in(space: &str) -> PyResult<Space> {
    match space {
        "bc" => Ok(Space::BoundaryCondition),
        "eq" => Ok(Space::Equation),
        "atkinson" => Ok(Space::Atkinson),
        other => Err(PyValueError::new_err(format!(
            "space must be \"bc\", \"eq\" or \"atkinson\", got {other:?}"
        ))),
    }
}

fn fate_out(fate: BranchFate) -> String {
    match fate {
        BranchFate::DivergesDown => "down".into(),
        BranchFate::DivergesUp => "up".into(),
        BranchFate::ConvergesTo(m) => format!("->{m}"),
    }
}

/// Discrete self-adjoint Sturm-Liouville equation.
#[pyclass(frozen)]
struct Problem {
    inner: SLEquation,
}

#[pymethods]
impl Problem {
    /// Problem(d, n, pinv, q, w): `pinv` lists the n+1 inverse leading
    /// coefficients, `q` the n potentials, `w` the n weights.
    #[new]
    fn new(d: usize, n: usize, pinv: Vec<Matrix>, q: Vec<Matrix>, w: Vec<Matrix>) -> PyResult<Self> {
        let inner = SLEquation::new(
            d,
            n,
            matrices_in(&pinv, "pinv")?,
            matrices_in(&q, "q")?,
            matrices_in(&w, "w")?,
            &tols(),
        )
        .map_err(err)?;
        Ok(Problem { inner })
    }

    #[getter]
    fn d(&self) -> usize {
        self.inner.d()
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    fn pinv(&self, j: usize) -> PyResult<Matrix> {
        if j > self.inner.n() {
            return Err(PyIndexError::new_err(format!("pinv index {j} out of range")));
        }
        Ok(matrix_out(self.inner.pinv(j)))
    }

    fn q(&self, i: usize) -> PyResult<Matrix> {
        if i == 0 || i > self.inner.n() {
            return Err(PyIndexError::new_err(format!("q index {i} out of range")));
        }
        Ok(matrix_out(self.inner.q(i)))
    }

    fn w(&self, i: usize) -> PyResult<Matrix> {
        if i == 0 || i > self.inner.n() {
            return Err(PyIndexError::new_err(format!("w index {i} out of range")));
        }
        Ok(matrix_out(self.inner.w(i)))
    }

    fn __repr__(&self) -> String {
        format!("Problem(d={}, n={})", self.inner.d(), self.inner.n())
    }
}

/// Self-adjoint boundary condition, raw pair or chart point.
#[pyclass(frozen)]
struct Boundary {
    inner: BoundaryCondition,
}

#[pymethods]
impl Boundary {
    /// Boundary.raw(a, b) with 2d x 2d matrices, rank (a, b) = 2d, a b* = b a*.
    #[staticmethod]
    fn raw(a: Matrix, b: Matrix) -> PyResult<Self> {
        let raw = BoundaryRaw::new(matrix_in(&a, "a")?, matrix_in(&b, "b")?, &tols()).map_err(err)?;
        Ok(Boundary {
            inner: BoundaryCondition::Raw(raw),
        })
    }

    /// Boundary.chart(k, s) with K a subset of {1..2d} and S 2d x 2d Hermitian.
    #[staticmethod]
    fn chart(k: Vec<usize>, s: Matrix) -> PyResult<Self> {
        let chart = BoundaryChart::new(k, matrix_in(&s, "s")?, &tols()).map_err(err)?;
        Ok(Boundary {
            inner: BoundaryCondition::Chart(chart),
        })
    }

    #[getter]
    fn d(&self) -> usize {
        self.inner.d()
    }

    /// Representative raw pair (a, b).
    fn to_raw(&self) -> PyResult<(Matrix, Matrix)> {
        let raw = self.inner.to_raw(&tols()).map_err(err)?;
        Ok((matrix_out(raw.a()), matrix_out(raw.b())))
    }

    fn __repr__(&self) -> String {
        match &self.inner {
            BoundaryCondition::Raw(_) => format!("Boundary.raw(d={})", self.inner.d()),
            BoundaryCondition::Chart(c) => format!("Boundary.chart(K={:?}, d={})", c.k(), c.d()),
        }
    }
}

impl Boundary {
    fn chart_ref(&self) -> PyResult<&BoundaryChart> {
        match &self.inner {
            BoundaryCondition::Chart(chart) => Ok(chart),
            BoundaryCondition::Raw(_) => Err(PyValueError::new_err(
                "this operation needs a chart boundary condition",
            )),
        }
    }
}

/// Atkinson-type problem given by integrated coefficient data.
#[pyclass(frozen)]
struct Atkinson {
    inner: AtkinsonProblem,
}

#[pymethods]
impl Atkinson {
    /// Atkinson(d, partition, what, qhat, pinvhat) with 2n+2 partition
    /// nodes, n+1 weight/potential integrals and n stiffness integrals.
    #[new]
    fn new(
        d: usize,
        partition: Vec<f64>,
        what: Vec<Matrix>,
        qhat: Vec<Matrix>,
        pinvhat: Vec<Matrix>,
    ) -> PyResult<Self> {
        let inner = AtkinsonProblem::new(
            d,
            partition,
            matrices_in(&what, "what")?,
            matrices_in(&qhat, "qhat")?,
            matrices_in(&pinvhat, "pinvhat")?,
            &tols(),
        )
        .map_err(err)?;
        Ok(Atkinson { inner })
    }

    #[getter]
    fn d(&self) -> usize {
        self.inner.d()
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn partition(&self) -> Vec<f64> {
        self.inner.partition().to_vec()
    }

    /// Equivalent discrete problem of size n+1.
    fn reduce(&self) -> PyResult<Problem> {
        Ok(Problem {
            inner: atkinson::to_discrete(&self.inner, &tols()).map_err(err)?,
        })
    }

    fn __repr__(&self) -> String {
        format!("Atkinson(d={}, n={})", self.inner.d(), self.inner.n())
    }
}

/// Eigenvalues with multiplicities, ascending.
#[pyfunction]
fn eigenvalues(problem: &Problem, bc: &Boundary) -> PyResult<Vec<(f64, usize)>> {
    let spec = spectrum::eigenvalues(&problem.inner, &bc.inner, &tols()).map_err(err)?;
    Ok(spectrum_out(&spec))
}

/// Exact number of eigenvalues from the rank formula.
#[pyfunction]
fn count(problem: &Problem, bc: &Boundary) -> PyResult<usize> {
    let raw = bc.inner.to_raw(&tols()).map_err(err)?;
    spectrum::count_formula(&problem.inner, &raw, &tols()).map_err(err)
}

/// Independent dense-pencil route to the spectrum.
#[pyfunction]
fn pencil_oracle(problem: &Problem, bc: &Boundary) -> PyResult<Vec<(f64, usize)>> {
    let raw = bc.inner.to_raw(&tols()).map_err(err)?;
    let spec = spectrum::pencil_oracle(&problem.inner, &raw, &tols()).map_err(err)?;
    Ok(spectrum_out(&spec))
}

/// Normalized eigenfunction values y_0..y_{n+1} for a simple eigenvalue.
#[pyfunction]
fn eigenfunction(problem: &Problem, bc: &Boundary, lam: f64) -> PyResult<Vec<Matrix>> {
    let raw = bc.inner.to_raw(&tols()).map_err(err)?;
    let ef = spectrum::eigenfunction(&problem.inner, &raw, lam, &tols()).map_err(err)?;
    Ok((0..=problem.inner.n() + 1).map(|i| matrix_out(ef.y(i))).collect())
}

/// (layer, (r_minus, r_zero, r_plus), classifier) in boundary-condition space.
#[pyfunction]
fn classify_bc(problem: &Problem, bc: &Boundary) -> PyResult<(usize, Inertia, Matrix)> {
    let chart = bc.chart_ref()?;
    let sig = classify::bc_signature(&problem.inner, chart, &tols()).map_err(err)?;
    let classifier = classify::bc_classifier(&problem.inner, chart, &tols()).map_err(err)?;
    Ok((
        sig.layer,
        (sig.inertia.r_minus, sig.inertia.r_zero, sig.inertia.r_plus),
        matrix_out(&classifier),
    ))
}

/// (layer, (r_minus, r_zero, r_plus), classifier) in equation space.
#[pyfunction]
fn classify_eq(problem: &Problem, bc: &Boundary) -> PyResult<(usize, Inertia, Matrix)> {
    let chart = bc.chart_ref()?;
    let sig = classify::eq_signature(&problem.inner, chart, &tols()).map_err(err)?;
    let classifier = classify::eq_classifier(&problem.inner, chart, &tols()).map_err(err)?;
    Ok((
        sig.layer,
        (sig.inertia.r_minus, sig.inertia.r_zero, sig.inertia.r_plus),
        matrix_out(&classifier),
    ))
}

/// (layer, (r_minus, r_zero, r_plus), classifier) in Atkinson space.
#[pyfunction]
fn classify_atkinson(bc: &Boundary) -> PyResult<(usize, Inertia, Matrix)> {
    let chart = bc.chart_ref()?;
    let sig = atkinson::atkinson_classify(chart, &tols()).map_err(err)?;
    let classifier = classify::atkinson_classifier(chart).map_err(err)?;
    Ok((
        sig.layer,
        (sig.inertia.r_minus, sig.inertia.r_zero, sig.inertia.r_plus),
        matrix_out(&classifier),
    ))
}

/// Predicted (n_down, n_up, index_shift) for a jump from the signature
/// `frm` (at t > 0) into `to` (the singular limit).
#[pyfunction]
fn predict_jump(frm: Inertia, to: Inertia, space: &str) -> PyResult<(usize, usize, usize)> {
    let p = classify::predict_jump(signature_in(frm), signature_in(to), space_in(space)?)
        .map_err(err)?;
    Ok((p.n_down, p.n_up, p.index_shift))
}

/// Spectrum of an Atkinson problem through the discrete reduction.
#[pyfunction]
fn atkinson_spectrum(problem: &Atkinson, bc: &Boundary) -> PyResult<Vec<(f64, usize)>> {
    let raw = bc.inner.to_raw(&tols()).map_err(err)?;
    let spec = atkinson::atkinson_spectrum(&problem.inner, &raw, &tols()).map_err(err)?;
    Ok(spectrum_out(&spec))
}

/// Exact Atkinson eigenvalue count (N - 1) d + rank B.
#[pyfunction]
fn atkinson_count(problem: &Atkinson, bc: &Boundary) -> PyResult<usize> {
    let raw = bc.inner.to_raw(&tols()).map_err(err)?;
    atkinson::atkinson_count(&problem.inner, &raw, &tols()).map_err(err)
}

fn report_out(
    report: &perturb::JumpReport,
) -> (bool, (usize, usize, usize), (usize, usize, usize), Vec<String>, Vec<(f64, usize)>) {
    (
        report.pass,
        (
            report.predicted.n_down,
            report.predicted.n_up,
            report.predicted.index_shift,
        ),
        (
            report.observed.n_down,
            report.observed.n_up,
            report.observed.index_shift,
        ),
        report.fates.iter().map(|&f| fate_out(f)).collect(),
        spectrum_out(&report.endpoint),
    )
}

fn run_jump(
    path: ParamPath,
    target: InertiaSignature,
    sig1: InertiaSignature,
    space: Space,
) -> PyResult<(bool, (usize, usize, usize), (usize, usize, usize), Vec<String>, Vec<(f64, usize)>)> {
    let prediction = classify::predict_jump(target, sig1, space).map_err(err)?;
    let report = perturb::jump_experiment(&path, prediction, &tols()).map_err(err)?;
    Ok(report_out(&report))
}

/// Jump experiment in boundary-condition space: returns
/// (pass, predicted, observed, fates, endpoint_spectrum).
#[pyfunction]
#[pyo3(signature = (problem, bc, target, t_max = 0.25, k_steps = 20))]
fn jump_bc(
    problem: &Problem,
    bc: &Boundary,
    target: Inertia,
    t_max: f64,
    k_steps: usize,
) -> PyResult<(bool, (usize, usize, usize), (usize, usize, usize), Vec<String>, Vec<(f64, usize)>)> {
    let chart = bc.chart_ref()?;
    let t = tols();
    let target = signature_in(target);
    let sig = classify::bc_signature(&problem.inner, chart, &t).map_err(err)?;
    let path =
        perturb::make_bc_path(&problem.inner, chart, target, t_max, k_steps, &t).map_err(err)?;
    run_jump(path, target, sig.inertia, Space::BoundaryCondition)
}

/// Jump experiment in equation space.
#[pyfunction]
#[pyo3(signature = (problem, bc, target, t_max = 0.25, k_steps = 20))]
fn jump_eq(
    problem: &Problem,
    bc: &Boundary,
    target: Inertia,
    t_max: f64,
    k_steps: usize,
) -> PyResult<(bool, (usize, usize, usize), (usize, usize, usize), Vec<String>, Vec<(f64, usize)>)> {
    let chart = bc.chart_ref()?;
    let t = tols();
    let target = signature_in(target);
    let sig = classify::eq_signature(&problem.inner, chart, &t).map_err(err)?;
    let path =
        perturb::make_eq_path(&problem.inner, chart, target, t_max, k_steps, &t).map_err(err)?;
    run_jump(path, target, sig.inertia, Space::Equation)
}

/// Jump experiment in the Atkinson boundary-condition space.
#[pyfunction]
#[pyo3(signature = (problem, bc, target, t_max = 0.25, k_steps = 20))]
fn jump_atkinson(
    problem: &Atkinson,
    bc: &Boundary,
    target: Inertia,
    t_max: f64,
    k_steps: usize,
) -> PyResult<(bool, (usize, usize, usize), (usize, usize, usize), Vec<String>, Vec<(f64, usize)>)> {
    let chart = bc.chart_ref()?;
    let t = tols();
    let target = signature_in(target);
    let sig = atkinson::atkinson_classify(chart, &t).map_err(err)?;
    let path = atkinson::make_atkinson_bc_path(&problem.inner, chart, target, t_max, k_steps, &t)
        .map_err(err)?;
    run_jump(path, target, sig.inertia, Space::Atkinson)
}

/// Derivative of a simple eigenvalue when the chart parameter S moves
/// along the Hermitian direction h.
#[pyfunction]
fn d_lambda_bc(problem: &Problem, bc: &Boundary, lam: f64, h: Matrix) -> PyResult<f64> {
    let chart = bc.chart_ref()?;
    perturb::d_lambda_bc(&problem.inner, chart, lam, &matrix_in(&h, "h")?, &tols()).map_err(err)
}

#[pymodule]
#[pyo3(name = "sturmspec")]
fn sturmspec_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Problem>()?;
    m.add_class::<Boundary>()?;
    m.add_class::<Atkinson>()?;
    m.add_function(wrap_pyfunction!(eigenvalues, m)?)?;
    m.add_function(wrap_pyfunction!(count, m)?)?;
    m.add_function(wrap_pyfunction!(pencil_oracle, m)?)?;
    m.add_function(wrap_pyfunction!(eigenfunction, m)?)?;
    m.add_function(wrap_pyfunction!(classify_bc, m)?)?;
    m.add_function(wrap_pyfunction!(classify_eq, m)?)?;
    m.add_function(wrap_pyfunction!(classify_atkinson, m)?)?;
    m.add_function(wrap_pyfunction!(predict_jump, m)?)?;
    m.add_function(wrap_pyfunction!(atkinson_spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(atkinson_count, m)?)?;
    m.add_function(wrap_pyfunction!(jump_bc, m)?)?;
    m.add_function(wrap_pyfunction!(jump_eq, m)?)?;
    m.add_function(wrap_pyfunction!(jump_atkinson, m)?)?;
    m.add_function(wrap_pyfunction!(d_lambda_bc, m)?)?;
    Ok(())
}
