use num_complex::Complex64;
use pyo3::exceptions::{PyArithmeticError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use qsde::germ::{self, Germ, StructuralModel};
use qsde::ito_algebra::{self, Index, ItoElement};
use qsde::linalg::Mat;
use qsde::unraveling::{self, Channel, Observable, StreamId, TimeGrid, TrajectoryModel};
use qsde::{semigroup, Error};

type PyMatrix = Vec<Vec<Complex64>>;

fn err(e: Error) -> PyErr {
    match e {
        Error::NonFinite { .. } | Error::DilationFailure(_) | Error::SingularMetric(_) => {
            PyArithmeticError::new_err(e.to_string())
        }
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn to_mat(rows: &PyMatrix) -> PyResult<Mat> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|row| row.len() != c) {
        return Err(PyValueError::new_err("ragged matrix"));
    }
    Ok(Mat::from_fn(r, c, |i, j| rows[i][j]))
}

fn from_mat(m: &Mat) -> PyMatrix {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

fn to_mats(v: &[PyMatrix]) -> PyResult<Vec<Mat>> {
    v.iter().map(to_mat).collect()
}

fn parse_index(s: &str) -> PyResult<Index> {
    s.parse().map_err(err)
}

/// Element `(a_+^-, a_•^-, a_+^•, a_•^•)` of an Itô algebra.
#[pyclass(name = "ItoElement", module = "qsde_py", frozen)]
struct PyItoElement {
    inner: ItoElement,
}

#[pymethods]
impl PyItoElement {
    #[new]
    fn new(scalar: Complex64, row: Vec<Complex64>, col: Vec<Complex64>, block: PyMatrix) -> PyResult<Self> {
        let row = nalgebra::RowDVector::from_vec(row);
        let col = nalgebra::DVector::from_vec(col);
        let inner = ItoElement::from_blocks(scalar, row, col, to_mat(&block)?).map_err(err)?;
        Ok(PyItoElement { inner })
    }

    #[staticmethod]
    fn death(k_dim: usize) -> Self {
        PyItoElement { inner: ito_algebra::death_element(k_dim) }
    }

    #[staticmethod]
    fn wiener(alpha: Complex64, xi: Complex64) -> Self {
        PyItoElement { inner: ito_algebra::wiener_element(alpha, xi) }
    }

    #[staticmethod]
    fn poisson(alpha: Complex64, zeta: Complex64) -> Self {
        PyItoElement { inner: ito_algebra::poisson_element(alpha, zeta) }
    }

    /// `mu`, `nu` are `"-"`, `"."` or `"+"`.
    #[staticmethod]
    fn canonical(k_dim: usize, mu: &str, nu: &str, coef: PyMatrix) -> PyResult<Self> {
        let inner =
            ito_algebra::canonical_element(k_dim, parse_index(mu)?, parse_index(nu)?, &to_mat(&coef)?).map_err(err)?;
        Ok(PyItoElement { inner })
    }

    #[getter]
    fn k_dim(&self) -> usize {
        self.inner.k_dim()
    }

    #[getter]
    fn scalar(&self) -> Complex64 {
        self.inner.scalar
    }

    #[getter]
    fn row(&self) -> Vec<Complex64> {
        self.inner.row.iter().copied().collect()
    }

    #[getter]
    fn col(&self) -> Vec<Complex64> {
        self.inner.col.iter().copied().collect()
    }

    #[getter]
    fn block(&self) -> PyMatrix {
        from_mat(&self.inner.block)
    }

    fn product(&self, other: &PyItoElement) -> PyResult<Self> {
        Ok(PyItoElement { inner: ito_algebra::hp_product(&self.inner, &other.inner).map_err(err)? })
    }

    fn __mul__(&self, other: &PyItoElement) -> PyResult<Self> {
        self.product(other)
    }

    fn flat(&self) -> Self {
        PyItoElement { inner: ito_algebra::flat(&self.inner) }
    }

    fn mean(&self) -> Complex64 {
        ito_algebra::mean(&self.inner)
    }

    fn __eq__(&self, other: &PyItoElement) -> bool {
        self.inner == other.inner
    }

    fn __repr__(&self) -> String {
        format!("ItoElement(k_dim={}, scalar={})", self.inner.k_dim(), self.inner.scalar)
    }
}

#[pyclass(name = "Germ", module = "qsde_py", frozen)]
struct PyGerm {
    inner: Germ,
}

#[pymethods]
impl PyGerm {
    /// Germ of `K = iH + ½(Σ L^{i†}L^i − D)` with `l[i] = L^i` and `ln[n][i] = L_n^i`.
    #[staticmethod]
    #[pyo3(signature = (h, l, ln, kn=None, dissipation=None))]
    fn from_structural(
        h: PyMatrix,
        l: Vec<PyMatrix>,
        ln: Vec<Vec<PyMatrix>>,
        kn: Option<Vec<PyMatrix>>,
        dissipation: Option<PyMatrix>,
    ) -> PyResult<Self> {
        let h = to_mat(&h)?;
        let model = StructuralModel {
            n: h.nrows(),
            d: ln.len(),
            kraus_mult: l.len(),
            h,
            l: to_mats(&l)?,
            ln: ln.iter().map(|row| to_mats(row)).collect::<PyResult<_>>()?,
            kn: kn.map(|k| to_mats(&k)).transpose()?,
            dissipation: dissipation.map(|d| to_mat(&d)).transpose()?,
        };
        Ok(PyGerm { inner: germ::build_germ(&model).map_err(err)? })
    }

    #[staticmethod]
    fn damped_qubit() -> Self {
        PyGerm { inner: germ::build_germ(&StructuralModel::damped_qubit()).expect("reference model is valid") }
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn d(&self) -> usize {
        self.inner.d()
    }

    fn gamma(&self, b: PyMatrix) -> PyResult<PyMatrix> {
        Ok(from_mat(&self.inner.gamma(&to_mat(&b)?)))
    }

    /// The `(1+d)n x (1+d)n` block matrix of all germ entries at `b`.
    fn block_matrix(&self, b: PyMatrix) -> PyResult<PyMatrix> {
        Ok(from_mat(&self.inner.block_matrix(&to_mat(&b)?)))
    }

    fn with_negated_exchange(&self) -> Self {
        PyGerm { inner: self.inner.with_negated_exchange() }
    }

    #[pyo3(signature = (tol=germ::DEFAULT_PSD_TOL))]
    fn check_ccp<'py>(&self, py: Python<'py>, tol: f64) -> PyResult<Bound<'py, PyDict>> {
        let ops = qsde::linalg::matrix_unit_basis_with_identity(self.inner.n());
        let v = germ::check_ccp(&self.inner, &ops, tol).map_err(err)?;
        let d = PyDict::new(py);
        d.set_item("is_ccp", v.is_ccp)?;
        d.set_item("min_eig", v.min_eig)?;
        d.set_item("scale", v.scale)?;
        d.set_item("constrained_min_eig", v.constrained_min_eig)?;
        d.set_item("constrained_is_ccp", v.constrained_is_ccp)?;
        d.set_item("kernel_dim", v.kernel_dim)?;
        d.set_item("verdicts_agree", v.verdicts_agree)?;
        Ok(d)
    }

    #[pyo3(signature = (cutoff=1e-12))]
    fn dilate(&self, cutoff: f64) -> PyResult<PyDilation> {
        Ok(PyDilation { inner: germ::kolmogorov_dilation(&self.inner, cutoff).map_err(err)? })
    }

    fn evolve_heisenberg(&self, b0: PyMatrix, tmax: f64, steps: usize) -> PyResult<Vec<PyMatrix>> {
        let res = semigroup::evolve_heisenberg(&self.inner, &to_mat(&b0)?, tmax, steps).map_err(err)?;
        Ok(res.values.iter().map(from_mat).collect())
    }

    fn evolve_schrodinger(&self, rho0: PyMatrix, tmax: f64, steps: usize) -> PyResult<Vec<PyMatrix>> {
        let res = semigroup::evolve_schrodinger(&self.inner, &to_mat(&rho0)?, tmax, steps).map_err(err)?;
        Ok(res.values.iter().map(from_mat).collect())
    }

    /// Iterates `0..=iters`, each a list of matrices on the grid.
    fn picard_minimal(&self, b0: PyMatrix, tmax: f64, steps: usize, iters: usize) -> PyResult<Vec<Vec<PyMatrix>>> {
        let res = semigroup::picard_minimal(&self.inner, &to_mat(&b0)?, tmax, steps, iters).map_err(err)?;
        Ok(res.iter().map(|r| r.values.iter().map(from_mat).collect()).collect())
    }
}

#[pyclass(name = "Dilation", module = "qsde_py", frozen)]
struct PyDilation {
    inner: germ::DilationData,
}

#[pymethods]
impl PyDilation {
    #[getter]
    fn rank(&self) -> usize {
        self.inner.rank()
    }

    #[getter]
    fn l_circ(&self) -> Vec<PyMatrix> {
        self.inner.l_circ.iter().map(from_mat).collect()
    }

    #[getter]
    fn l_minus(&self) -> Vec<PyMatrix> {
        self.inner.l_minus.iter().map(from_mat).collect()
    }

    fn metric(&self) -> PyMatrix {
        from_mat(&self.inner.metric())
    }

    fn j(&self, b: PyMatrix) -> PyResult<PyMatrix> {
        Ok(from_mat(&self.inner.j(&to_mat(&b)?)))
    }

    fn k(&self, b: PyMatrix) -> PyResult<PyMatrix> {
        Ok(from_mat(&self.inner.k(&to_mat(&b)?)))
    }

    /// `(germ residual, flat residual)` at `b`.
    fn verify(&self, germ: &PyGerm, b: PyMatrix) -> PyResult<(f64, f64)> {
        let r = germ::verify_dilation(&self.inner, &germ.inner, &to_mat(&b)?);
        Ok((r.germ, r.flat))
    }
}

#[pyclass(name = "TrajectoryModel", module = "qsde_py", frozen)]
struct PyTrajectoryModel {
    inner: TrajectoryModel,
}

#[pymethods]
impl PyTrajectoryModel {
    /// `channels` is a list of `("diffusive", L)` or `("jump", J)`.
    #[new]
    fn new(k: PyMatrix, channels: Vec<(String, PyMatrix)>) -> PyResult<Self> {
        let chans = channels
            .iter()
            .map(|(kind, m)| {
                let m = to_mat(m)?;
                match kind.as_str() {
                    "diffusive" => Ok(Channel::Diffusive { l: m }),
                    "jump" => Ok(Channel::Jump { j: m }),
                    other => Err(PyValueError::new_err(format!("unknown channel kind `{other}`"))),
                }
            })
            .collect::<PyResult<Vec<_>>>()?;
        Ok(PyTrajectoryModel { inner: TrajectoryModel::new(to_mat(&k)?, chans).map_err(err)? })
    }

    #[staticmethod]
    fn damped_qubit(kind: &str) -> PyResult<Self> {
        let inner = match kind {
            "diffusive" => unraveling::damped_qubit::diffusive(),
            "jump" => unraveling::damped_qubit::jump(),
            other => return Err(PyValueError::new_err(format!("unknown kind `{other}`"))),
        };
        Ok(PyTrajectoryModel { inner })
    }

    #[getter]
    fn is_filtering(&self) -> bool {
        self.inner.is_filtering()
    }

    #[getter]
    fn is_subfiltering(&self) -> bool {
        self.inner.is_subfiltering()
    }

    #[getter]
    fn is_unitary_diffusive(&self) -> bool {
        self.inner.is_unitary_diffusive()
    }

    #[getter]
    fn is_unitary_jump(&self) -> bool {
        self.inner.is_unitary_jump()
    }

    fn germ(&self) -> PyResult<PyGerm> {
        let model = self.inner.to_structural_model().map_err(err)?;
        Ok(PyGerm { inner: germ::build_germ(&model).map_err(err)? })
    }

    /// Propagators `V(t_j)` of trajectory `index` under `seed`.
    #[pyo3(signature = (dt, tmax, seed, index=0))]
    fn simulate(&self, dt: f64, tmax: f64, seed: u64, index: u64) -> PyResult<Vec<PyMatrix>> {
        let grid = TimeGrid::new(dt, tmax).map_err(err)?;
        let stream = StreamId::new(seed, index);
        let traj = match self.inner.kind() {
            Some(unraveling::Kind::Jump) => unraveling::simulate_jump(&self.inner, &grid, stream),
            _ => unraveling::simulate_diffusive(&self.inner, &grid, stream),
        }
        .map_err(err)?;
        Ok(traj.propagators.iter().map(from_mat).collect())
    }

    /// Dict with `t`, `norm_mean`, `norm_stderr` and per observable `(mean, stderr)`.
    #[pyo3(signature = (observables, psi0, ntraj, dt, tmax, seed, threads=0))]
    #[allow(clippy::too_many_arguments)]
    fn ensemble<'py>(
        &self,
        py: Python<'py>,
        observables: Vec<(String, PyMatrix)>,
        psi0: Vec<Complex64>,
        ntraj: usize,
        dt: f64,
        tmax: f64,
        seed: u64,
        threads: usize,
    ) -> PyResult<Bound<'py, PyDict>> {
        let grid = TimeGrid::new(dt, tmax).map_err(err)?;
        let obs = observables
            .iter()
            .map(|(name, m)| Ok(Observable::new(name.clone(), to_mat(m)?)))
            .collect::<PyResult<Vec<_>>>()?;
        let psi0 = nalgebra::DVector::from_vec(psi0);
        let res = py
            .detach(|| unraveling::ensemble_with_threads(&self.inner, &obs, &psi0, ntraj, &grid, seed, threads))
            .map_err(err)?;
        let d = PyDict::new(py);
        d.set_item("t", res.grid)?;
        d.set_item("norm_mean", res.norm_mean)?;
        d.set_item("norm_stderr", res.norm_stderr)?;
        d.set_item("ntraj", res.n_traj)?;
        let per = PyDict::new(py);
        for o in res.observables {
            per.set_item(o.name, (o.mean, o.stderr))?;
        }
        d.set_item("observables", per)?;
        Ok(d)
    }
}

/// Runs the `qsde` command line with `argv` (without the program name).
#[pyfunction]
fn run_cli(argv: Vec<String>) -> i32 {
    qsde::cli::run(std::iter::once("qsde".to_string()).chain(argv))
}

#[pymodule]
fn qsde_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyItoElement>()?;
    m.add_class::<PyGerm>()?;
    m.add_class::<PyDilation>()?;
    m.add_class::<PyTrajectoryModel>()?;
    m.add_function(wrap_pyfunction!(run_cli, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
