//! Dense complex matrix helpers shared by every module.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type Mat = DMatrix<C64>;
pub type Vector = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn identity(n: usize) -> Mat {
    Mat::identity(n, n)
}

pub fn zeros(r: usize, c: usize) -> Mat {
    Mat::zeros(r, c)
}

pub fn dagger(m: &Mat) -> Mat {
    m.adjoint()
}

/// Matrix unit `|p><q|` in dimension `n`.
pub fn matrix_unit(n: usize, p: usize, q: usize) -> Mat {
    let mut m = zeros(n, n);
    m[(p, q)] = ONE;
    m
}

/// Every matrix unit of M_n in row-major order `(p, q)` followed by the identity.
pub fn matrix_unit_basis_with_identity(n: usize) -> Vec<Mat> {
    let mut ops = Vec::with_capacity(n * n + 1);
    for p in 0..n {
        for q in 0..n {
            ops.push(matrix_unit(n, p, q));
        }
    }
    ops.push(identity(n));
    ops
}

/// Frobenius norm.
pub fn fro(m: &Mat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Largest absolute entry.
pub fn max_abs(m: &Mat) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn max_abs_diff(a: &Mat, b: &Mat) -> f64 {
    assert_eq!(a.shape(), b.shape(), "max_abs_diff shape mismatch");
    a.iter().zip(b.iter()).fold(0.0, |acc, (x, y)| acc.max((x - y).norm()))
}

pub fn is_square(m: &Mat, n: usize) -> bool {
    m.nrows() == n && m.ncols() == n
}

pub fn ensure_square(m: &Mat, n: usize, what: &str) -> Result<()> {
    if is_square(m, n) {
        Ok(())
    } else {
        Err(Error::DimensionMismatch(format!(
            "{what}: expected {n}x{n}, got {}x{}",
            m.nrows(),
            m.ncols()
        )))
    }
}

/// Relative Hermiticity defect `|M - M^dag| / max(1, |M|)` in the max-entry norm.
pub fn hermiticity_defect(m: &Mat) -> f64 {
    max_abs_diff(m, &m.adjoint()) / max_abs(m).max(1.0)
}

/// Eigen-decomposition of a Hermitian matrix. The input is symmetrized first,
/// eigenvalues come back in ascending order with matching eigenvector columns.
pub fn hermitian_eigh(m: &Mat) -> (Vec<f64>, Mat) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), zeros(0, 0));
    }
    let sym = (m + m.adjoint()) * c(0.5, 0.0);
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

/// Matrix exponential (scaling and squaring with a Padé approximant).
pub fn expm(m: &Mat) -> Mat {
    if m.nrows() == 0 {
        return m.clone();
    }
    m.exp()
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &Mat, b: &Mat) -> Mat {
    a.kronecker(b)
}

/// Column-stacking vectorization.
pub fn vec_of(m: &Mat) -> Vector {
    Vector::from_iterator(m.len(), m.iter().copied())
}

pub fn unvec(v: &Vector, n: usize) -> Mat {
    Mat::from_iterator(n, n, v.iter().copied())
}

pub fn all_finite(m: &Mat) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Pauli and ladder operators in the basis `(|e>, |g>)`.
pub mod qubit {
    use super::*;

    /// `σ₋ = |g><e|`.
    pub fn sigma_minus() -> Mat {
        matrix_unit(2, 1, 0)
    }

    pub fn sigma_plus() -> Mat {
        matrix_unit(2, 0, 1)
    }

    /// `σ₊σ₋ = |e><e|`.
    pub fn excited_projector() -> Mat {
        matrix_unit(2, 0, 0)
    }

    pub fn sigma_x() -> Mat {
        Mat::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO])
    }

    pub fn sigma_y() -> Mat {
        Mat::from_row_slice(2, 2, &[ZERO, -I, I, ZERO])
    }

    pub fn sigma_z() -> Mat {
        Mat::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE])
    }

    pub fn excited() -> Vector {
        Vector::from_vec(vec![ONE, ZERO])
    }
}
