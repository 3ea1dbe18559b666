//! Finite-dimensional Itô *-algebras in the quadruple (GNS) representation.
//!
//! An element `a` is stored as the four blocks
//!
//! ```text
//!            ν = +      ν = •
//!   μ = −  [ scalar     row   ]     scalar: C,    row: 1 x k
//!   μ = •  [ col        block ]     col:    k x 1, block: k x k
//! ```
//!
//! so that `dΛ(a) = block·dΛ_•^• + col·dΛ_•^+ + row·dΛ_−^• + scalar·dt`.
//! The product is the Hudson–Parthasarathy dot contraction over the `•`
//! index only, which makes the death element `d` (scalar = 1) a two-sided
//! annihilator.

use nalgebra::{DMatrix, DVector, RowDVector};

use crate::error::{Error, Result};
use crate::linalg::{C64, I, ONE, ZERO};

#[derive(Debug, Clone, PartialEq)]
pub struct ItoElement {
    pub scalar: C64,
    pub row: RowDVector<C64>,
    pub col: DVector<C64>,
    pub block: DMatrix<C64>,
}

/// Upper (`−`, `•`) and lower (`+`, `•`) index labels of a quadruple block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Index {
    Minus,
    Dot,
    Plus,
}

impl std::str::FromStr for Index {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "-" | "minus" => Ok(Index::Minus),
            "." | "•" | "dot" => Ok(Index::Dot),
            "+" | "plus" => Ok(Index::Plus),
            other => Err(Error::InvalidIndex(format!("unknown index label {other:?}"))),
        }
    }
}

impl ItoElement {
    pub fn zero(k_dim: usize) -> Self {
        ItoElement {
            scalar: ZERO,
            row: RowDVector::zeros(k_dim),
            col: DVector::zeros(k_dim),
            block: DMatrix::zeros(k_dim, k_dim),
        }
    }

    /// Builds an element from its blocks, checking that they share one `k_dim`.
    pub fn from_blocks(
        scalar: C64,
        row: RowDVector<C64>,
        col: DVector<C64>,
        block: DMatrix<C64>,
    ) -> Result<Self> {
        let k = col.len();
        if row.len() != k || block.nrows() != k || block.ncols() != k {
            return Err(Error::DimensionMismatch(format!(
                "quadruple blocks disagree: row {}, col {}, block {}x{}",
                row.len(),
                k,
                block.nrows(),
                block.ncols()
            )));
        }
        Ok(ItoElement { scalar, row, col, block })
    }

    pub fn k_dim(&self) -> usize {
        self.col.len()
    }

    /// Flattens into `[scalar, row..., col..., block (column-major)...]`.
    pub fn to_vector(&self) -> DVector<C64> {
        let it = std::iter::once(self.scalar)
            .chain(self.row.iter().copied())
            .chain(self.col.iter().copied())
            .chain(self.block.iter().copied());
        DVector::from_iterator(1 + 2 * self.k_dim() + self.k_dim() * self.k_dim(), it)
    }

    pub fn scale(&self, z: C64) -> Self {
        ItoElement {
            scalar: self.scalar * z,
            row: &self.row * z,
            col: &self.col * z,
            block: &self.block * z,
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        same_k_dim(self, other)?;
        Ok(ItoElement {
            scalar: self.scalar + other.scalar,
            row: &self.row + &other.row,
            col: &self.col + &other.col,
            block: &self.block + &other.block,
        })
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        if self.k_dim() != other.k_dim() {
            return f64::INFINITY;
        }
        (self.to_vector() - other.to_vector()).iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    pub fn is_zero(&self) -> bool {
        self.to_vector().iter().all(|z| *z == ZERO)
    }
}

fn same_k_dim(a: &ItoElement, b: &ItoElement) -> Result<()> {
    if a.k_dim() == b.k_dim() {
        Ok(())
    } else {
        Err(Error::DimensionMismatch(format!("k_dim {} vs {}", a.k_dim(), b.k_dim())))
    }
}

/// Hudson–Parthasarathy product `(a•b)_ν^μ = a_•^μ b_ν^•`.
pub fn hp_product(a: &ItoElement, b: &ItoElement) -> Result<ItoElement> {
    same_k_dim(a, b)?;
    let scalar = if a.k_dim() == 0 { ZERO } else { (&a.row * &b.col)[(0, 0)] };
    Ok(ItoElement {
        scalar,
        row: &a.row * &b.block,
        col: &a.block * &b.col,
        block: &a.block * &b.block,
    })
}

/// The pseudo-Hermitian conjugation `a♭`.
pub fn flat(a: &ItoElement) -> ItoElement {
    ItoElement {
        scalar: a.scalar.conj(),
        row: a.col.adjoint(),
        col: a.row.adjoint(),
        block: a.block.adjoint(),
    }
}

/// The death element `d` representing `dt`.
pub fn death_element(k_dim: usize) -> ItoElement {
    let mut d = ItoElement::zero(k_dim);
    d.scalar = ONE;
    d
}

/// `α dt + ξ dQ` for the standard Wiener process `Q`.
pub fn wiener_element(alpha: C64, xi: C64) -> ItoElement {
    ItoElement {
        scalar: alpha,
        row: RowDVector::from_element(1, xi),
        col: DVector::from_element(1, xi),
        block: DMatrix::zeros(1, 1),
    }
}

/// `α dt + ζ dP` for the compensated Poisson process `P = N − t`.
pub fn poisson_element(alpha: C64, zeta: C64) -> ItoElement {
    ItoElement {
        scalar: alpha,
        row: RowDVector::from_element(1, -I * zeta),
        col: DVector::from_element(1, I * zeta),
        block: DMatrix::from_element(1, 1, zeta),
    }
}

/// An element of internal dimension `k_dim` with a single nonzero block at
/// position `(mu, nu)`.
///
/// `coefficient` must have the block's shape: `(•,•)` is `k x k`, `(•,+)` is
/// `k x 1`, `(−,•)` is `1 x k` and `(−,+)` is `1 x 1`.
pub fn canonical_element(
    k_dim: usize,
    mu: Index,
    nu: Index,
    coefficient: &DMatrix<C64>,
) -> Result<ItoElement> {
    let want = match (mu, nu) {
        (Index::Dot, Index::Dot) => (k_dim, k_dim),
        (Index::Dot, Index::Plus) => (k_dim, 1),
        (Index::Minus, Index::Dot) => (1, k_dim),
        (Index::Minus, Index::Plus) => (1, 1),
        _ => {
            return Err(Error::InvalidIndex(format!(
                "malformed index pair ({mu:?},{nu:?}); mu must be − or •, nu must be + or •"
            )))
        }
    };
    if coefficient.shape() != want {
        return Err(Error::DimensionMismatch(format!(
            "coefficient {:?} does not fit block ({mu:?},{nu:?}) at k_dim {k_dim}; want {want:?}",
            coefficient.shape()
        )));
    }
    let mut e = ItoElement::zero(k_dim);
    match (mu, nu) {
        (Index::Dot, Index::Dot) => e.block = coefficient.clone(),
        (Index::Dot, Index::Plus) => e.col = coefficient.column(0).into_owned(),
        (Index::Minus, Index::Dot) => e.row = coefficient.row(0).into_owned(),
        _ => e.scalar = coefficient[(0, 0)],
    }
    Ok(e)
}

/// Mean value `l(a) = a_+^−`, i.e. `<dΛ(a)> = l(a) dt`.
pub fn mean(a: &ItoElement) -> C64 {
    a.scalar
}

#[derive(Debug, Clone)]
pub struct ItoAlgebraBasis {
    elements: Vec<ItoElement>,
    labels: Vec<String>,
}

impl ItoAlgebraBasis {
    pub fn new(elements: Vec<ItoElement>, labels: Vec<String>) -> Result<Self> {
        if elements.is_empty() {
            return Err(Error::InvalidArgument("empty basis".into()));
        }
        if labels.len() != elements.len() {
            return Err(Error::InvalidArgument(format!(
                "{} labels for {} elements",
                labels.len(),
                elements.len()
            )));
        }
        let k = elements[0].k_dim();
        if let Some(bad) = elements.iter().position(|e| e.k_dim() != k) {
            return Err(Error::DimensionMismatch(format!(
                "element {bad} has k_dim {}, expected {k}",
                elements[bad].k_dim()
            )));
        }
        Ok(ItoAlgebraBasis { elements, labels })
    }

    /// Labels default to `e0, e1, ...`.
    pub fn unlabeled(elements: Vec<ItoElement>) -> Result<Self> {
        let labels = (0..elements.len()).map(|i| format!("e{i}")).collect();
        Self::new(elements, labels)
    }

    pub fn elements(&self) -> &[ItoElement] {
        &self.elements
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn k_dim(&self) -> usize {
        self.elements[0].k_dim()
    }
}

/// Least-squares expansion of a target in the span of the basis.
#[derive(Debug, Clone, PartialEq)]
pub struct Expansion {
    pub coefficients: Vec<C64>,
    /// `|A c − v| / |v|` (0 when `v = 0`).
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct ClosureReport {
    pub closed: bool,
    pub tol: f64,
    pub worst_residual: f64,
    pub contains_death: bool,
    pub death: Expansion,
    /// `products[i][j]` expands `e_i • e_j`.
    pub products: Vec<Vec<Expansion>>,
    /// `flats[i]` expands `e_i♭`.
    pub flats: Vec<Expansion>,
}

struct SpanSolver {
    svd: nalgebra::SVD<C64, nalgebra::Dyn, nalgebra::Dyn>,
    matrix: DMatrix<C64>,
    eps: f64,
}

impl SpanSolver {
    fn new(basis: &ItoAlgebraBasis) -> Self {
        let cols: Vec<DVector<C64>> = basis.elements.iter().map(ItoElement::to_vector).collect();
        let matrix = DMatrix::from_columns(&cols);
        let svd = matrix.clone().svd(true, true);
        let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
        SpanSolver { svd, matrix, eps: 1e-12 * smax.max(f64::MIN_POSITIVE) }
    }

    fn expand(&self, target: &ItoElement) -> Expansion {
        let v = target.to_vector();
        let coeffs = self
            .svd
            .solve(&v, self.eps)
            .expect("SVD was computed with U and V^T");
        let vnorm = v.norm();
        let residual = if vnorm == 0.0 { 0.0 } else { (&self.matrix * &coeffs - &v).norm() / vnorm };
        Expansion { coefficients: coeffs.iter().copied().collect(), residual }
    }
}

/// Checks that the span of `basis` is closed under `♭` and the HP product.
pub fn check_closure(basis: &ItoAlgebraBasis, tol: f64) -> ClosureReport {
    let solver = SpanSolver::new(basis);
    let els = basis.elements();
    let products: Vec<Vec<Expansion>> = els
        .iter()
        .map(|a| {
            els.iter()
                .map(|b| solver.expand(&hp_product(a, b).expect("basis shares k_dim")))
                .collect()
        })
        .collect();
    let flats: Vec<Expansion> = els.iter().map(|a| solver.expand(&flat(a))).collect();
    let death = solver.expand(&death_element(basis.k_dim()));
    let worst_residual = products
        .iter()
        .flatten()
        .chain(flats.iter())
        .map(|e| e.residual)
        .fold(0.0, f64::max);
    ClosureReport {
        closed: worst_residual <= tol,
        tol,
        worst_residual,
        contains_death: death.residual <= tol,
        death,
        products,
        flats,
    }
}

/// The four canonical `k_dim = 1` differentials in the order
/// `dΛ` (exchange), `dΛ_−` (annihilation), `dΛ⁺` (creation), `dt`.
pub fn canonical_unit_elements() -> [(&'static str, ItoElement); 4] {
    let one = DMatrix::from_element(1, 1, ONE);
    [
        ("dN", canonical_element(1, Index::Dot, Index::Dot, &one).unwrap()),
        ("dA", canonical_element(1, Index::Minus, Index::Dot, &one).unwrap()),
        ("dA+", canonical_element(1, Index::Dot, Index::Plus, &one).unwrap()),
        ("dt", canonical_element(1, Index::Minus, Index::Plus, &one).unwrap()),
    ]
}
