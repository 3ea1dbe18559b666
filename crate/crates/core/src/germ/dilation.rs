//! Numerical Kolmogorov decomposition of `Δ` and the pseudo-Hilbert
//! dilation `𝐋♭ ȷ(B) 𝐋 = 𝜸(B)` on `E = H ⊕ H° ⊕ H` with metric
//!
//! ```text
//!       [ 0  0  I ]            [ −D  0  I ]
//!   G = [ 0  I  0 ]    G⁻¹ =   [  0  I  0 ]
//!       [ I  0  D ]            [  I  0  0 ]
//! ```

use super::dissipation::dissipation_matrix;
use super::{Germ, MatrixMap};
use crate::error::{Error, Result};
use crate::linalg::{self, Mat};

const LSQ_RESIDUAL_GATE: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct DilationData {
    n: usize,
    d: usize,
    rank: usize,
    /// `k(E_pq)` in row-major unit order, each `r x n`.
    k_units: Vec<Mat>,
    /// `k_m(E_pq)` indexed `[m][pq]`.
    kdot_units: Vec<Vec<Mat>>,
    /// `j(E_pq)`, each `r x r`.
    j_units: Vec<Mat>,
    pub l_circ: Vec<Mat>,
    pub l_minus: Vec<Mat>,
    pub dissipation: Mat,
    gamma: MatrixMap,
    /// Largest least-squares residual met while solving for `j`.
    pub lsq_residual: f64,
    pub eigenvalues: Vec<f64>,
}

fn put(target: &mut Mat, row: usize, col: usize, block: &Mat) {
    target.view_mut((row, col), block.shape()).copy_from(block);
}

fn combine(units: &[Mat], b: &Mat) -> Mat {
    let n = b.nrows();
    let (r, c) = units[0].shape();
    let mut out = linalg::zeros(r, c);
    for p in 0..n {
        for q in 0..n {
            let z = b[(p, q)];
            if z != linalg::ZERO {
                out += &units[p * n + q] * z;
            }
        }
    }
    out
}

/// Factorizes `Δ = C†C` over the matrix-unit test set `{E_pq} ∪ {I}`,
/// keeps eigenvalues above `cutoff · max_eig` and rebuilds
/// `(H°, j, k, l, L°, L⁻, D)`.
pub fn kolmogorov_dilation(germ: &Germ, cutoff: f64) -> Result<DilationData> {
    let (n, d) = (germ.n(), germ.d());
    let ops = linalg::matrix_unit_basis_with_identity(n);
    let delta = dissipation_matrix(germ, &ops)?;
    let (vals, vecs) = linalg::hermitian_eigh(&delta.matrix);
    let top = vals.last().copied().unwrap_or(0.0);
    let min = vals.first().copied().unwrap_or(0.0);
    if min < -super::DEFAULT_PSD_TOL * top.abs().max(min.abs()) {
        return Err(Error::DilationFailure(format!(
            "dissipation form is not positive (min eigenvalue {min:.3e}, max {top:.3e})"
        )));
    }
    let keep: Vec<usize> = (0..vals.len()).filter(|&i| vals[i] > cutoff * top && vals[i] > 0.0).collect();
    let r = keep.len();
    let dim = delta.dim();

    // C = Λ^{1/2} U†, rows are the kept eigen-directions.
    let mut c = linalg::zeros(r, dim);
    for (row, &i) in keep.iter().enumerate() {
        let s = vals[i].sqrt();
        for col in 0..dim {
            c[(row, col)] = vecs[(col, i)].conj() * s;
        }
    }
    let col_block = |k: usize, alpha: usize| c.view((0, delta.slot(k, alpha, 0)), (r, n)).into_owned();
    let k_units: Vec<Mat> = (0..n * n).map(|t| col_block(t, 0)).collect();
    let kdot_units: Vec<Vec<Mat>> = (0..d).map(|m| (0..n * n).map(|t| col_block(t, 1 + m)).collect()).collect();

    // j(B) Y = T with Y = C; since C C† = Λ the solution is T C† Λ⁻¹.
    let inv_lambda = Mat::from_diagonal(&nalgebra::DVector::from_iterator(
        r,
        keep.iter().map(|&i| linalg::c(1.0 / vals[i], 0.0)),
    ));
    let c_pinv = c.adjoint() * inv_lambda;
    let scale = linalg::max_abs(&c).max(1.0);
    let mut j_units = Vec::with_capacity(n * n);
    let mut lsq_residual: f64 = 0.0;
    for p in 0..n {
        for q in 0..n {
            let b = linalg::matrix_unit(n, p, q);
            let kb = combine(&k_units, &b);
            let mut target = linalg::zeros(r, dim);
            for (t, z) in ops.iter().enumerate() {
                let bz = &b * z;
                put(&mut target, 0, delta.slot(t, 0, 0), &(combine(&k_units, &bz) - &kb * z));
                for (m, units) in kdot_units.iter().enumerate() {
                    put(&mut target, 0, delta.slot(t, 1 + m, 0), &combine(units, &bz));
                }
            }
            let j = &target * &c_pinv;
            let res = linalg::max_abs(&(&j * &c - &target));
            lsq_residual = lsq_residual.max(res);
            if res > LSQ_RESIDUAL_GATE * scale {
                return Err(Error::DilationFailure(format!(
                    "least-squares residual {res:.3e} for j(E_{p}{q}) exceeds {:.1e}",
                    LSQ_RESIDUAL_GATE * scale
                )));
            }
            j_units.push(j);
        }
    }

    let id = linalg::identity(n);
    let l_circ = kdot_units.iter().map(|u| combine(u, &id)).collect();
    let l_minus = (0..d).map(|m| germ.gamma_dn(m, &id)).collect();
    Ok(DilationData {
        n,
        d,
        rank: r,
        k_units,
        kdot_units,
        j_units,
        l_circ,
        l_minus,
        dissipation: germ.gamma(&id),
        gamma: germ.gamma_map().clone(),
        lsq_residual,
        eigenvalues: vals,
    })
}

impl DilationData {
    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// The representation `j(B)` on `H°`.
    pub fn j(&self, b: &Mat) -> Mat {
        if self.rank == 0 {
            return linalg::zeros(0, 0);
        }
        combine(&self.j_units, b)
    }

    /// The derivation `k(B): H → H°`.
    pub fn k(&self, b: &Mat) -> Mat {
        combine(&self.k_units, b)
    }

    pub fn k_dot(&self, m: usize, b: &Mat) -> Mat {
        combine(&self.kdot_units[m], b)
    }

    /// `k*(B) = k(B†)†`.
    pub fn k_star(&self, b: &Mat) -> Mat {
        self.k(&b.adjoint()).adjoint()
    }

    /// `l(B) = γ(B) − D B`.
    pub fn l(&self, b: &Mat) -> Mat {
        self.gamma.apply(b) - &self.dissipation * b
    }

    fn e_dim(&self) -> usize {
        2 * self.n + self.rank
    }

    pub fn metric(&self) -> Mat {
        let (n, r) = (self.n, self.rank);
        let mut g = linalg::zeros(self.e_dim(), self.e_dim());
        put(&mut g, 0, n + r, &linalg::identity(n));
        put(&mut g, n, n, &linalg::identity(r));
        put(&mut g, n + r, 0, &linalg::identity(n));
        put(&mut g, n + r, n + r, &self.dissipation);
        g
    }

    pub fn metric_inverse(&self) -> Mat {
        let (n, r) = (self.n, self.rank);
        let mut g = linalg::zeros(self.e_dim(), self.e_dim());
        put(&mut g, 0, 0, &(-&self.dissipation));
        put(&mut g, 0, n + r, &linalg::identity(n));
        put(&mut g, n, n, &linalg::identity(r));
        put(&mut g, n + r, 0, &linalg::identity(n));
        g
    }

    /// `ȷ(B) = [[B, k*(B), l(B)], [0, j(B), k(B)], [0, 0, B]]`.
    pub fn jmath(&self, b: &Mat) -> Mat {
        let (n, r) = (self.n, self.rank);
        let mut out = linalg::zeros(self.e_dim(), self.e_dim());
        put(&mut out, 0, 0, b);
        put(&mut out, 0, n, &self.k_star(b));
        put(&mut out, 0, n + r, &self.l(b));
        put(&mut out, n, n, &self.j(b));
        put(&mut out, n, n + r, &self.k(b));
        put(&mut out, n + r, n + r, b);
        out
    }

    /// `𝐋: H ⊕ H^• → E` with base column `(0, 0, I)` and channel columns `(L_m⁻, L_m°, 0)`.
    pub fn lop(&self) -> Mat {
        let (n, r) = (self.n, self.rank);
        let mut out = linalg::zeros(self.e_dim(), (1 + self.d) * n);
        put(&mut out, n + r, 0, &linalg::identity(n));
        for m in 0..self.d {
            put(&mut out, 0, (1 + m) * n, &self.l_minus[m]);
            put(&mut out, n, (1 + m) * n, &self.l_circ[m]);
        }
        out
    }

    /// `𝐋♭ = 𝐋† G`.
    pub fn lop_flat(&self) -> Mat {
        self.lop().adjoint() * self.metric()
    }

    /// Indefinite inner product `(ξ|ξ) = ξ† G ξ`.
    pub fn indefinite_norm(&self, xi: &linalg::Vector) -> f64 {
        (xi.adjoint() * self.metric() * xi)[(0, 0)].re
    }

    /// Largest defect of the unital †-representation identities of `j` at `(x, b)`.
    pub fn representation_defect(&self, x: &Mat, b: &Mat) -> f64 {
        let id = linalg::identity(self.n);
        let jid = linalg::max_abs_diff(&self.j(&id), &linalg::identity(self.rank));
        let star = linalg::max_abs_diff(&self.j(&b.adjoint()), &self.j(b).adjoint());
        let mult = linalg::max_abs_diff(&self.j(&(x * b)), &(self.j(x) * self.j(b)));
        let sq = linalg::max_abs_diff(&self.j(&(b.adjoint() * b)), &(self.j(b).adjoint() * self.j(b)));
        jid.max(star).max(mult).max(sq)
    }

    /// Defect of `k(B†B) = j(B)†k(B) + k(B†)B`.
    pub fn derivation_defect(&self, b: &Mat) -> f64 {
        let bd = b.adjoint();
        linalg::max_abs_diff(&self.k(&(&bd * b)), &(self.j(b).adjoint() * self.k(b) + self.k(&bd) * b))
    }

    /// Defect of `k*(B†)k(B) = l(B†B) − B†l(B) − l(B†)B`.
    pub fn coboundary_defect(&self, b: &Mat) -> f64 {
        let bd = b.adjoint();
        let lhs = self.k_star(&bd) * self.k(b);
        let rhs = self.l(&(&bd * b)) - &bd * self.l(b) - self.l(&bd) * b;
        linalg::max_abs_diff(&lhs, &rhs)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DilationResidual {
    /// `|𝐋♭ ȷ(B) 𝐋 − 𝜸(B)|`.
    pub germ: f64,
    /// `|ȷ(B†) − G⁻¹ ȷ(B)† G|`.
    pub flat: f64,
}

impl DilationResidual {
    pub fn max(&self) -> f64 {
        self.germ.max(self.flat)
    }
}

pub fn verify_dilation(dd: &DilationData, germ: &Germ, b: &Mat) -> DilationResidual {
    let lhs = dd.lop_flat() * dd.jmath(b) * dd.lop();
    let germ_res = linalg::max_abs_diff(&lhs, &germ.block_matrix(b));
    let flat = linalg::max_abs_diff(
        &dd.jmath(&b.adjoint()),
        &(dd.metric_inverse() * dd.jmath(b).adjoint() * dd.metric()),
    );
    DilationResidual { germ: germ_res, flat }
}

/// `A♭ = G⁻¹ A† G`.
pub fn pseudo_adjoint(a: &Mat, g: &Mat) -> Result<Mat> {
    if g.nrows() != g.ncols() || a.nrows() != g.nrows() || a.ncols() != g.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "pseudo_adjoint: A is {}x{}, G is {}x{}",
            a.nrows(),
            a.ncols(),
            g.nrows(),
            g.ncols()
        )));
    }
    let ginv = g
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::SingularMetric("metric G is not invertible".into()))?;
    Ok(ginv * a.adjoint() * g)
}
