//! The dissipation form `Δ` and the conditional complete positivity test.

use super::{Germ, StructuralModel};
use crate::error::{Error, Result};
use crate::linalg::{self, Mat};

/// Relative PSD tolerance: `min_eig ≥ −tol · max|eig|`.
pub const DEFAULT_PSD_TOL: f64 = 1e-10;

/// `Δ` assembled over a list of test operators.
///
/// Rows and columns are indexed by `(k, α, p)` flattened as
/// `(k (1+d) + α) n + p`, where `α = 0` is the base component and
/// `α = 1 + m` is channel `m`.
#[derive(Debug, Clone)]
pub struct DissipationMatrix {
    pub n: usize,
    pub d: usize,
    pub test_ops: Vec<Mat>,
    pub matrix: Mat,
}

impl DissipationMatrix {
    pub fn slot(&self, k: usize, alpha: usize, p: usize) -> usize {
        slot(self.n, self.d, k, alpha, p)
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }
}

fn slot(n: usize, d: usize, k: usize, alpha: usize, p: usize) -> usize {
    (k * (1 + d) + alpha) * n + p
}

fn check_test_ops(germ: &Germ, test_ops: &[Mat]) -> Result<()> {
    if test_ops.is_empty() {
        return Err(Error::InvalidArgument("test_ops must be nonempty".into()));
    }
    for (k, x) in test_ops.iter().enumerate() {
        linalg::ensure_square(x, germ.n(), &format!("test operator {k}"))?;
    }
    Ok(())
}

fn put(target: &mut Mat, row: usize, col: usize, block: &Mat) {
    target.view_mut((row, col), block.shape()).copy_from(block);
}

pub fn dissipation_matrix(germ: &Germ, test_ops: &[Mat]) -> Result<DissipationMatrix> {
    check_test_ops(germ, test_ops)?;
    let (n, d) = (germ.n(), germ.d());
    let dim = test_ops.len() * (1 + d) * n;
    let dmat = germ.gamma(&linalg::identity(n));
    let mut m = linalg::zeros(dim, dim);

    for (k, x) in test_ops.iter().enumerate() {
        let xd = x.adjoint();
        let gamma_xd = germ.gamma(&xd);
        let gamma_dn_x: Vec<Mat> = (0..d).map(|q| germ.gamma_dn(q, x)).collect();
        for (l, z) in test_ops.iter().enumerate() {
            let xdz = &xd * z;
            let base = germ.gamma(&xdz) - &xd * germ.gamma(z) - &gamma_xd * z + &xd * &dmat * z;
            put(&mut m, slot(n, d, k, 0, 0), slot(n, d, l, 0, 0), &base);
            for q in 0..d {
                let down = germ.gamma_dn(q, &xdz) - &xd * germ.gamma_dn(q, z);
                put(&mut m, slot(n, d, k, 0, 0), slot(n, d, l, 1 + q, 0), &down);
                let up = germ.gamma_up(q, &xdz) - gamma_dn_x[q].adjoint() * z;
                put(&mut m, slot(n, d, k, 1 + q, 0), slot(n, d, l, 0, 0), &up);
                for r in 0..d {
                    put(&mut m, slot(n, d, k, 1 + q, 0), slot(n, d, l, 1 + r, 0), &germ.gamma_blk(q, r, &xdz));
                }
            }
        }
    }
    Ok(DissipationMatrix { n, d, test_ops: test_ops.to_vec(), matrix: m })
}

/// The block form `⟨η_k| 𝜸(X_k†X_l) η_l⟩` on the same index layout as `Δ`.
pub fn germ_form_matrix(germ: &Germ, test_ops: &[Mat]) -> Result<Mat> {
    check_test_ops(germ, test_ops)?;
    let (n, d) = (germ.n(), germ.d());
    let dim = test_ops.len() * (1 + d) * n;
    let mut m = linalg::zeros(dim, dim);
    let w = (1 + d) * n;
    for (k, x) in test_ops.iter().enumerate() {
        for (l, z) in test_ops.iter().enumerate() {
            let block = germ.block_matrix(&(x.adjoint() * z));
            put(&mut m, k * w, l * w, &block);
        }
    }
    Ok(m)
}

/// `C` with `Δ = C†C` for a structural model, built from the operators
/// directly: column block `(k, base)` is `j(X_k)L − L X_k`, column block
/// `(k, m)` is `j(X_k) L_m`, with `j(B) = diag_i(B)` and `L`, `L_m`
/// stacked over the Kraus index.
pub fn structural_factor(model: &StructuralModel, test_ops: &[Mat]) -> Result<Mat> {
    model.validate()?;
    let (n, d, dp) = (model.n, model.d, model.kraus_mult);
    let stack = |ops: &[Mat]| {
        let mut s = linalg::zeros(dp * n, n);
        for (i, op) in ops.iter().enumerate() {
            put(&mut s, i * n, 0, op);
        }
        s
    };
    let l = stack(&model.l);
    let lm: Vec<Mat> = model.ln.iter().map(|row| stack(row)).collect();
    let mut c = linalg::zeros(dp * n, test_ops.len() * (1 + d) * n);
    for (k, x) in test_ops.iter().enumerate() {
        linalg::ensure_square(x, n, "test operator")?;
        let jx = linalg::kron(&linalg::identity(dp), x);
        put(&mut c, 0, slot(n, d, k, 0, 0), &(&jx * &l - &l * x));
        for (m, lmm) in lm.iter().enumerate() {
            put(&mut c, 0, slot(n, d, k, 1 + m, 0), &(&jx * lmm));
        }
    }
    Ok(c)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CcpVerdict {
    pub is_ccp: bool,
    /// Smallest eigenvalue of `Δ`.
    pub min_eig: f64,
    /// Largest `|eigenvalue|` of `Δ`.
    pub scale: f64,
    /// Smallest eigenvalue of the germ form restricted to `Σ_k X_k η_k = 0`.
    pub constrained_min_eig: f64,
    pub constrained_is_ccp: bool,
    pub kernel_dim: usize,
    pub verdicts_agree: bool,
}

/// Runs both positivity tests: `Δ ≥ 0`, and positivity of the germ form
/// on the kernel of `(η_k, η_k^•) ↦ Σ_k X_k η_k`.
pub fn check_ccp(germ: &Germ, test_ops: &[Mat], tol: f64) -> Result<CcpVerdict> {
    let delta = dissipation_matrix(germ, test_ops)?;
    let (vals, _) = linalg::hermitian_eigh(&delta.matrix);
    let min_eig = vals.first().copied().unwrap_or(0.0);
    let scale = vals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let is_ccp = min_eig >= -tol * scale;

    let (n, d) = (germ.n(), germ.d());
    let dim = delta.dim();
    let mut constraint = linalg::zeros(n, dim);
    for (k, x) in test_ops.iter().enumerate() {
        put(&mut constraint, 0, slot(n, d, k, 0, 0), x);
    }
    // Right singular vectors of the constraint with vanishing singular value.
    let (svals, svecs) = linalg::hermitian_eigh(&(constraint.adjoint() * &constraint));
    let smax = svals.last().copied().unwrap_or(0.0).max(1.0);
    let kernel_cols: Vec<usize> = (0..dim).filter(|&i| svals[i] <= 1e-12 * smax).collect();
    let kernel = Mat::from_fn(dim, kernel_cols.len(), |r, c| svecs[(r, kernel_cols[c])]);
    let form = germ_form_matrix(germ, test_ops)?;
    let restricted = kernel.adjoint() * form * &kernel;
    let (rvals, _) = linalg::hermitian_eigh(&restricted);
    let constrained_min_eig = rvals.first().copied().unwrap_or(0.0);
    let rscale = rvals.iter().fold(scale, |a, v| a.max(v.abs()));
    let constrained_is_ccp = constrained_min_eig >= -tol * rscale;

    Ok(CcpVerdict {
        is_ccp,
        min_eig,
        scale,
        constrained_min_eig,
        constrained_is_ccp,
        kernel_dim: kernel_cols.len(),
        verdicts_agree: is_ccp == constrained_is_ccp,
    })
}
