//! Germ matrices of quantum stochastic generators, their dissipation form,
//! conditional complete positivity and the Kolmogorov / pseudo-Hilbert
//! dilation.
//!
//! Channel indices `m, n` are 0-based here (`0..d`).

mod dilation;
mod dissipation;
mod maps;
mod model;

pub use dilation::{kolmogorov_dilation, pseudo_adjoint, verify_dilation, DilationData, DilationResidual};
pub use dissipation::{
    check_ccp, dissipation_matrix, germ_form_matrix, structural_factor, CcpVerdict, DissipationMatrix,
    DEFAULT_PSD_TOL,
};
pub use maps::{MatrixMap, Term};
pub use model::{random_matrix, StructuralModel, HERMITIAN_TOL};

use crate::error::{Error, Result};
use crate::linalg::{self, Mat, ONE};

/// Row index `μ ∈ {−, 0..d}` of a germ entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Upper {
    Minus,
    Channel(usize),
}

/// Column index `ν ∈ {+, 0..d}` of a germ entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Lower {
    Plus,
    Channel(usize),
}

/// The matrix of maps `γ_ν^μ`:
///
/// ```text
///   [ γ     γ_•  ]      γ = γ_+^−,  γ_n = γ_n^−
///   [ γ^•   γ_•^• ]     γ^m = γ_+^m, γ_n^m
/// ```
#[derive(Debug, Clone)]
pub struct Germ {
    n: usize,
    d: usize,
    gamma: MatrixMap,
    gamma_up: Vec<MatrixMap>,
    gamma_dn: Vec<MatrixMap>,
    gamma_blk: Vec<Vec<MatrixMap>>,
    drift: Option<Mat>,
}

impl Germ {
    pub fn new(
        n: usize,
        gamma: MatrixMap,
        gamma_up: Vec<MatrixMap>,
        gamma_dn: Vec<MatrixMap>,
        gamma_blk: Vec<Vec<MatrixMap>>,
    ) -> Result<Self> {
        let d = gamma_up.len();
        let dims_ok = gamma.dim() == n
            && gamma_dn.len() == d
            && gamma_blk.len() == d
            && gamma_blk.iter().all(|r| r.len() == d)
            && gamma_up.iter().chain(&gamma_dn).chain(gamma_blk.iter().flatten()).all(|m| m.dim() == n);
        if !dims_ok {
            return Err(Error::DimensionMismatch("germ maps disagree on n or d".into()));
        }
        Ok(Germ { n, d, gamma, gamma_up, gamma_dn, gamma_blk, drift: None })
    }

    /// The germ with every `λ_ν^μ = 0`, i.e. `γ_n^m(B) = B δ_n^m` and all other maps zero.
    pub fn trivial(n: usize, d: usize) -> Self {
        let blk = (0..d)
            .map(|m| (0..d).map(|k| if k == m { MatrixMap::identity(n) } else { MatrixMap::zero(n) }).collect())
            .collect();
        Germ {
            n,
            d,
            gamma: MatrixMap::zero(n),
            gamma_up: vec![MatrixMap::zero(n); d],
            gamma_dn: vec![MatrixMap::zero(n); d],
            gamma_blk: blk,
            drift: Some(linalg::zeros(n, n)),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// The drift `K` when the germ came from a structural model.
    pub fn drift(&self) -> Option<&Mat> {
        self.drift.as_ref()
    }

    pub fn with_drift(mut self, k: Mat) -> Self {
        self.drift = Some(k);
        self
    }

    pub fn gamma_map(&self) -> &MatrixMap {
        &self.gamma
    }

    pub fn gamma(&self, b: &Mat) -> Mat {
        self.gamma.apply(b)
    }

    pub fn gamma_up(&self, m: usize, b: &Mat) -> Mat {
        self.gamma_up[m].apply(b)
    }

    pub fn gamma_dn(&self, n: usize, b: &Mat) -> Mat {
        self.gamma_dn[n].apply(b)
    }

    pub fn gamma_blk(&self, m: usize, n: usize, b: &Mat) -> Mat {
        self.gamma_blk[m][n].apply(b)
    }

    pub fn entry(&self, mu: Upper, nu: Lower, b: &Mat) -> Result<Mat> {
        self.check_index(mu, nu)?;
        Ok(match (mu, nu) {
            (Upper::Minus, Lower::Plus) => self.gamma(b),
            (Upper::Minus, Lower::Channel(n)) => self.gamma_dn(n, b),
            (Upper::Channel(m), Lower::Plus) => self.gamma_up(m, b),
            (Upper::Channel(m), Lower::Channel(n)) => self.gamma_blk(m, n, b),
        })
    }

    fn check_index(&self, mu: Upper, nu: Lower) -> Result<()> {
        let bad = matches!(mu, Upper::Channel(m) if m >= self.d) || matches!(nu, Lower::Channel(n) if n >= self.d);
        if bad {
            Err(Error::InvalidIndex(format!("({mu:?},{nu:?}) out of range for d = {}", self.d)))
        } else {
            Ok(())
        }
    }

    /// The full `(1+d)n` square block matrix `𝜸(B)`.
    pub fn block_matrix(&self, b: &Mat) -> Mat {
        let n = self.n;
        let mut out = linalg::zeros((1 + self.d) * n, (1 + self.d) * n);
        out.view_mut((0, 0), (n, n)).copy_from(&self.gamma(b));
        for m in 0..self.d {
            out.view_mut((0, (1 + m) * n), (n, n)).copy_from(&self.gamma_dn(m, b));
            out.view_mut(((1 + m) * n, 0), (n, n)).copy_from(&self.gamma_up(m, b));
            for k in 0..self.d {
                out.view_mut(((1 + m) * n, (1 + k) * n), (n, n)).copy_from(&self.gamma_blk(m, k, b));
            }
        }
        out
    }

    /// Largest violation of the ♭-symmetry relations at `B`.
    pub fn flat_symmetry_defect(&self, b: &Mat) -> f64 {
        let bd = b.adjoint();
        let mut worst = linalg::max_abs_diff(&self.gamma(&bd), &self.gamma(b).adjoint());
        for m in 0..self.d {
            worst = worst.max(linalg::max_abs_diff(&self.gamma_up(m, &bd), &self.gamma_dn(m, b).adjoint()));
            for k in 0..self.d {
                worst = worst.max(linalg::max_abs_diff(&self.gamma_blk(m, k, &bd), &self.gamma_blk(k, m, b).adjoint()));
            }
        }
        worst
    }

    /// Copy with `γ_n^m` replaced by `−γ_n^m`.
    pub fn with_negated_exchange(&self) -> Self {
        let mut g = self.clone();
        for row in &mut g.gamma_blk {
            for map in row {
                *map = map.clone().scaled(-ONE);
            }
        }
        g
    }
}

/// Germ of the structural model:
///
/// ```text
/// γ_n^m(B) = Σ_i L_m^{i†} B L_n^i
/// γ^m(B)   = Σ_i L_m^{i†} B L^i − K_m† B
/// γ_n(B)   = Σ_i L^{i†} B L_n^i − B K_n
/// γ(B)     = Σ_i L^{i†} B L^i − K† B − B K
/// ```
pub fn build_germ(model: &StructuralModel) -> Result<Germ> {
    model.validate()?;
    let n = model.n;
    let k = model.drift();
    let kn = model.kn_resolved();

    let kraus_sum = |lefts: &[&Mat], rights: &[&Mat]| {
        lefts.iter().zip(rights).fold(MatrixMap::zero(n), |acc, (a, b)| {
            acc.plus(&MatrixMap::sandwich(a.adjoint(), (*b).clone()))
        })
    };
    let l: Vec<&Mat> = model.l.iter().collect();
    let ln: Vec<Vec<&Mat>> = model.ln.iter().map(|r| r.iter().collect()).collect();

    let gamma = kraus_sum(&l, &l)
        .plus(&MatrixMap::left_mul(k.adjoint()).scaled(-ONE))
        .plus(&MatrixMap::right_mul(k.clone()).scaled(-ONE));
    let gamma_up = (0..model.d)
        .map(|m| kraus_sum(&ln[m], &l).plus(&MatrixMap::left_mul(kn[m].adjoint()).scaled(-ONE)))
        .collect();
    let gamma_dn = (0..model.d)
        .map(|m| kraus_sum(&l, &ln[m]).plus(&MatrixMap::right_mul(kn[m].clone()).scaled(-ONE)))
        .collect();
    let gamma_blk = (0..model.d)
        .map(|m| (0..model.d).map(|q| kraus_sum(&ln[m], &ln[q])).collect())
        .collect();
    Ok(Germ::new(n, gamma, gamma_up, gamma_dn, gamma_blk)?.with_drift(k))
}

/// `λ_ν^μ(B) = γ_ν^μ(B) − B δ_ν^μ`.
pub fn apply_lambda(germ: &Germ, mu: Upper, nu: Lower, b: &Mat) -> Result<Mat> {
    let g = germ.entry(mu, nu, b)?;
    Ok(match (mu, nu) {
        (Upper::Channel(m), Lower::Channel(n)) if m == n => g - b,
        _ => g,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, max_abs_diff, qubit};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_b(rng: &mut ChaCha8Rng, n: usize) -> Mat {
        random_matrix(rng, n)
    }

    #[test]
    fn identity_channel_germ() {
        let g = build_germ(&StructuralModel::identity_channel(2, 1)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let b = random_b(&mut rng, 2);
        assert!(linalg::max_abs(&g.gamma(&b)) == 0.0);
        assert!(max_abs_diff(&g.gamma_blk(0, 0, &b), &b) < 1e-15);
        assert!(linalg::max_abs(&g.gamma_up(0, &b)) < 1e-15);
        assert!(linalg::max_abs(&g.gamma_dn(0, &b)) < 1e-15);
        let lam = apply_lambda(&g, Upper::Channel(0), Lower::Channel(0), &b).unwrap();
        assert!(linalg::max_abs(&lam) < 1e-15);
    }

    #[test]
    fn damped_qubit_gamma_by_hand() {
        let g = build_germ(&StructuralModel::damped_qubit()).unwrap();
        let (sp, sm, pe) = (qubit::sigma_plus(), qubit::sigma_minus(), qubit::excited_projector());
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let b = random_b(&mut rng, 2);
        let expect = &sp * &b * &sm - (&pe * &b + &b * &pe) * c(0.5, 0.0);
        assert!(max_abs_diff(&g.gamma(&b), &expect) < 1e-14);
        assert!(max_abs_diff(&g.gamma(&pe), &(-&pe)) < 1e-15);
        // λ_+^−(I) = D = 0 under the martingale defaults
        let d = apply_lambda(&g, Upper::Minus, Lower::Plus, &linalg::identity(2)).unwrap();
        assert!(linalg::max_abs(&d) < 1e-15);
        // L_1^1 = I makes the exchange term trivial; γ^1(B) = Bσ₋ − σ₋B
        let lam = apply_lambda(&g, Upper::Channel(0), Lower::Channel(0), &b).unwrap();
        assert!(linalg::max_abs(&lam) < 1e-15);
        assert!(max_abs_diff(&g.gamma_up(0, &b), &(&b * &sm - &sm * &b)) < 1e-15);
    }

    #[test]
    fn lambda_plus_minus_at_identity_is_dissipation() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let model = StructuralModel::random(&mut rng, 3, 2, 2, true);
        let g = build_germ(&model).unwrap();
        let d = apply_lambda(&g, Upper::Minus, Lower::Plus, &linalg::identity(3)).unwrap();
        assert!(max_abs_diff(&d, model.dissipation.as_ref().unwrap()) < 1e-12);
    }

    #[test]
    fn flat_symmetry_on_random_models() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..10 {
            let n = 2 + (rng.random::<u32>() % 2) as usize;
            let model = StructuralModel::random(&mut rng, n, 2, 2, false);
            let g = build_germ(&model).unwrap();
            for _ in 0..5 {
                let b = random_b(&mut rng, n);
                let scale = 1.0 + linalg::max_abs(&g.block_matrix(&b));
                assert!(g.flat_symmetry_defect(&b) <= 1e-12 * scale);
            }
        }
    }

    #[test]
    fn exchange_block_is_completely_positive_at_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let model = StructuralModel::random(&mut rng, 3, 2, 2, false);
        let g = build_germ(&model).unwrap();
        let id = linalg::identity(3);
        let mut blk = linalg::zeros(6, 6);
        for m in 0..2 {
            for k in 0..2 {
                blk.view_mut((3 * m, 3 * k), (3, 3)).copy_from(&g.gamma_blk(m, k, &id));
            }
        }
        let (vals, _) = linalg::hermitian_eigh(&blk);
        assert!(vals[0] >= -1e-12 * vals.last().unwrap());
    }

    #[test]
    fn bad_lambda_index() {
        let g = build_germ(&StructuralModel::damped_qubit()).unwrap();
        let b = linalg::identity(2);
        assert!(matches!(
            apply_lambda(&g, Upper::Channel(1), Lower::Plus, &b),
            Err(Error::InvalidIndex(_))
        ));
    }

    #[test]
    fn build_rejects_invalid_models() {
        let mut m = StructuralModel::damped_qubit();
        m.h = qubit::sigma_minus();
        assert!(build_germ(&m).is_err());
    }

    use rand::Rng;
}
