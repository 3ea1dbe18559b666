use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{self, c, Mat, C64};

/// Operators of a Lindblad-structured generator.
///
/// `l[i]` are the `d'` operators `L^i`, `ln[n][i]` the `d x d'` array
/// `L_n^i`. `kn` and `dissipation` are optional and default to the
/// martingale choice `K_n = Σ_i L^{i†} L_n^i`, `D = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct StructuralModel {
    pub n: usize,
    pub d: usize,
    pub kraus_mult: usize,
    pub h: Mat,
    pub l: Vec<Mat>,
    pub ln: Vec<Vec<Mat>>,
    pub kn: Option<Vec<Mat>>,
    pub dissipation: Option<Mat>,
}

pub const HERMITIAN_TOL: f64 = 1e-12;

impl StructuralModel {
    pub fn validate(&self) -> Result<()> {
        let n = self.n;
        linalg::ensure_square(&self.h, n, "H")?;
        if linalg::hermiticity_defect(&self.h) > HERMITIAN_TOL {
            return Err(Error::InvalidModel(format!(
                "H is not Hermitian (defect {:.3e})",
                linalg::hermiticity_defect(&self.h)
            )));
        }
        if self.l.len() != self.kraus_mult {
            return Err(Error::DimensionMismatch(format!(
                "{} operators L^i for kraus_mult {}",
                self.l.len(),
                self.kraus_mult
            )));
        }
        for (i, li) in self.l.iter().enumerate() {
            linalg::ensure_square(li, n, &format!("L^{i}"))?;
        }
        if self.ln.len() != self.d {
            return Err(Error::DimensionMismatch(format!("{} rows of L_n^i for d = {}", self.ln.len(), self.d)));
        }
        for (m, row) in self.ln.iter().enumerate() {
            if row.len() != self.kraus_mult {
                return Err(Error::DimensionMismatch(format!(
                    "L_{m}^i has {} entries, expected {}",
                    row.len(),
                    self.kraus_mult
                )));
            }
            for (i, op) in row.iter().enumerate() {
                linalg::ensure_square(op, n, &format!("L_{m}^{i}"))?;
            }
        }
        if let Some(kn) = &self.kn {
            if kn.len() != self.d {
                return Err(Error::DimensionMismatch(format!("{} operators K_n for d = {}", kn.len(), self.d)));
            }
            for (m, k) in kn.iter().enumerate() {
                linalg::ensure_square(k, n, &format!("K_{m}"))?;
            }
        }
        if let Some(dm) = &self.dissipation {
            linalg::ensure_square(dm, n, "D")?;
            if linalg::hermiticity_defect(dm) > HERMITIAN_TOL {
                return Err(Error::InvalidModel("D is not Hermitian".into()));
            }
            let (vals, _) = linalg::hermitian_eigh(dm);
            let top = vals.last().copied().unwrap_or(0.0);
            if top > HERMITIAN_TOL * linalg::max_abs(dm).max(1.0) {
                return Err(Error::InvalidModel(format!("D must be <= 0, largest eigenvalue {top:.3e}")));
            }
        }
        Ok(())
    }

    /// `Σ_i L^{i†} L^i`.
    pub fn phi_identity(&self) -> Mat {
        self.l.iter().fold(linalg::zeros(self.n, self.n), |acc, li| acc + li.adjoint() * li)
    }

    pub fn dissipation_or_zero(&self) -> Mat {
        self.dissipation.clone().unwrap_or_else(|| linalg::zeros(self.n, self.n))
    }

    /// `K = iH + ½(Σ_i L^{i†}L^i − D)`.
    pub fn drift(&self) -> Mat {
        &self.h * linalg::I + (self.phi_identity() - self.dissipation_or_zero()) * c(0.5, 0.0)
    }

    pub fn kn_resolved(&self) -> Vec<Mat> {
        match &self.kn {
            Some(kn) => kn.clone(),
            None => (0..self.d)
                .map(|m| {
                    self.l
                        .iter()
                        .zip(&self.ln[m])
                        .fold(linalg::zeros(self.n, self.n), |acc, (li, lmi)| acc + li.adjoint() * lmi)
                })
                .collect(),
        }
    }

    /// `H = 0`, no Kraus operators contribute to the drift and `L_n^i = δ_n^i I`.
    pub fn identity_channel(n: usize, d: usize) -> Self {
        StructuralModel {
            n,
            d,
            kraus_mult: d,
            h: linalg::zeros(n, n),
            l: vec![linalg::zeros(n, n); d],
            ln: (0..d)
                .map(|m| (0..d).map(|i| if i == m { linalg::identity(n) } else { linalg::zeros(n, n) }).collect())
                .collect(),
            kn: None,
            dissipation: None,
        }
    }

    /// Qubit decaying at unit rate: `L¹ = σ₋`, `L_1^1 = I`, `H = 0`.
    pub fn damped_qubit() -> Self {
        StructuralModel {
            n: 2,
            d: 1,
            kraus_mult: 1,
            h: linalg::zeros(2, 2),
            l: vec![linalg::qubit::sigma_minus()],
            ln: vec![vec![linalg::identity(2)]],
            kn: None,
            dissipation: None,
        }
    }

    /// Random model with Gaussian entries. With `submartingale` a random
    /// `D = −A†A` is included.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, n: usize, d: usize, kraus_mult: usize, submartingale: bool) -> Self {
        let h = random_matrix(rng, n);
        let h = (&h + h.adjoint()) * c(0.5, 0.0);
        let l = (0..kraus_mult).map(|_| random_matrix(rng, n)).collect();
        let ln = (0..d).map(|_| (0..kraus_mult).map(|_| random_matrix(rng, n)).collect()).collect();
        let dissipation = submartingale.then(|| {
            let a = random_matrix(rng, n) * c(0.5, 0.0);
            -(a.adjoint() * a)
        });
        StructuralModel { n, d, kraus_mult, h, l, ln, kn: None, dissipation }
    }
}

pub fn random_matrix<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Mat {
    Mat::from_fn(n, n, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re, im) * (0.5f64).sqrt()
    })
}
