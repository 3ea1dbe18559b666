use crate::error::{Error, Result};
use crate::germ::StructuralModel;
use crate::linalg::{self, c, Mat};

pub const FLAG_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Diffusive,
    Jump,
}

impl std::str::FromStr for Kind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "diffusive" => Ok(Kind::Diffusive),
            "jump" => Ok(Kind::Jump),
            other => Err(Error::InvalidArgument(format!("unknown unraveling kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Channel {
    Diffusive { l: Mat },
    /// `L = J − I`.
    Jump { j: Mat },
}

impl Channel {
    pub fn kind(&self) -> Kind {
        match self {
            Channel::Diffusive { .. } => Kind::Diffusive,
            Channel::Jump { .. } => Kind::Jump,
        }
    }

    pub fn l(&self) -> Mat {
        match self {
            Channel::Diffusive { l } => l.clone(),
            Channel::Jump { j } => j - linalg::identity(j.nrows()),
        }
    }
}

/// Linear propagator equation `dV = (−K dt + Σ_c L_c dX_c) V` with
/// `dX = dQ` (Wiener) or `dX = dN − dt` (unit-rate Poisson).
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryModel {
    n: usize,
    k: Mat,
    channels: Vec<Channel>,
}

impl TrajectoryModel {
    pub fn new(k: Mat, channels: Vec<Channel>) -> Result<Self> {
        let n = k.nrows();
        linalg::ensure_square(&k, n, "K")?;
        for (i, ch) in channels.iter().enumerate() {
            let m = match ch {
                Channel::Diffusive { l } => l,
                Channel::Jump { j } => j,
            };
            linalg::ensure_square(m, n, &format!("channel {i} operator"))?;
            if ch.kind() != channels[0].kind() {
                return Err(Error::InvalidModel("mixed diffusive and jump channels in one model".into()));
            }
        }
        if !linalg::all_finite(&k) || channels.iter().any(|ch| !linalg::all_finite(&ch.l())) {
            return Err(Error::InvalidModel("non-finite model entries".into()));
        }
        Ok(TrajectoryModel { n, k, channels })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> &Mat {
        &self.k
    }

    pub fn channels(&self) -> &[Channel] {
        &self.channels
    }

    /// `None` when there are no channels.
    pub fn kind(&self) -> Option<Kind> {
        self.channels.first().map(Channel::kind)
    }

    pub fn l_ops(&self) -> Vec<Mat> {
        self.channels.iter().map(Channel::l).collect()
    }

    /// `K + K† − Σ L†L`.
    pub fn normalization_defect(&self) -> Mat {
        let sum = self.l_ops().iter().fold(linalg::zeros(self.n, self.n), |acc, l| acc + l.adjoint() * l);
        &self.k + self.k.adjoint() - sum
    }

    pub fn is_filtering(&self) -> bool {
        linalg::max_abs(&self.normalization_defect()) <= FLAG_TOL
    }

    pub fn is_subfiltering(&self) -> bool {
        let (vals, _) = linalg::hermitian_eigh(&self.normalization_defect());
        vals.first().is_none_or(|&v| v >= -FLAG_TOL)
    }

    pub fn is_unitary_diffusive(&self) -> bool {
        self.is_filtering()
            && self.channels.iter().all(|ch| match ch {
                Channel::Diffusive { l } => linalg::max_abs(&(l + l.adjoint())) <= FLAG_TOL,
                Channel::Jump { .. } => false,
            })
    }

    pub fn is_unitary_jump(&self) -> bool {
        self.is_filtering()
            && self.channels.iter().all(|ch| match ch {
                Channel::Jump { j } => {
                    linalg::max_abs_diff(&(j.adjoint() * j), &linalg::identity(self.n)) <= FLAG_TOL
                }
                Channel::Diffusive { .. } => false,
            })
    }

    /// Germ data whose base map is the averaged generator
    /// `B ↦ Σ L†BL − K†B − BK`. Requires the sub-filtering condition.
    pub fn to_structural_model(&self) -> Result<StructuralModel> {
        let n = self.n;
        let d = self.channels.len();
        let l = self.l_ops();
        let h = (&self.k - self.k.adjoint()) * c(0.0, -0.5);
        let dissipation = -self.normalization_defect();
        let dissipation = (&dissipation + dissipation.adjoint()) * c(0.5, 0.0);
        let ln = (0..d)
            .map(|m| {
                (0..d)
                    .map(|i| match (&self.channels[m], i == m) {
                        (Channel::Jump { j }, true) => j.clone(),
                        (Channel::Diffusive { .. }, true) => linalg::identity(n),
                        _ => linalg::zeros(n, n),
                    })
                    .collect()
            })
            .collect();
        let model = StructuralModel { n, d, kraus_mult: d, h, l, ln, kn: None, dissipation: Some(dissipation) };
        model.validate()?;
        Ok(model)
    }
}

/// Reduces the single-channel quantum equation with coefficients
/// `(J, L_+, K^-, K)` to its classical cases: `J = I, L_+ = L = −K^-`
/// is diffusive, `J = I + L, L_+ = iL = K^-` is a jump unraveling.
pub fn from_general_model(j: &Mat, l_plus: &Mat, k_minus: &Mat, k: &Mat, kind: Kind) -> Result<TrajectoryModel> {
    let n = k.nrows();
    for (m, name) in [(j, "J"), (l_plus, "L_+"), (k_minus, "K^-"), (k, "K")] {
        linalg::ensure_square(m, n, name)?;
    }
    let id = linalg::identity(n);
    let check = |defect: f64, identity: &str| {
        if defect > FLAG_TOL {
            Err(Error::InconsistentGeneralModel(format!("{identity} violated (defect {defect:.3e})")))
        } else {
            Ok(())
        }
    };
    let channel = match kind {
        Kind::Diffusive => {
            check(linalg::max_abs_diff(j, &id), "J = I")?;
            check(linalg::max_abs(&(l_plus + k_minus)), "L_+ = −K^-")?;
            Channel::Diffusive { l: l_plus.clone() }
        }
        Kind::Jump => {
            let l = j - &id;
            let il = &l * linalg::I;
            check(linalg::max_abs_diff(l_plus, &il), "L_+ = i(J − I)")?;
            check(linalg::max_abs_diff(k_minus, &il), "K^- = i(J − I)")?;
            Channel::Jump { j: j.clone() }
        }
    };
    TrajectoryModel::new(k.clone(), vec![channel])
}

/// Damped qubit decaying at unit rate, in the basis `(|e⟩, |g⟩)`.
pub mod damped_qubit {
    use super::*;
    use crate::linalg::qubit;

    /// `L = σ₋`, `K = ½σ₊σ₋`.
    pub fn diffusive() -> TrajectoryModel {
        let k = qubit::excited_projector() * c(0.5, 0.0);
        TrajectoryModel::new(k, vec![Channel::Diffusive { l: qubit::sigma_minus() }]).unwrap()
    }

    /// `J = σ₋ + ½I`, so `L = σ₋ − ½I` and `K = ½σ₊σ₋ − ½σ₋ + ⅛I`.
    pub fn jump() -> TrajectoryModel {
        let id = linalg::identity(2);
        let j = qubit::sigma_minus() + &id * c(0.5, 0.0);
        let k = qubit::excited_projector() * c(0.5, 0.0) - qubit::sigma_minus() * c(0.5, 0.0) + id * c(0.125, 0.0);
        TrajectoryModel::new(k, vec![Channel::Jump { j }]).unwrap()
    }
}
