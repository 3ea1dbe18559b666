//! JSON run configuration. Complex numbers are `[re, im]` (a bare real is
//! accepted on input), matrices are row-major nested arrays.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::germ::{build_germ, Germ, MatrixMap, StructuralModel};
use crate::ito_algebra::{ItoAlgebraBasis, ItoElement};
use crate::linalg::{self, Mat, Vector, C64};
use crate::unraveling::{Channel, Observable, TimeGrid, TrajectoryModel};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Complex(pub f64, pub f64);

impl From<Complex> for C64 {
    fn from(z: Complex) -> C64 {
        C64::new(z.0, z.1)
    }
}

impl From<C64> for Complex {
    fn from(z: C64) -> Complex {
        Complex(z.re, z.im)
    }
}

impl Serialize for Complex {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        [self.0, self.1].serialize(s)
    }
}

impl<'de> Deserialize<'de> for Complex {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Real(f64),
            Pair([f64; 2]),
        }
        Ok(match Repr::deserialize(d)? {
            Repr::Real(x) => Complex(x, 0.0),
            Repr::Pair([re, im]) => Complex(re, im),
        })
    }
}

pub type MatrixSpec = Vec<Vec<Complex>>;

pub fn to_matrix(spec: &MatrixSpec, what: &str) -> Result<Mat> {
    let rows = spec.len();
    let cols = spec.first().map_or(0, Vec::len);
    if spec.iter().any(|r| r.len() != cols) {
        return Err(Error::Config(format!("{what}: ragged matrix rows")));
    }
    let m = Mat::from_fn(rows, cols, |i, j| spec[i][j].into());
    if !linalg::all_finite(&m) {
        return Err(Error::Config(format!("{what}: non-finite entry")));
    }
    Ok(m)
}

fn square(spec: &MatrixSpec, n: usize, what: &str) -> Result<Mat> {
    let m = to_matrix(spec, what)?;
    if m.nrows() != n || m.ncols() != n {
        return Err(Error::Config(format!("{what}: expected {n}x{n}, got {}x{}", m.nrows(), m.ncols())));
    }
    Ok(m)
}

pub fn from_matrix(m: &Mat) -> MatrixSpec {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)].into()).collect()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermSpec {
    pub coef: Complex,
    pub left: MatrixSpec,
    pub right: MatrixSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ChannelSpec {
    Diffusive { l: MatrixSpec },
    Jump { j: MatrixSpec },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ItoElementSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub scalar: Complex,
    pub row: Vec<Complex>,
    pub col: Vec<Complex>,
    pub block: MatrixSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    Structural {
        n: usize,
        d: usize,
        kraus_mult: usize,
        h: MatrixSpec,
        l: Vec<MatrixSpec>,
        ln: Vec<Vec<MatrixSpec>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        kn: Option<Vec<MatrixSpec>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        dissipation: Option<MatrixSpec>,
    },
    Trajectory {
        n: usize,
        k: MatrixSpec,
        channels: Vec<ChannelSpec>,
    },
    /// Germ given directly by its maps, each a list of sandwich terms.
    Germ {
        n: usize,
        d: usize,
        gamma: Vec<TermSpec>,
        gamma_up: Vec<Vec<TermSpec>>,
        gamma_dn: Vec<Vec<TermSpec>>,
        gamma_blk: Vec<Vec<Vec<TermSpec>>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        drift: Option<MatrixSpec>,
    },
    Ito {
        k_dim: usize,
        elements: Vec<ItoElementSpec>,
    },
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tmax: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ntraj: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psi0: Option<Vec<Complex>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iters: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservableSpec {
    pub name: String,
    pub matrix: MatrixSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    #[serde(default)]
    pub format: Format,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSpec,
    #[serde(default)]
    pub simulation: SimulationSpec,
    #[serde(default)]
    pub observables: Vec<ObservableSpec>,
    #[serde(default)]
    pub output: OutputSpec,
}

fn map_of(terms: &[TermSpec], n: usize, what: &str) -> Result<MatrixMap> {
    let mut m = MatrixMap::zero(n);
    for (i, t) in terms.iter().enumerate() {
        let left = square(&t.left, n, &format!("{what} term {i} left"))?;
        let right = square(&t.right, n, &format!("{what} term {i} right"))?;
        m.push(t.coef.into(), left, right);
    }
    Ok(m)
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let sim = &self.simulation;
        if let Some(dt) = sim.dt {
            if !(dt.is_finite() && dt > 0.0) {
                return Err(Error::Config(format!("simulation.dt must be positive, got {dt}")));
            }
            if let Some(tmax) = sim.tmax {
                if !(tmax >= dt) {
                    return Err(Error::Config(format!("simulation.tmax = {tmax} must be >= dt = {dt}")));
                }
            }
        }
        if let Some(tmax) = sim.tmax {
            if !(tmax.is_finite() && tmax > 0.0) {
                return Err(Error::Config(format!("simulation.tmax must be positive, got {tmax}")));
            }
        }
        if sim.steps == Some(0) || sim.ntraj == Some(0) {
            return Err(Error::Config("simulation.steps and simulation.ntraj must be >= 1".into()));
        }
        if let Some(n) = self.system_dim() {
            for o in &self.observables {
                square(&o.matrix, n, &format!("observable `{}`", o.name))?;
            }
            if let Some(psi) = &sim.psi0 {
                if psi.len() != n {
                    return Err(Error::Config(format!("psi0 has length {}, expected {n}", psi.len())));
                }
            }
        }
        match &self.model {
            ModelSpec::Ito { .. } => self.ito_basis().map(|_| ()),
            ModelSpec::Trajectory { .. } => self.trajectory_model().map(|_| ()),
            _ => self.germ().map(|_| ()),
        }
    }

    pub fn system_dim(&self) -> Option<usize> {
        match &self.model {
            ModelSpec::Structural { n, .. } | ModelSpec::Trajectory { n, .. } | ModelSpec::Germ { n, .. } => Some(*n),
            ModelSpec::Ito { .. } => None,
        }
    }

    pub fn structural_model(&self) -> Result<StructuralModel> {
        match &self.model {
            ModelSpec::Structural { n, d, kraus_mult, h, l, ln, kn, dissipation } => {
                let n = *n;
                let sq = |m: &MatrixSpec, w: &str| square(m, n, w);
                let model = StructuralModel {
                    n,
                    d: *d,
                    kraus_mult: *kraus_mult,
                    h: sq(h, "h")?,
                    l: l.iter().enumerate().map(|(i, m)| sq(m, &format!("l[{i}]"))).collect::<Result<_>>()?,
                    ln: ln
                        .iter()
                        .enumerate()
                        .map(|(a, row)| {
                            row.iter().enumerate().map(|(i, m)| sq(m, &format!("ln[{a}][{i}]"))).collect::<Result<_>>()
                        })
                        .collect::<Result<_>>()?,
                    kn: kn
                        .as_ref()
                        .map(|v| v.iter().enumerate().map(|(i, m)| sq(m, &format!("kn[{i}]"))).collect::<Result<_>>())
                        .transpose()?,
                    dissipation: dissipation.as_ref().map(|m| sq(m, "dissipation")).transpose()?,
                };
                model.validate()?;
                Ok(model)
            }
            ModelSpec::Trajectory { .. } => self.trajectory_model()?.to_structural_model(),
            _ => Err(Error::Config("model section is not a structural or trajectory model".into())),
        }
    }

    pub fn trajectory_model(&self) -> Result<TrajectoryModel> {
        let ModelSpec::Trajectory { n, k, channels } = &self.model else {
            return Err(Error::Config("this command needs a `trajectory` model".into()));
        };
        let chans = channels
            .iter()
            .enumerate()
            .map(|(i, ch)| {
                Ok(match ch {
                    ChannelSpec::Diffusive { l } => Channel::Diffusive { l: square(l, *n, &format!("channels[{i}].l"))? },
                    ChannelSpec::Jump { j } => Channel::Jump { j: square(j, *n, &format!("channels[{i}].j"))? },
                })
            })
            .collect::<Result<Vec<_>>>()?;
        TrajectoryModel::new(square(k, *n, "k")?, chans)
    }

    pub fn germ(&self) -> Result<Germ> {
        match &self.model {
            ModelSpec::Germ { n, d, gamma, gamma_up, gamma_dn, gamma_blk, drift } => {
                let n = *n;
                let arity = |len: usize, what: &str| {
                    if len != *d {
                        Err(Error::Config(format!("{what} has {len} entries, expected d = {d}")))
                    } else {
                        Ok(())
                    }
                };
                arity(gamma_up.len(), "gamma_up")?;
                arity(gamma_dn.len(), "gamma_dn")?;
                arity(gamma_blk.len(), "gamma_blk")?;
                for row in gamma_blk {
                    arity(row.len(), "gamma_blk row")?;
                }
                let maps = |v: &[Vec<TermSpec>], w: &str| {
                    v.iter().enumerate().map(|(i, t)| map_of(t, n, &format!("{w}[{i}]"))).collect::<Result<Vec<_>>>()
                };
                let blk = gamma_blk
                    .iter()
                    .enumerate()
                    .map(|(m, row)| maps(row, &format!("gamma_blk[{m}]")))
                    .collect::<Result<Vec<_>>>()?;
                let germ =
                    Germ::new(n, map_of(gamma, n, "gamma")?, maps(gamma_up, "gamma_up")?, maps(gamma_dn, "gamma_dn")?, blk)?;
                Ok(match drift {
                    Some(k) => germ.with_drift(square(k, n, "drift")?),
                    None => germ,
                })
            }
            ModelSpec::Ito { .. } => Err(Error::Config("an `ito` model has no germ".into())),
            _ => build_germ(&self.structural_model()?),
        }
    }

    pub fn ito_basis(&self) -> Result<ItoAlgebraBasis> {
        let ModelSpec::Ito { k_dim, elements } = &self.model else {
            return Err(Error::Config("model section is not an `ito` basis".into()));
        };
        let k = *k_dim;
        let mut els = Vec::with_capacity(elements.len());
        let mut labels = Vec::with_capacity(elements.len());
        for (i, e) in elements.iter().enumerate() {
            if e.row.len() != k || e.col.len() != k {
                return Err(Error::Config(format!("element {i}: row/col must have length k_dim = {k}")));
            }
            let row = nalgebra::RowDVector::from_iterator(k, e.row.iter().map(|&z| C64::from(z)));
            let col = nalgebra::DVector::from_iterator(k, e.col.iter().map(|&z| C64::from(z)));
            els.push(ItoElement::from_blocks(e.scalar.into(), row, col, square(&e.block, k, &format!("element {i} block"))?)?);
            labels.push(e.label.clone().unwrap_or_else(|| format!("e{i}")));
        }
        ItoAlgebraBasis::new(els, labels)
    }

    /// `dt` and `tmax` from the simulation section; `steps` overrides `dt`.
    pub fn grid(&self) -> Result<TimeGrid> {
        let sim = &self.simulation;
        let tmax = sim.tmax.ok_or_else(|| Error::Config("simulation.tmax is required".into()))?;
        match (sim.steps, sim.dt) {
            (Some(steps), _) => TimeGrid::from_steps(tmax, steps),
            (None, Some(dt)) => TimeGrid::new(dt, tmax),
            (None, None) => Err(Error::Config("simulation.dt or simulation.steps is required".into())),
        }
        .map_err(|e| Error::Config(e.to_string()))
    }

    pub fn psi0(&self) -> Result<Vector> {
        let psi = self.simulation.psi0.as_ref().ok_or_else(|| Error::Config("simulation.psi0 is required".into()))?;
        let v = Vector::from_iterator(psi.len(), psi.iter().map(|&z| C64::from(z)));
        let norm = v.norm();
        if (norm - 1.0).abs() > 1e-8 {
            return Err(Error::Config(format!("psi0 must be a unit vector, norm is {norm}")));
        }
        Ok(v)
    }

    pub fn observables(&self) -> Result<Vec<Observable>> {
        let n = self.system_dim().unwrap_or(0);
        self.observables
            .iter()
            .map(|o| Ok(Observable::new(o.name.clone(), square(&o.matrix, n, &format!("observable `{}`", o.name))?)))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DAMPED: &str = r#"{
        "model": {"type": "trajectory", "n": 2, "k": [[0.5, 0], [0, 0]],
                  "channels": [{"kind": "diffusive", "l": [[0, 0], [1, 0]]}]},
        "simulation": {"dt": 0.01, "tmax": 1.0, "ntraj": 10, "seed": 18446744073709551615, "psi0": [1, [0, 0]]},
        "observables": [{"name": "pe", "matrix": [[1, 0], [0, 0]]}]
    }"#;

    #[test]
    fn round_trip_is_identity() {
        let cfg = RunConfig::parse(DAMPED).unwrap();
        let again = RunConfig::parse(&cfg.to_json()).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(cfg.simulation.seed, Some(u64::MAX));
        assert_eq!(cfg.grid().unwrap().steps(), 100);
    }

    #[test]
    fn builds_the_damped_qubit() {
        let cfg = RunConfig::parse(DAMPED).unwrap();
        let model = cfg.trajectory_model().unwrap();
        let reference = crate::unraveling::damped_qubit::diffusive();
        assert_eq!(model, reference);
        let germ = cfg.germ().unwrap();
        let b = linalg::qubit::excited_projector();
        assert!(linalg::max_abs_diff(&germ.gamma(&b), &(-&b)) < 1e-15);
    }

    #[test]
    fn malformed_configs_are_rejected() {
        for bad in [
            r#"{"model": {"type": "trajectory", "n": 2, "k": [[1, 0]], "channels": []}}"#,
            r#"{"model": {"type": "trajectory", "n": 2, "k": [[1, 0], [0, 1]], "channels": []}, "simulation": {"dt": -1}}"#,
            r#"{"model": {"type": "trajectory", "n": 2, "k": [[1, 0], [0, 1]], "channels": []}, "simulation": {"dt": 0.5, "tmax": 0.1}}"#,
            r#"{"model": {"type": "nonsense"}}"#,
            r#"{"model": {"type": "trajectory", "n": 1, "k": [[0]], "channels": []}, "extra": 1}"#,
            r#"{"model": {"type": "structural", "n": 2, "d": 1, "kraus_mult": 1, "h": [[0, 1], [0, 0]],
                          "l": [[[0, 0], [1, 0]]], "ln": [[[[1, 0], [0, 1]]]]}}"#,
            "not json",
        ] {
            assert!(matches!(RunConfig::parse(bad), Err(_)), "accepted: {bad}");
        }
    }

    #[test]
    fn general_germ_section() {
        let text = r#"{"model": {"type": "germ", "n": 1, "d": 1,
            "gamma": [], "gamma_up": [[]], "gamma_dn": [[]],
            "gamma_blk": [[[{"coef": [-1, 0], "left": [[1]], "right": [[1]]}]]]}}"#;
        let cfg = RunConfig::parse(text).unwrap();
        let g = cfg.germ().unwrap();
        assert_eq!(g.gamma_blk(0, 0, &linalg::identity(1))[(0, 0)], C64::new(-1.0, 0.0));
        assert!(g.drift().is_none());
        assert_eq!(RunConfig::parse(&cfg.to_json()).unwrap(), cfg);
    }
}
