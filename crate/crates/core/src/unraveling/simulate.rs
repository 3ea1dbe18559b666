use rand::Rng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Exp1, StandardNormal};

use super::grid::TimeGrid;
use super::model::{Kind, TrajectoryModel};
use super::rng::StreamId;
use crate::error::{Error, Result};
use crate::linalg::{self, c, Mat, Vector, C64, ONE, ZERO};

#[derive(Debug, Clone, PartialEq)]
pub enum NoiseRecord {
    /// `ΔQ_j^c` indexed `[c][j]`.
    Wiener(Vec<Vec<f64>>),
    /// Arrival times per channel.
    Jumps(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub grid: Vec<f64>,
    /// `V(t_j)`, with `V(0) = I`.
    pub propagators: Vec<Mat>,
    pub noise: NoiseRecord,
    pub seed_info: Option<StreamId>,
}

fn finite(x: &Mat) -> bool {
    linalg::all_finite(x)
}

fn require_kind(model: &TrajectoryModel, kind: Kind) -> Result<()> {
    match model.kind() {
        Some(k) if k != kind => Err(Error::InvalidModel(format!("model has {k:?} channels, expected {kind:?}"))),
        _ => Ok(()),
    }
}

enum Increments<'a> {
    Sampled { rngs: Vec<ChaCha20Rng>, sqrt_dt: f64 },
    Given(&'a [Vec<f64>]),
}

impl Increments<'_> {
    fn fill(&mut self, step: usize, out: &mut [f64]) {
        match self {
            Increments::Sampled { rngs, sqrt_dt } => {
                for (o, r) in out.iter_mut().zip(rngs.iter_mut()) {
                    let z: f64 = r.sample(StandardNormal);
                    *o = *sqrt_dt * z;
                }
            }
            Increments::Given(dq) => {
                for (o, row) in out.iter_mut().zip(dq.iter()) {
                    *o = row[step];
                }
            }
        }
    }
}

/// Euler–Maruyama for `x ← (I − KΔt)x + Σ_c ΔQ_c L_c x`. `x` is either
/// `V` or a single column `Vψ₀`.
fn run_diffusive(
    model: &TrajectoryModel,
    grid: &TimeGrid,
    mut source: Increments<'_>,
    mut x: Mat,
    trajectory: Option<usize>,
    mut record: impl FnMut(usize, &Mat, &[f64]),
) -> Result<()> {
    let n = model.n();
    let a = linalg::identity(n) - model.k() * c(grid.dt(), 0.0);
    let ls = model.l_ops();
    let mut dq = vec![0.0; ls.len()];
    let mut next = x.clone();
    record(0, &x, &dq);
    for j in 0..grid.steps() {
        source.fill(j, &mut dq);
        next.gemm(ONE, &a, &x, ZERO);
        for (l, &q) in ls.iter().zip(&dq) {
            next.gemm(c(q, 0.0), l, &x, ONE);
        }
        std::mem::swap(&mut x, &mut next);
        if !finite(&x) {
            return Err(Error::NonFinite { trajectory, step: j + 1 });
        }
        record(j + 1, &x, &dq);
    }
    Ok(())
}

/// Unit-rate Poisson arrivals on `(0, tmax]`.
pub(crate) fn sample_arrivals(rng: &mut ChaCha20Rng, tmax: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut t = 0.0;
    loop {
        let e: f64 = rng.sample(Exp1);
        t += e;
        if t > tmax {
            return out;
        }
        out.push(t);
    }
}

fn merged_events(jump_times: &[Vec<f64>]) -> Vec<(f64, usize)> {
    let mut ev: Vec<(f64, usize)> =
        jump_times.iter().enumerate().flat_map(|(ch, ts)| ts.iter().map(move |&t| (t, ch))).collect();
    ev.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    ev
}

/// Piecewise-deterministic flow: `exp(−(K + Σ L_c)τ)` between arrivals,
/// `x ← J_c x` at an arrival of channel `c`.
fn run_jump(
    model: &TrajectoryModel,
    grid: &TimeGrid,
    jump_times: &[Vec<f64>],
    mut x: Mat,
    trajectory: Option<usize>,
    mut record: impl FnMut(usize, &Mat),
) -> Result<()> {
    let gen = model.l_ops().iter().fold(model.k().clone(), |acc, l| acc + l);
    let flow = |tau: f64| linalg::expm(&(&gen * c(-tau, 0.0)));
    let full_step = flow(grid.dt());
    let js: Vec<Mat> = model.l_ops().iter().map(|l| l + linalg::identity(model.n())).collect();
    let events = merged_events(jump_times);
    let mut next = x.clone();
    let mut ptr = 0;
    record(0, &x);
    for j in 0..grid.steps() {
        let (t0, t1) = (grid.time(j), grid.time(j + 1));
        if ptr < events.len() && events[ptr].0 <= t1 {
            let mut at = t0;
            while ptr < events.len() && events[ptr].0 <= t1 {
                let (s, ch) = events[ptr];
                next.gemm(ONE, &flow(s - at), &x, ZERO);
                x.gemm(ONE, &js[ch], &next, ZERO);
                at = s;
                ptr += 1;
            }
            next.gemm(ONE, &flow(t1 - at), &x, ZERO);
        } else {
            next.gemm(ONE, &full_step, &x, ZERO);
        }
        std::mem::swap(&mut x, &mut next);
        if !finite(&x) {
            return Err(Error::NonFinite { trajectory, step: j + 1 });
        }
        record(j + 1, &x);
    }
    Ok(())
}

fn sampled(model: &TrajectoryModel, grid: &TimeGrid, stream: StreamId) -> Increments<'static> {
    Increments::Sampled {
        rngs: (0..model.channels().len()).map(|ch| stream.channel(ch)).collect(),
        sqrt_dt: grid.dt().sqrt(),
    }
}

fn sample_jump_times(model: &TrajectoryModel, grid: &TimeGrid, stream: StreamId) -> Vec<Vec<f64>> {
    (0..model.channels().len()).map(|ch| sample_arrivals(&mut stream.channel(ch), grid.tmax())).collect()
}

fn diffusive_trajectory(
    model: &TrajectoryModel,
    grid: &TimeGrid,
    source: Increments<'_>,
    seed_info: Option<StreamId>,
) -> Result<Trajectory> {
    require_kind(model, Kind::Diffusive)?;
    let mut props = Vec::with_capacity(grid.steps() + 1);
    let mut noise = vec![Vec::with_capacity(grid.steps()); model.channels().len()];
    let traj = seed_info.map(|s| s.trajectory as usize);
    run_diffusive(model, grid, source, linalg::identity(model.n()), traj, |j, v, dq| {
        props.push(v.clone());
        if j > 0 {
            for (rec, &q) in noise.iter_mut().zip(dq) {
                rec.push(q);
            }
        }
    })?;
    Ok(Trajectory { grid: grid.points(), propagators: props, noise: NoiseRecord::Wiener(noise), seed_info })
}

pub fn simulate_diffusive(model: &TrajectoryModel, grid: &TimeGrid, stream: StreamId) -> Result<Trajectory> {
    diffusive_trajectory(model, grid, sampled(model, grid, stream), Some(stream))
}

/// Same scheme driven by prescribed increments `dq[c][j]`.
pub fn simulate_diffusive_with_increments(
    model: &TrajectoryModel,
    grid: &TimeGrid,
    dq: &[Vec<f64>],
) -> Result<Trajectory> {
    if dq.len() != model.channels().len() || dq.iter().any(|row| row.len() != grid.steps()) {
        return Err(Error::DimensionMismatch(format!(
            "need {} increment rows of length {}",
            model.channels().len(),
            grid.steps()
        )));
    }
    diffusive_trajectory(model, grid, Increments::Given(dq), None)
}

fn jump_trajectory(
    model: &TrajectoryModel,
    grid: &TimeGrid,
    jump_times: Vec<Vec<f64>>,
    seed_info: Option<StreamId>,
) -> Result<Trajectory> {
    require_kind(model, Kind::Jump)?;
    let mut props = Vec::with_capacity(grid.steps() + 1);
    let traj = seed_info.map(|s| s.trajectory as usize);
    run_jump(model, grid, &jump_times, linalg::identity(model.n()), traj, |_, v| props.push(v.clone()))?;
    Ok(Trajectory { grid: grid.points(), propagators: props, noise: NoiseRecord::Jumps(jump_times), seed_info })
}

pub fn simulate_jump(model: &TrajectoryModel, grid: &TimeGrid, stream: StreamId) -> Result<Trajectory> {
    jump_trajectory(model, grid, sample_jump_times(model, grid, stream), Some(stream))
}

/// Jump flow with prescribed arrival times per channel.
pub fn simulate_jump_with_times(model: &TrajectoryModel, grid: &TimeGrid, jump_times: &[Vec<f64>]) -> Result<Trajectory> {
    if jump_times.len() != model.channels().len() {
        return Err(Error::DimensionMismatch(format!("need {} rows of jump times", model.channels().len())));
    }
    if jump_times.iter().flatten().any(|&t| !(t > 0.0 && t <= grid.tmax())) {
        return Err(Error::InvalidArgument("jump times must lie in (0, tmax]".into()));
    }
    jump_trajectory(model, grid, jump_times.to_vec(), None)
}

/// Dispatches on the model kind and propagates `Vψ₀` only, consuming
/// randomness exactly like the full-propagator simulators.
pub(crate) fn propagate_state(
    model: &TrajectoryModel,
    grid: &TimeGrid,
    stream: StreamId,
    psi0: &Vector,
    record: &mut dyn FnMut(usize, &Mat),
) -> Result<()> {
    let x = Mat::from_column_slice(model.n(), 1, psi0.as_slice());
    let traj = Some(stream.trajectory as usize);
    match model.kind() {
        Some(Kind::Jump) => run_jump(model, grid, &sample_jump_times(model, grid, stream), x, traj, record),
        _ => run_diffusive(model, grid, sampled(model, grid, stream), x, traj, |j, v, _| record(j, v)),
    }
}

pub(crate) fn check_psi0(psi0: &Vector, n: usize) -> Result<()> {
    if psi0.len() != n {
        return Err(Error::DimensionMismatch(format!("psi0 has length {}, expected {n}", psi0.len())));
    }
    let norm = psi0.norm();
    if !norm.is_finite() || (norm - 1.0).abs() > 1e-8 {
        return Err(Error::InvalidArgument(format!("psi0 must be a unit vector, norm is {norm}")));
    }
    Ok(())
}

/// `⟨ψ₀|V(t_j)† B V(t_j)|ψ₀⟩` per grid point.
pub fn flow_value(traj: &Trajectory, b: &Mat, psi0: &Vector) -> Result<Vec<C64>> {
    let n = traj.propagators.first().map_or(0, |v| v.nrows());
    linalg::ensure_square(b, n, "observable")?;
    check_psi0(psi0, n)?;
    Ok(traj
        .propagators
        .iter()
        .map(|v| {
            let psi = v * psi0;
            psi.dotc(&(b * &psi))
        })
        .collect())
}

/// `‖Vψ₀‖²` per grid point.
pub fn weights(traj: &Trajectory, psi0: &Vector) -> Vec<f64> {
    traj.propagators.iter().map(|v| (v * psi0).norm_squared()).collect()
}

#[cfg(test)]
mod tests {
    use super::super::model::{damped_qubit, Channel};
    use super::*;
    use crate::linalg::{max_abs, max_abs_diff, qubit};

    #[test]
    fn noise_free_diffusive_matches_exponential() {
        let h = qubit::sigma_z();
        let model = TrajectoryModel::new(&h * linalg::I, vec![Channel::Diffusive { l: linalg::zeros(2, 2) }]).unwrap();
        let grid = TimeGrid::new(1e-4, 1.0).unwrap();
        let tr = simulate_diffusive(&model, &grid, StreamId::new(1, 0)).unwrap();
        let exact = linalg::expm(&(&h * c(0.0, -1.0)));
        assert!(max_abs_diff(tr.propagators.last().unwrap(), &exact) <= 1e-3);
        assert_eq!(tr.propagators[0], linalg::identity(2));
    }

    #[test]
    fn trivial_jump_model_is_identity() {
        let model = TrajectoryModel::new(linalg::zeros(3, 3), vec![Channel::Jump { j: linalg::identity(3) }]).unwrap();
        let grid = TimeGrid::new(0.01, 3.0).unwrap();
        for k in 0..5 {
            let tr = simulate_jump(&model, &grid, StreamId::new(9, k)).unwrap();
            assert!(tr.propagators.iter().all(|v| max_abs_diff(v, &linalg::identity(3)) == 0.0));
        }
    }

    #[test]
    fn recorded_increments_replay_the_path() {
        let model = damped_qubit::diffusive();
        let grid = TimeGrid::new(0.01, 1.0).unwrap();
        let tr = simulate_diffusive(&model, &grid, StreamId::new(3, 4)).unwrap();
        let NoiseRecord::Wiener(dq) = &tr.noise else { panic!("expected Wiener record") };
        assert_eq!(dq[0].len(), grid.steps());
        let replay = simulate_diffusive_with_increments(&model, &grid, dq).unwrap();
        assert_eq!(replay.propagators, tr.propagators);
    }

    #[test]
    fn jump_path_matches_hand_composition() {
        let model = damped_qubit::jump();
        let grid = TimeGrid::new(0.1, 1.0).unwrap();
        let times = vec![vec![0.25, 0.7]];
        let tr = simulate_jump_with_times(&model, &grid, &times).unwrap();
        let gen = model.k() + model.l_ops()[0].clone();
        let flow = |t: f64| linalg::expm(&(&gen * c(-t, 0.0)));
        let j = model.l_ops()[0].clone() + linalg::identity(2);
        let expect = flow(0.3) * &j * flow(0.45) * &j * flow(0.25);
        assert!(max_abs_diff(tr.propagators.last().unwrap(), &expect) < 1e-12);
        let before = flow(0.2);
        assert!(max_abs_diff(&tr.propagators[2], &before) < 1e-12);
    }

    #[test]
    fn unitary_jump_paths_preserve_norm() {
        let h = qubit::sigma_z() * c(0.5, 0.0);
        let j = qubit::sigma_x();
        let l = &j - linalg::identity(2);
        let k = &h * linalg::I + (l.adjoint() * &l) * c(0.5, 0.0);
        let model = TrajectoryModel::new(k, vec![Channel::Jump { j }]).unwrap();
        let grid = TimeGrid::new(1e-2, 3.0).unwrap();
        let psi0 = qubit::excited();
        for k in 0..10 {
            let tr = simulate_jump(&model, &grid, StreamId::new(5, k)).unwrap();
            assert!(weights(&tr, &psi0).iter().all(|w| (w - 1.0).abs() < 1e-12));
        }
    }

    #[test]
    fn flow_value_of_identity_is_weight() {
        let model = damped_qubit::diffusive();
        let grid = TimeGrid::new(0.01, 0.5).unwrap();
        let tr = simulate_diffusive(&model, &grid, StreamId::new(2, 0)).unwrap();
        let psi0 = qubit::excited();
        let fv = flow_value(&tr, &linalg::identity(2), &psi0).unwrap();
        for (f, w) in fv.iter().zip(weights(&tr, &psi0)) {
            assert!((f.re - w).abs() < 1e-14 && f.im.abs() < 1e-14);
        }
        assert!(flow_value(&tr, &linalg::identity(3), &psi0).is_err());
        let unnormalized = &psi0 * c(2.0, 0.0);
        assert!(flow_value(&tr, &linalg::identity(2), &unnormalized).is_err());
    }

    #[test]
    fn kind_mismatch_and_overflow_are_reported() {
        let grid = TimeGrid::new(0.1, 1.0).unwrap();
        assert!(simulate_jump(&damped_qubit::diffusive(), &grid, StreamId::new(0, 0)).is_err());
        let k = linalg::identity(1) * c(-1e306, 0.0);
        let model = TrajectoryModel::new(k, vec![Channel::Diffusive { l: linalg::zeros(1, 1) }]).unwrap();
        match simulate_diffusive(&model, &grid, StreamId::new(0, 7)) {
            Err(Error::NonFinite { trajectory: Some(7), step }) => assert!(step >= 1),
            other => panic!("expected overflow abort, got {other:?}"),
        }
    }

    #[test]
    fn state_propagation_matches_full_propagator() {
        let psi0 = qubit::excited();
        let grid = TimeGrid::new(0.01, 1.0).unwrap();
        for model in [damped_qubit::diffusive(), damped_qubit::jump()] {
            let stream = StreamId::new(11, 3);
            let tr = match model.kind().unwrap() {
                Kind::Diffusive => simulate_diffusive(&model, &grid, stream),
                Kind::Jump => simulate_jump(&model, &grid, stream),
            }
            .unwrap();
            let mut states = Vec::new();
            propagate_state(&model, &grid, stream, &psi0, &mut |_, x| states.push(x.clone())).unwrap();
            for (v, x) in tr.propagators.iter().zip(&states) {
                let psi = v * &psi0;
                assert!(max_abs(&(Mat::from_column_slice(2, 1, psi.as_slice()) - x)) < 1e-13);
            }
        }
    }
}
