use rayon::prelude::*;

use super::grid::TimeGrid;
use super::model::TrajectoryModel;
use super::rng::StreamId;
use super::simulate::{check_psi0, propagate_state};
use crate::error::{Error, Result};
use crate::linalg::{self, Mat, Vector, C64};

pub const THREADS_ENV: &str = "QSDE_THREADS";
const CHUNK: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct Observable {
    pub name: String,
    pub matrix: Mat,
}

impl Observable {
    pub fn new(name: impl Into<String>, matrix: Mat) -> Self {
        Observable { name: name.into(), matrix }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObservableStats {
    pub name: String,
    pub mean: Vec<C64>,
    pub stderr: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleResult {
    pub grid: Vec<f64>,
    pub observables: Vec<ObservableStats>,
    pub norm_mean: Vec<f64>,
    pub norm_stderr: Vec<f64>,
    pub n_traj: usize,
    pub master_seed: u64,
}

/// Welford accumulators, one per grid point.
struct Running {
    mean: Vec<C64>,
    m2: Vec<f64>,
}

impl Running {
    fn new(len: usize) -> Self {
        Running { mean: vec![C64::new(0.0, 0.0); len], m2: vec![0.0; len] }
    }

    fn push(&mut self, count: usize, xs: &[C64]) {
        let k = count as f64;
        for ((m, s), &x) in self.mean.iter_mut().zip(self.m2.iter_mut()).zip(xs) {
            let delta = x - *m;
            *m += delta / k;
            *s += (delta.conj() * (x - *m)).re;
        }
    }

    fn stderr(&self, n: usize) -> Vec<f64> {
        if n < 2 {
            return vec![0.0; self.m2.len()];
        }
        let nf = n as f64;
        self.m2.iter().map(|s| (s.max(0.0) / (nf - 1.0)).sqrt() / nf.sqrt()).collect()
    }
}

/// Worker count from `QSDE_THREADS` (unset or 0 means all cores).
pub fn threads_from_env() -> Result<usize> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(0),
        Ok(s) => s
            .trim()
            .parse::<usize>()
            .map_err(|_| Error::InvalidArgument(format!("{THREADS_ENV} must be a non-negative integer, got `{s}`"))),
    }
}

struct PathRecord {
    norms: Vec<C64>,
    values: Vec<Vec<C64>>,
}

fn run_path(
    model: &TrajectoryModel,
    grid: &TimeGrid,
    stream: StreamId,
    psi0: &Vector,
    observables: &[Observable],
) -> Result<PathRecord> {
    let len = grid.steps() + 1;
    let mut norms = vec![C64::new(0.0, 0.0); len];
    let mut values = vec![vec![C64::new(0.0, 0.0); len]; observables.len()];
    propagate_state(model, grid, stream, psi0, &mut |j, x| {
        let psi = x.column(0);
        norms[j] = C64::new(psi.norm_squared(), 0.0);
        for (vals, obs) in values.iter_mut().zip(observables) {
            vals[j] = psi.dotc(&(&obs.matrix * psi));
        }
    })?;
    Ok(PathRecord { norms, values })
}

/// Runs trajectories `0..n_traj` with substreams of `master_seed`,
/// using `QSDE_THREADS` workers.
pub fn ensemble(
    model: &TrajectoryModel,
    observables: &[Observable],
    psi0: &Vector,
    n_traj: usize,
    grid: &TimeGrid,
    master_seed: u64,
) -> Result<EnsembleResult> {
    ensemble_with_threads(model, observables, psi0, n_traj, grid, master_seed, threads_from_env()?)
}

/// Chunks of trajectories are generated in parallel and folded into the
/// statistics strictly in index order, so the result does not depend on
/// `threads`.
pub fn ensemble_with_threads(
    model: &TrajectoryModel,
    observables: &[Observable],
    psi0: &Vector,
    n_traj: usize,
    grid: &TimeGrid,
    master_seed: u64,
    threads: usize,
) -> Result<EnsembleResult> {
    if n_traj < 1 {
        return Err(Error::InvalidArgument("n_traj must be at least 1".into()));
    }
    check_psi0(psi0, model.n())?;
    for obs in observables {
        linalg::ensure_square(&obs.matrix, model.n(), &format!("observable `{}`", obs.name))?;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot start worker pool: {e}")))?;

    let len = grid.steps() + 1;
    let mut norm = Running::new(len);
    let mut obs: Vec<Running> = observables.iter().map(|_| Running::new(len)).collect();
    let mut count = 0;
    for start in (0..n_traj).step_by(CHUNK) {
        let end = (start + CHUNK).min(n_traj);
        let chunk: Vec<Result<PathRecord>> = pool.install(|| {
            (start..end)
                .into_par_iter()
                .map(|k| run_path(model, grid, StreamId::new(master_seed, k as u64), psi0, observables))
                .collect()
        });
        for rec in chunk {
            let rec = rec?;
            count += 1;
            norm.push(count, &rec.norms);
            for (acc, vals) in obs.iter_mut().zip(&rec.values) {
                acc.push(count, vals);
            }
        }
    }

    Ok(EnsembleResult {
        grid: grid.points(),
        observables: observables
            .iter()
            .zip(&obs)
            .map(|(o, acc)| ObservableStats { name: o.name.clone(), mean: acc.mean.clone(), stderr: acc.stderr(count) })
            .collect(),
        norm_mean: norm.mean.iter().map(|z| z.re).collect(),
        norm_stderr: norm.stderr(count),
        n_traj,
        master_seed,
    })
}

#[cfg(test)]
mod tests {
    use super::super::model::damped_qubit;
    use super::super::simulate::{flow_value, simulate_diffusive, weights};
    use super::*;
    use crate::linalg::qubit;

    #[test]
    fn single_trajectory_statistics() {
        let model = damped_qubit::diffusive();
        let grid = TimeGrid::new(0.01, 0.5).unwrap();
        let psi0 = qubit::excited();
        let obs = [Observable::new("pe", qubit::excited_projector())];
        let res = ensemble_with_threads(&model, &obs, &psi0, 1, &grid, 42, 1).unwrap();
        let tr = simulate_diffusive(&model, &grid, StreamId::new(42, 0)).unwrap();
        let fv = flow_value(&tr, &obs[0].matrix, &psi0).unwrap();
        let w = weights(&tr, &psi0);
        for j in 0..fv.len() {
            assert!((res.observables[0].mean[j] - fv[j]).norm() < 1e-13);
            assert!((res.norm_mean[j] - w[j]).abs() < 1e-13);
        }
        assert!(res.norm_stderr.iter().chain(&res.observables[0].stderr).all(|&s| s == 0.0));
    }

    #[test]
    fn welford_matches_two_pass_statistics() {
        let xs = [C64::new(1.0, 2.0), C64::new(-0.5, 0.25), C64::new(3.0, -1.0), C64::new(0.1, 0.0)];
        let mut acc = Running::new(1);
        for (i, x) in xs.iter().enumerate() {
            acc.push(i + 1, &[*x]);
        }
        let mean = xs.iter().sum::<C64>() / 4.0;
        let var = xs.iter().map(|x| (x - mean).norm_sqr()).sum::<f64>() / 3.0;
        assert!((acc.mean[0] - mean).norm() < 1e-15);
        assert!((acc.stderr(4)[0] - (var / 4.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn result_is_independent_of_thread_count() {
        let grid = TimeGrid::new(0.01, 1.0).unwrap();
        let psi0 = qubit::excited();
        let obs = [Observable::new("pe", qubit::excited_projector())];
        for model in [damped_qubit::diffusive(), damped_qubit::jump()] {
            let a = ensemble_with_threads(&model, &obs, &psi0, 600, &grid, 5, 1).unwrap();
            let b = ensemble_with_threads(&model, &obs, &psi0, 600, &grid, 5, 4).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        let grid = TimeGrid::new(0.1, 1.0).unwrap();
        let model = damped_qubit::diffusive();
        let psi0 = qubit::excited();
        assert!(ensemble_with_threads(&model, &[], &psi0, 0, &grid, 1, 1).is_err());
        let bad = [Observable::new("x", linalg::identity(3))];
        assert!(ensemble_with_threads(&model, &bad, &psi0, 2, &grid, 1, 1).is_err());
    }
}
