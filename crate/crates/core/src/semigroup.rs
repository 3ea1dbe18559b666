//! Averaged (vacuum) evolutions: the Lindblad semigroup `exp(tγ)` in the
//! Heisenberg and Schrödinger pictures, and the Picard iteration for the
//! minimal completely positive solution.

use crate::error::{Error, Result};
use crate::germ::{Germ, MatrixMap};
use crate::linalg::{self, c, Mat, ONE};
use crate::unraveling::TimeGrid;

#[derive(Debug, Clone)]
pub struct Superoperator {
    n: usize,
    action: MatrixMap,
    matrix: Mat,
}

impl Superoperator {
    pub fn new(action: MatrixMap) -> Self {
        let matrix = action.superoperator();
        Superoperator { n: action.dim(), action, matrix }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn action(&self) -> &MatrixMap {
        &self.action
    }

    /// `n² x n²` matrix on column-stacked `vec(B)`.
    pub fn matrix(&self) -> &Mat {
        &self.matrix
    }

    pub fn apply(&self, b: &Mat) -> Mat {
        self.action.apply(b)
    }

    /// Largest mismatch between the matrix and the action on matrix units.
    pub fn materialization_defect(&self) -> f64 {
        let n = self.n;
        let mut worst: f64 = 0.0;
        for p in 0..n {
            for q in 0..n {
                let e = linalg::matrix_unit(n, p, q);
                let via = linalg::unvec(&(&self.matrix * linalg::vec_of(&e)), n);
                worst = worst.max(linalg::max_abs_diff(&via, &self.action.apply(&e)));
            }
        }
        worst
    }

    /// One classical RK4 step for `dx/dt = S x`, which for a linear system is
    /// the degree-4 Taylor polynomial of `exp(hS)`.
    fn rk4_step(&self, h: f64) -> Mat {
        let dim = self.matrix.nrows();
        let hs = &self.matrix * c(h, 0.0);
        let mut term = linalg::identity(dim);
        let mut out = linalg::identity(dim);
        for k in 1..=4 {
            term = &term * &hs * c(1.0 / k as f64, 0.0);
            out += &term;
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionResult {
    pub grid: Vec<f64>,
    pub values: Vec<Mat>,
    pub method: String,
    pub steps: usize,
}

impl EvolutionResult {
    pub fn last(&self) -> &Mat {
        self.values.last().expect("evolution has at least the initial value")
    }

    /// `max_j max|A_j − B_j|`.
    pub fn sup_distance(&self, other: &EvolutionResult) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| linalg::max_abs_diff(a, b)).fold(0.0, f64::max)
    }
}

fn integrate(gen: &Superoperator, x0: &Mat, tmax: f64, steps: usize, method: &str) -> Result<EvolutionResult> {
    let grid = TimeGrid::from_steps(tmax, steps)?;
    linalg::ensure_square(x0, gen.n(), "initial value")?;
    let step = gen.rk4_step(grid.dt());
    let mut values = Vec::with_capacity(steps + 1);
    let mut x = linalg::vec_of(x0);
    values.push(x0.clone());
    for j in 0..steps {
        x = &step * &x;
        if !x.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::NonFinite { trajectory: None, step: j + 1 });
        }
        values.push(linalg::unvec(&x, gen.n()));
    }
    Ok(EvolutionResult { grid: grid.points(), values, method: method.into(), steps })
}

/// `dB/dt = L(B)` for an arbitrary generator.
pub fn evolve_with_generator(generator: &MatrixMap, b0: &Mat, tmax: f64, steps: usize) -> Result<EvolutionResult> {
    integrate(&Superoperator::new(generator.clone()), b0, tmax, steps, "rk4")
}

/// `dB/dt = γ(B)`.
pub fn evolve_heisenberg(germ: &Germ, b0: &Mat, tmax: f64, steps: usize) -> Result<EvolutionResult> {
    integrate(&Superoperator::new(germ.gamma_map().clone()), b0, tmax, steps, "rk4-heisenberg")
}

/// `dρ/dt = γ'(ρ)` with `tr(ρ γ(B)) = tr(γ'(ρ) B)`.
pub fn evolve_schrodinger(germ: &Germ, rho0: &Mat, tmax: f64, steps: usize) -> Result<EvolutionResult> {
    linalg::ensure_square(rho0, germ.n(), "rho0")?;
    if linalg::hermiticity_defect(rho0) > 1e-10 {
        return Err(Error::InvalidArgument("rho0 must be Hermitian".into()));
    }
    let (vals, _) = linalg::hermitian_eigh(rho0);
    if vals.first().is_some_and(|&v| v < -1e-10) {
        return Err(Error::InvalidArgument(format!("rho0 is not positive (eigenvalue {:.3e})", vals[0])));
    }
    let tr = rho0.trace();
    if (tr - ONE).norm() > 1e-10 {
        return Err(Error::InvalidArgument(format!("rho0 must have unit trace, got {tr}")));
    }
    integrate(&Superoperator::new(germ.gamma_map().trace_dual()), rho0, tmax, steps, "rk4-schrodinger")
}

/// Vacuum-averaged Picard iteration
/// `Φ⁽ᵐ⁺¹⁾_t(B) = W_t†BW_t + ∫₀ᵗ Φ⁽ᵐ⁾_s(φ(W_{t−s}†BW_{t−s})) ds`,
/// `W_t = exp(−Kt)`, `φ(B) = γ(B) + K†B + BK`, trapezoidal in `s`.
/// Returns `Φ⁽⁰⁾ … Φ⁽ⁱᵗᵉʳˢ⁾` evaluated at `b0`.
pub fn picard_minimal(germ: &Germ, b0: &Mat, tmax: f64, steps: usize, iters: usize) -> Result<Vec<EvolutionResult>> {
    let grid = TimeGrid::from_steps(tmax, steps)?;
    let n = germ.n();
    linalg::ensure_square(b0, n, "B0")?;
    let k = germ
        .drift()
        .ok_or_else(|| Error::InvalidModel("Picard iteration needs the drift K of a structural germ".into()))?;
    let mut phi = germ.gamma_map().clone();
    phi.push(ONE, k.adjoint(), linalg::identity(n));
    phi.push(ONE, linalg::identity(n), k.clone());
    let phi_hat = phi.superoperator();

    let h = grid.dt();
    let w_step = linalg::expm(&(k * c(-h, 0.0)));
    let mut w = linalg::identity(n);
    let mut s_hat = Vec::with_capacity(steps + 1);
    for _ in 0..=steps {
        s_hat.push(MatrixMap::sandwich(w.adjoint(), w.clone()).superoperator());
        w = &w * &w_step;
    }
    // φ̂ Ŝ_r for every lag r.
    let kernel: Vec<Mat> = s_hat.iter().map(|s| &phi_hat * s).collect();

    let b0v = linalg::vec_of(b0);
    let snapshot = |ops: &[Mat], m: usize| EvolutionResult {
        grid: grid.points(),
        values: ops.iter().map(|op| linalg::unvec(&(op * &b0v), n)).collect(),
        method: format!("picard-{m}"),
        steps,
    };
    let mut current = s_hat.clone();
    let mut out = vec![snapshot(&current, 0)];
    let dim = n * n;
    for m in 1..=iters {
        let mut next = Vec::with_capacity(steps + 1);
        for j in 0..=steps {
            let mut acc = s_hat[j].clone();
            if j > 0 {
                let mut conv = linalg::zeros(dim, dim);
                for i in 0..=j {
                    let wgt = if i == 0 || i == j { 0.5 * h } else { h };
                    conv.gemm(c(wgt, 0.0), &current[i], &kernel[j - i], ONE);
                }
                acc += conv;
            }
            next.push(acc);
        }
        current = next;
        out.push(snapshot(&current, m));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::germ::{build_germ, random_matrix, StructuralModel};
    use crate::linalg::{max_abs_diff, qubit};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn materialized_matrix_agrees_with_action() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let germ = build_germ(&StructuralModel::random(&mut rng, 3, 2, 2, true)).unwrap();
        let s = Superoperator::new(germ.gamma_map().clone());
        assert!(s.materialization_defect() < 1e-12);
    }

    #[test]
    fn zero_generator_keeps_initial_value() {
        let germ = Germ::trivial(2, 1);
        let b0 = random_matrix(&mut ChaCha8Rng::seed_from_u64(32), 2);
        let res = evolve_heisenberg(&germ, &b0, 1.0, 10).unwrap();
        assert!(res.values.iter().all(|b| *b == b0));
        assert_eq!(res.values.len(), 11);
    }

    #[test]
    fn damped_qubit_closed_form() {
        let germ = build_germ(&StructuralModel::damped_qubit()).unwrap();
        let pe = qubit::excited_projector();
        let res = evolve_heisenberg(&germ, &pe, 1.0, 1000).unwrap();
        assert_eq!(res.values[0], pe);
        assert!(max_abs_diff(res.last(), &(&pe * c((-1.0f64).exp(), 0.0))) < 1e-8);
        let id = evolve_heisenberg(&germ, &linalg::identity(2), 1.0, 100).unwrap();
        assert!(max_abs_diff(id.last(), &linalg::identity(2)) < 1e-10);
        let rho = evolve_schrodinger(&germ, &pe, 1.0, 1000).unwrap();
        assert!((rho.last()[(0, 0)].re - (-1.0f64).exp()).abs() < 1e-8);
    }

    #[test]
    fn schrodinger_is_dual_to_heisenberg() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let germ = build_germ(&StructuralModel::random(&mut rng, 3, 1, 2, false)).unwrap();
        let a = random_matrix(&mut rng, 3);
        let rho0 = &a * a.adjoint();
        let rho0 = &rho0 / rho0.trace();
        let b0 = random_matrix(&mut rng, 3);
        let heis = evolve_heisenberg(&germ, &b0, 0.5, 500).unwrap();
        let schr = evolve_schrodinger(&germ, &rho0, 0.5, 500).unwrap();
        for (bt, rt) in heis.values.iter().zip(&schr.values) {
            let lhs = (&rho0 * bt).trace();
            let rhs = (rt * &b0).trace();
            assert!((lhs - rhs).norm() < 1e-9);
            assert!((rt.trace() - ONE).norm() < 1e-10);
        }
    }

    #[test]
    fn schrodinger_rejects_bad_states() {
        let germ = Germ::trivial(2, 1);
        assert!(evolve_schrodinger(&germ, &linalg::identity(2), 1.0, 10).is_err());
        assert!(evolve_schrodinger(&germ, &qubit::sigma_z(), 1.0, 10).is_err());
        assert!(evolve_heisenberg(&germ, &linalg::identity(2), 1.0, 0).is_err());
    }

    #[test]
    fn picard_without_feedback_is_the_contraction() {
        let mut model = StructuralModel::damped_qubit();
        model.l = vec![linalg::zeros(2, 2)];
        model.h = qubit::sigma_z();
        let germ = build_germ(&model).unwrap();
        let b0 = random_matrix(&mut ChaCha8Rng::seed_from_u64(34), 2);
        let k = germ.drift().unwrap().clone();
        let res = picard_minimal(&germ, &b0, 1.0, 50, 3).unwrap();
        for r in &res {
            for (t, v) in r.grid.iter().zip(&r.values) {
                let w = linalg::expm(&(&k * c(-t, 0.0)));
                assert!(max_abs_diff(v, &(w.adjoint() * &b0 * &w)) < 1e-12);
            }
        }
    }

    #[test]
    fn picard_increments_are_positive_and_shrinking() {
        let germ = build_germ(&StructuralModel::damped_qubit()).unwrap();
        let res = picard_minimal(&germ, &linalg::identity(2), 1.0, 200, 8).unwrap();
        let mut prev = f64::INFINITY;
        for m in 1..res.len() {
            let mut sup: f64 = 0.0;
            for (a, b) in res[m].values.iter().zip(&res[m - 1].values) {
                let d = a - b;
                let (vals, _) = linalg::hermitian_eigh(&d);
                assert!(vals[0] >= -1e-12);
                sup = sup.max(linalg::max_abs(&d));
            }
            assert!(sup <= prev);
            prev = sup;
        }
    }

    #[test]
    fn picard_needs_drift() {
        let germ = Germ::trivial(2, 1);
        let stripped = Germ::new(
            2,
            germ.gamma_map().clone(),
            vec![MatrixMap::zero(2)],
            vec![MatrixMap::zero(2)],
            vec![vec![MatrixMap::identity(2)]],
        )
        .unwrap();
        assert!(matches!(picard_minimal(&stripped, &linalg::identity(2), 1.0, 10, 1), Err(Error::InvalidModel(_))));
    }
}
