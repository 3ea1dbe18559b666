use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use qsde::germ::{
    build_germ, check_ccp, kolmogorov_dilation, pseudo_adjoint, random_matrix, verify_dilation, StructuralModel,
    DEFAULT_PSD_TOL,
};
use qsde::linalg::{self, c, Mat, Vector};

fn model_from(seed: u64, n: usize, d: usize, dp: usize, sub: bool) -> StructuralModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    StructuralModel::random(&mut rng, n, d, dp, sub)
}

fn random_vector(rng: &mut ChaCha8Rng, len: usize) -> Vector {
    random_matrix(rng, len).column(0).into_owned()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn built_germs_are_flat_symmetric(seed in any::<u64>(), n in 1usize..4, d in 0usize..3, dp in 1usize..3, sub in any::<bool>()) {
        let model = model_from(seed, n, d, dp, sub);
        let germ = build_germ(&model).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        for _ in 0..4 {
            let b = random_matrix(&mut rng, n);
            prop_assert!(germ.flat_symmetry_defect(&b) <= 1e-12 * (1.0 + linalg::max_abs(&germ.block_matrix(&b))));
        }
    }

    #[test]
    fn structural_germs_are_ccp_with_agreeing_verdicts(seed in any::<u64>(), n in 1usize..4, d in 0usize..3, dp in 1usize..3, sub in any::<bool>()) {
        let germ = build_germ(&model_from(seed, n, d, dp, sub)).unwrap();
        let ops = linalg::matrix_unit_basis_with_identity(n);
        let v = check_ccp(&germ, &ops, DEFAULT_PSD_TOL).unwrap();
        prop_assert!(v.is_ccp, "min eig {} scale {}", v.min_eig, v.scale);
        prop_assert!(v.verdicts_agree);
    }

    #[test]
    fn metric_inverse_is_exact_for_hermitian_d(seed in any::<u64>(), n in 1usize..4, d in 1usize..3) {
        let mut model = model_from(seed, n, d, 1, false);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 2);
        let a = random_matrix(&mut rng, n);
        model.dissipation = Some(-(a.adjoint() * &a));
        let dd = kolmogorov_dilation(&build_germ(&model).unwrap(), 1e-12).unwrap();
        let g = dd.metric();
        let e = g.nrows();
        prop_assert!(linalg::max_abs_diff(&(&g * dd.metric_inverse()), &linalg::identity(e)) == 0.0);
        prop_assert!(linalg::max_abs_diff(&(dd.metric_inverse() * &g), &linalg::identity(e)) == 0.0);
        let lf = pseudo_adjoint(&dd.jmath(&a), &g).unwrap();
        prop_assert!(linalg::max_abs_diff(&lf, &dd.jmath(&a.adjoint())) <= 1e-9 * (1.0 + linalg::max_abs(&lf)));
    }

    #[test]
    fn dilation_round_trips(seed in any::<u64>(), n in 1usize..4, d in 1usize..3, dp in 1usize..3, sub in any::<bool>()) {
        let model = model_from(seed, n, d, dp, sub);
        let germ = build_germ(&model).unwrap();
        let dd = kolmogorov_dilation(&germ, 1e-12).unwrap();
        prop_assert!(dd.rank() <= (1 + d) * n * n);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 3);
        for _ in 0..5 {
            let b = random_matrix(&mut rng, n);
            prop_assert!(verify_dilation(&dd, &germ, &b).max() <= 1e-8);
        }
    }

    /// `ξ = Σ_k ȷ(X_k) 𝐋 η_k` with `Σ_k X_k η_k^base = 0` has `(ξ|ξ) ≥ 0`.
    #[test]
    fn indefinite_form_is_positive_on_the_constraint(seed in any::<u64>(), n in 1usize..4, d in 1usize..3, dp in 1usize..3, sub in any::<bool>()) {
        let model = model_from(seed, n, d, dp, sub);
        let dd = kolmogorov_dilation(&build_germ(&model).unwrap(), 1e-12).unwrap();
        let ops = linalg::matrix_unit_basis_with_identity(n);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 4);
        let mut etas: Vec<Vector> = ops.iter().map(|_| random_vector(&mut rng, (1 + d) * n)).collect();
        let last = ops.len() - 1;
        let mut fix = Vector::zeros(n);
        for (x, eta) in ops.iter().zip(&etas).take(last) {
            fix -= x * eta.rows(0, n);
        }
        etas[last].rows_mut(0, n).copy_from(&fix);
        let constraint: Vector = ops.iter().zip(&etas).map(|(x, eta)| x * eta.rows(0, n)).fold(Vector::zeros(n), |a, v| a + v);
        prop_assert!(constraint.norm() <= 1e-12 * (1.0 + fix.norm()));

        let lop = dd.lop();
        let xi = ops.iter().zip(&etas).fold(Vector::zeros(lop.nrows()), |acc, (x, eta)| acc + dd.jmath(x) * (&lop * eta));
        let scale = xi.norm_squared() * (1.0 + linalg::max_abs(&dd.metric()));
        prop_assert!(dd.indefinite_norm(&xi) >= -1e-8 * scale, "(xi|xi) = {}", dd.indefinite_norm(&xi));
    }
}

#[test]
fn tampering_a_martingale_model_breaks_positivity() {
    for seed in 0..10u64 {
        let model = model_from(seed, 2, 1, 1, false);
        let germ = build_germ(&model).unwrap().with_negated_exchange();
        let ops = linalg::matrix_unit_basis_with_identity(2);
        let v = check_ccp(&germ, &ops, DEFAULT_PSD_TOL).unwrap();
        assert!(!v.is_ccp && !v.constrained_is_ccp && v.verdicts_agree);
        assert!(kolmogorov_dilation(&germ, 1e-12).is_err());
    }
}

#[test]
fn identity_channel_dilates_to_a_representation() {
    let germ = build_germ(&StructuralModel::identity_channel(2, 1)).unwrap();
    let dd = kolmogorov_dilation(&germ, 1e-12).unwrap();
    let b = Mat::from_fn(2, 2, |r, k| c(r as f64 + 1.0, k as f64 - 0.5));
    assert!(verify_dilation(&dd, &germ, &b).max() <= 1e-12);
    assert!(dd.rank() >= 1);
    assert!(dd.representation_defect(&b.adjoint(), &b) <= 1e-12);
}
