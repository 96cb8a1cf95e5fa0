use proptest::prelude::*;
use symfield_core::linalg::{principal_cosines, Matrix};
use symfield_core::manifold_opt::{
    minimize, minimize_affine_target, orthonormality_defect, retract, tangent_project, Loss, OptimizerConfig,
    OrthonormalPoint,
};
use symfield_core::rng::SeededRng;
use symfield_core::Error;

fn column(v: &[f64]) -> Matrix {
    Matrix::column_vector(v)
}

#[test]
fn tangent_projection_examples() {
    let w = OrthonormalPoint::new(column(&[1.0, 0.0])).unwrap();
    let t = tangent_project(&w, &column(&[3.0, 4.0])).unwrap();
    assert_eq!(t.as_slice(), &[0.0, 4.0]);

    let w = OrthonormalPoint::new(Matrix::identity(2)).unwrap();
    let g = Matrix::from_row_slice(2, 2, &[1.0, 2.5, 2.5, -3.0]);
    assert!(tangent_project(&w, &g).unwrap().max_abs() < 1e-15);
}

#[test]
fn retraction_examples() {
    let w = OrthonormalPoint::new(column(&[1.0, 0.0])).unwrap();
    let same = retract(&w, &Matrix::zeros(2, 1)).unwrap();
    assert_eq!(same.matrix(), w.matrix());
    let moved = retract(&w, &column(&[0.0, 1.0])).unwrap();
    let r = std::f64::consts::FRAC_1_SQRT_2;
    assert!((moved.matrix()[(0, 0)] - r).abs() < 1e-15);
    assert!((moved.matrix()[(1, 0)] - r).abs() < 1e-15);
}

#[test]
fn retraction_of_a_collapsed_point_fails() {
    let w = OrthonormalPoint::new(column(&[1.0, 0.0])).unwrap();
    assert!(retract(&w, &column(&[-1.0, 0.0])).is_err());
}

#[test]
fn non_orthonormal_points_are_rejected() {
    assert!(OrthonormalPoint::new(column(&[1.0, 1.0])).is_err());
    assert!(OrthonormalPoint::new(Matrix::identity(2).vstack(&Matrix::zeros(1, 2)).transpose()).is_err());
}

#[test]
fn single_row_nullspace() {
    let a = Matrix::from_row_slice(1, 2, &[1.0, 0.0]);
    let config = OptimizerConfig::adagrad(Loss::MeanSquared, 0.1, 5000, 3);
    let (w, trace) = minimize(&a, 1, &config, None).unwrap();
    assert!(trace.final_loss <= 1e-6, "{}", trace.final_loss);
    assert!(w.matrix()[(0, 0)].abs() < 1e-6);
    assert!((w.matrix()[(1, 0)].abs() - 1.0).abs() < 1e-9);
    assert_eq!(trace.losses.len(), 5000);
}

#[test]
fn absolute_loss_settles_within_the_step_scale() {
    // Subgradient steps keep oscillating across the kink at a scale of
    // roughly lr / sqrt(epochs).
    let a = Matrix::from_row_slice(1, 2, &[1.0, 0.0]);
    let config = OptimizerConfig::adagrad(Loss::MeanAbsolute, 0.01, 5000, 3);
    let (w, trace) = minimize(&a, 1, &config, None).unwrap();
    assert!(trace.final_loss <= 0.01 / (5000f64).sqrt() * 2.0, "{}", trace.final_loss);
    assert!(w.matrix()[(1, 0)] > 0.0);
}

#[test]
fn two_dimensional_nullspace() {
    let a = Matrix::from_row_slice(4, 3, &[1.0, 0.0, 0.0, 2.0, 0.0, 0.0, -0.5, 0.0, 0.0, 3.0, 0.0, 0.0]);
    let config = OptimizerConfig::adagrad(Loss::MeanAbsolute, 0.01, 5000, 11);
    let (w, _) = minimize(&a, 2, &config, None).unwrap();
    let target = Matrix::from_row_slice(3, 2, &[0.0, 0.0, 1.0, 0.0, 0.0, 1.0]);
    let cosines = principal_cosines(w.matrix(), &target);
    let smallest = cosines.iter().cloned().fold(1.0, f64::min);
    assert!(smallest.min(1.0).acos() <= 1e-3, "{cosines:?}");
}

#[test]
fn minimize_is_bitwise_deterministic() {
    let mut rng = SeededRng::new(5);
    let a = Matrix::from_vec(20, 4, (0..80).map(|_| rng.standard_normal()).collect());
    for config in [
        OptimizerConfig::adagrad(Loss::MeanAbsolute, 0.01, 300, 9),
        OptimizerConfig::sgd(Loss::MeanSquared, 0.01, 300, 9),
    ] {
        let (w1, t1) = minimize(&a, 2, &config, None).unwrap();
        let (w2, t2) = minimize(&a, 2, &config, None).unwrap();
        assert_eq!(w1, w2);
        assert_eq!(t1, t2);
    }
}

#[test]
fn invalid_configurations() {
    let a = Matrix::identity(2);
    let mut config = OptimizerConfig::default();
    config.epochs = 0;
    assert!(matches!(minimize(&a, 1, &config, None), Err(Error::InvalidArgument(_))));
    let config = OptimizerConfig::sgd(Loss::MeanSquared, -1.0, 10, 0);
    assert!(minimize(&a, 1, &config, None).is_err());
    assert!(minimize(&a, 3, &OptimizerConfig::default(), None).is_err());
    let bad = Matrix::from_row_slice(1, 2, &[f64::NAN, 1.0]);
    assert!(minimize(&bad, 1, &OptimizerConfig::default(), None).is_err());
}

#[test]
fn divergence_reports_the_epoch() {
    let a = Matrix::from_row_slice(1, 2, &[1e200, 1e200]);
    let config = OptimizerConfig::sgd(Loss::MeanSquared, 1.0, 10, 0);
    assert!(matches!(minimize(&a, 1, &config, None), Err(Error::Divergence { epoch: 0 })));
}

#[test]
fn affine_target_examples() {
    assert_eq!(minimize_affine_target(&Matrix::identity(2), &[1.0, 2.0]).unwrap(), vec![1.0, 2.0]);
    let a = Matrix::from_row_slice(4, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0, 2.0, -1.0]);
    let x = [0.75, -2.0];
    let b = a.mul_vec(&x);
    let got = minimize_affine_target(&a, &b).unwrap();
    assert!((got[0] - x[0]).abs() < 1e-10 && (got[1] - x[1]).abs() < 1e-10);
    // Columns 0 and 1 are equal: the minimum-norm solution splits evenly.
    let a = Matrix::from_row_slice(3, 2, &[1.0, 1.0, 2.0, 2.0, -1.0, -1.0]);
    let got = minimize_affine_target(&a, &[2.0, 4.0, -2.0]).unwrap();
    assert!((got[0] - 1.0).abs() < 1e-12 && (got[1] - 1.0).abs() < 1e-12);
}

fn random_point(p: usize, q: usize, seed: u64) -> OrthonormalPoint {
    OrthonormalPoint::random(p, q, &mut SeededRng::new(seed)).unwrap()
}

fn shape() -> impl Strategy<Value = (usize, usize)> {
    (1usize..7).prop_flat_map(|p| (Just(p), 1..=p))
}

proptest! {
    #[test]
    fn projection_is_skew_in_the_frame(((p, q), seed) in (shape(), any::<u64>()), scale in 0.1..10.0f64) {
        let w = random_point(p, q, seed);
        let mut rng = SeededRng::new(seed ^ 0xabcdef);
        let g = Matrix::from_vec(p, q, (0..p * q).map(|_| scale * rng.standard_normal()).collect());
        let t = tangent_project(&w, &g).unwrap();
        let wt = w.matrix().tr_matmul(&t);
        prop_assert!(wt.add(&wt.transpose()).max_abs() <= 1e-10 * (1.0 + scale));
        // Projecting twice changes nothing.
        let tt = tangent_project(&w, &t).unwrap();
        prop_assert!(tt.sub(&t).max_abs() <= 1e-10 * (1.0 + scale));
    }

    #[test]
    fn retraction_stays_orthonormal(((p, q), seed) in (shape(), any::<u64>()), step in 0.0..3.0f64) {
        let w = random_point(p, q, seed);
        let mut rng = SeededRng::new(seed.wrapping_add(1));
        let g = Matrix::from_vec(p, q, (0..p * q).map(|_| rng.standard_normal()).collect());
        let t = tangent_project(&w, &g).unwrap().scaled(step);
        let next = retract(&w, &t).unwrap();
        prop_assert!(orthonormality_defect(next.matrix()) <= 1e-10);
    }

}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn exact_nullspaces_are_found(seed in 0u64..64, rank in 1usize..3) {
        // A = M Pᵀ with P spanning a rank-dimensional subspace of R⁴, so the
        // nullspace has dimension 4 − rank ≥ q = 1.
        let mut rng = SeededRng::new(seed);
        let p = Matrix::from_vec(4, rank, (0..4 * rank).map(|_| rng.standard_normal()).collect());
        let m = Matrix::from_vec(30, rank, (0..30 * rank).map(|_| rng.standard_normal()).collect());
        let a = m.matmul(&p.transpose());
        let config = OptimizerConfig::adagrad(Loss::MeanSquared, 0.1, 5000, seed);
        let (_, trace) = minimize(&a, 1, &config, None).unwrap();
        prop_assert!(trace.final_loss <= 1e-5, "{}", trace.final_loss);
    }
}
