use std::f64::consts::{FRAC_PI_6, PI, TAU};

use proptest::prelude::*;
use symfield_core::discrete::{
    discrete_loss, fit_density_rotation, fit_discrete, rotation_element, similarity_matrix, Constraint,
    DensityEvaluation, DensityRotationOptions, ParametricFamily, RotationSelection,
};
use symfield_core::features::{FeatureAtom, Term};
use symfield_core::linalg::Matrix;
use symfield_core::manifold_opt::{Loss, OptimizerConfig};
use symfield_core::model_fit::{KdeModel, ScalarFunctionModel};
use symfield_core::rng::SeededRng;

fn poly(terms: &[(f64, &[u32])]) -> ScalarFunctionModel {
    let terms: Vec<Term> = terms.iter().map(|(c, e)| Term::new(*c, FeatureAtom::monomial(e))).collect();
    ScalarFunctionModel::from_terms(2, &terms).unwrap()
}

fn config(seed: u64) -> OptimizerConfig {
    OptimizerConfig::adagrad(Loss::MeanSquared, 0.1, 2000, seed)
}

fn cloud(rows: usize, seed: u64) -> Matrix {
    let mut rng = SeededRng::new(seed);
    Matrix::from_vec(rows, 2, (0..2 * rows).map(|_| rng.standard_normal()).collect())
}

#[test]
fn parabola_is_symmetric_about_the_vertical_axis() {
    let mut rng = SeededRng::new(1);
    let rows: Vec<f64> = (0..200)
        .flat_map(|_| {
            let x = rng.uniform_in(-2.0, 2.0);
            [x, x * x]
        })
        .collect();
    let data = Matrix::from_vec(200, 2, rows);
    let f = poly(&[(1.0, &[0, 1]), (-1.0, &[2, 0])]);
    for seed in 0..4 {
        let (fit, trace) = fit_discrete(&f, &data, &ParametricFamily::Reflection2d, &config(seed)).unwrap();
        let w = &fit.parameters;
        assert!((w[0].abs() - 1.0).abs() < 1e-6 && w[1].abs() < 1e-3, "seed {seed}: {w:?}");
        assert!(trace.final_loss < 1e-8);
    }
}

#[test]
fn reflection_fixing_x_is_the_horizontal_axis() {
    let data = cloud(200, 2);
    let f = poly(&[(1.0, &[1, 0])]);
    let (fit, _) = fit_discrete(&f, &data, &ParametricFamily::Reflection2d, &config(2)).unwrap();
    assert!(fit.parameters[0].abs() < 1e-3 && (fit.parameters[1].abs() - 1.0).abs() < 1e-6, "{:?}", fit.parameters);
}

#[test]
fn rotationally_symmetric_function_has_zero_loss_everywhere() {
    let data = cloud(200, 3);
    let f = poly(&[(1.0, &[2, 0]), (1.0, &[0, 2])]);
    let family = ParametricFamily::Rotation2d { lo: FRAC_PI_6, hi: TAU };
    let (fit, trace) = fit_discrete(&f, &data, &family, &config(3)).unwrap();
    assert!(trace.final_loss <= 1e-8);
    assert!(fit.parameters[0] >= FRAC_PI_6 && fit.parameters[0] <= TAU);
    for theta in [0.7, 2.0, 5.5] {
        assert!(discrete_loss(&f, &data, &family, &[theta], Loss::MeanAbsolute).unwrap() < 1e-12);
    }
}

#[test]
fn reported_loss_matches_recomputation() {
    let data = cloud(150, 4);
    let f = poly(&[(1.0, &[2, 0]), (0.3, &[1, 1]), (-1.0, &[0, 1])]);
    for loss in [Loss::MeanAbsolute, Loss::MeanSquared] {
        let cfg = OptimizerConfig::adagrad(loss, 0.05, 300, 4);
        for family in [ParametricFamily::Reflection2d, ParametricFamily::Rotation2d { lo: 0.5, hi: 5.0 }] {
            let (fit, trace) = fit_discrete(&f, &data, &family, &cfg).unwrap();
            let direct = discrete_loss(&f, &data, &family, &fit.parameters, loss).unwrap();
            assert!((direct - fit.final_loss).abs() <= 1e-12 * (1.0 + direct));
            assert_eq!(fit.final_loss, trace.final_loss);
        }
    }
}

#[test]
fn interval_constraint_is_respected() {
    // x is only invariant under the trivial rotation, so the fit is pushed
    // against the excluded region.
    let data = cloud(100, 5);
    let f = poly(&[(1.0, &[1, 0])]);
    let family = ParametricFamily::Rotation2d { lo: 1.0, hi: 2.0 };
    let (fit, _) = fit_discrete(&f, &data, &family, &config(5)).unwrap();
    assert_eq!(fit.parameters[0], 1.0);
    assert!(fit.excluded_region_active);
}

#[test]
fn user_linear_family_recovers_a_reflection() {
    // S(w) = diag(w, 1) on the parabola: w = −1 is the reflection x → −x.
    let base = Matrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0]);
    let generators = vec![Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0])];
    let family = ParametricFamily::UserLinear {
        base,
        generators,
        constraint: Constraint::Interval { lo: vec![-2.0], hi: vec![0.0] },
    };
    let f = poly(&[(1.0, &[0, 1]), (-1.0, &[2, 0])]);
    let (fit, _) = fit_discrete(&f, &cloud(100, 6), &family, &OptimizerConfig::adagrad(Loss::MeanSquared, 0.1, 3000, 6))
        .unwrap();
    assert!((fit.parameters[0] + 1.0).abs() < 1e-4, "{:?}", fit.parameters);
}

#[test]
fn generator_similarity() {
    let theta = 2.0 * PI / 7.0;
    let g = rotation_element(theta);
    assert!((similarity_matrix(theta, &g).unwrap() - 1.0).abs() < 1e-15);
    assert!((similarity_matrix(theta, &g.scaled(-1.0)).unwrap() - 1.0).abs() < 1e-15);
    assert!(similarity_matrix(theta, &Matrix::zeros(3, 3)).is_err());
    assert!(similarity_matrix(theta, &Matrix::identity(2)).is_err());
    // A small angle error barely moves the score.
    assert!(similarity_matrix(theta + 0.01, &g).unwrap() > 0.9999);
}

fn even_ring(count: usize) -> Matrix {
    let rows: Vec<f64> = (0..count)
        .flat_map(|i| {
            let t = TAU * i as f64 / count as f64;
            [t.cos(), t.sin()]
        })
        .collect();
    Matrix::from_vec(count, 2, rows)
}

#[test]
fn rotation_invariant_density_gives_a_flat_loss() {
    let centers = even_ring(720);
    let kde = KdeModel::new(centers, vec![1.0; 720], 0.15).unwrap();
    let data = even_ring(97);
    let fit = fit_density_rotation(&kde, &data, FRAC_PI_6, &DensityRotationOptions::default()).unwrap();
    assert!(fit.result.final_loss <= 1e-3, "{}", fit.result.final_loss);
    assert!(!fit.result.excluded_region_active);
}

#[test]
fn density_rotation_finds_a_planted_symmetry() {
    // Three bumps at 120° spacing: the smallest non-trivial symmetry is 2π/3.
    let centers = Matrix::from_rows(
        &(0..3).map(|i| vec![(TAU * i as f64 / 3.0).cos(), (TAU * i as f64 / 3.0).sin()]).collect::<Vec<_>>(),
    )
    .unwrap();
    let kde = KdeModel::new(centers, vec![1.0; 3], 0.3).unwrap();
    let data = cloud(300, 7);
    for evaluation in [DensityEvaluation::Direct, DensityEvaluation::Gridded { nodes_per_bandwidth: 8.0 }] {
        let options = DensityRotationOptions { evaluation, ..DensityRotationOptions::default() };
        let fit = fit_density_rotation(&kde, &data, FRAC_PI_6, &options).unwrap();
        let theta = fit.result.parameters[0];
        assert!((theta - TAU / 3.0).abs() < 1e-4, "{evaluation:?}: {theta}");
        assert!(fit.local_minima.windows(2).all(|w| w[0].1 <= w[1].1));
    }
    let options = DensityRotationOptions {
        evaluation: DensityEvaluation::Direct,
        selection: RotationSelection::LowestLoss { tie_fraction: 0.0 },
        ..DensityRotationOptions::default()
    };
    let fit = fit_density_rotation(&kde, &data, FRAC_PI_6, &options).unwrap();
    let theta = fit.result.parameters[0];
    assert!((theta - TAU / 3.0).abs() < 1e-4 || (theta - 2.0 * TAU / 3.0).abs() < 1e-4, "{theta}");
}

#[test]
fn density_rotation_rejects_bad_input() {
    let kde = KdeModel::new(Matrix::zeros(1, 2), vec![1.0], 1.0).unwrap();
    let data = cloud(10, 8);
    assert!(fit_density_rotation(&kde, &data, -0.1, &DensityRotationOptions::default()).is_err());
    assert!(fit_density_rotation(&kde, &data, 4.0, &DensityRotationOptions::default()).is_err());
    let kde3 = KdeModel::new(Matrix::zeros(1, 3), vec![1.0], 1.0).unwrap();
    assert!(fit_density_rotation(&kde3, &data, 0.5, &DensityRotationOptions::default()).is_err());
}

proptest! {
    #[test]
    fn reflections_are_involutions(
        angle in 0.0..TAU,
        x in prop::collection::vec(-10.0..10.0f64, 2),
    ) {
        let w = [angle.cos(), angle.sin()];
        let family = ParametricFamily::Reflection2d;
        let back = family.transform(&w, &family.transform(&w, &x));
        for (a, b) in back.iter().zip(&x) {
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn rotations_invert(theta in -10.0..10.0f64) {
        let family = ParametricFamily::Rotation2d { lo: -20.0, hi: 20.0 };
        let product = family.matrix(&[theta]).matmul(&family.matrix(&[-theta]));
        prop_assert!(product.sub(&Matrix::identity(2)).max_abs() <= 1e-12);
    }

    #[test]
    fn reflection_residual_is_scale_invariant(
        angle in 0.0..TAU,
        c in prop_oneof![0.01..100.0f64, -100.0..-0.01f64],
        seed in any::<u64>(),
    ) {
        let data = cloud(20, seed);
        let f = poly(&[(1.0, &[2, 0]), (0.5, &[1, 1]), (-2.0, &[0, 1])]);
        let w = [angle.cos(), angle.sin()];
        let scaled = [c * w[0], c * w[1]];
        let family = ParametricFamily::Reflection2d;
        let a = discrete_loss(&f, &data, &family, &w, Loss::MeanAbsolute).unwrap();
        let b = discrete_loss(&f, &data, &family, &scaled, Loss::MeanAbsolute).unwrap();
        prop_assert!((a - b).abs() <= 1e-10 * (1.0 + a));
    }

    #[test]
    fn transform_jacobians_match_finite_differences(
        w in prop::collection::vec(-2.0..2.0f64, 2),
        x in prop::collection::vec(-3.0..3.0f64, 2),
    ) {
        prop_assume!(w[0].hypot(w[1]) > 0.2);
        let family = ParametricFamily::Reflection2d;
        let (_, jac) = family.transform_with_jacobian(&w, &x);
        let h = 1e-6;
        for k in 0..2 {
            let mut up = w.clone();
            let mut down = w.clone();
            up[k] += h;
            down[k] -= h;
            let (fu, fd) = (family.transform(&up, &x), family.transform(&down, &x));
            for r in 0..2 {
                let est = (fu[r] - fd[r]) / (2.0 * h);
                prop_assert!((est - jac[(r, k)]).abs() <= 1e-6 * (1.0 + est.abs()));
            }
        }
    }
}
