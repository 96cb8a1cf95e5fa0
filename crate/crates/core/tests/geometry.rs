use nalgebra::DMatrix;
use proptest::prelude::*;
use symfield_core::datasets::{generate, GeneratorSpec};
use symfield_core::features::{monomial_basis, FeatureAtom, Term};
use symfield_core::geometry::{fit_map, pullback_metric, MetricModel, SmoothMapModel};
use symfield_core::linalg::{symmetric_eigen, Matrix};
use symfield_core::model_fit::ScalarFunctionModel;
use symfield_core::rng::SeededRng;

/// `(x, y, z, t) = (u, v, u² + v² − w, 2u)`.
fn killing_map() -> SmoothMapModel {
    let data = generate(&GeneratorSpec::new("killing4d", 500, 1)).unwrap().data;
    let source = data.select_columns(&[0, 1, 2]);
    let image = data.select_columns(&[3, 4, 5, 6]);
    fit_map(&source, &image, &monomial_basis(3, 2, true).unwrap()).unwrap().map
}

#[test]
fn recovers_the_embedding_polynomials() {
    let map = killing_map();
    let basis = map.components()[0].basis().clone();
    let expected: [&[(&[u32], f64)]; 4] = [
        &[(&[1, 0, 0], 1.0)],
        &[(&[0, 1, 0], 1.0)],
        &[(&[2, 0, 0], 1.0), (&[0, 2, 0], 1.0), (&[0, 0, 1], -1.0)],
        &[(&[1, 0, 0], 2.0)],
    ];
    for (component, terms) in map.components().iter().zip(expected) {
        for (atom, c) in basis.atoms().iter().zip(component.coefficients()) {
            let FeatureAtom::Monomial { exponents } = atom else { unreachable!() };
            let want = terms.iter().find(|(e, _)| *e == exponents.as_slice()).map_or(0.0, |t| t.1);
            assert!((c - want).abs() < 1e-6, "{exponents:?}: {c} vs {want}");
        }
    }
}

#[test]
fn metric_examples() {
    let metric = MetricModel { map: killing_map() };
    let g0 = metric.at(&[0.0, 0.0, 0.0]).unwrap();
    let expected0 = Matrix::from_row_slice(3, 3, &[5.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
    assert!(g0.sub(&expected0).max_abs() < 1e-6);
    let g1 = metric.at(&[1.0, 1.0, 1.0]).unwrap();
    let expected1 = Matrix::from_row_slice(3, 3, &[9.0, 4.0, -2.0, 4.0, 5.0, -2.0, -2.0, -2.0, 1.0]);
    assert!(g1.sub(&expected1).max_abs() < 1e-6);
}

#[test]
fn identity_pairing_gives_the_identity_metric() {
    let mut rng = SeededRng::new(2);
    let data = Matrix::from_vec(30, 3, (0..90).map(|_| rng.standard_normal()).collect());
    let map = fit_map(&data, &data, &monomial_basis(3, 1, true).unwrap()).unwrap().map;
    for _ in 0..5 {
        let u: Vec<f64> = (0..3).map(|_| rng.normal(0.0, 5.0)).collect();
        assert!(pullback_metric(&map, &u).unwrap().sub(&Matrix::identity(3)).max_abs() < 1e-12);
    }
}

#[test]
fn linear_maps_match_the_least_squares_oracle() {
    let mut rng = SeededRng::new(3);
    let a = Matrix::from_vec(4, 2, (0..8).map(|_| rng.standard_normal()).collect());
    let source = Matrix::from_vec(40, 2, (0..80).map(|_| rng.standard_normal()).collect());
    // Noisy image so the recovery is a genuine least-squares problem.
    let mut image = source.matmul(&a.transpose());
    for v in image.as_mut_slice() {
        *v += 0.01 * rng.standard_normal();
    }
    let fit = fit_map(&source, &image, &monomial_basis(2, 1, false).unwrap()).unwrap();

    let s = DMatrix::from_row_slice(40, 2, source.as_slice());
    let y = DMatrix::from_row_slice(40, 4, image.as_slice());
    let oracle = (s.transpose() * &s).try_inverse().unwrap() * s.transpose() * y;
    for (j, component) in fit.map.components().iter().enumerate() {
        for i in 0..2 {
            assert!((component.coefficients()[i] - oracle[(i, j)]).abs() < 1e-12);
        }
    }

    // An exact linear map pulls back to the constant AᵀA.
    let exact = fit_map(&source, &source.matmul(&a.transpose()), &monomial_basis(2, 1, false).unwrap()).unwrap();
    let ata = a.tr_matmul(&a);
    for _ in 0..5 {
        let u = [rng.normal(0.0, 3.0), rng.normal(0.0, 3.0)];
        assert!(pullback_metric(&exact.map, &u).unwrap().sub(&ata).max_abs() < 1e-12);
    }
}

#[test]
fn invalid_maps_and_points() {
    assert!(SmoothMapModel::new(vec![]).is_err());
    let a = ScalarFunctionModel::from_terms(2, &[Term::new(1.0, FeatureAtom::coordinate(2, 0))]).unwrap();
    let b = ScalarFunctionModel::from_terms(3, &[Term::new(1.0, FeatureAtom::coordinate(3, 0))]).unwrap();
    assert!(SmoothMapModel::new(vec![a.clone(), b]).is_err());
    let map = SmoothMapModel::new(vec![a]).unwrap();
    assert!(pullback_metric(&map, &[0.0]).is_err());
    assert!(pullback_metric(&map, &[f64::NAN, 0.0]).is_err());
    assert!(fit_map(&Matrix::zeros(3, 2), &Matrix::zeros(4, 1), &monomial_basis(2, 1, true).unwrap()).is_err());
}

fn random_map(seed: u64) -> SmoothMapModel {
    let mut rng = SeededRng::new(seed);
    let basis = monomial_basis(3, 3, true).unwrap();
    let components = (0..4)
        .map(|_| {
            let coefs = (0..basis.len()).map(|_| rng.standard_normal()).collect();
            ScalarFunctionModel::new(basis.clone(), coefs).unwrap()
        })
        .collect();
    SmoothMapModel::new(components).unwrap()
}

proptest! {
    #[test]
    fn metrics_are_symmetric_and_positive_semidefinite(seed in any::<u64>()) {
        let map = random_map(seed);
        let mut rng = SeededRng::new(seed ^ 1);
        for _ in 0..100 {
            let u: Vec<f64> = (0..3).map(|_| rng.uniform_in(-2.0, 2.0)).collect();
            let g = pullback_metric(&map, &u).unwrap();
            prop_assert_eq!(g.clone(), g.transpose());
            let (values, _) = symmetric_eigen(&g);
            let scale = values.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            prop_assert!(values.iter().all(|v| *v >= -1e-10 * scale), "{:?}", values);
        }
    }

    #[test]
    fn pullback_matches_finite_difference_jacobians(
        seed in any::<u64>(),
        u in prop::collection::vec(-1.5..1.5f64, 3),
    ) {
        let map = random_map(seed);
        let h = 1e-6;
        let mut j = Matrix::zeros(4, 3);
        for k in 0..3 {
            let mut up = u.clone();
            let mut down = u.clone();
            up[k] += h;
            down[k] -= h;
            let (fu, fd) = (map.evaluate(&up).unwrap(), map.evaluate(&down).unwrap());
            for r in 0..4 {
                j[(r, k)] = (fu[r] - fd[r]) / (2.0 * h);
            }
        }
        let fd_metric = j.tr_matmul(&j);
        let g = pullback_metric(&map, &u).unwrap();
        let scale = g.max_abs().max(1.0);
        prop_assert!(g.sub(&fd_metric).max_abs() <= 1e-6 * scale, "{:?} vs {:?}", g, fd_metric);
    }
}
