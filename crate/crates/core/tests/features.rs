use proptest::prelude::*;
use symfield_core::features::{monomial_basis, trig_atoms, FeatureAtom, FeatureBasis, Term};
use symfield_core::linalg::Matrix;

fn atoms(exponents: &[&[u32]]) -> Vec<FeatureAtom> {
    exponents.iter().map(|e| FeatureAtom::monomial(e)).collect()
}

#[test]
fn basis_sizes_and_order() {
    let b = monomial_basis(2, 2, true).unwrap();
    assert_eq!(b.atoms(), atoms(&[&[0, 0], &[1, 0], &[0, 1], &[2, 0], &[1, 1], &[0, 2]]).as_slice());
    let b = monomial_basis(3, 1, true).unwrap();
    assert_eq!(b.atoms(), atoms(&[&[0, 0, 0], &[1, 0, 0], &[0, 1, 0], &[0, 0, 1]]).as_slice());
    assert_eq!(monomial_basis(2, 3, false).unwrap().len(), 9);
    assert_eq!(monomial_basis(4, 3, true).unwrap().len(), 35);
}

#[test]
fn evaluation_examples() {
    let b = monomial_basis(2, 2, true).unwrap();
    assert_eq!(b.evaluate(&[2.0, 3.0]).unwrap(), vec![1.0, 2.0, 3.0, 4.0, 6.0, 9.0]);

    let b = FeatureBasis::new(
        2,
        vec![FeatureAtom::coordinate(2, 0), FeatureAtom::Sin { axis: 0 }, FeatureAtom::Cos { axis: 1 }],
    )
    .unwrap();
    assert_eq!(b.evaluate(&[0.0, 0.0]).unwrap(), vec![0.0, 0.0, 1.0]);
}

#[test]
fn jacobian_examples() {
    let b = FeatureBasis::new(2, atoms(&[&[2, 0], &[1, 1]])).unwrap();
    let j = b.jacobian(&[2.0, 3.0]).unwrap();
    assert_eq!(j.as_slice(), &[4.0, 0.0, 3.0, 2.0]);

    let b = FeatureBasis::new(3, vec![FeatureAtom::Sin { axis: 0 }]).unwrap();
    assert_eq!(b.jacobian(&[0.0, 5.0, -1.0]).unwrap().as_slice(), &[1.0, 0.0, 0.0]);
}

#[test]
fn canonical_order_is_independent_of_input_order() {
    let mut shuffled = atoms(&[&[0, 2], &[1, 0], &[0, 0], &[1, 1], &[2, 0], &[0, 1]]);
    shuffled.extend([FeatureAtom::Cos { axis: 0 }, FeatureAtom::Sin { axis: 1 }, FeatureAtom::Sin { axis: 0 }]);
    let a = FeatureBasis::new(2, shuffled.clone()).unwrap();
    shuffled.reverse();
    let b = FeatureBasis::new(2, shuffled).unwrap();
    assert_eq!(a, b);
    let mut expected = monomial_basis(2, 2, true).unwrap().atoms().to_vec();
    expected.extend(trig_atoms(2).into_iter().filter(|t| matches!(t, FeatureAtom::Sin { .. })));
    expected.extend(trig_atoms(2).into_iter().filter(|t| matches!(t, FeatureAtom::Cos { .. })));
    assert_eq!(&a.atoms()[..6], &expected[..6]);
    assert_eq!(a.len(), 9);
}

#[test]
fn duplicates_and_bad_atoms() {
    let b = FeatureBasis::new(2, atoms(&[&[1, 0], &[1, 0], &[0, 1]])).unwrap();
    assert_eq!(b.len(), 2);
    assert!(FeatureBasis::with_positions(2, atoms(&[&[1, 0], &[1, 0]])).is_err());
    assert!(FeatureBasis::new(2, atoms(&[&[1, 0, 0]])).is_err());
    assert!(FeatureBasis::new(2, vec![FeatureAtom::Sin { axis: 2 }]).is_err());
    assert!(b.evaluate(&[1.0]).is_err());
    assert!(b.jacobian(&[1.0, 2.0, 3.0]).is_err());
}

#[test]
fn product_atom_uses_the_product_rule() {
    // x · (z − 1) in R³.
    let factor = vec![
        Term::new(1.0, FeatureAtom::coordinate(3, 2)),
        Term::new(-1.0, FeatureAtom::constant(3)),
    ];
    let atom = FeatureAtom::Product { monomial: vec![1, 0, 0], factor };
    assert!(atom.is_artificial());
    let b = FeatureBasis::new(3, vec![atom]).unwrap();
    let p = [2.0, -1.0, 4.0];
    assert_eq!(b.evaluate(&p).unwrap(), vec![6.0]);
    assert_eq!(b.jacobian(&p).unwrap().as_slice(), &[3.0, 0.0, 2.0]);
}

#[test]
fn feature_matrix_rows_are_evaluations() {
    let b = monomial_basis(2, 2, true).unwrap();
    let data = Matrix::from_row_slice(3, 2, &[1.0, 2.0, -1.0, 0.5, 0.0, 3.0]);
    let f = b.feature_matrix(&data).unwrap();
    assert_eq!(f.shape(), (3, 6));
    for i in 0..3 {
        assert_eq!(f.row(i), b.evaluate(data.row(i)).unwrap().as_slice());
    }
}

fn exponent_vectors(n: usize) -> impl Strategy<Value = Vec<Vec<u32>>> {
    prop::collection::vec(prop::collection::vec(0u32..4, n), 1..8)
}

fn mixed_basis(n: usize) -> impl Strategy<Value = FeatureBasis> {
    (exponent_vectors(n), prop::collection::vec((0usize..n, any::<bool>()), 0..4)).prop_map(move |(mons, trig)| {
        let mut atoms: Vec<FeatureAtom> = mons.into_iter().map(|exponents| FeatureAtom::Monomial { exponents }).collect();
        atoms.extend(
            trig.into_iter()
                .map(|(axis, sin)| if sin { FeatureAtom::Sin { axis } } else { FeatureAtom::Cos { axis } }),
        );
        FeatureBasis::new(n, atoms).unwrap()
    })
}

proptest! {
    #[test]
    fn jacobian_matches_central_differences(
        basis in mixed_basis(3),
        point in prop::collection::vec(-1.5..1.5f64, 3),
    ) {
        let j = basis.jacobian(&point).unwrap();
        prop_assert_eq!(j.shape(), (basis.len(), 3));
        let h = 1e-5;
        for axis in 0..3 {
            let mut up = point.clone();
            let mut down = point.clone();
            up[axis] += h;
            down[axis] -= h;
            let fu = basis.evaluate(&up).unwrap();
            let fd = basis.evaluate(&down).unwrap();
            for k in 0..basis.len() {
                let fd_est = (fu[k] - fd[k]) / (2.0 * h);
                let exact = j[(k, axis)];
                prop_assert!((fd_est - exact).abs() <= 1e-6 * (1.0 + exact.abs()), "{} vs {}", fd_est, exact);
            }
        }
    }

    #[test]
    fn monomials_match_a_product_of_powers(
        point in prop::collection::vec(-2.0..2.0f64, 3),
    ) {
        let basis = monomial_basis(3, 3, true).unwrap();
        let values = basis.evaluate(&point).unwrap();
        for (atom, v) in basis.atoms().iter().zip(&values) {
            let FeatureAtom::Monomial { exponents } = atom else { unreachable!() };
            let oracle: f64 = exponents.iter().zip(&point).map(|(&e, &x)| x.powi(e as i32)).product();
            prop_assert!((oracle - v).abs() <= 1e-12 * (1.0 + oracle.abs()));
        }
    }

    #[test]
    fn construction_is_stable(mons in exponent_vectors(2)) {
        let atoms: Vec<FeatureAtom> = mons.into_iter().map(|exponents| FeatureAtom::Monomial { exponents }).collect();
        let a = FeatureBasis::new(2, atoms.clone()).unwrap();
        let b = FeatureBasis::new(2, atoms).unwrap();
        prop_assert_eq!(a.atoms(), b.atoms());
        let degrees: Vec<u32> = a.atoms().iter().map(|t| t.degree().unwrap()).collect();
        prop_assert!(degrees.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn dimension_contract(basis in mixed_basis(4), point in prop::collection::vec(-1.0..1.0f64, 4)) {
        prop_assert_eq!(basis.evaluate(&point).unwrap().len(), basis.len());
        prop_assert_eq!(basis.jacobian(&point).unwrap().shape(), (basis.len(), 4));
    }
}
