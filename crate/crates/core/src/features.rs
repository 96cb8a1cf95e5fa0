//! Feature dictionaries: ordered sets of scalar functions on `Rⁿ` with
//! analytic partial derivatives.
//!
//! Every coefficient vector in the crate is read against a [`FeatureBasis`],
//! so the basis order is canonical: monomials in graded lexicographic order
//! (total degree ascending, then exponent vectors descending), then the
//! univariate trig atoms by `(kind, axis)` with `sin` before `cos`, then
//! product-extension atoms in insertion order.

use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::error::{check_dim, Error, Result};
use crate::linalg::Matrix;
use crate::math;

/// A single dictionary function.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "lowercase"))]
pub enum FeatureAtom {
    /// `∏ xᵢ^eᵢ`.
    Monomial { exponents: Vec<u32> },
    /// `sin(x_axis)`.
    Sin { axis: usize },
    /// `cos(x_axis)`.
    Cos { axis: usize },
    /// `h · f` with `h` a monomial and `f` a fixed combination of atoms.
    ///
    /// Only created by the degenerate-column workaround of level-set
    /// estimation; always considered artificial.
    Product { monomial: Vec<u32>, factor: Vec<Term> },
}

/// `coef · atom`, the building block of closed-form expressions.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Term {
    pub coef: f64,
    pub atom: FeatureAtom,
}

impl Term {
    pub fn new(coef: f64, atom: FeatureAtom) -> Self {
        Self { coef, atom }
    }
}

/// A sparse polynomial: `(exponents, coefficient)` pairs, not necessarily
/// merged.
pub type Polynomial = Vec<(Vec<u32>, f64)>;

impl FeatureAtom {
    pub fn monomial(exponents: &[u32]) -> Self {
        FeatureAtom::Monomial { exponents: exponents.to_vec() }
    }

    pub fn constant(n: usize) -> Self {
        FeatureAtom::Monomial { exponents: vec![0; n] }
    }

    /// The coordinate function `x_axis` in `Rⁿ`.
    pub fn coordinate(n: usize, axis: usize) -> Self {
        let mut e = vec![0; n];
        e[axis] = 1;
        FeatureAtom::Monomial { exponents: e }
    }

    pub fn is_artificial(&self) -> bool {
        matches!(self, FeatureAtom::Product { .. })
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, FeatureAtom::Monomial { exponents } if exponents.iter().all(|&e| e == 0))
    }

    /// Total degree for polynomial atoms, `None` otherwise.
    pub fn degree(&self) -> Option<u32> {
        match self {
            FeatureAtom::Monomial { exponents } => Some(exponents.iter().sum()),
            FeatureAtom::Sin { .. } | FeatureAtom::Cos { .. } => None,
            FeatureAtom::Product { monomial, factor } => {
                let mut deg = 0;
                for t in factor {
                    deg = deg.max(t.atom.degree()?);
                }
                Some(monomial.iter().sum::<u32>() + deg)
            }
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        match self {
            FeatureAtom::Monomial { exponents } => check_dim(n, exponents.len(), "monomial exponents"),
            FeatureAtom::Sin { axis } | FeatureAtom::Cos { axis } => {
                if *axis < n {
                    Ok(())
                } else {
                    Err(Error::InvalidArgument(alloc::format!("trig axis {axis} out of range for dimension {n}")))
                }
            }
            FeatureAtom::Product { monomial, factor } => {
                check_dim(n, monomial.len(), "product monomial exponents")?;
                factor.iter().try_for_each(|t| t.atom.validate(n))
            }
        }
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        match self {
            FeatureAtom::Monomial { exponents } => monomial_value(exponents, x),
            FeatureAtom::Sin { axis } => math::sin(x[*axis]),
            FeatureAtom::Cos { axis } => math::cos(x[*axis]),
            FeatureAtom::Product { monomial, factor } => monomial_value(monomial, x) * evaluate_terms(factor, x),
        }
    }

    /// Adds `scale · ∇atom(x)` into `out`.
    pub fn accumulate_gradient(&self, x: &[f64], scale: f64, out: &mut [f64]) {
        match self {
            FeatureAtom::Monomial { exponents } => {
                for (j, o) in out.iter_mut().enumerate() {
                    *o += scale * monomial_partial(exponents, x, j);
                }
            }
            FeatureAtom::Sin { axis } => out[*axis] += scale * math::cos(x[*axis]),
            FeatureAtom::Cos { axis } => out[*axis] -= scale * math::sin(x[*axis]),
            FeatureAtom::Product { monomial, factor } => {
                let h = monomial_value(monomial, x);
                let f = evaluate_terms(factor, x);
                for (j, o) in out.iter_mut().enumerate() {
                    *o += scale * monomial_partial(monomial, x, j) * f;
                }
                for t in factor {
                    t.atom.accumulate_gradient(x, scale * h * t.coef, out);
                }
            }
        }
    }

    /// Expansion into monomials, `None` for trig atoms.
    pub fn as_polynomial(&self) -> Option<Polynomial> {
        match self {
            FeatureAtom::Monomial { exponents } => Some(vec![(exponents.clone(), 1.0)]),
            FeatureAtom::Sin { .. } | FeatureAtom::Cos { .. } => None,
            FeatureAtom::Product { monomial, factor } => {
                let mut out = Vec::new();
                for t in factor {
                    for (e, c) in t.atom.as_polynomial()? {
                        let exps = e.iter().zip(monomial).map(|(a, b)| a + b).collect();
                        out.push((exps, c * t.coef));
                    }
                }
                Some(out)
            }
        }
    }

    fn class_rank(&self) -> u8 {
        match self {
            FeatureAtom::Monomial { .. } => 0,
            FeatureAtom::Sin { .. } => 1,
            FeatureAtom::Cos { .. } => 2,
            FeatureAtom::Product { .. } => 3,
        }
    }

    /// Canonical order; product atoms compare equal so a stable sort keeps
    /// their insertion order.
    pub fn canonical_cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (FeatureAtom::Monomial { exponents: a }, FeatureAtom::Monomial { exponents: b }) => {
                let (da, db): (u32, u32) = (a.iter().sum(), b.iter().sum());
                da.cmp(&db).then_with(|| b.cmp(a))
            }
            (FeatureAtom::Sin { axis: a }, FeatureAtom::Sin { axis: b })
            | (FeatureAtom::Cos { axis: a }, FeatureAtom::Cos { axis: b }) => a.cmp(b),
            (FeatureAtom::Product { .. }, FeatureAtom::Product { .. }) => Ordering::Equal,
            _ => self.class_rank().cmp(&other.class_rank()),
        }
    }
}

fn monomial_value(exponents: &[u32], x: &[f64]) -> f64 {
    exponents.iter().zip(x).map(|(&e, &v)| math::powi(v, e)).product()
}

fn monomial_partial(exponents: &[u32], x: &[f64], j: usize) -> f64 {
    let ej = exponents[j];
    if ej == 0 {
        return 0.0;
    }
    let mut p = ej as f64 * math::powi(x[j], ej - 1);
    for (i, (&e, &v)) in exponents.iter().zip(x).enumerate() {
        if i != j {
            p *= math::powi(v, e);
        }
    }
    p
}

/// Evaluates `Σ coef · atom(x)`.
pub fn evaluate_terms(terms: &[Term], x: &[f64]) -> f64 {
    terms.iter().map(|t| t.coef * t.atom.evaluate(x)).sum()
}

/// Gradient of `Σ coef · atom(x)`.
pub fn gradient_terms(terms: &[Term], x: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    for t in terms {
        t.atom.accumulate_gradient(x, t.coef, &mut g);
    }
    g
}

/// Monomial expansion of `Σ coef · atom`, `None` if any atom is trig.
pub fn terms_as_polynomial(terms: &[Term]) -> Option<Polynomial> {
    let mut out = Vec::new();
    for t in terms {
        for (e, c) in t.atom.as_polynomial()? {
            out.push((e, c * t.coef));
        }
    }
    Some(out)
}

/// Ordered, duplicate-free dictionary of atoms over `Rⁿ`.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "crate::serde_impls::BasisRepr", into = "crate::serde_impls::BasisRepr"))]
pub struct FeatureBasis {
    dimension: usize,
    atoms: Vec<FeatureAtom>,
}

impl FeatureBasis {
    /// Validates, sorts into canonical order and removes duplicates.
    pub fn new(dimension: usize, atoms: Vec<FeatureAtom>) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::InvalidArgument("basis dimension must be at least 1".into()));
        }
        for a in &atoms {
            a.validate(dimension)?;
        }
        let mut unique: Vec<FeatureAtom> = Vec::with_capacity(atoms.len());
        for a in atoms {
            if !unique.contains(&a) {
                unique.push(a);
            }
        }
        unique.sort_by(FeatureAtom::canonical_cmp);
        Ok(Self { dimension, atoms: unique })
    }

    /// Re-validates a deserialized basis and restores canonical order.
    pub fn canonicalized(self) -> Result<Self> {
        Self::new(self.dimension, self.atoms)
    }

    /// Canonical basis of `atoms` together with the canonical position of
    /// each input atom. Duplicates are rejected because coefficients
    /// attached to them would be ambiguous.
    pub fn with_positions(dimension: usize, atoms: Vec<FeatureAtom>) -> Result<(Self, Vec<usize>)> {
        let basis = Self::new(dimension, atoms.clone())?;
        if basis.len() != atoms.len() {
            return Err(Error::InvalidArgument("basis contains duplicate atoms".into()));
        }
        let positions = atoms.iter().map(|a| basis.position(a).expect("atom kept")).collect();
        Ok((basis, positions))
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn atoms(&self) -> &[FeatureAtom] {
        &self.atoms
    }

    pub fn position(&self, atom: &FeatureAtom) -> Option<usize> {
        self.atoms.iter().position(|a| a == atom)
    }

    pub fn max_degree(&self) -> u32 {
        self.atoms.iter().filter_map(FeatureAtom::degree).max().unwrap_or(0)
    }

    /// True when every atom is a monomial.
    pub fn is_polynomial(&self) -> bool {
        self.atoms.iter().all(|a| a.as_polynomial().is_some())
    }

    /// True when every atom is a constant or a coordinate function.
    pub fn is_affine(&self) -> bool {
        self.atoms.iter().all(|a| matches!(a, FeatureAtom::Monomial { exponents } if exponents.iter().sum::<u32>() <= 1))
    }

    /// The same basis without its constant atom.
    pub fn without_constant(&self) -> Self {
        Self { dimension: self.dimension, atoms: self.atoms.iter().filter(|a| !a.is_constant()).cloned().collect() }
    }

    /// The basis with every artificial (product-extension) atom removed.
    pub fn without_artificial(&self) -> Self {
        Self { dimension: self.dimension, atoms: self.atoms.iter().filter(|a| !a.is_artificial()).cloned().collect() }
    }

    /// Appends atoms, keeping canonical order and uniqueness.
    pub fn extended(&self, extra: Vec<FeatureAtom>) -> Result<Self> {
        let mut atoms = self.atoms.clone();
        atoms.extend(extra);
        Self::new(self.dimension, atoms)
    }

    /// Feature values `b_k(x)`, length `m`.
    pub fn evaluate(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dimension, x.len(), "FeatureBasis::evaluate")?;
        let mut out = vec![0.0; self.atoms.len()];
        self.evaluate_into(x, &mut out);
        Ok(out)
    }

    /// Unchecked evaluation into a caller-provided buffer.
    pub(crate) fn evaluate_into(&self, x: &[f64], out: &mut [f64]) {
        for (o, a) in out.iter_mut().zip(&self.atoms) {
            *o = a.evaluate(x);
        }
    }

    /// Partial derivatives `∂b_k/∂x_j` as an `m × n` matrix.
    pub fn jacobian(&self, x: &[f64]) -> Result<Matrix> {
        check_dim(self.dimension, x.len(), "FeatureBasis::jacobian")?;
        let mut jac = Matrix::zeros(self.atoms.len(), self.dimension);
        for (k, a) in self.atoms.iter().enumerate() {
            a.accumulate_gradient(x, 1.0, jac.row_mut(k));
        }
        Ok(jac)
    }

    /// The `N × m` feature matrix of a dataset (row `i` is `evaluate(xᵢ)`).
    pub fn feature_matrix(&self, data: &Matrix) -> Result<Matrix> {
        check_dim(self.dimension, data.cols(), "FeatureBasis::feature_matrix")?;
        let m = self.atoms.len();
        let mut out = Matrix::zeros(data.rows(), m);
        for i in 0..data.rows() {
            self.evaluate_into(data.row(i), out.row_mut(i));
        }
        Ok(out)
    }
}

/// Exponent vectors of total degree exactly `degree` in `n` variables, in
/// descending lexicographic order.
pub fn monomials_of_degree(n: usize, degree: u32) -> Vec<Vec<u32>> {
    fn recurse(n: usize, remaining: u32, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if prefix.len() + 1 == n {
            prefix.push(remaining);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for e in (0..=remaining).rev() {
            prefix.push(e);
            recurse(n, remaining - e, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if n > 0 {
        recurse(n, degree, &mut Vec::with_capacity(n), &mut out);
    }
    out
}

/// All monomials of total degree `≤ max_degree`.
pub fn monomial_basis(n: usize, max_degree: u32, include_constant: bool) -> Result<FeatureBasis> {
    let start = if include_constant { 0 } else { 1 };
    let atoms = (start..=max_degree)
        .flat_map(|d| monomials_of_degree(n, d))
        .map(|exponents| FeatureAtom::Monomial { exponents })
        .collect();
    FeatureBasis::new(n, atoms)
}

/// Monomials of total degree in `min_degree..=max_degree`.
pub fn monomial_basis_range(n: usize, min_degree: u32, max_degree: u32) -> Result<FeatureBasis> {
    let atoms = (min_degree..=max_degree)
        .flat_map(|d| monomials_of_degree(n, d))
        .map(|exponents| FeatureAtom::Monomial { exponents })
        .collect();
    FeatureBasis::new(n, atoms)
}

/// `sin(x_j)` and `cos(x_j)` for every axis.
pub fn trig_atoms(n: usize) -> Vec<FeatureAtom> {
    (0..n).flat_map(|axis| [FeatureAtom::Sin { axis }, FeatureAtom::Cos { axis }]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_basis_order() {
        let b = monomial_basis(2, 2, true).unwrap();
        let expected: Vec<FeatureAtom> =
            [[0, 0], [1, 0], [0, 1], [2, 0], [1, 1], [0, 2]].iter().map(|e| FeatureAtom::monomial(e)).collect();
        assert_eq!(b.atoms(), expected.as_slice());
    }

    #[test]
    fn counts() {
        assert_eq!(monomial_basis(3, 1, true).unwrap().len(), 4);
        assert_eq!(monomial_basis(2, 3, false).unwrap().len(), 9);
        assert_eq!(monomial_basis(5, 2, true).unwrap().len(), 21);
    }

    #[test]
    fn evaluate_quadratic_at_point() {
        let b = monomial_basis(2, 2, true).unwrap();
        assert_eq!(b.evaluate(&[2.0, 3.0]).unwrap(), vec![1.0, 2.0, 3.0, 4.0, 6.0, 9.0]);
    }

    #[test]
    fn mixed_basis_evaluation() {
        let b = FeatureBasis::new(
            2,
            vec![FeatureAtom::Cos { axis: 1 }, FeatureAtom::Sin { axis: 0 }, FeatureAtom::coordinate(2, 0)],
        )
        .unwrap();
        assert_eq!(b.atoms()[0], FeatureAtom::coordinate(2, 0));
        assert_eq!(b.atoms()[1], FeatureAtom::Sin { axis: 0 });
        assert_eq!(b.evaluate(&[0.0, 0.0]).unwrap(), vec![0.0, 0.0, 1.0]);
    }

    #[test]
    fn jacobian_small_cases() {
        let b = FeatureBasis::new(2, vec![FeatureAtom::monomial(&[2, 0]), FeatureAtom::monomial(&[1, 1])]).unwrap();
        let j = b.jacobian(&[2.0, 3.0]).unwrap();
        assert_eq!(j.as_slice(), &[4.0, 0.0, 3.0, 2.0]);

        let s = FeatureBasis::new(3, vec![FeatureAtom::Sin { axis: 0 }]).unwrap();
        assert_eq!(s.jacobian(&[0.0, 0.7, -2.0]).unwrap().as_slice(), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn duplicates_removed_and_rejects_bad_atoms() {
        let b = FeatureBasis::new(2, vec![FeatureAtom::constant(2), FeatureAtom::constant(2)]).unwrap();
        assert_eq!(b.len(), 1);
        assert!(FeatureBasis::new(2, vec![FeatureAtom::Sin { axis: 2 }]).is_err());
        assert!(FeatureBasis::new(2, vec![FeatureAtom::monomial(&[1, 0, 0])]).is_err());
        assert!(b.evaluate(&[1.0]).is_err());
    }

    #[test]
    fn product_atom_value_and_expansion() {
        // x · (z − 1)
        let f = vec![Term::new(1.0, FeatureAtom::coordinate(3, 2)), Term::new(-1.0, FeatureAtom::constant(3))];
        let p = FeatureAtom::Product { monomial: vec![1, 0, 0], factor: f };
        assert_eq!(p.evaluate(&[2.0, 5.0, 4.0]), 6.0);
        assert_eq!(p.degree(), Some(2));
        let mut g = vec![0.0; 3];
        p.accumulate_gradient(&[2.0, 5.0, 4.0], 1.0, &mut g);
        assert_eq!(g, vec![3.0, 0.0, 2.0]);
        assert!(p.is_artificial());
    }
}
