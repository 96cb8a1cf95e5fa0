//! Estimation of the functions whose symmetries are sought: regression
//! targets, level sets `F(x) = 0` of the data, and kernel densities.

mod kde;
mod levelset;

pub use kde::{kde_fit, Bandwidth, KdeModel};
pub use levelset::{
    elbow_select, extend_degenerate_columns, fit_level_set, fit_level_set_extended, project_onto_affine,
    select_components_elbow, AffineFrame, ElbowSearch, ElbowTrace, LevelSetFit, LevelSetModel,
    DEFAULT_ELBOW_RATIO,
};

use alloc::vec::Vec;

use crate::error::{check_dim, Error, Result};
use crate::features::{FeatureBasis, Polynomial, Term};
use crate::linalg::{least_squares, Matrix};

/// `f(x) = Σ aₖ bₖ(x)` over a feature basis.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(
    feature = "serde",
    serde(try_from = "crate::serde_impls::ScalarRepr", into = "crate::serde_impls::ScalarRepr")
)]
pub struct ScalarFunctionModel {
    basis: FeatureBasis,
    coefficients: Vec<f64>,
}

impl ScalarFunctionModel {
    pub fn new(basis: FeatureBasis, coefficients: Vec<f64>) -> Result<Self> {
        check_dim(basis.len(), coefficients.len(), "ScalarFunctionModel coefficients")?;
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument("model coefficients must be finite".into()));
        }
        Ok(Self { basis, coefficients })
    }

    /// Builds a model from explicit terms; the basis is the set of atoms used.
    pub fn from_terms(dimension: usize, terms: &[Term]) -> Result<Self> {
        let basis = FeatureBasis::new(dimension, terms.iter().map(|t| t.atom.clone()).collect())?;
        let mut coefficients = alloc::vec![0.0; basis.len()];
        for t in terms {
            let k = basis.position(&t.atom).expect("atom present in its own basis");
            coefficients[k] += t.coef;
        }
        Self::new(basis, coefficients)
    }

    pub fn basis(&self) -> &FeatureBasis {
        &self.basis
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn dimension(&self) -> usize {
        self.basis.dimension()
    }

    pub fn value(&self, x: &[f64]) -> Result<f64> {
        let b = self.basis.evaluate(x)?;
        Ok(crate::math::dot(&b, &self.coefficients))
    }

    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dimension(), x.len(), "ScalarFunctionModel::gradient")?;
        let mut g = alloc::vec![0.0; x.len()];
        for (atom, c) in self.basis.atoms().iter().zip(&self.coefficients) {
            if *c != 0.0 {
                atom.accumulate_gradient(x, *c, &mut g);
            }
        }
        Ok(g)
    }

    /// Values at every data row.
    pub fn values(&self, data: &Matrix) -> Result<Vec<f64>> {
        Ok(self.basis.feature_matrix(data)?.mul_vec(&self.coefficients))
    }

    /// Nonzero `coef · atom` terms.
    pub fn terms(&self) -> Vec<Term> {
        self.basis
            .atoms()
            .iter()
            .zip(&self.coefficients)
            .filter(|(_, c)| **c != 0.0)
            .map(|(a, c)| Term::new(*c, a.clone()))
            .collect()
    }

    pub fn as_polynomial(&self) -> Option<Polynomial> {
        crate::features::terms_as_polynomial(&self.terms())
    }

    /// Highest degree among atoms with `|coef| > tol`; `None` if such an
    /// atom is not polynomial.
    pub fn effective_degree(&self, tol: f64) -> Option<u32> {
        let mut deg = 0;
        for (a, c) in self.basis.atoms().iter().zip(&self.coefficients) {
            if c.abs() > tol {
                deg = deg.max(a.degree()?);
            }
        }
        Some(deg)
    }
}

/// Result of an ordinary least-squares fit.
#[derive(Clone, Debug, PartialEq)]
pub struct RegressionFit {
    pub model: ScalarFunctionModel,
    /// Root-mean-square training residual.
    pub rms_residual: f64,
    /// The feature matrix was rank deficient; the minimum-norm coefficients
    /// were returned.
    pub rank_deficient: bool,
}

/// Ordinary least squares of `targets` on the basis features.
pub fn fit_regression(data: &Matrix, targets: &[f64], basis: &FeatureBasis) -> Result<RegressionFit> {
    check_dim(data.rows(), targets.len(), "fit_regression targets")?;
    if !data.is_finite() || targets.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidArgument("regression inputs must be finite".into()));
    }
    let features = basis.feature_matrix(data)?;
    let ls = least_squares(&features, targets)?;
    Ok(RegressionFit {
        model: ScalarFunctionModel::new(basis.clone(), ls.solution)?,
        rms_residual: ls.rms_residual,
        rank_deficient: ls.rank_deficient,
    })
}
