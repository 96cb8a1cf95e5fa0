//! Similarity score between two vector fields: the mean over components of
//! `|⟨fᵢ, f̂ᵢ⟩| / (‖fᵢ‖ ‖f̂ᵢ‖)` with `L²` inner products over a box.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_dim, Error, Result};
use crate::features::Polynomial;
use crate::linalg::Matrix;
use crate::math;
use crate::rng::SeededRng;
use crate::vfield::VectorField;

/// Default Monte-Carlo sample count.
pub const DEFAULT_MC_SAMPLES: usize = 100_000;
/// Half-width added to axes along which the data do not vary.
const DEGENERATE_INFLATION: f64 = 1e-9;

/// The box `∏ [lowerᵢ, upperᵢ]`.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IntegrationDomain {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Axes whose data range was a single value and had to be widened.
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Vec::is_empty"))]
    pub degenerate_axes: Vec<usize>,
}

impl IntegrationDomain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        check_dim(lower.len(), upper.len(), "IntegrationDomain bounds")?;
        if lower.iter().zip(&upper).any(|(l, u)| !(l < u) || !l.is_finite() || !u.is_finite()) {
            return Err(Error::InvalidArgument("integration domain needs finite lower < upper on every axis".into()));
        }
        Ok(Self { lower, upper, degenerate_axes: Vec::new() })
    }

    /// `[-r, r]ⁿ`.
    pub fn symmetric(n: usize, r: f64) -> Result<Self> {
        Self::new(vec![-r; n], vec![r; n])
    }

    pub fn dimension(&self) -> usize {
        self.lower.len()
    }

    pub fn is_degenerate(&self) -> bool {
        !self.degenerate_axes.is_empty()
    }
}

/// Componentwise bounding box of the data rows.
pub fn domain_from_data(data: &Matrix) -> Result<IntegrationDomain> {
    if data.rows() < 2 {
        return Err(Error::InvalidArgument("a data domain needs at least two points".into()));
    }
    if !data.is_finite() {
        return Err(Error::InvalidArgument("data must be finite".into()));
    }
    let n = data.cols();
    let mut lower = vec![f64::INFINITY; n];
    let mut upper = vec![f64::NEG_INFINITY; n];
    for i in 0..data.rows() {
        for (j, v) in data.row(i).iter().enumerate() {
            lower[j] = lower[j].min(*v);
            upper[j] = upper[j].max(*v);
        }
    }
    let mut degenerate_axes = Vec::new();
    for j in 0..n {
        if lower[j] >= upper[j] {
            let pad = DEGENERATE_INFLATION * (1.0 + lower[j].abs());
            lower[j] -= pad;
            upper[j] += pad;
            degenerate_axes.push(j);
        }
    }
    Ok(IntegrationDomain { lower, upper, degenerate_axes })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum SimilarityMethod {
    /// Closed-form monomial integration (polynomial fields only).
    Analytic,
    /// Uniform sampling over the box.
    MonteCarlo { samples: usize, seed: u64 },
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SimilarityReport {
    pub per_component: Vec<f64>,
    pub aggregate: f64,
    pub method: String,
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Option::is_none"))]
    pub mc_samples: Option<usize>,
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Option::is_none"))]
    pub mc_seed: Option<u64>,
    pub domain: IntegrationDomain,
    /// Components where at least one field vanished identically and the
    /// zero-norm convention (both zero → 1, one zero → 0) was applied.
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Vec::is_empty"))]
    pub zero_norm_components: Vec<usize>,
}

/// `∫_lo^hi x^p dx`.
pub fn monomial_integral(p: u32, lo: f64, hi: f64) -> f64 {
    (math::powi(hi, p + 1) - math::powi(lo, p + 1)) / (p + 1) as f64
}

fn polynomial_inner(a: &Polynomial, b: &Polynomial, domain: &IntegrationDomain) -> f64 {
    let mut total = 0.0;
    for (ea, ca) in a {
        for (eb, cb) in b {
            let mut term = ca * cb;
            for (axis, (pa, pb)) in ea.iter().zip(eb).enumerate() {
                term *= monomial_integral(pa + pb, domain.lower[axis], domain.upper[axis]);
            }
            total += term;
        }
    }
    total
}

fn cosine(inner: f64, norm_a2: f64, norm_b2: f64) -> (f64, bool) {
    let za = !(norm_a2 > 0.0);
    let zb = !(norm_b2 > 0.0);
    match (za, zb) {
        (true, true) => (1.0, true),
        (true, false) | (false, true) => (0.0, true),
        _ => ((inner.abs() / math::sqrt(norm_a2 * norm_b2)).min(1.0), false),
    }
}

/// Similarity of two fields over `domain`. `method = None` chooses the
/// analytic path when both fields are polynomial and Monte-Carlo with
/// [`DEFAULT_MC_SAMPLES`] samples (seed 0) otherwise.
pub fn similarity(
    truth: &dyn VectorField,
    estimate: &dyn VectorField,
    domain: &IntegrationDomain,
    method: Option<SimilarityMethod>,
) -> Result<SimilarityReport> {
    let n = truth.dimension();
    check_dim(n, estimate.dimension(), "similarity fields")?;
    check_dim(n, domain.dimension(), "similarity domain")?;
    let polys = truth.polynomial_components().zip(estimate.polynomial_components());
    let method = match method {
        Some(m) => m,
        None if polys.is_some() => SimilarityMethod::Analytic,
        None => SimilarityMethod::MonteCarlo { samples: DEFAULT_MC_SAMPLES, seed: 0 },
    };

    let mut inner = vec![0.0; n];
    let mut na = vec![0.0; n];
    let mut nb = vec![0.0; n];
    let (label, mc_samples, mc_seed) = match method {
        SimilarityMethod::Analytic => {
            let (pa, pb) = polys.ok_or(Error::UnsupportedAnalytic)?;
            for i in 0..n {
                inner[i] = polynomial_inner(&pa[i], &pb[i], domain);
                na[i] = polynomial_inner(&pa[i], &pa[i], domain);
                nb[i] = polynomial_inner(&pb[i], &pb[i], domain);
            }
            ("analytic", None, None)
        }
        SimilarityMethod::MonteCarlo { samples, seed } => {
            if samples == 0 {
                return Err(Error::InvalidArgument("Monte-Carlo similarity needs at least one sample".into()));
            }
            let mut rng = SeededRng::new(seed);
            let mut x = vec![0.0; n];
            for _ in 0..samples {
                for (j, v) in x.iter_mut().enumerate() {
                    *v = rng.uniform_in(domain.lower[j], domain.upper[j]);
                }
                let a = truth.components_at(&x);
                let b = estimate.components_at(&x);
                for i in 0..n {
                    inner[i] += a[i] * b[i];
                    na[i] += a[i] * a[i];
                    nb[i] += b[i] * b[i];
                }
            }
            ("monte-carlo", Some(samples), Some(seed))
        }
    };

    let mut per_component = Vec::with_capacity(n);
    let mut zero_norm_components = Vec::new();
    for i in 0..n {
        let (c, zero) = cosine(inner[i], na[i], nb[i]);
        if zero {
            zero_norm_components.push(i);
        }
        per_component.push(c);
    }
    let aggregate = per_component.iter().sum::<f64>() / n as f64;
    Ok(SimilarityReport {
        per_component,
        aggregate,
        method: label.into(),
        mc_samples,
        mc_seed,
        domain: domain.clone(),
        zero_norm_components,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vfield::BasisVectorField;

    #[test]
    fn unit_interval_integrals() {
        for p in 0..=8 {
            assert!((monomial_integral(p, 0.0, 1.0) - 1.0 / (p + 1) as f64).abs() < 1e-15);
        }
    }

    #[test]
    fn data_box() {
        let d = domain_from_data(&Matrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 2.0])).unwrap();
        assert_eq!((d.lower.clone(), d.upper.clone()), (vec![0.0, 0.0], vec![1.0, 2.0]));
        assert!(!d.is_degenerate());
        let d = domain_from_data(&Matrix::from_row_slice(2, 2, &[3.0, 1.0, 3.0, 1.0])).unwrap();
        assert_eq!(d.degenerate_axes, vec![0, 1]);
        assert!(d.lower[0] < 3.0 && d.upper[0] > 3.0);
    }

    #[test]
    fn rotation_versus_dilation_is_zero() {
        let rot = BasisVectorField::from_monomials(2, &[&[(-1.0, &[0, 1])], &[(1.0, &[1, 0])]]).unwrap();
        let dil = BasisVectorField::from_monomials(2, &[&[(1.0, &[1, 0])], &[(1.0, &[0, 1])]]).unwrap();
        let dom = IntegrationDomain::symmetric(2, 1.0).unwrap();
        let r = similarity(&rot, &dil, &dom, None).unwrap();
        assert_eq!(r.aggregate, 0.0);
        assert_eq!(r.method, "analytic");
    }

    #[test]
    fn zero_norm_conventions() {
        let dx = BasisVectorField::from_monomials(2, &[&[(1.0, &[0, 0])], &[]]).unwrap();
        let dy = BasisVectorField::from_monomials(2, &[&[], &[(1.0, &[0, 0])]]).unwrap();
        let dom = IntegrationDomain::symmetric(2, 1.0).unwrap();
        let same = similarity(&dx, &dx, &dom, None).unwrap();
        assert_eq!(same.per_component, vec![1.0, 1.0]);
        let other = similarity(&dx, &dy, &dom, None).unwrap();
        assert_eq!(other.per_component, vec![0.0, 0.0]);
        assert_eq!(other.zero_norm_components, vec![0, 1]);
    }

    #[test]
    fn analytic_needs_polynomials() {
        use crate::features::{FeatureAtom, Term};
        let trig = BasisVectorField::new(1, vec![vec![Term::new(1.0, FeatureAtom::Sin { axis: 0 })]]).unwrap();
        let dom = IntegrationDomain::symmetric(1, 1.0).unwrap();
        assert_eq!(
            similarity(&trig, &trig, &dom, Some(SimilarityMethod::Analytic)).unwrap_err(),
            Error::UnsupportedAnalytic
        );
        let r = similarity(&trig, &trig, &dom, None).unwrap();
        assert_eq!(r.method, "monte-carlo");
        assert!((r.aggregate - 1.0).abs() < 1e-12);
    }
}
