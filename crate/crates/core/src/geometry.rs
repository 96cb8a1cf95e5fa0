//! Maps between coordinate systems and the metrics they pull back.

use alloc::vec::Vec;

use crate::error::{check_dim, Error, Result};
use crate::features::FeatureBasis;
use crate::linalg::Matrix;
use crate::model_fit::{fit_regression, ScalarFunctionModel};

/// `Θ: Rᵐ → Rⁿ`, one scalar model per output coordinate.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SmoothMapModel {
    components: Vec<ScalarFunctionModel>,
}

impl SmoothMapModel {
    pub fn new(components: Vec<ScalarFunctionModel>) -> Result<Self> {
        let m = components
            .first()
            .ok_or_else(|| Error::InvalidArgument("a map needs at least one output component".into()))?
            .dimension();
        for c in &components {
            check_dim(m, c.dimension(), "SmoothMapModel component input dimension")?;
        }
        Ok(Self { components })
    }

    pub fn components(&self) -> &[ScalarFunctionModel] {
        &self.components
    }

    pub fn input_dimension(&self) -> usize {
        self.components[0].dimension()
    }

    pub fn output_dimension(&self) -> usize {
        self.components.len()
    }

    pub fn evaluate(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.components.iter().map(|c| c.value(u)).collect()
    }

    /// `n × m` Jacobian at `u`.
    pub fn jacobian(&self, u: &[f64]) -> Result<Matrix> {
        let rows = self.components.iter().map(|c| c.gradient(u)).collect::<Result<Vec<_>>>()?;
        Matrix::from_rows(&rows)
    }
}

/// Per-output least-squares fit of `image ≈ Θ(source)`.
#[derive(Clone, Debug)]
pub struct MapFit {
    pub map: SmoothMapModel,
    /// RMS residual of each output coordinate.
    pub rms_residuals: Vec<f64>,
}

pub fn fit_map(source: &Matrix, image: &Matrix, basis: &FeatureBasis) -> Result<MapFit> {
    check_dim(source.rows(), image.rows(), "fit_map paired rows")?;
    check_dim(basis.dimension(), source.cols(), "fit_map basis dimension")?;
    let mut components = Vec::with_capacity(image.cols());
    let mut rms_residuals = Vec::with_capacity(image.cols());
    for j in 0..image.cols() {
        let fit = fit_regression(source, &image.column(j), basis)?;
        rms_residuals.push(fit.rms_residual);
        components.push(fit.model);
    }
    Ok(MapFit { map: SmoothMapModel::new(components)?, rms_residuals })
}

/// The metric `g(u) = J_Θ(u)ᵀ J_Θ(u)` induced on the source coordinates
/// by the Euclidean metric of the image.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricModel {
    pub map: SmoothMapModel,
}

impl MetricModel {
    pub fn at(&self, u: &[f64]) -> Result<Matrix> {
        pullback_metric(&self.map, u)
    }
}

pub fn pullback_metric(map: &SmoothMapModel, u: &[f64]) -> Result<Matrix> {
    check_dim(map.input_dimension(), u.len(), "pullback_metric point")?;
    if u.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("pullback point must be finite".into()));
    }
    let j = map.jacobian(u)?;
    let mut g = j.tr_matmul(&j);
    // Enforce exact symmetry against rounding in the accumulation order.
    let m = g.rows();
    for a in 0..m {
        for b in a + 1..m {
            let s = 0.5 * (g[(a, b)] + g[(b, a)]);
            g[(a, b)] = s;
            g[(b, a)] = s;
        }
    }
    Ok(g)
}
