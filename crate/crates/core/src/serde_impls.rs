//! Serialized forms of the model types. Deserialization goes through the
//! validating constructors, and coefficient vectors are re-ordered along
//! with their basis atoms when a file lists atoms in a non-canonical order.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::features::{FeatureAtom, FeatureBasis};
use crate::linalg::Matrix;
use crate::model_fit::{KdeModel, LevelSetModel, ScalarFunctionModel};
use crate::vfield::VectorFieldModel;

#[derive(Serialize, Deserialize)]
pub(crate) struct MatrixRepr {
    rows: usize,
    cols: usize,
    /// Row-major entries.
    data: Vec<f64>,
}

impl From<Matrix> for MatrixRepr {
    fn from(m: Matrix) -> Self {
        Self { rows: m.rows(), cols: m.cols(), data: m.as_slice().to_vec() }
    }
}

impl TryFrom<MatrixRepr> for Matrix {
    type Error = Error;

    fn try_from(r: MatrixRepr) -> Result<Self> {
        let expected = r.rows.checked_mul(r.cols).ok_or_else(|| Error::InvalidArgument("matrix too large".into()))?;
        check_dim(expected, r.data.len(), "matrix data length")?;
        Ok(Matrix::from_vec(r.rows, r.cols, r.data))
    }
}

#[derive(Serialize, Deserialize)]
pub(crate) struct BasisRepr {
    dimension: usize,
    atoms: Vec<FeatureAtom>,
}

impl From<FeatureBasis> for BasisRepr {
    fn from(b: FeatureBasis) -> Self {
        Self { dimension: b.dimension(), atoms: b.atoms().to_vec() }
    }
}

impl TryFrom<BasisRepr> for FeatureBasis {
    type Error = Error;

    fn try_from(r: BasisRepr) -> Result<Self> {
        FeatureBasis::new(r.dimension, r.atoms)
    }
}

/// Moves coefficient vectors written in file atom order into the canonical
/// order of the resolved basis.
struct Reorder {
    positions: Vec<usize>,
}

impl Reorder {
    fn apply(&self, values: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.positions.len(), values.len(), "coefficient vector length")?;
        let mut out = alloc::vec![0.0; values.len()];
        for (v, &k) in values.iter().zip(&self.positions) {
            out[k] = *v;
        }
        Ok(out)
    }
}

impl BasisRepr {
    fn resolve(self) -> Result<(FeatureBasis, Reorder)> {
        let (basis, positions) = FeatureBasis::with_positions(self.dimension, self.atoms)?;
        Ok((basis, Reorder { positions }))
    }
}

#[derive(Serialize, Deserialize)]
pub(crate) struct ScalarRepr {
    basis: BasisRepr,
    coefficients: Vec<f64>,
}

impl From<ScalarFunctionModel> for ScalarRepr {
    fn from(m: ScalarFunctionModel) -> Self {
        Self { coefficients: m.coefficients().to_vec(), basis: m.basis().clone().into() }
    }
}

impl TryFrom<ScalarRepr> for ScalarFunctionModel {
    type Error = Error;

    fn try_from(r: ScalarRepr) -> Result<Self> {
        let (basis, reorder) = r.basis.resolve()?;
        let coefficients = reorder.apply(&r.coefficients)?;
        ScalarFunctionModel::new(basis, coefficients)
    }
}

#[derive(Serialize, Deserialize)]
pub(crate) struct LevelSetRepr {
    basis: BasisRepr,
    /// One coefficient vector per component.
    components: Vec<Vec<f64>>,
}

impl From<LevelSetModel> for LevelSetRepr {
    fn from(m: LevelSetModel) -> Self {
        Self { components: m.coefficients().columns(), basis: m.basis().clone().into() }
    }
}

impl TryFrom<LevelSetRepr> for LevelSetModel {
    type Error = Error;

    fn try_from(r: LevelSetRepr) -> Result<Self> {
        let (basis, reorder) = r.basis.resolve()?;
        if r.components.is_empty() {
            return Ok(LevelSetModel::empty(basis));
        }
        let columns = r.components.iter().map(|c| reorder.apply(c)).collect::<Result<Vec<_>>>()?;
        LevelSetModel::new(basis, Matrix::from_columns(&columns)?)
    }
}

#[derive(Serialize, Deserialize)]
pub(crate) struct KdeRepr {
    centers: Matrix,
    weights: Vec<f64>,
    bandwidth: f64,
}

impl From<KdeModel> for KdeRepr {
    fn from(k: KdeModel) -> Self {
        Self { centers: k.centers().clone(), weights: k.weights().to_vec(), bandwidth: k.bandwidth() }
    }
}

impl TryFrom<KdeRepr> for KdeModel {
    type Error = Error;

    fn try_from(r: KdeRepr) -> Result<Self> {
        KdeModel::new(r.centers, r.weights, r.bandwidth)
    }
}

#[derive(Serialize, Deserialize)]
pub(crate) struct FieldModelRepr {
    dimension: usize,
    basis: BasisRepr,
    /// `columns[j][i]` is the coefficient block of component `i` of field `j`.
    columns: Vec<Vec<Vec<f64>>>,
}

impl From<VectorFieldModel> for FieldModelRepr {
    fn from(m: VectorFieldModel) -> Self {
        let columns = (0..m.field_count()).map(|j| m.blocks(j)).collect();
        Self { dimension: m.dimension(), basis: m.basis().clone().into(), columns }
    }
}

impl TryFrom<FieldModelRepr> for VectorFieldModel {
    type Error = Error;

    fn try_from(r: FieldModelRepr) -> Result<Self> {
        let (basis, reorder) = r.basis.resolve()?;
        check_dim(r.dimension, basis.dimension(), "vector field dimension")?;
        let columns = r
            .columns
            .iter()
            .map(|blocks| blocks.iter().map(|b| reorder.apply(b)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        VectorFieldModel::from_blocks(basis, &columns)
    }
}
