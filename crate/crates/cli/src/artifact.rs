//! JSON files exchanged between commands. Every file is an object whose
//! `"type"` key names the variant.

use std::fs::File;
use std::io::{self, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use symfield_core::discrete::DiscreteFitResult;
use symfield_core::geometry::SmoothMapModel;
use symfield_core::model_fit::{AffineFrame, ElbowTrace};
use symfield_core::vfield::ComponentFamily;
use symfield_core::{
    BasisVectorField, KdeModel, LevelSetModel, Matrix, OptimizerConfig, ScalarFunctionModel, VectorFieldModel,
};

use crate::error::{CliError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Artifact {
    /// A fitted regression function.
    Scalar {
        model: ScalarFunctionModel,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rms_residual: Option<f64>,
    },
    /// Components of a level set `F(x) = 0`. When `frame` is present the
    /// model lives in the coordinates of that affine frame and `affine`
    /// holds the components that cut it out of the ambient space.
    Levelset {
        model: LevelSetModel,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        loss: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        elbow: Option<ElbowTrace>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        frame: Option<AffineFrame>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        affine: Option<LevelSetModel>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        optimizer: Option<OptimizerConfig>,
    },
    Kde {
        model: KdeModel,
    },
    /// Fitted annihilating vector fields sharing one basis.
    VectorFields {
        model: VectorFieldModel,
        loss: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        family: Option<ComponentFamily>,
        /// `(family, final loss)` of every escalation attempt.
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        attempts: Vec<(ComponentFamily, f64)>,
        #[serde(default)]
        threshold_missed: bool,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        frame: Option<AffineFrame>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        optimizer: Option<OptimizerConfig>,
    },
    /// Fields written out as explicit expressions.
    ClosedForm {
        fields: Vec<BasisVectorField>,
    },
    /// A unit-norm combination of supplied basis fields.
    Combination {
        coefficients: Vec<f64>,
        field: BasisVectorField,
        loss: f64,
    },
    Invariants {
        invariants: Vec<ScalarFunctionModel>,
        loss: f64,
        correlations: Matrix,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        optimizer: Option<OptimizerConfig>,
    },
    FlowParameter {
        model: ScalarFunctionModel,
        rms_residual: f64,
        no_polynomial_flow_parameter: bool,
    },
    Map {
        map: SmoothMapModel,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        rms_residuals: Vec<f64>,
    },
    Discrete {
        family: String,
        #[serde(flatten)]
        result: DiscreteFitResult,
        matrix: Matrix,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        generator_similarity: Option<f64>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        local_minima: Vec<(f64, f64, f64)>,
    },
}

impl Artifact {
    pub fn kind(&self) -> &'static str {
        match self {
            Artifact::Scalar { .. } => "scalar",
            Artifact::Levelset { .. } => "levelset",
            Artifact::Kde { .. } => "kde",
            Artifact::VectorFields { .. } => "vector-fields",
            Artifact::ClosedForm { .. } => "closed-form",
            Artifact::Combination { .. } => "combination",
            Artifact::Invariants { .. } => "invariants",
            Artifact::FlowParameter { .. } => "flow-parameter",
            Artifact::Map { .. } => "map",
            Artifact::Discrete { .. } => "discrete",
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
        let artifact: Artifact =
            serde_json::from_str(&text).map_err(|source| CliError::Json { path: path.to_path_buf(), source })?;
        artifact.validate()?;
        Ok(artifact)
    }

    /// Checks the derived (unvalidated) parts of closed-form fields.
    fn validate(&self) -> Result<()> {
        let check = |f: &BasisVectorField| BasisVectorField::new(f.dimension, f.components.clone()).map(|_| ());
        match self {
            Artifact::ClosedForm { fields } => fields.iter().try_for_each(check)?,
            Artifact::Combination { field, .. } => check(field)?,
            Artifact::Map { map, .. } => {
                SmoothMapModel::new(map.components().to_vec())?;
            }
            _ => {}
        }
        if let Some(frame) = self.frame() {
            if frame.origin.len() != frame.basis.rows() {
                return Err(CliError::invalid("affine frame origin and basis disagree in dimension"));
            }
        }
        Ok(())
    }

    /// Scalar functions held by the file, for commands that evaluate them.
    pub fn scalar_functions(&self) -> Result<Vec<ScalarFunctionModel>> {
        match self {
            Artifact::Scalar { model, .. } | Artifact::FlowParameter { model, .. } => Ok(vec![model.clone()]),
            Artifact::Invariants { invariants, .. } => Ok(invariants.clone()),
            Artifact::Levelset { model, .. } => Ok(model.components()),
            Artifact::Map { map, .. } => Ok(map.components().to_vec()),
            other => Err(CliError::invalid(format!("a {} file holds no scalar functions", other.kind()))),
        }
    }

    /// Vector fields held by the file, as explicit expressions.
    pub fn vector_fields(&self) -> Result<Vec<BasisVectorField>> {
        match self {
            Artifact::VectorFields { model, .. } => Ok((0..model.field_count()).map(|j| model.to_basis_field(j)).collect()),
            Artifact::ClosedForm { fields } => Ok(fields.clone()),
            Artifact::Combination { field, .. } => Ok(vec![field.clone()]),
            other => Err(CliError::invalid(format!("a {} file holds no vector fields", other.kind()))),
        }
    }

    /// The affine frame whose coordinates the file's functions use, if any.
    pub fn frame(&self) -> Option<&AffineFrame> {
        match self {
            Artifact::Levelset { frame, .. } | Artifact::VectorFields { frame, .. } => frame.as_ref(),
            _ => None,
        }
    }
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("artifacts serialize");
    s.push('\n');
    s
}

/// Writes `value` as pretty JSON to `path`, or to standard output.
pub fn write_json<T: Serialize>(path: Option<&Path>, value: &T) -> Result<()> {
    let text = to_json(value);
    match path {
        Some(p) => {
            let mut f = File::create(p).map_err(|source| CliError::Io { path: p.to_path_buf(), source })?;
            f.write_all(text.as_bytes()).map_err(|source| CliError::Io { path: p.to_path_buf(), source })
        }
        None => io::stdout().lock().write_all(text.as_bytes()).map_err(|source| CliError::Io { path: "<stdout>".into(), source }),
    }
}
