//! Discovery of continuous and discrete symmetries of functions estimated
//! from tabular data.
//!
//! The pipeline has three stages. First a function of interest is fitted:
//! a regression target, a level set `F(x) = 0` containing the data, or a
//! kernel density. Then vector fields `X = αⁱ∂ᵢ` with `X(f) = 0` on the data
//! are estimated by constrained regression over polynomial coefficient
//! functions; these are the infinitesimal generators of the symmetries.
//! Finally the fields are used to find invariant features `h` with
//! `X(h) = 0` and flow parameters `θ` with `X(θ) = 1`.
//!
//! The crate is `no_std` (it needs `alloc`); file formats and the
//! command-line front end live in the `symfield` crate.

#![no_std]
// `!(a < b)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod datasets;
pub mod discrete;
pub mod error;
pub mod features;
pub mod geometry;
pub mod linalg;
pub mod manifold_opt;
pub mod math;
pub mod model_fit;
pub mod rng;
#[cfg(feature = "serde")]
mod serde_impls;
pub mod similarity;
pub mod vfield;

pub use error::{Error, Result};
pub use features::{monomial_basis, FeatureAtom, FeatureBasis, Term};
pub use linalg::Matrix;
pub use manifold_opt::{Algorithm, Loss, OptimizationTrace, OptimizerConfig, OrthonormalPoint};
pub use model_fit::{KdeModel, LevelSetModel, ScalarFunctionModel};
pub use vfield::{BasisVectorField, VectorField, VectorFieldModel};


