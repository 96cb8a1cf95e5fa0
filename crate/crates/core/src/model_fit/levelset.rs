//! Level-set estimation: orthonormal coefficient columns `W` with `B·W ≈ 0`
//! for the feature matrix `B` of the data.

use alloc::vec;
use alloc::vec::Vec;

use super::ScalarFunctionModel;
use crate::error::{check_dim, Error, Result};
use crate::features::{monomials_of_degree, FeatureAtom, FeatureBasis};
use crate::linalg::{symmetric_eigen, thin_qr, Matrix};
use crate::manifold_opt::{self, OptimizationTrace, OptimizerConfig, ORTHONORMAL_TOL};
use crate::math;

/// Default loss ratio that counts as an elbow.
pub const DEFAULT_ELBOW_RATIO: f64 = 10.0;
/// Losses below this fraction of the largest loss are treated as zero when
/// computing ratios.
const ELBOW_RELATIVE_FLOOR: f64 = 1e-12;

/// `F = (f₁, …, f_k)` with `f_j = Σ W_kj b_k`, columns orthonormal.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(
    feature = "serde",
    serde(try_from = "crate::serde_impls::LevelSetRepr", into = "crate::serde_impls::LevelSetRepr")
)]
pub struct LevelSetModel {
    basis: FeatureBasis,
    w: Matrix,
}

impl LevelSetModel {
    pub fn new(basis: FeatureBasis, w: Matrix) -> Result<Self> {
        check_dim(basis.len(), w.rows(), "LevelSetModel rows")?;
        if w.cols() > 0 {
            let defect = manifold_opt::orthonormality_defect(&w);
            if defect > ORTHONORMAL_TOL {
                return Err(Error::InvalidArgument(alloc::format!(
                    "level-set columns are not orthonormal (defect {defect:e})"
                )));
            }
        }
        Ok(Self { basis, w })
    }

    /// A model with no components (the whole space).
    pub fn empty(basis: FeatureBasis) -> Self {
        let m = basis.len();
        Self { basis, w: Matrix::zeros(m, 0) }
    }

    pub fn basis(&self) -> &FeatureBasis {
        &self.basis
    }

    pub fn coefficients(&self) -> &Matrix {
        &self.w
    }

    pub fn components_count(&self) -> usize {
        self.w.cols()
    }

    pub fn dimension(&self) -> usize {
        self.basis.dimension()
    }

    pub fn component(&self, j: usize) -> ScalarFunctionModel {
        ScalarFunctionModel::new(self.basis.clone(), self.w.column(j)).expect("column length matches basis")
    }

    pub fn components(&self) -> Vec<ScalarFunctionModel> {
        (0..self.w.cols()).map(|j| self.component(j)).collect()
    }

    /// `F(x)`, length `k`.
    pub fn values(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.w.tr_mul_vec(&self.basis.evaluate(x)?))
    }

    /// Jacobian of `F` at `x`, shape `k × n`.
    pub fn jacobian(&self, x: &[f64]) -> Result<Matrix> {
        Ok(self.w.tr_matmul(&self.basis.jacobian(x)?))
    }

    /// Drops artificial (product-extension) atoms and re-orthonormalises the
    /// surviving columns. Columns that lived entirely on artificial atoms
    /// are discarded.
    pub fn without_artificial(&self) -> Result<Self> {
        let keep: Vec<usize> = (0..self.basis.len()).filter(|&k| !self.basis.atoms()[k].is_artificial()).collect();
        let basis = self.basis.without_artificial();
        let reduced = self.w.select_rows(&keep);
        let cols: Vec<usize> = (0..reduced.cols()).filter(|&j| math::norm(&reduced.column(j)) > 1e-8).collect();
        if cols.is_empty() {
            return Ok(Self::empty(basis));
        }
        let kept = reduced.select_columns(&cols);
        let f = thin_qr(&kept, 1e-10);
        let mut q = f.q;
        manifold_opt::canonical_signs(&mut q);
        Self::new(basis, q)
    }
}

/// A fitted level set with its optimisation trace.
#[derive(Clone, Debug)]
pub struct LevelSetFit {
    pub model: LevelSetModel,
    pub trace: OptimizationTrace,
}

/// Fits `k` orthonormal level-set components over `basis`.
pub fn fit_level_set(data: &Matrix, basis: &FeatureBasis, k: usize, config: &OptimizerConfig) -> Result<LevelSetFit> {
    if k == 0 || k > basis.len() {
        return Err(Error::InvalidArgument(alloc::format!("need 1 ≤ k ≤ {}, got {k}", basis.len())));
    }
    let b = basis.feature_matrix(data)?;
    let (w, trace) = manifold_opt::minimize(&b, k, config, None)?;
    Ok(LevelSetFit { model: LevelSetModel::new(basis.clone(), w.into_matrix())?, trace })
}

/// Loss per component count and the count chosen before the first jump.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ElbowTrace {
    /// `(component_count, final_loss)` for counts `1..=k_max`.
    pub entries: Vec<(usize, f64)>,
    pub selected: usize,
    /// No jump larger than the ratio was seen; `selected == k_max`.
    pub no_elbow: bool,
}

/// Applies the elbow rule to `losses[k-1] = loss(k)`.
///
/// Returns the count immediately before the first `k` with
/// `loss(k+1) / max(loss(k), floor) > ratio`, where the floor is a tiny
/// fraction of the largest loss (so the rule is scale invariant).
pub fn elbow_select(losses: &[f64], ratio: f64) -> (usize, bool) {
    let largest = losses.iter().cloned().fold(0.0, f64::max);
    let floor = (ELBOW_RELATIVE_FLOOR * largest).max(f64::MIN_POSITIVE);
    for k in 1..losses.len() {
        if losses[k] / losses[k - 1].max(floor) > ratio {
            return (k, false);
        }
    }
    (losses.len(), true)
}

/// Level-set fits for `k = 1..=k_max` with the elbow choice.
#[derive(Clone, Debug)]
pub struct ElbowSearch {
    pub trace: ElbowTrace,
    pub fits: Vec<LevelSetFit>,
}

impl ElbowSearch {
    pub fn selected_model(&self) -> &LevelSetModel {
        &self.fits[self.trace.selected - 1].model
    }
}

pub fn select_components_elbow(
    data: &Matrix,
    basis: &FeatureBasis,
    k_max: usize,
    config: &OptimizerConfig,
    elbow_ratio: f64,
) -> Result<ElbowSearch> {
    if !(elbow_ratio > 0.0) {
        return Err(Error::InvalidArgument("elbow ratio must be positive".into()));
    }
    if k_max == 0 || k_max > basis.len() {
        return Err(Error::InvalidArgument(alloc::format!("need 1 ≤ k_max ≤ {}, got {k_max}", basis.len())));
    }
    let b = basis.feature_matrix(data)?;
    let mut fits = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        let (w, trace) = manifold_opt::minimize(&b, k, config, None)?;
        fits.push(LevelSetFit { model: LevelSetModel::new(basis.clone(), w.into_matrix())?, trace });
    }
    let losses: Vec<f64> = fits.iter().map(|f| f.trace.final_loss).collect();
    let (selected, no_elbow) = elbow_select(&losses, elbow_ratio);
    let entries = losses.iter().enumerate().map(|(i, l)| (i + 1, *l)).collect();
    Ok(ElbowSearch { trace: ElbowTrace { entries, selected, no_elbow }, fits })
}

/// An affine subspace `{origin + E·u}` with orthonormal columns `E`.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AffineFrame {
    pub origin: Vec<f64>,
    /// `n × d`, orthonormal columns spanning the subspace directions.
    pub basis: Matrix,
}

impl AffineFrame {
    pub fn ambient_dimension(&self) -> usize {
        self.origin.len()
    }

    pub fn reduced_dimension(&self) -> usize {
        self.basis.cols()
    }

    /// Reduced coordinates `Eᵀ(x − origin)` of the orthogonal projection.
    pub fn reduce(&self, x: &[f64]) -> Vec<f64> {
        let shifted: Vec<f64> = x.iter().zip(&self.origin).map(|(a, o)| a - o).collect();
        self.basis.tr_mul_vec(&shifted)
    }

    /// Ambient point `origin + E·u`.
    pub fn to_ambient(&self, u: &[f64]) -> Vec<f64> {
        let d = self.basis.mul_vec(u);
        d.iter().zip(&self.origin).map(|(a, o)| a + o).collect()
    }

    pub fn reduce_all(&self, data: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(data.rows(), self.reduced_dimension());
        for i in 0..data.rows() {
            let u = self.reduce(data.row(i));
            out.row_mut(i).copy_from_slice(&u);
        }
        out
    }

    pub fn to_ambient_all(&self, reduced: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(reduced.rows(), self.ambient_dimension());
        for i in 0..reduced.rows() {
            let x = self.to_ambient(reduced.row(i));
            out.row_mut(i).copy_from_slice(&x);
        }
        out
    }
}

const AFFINE_COEF_TOL: f64 = 1e-12;
const RANK_REL_TOL: f64 = 1e-10;

/// Projects the data onto the affine subspace cut out by the (affine)
/// components of `model` and returns coordinates in an orthonormal frame of
/// that subspace.
///
/// The frame origin is the point of the subspace closest to the origin; the
/// frame directions are the projections of the standard basis vectors,
/// Gram–Schmidt orthonormalised in axis order.
pub fn project_onto_affine(data: &Matrix, model: &LevelSetModel) -> Result<(Matrix, AffineFrame)> {
    let n = model.dimension();
    check_dim(n, data.cols(), "project_onto_affine data")?;
    let k = model.components_count();

    // Split every component into constant + linear part.
    let mut linear = Matrix::zeros(k, n);
    let mut constant = vec![0.0; k];
    for (a, atom) in model.basis().atoms().iter().enumerate() {
        for j in 0..k {
            let c = model.coefficients()[(a, j)];
            match atom {
                FeatureAtom::Monomial { exponents } if exponents.iter().sum::<u32>() == 0 => constant[j] += c,
                FeatureAtom::Monomial { exponents } if exponents.iter().sum::<u32>() == 1 => {
                    let axis = exponents.iter().position(|&e| e == 1).expect("degree-one monomial");
                    linear[(j, axis)] += c;
                }
                _ if c.abs() <= AFFINE_COEF_TOL => {}
                _ => {
                    return Err(Error::InvalidArgument(
                        "project_onto_affine needs components over constant and linear atoms only".into(),
                    ))
                }
            }
        }
    }

    // Row space of the linear part via the eigenvectors of LᵀL.
    let (vals, vecs) = symmetric_eigen(&linear.tr_matmul(&linear));
    let top = vals.iter().cloned().fold(0.0, f64::max);
    let row_space: Vec<usize> = (0..n).filter(|&i| top > 0.0 && vals[i] > RANK_REL_TOL * top).collect();

    // Minimum-norm solution of L x = −c.
    let ltc = linear.tr_mul_vec(&constant);
    let mut origin = vec![0.0; n];
    for &i in &row_space {
        let v = vecs.column(i);
        let coef = -math::dot(&v, &ltc) / vals[i];
        for (o, vi) in origin.iter_mut().zip(&v) {
            *o += coef * vi;
        }
    }
    let fitted = linear.mul_vec(&origin);
    let inconsistency = fitted.iter().zip(&constant).map(|(l, c)| (l + c).abs()).fold(0.0, f64::max);
    let scale = 1.0 + constant.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    if inconsistency > 1e-8 * scale {
        return Err(Error::EmptyLevelSet);
    }

    // Directions: standard basis projected off the row space, Gram–Schmidt.
    let target = n - row_space.len();
    let mut dirs: Vec<Vec<f64>> = Vec::with_capacity(target);
    for axis in 0..n {
        if dirs.len() == target {
            break;
        }
        let mut e = vec![0.0; n];
        e[axis] = 1.0;
        for &i in &row_space {
            let v = vecs.column(i);
            let d = math::dot(&v, &e);
            for (x, vi) in e.iter_mut().zip(&v) {
                *x -= d * vi;
            }
        }
        for _ in 0..2 {
            for q in &dirs {
                let d = math::dot(q, &e);
                for (x, qi) in e.iter_mut().zip(q) {
                    *x -= d * qi;
                }
            }
        }
        let len = math::norm(&e);
        if len > 1e-6 {
            dirs.push(e.iter().map(|x| x / len).collect());
        }
    }
    let basis = if dirs.is_empty() { Matrix::zeros(n, 0) } else { Matrix::from_columns(&dirs)? };
    let frame = AffineFrame { origin, basis };
    Ok((frame.reduce_all(data), frame))
}

/// Adds artificial atoms `h · f` for every known component `f` and every
/// non-constant monomial `h` with `deg h + deg f ≤ degree`.
pub fn extend_degenerate_columns(
    basis: &FeatureBasis,
    known: &[ScalarFunctionModel],
    degree: u32,
) -> Result<FeatureBasis> {
    let n = basis.dimension();
    let mut extra = Vec::new();
    for f in known {
        check_dim(n, f.dimension(), "extend_degenerate_columns known model")?;
        let deg_f = f
            .effective_degree(AFFINE_COEF_TOL)
            .ok_or_else(|| Error::InvalidArgument("degenerate-column extension needs polynomial components".into()))?;
        let factor = f.terms();
        for d in 1..=degree.saturating_sub(deg_f) {
            for monomial in monomials_of_degree(n, d) {
                extra.push(FeatureAtom::Product { monomial, factor: factor.clone() });
            }
        }
    }
    basis.extended(extra)
}

/// Level-set fit over `basis` extended by the artificial columns of
/// `known`, reported without the artificial atoms.
pub fn fit_level_set_extended(
    data: &Matrix,
    basis: &FeatureBasis,
    known: &[ScalarFunctionModel],
    degree: u32,
    k: usize,
    config: &OptimizerConfig,
) -> Result<LevelSetFit> {
    let extended = extend_degenerate_columns(basis, known, degree)?;
    let fit = fit_level_set(data, &extended, k, config)?;
    Ok(LevelSetFit { model: fit.model.without_artificial()?, trace: fit.trace })
}
