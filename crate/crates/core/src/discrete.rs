//! Discrete symmetries: parameters `w` of a transformation family `S(·; w)`
//! with `f(S(x; w)) ≈ f(x)` on the data, and density-matching rotations.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::TAU;

use crate::error::{check_dim, Error, Result};
use crate::linalg::Matrix;
use crate::manifold_opt::{self, Objective, OptimizationTrace, OptimizerConfig, OrthonormalPoint};
use crate::math;
use crate::model_fit::{KdeModel, ScalarFunctionModel};
use crate::rng::SeededRng;

/// Number of evenly spaced starts for interval-constrained fits.
const INTERVAL_STARTS: usize = 8;

/// How the parameters of a family are constrained.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "kebab-case"))]
pub enum Constraint {
    /// `‖w‖ = 1`.
    UnitNorm,
    /// `lo ≤ w ≤ hi` componentwise.
    Interval { lo: Vec<f64>, hi: Vec<f64> },
}

/// A parametric family of linear maps of the plane or of `Rⁿ`.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "kebab-case"))]
pub enum ParametricFamily {
    /// Reflection across the line `a·x + b·y = 0`, parameters `(a, b)` on
    /// the unit circle.
    Reflection2d,
    /// Rotation `S(θ) = [[cos θ, sin θ], [−sin θ, cos θ]]` with
    /// `θ ∈ [lo, hi]`.
    Rotation2d { lo: f64, hi: f64 },
    /// `S(w) = A₀ + Σ wₖ Aₖ`.
    UserLinear { base: Matrix, generators: Vec<Matrix>, constraint: Constraint },
}

impl ParametricFamily {
    pub fn dimension(&self) -> usize {
        match self {
            ParametricFamily::Reflection2d | ParametricFamily::Rotation2d { .. } => 2,
            ParametricFamily::UserLinear { base, .. } => base.rows(),
        }
    }

    pub fn parameter_count(&self) -> usize {
        match self {
            ParametricFamily::Reflection2d => 2,
            ParametricFamily::Rotation2d { .. } => 1,
            ParametricFamily::UserLinear { generators, .. } => generators.len(),
        }
    }

    pub fn constraint(&self) -> Constraint {
        match self {
            ParametricFamily::Reflection2d => Constraint::UnitNorm,
            ParametricFamily::Rotation2d { lo, hi } => Constraint::Interval { lo: vec![*lo], hi: vec![*hi] },
            ParametricFamily::UserLinear { constraint, .. } => constraint.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ParametricFamily::Reflection2d => Ok(()),
            ParametricFamily::Rotation2d { lo, hi } => {
                if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                    return Err(Error::InvalidArgument("rotation interval needs finite lo < hi".into()));
                }
                Ok(())
            }
            ParametricFamily::UserLinear { base, generators, constraint } => {
                let n = base.rows();
                check_dim(n, base.cols(), "user-linear base matrix (square)")?;
                if generators.is_empty() {
                    return Err(Error::InvalidArgument("user-linear family needs at least one generator".into()));
                }
                for g in generators {
                    check_dim(n, g.rows(), "user-linear generator rows")?;
                    check_dim(n, g.cols(), "user-linear generator cols")?;
                }
                if let Constraint::Interval { lo, hi } = constraint {
                    check_dim(generators.len(), lo.len(), "user-linear lower bounds")?;
                    check_dim(generators.len(), hi.len(), "user-linear upper bounds")?;
                    if lo.iter().zip(hi).any(|(l, h)| !(l <= h)) {
                        return Err(Error::InvalidArgument("user-linear bounds need lo ≤ hi".into()));
                    }
                }
                Ok(())
            }
        }
    }

    /// The matrix `S(w)`.
    pub fn matrix(&self, w: &[f64]) -> Matrix {
        match self {
            ParametricFamily::Reflection2d => {
                let (a, b) = (w[0], w[1]);
                let s = a * a + b * b;
                Matrix::from_row_slice(2, 2, &[(b * b - a * a) / s, -2.0 * a * b / s, -2.0 * a * b / s, (a * a - b * b) / s])
            }
            ParametricFamily::Rotation2d { .. } => rotation_2d(w[0]),
            ParametricFamily::UserLinear { base, generators, .. } => {
                let mut m = base.clone();
                for (g, wk) in generators.iter().zip(w) {
                    m = m.add(&g.scaled(*wk));
                }
                m
            }
        }
    }

    /// `S(x; w)`. The reflection formula is homogeneous of degree zero in
    /// `(a, b)`, so unnormalised parameters are accepted.
    pub fn transform(&self, w: &[f64], x: &[f64]) -> Vec<f64> {
        self.matrix(w).mul_vec(x)
    }

    /// `S(x; w)` together with `∂S(x; w)/∂w` (`n × p`).
    pub fn transform_with_jacobian(&self, w: &[f64], x: &[f64]) -> (Vec<f64>, Matrix) {
        match self {
            ParametricFamily::Reflection2d => {
                let (a, b) = (w[0], w[1]);
                let s = a * a + b * b;
                let y = self.transform(w, x);
                let (x1, x2) = (x[0], x[1]);
                let dn_da = [-2.0 * a * x1 - 2.0 * b * x2, -2.0 * b * x1 + 2.0 * a * x2];
                let dn_db = [2.0 * b * x1 - 2.0 * a * x2, -2.0 * a * x1 - 2.0 * b * x2];
                let mut jac = Matrix::zeros(2, 2);
                for r in 0..2 {
                    jac[(r, 0)] = (dn_da[r] - y[r] * 2.0 * a) / s;
                    jac[(r, 1)] = (dn_db[r] - y[r] * 2.0 * b) / s;
                }
                (y, jac)
            }
            ParametricFamily::Rotation2d { .. } => {
                let y = self.transform(w, x);
                let jac = Matrix::from_row_slice(2, 1, &[y[1], -y[0]]);
                (y, jac)
            }
            ParametricFamily::UserLinear { generators, .. } => {
                let y = self.transform(w, x);
                let cols: Vec<Vec<f64>> = generators.iter().map(|g| g.mul_vec(x)).collect();
                (y, Matrix::from_columns(&cols).expect("generators share a shape"))
            }
        }
    }
}

/// `[[cos θ, sin θ], [−sin θ, cos θ]]`.
pub fn rotation_2d(theta: f64) -> Matrix {
    let (c, s) = (math::cos(theta), math::sin(theta));
    Matrix::from_row_slice(2, 2, &[c, s, -s, c])
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DiscreteFitResult {
    pub parameters: Vec<f64>,
    pub final_loss: f64,
    /// The optimum sits on the boundary of an interval constraint, i.e. the
    /// excluded region is binding.
    pub excluded_region_active: bool,
}

/// Mean loss of `f(S(xᵢ; w)) − f(xᵢ)` over the data.
pub fn discrete_loss(
    f: &ScalarFunctionModel,
    data: &Matrix,
    family: &ParametricFamily,
    w: &[f64],
    loss: manifold_opt::Loss,
) -> Result<f64> {
    Ok(DiscreteObjective::new(f, data, family, loss)?.value_and_gradient(w).0)
}

struct DiscreteObjective<'a> {
    f: &'a ScalarFunctionModel,
    data: &'a Matrix,
    family: &'a ParametricFamily,
    base_values: Vec<f64>,
    loss: manifold_opt::Loss,
}

impl<'a> DiscreteObjective<'a> {
    fn new(
        f: &'a ScalarFunctionModel,
        data: &'a Matrix,
        family: &'a ParametricFamily,
        loss: manifold_opt::Loss,
    ) -> Result<Self> {
        family.validate()?;
        check_dim(family.dimension(), data.cols(), "discrete fit data")?;
        check_dim(family.dimension(), f.dimension(), "discrete fit function")?;
        if data.rows() == 0 {
            return Err(Error::InvalidArgument("discrete fit needs data".into()));
        }
        let base_values = f.values(data)?;
        Ok(Self { f, data, family, base_values, loss })
    }

    fn value_and_gradient(&self, w: &[f64]) -> (f64, Vec<f64>) {
        let p = w.len();
        let count = self.data.rows() as f64;
        let mut residuals = Vec::with_capacity(self.data.rows());
        let mut grad = vec![0.0; p];
        for i in 0..self.data.rows() {
            let (y, jac) = self.family.transform_with_jacobian(w, self.data.row(i));
            let r = self.f.value(&y).expect("dimension checked") - self.base_values[i];
            residuals.push(r);
            let d = self.loss.derivative(r) / count;
            if d != 0.0 {
                let g = self.f.gradient(&y).expect("dimension checked");
                for (k, gk) in grad.iter_mut().enumerate() {
                    let mut s = 0.0;
                    for (j, gj) in g.iter().enumerate() {
                        s += gj * jac[(j, k)];
                    }
                    *gk += d * s;
                }
            }
        }
        (self.loss.of(&residuals), grad)
    }
}

impl Objective for DiscreteObjective<'_> {
    fn loss_and_gradient(&self, w: &Matrix) -> (f64, Matrix) {
        let (l, g) = self.value_and_gradient(w.as_slice());
        (l, Matrix::column_vector(&g))
    }
}

/// Fits the family parameters minimising the mean residual loss.
pub fn fit_discrete(
    f: &ScalarFunctionModel,
    data: &Matrix,
    family: &ParametricFamily,
    config: &OptimizerConfig,
) -> Result<(DiscreteFitResult, OptimizationTrace)> {
    let objective = DiscreteObjective::new(f, data, family, config.loss)?;
    let p = family.parameter_count();
    match family.constraint() {
        Constraint::UnitNorm => {
            let w0 = OrthonormalPoint::random(p, 1, &mut SeededRng::new(config.seed))?;
            let (w, trace) = manifold_opt::minimize_objective(&objective, p, 1, config, Some(w0))?;
            let result =
                DiscreteFitResult { parameters: w.column(0), final_loss: trace.final_loss, excluded_region_active: false };
            Ok((result, trace))
        }
        Constraint::Interval { lo, hi } => {
            let mut best: Option<(Vec<f64>, OptimizationTrace)> = None;
            for s in 0..INTERVAL_STARTS {
                let frac = (s as f64 + 0.5) / INTERVAL_STARTS as f64;
                let start: Vec<f64> = lo.iter().zip(&hi).map(|(l, h)| l + frac * (h - l)).collect();
                let (x, trace) =
                    manifold_opt::minimize_in_box(|w| objective.value_and_gradient(w), &lo, &hi, &start, config)?;
                let better = match &best {
                    None => true,
                    Some((bx, bt)) => (trace.final_loss, x[0]) < (bt.final_loss, bx[0]),
                };
                if better {
                    best = Some((x, trace));
                }
            }
            let (x, trace) = best.expect("at least one start");
            let span = lo.iter().zip(&hi).map(|(l, h)| h - l).fold(0.0, f64::max);
            let eps = 1e-9 * (1.0 + span);
            let active = x.iter().zip(lo.iter().zip(&hi)).any(|(v, (l, h))| (v - l).abs() <= eps || (h - v).abs() <= eps);
            Ok((DiscreteFitResult { parameters: x, final_loss: trace.final_loss, excluded_region_active: active }, trace))
        }
    }
}

/// How the density is evaluated at rotated points.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "kebab-case"))]
pub enum DensityEvaluation {
    /// Exact mixture evaluation, `O(N²)` per loss evaluation.
    Direct,
    /// Bicubic Hermite interpolation on a grid with node spacing
    /// `bandwidth / nodes_per_bandwidth`.
    Gridded { nodes_per_bandwidth: f64 },
}

/// Which refined local minimum [`fit_density_rotation`] reports.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "kebab-case"))]
pub enum RotationSelection {
    /// Among minima whose loss is within `tie_fraction` of the loss range
    /// above the best one, the smallest angle.
    LowestLoss { tie_fraction: f64 },
    /// The interior local minimum with the smallest angle, i.e. the one a
    /// descent started just above `θ_min` reaches.
    FirstLocalMinimum,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DensityRotationOptions {
    /// Evenly spaced grid angles used to bracket the local minima.
    pub starts: usize,
    pub evaluation: DensityEvaluation,
    pub selection: RotationSelection,
    /// Absolute tolerance of the bounded scalar refinement.
    pub angle_tol: f64,
}

impl Default for DensityRotationOptions {
    fn default() -> Self {
        Self {
            starts: 64,
            evaluation: DensityEvaluation::Gridded { nodes_per_bandwidth: 8.0 },
            selection: RotationSelection::FirstLocalMinimum,
            angle_tol: 1e-7,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DensityRotationFit {
    pub result: DiscreteFitResult,
    /// `(bracket centre, refined angle, loss)` for every bracketed local
    /// minimum, in increasing angle.
    pub local_minima: Vec<(f64, f64, f64)>,
}

/// Fits a rotation angle `θ ∈ [θ_min, 2π − θ_min]` with small
/// `mean |p(S(θ)xᵢ) − p(xᵢ)|`.
///
/// The loss is tabulated on `starts + 1` evenly spaced angles, every grid
/// point not exceeded by its neighbours brackets a local minimum, and each
/// bracket is refined by Brent's method. The interval is symmetric because
/// `2π − ε` is as trivial a rotation as `ε`.
pub fn fit_density_rotation(
    kde: &KdeModel,
    data: &Matrix,
    theta_min: f64,
    options: &DensityRotationOptions,
) -> Result<DensityRotationFit> {
    check_dim(2, kde.dimension(), "fit_density_rotation density")?;
    check_dim(2, data.cols(), "fit_density_rotation data")?;
    if data.rows() == 0 {
        return Err(Error::InvalidArgument("density rotation fit needs data".into()));
    }
    let hi = TAU - theta_min;
    if !(theta_min >= 0.0 && theta_min < hi) {
        return Err(Error::InvalidArgument(alloc::format!("theta_min must lie in [0, π), got {theta_min}")));
    }
    let selection_ok = match options.selection {
        RotationSelection::LowestLoss { tie_fraction } => tie_fraction >= 0.0,
        RotationSelection::FirstLocalMinimum => true,
    };
    if options.starts < 2 || !selection_ok || !(options.angle_tol > 0.0) {
        return Err(Error::InvalidArgument("invalid density rotation options".into()));
    }

    let radius = (0..data.rows()).map(|i| math::norm(data.row(i))).fold(0.0, f64::max);
    let grid = match options.evaluation {
        DensityEvaluation::Direct => None,
        DensityEvaluation::Gridded { nodes_per_bandwidth } => {
            if !(nodes_per_bandwidth > 0.0) {
                return Err(Error::InvalidArgument("nodes_per_bandwidth must be positive".into()));
            }
            let spacing = kde.bandwidth() / nodes_per_bandwidth;
            Some(kde.grid_2d(radius + 2.0 * spacing, spacing)?)
        }
    };
    let density = |x: f64, y: f64| -> f64 {
        grid.as_ref().and_then(|g| g.density(x, y)).unwrap_or_else(|| kde.density(&[x, y]).expect("two-dimensional"))
    };
    let base: Vec<f64> = (0..data.rows()).map(|i| density(data[(i, 0)], data[(i, 1)])).collect();
    let loss = |theta: f64| -> f64 {
        let (c, s) = (math::cos(theta), math::sin(theta));
        let mut total = 0.0;
        for (i, p0) in base.iter().enumerate() {
            let (x, y) = (data[(i, 0)], data[(i, 1)]);
            total += (density(c * x + s * y, -s * x + c * y) - p0).abs();
        }
        total / base.len() as f64
    };

    let g = options.starts;
    let width = (hi - theta_min) / g as f64;
    let angles: Vec<f64> = (0..=g).map(|k| theta_min + k as f64 * width).collect();
    let values: Vec<f64> = angles.iter().map(|&t| loss(t)).collect();
    let mut local_minima = Vec::new();
    for k in 0..=g {
        let left = k.checked_sub(1).map_or(f64::INFINITY, |j| values[j]);
        let right = values.get(k + 1).copied().unwrap_or(f64::INFINITY);
        // The interval ends are not minima of the loss itself: the loss
        // only keeps falling towards the excluded trivial rotations.
        if k > 0 && k < g && values[k] <= left && values[k] < right {
            let a = angles[k.saturating_sub(1)];
            let b = angles[(k + 1).min(g)];
            let (theta, value) = bounded_minimize(loss, a, b, options.angle_tol);
            let (theta, value) = if value <= values[k] { (theta, value) } else { (angles[k], values[k]) };
            local_minima.push((angles[k], theta, value));
        }
    }
    if local_minima.is_empty() {
        // Monotone or constant loss: fall back to the best grid angle.
        let k = (0..=g).min_by(|&a, &b| values[a].total_cmp(&values[b])).expect("nonempty grid");
        local_minima.push((angles[k], angles[k], values[k]));
    }

    let &(_, theta, value) = match options.selection {
        RotationSelection::FirstLocalMinimum => &local_minima[0],
        RotationSelection::LowestLoss { tie_fraction } => {
            let best = local_minima.iter().map(|m| m.2).fold(f64::INFINITY, f64::min);
            let worst = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let cutoff = best + tie_fraction * (worst - best);
            local_minima
                .iter()
                .filter(|m| m.2 <= cutoff)
                .min_by(|a, b| a.1.total_cmp(&b.1).then(a.2.total_cmp(&b.2)))
                .expect("the best minimum passes its own cutoff")
        }
    };
    let eps = 10.0 * options.angle_tol;
    let active = (theta - theta_min).abs() <= eps || (hi - theta).abs() <= eps;
    Ok(DensityRotationFit {
        result: DiscreteFitResult { parameters: vec![theta], final_loss: value, excluded_region_active: active },
        local_minima,
    })
}

/// Brent's bounded scalar minimisation on `[a, b]` (golden section with
/// parabolic steps). Returns the minimiser and its value.
pub fn bounded_minimize<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, xtol: f64) -> (f64, f64) {
    const GOLDEN: f64 = 0.381_966_011_250_105_1;
    let (mut a, mut b) = (a, b);
    let mut x = a + GOLDEN * (b - a);
    let (mut w, mut v) = (x, x);
    let mut fx = f(x);
    let (mut fw, mut fv) = (fx, fx);
    let (mut d, mut e) = (0.0f64, 0.0f64);
    for _ in 0..500 {
        let m = 0.5 * (a + b);
        let tol1 = 1.490_116_119_384_765_6e-8 * x.abs() + xtol / 3.0;
        let tol2 = 2.0 * tol1;
        if (x - m).abs() <= tol2 - 0.5 * (b - a) {
            break;
        }
        let mut golden = true;
        if e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            let etemp = e;
            if p.abs() < (0.5 * q * etemp).abs() && p > q * (a - x) && p < q * (b - x) {
                e = d;
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = if m >= x { tol1 } else { -tol1 };
                }
                golden = false;
            }
        }
        if golden {
            e = if x >= m { a - x } else { b - x };
            d = GOLDEN * e;
        }
        let u = if d.abs() >= tol1 { x + d } else if d > 0.0 { x + tol1 } else { x - tol1 };
        let fu = f(u);
        if fu <= fx {
            if u >= x {
                a = x;
            } else {
                b = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }
    // The interior search never evaluates the end points; a monotone loss
    // can have its minimum there.
    let (fa, fb) = (f(a), f(b));
    if fa < fx {
        (x, fx) = (a, fa);
    }
    if fb < fx {
        (x, fx) = (b, fb);
    }
    (x, fx)
}

/// Homogeneous `3 × 3` form `[[S(θ), 0], [0, 1]]` of the plane rotation.
pub fn rotation_element(angle: f64) -> Matrix {
    let (c, s) = (math::cos(angle), math::sin(angle));
    Matrix::from_row_slice(3, 3, &[c, s, 0.0, -s, c, 0.0, 0.0, 0.0, 1.0])
}

/// `|⟨vec G, vec R⟩| / (‖G‖ ‖R‖)` for `G = rotation_element(angle)`.
pub fn similarity_matrix(angle: f64, reference: &Matrix) -> Result<f64> {
    check_dim(3, reference.rows(), "similarity_matrix reference rows")?;
    check_dim(3, reference.cols(), "similarity_matrix reference cols")?;
    if !angle.is_finite() || !reference.is_finite() {
        return Err(Error::InvalidArgument("similarity_matrix inputs must be finite".into()));
    }
    let g = rotation_element(angle);
    let nr = reference.frobenius_norm();
    if nr == 0.0 {
        return Err(Error::InvalidArgument("reference matrix is zero".into()));
    }
    let inner = math::dot(g.as_slice(), reference.as_slice());
    Ok((inner.abs() / (g.frobenius_norm() * nr)).min(1.0))
}
