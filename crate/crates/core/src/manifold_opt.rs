//! First-order optimisation over matrices with orthonormal columns (the
//! unit sphere when there is one column, the Stiefel manifold otherwise).
//!
//! The typical objective is a residual `loss(A·W, 0)`: every level set,
//! vector field and invariant fit in this crate reduces to it. Iterations are
//! full batch and single threaded, so a run is a pure function of
//! `(A, config, W₀)`.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_dim, Error, Result};
use crate::linalg::{least_squares, thin_qr, Matrix};
use crate::math;
use crate::rng::SeededRng;

/// Tolerance on `‖WᵀW − I‖_max` for a valid point.
pub const ORTHONORMAL_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Algorithm {
    RiemannianSgd,
    RiemannianAdagrad,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Loss {
    MeanAbsolute,
    MeanSquared,
}

impl Loss {
    /// Mean loss of a residual vector against zero targets.
    pub fn of(self, residuals: &[f64]) -> f64 {
        if residuals.is_empty() {
            return 0.0;
        }
        let total: f64 = match self {
            Loss::MeanAbsolute => residuals.iter().map(|r| r.abs()).sum(),
            Loss::MeanSquared => residuals.iter().map(|r| r * r).sum(),
        };
        total / residuals.len() as f64
    }

    /// d(loss)/d(residual) for one entry, before dividing by the count.
    /// The absolute-value subgradient is taken as 0 at exactly 0.
    #[inline]
    pub fn derivative(self, r: f64) -> f64 {
        match self {
            Loss::MeanAbsolute => {
                if r > 0.0 {
                    1.0
                } else if r < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
            Loss::MeanSquared => 2.0 * r,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OptimizerConfig {
    pub algorithm: Algorithm,
    pub loss: Loss,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    #[cfg_attr(feature = "serde", serde(default = "default_adagrad_epsilon"))]
    pub adagrad_epsilon: f64,
}

fn default_adagrad_epsilon() -> f64 {
    1e-10
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::RiemannianAdagrad,
            loss: Loss::MeanAbsolute,
            learning_rate: 0.01,
            epochs: 5000,
            seed: 0,
            adagrad_epsilon: default_adagrad_epsilon(),
        }
    }
}

impl OptimizerConfig {
    pub fn adagrad(loss: Loss, learning_rate: f64, epochs: usize, seed: u64) -> Self {
        Self { algorithm: Algorithm::RiemannianAdagrad, loss, learning_rate, epochs, seed, ..Self::default() }
    }

    pub fn sgd(loss: Loss, learning_rate: f64, epochs: usize, seed: u64) -> Self {
        Self { algorithm: Algorithm::RiemannianSgd, loss, learning_rate, epochs, seed, ..Self::default() }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidArgument("epochs must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument("learning_rate must be positive".into()));
        }
        if !(self.adagrad_epsilon > 0.0) {
            return Err(Error::InvalidArgument("adagrad_epsilon must be positive".into()));
        }
        Ok(())
    }
}

/// A `p × q` matrix with orthonormal columns.
#[derive(Clone, Debug, PartialEq)]
pub struct OrthonormalPoint(Matrix);

impl OrthonormalPoint {
    /// Accepts `w` if its columns are orthonormal to [`ORTHONORMAL_TOL`].
    pub fn new(w: Matrix) -> Result<Self> {
        if w.cols() > w.rows() {
            return Err(Error::InvalidArgument("orthonormal point needs q ≤ p".into()));
        }
        let defect = orthonormality_defect(&w);
        if defect > ORTHONORMAL_TOL {
            return Err(Error::InvalidArgument(alloc::format!("columns are not orthonormal (defect {defect:e})")));
        }
        Ok(Self(w))
    }

    /// Orthonormalises the columns of `w` by thin QR.
    pub fn from_span(w: &Matrix) -> Result<Self> {
        let f = thin_qr(w, 1e-12);
        if f.rank_deficient {
            return Err(Error::RetractionSingular);
        }
        Ok(Self(f.q))
    }

    /// Seeded standard-normal matrix, orthonormalised.
    pub fn random(p: usize, q: usize, rng: &mut SeededRng) -> Result<Self> {
        let data = (0..p * q).map(|_| rng.standard_normal()).collect();
        Self::from_span(&Matrix::from_vec(p, q, data))
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.0.column(j)
    }
}

/// `‖WᵀW − I‖_max`.
pub fn orthonormality_defect(w: &Matrix) -> f64 {
    w.tr_matmul(w).sub(&Matrix::identity(w.cols())).max_abs()
}

/// Projects `g` onto the tangent space at `w`: `G − W·sym(WᵀG)`.
pub fn tangent_project(w: &OrthonormalPoint, g: &Matrix) -> Result<Matrix> {
    let w = w.matrix();
    check_dim(w.rows(), g.rows(), "tangent_project rows")?;
    check_dim(w.cols(), g.cols(), "tangent_project cols")?;
    let wtg = w.tr_matmul(g);
    let sym = wtg.add(&wtg.transpose()).scaled(0.5);
    Ok(g.sub(&w.matmul(&sym)))
}

/// QR retraction: the Q factor of `W + T`, with `R` having a positive
/// diagonal.
pub fn retract(w: &OrthonormalPoint, t: &Matrix) -> Result<OrthonormalPoint> {
    check_dim(w.matrix().rows(), t.rows(), "retract rows")?;
    check_dim(w.matrix().cols(), t.cols(), "retract cols")?;
    let moved = w.matrix().add(t);
    if !moved.is_finite() {
        return Err(Error::RetractionSingular);
    }
    let f = thin_qr(&moved, 1e-12);
    if f.rank_deficient {
        return Err(Error::RetractionSingular);
    }
    Ok(OrthonormalPoint(f.q))
}

/// Per-epoch losses of a run.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OptimizationTrace {
    /// Loss at the start of each epoch (before its update).
    pub losses: Vec<f64>,
    /// Loss at the returned point.
    pub final_loss: f64,
}

/// A smooth (or subdifferentiable) function of a `p × q` matrix.
pub trait Objective {
    /// Returns the loss and its Euclidean gradient at `w`.
    fn loss_and_gradient(&self, w: &Matrix) -> (f64, Matrix);

    fn loss(&self, w: &Matrix) -> f64 {
        self.loss_and_gradient(w).0
    }
}

/// `loss(A·W, 0)` averaged over every entry of the residual matrix.
pub struct ResidualObjective<'a> {
    a: &'a Matrix,
    loss: Loss,
    /// `AᵀA`, cached for the squared loss so an epoch costs `O(p²q)`.
    gram: Option<Matrix>,
}

impl<'a> ResidualObjective<'a> {
    pub fn new(a: &'a Matrix, loss: Loss) -> Self {
        let gram = (loss == Loss::MeanSquared && a.rows() > a.cols()).then(|| a.tr_matmul(a));
        Self { a, loss, gram }
    }

    /// Loss computed from the explicit residual matrix.
    pub fn direct_loss(&self, w: &Matrix) -> f64 {
        self.loss.of(self.a.matmul(w).as_slice())
    }
}

impl Objective for ResidualObjective<'_> {
    fn loss_and_gradient(&self, w: &Matrix) -> (f64, Matrix) {
        let count = (self.a.rows() * w.cols()) as f64;
        if let Some(g) = &self.gram {
            let gw = g.matmul(w);
            let quad: f64 = gw.as_slice().iter().zip(w.as_slice()).map(|(a, b)| a * b).sum();
            return (quad.max(0.0) / count, gw.scaled(2.0 / count));
        }
        // One pass over the rows of A: residuals against the columns of W
        // (rows of Wᵀ), then the rank-one gradient update from the same row.
        let (p, q) = w.shape();
        let wt = w.transpose();
        let mut grad_t = Matrix::zeros(q, p);
        let mut total = 0.0;
        let mut d = vec![0.0; q];
        for i in 0..self.a.rows() {
            let row = self.a.row(i);
            for (j, dj) in d.iter_mut().enumerate() {
                let r = math::dot(row, wt.row(j));
                total += match self.loss {
                    Loss::MeanAbsolute => r.abs(),
                    Loss::MeanSquared => r * r,
                };
                *dj = self.loss.derivative(r);
            }
            for (j, dj) in d.iter().enumerate() {
                if *dj != 0.0 {
                    for (g, a) in grad_t.row_mut(j).iter_mut().zip(row) {
                        *g += dj * a;
                    }
                }
            }
        }
        let loss = if count > 0.0 { total / count } else { 0.0 };
        (loss, grad_t.transpose().scaled(1.0 / count.max(1.0)))
    }

    fn loss(&self, w: &Matrix) -> f64 {
        self.direct_loss(w)
    }
}

/// Flips each column so its largest-magnitude entry is positive.
pub fn canonical_signs(w: &mut Matrix) {
    for j in 0..w.cols() {
        let mut best = 0.0f64;
        for i in 0..w.rows() {
            if w[(i, j)].abs() > best.abs() {
                best = w[(i, j)];
            }
        }
        if best < 0.0 {
            for i in 0..w.rows() {
                w[(i, j)] = -w[(i, j)];
            }
        }
    }
}

/// Riemannian SGD/Adagrad on the Stiefel manifold `St(p, q)` for an
/// arbitrary objective.
pub fn minimize_objective<O: Objective + ?Sized>(
    objective: &O,
    p: usize,
    q: usize,
    config: &OptimizerConfig,
    w0: Option<OrthonormalPoint>,
) -> Result<(OrthonormalPoint, OptimizationTrace)> {
    config.validate()?;
    if q == 0 || q > p {
        return Err(Error::InvalidArgument(alloc::format!("need 1 ≤ q ≤ p, got q={q}, p={p}")));
    }
    let mut w = match w0 {
        Some(w) => {
            check_dim(p, w.matrix().rows(), "initial point rows")?;
            check_dim(q, w.matrix().cols(), "initial point cols")?;
            w
        }
        None => OrthonormalPoint::random(p, q, &mut SeededRng::new(config.seed))?,
    };

    let mut accumulator = vec![0.0; p * q];
    let mut losses = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let (loss, mut grad) = objective.loss_and_gradient(w.matrix());
        if !loss.is_finite() || !grad.is_finite() {
            return Err(Error::Divergence { epoch });
        }
        losses.push(loss);
        if config.algorithm == Algorithm::RiemannianAdagrad {
            // Accumulate the Riemannian gradient: the normal component is
            // removed by the projection anyway and would otherwise inflate
            // the accumulator and stall the tangent steps.
            grad = tangent_project(&w, &grad)?;
            for (g, acc) in grad.as_mut_slice().iter_mut().zip(accumulator.iter_mut()) {
                *acc += *g * *g;
                *g /= math::sqrt(*acc + config.adagrad_epsilon);
            }
        }
        let step = tangent_project(&w, &grad.scaled(-config.learning_rate))?;
        w = retract(&w, &step)?;
    }

    let mut out = w.into_matrix();
    canonical_signs(&mut out);
    let final_loss = objective.loss(&out);
    if !final_loss.is_finite() {
        return Err(Error::Divergence { epoch: config.epochs });
    }
    Ok((OrthonormalPoint(out), OptimizationTrace { losses, final_loss }))
}

/// Approximately minimises `loss(A·W, 0)` over `W` with `q` orthonormal
/// columns.
pub fn minimize(
    a: &Matrix,
    q: usize,
    config: &OptimizerConfig,
    w0: Option<OrthonormalPoint>,
) -> Result<(OrthonormalPoint, OptimizationTrace)> {
    if !a.is_finite() {
        return Err(Error::InvalidArgument("residual matrix contains non-finite entries".into()));
    }
    let objective = ResidualObjective::new(a, config.loss);
    minimize_objective(&objective, a.cols(), q, config, w0)
}

/// Unconstrained least squares `A·w ≈ b` for problems whose right-hand side
/// fixes the scale (flow parameters). Rank-deficient systems get the
/// minimum-norm solution.
pub fn minimize_affine_target(a: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    if !a.is_finite() || b.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("least squares inputs must be finite".into()));
    }
    Ok(least_squares(a, b)?.solution)
}

/// Projected-gradient descent on a box `[lo, hi]` for low-dimensional
/// parameter vectors, with the same Adagrad/SGD step rule as the manifold
/// optimiser. Returns the final parameters and trace.
pub fn minimize_in_box<F>(
    objective: F,
    lo: &[f64],
    hi: &[f64],
    start: &[f64],
    config: &OptimizerConfig,
) -> Result<(Vec<f64>, OptimizationTrace)>
where
    F: Fn(&[f64]) -> (f64, Vec<f64>),
{
    config.validate()?;
    check_dim(lo.len(), hi.len(), "box bounds")?;
    check_dim(lo.len(), start.len(), "box start")?;
    let clamp = |x: &mut [f64]| {
        for ((v, l), h) in x.iter_mut().zip(lo).zip(hi) {
            *v = v.clamp(*l, *h);
        }
    };
    let mut x = start.to_vec();
    clamp(&mut x);
    let mut acc = vec![0.0; x.len()];
    let mut losses = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let (loss, grad) = objective(&x);
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Divergence { epoch });
        }
        losses.push(loss);
        for ((v, g), a) in x.iter_mut().zip(&grad).zip(acc.iter_mut()) {
            let step = match config.algorithm {
                Algorithm::RiemannianSgd => *g,
                Algorithm::RiemannianAdagrad => {
                    *a += g * g;
                    g / math::sqrt(*a + config.adagrad_epsilon)
                }
            };
            *v -= config.learning_rate * step;
        }
        clamp(&mut x);
    }
    let final_loss = objective(&x).0;
    Ok((x, OptimizationTrace { losses, final_loss }))
}
