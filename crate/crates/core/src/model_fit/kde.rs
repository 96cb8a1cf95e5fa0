//! Weighted Gaussian kernel density estimation.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_dim, Error, Result};
use crate::linalg::Matrix;
use crate::math;

/// Kernels further than this many bandwidths away are treated as zero when
/// tabulating a density grid (`exp(-40.5) ≈ 2.6e-18`).
const GRID_CUTOFF: f64 = 9.0;

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Bandwidth {
    Fixed(f64),
    /// `N^(−1/(n+4))` times the mean marginal standard deviation.
    Scott,
}

/// `p(x) = Σ wᵢ φ_h(x − cᵢ)` with `Σ wᵢ = 1` and `φ_h` the isotropic
/// Gaussian of standard deviation `h`.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "crate::serde_impls::KdeRepr", into = "crate::serde_impls::KdeRepr"))]
pub struct KdeModel {
    centers: Matrix,
    weights: Vec<f64>,
    bandwidth: f64,
}

impl KdeModel {
    /// Weights are normalised to sum to one.
    pub fn new(centers: Matrix, weights: Vec<f64>, bandwidth: f64) -> Result<Self> {
        check_dim(centers.rows(), weights.len(), "KdeModel weights")?;
        if centers.rows() == 0 || centers.cols() == 0 {
            return Err(Error::InvalidArgument("KDE needs at least one center".into()));
        }
        if !centers.is_finite() {
            return Err(Error::InvalidArgument("KDE centers must be finite".into()));
        }
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(Error::InvalidArgument(alloc::format!("bandwidth must be positive, got {bandwidth}")));
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidArgument("KDE weights must be finite and nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::InvalidArgument("KDE weights sum to zero".into()));
        }
        // Already-normalised weights (e.g. a reloaded model) are kept
        // bit-for-bit rather than divided by a sum that is 1 up to rounding.
        let weights = if (total - 1.0).abs() <= 1e-12 { weights } else { weights.iter().map(|w| w / total).collect() };
        Ok(Self { centers, weights, bandwidth })
    }

    pub fn centers(&self) -> &Matrix {
        &self.centers
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn dimension(&self) -> usize {
        self.centers.cols()
    }

    /// Kernel density estimates degrade quickly beyond two dimensions.
    pub fn dimension_warning(&self) -> bool {
        self.dimension() > 2
    }

    fn normaliser(&self) -> f64 {
        let h2 = self.bandwidth * self.bandwidth;
        math::pow(2.0 * core::f64::consts::PI * h2, -(self.dimension() as f64) / 2.0)
    }

    pub fn density(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dimension(), x.len(), "KdeModel::density")?;
        let inv = -0.5 / (self.bandwidth * self.bandwidth);
        let mut sum = 0.0;
        for (i, w) in self.weights.iter().enumerate() {
            if *w == 0.0 {
                continue;
            }
            let d2: f64 = self.centers.row(i).iter().zip(x).map(|(c, v)| (v - c) * (v - c)).sum();
            sum += w * math::exp(inv * d2);
        }
        Ok(sum * self.normaliser())
    }

    /// `∇p(x) = Σ wᵢ φ_h(x − cᵢ)(cᵢ − x)/h²`.
    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dimension(), x.len(), "KdeModel::gradient")?;
        let h2 = self.bandwidth * self.bandwidth;
        let inv = -0.5 / h2;
        let mut g = vec![0.0; x.len()];
        for (i, w) in self.weights.iter().enumerate() {
            if *w == 0.0 {
                continue;
            }
            let c = self.centers.row(i);
            let d2: f64 = c.iter().zip(x).map(|(c, v)| (v - c) * (v - c)).sum();
            let k = w * math::exp(inv * d2);
            for ((gj, cj), xj) in g.iter_mut().zip(c).zip(x) {
                *gj += k * (cj - xj);
            }
        }
        let scale = self.normaliser() / h2;
        g.iter_mut().for_each(|v| *v *= scale);
        Ok(g)
    }

    pub fn densities(&self, points: &Matrix) -> Result<Vec<f64>> {
        (0..points.rows()).map(|i| self.density(points.row(i))).collect()
    }

    /// Gradients at every row, shape `N × n`.
    pub fn gradients(&self, points: &Matrix) -> Result<Matrix> {
        check_dim(self.dimension(), points.cols(), "KdeModel::gradients")?;
        let mut out = Matrix::zeros(points.rows(), points.cols());
        for i in 0..points.rows() {
            let g = self.gradient(points.row(i))?;
            out.row_mut(i).copy_from_slice(&g);
        }
        Ok(out)
    }

    /// Tabulates a two-dimensional density on the square `[-radius, radius]²`
    /// with node spacing `spacing`, for fast repeated evaluation.
    ///
    /// The Gaussian kernel factorises over the axes, so values and the
    /// derivatives needed for bicubic Hermite interpolation are assembled
    /// from one-dimensional kernel tables.
    pub fn grid_2d(&self, radius: f64, spacing: f64) -> Result<DensityGrid> {
        if self.dimension() != 2 {
            return Err(Error::InvalidArgument("density grids are only available in two dimensions".into()));
        }
        if !(radius > 0.0 && spacing > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidArgument("grid radius and spacing must be positive".into()));
        }
        let cells = math::ceil(2.0 * radius / spacing) as usize;
        let nodes = cells + 1;
        let lo = -radius;
        let h = self.bandwidth;
        let h2 = h * h;
        let reach = (GRID_CUTOFF * h / spacing) as usize + 1;
        let mut value = vec![0.0; nodes * nodes];
        let mut dx = vec![0.0; nodes * nodes];
        let mut dy = vec![0.0; nodes * nodes];
        let mut dxy = vec![0.0; nodes * nodes];

        // Per-center 1-D tables for the kernel and its derivative.
        let mut kx = Vec::new();
        let mut ky = Vec::new();
        let mut kx1 = Vec::new();
        let mut ky1 = Vec::new();
        let span = |c: f64| {
            let mid = math::round((c - lo) / spacing) as isize;
            let a = (mid - reach as isize).max(0) as usize;
            let b = ((mid + reach as isize).max(-1) + 1).min(nodes as isize).max(0) as usize;
            (a, b.max(a))
        };
        let table = |c: f64, a: usize, b: usize, k: &mut Vec<f64>, k1: &mut Vec<f64>| {
            k.clear();
            k1.clear();
            for t in a..b {
                let g = lo + t as f64 * spacing;
                let e = math::exp(-0.5 * (g - c) * (g - c) / h2);
                k.push(e);
                k1.push(e * (c - g) / h2);
            }
        };
        for (i, w) in self.weights.iter().enumerate() {
            if *w == 0.0 {
                continue;
            }
            let c = self.centers.row(i);
            let (ax, bx) = span(c[0]);
            let (ay, by) = span(c[1]);
            if ax == bx || ay == by {
                continue;
            }
            table(c[0], ax, bx, &mut kx, &mut kx1);
            table(c[1], ay, by, &mut ky, &mut ky1);
            for (s, a) in (ax..bx).enumerate() {
                let (vx, vx1) = (w * kx[s], w * kx1[s]);
                let row = a * nodes;
                for (t, b) in (ay..by).enumerate() {
                    let idx = row + b;
                    value[idx] += vx * ky[t];
                    dx[idx] += vx1 * ky[t];
                    dy[idx] += vx * ky1[t];
                    dxy[idx] += vx1 * ky1[t];
                }
            }
        }
        let norm = self.normaliser();
        for v in [&mut value, &mut dx, &mut dy, &mut dxy] {
            v.iter_mut().for_each(|x| *x *= norm);
        }
        Ok(DensityGrid { lo, spacing, nodes, value, dx, dy, dxy })
    }
}

/// A tabulated two-dimensional density with bicubic Hermite interpolation
/// from exact node values and derivatives.
#[derive(Clone, Debug)]
pub struct DensityGrid {
    lo: f64,
    spacing: f64,
    nodes: usize,
    value: Vec<f64>,
    dx: Vec<f64>,
    dy: Vec<f64>,
    dxy: Vec<f64>,
}

impl DensityGrid {
    /// Interpolated density, or `None` outside the tabulated square.
    pub fn density(&self, x: f64, y: f64) -> Option<f64> {
        let u = (x - self.lo) / self.spacing;
        let v = (y - self.lo) / self.spacing;
        let last = (self.nodes - 1) as f64;
        if !(u >= 0.0 && v >= 0.0 && u <= last && v <= last) {
            return None;
        }
        let i = (math::floor(u) as usize).min(self.nodes - 2);
        let j = (math::floor(v) as usize).min(self.nodes - 2);
        let s = u - i as f64;
        let t = v - j as f64;
        let (hs, gs) = hermite(s);
        let (ht, gt) = hermite(t);
        let d = self.spacing;
        let mut out = 0.0;
        for (a, (ha, ga)) in [(i, (hs[0], gs[0])), (i + 1, (hs[1], gs[1]))] {
            for (b, (hb, gb)) in [(j, (ht[0], gt[0])), (j + 1, (ht[1], gt[1]))] {
                let k = a * self.nodes + b;
                out += ha * hb * self.value[k]
                    + ga * d * hb * self.dx[k]
                    + ha * gb * d * self.dy[k]
                    + ga * gb * d * d * self.dxy[k];
            }
        }
        Some(out)
    }
}

/// Cubic Hermite basis on `[0, 1]`: value weights and derivative weights
/// for the two end nodes.
fn hermite(s: f64) -> ([f64; 2], [f64; 2]) {
    let s2 = s * s;
    let s3 = s2 * s;
    (
        [2.0 * s3 - 3.0 * s2 + 1.0, -2.0 * s3 + 3.0 * s2],
        [s3 - 2.0 * s2 + s, s3 - s2],
    )
}

/// Fits a weighted Gaussian KDE with centers at the data rows.
pub fn kde_fit(data: &Matrix, weights: Option<&[f64]>, bandwidth: Bandwidth) -> Result<KdeModel> {
    let n_rows = data.rows();
    let weights = match weights {
        Some(w) => {
            check_dim(n_rows, w.len(), "kde_fit weights")?;
            w.to_vec()
        }
        None => vec![1.0; n_rows],
    };
    let h = match bandwidth {
        Bandwidth::Fixed(h) => h,
        Bandwidth::Scott => scott_bandwidth(data)?,
    };
    KdeModel::new(data.clone(), weights, h)
}

fn scott_bandwidth(data: &Matrix) -> Result<f64> {
    let (rows, n) = data.shape();
    if rows < 2 {
        return Err(Error::InvalidArgument("Scott's rule needs at least two data points".into()));
    }
    let mut mean_sd = 0.0;
    for j in 0..n {
        let col = data.column(j);
        let mean = col.iter().sum::<f64>() / rows as f64;
        let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (rows - 1) as f64;
        mean_sd += math::sqrt(var);
    }
    mean_sd /= n as f64;
    if !(mean_sd > 0.0) {
        return Err(Error::InvalidArgument("Scott's rule needs data with nonzero spread".into()));
    }
    Ok(math::pow(rows as f64, -1.0 / (n as f64 + 4.0)) * mean_sd)
}
