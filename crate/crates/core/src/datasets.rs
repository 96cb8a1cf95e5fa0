//! Seeded generators for the synthetic datasets used in the experiments.
//!
//! | name | columns | target |
//! |------|---------|--------|
//! | `gaussian-quadratic` | `x, y ~ N((1,1), diag(4,1))` | `(x−1)² + 4(y−1)²` |
//! | `cubic` | `x, y ~ N(0, diag(4,4))` | `x³ − y²` |
//! | `sincos` | `x, y ~ U(0,2π)`, `z = sin x − cos y` | `z` |
//! | `circle3d` | `(cos θ, sin θ, 1)`, `θ = t mod 2π`, `t ~ N(0,1)` | none |
//! | `circle-uniform` | `(cos θ, sin θ)`, `θ ~ U(0,2π)` | none |
//! | `disc-rot` | `x, y ~ N(0,1)` | `z / (1 + (atan(x/y) mod 2π/k))` |
//! | `killing4d` | `u, v, w ~ U(−1,1)` and `x=u, y=v, z=u²+v²−w, t=2u` | `9u² + v² + w` |
//! | `hypercube10` | `x₁…x₁₀` built from `t, x, y, z ~ U(−2,2)` | none |

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, TAU};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::math;
use crate::rng::SeededRng;

pub const GENERATOR_NAMES: [&str; 8] =
    ["gaussian-quadratic", "cubic", "sincos", "circle3d", "circle-uniform", "disc-rot", "killing4d", "hypercube10"];

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GeneratorSpec {
    pub name: String,
    pub size: usize,
    pub seed: u64,
    #[cfg_attr(feature = "serde", serde(default))]
    pub parameters: BTreeMap<String, f64>,
}

impl GeneratorSpec {
    pub fn new(name: &str, size: usize, seed: u64) -> Self {
        Self { name: name.to_string(), size, seed, parameters: BTreeMap::new() }
    }

    pub fn with_parameter(mut self, key: &str, value: f64) -> Self {
        self.parameters.insert(key.to_string(), value);
        self
    }
}

/// Size used by each generator in the experiments it reproduces.
pub fn default_size(name: &str) -> Option<usize> {
    Some(match name {
        "gaussian-quadratic" | "cubic" | "circle3d" => 2000,
        "sincos" => 2048,
        "circle-uniform" => 1000,
        "disc-rot" => 20_000,
        "killing4d" => 4096,
        "hypercube10" => 65_536,
        _ => return None,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub columns: Vec<String>,
    pub data: Matrix,
    pub targets: Option<Vec<f64>>,
}

fn names(list: &[&str]) -> Vec<String> {
    list.iter().map(|s| s.to_string()).collect()
}

/// `z / (1 + (atan(x/y) mod 2π/k))`, with `atan(x/0) = π/2·sign(x)`.
pub fn disc_rot_value(x: f64, y: f64, z: f64, k: f64) -> f64 {
    let angle = if y == 0.0 {
        if x == 0.0 {
            0.0
        } else {
            FRAC_PI_2 * x.signum()
        }
    } else {
        math::atan(x / y)
    };
    z / (1.0 + math::rem_euclid(angle, TAU / k))
}

pub fn generate(spec: &GeneratorSpec) -> Result<Dataset> {
    let allowed: &[&str] = match spec.name.as_str() {
        "disc-rot" => &["k", "z"],
        name if GENERATOR_NAMES.contains(&name) => &[],
        _ => return Err(Error::UnknownGenerator(spec.name.clone())),
    };
    if let Some(bad) = spec.parameters.keys().find(|k| !allowed.contains(&k.as_str())) {
        return Err(Error::InvalidArgument(alloc::format!("generator `{}` has no parameter `{bad}`", spec.name)));
    }
    if spec.size == 0 {
        return Err(Error::InvalidArgument("dataset size must be positive".into()));
    }
    let n = spec.size;
    let mut rng = SeededRng::new(spec.seed);
    let mut rows: Vec<f64> = Vec::new();
    let mut targets: Vec<f64> = Vec::new();
    let (columns, has_targets) = match spec.name.as_str() {
        "gaussian-quadratic" => {
            for _ in 0..n {
                let x = rng.normal(1.0, 2.0);
                let y = rng.normal(1.0, 1.0);
                rows.extend([x, y]);
                targets.push((x - 1.0) * (x - 1.0) + 4.0 * (y - 1.0) * (y - 1.0));
            }
            (names(&["x", "y"]), true)
        }
        "cubic" => {
            for _ in 0..n {
                let x = rng.normal(0.0, 2.0);
                let y = rng.normal(0.0, 2.0);
                rows.extend([x, y]);
                targets.push(x * x * x - y * y);
            }
            (names(&["x", "y"]), true)
        }
        "sincos" => {
            for _ in 0..n {
                let x = rng.uniform_in(0.0, TAU);
                let y = rng.uniform_in(0.0, TAU);
                let z = math::sin(x) - math::cos(y);
                rows.extend([x, y, z]);
                targets.push(z);
            }
            (names(&["x", "y", "z"]), true)
        }
        "circle3d" => {
            for _ in 0..n {
                let theta = math::rem_euclid(rng.standard_normal(), TAU);
                rows.extend([math::cos(theta), math::sin(theta), 1.0]);
            }
            (names(&["x", "y", "z"]), false)
        }
        "circle-uniform" => {
            for _ in 0..n {
                let theta = rng.uniform_in(0.0, TAU);
                rows.extend([math::cos(theta), math::sin(theta)]);
            }
            (names(&["x", "y"]), false)
        }
        "disc-rot" => {
            let k = spec.parameters.get("k").copied().unwrap_or(7.0);
            let z = spec.parameters.get("z").copied().unwrap_or(1.0);
            if !(k >= 2.0) || math::floor(k) != k {
                return Err(Error::InvalidArgument(alloc::format!("disc-rot needs an integer k ≥ 2, got {k}")));
            }
            if !z.is_finite() {
                return Err(Error::InvalidArgument("disc-rot z must be finite".into()));
            }
            for _ in 0..n {
                let x = rng.standard_normal();
                let y = rng.standard_normal();
                rows.extend([x, y]);
                targets.push(disc_rot_value(x, y, z, k));
            }
            (names(&["x", "y"]), true)
        }
        "killing4d" => {
            for _ in 0..n {
                let u = rng.uniform_in(-1.0, 1.0);
                let v = rng.uniform_in(-1.0, 1.0);
                let w = rng.uniform_in(-1.0, 1.0);
                rows.extend([u, v, w, u, v, u * u + v * v - w, 2.0 * u]);
                targets.push(9.0 * u * u + v * v + w);
            }
            (names(&["u", "v", "w", "x", "y", "z", "t"]), true)
        }
        "hypercube10" => {
            for _ in 0..n {
                let t = rng.uniform_in(-2.0, 2.0);
                let x = rng.uniform_in(-2.0, 2.0);
                let y = rng.uniform_in(-2.0, 2.0);
                let z = rng.uniform_in(-2.0, 2.0);
                rows.extend([t, x, y, z, 2.0 * t, x * x + y * y - t, 4.0, 0.0, t - z, 1.0]);
            }
            ((1..=10).map(|i| alloc::format!("x{i}")).collect(), false)
        }
        _ => unreachable!("name validated above"),
    };
    let width = columns.len();
    Ok(Dataset {
        columns,
        data: Matrix::from_vec(n, width, rows),
        targets: has_targets.then_some(targets),
    })
}
