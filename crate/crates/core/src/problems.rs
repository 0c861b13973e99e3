//! Continuous single-objective test functions with seeded instance transforms.
//!
//! An instance is a base function plus an optimum shift and, for the
//! ill-conditioned and rugged functions, a random orthogonal rotation. The
//! objective is evaluated at `z = R (x - shift)` and every instance has its
//! global minimum value 0 at the shift (or, for the linear slope, at the
//! corner of the box pointed to by the shift).

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

pub const DEFAULT_LOWER: f64 = -5.0;
pub const DEFAULT_UPPER: f64 = 5.0;
const SHIFT_RANGE: f64 = 4.0;
const WEIERSTRASS_TERMS: i32 = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FunctionId {
    Sphere,
    Ellipsoid,
    LinearSlope,
    Rastrigin,
    Weierstrass,
}

impl FunctionId {
    pub const ALL: [FunctionId; 5] = [
        FunctionId::Sphere,
        FunctionId::Ellipsoid,
        FunctionId::LinearSlope,
        FunctionId::Rastrigin,
        FunctionId::Weierstrass,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FunctionId::Sphere => "sphere",
            FunctionId::Ellipsoid => "ellipsoid",
            FunctionId::LinearSlope => "linear_slope",
            FunctionId::Rastrigin => "rastrigin",
            FunctionId::Weierstrass => "weierstrass",
        }
    }

    fn is_rotated(self) -> bool {
        matches!(self, FunctionId::Ellipsoid | FunctionId::Weierstrass)
    }
}

impl fmt::Display for FunctionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FunctionId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        FunctionId::ALL
            .into_iter()
            .find(|f| f.name() == norm)
            .ok_or_else(|| Error::Config(format!("unknown function `{s}`")))
    }
}

/// A concrete, immutable problem instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemInstance {
    pub function: FunctionId,
    pub dimension: usize,
    pub instance_seed: u64,
    /// Optimum location; for the linear slope, the corner `5 * sign`.
    pub shift: Vec<f64>,
    /// Row-major `d x d` orthogonal matrix; `None` means identity.
    pub rotation: Option<Vec<f64>>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl ProblemInstance {
    /// Deterministic instance for `(function, dimension, instance_seed)`.
    pub fn new(function: FunctionId, dimension: usize, instance_seed: u64) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::Config("dimension must be at least 1".into()));
        }
        let label = format!("instance/{}/{}", function.name(), dimension);
        let mut rng = seed::rng(seed::derive(instance_seed, &label));

        let shift = match function {
            FunctionId::LinearSlope => (0..dimension)
                .map(|_| if rng.random_bool(0.5) { DEFAULT_UPPER } else { DEFAULT_LOWER })
                .collect(),
            _ => (0..dimension)
                .map(|_| rng.random_range(-SHIFT_RANGE..=SHIFT_RANGE))
                .collect(),
        };
        let rotation = function
            .is_rotated()
            .then(|| random_rotation(dimension, &mut rng));

        Ok(ProblemInstance {
            function,
            dimension,
            instance_seed,
            shift,
            rotation,
            lower: vec![DEFAULT_LOWER; dimension],
            upper: vec![DEFAULT_UPPER; dimension],
        })
    }

    /// Identifier used in file names and CSV columns, e.g. `sphere-d2-i1`.
    pub fn id(&self) -> String {
        format!("{}-d{}-i{}", self.function, self.dimension, self.instance_seed)
    }

    /// The location of the global minimum.
    pub fn optimum(&self) -> &[f64] {
        &self.shift
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dimension {
            return Err(Error::usage(format!(
                "point has dimension {}, problem {} expects {}",
                x.len(),
                self.id(),
                self.dimension
            )));
        }
        if let Some(bad) = x.iter().find(|v| !v.is_finite()) {
            return Err(Error::usage(format!("non-finite coordinate {bad}")));
        }
        Ok(self.evaluate_unchecked(x))
    }

    /// Evaluate without validating `x`; callers guarantee length and finiteness.
    pub(crate) fn evaluate_unchecked(&self, x: &[f64]) -> f64 {
        let d = self.dimension;
        match self.function {
            FunctionId::LinearSlope => {
                let mut total = 0.0;
                for i in 0..d {
                    let o = self.shift[i];
                    let s = o.signum() * condition(i, d, 10.0);
                    let z = if o * x[i] < 25.0 { x[i] } else { o };
                    total += 5.0 * s.abs() - s * z;
                }
                total
            }
            FunctionId::Sphere => self.transformed(x).iter().map(|z| z * z).sum(),
            FunctionId::Ellipsoid => self
                .transformed(x)
                .iter()
                .enumerate()
                .map(|(i, z)| condition(i, d, 1e6) * z * z)
                .sum(),
            FunctionId::Rastrigin => self
                .transformed(x)
                .iter()
                .map(|z| 10.0 + z * z - 10.0 * (2.0 * PI * z).cos())
                .sum(),
            FunctionId::Weierstrass => {
                let offset: f64 = (0..WEIERSTRASS_TERMS)
                    .map(|k| 0.5f64.powi(k) * (PI * 3f64.powi(k)).cos())
                    .sum();
                self.transformed(x)
                    .iter()
                    .map(|z| {
                        let inner: f64 = (0..WEIERSTRASS_TERMS)
                            .map(|k| 0.5f64.powi(k) * (2.0 * PI * 3f64.powi(k) * (z + 0.5)).cos())
                            .sum();
                        inner - offset
                    })
                    .sum()
            }
        }
    }

    fn transformed(&self, x: &[f64]) -> Vec<f64> {
        let centred: Vec<f64> = x.iter().zip(&self.shift).map(|(a, o)| a - o).collect();
        match &self.rotation {
            None => centred,
            Some(r) => r
                .chunks_exact(self.dimension)
                .map(|row| row.iter().zip(&centred).map(|(a, b)| a * b).sum())
                .collect(),
        }
    }

    pub fn clamp(&self, x: &mut [f64]) {
        for ((v, lo), hi) in x.iter_mut().zip(&self.lower).zip(&self.upper) {
            *v = v.clamp(*lo, *hi);
        }
    }
}

/// `base^((i-1)/(d-1))` with 1-based `i`; defined as 1 when `d == 1`.
fn condition(i: usize, d: usize, base: f64) -> f64 {
    if d == 1 {
        1.0
    } else {
        base.powf(i as f64 / (d - 1) as f64)
    }
}

/// Haar-distributed orthogonal matrix from the QR factorisation of a
/// Gaussian matrix, with column signs fixed by `diag(R)`.
fn random_rotation(d: usize, rng: &mut seed::Rng) -> Vec<f64> {
    let gauss = DMatrix::<f64>::from_fn(d, d, |_, _| rng.sample(StandardNormal));
    let qr = gauss.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    let mut out = Vec::with_capacity(d * d);
    for i in 0..d {
        for j in 0..d {
            out.push(q[(i, j)]);
        }
    }
    out
}
