//! Free points on a sphere under the MHE energy.
//!
//! Minimizing hyperspherical energy over unconstrained unit vectors is the
//! Thomson problem, whose small-N optima are known polyhedra. Running the
//! energy kernel through a plain projected gradient descent and landing on
//! those optima checks the energy, its gradient and the projection together.

use std::str::FromStr;

use ndarray::{Array2, Axis};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use thiserror::Error;

use crate::energy::{layer_energy, EnergyError, FilterBank, MheConfig};
use crate::rng::{self, Stream};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ThomsonError {
    #[error(transparent)]
    Energy(#[from] EnergyError),
    #[error("{shape:?} needs at least {min_dim} dimensions, got {dim}")]
    IncompatibleShape {
        shape: Shape,
        min_dim: usize,
        dim: usize,
    },
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
}

/// Unit vectors, one per row, with the energy after every accepted step.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    pub points: Array2<f64>,
    pub history: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinimizeOptions {
    pub steps: usize,
    pub restarts: usize,
    pub step_size: f64,
    pub seed: u64,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        Self {
            steps: 3000,
            restarts: 8,
            step_size: 0.1,
            seed: 0,
        }
    }
}

fn energy_of(points: &Array2<f64>, cfg: &MheConfig) -> Result<(f64, Array2<f64>), EnergyError> {
    let bank = FilterBank::new(points.clone(), 0)?;
    let r = layer_energy(&bank, cfg)?;
    Ok((r.energy, r.gradient))
}

fn normalize_rows(points: &mut Array2<f64>) {
    for mut row in points.axis_iter_mut(Axis(0)) {
        let n = row.dot(&row).sqrt();
        row.mapv_inplace(|v| v / n);
    }
}

fn descend(
    mut points: Array2<f64>,
    cfg: &MheConfig,
    opts: &MinimizeOptions,
) -> Result<PointSet, EnergyError> {
    normalize_rows(&mut points);
    let (mut energy, mut grad) = energy_of(&points, cfg)?;
    let mut history = vec![energy];
    // Step relative to the gradient scale so one setting works for all N and s.
    let mut step = opts.step_size;
    for _ in 0..opts.steps {
        let gnorm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if gnorm == 0.0 || step < 1e-16 {
            break;
        }
        let mut candidate = &points - &(&grad * (step / gnorm));
        normalize_rows(&mut candidate);
        let (e, g) = energy_of(&candidate, cfg)?;
        if e <= energy {
            points = candidate;
            energy = e;
            grad = g;
            history.push(energy);
            step = (step * 1.2).min(1.0);
        } else {
            step *= 0.5;
        }
    }
    Ok(PointSet { points, history })
}

/// Best energy over `restarts` projected gradient descents from random
/// starts on S^(d-1). Ties go to the lowest restart index.
pub fn minimize_energy(
    n: usize,
    d: usize,
    cfg: &MheConfig,
    opts: &MinimizeOptions,
) -> Result<(f64, PointSet), ThomsonError> {
    if n < 2 || d < 2 {
        return Err(ThomsonError::InvalidProblem(format!(
            "need N >= 2 and d >= 2, got N={n}, d={d}"
        )));
    }
    if opts.restarts == 0 {
        return Err(ThomsonError::InvalidProblem(
            "need at least one restart".into(),
        ));
    }
    cfg.validate()?;
    let runs = (0..opts.restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng::substream(opts.seed, Stream::Thomson, r as u64);
            let start = Array2::from_shape_fn((n, d), |_| StandardNormal.sample(&mut rng));
            descend(start, cfg, opts)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let best = runs
        .into_iter()
        .reduce(|best, run| {
            if run.history.last() < best.history.last() {
                run
            } else {
                best
            }
        })
        .expect("at least one restart");
    Ok((*best.history.last().expect("history is never empty"), best))
}

/// Known optimal arrangements for small N.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    Antipodal,
    Triangle,
    Tetrahedron,
    Octahedron,
    Icosahedron,
}

impl Shape {
    pub fn points(self) -> usize {
        match self {
            Shape::Antipodal => 2,
            Shape::Triangle => 3,
            Shape::Tetrahedron => 4,
            Shape::Octahedron => 6,
            Shape::Icosahedron => 12,
        }
    }

    fn min_dim(self) -> usize {
        match self {
            Shape::Antipodal | Shape::Triangle => 2,
            _ => 3,
        }
    }

    /// The shape that is the known optimum for `n` points in `d` dimensions.
    pub fn for_problem(n: usize, d: usize) -> Option<Shape> {
        let shape = match n {
            2 => Shape::Antipodal,
            3 => Shape::Triangle,
            4 => Shape::Tetrahedron,
            6 => Shape::Octahedron,
            12 => Shape::Icosahedron,
            _ => return None,
        };
        // In d = 3 exactly, the polyhedra are the optima; higher d has a
        // simplex optimum for more of these N, so only claim d <= 3.
        (d >= shape.min_dim() && (d <= 3 || n <= 3)).then_some(shape)
    }

    /// Unit-vector coordinates in `dim` dimensions (zero padded).
    pub fn coordinates(self, dim: usize) -> Result<Array2<f64>, ThomsonError> {
        if dim < self.min_dim() {
            return Err(ThomsonError::IncompatibleShape {
                shape: self,
                min_dim: self.min_dim(),
                dim,
            });
        }
        let base: Vec<[f64; 3]> = match self {
            Shape::Antipodal => vec![[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0]],
            Shape::Triangle => (0..3)
                .map(|k| {
                    let a = std::f64::consts::TAU * k as f64 / 3.0;
                    [a.cos(), a.sin(), 0.0]
                })
                .collect(),
            Shape::Tetrahedron => vec![
                [1.0, 1.0, 1.0],
                [1.0, -1.0, -1.0],
                [-1.0, 1.0, -1.0],
                [-1.0, -1.0, 1.0],
            ],
            Shape::Octahedron => vec![
                [1.0, 0.0, 0.0],
                [-1.0, 0.0, 0.0],
                [0.0, 1.0, 0.0],
                [0.0, -1.0, 0.0],
                [0.0, 0.0, 1.0],
                [0.0, 0.0, -1.0],
            ],
            Shape::Icosahedron => {
                let phi = (1.0 + 5f64.sqrt()) / 2.0;
                let mut v = Vec::with_capacity(12);
                for a in [-1.0, 1.0] {
                    for b in [-phi, phi] {
                        v.push([0.0, a, b]);
                        v.push([a, b, 0.0]);
                        v.push([b, 0.0, a]);
                    }
                }
                v
            }
        };
        let mut points = Array2::zeros((base.len(), dim));
        for (i, p) in base.iter().enumerate() {
            for (j, &x) in p.iter().enumerate().take(dim) {
                points[[i, j]] = x;
            }
        }
        normalize_rows(&mut points);
        Ok(points)
    }
}

impl FromStr for Shape {
    type Err = ThomsonError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "antipodal" => Shape::Antipodal,
            "triangle" => Shape::Triangle,
            "tetrahedron" => Shape::Tetrahedron,
            "octahedron" => Shape::Octahedron,
            "icosahedron" => Shape::Icosahedron,
            other => {
                return Err(ThomsonError::InvalidProblem(format!(
                    "unknown shape '{other}'"
                )))
            }
        })
    }
}

/// Energy of the exact `shape` coordinates in `dim` dimensions.
pub fn reference_energy(shape: Shape, dim: usize, cfg: &MheConfig) -> Result<f64, ThomsonError> {
    let points = shape.coordinates(dim)?;
    Ok(energy_of(&points, cfg)?.0)
}
