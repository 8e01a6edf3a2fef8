//! Synthetic linear-Gaussian data.
//!
//! A random DAG puts a Bernoulli(`d`) edge on every strictly-lower-triangular
//! cell `(i, j)`, `j < i`, with a Uniform[0.1, 1] weight. Samples follow
//! `V_i = N_i + sum_{j<i} W[i, j] V_j` with independent standard normal `N_i`.
//!
//! Randomness is fully specified so the same seed reproduces the same bytes
//! in any language:
//!
//! * generator: xoshiro256++ seeded from a `u64` through SplitMix64;
//! * uniform: `(next_u64() >> 11) * 2^-53`, in `[0, 1)`;
//! * DAG: cells visited row by row (`i = 1..n`, `j = 0..i`); each draws one
//!   uniform `u` and, when `u < d`, a second uniform `v` for the weight
//!   `0.1 + 0.9 v`;
//! * normal: Box-Muller cosine branch, `sqrt(-2 ln(1 - u1)) cos(2 pi u2)`,
//!   two uniforms per variate; samples are drawn row by row, variable by
//!   variable.

use rand_core::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::graph::{DataMatrix, GraphError};

pub const WEIGHT_MIN: f64 = 0.1;
pub const WEIGHT_MAX: f64 = 1.0;

/// Seeded uniform/normal source used by the generators.
#[derive(Debug, Clone)]
pub struct SampleRng(Xoshiro256PlusPlus);

impl SampleRng {
    pub fn new(seed: u64) -> Self {
        Self(Xoshiro256PlusPlus::seed_from_u64(seed))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    pub fn uniform(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn standard_normal(&mut self) -> f64 {
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedDag {
    n: usize,
    /// Row-major `n x n`, strictly lower triangular.
    weights: Vec<f64>,
}

impl WeightedDag {
    pub fn random(n: usize, density: f64, seed: u64) -> Self {
        let mut rng = SampleRng::new(seed);
        let mut weights = vec![0.0; n * n];
        for i in 1..n {
            for j in 0..i {
                if rng.uniform() < density {
                    weights[i * n + j] = WEIGHT_MIN + (WEIGHT_MAX - WEIGHT_MIN) * rng.uniform();
                }
            }
        }
        Self { n, weights }
    }

    /// Wraps an explicit weight matrix; entries on or above the diagonal must be zero.
    pub fn from_weights(n: usize, weights: Vec<f64>) -> Result<Self, GraphError> {
        if weights.len() != n * n {
            return Err(GraphError::ShapeMismatch { rows: n, cols: n, got: weights.len() });
        }
        for i in 0..n {
            for j in i..n {
                if weights[i * n + j] != 0.0 {
                    return Err(GraphError::InvalidConfig(format!(
                        "weight ({i}, {j}) is not strictly lower triangular"
                    )));
                }
            }
        }
        Ok(Self { n, weights })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.n + j]
    }

    /// Directed edges `(parent, child)` sorted by child, then parent.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.n {
            for j in 0..i {
                if self.weight(i, j) != 0.0 {
                    out.push((j, i));
                }
            }
        }
        out
    }

    pub fn edge_count(&self) -> usize {
        self.weights.iter().filter(|&&w| w != 0.0).count()
    }
}

pub fn random_dag(n: usize, density: f64, seed: u64) -> WeightedDag {
    WeightedDag::random(n, density, seed)
}

/// Draws `m` samples. Panics if `m < 4` or the DAG has fewer than 2 nodes.
pub fn sample_linear_gaussian(dag: &WeightedDag, m: usize, seed: u64) -> DataMatrix {
    let n = dag.n;
    let mut rng = SampleRng::new(seed);
    let parents: Vec<Vec<(usize, f64)>> =
        (0..n).map(|i| (0..i).filter_map(|j| Some((j, dag.weight(i, j))).filter(|p| p.1 != 0.0)).collect()).collect();
    let mut values = vec![0.0; m * n];
    for row in values.chunks_mut(n) {
        for i in 0..n {
            let mut x = rng.standard_normal();
            for &(j, w) in &parents[i] {
                x += w * row[j];
            }
            row[i] = x;
        }
    }
    DataMatrix::new(m, n, values).expect("generated data satisfies DataMatrix invariants")
}
