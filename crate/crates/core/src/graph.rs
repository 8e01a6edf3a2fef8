//! Shared domain types: observations, correlations, the live skeleton, its
//! per-level compaction, separation sets and run configuration.

use std::collections::HashMap;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error("data matrix needs at least {min} samples, got {got}")]
    TooFewSamples { min: usize, got: usize },
    #[error("data matrix needs at least 2 variables, got {0}")]
    TooFewVariables(usize),
    #[error("data buffer has {got} values, expected {rows} x {cols}")]
    ShapeMismatch { rows: usize, cols: usize, got: usize },
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("correlation matrix is not square ({0} entries)")]
    NotSquare(usize),
    #[error("correlation matrix invalid at ({i}, {j}): {reason}")]
    InvalidCorrelation { i: usize, j: usize, reason: &'static str },
    #[error("neighbor index {index} out of range for {n} variables (row {row})")]
    IndexOutOfRange { row: usize, index: usize, n: usize },
    #[error("self loop at variable {0}")]
    SelfLoop(usize),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

/// Row-major `m x n` observation matrix (rows are samples, columns variables).
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    values: Vec<f64>,
    m: usize,
    n: usize,
}

impl DataMatrix {
    pub const MIN_SAMPLES: usize = 4;

    pub fn new(m: usize, n: usize, values: Vec<f64>) -> Result<Self, GraphError> {
        if values.len() != m * n {
            return Err(GraphError::ShapeMismatch { rows: m, cols: n, got: values.len() });
        }
        if m < Self::MIN_SAMPLES {
            return Err(GraphError::TooFewSamples { min: Self::MIN_SAMPLES, got: m });
        }
        if n < 2 {
            return Err(GraphError::TooFewVariables(n));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(GraphError::NonFinite { row: k / n, col: k % n });
        }
        Ok(Self { values, m, n })
    }

    pub fn samples(&self) -> usize {
        self.m
    }

    pub fn variables(&self) -> usize {
        self.n
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.n + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.values[row * self.n..(row + 1) * self.n]
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        (0..self.m).map(|r| self.get(r, col)).collect()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Symmetric `n x n` Pearson correlation matrix with unit diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    values: Vec<f64>,
    n: usize,
}

impl CorrelationMatrix {
    /// Validates symmetry (exact), unit diagonal and the `[-1, 1]` range.
    pub fn new(n: usize, values: Vec<f64>) -> Result<Self, GraphError> {
        if values.len() != n * n {
            return Err(GraphError::NotSquare(values.len()));
        }
        for i in 0..n {
            if values[i * n + i] != 1.0 {
                return Err(GraphError::InvalidCorrelation { i, j: i, reason: "diagonal must be 1" });
            }
            for j in 0..n {
                let v = values[i * n + j];
                if !v.is_finite() || !(-1.0..=1.0).contains(&v) {
                    return Err(GraphError::InvalidCorrelation { i, j, reason: "entry outside [-1, 1]" });
                }
                if v != values[j * n + i] {
                    return Err(GraphError::InvalidCorrelation { i, j, reason: "not symmetric" });
                }
            }
        }
        Ok(Self { values, n })
    }

    /// Builds from rows, e.g. `vec![vec![1.0, 0.3], vec![0.3, 1.0]]`.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, GraphError> {
        let n = rows.len();
        let mut values = Vec::with_capacity(n * n);
        for r in rows {
            if r.len() != n {
                return Err(GraphError::NotSquare(r.len() * n));
            }
            values.extend_from_slice(r);
        }
        Self::new(n, values)
    }

    pub fn identity(n: usize) -> Self {
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            values[i * n + i] = 1.0;
        }
        Self { values, n }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n..(i + 1) * self.n]
    }
}

/// The live undirected skeleton.
///
/// Cells are atomic so that many workers can clear edges concurrently while
/// others read. Clearing is idempotent; a late-observed removal only costs a
/// redundant CI test.
#[derive(Debug)]
pub struct AdjacencyMatrix {
    cells: Vec<AtomicBool>,
    n: usize,
}

impl AdjacencyMatrix {
    pub fn empty(n: usize) -> Self {
        Self { cells: (0..n * n).map(|_| AtomicBool::new(false)).collect(), n }
    }

    pub fn complete(n: usize) -> Self {
        let cells = (0..n * n).map(|k| AtomicBool::new(k / n != k % n)).collect();
        Self { cells, n }
    }

    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self, GraphError> {
        let mut a = Self::empty(n);
        for &(i, j) in edges {
            a.add_edge(i, j)?;
        }
        Ok(a)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.cells[i * self.n + j].load(Ordering::Relaxed)
    }

    pub fn add_edge(&mut self, i: usize, j: usize) -> Result<(), GraphError> {
        if i >= self.n || j >= self.n {
            return Err(GraphError::IndexOutOfRange { row: i, index: i.max(j), n: self.n });
        }
        if i == j {
            return Err(GraphError::SelfLoop(i));
        }
        *self.cells[i * self.n + j].get_mut() = true;
        *self.cells[j * self.n + i].get_mut() = true;
        Ok(())
    }

    /// Clears both cells of `(i, j)`. Returns whether this call observed the
    /// edge as present; of several racing removals exactly one sees `true`.
    #[inline]
    pub fn remove_edge(&self, i: usize, j: usize) -> bool {
        let (lo, hi) = if i < j { (i, j) } else { (j, i) };
        let was = self.cells[lo * self.n + hi].swap(false, Ordering::Relaxed);
        self.cells[hi * self.n + lo].store(false, Ordering::Relaxed);
        was
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).filter(move |&j| self.has_edge(i, j))
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors(i).count()
    }

    /// Undirected edges as `(i, j)` with `i < j`, ascending.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.n {
            for j in i + 1..self.n {
                if self.has_edge(i, j) {
                    out.push((i, j));
                }
            }
        }
        out
    }

    pub fn edge_count(&self) -> usize {
        self.edges().len()
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| !self.has_edge(i, i) && (0..i).all(|j| self.has_edge(i, j) == self.has_edge(j, i)))
    }
}

impl Clone for AdjacencyMatrix {
    fn clone(&self) -> Self {
        Self { cells: self.cells.iter().map(|c| AtomicBool::new(c.load(Ordering::Relaxed))).collect(), n: self.n }
    }
}

impl PartialEq for AdjacencyMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n
            && self.cells.iter().zip(&other.cells).all(|(a, b)| a.load(Ordering::Relaxed) == b.load(Ordering::Relaxed))
    }
}

impl Eq for AdjacencyMatrix {}

/// Per-row ascending neighbor lists: the frozen snapshot a level draws its
/// conditioning sets from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompactedAdjacency {
    rows: Vec<Vec<usize>>,
    max_width: usize,
}

impl CompactedAdjacency {
    pub fn from_rows(rows: Vec<Vec<usize>>) -> Self {
        let max_width = rows.iter().map(Vec::len).max().unwrap_or(0);
        Self { rows, max_width }
    }

    pub fn row(&self, i: usize) -> &[usize] {
        &self.rows[i]
    }

    pub fn rows(&self) -> &[Vec<usize>] {
        &self.rows
    }

    pub fn count(&self, i: usize) -> usize {
        self.rows[i].len()
    }

    pub fn counts(&self) -> Vec<usize> {
        self.rows.iter().map(Vec::len).collect()
    }

    pub fn max_width(&self) -> usize {
        self.max_width
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

pub fn compact(a: &AdjacencyMatrix) -> CompactedAdjacency {
    let rows = (0..a.dim()).map(|i| a.neighbors(i).collect()).collect();
    CompactedAdjacency::from_rows(rows)
}

pub fn decompress(compacted: &CompactedAdjacency, n: usize) -> Result<AdjacencyMatrix, GraphError> {
    if compacted.len() > n {
        return Err(GraphError::IndexOutOfRange { row: n, index: compacted.len() - 1, n });
    }
    let mut a = AdjacencyMatrix::empty(n);
    for (i, row) in compacted.rows().iter().enumerate() {
        for &j in row {
            if j >= n {
                return Err(GraphError::IndexOutOfRange { row: i, index: j, n });
            }
            if i == j {
                return Err(GraphError::SelfLoop(i));
            }
            *a.cells[i * n + j].get_mut() = true;
        }
    }
    Ok(a)
}

/// Separating sets keyed by unordered pair. Concurrent inserts are allowed;
/// racing writers for the same pair resolve last-writer-wins.
#[derive(Debug, Default)]
pub struct SeparationSets {
    inner: Mutex<HashMap<(usize, usize), Vec<usize>>>,
}

#[inline]
fn key(i: usize, j: usize) -> (usize, usize) {
    if i < j {
        (i, j)
    } else {
        (j, i)
    }
}

impl SeparationSets {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&self, i: usize, j: usize, set: Vec<usize>) {
        debug_assert!(!set.contains(&i) && !set.contains(&j));
        self.inner.lock().unwrap().insert(key(i, j), set);
    }

    pub fn get(&self, i: usize, j: usize) -> Option<Vec<usize>> {
        self.inner.lock().unwrap().get(&key(i, j)).cloned()
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.inner.lock().unwrap().contains_key(&key(i, j))
    }

    pub fn len(&self) -> usize {
        self.inner.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All entries sorted by pair.
    pub fn entries(&self) -> Vec<((usize, usize), Vec<usize>)> {
        let mut v: Vec<_> = self.inner.lock().unwrap().iter().map(|(k, s)| (*k, s.clone())).collect();
        v.sort();
        v
    }
}

impl Clone for SeparationSets {
    fn clone(&self) -> Self {
        Self { inner: Mutex::new(self.inner.lock().unwrap().clone()) }
    }
}

impl PartialEq for SeparationSets {
    fn eq(&self, other: &Self) -> bool {
        self.entries() == other.entries()
    }
}

impl FromIterator<((usize, usize), Vec<usize>)> for SeparationSets {
    fn from_iter<T: IntoIterator<Item = ((usize, usize), Vec<usize>)>>(iter: T) -> Self {
        let s = Self::new();
        for ((i, j), set) in iter {
            s.insert(i, j, set);
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Strategy {
    /// Reference implementation: one CI test at a time, one pseudo-inverse per test.
    Serial,
    /// Work units of `beta` edges from one row; each edge's conditioning-set
    /// ranks are strided across `gamma` lanes.
    EdgeParallel,
    /// Work units own conditioning sets of one row; each set's pseudo-inverse
    /// is computed once and reused for every edge of that row.
    SetShared,
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::Serial => "serial",
            Strategy::EdgeParallel => "edge",
            Strategy::SetShared => "set",
        }
    }
}

impl std::str::FromStr for Strategy {
    type Err = GraphError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "serial" => Ok(Strategy::Serial),
            "edge" | "E" | "e" => Ok(Strategy::EdgeParallel),
            "set" | "S" | "s" => Ok(Strategy::SetShared),
            other => Err(GraphError::InvalidConfig(format!("unknown strategy '{other}'"))),
        }
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonConfig {
    pub alpha: f64,
    pub max_level: Option<usize>,
    pub strategy: Strategy,
    /// Edges per edge-parallel work unit.
    pub beta: usize,
    /// Lanes striding one edge's rank space.
    pub gamma: usize,
    /// Lanes per set-shared work unit.
    pub theta: usize,
    /// Set-shared work units per row.
    pub delta: usize,
    pub workers: usize,
    /// When set, work units are dispatched in a seeded random order.
    pub schedule_seed: Option<u64>,
}

impl Default for SkeletonConfig {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            max_level: None,
            strategy: Strategy::Serial,
            beta: 2,
            gamma: 32,
            theta: 64,
            delta: 2,
            workers: 1,
            schedule_seed: None,
        }
    }
}

impl SkeletonConfig {
    pub fn with_strategy(mut self, strategy: Strategy) -> Self {
        self.strategy = strategy;
        self
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn validate(&self) -> Result<(), GraphError> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(GraphError::InvalidConfig(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        for (name, v) in [
            ("beta", self.beta),
            ("gamma", self.gamma),
            ("theta", self.theta),
            ("delta", self.delta),
            ("workers", self.workers),
        ] {
            if v == 0 {
                return Err(GraphError::InvalidConfig(format!("{name} must be positive")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LevelStats {
    pub level: usize,
    pub ci_tests: u64,
    pub pseudo_inverses: u64,
    pub edges_removed: u64,
    pub elapsed: Duration,
}
