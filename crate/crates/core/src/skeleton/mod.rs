//! PC-stable skeleton discovery.
//!
//! Levels run strictly in sequence. Level 0 tests every pair marginally.
//! Each later level `l` first freezes the live graph into a
//! [`CompactedAdjacency`] snapshot; conditioning sets of size `l` are always
//! drawn from that snapshot while removals go to the live
//! [`AdjacencyMatrix`]. Because no test at level `l` depends on removals made
//! during level `l`, the set of removed edges is independent of test order,
//! strategy and worker count.
//!
//! The loop stops once the widest snapshot row cannot supply one neighbor
//! plus `l` conditioners, when `max_level` is exceeded, or when the sample
//! size leaves no degrees of freedom for a level-`l` test.

mod pool;
mod strategies;

use std::time::Instant;

use thiserror::Error;

use crate::comb::{binomial, CombError};
use crate::graph::{
    compact, AdjacencyMatrix, CompactedAdjacency, CorrelationMatrix, GraphError, LevelStats, SeparationSets,
    SkeletonConfig, Strategy,
};
use crate::stats::{threshold_tau, StatsError};

pub use strategies::{
    edge_chunk, lane_ranks, level_edge_parallel, level_serial, level_set_shared, level_zero, set_shared_ranks,
    set_shared_targets,
};

#[derive(Debug, Error)]
pub enum SkeletonError {
    #[error(transparent)]
    Config(#[from] GraphError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Comb(#[from] CombError),
    #[error("level {level} requires ell >= 1")]
    InvalidLevel { level: usize },
}

/// Why the level loop ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// No row of the level-start snapshot has `l + 1` neighbors.
    MaxDegree,
    /// `config.max_level` reached.
    MaxLevel,
    /// `m - l - 3 < 1`: the threshold is undefined at this level.
    SampleSize,
}

impl StopReason {
    pub fn name(self) -> &'static str {
        match self {
            StopReason::MaxDegree => "max_degree",
            StopReason::MaxLevel => "max_level",
            StopReason::SampleSize => "sample_size",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SkeletonResult {
    pub skeleton: AdjacencyMatrix,
    pub sepsets: SeparationSets,
    pub stats: Vec<LevelStats>,
    pub levels_run: usize,
    pub stop_reason: StopReason,
}

impl SkeletonResult {
    pub fn total_ci_tests(&self) -> u64 {
        self.stats.iter().map(|s| s.ci_tests).sum()
    }

    pub fn total_pseudo_inverses(&self) -> u64 {
        self.stats.iter().map(|s| s.pseudo_inverses).sum()
    }
}

/// Block coordinates of one unit of level work: a row of the snapshot and a
/// chunk within it (a run of `beta` neighbors for edge-parallel, a
/// set-group for set-shared).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WorkUnit {
    pub row: usize,
    pub chunk: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Guard {
    Proceed,
    Skip,
}

/// Whole-unit early exits: a row needs `l + 1` neighbors, and chunks past
/// the end of the row's edges (edge-parallel) or sets (set-shared) idle.
pub fn early_termination(
    row_len: usize,
    ell: usize,
    chunk: usize,
    strategy: Strategy,
    config: &SkeletonConfig,
) -> Result<Guard, CombError> {
    if row_len < ell + 1 {
        return Ok(Guard::Skip);
    }
    let skip = match strategy {
        Strategy::Serial => false,
        Strategy::EdgeParallel => chunk * config.beta >= row_len,
        Strategy::SetShared => (chunk as u64).saturating_mul(config.theta as u64) >= binomial(row_len, ell)?,
    };
    Ok(if skip { Guard::Skip } else { Guard::Proceed })
}

/// Runs the full level loop on `corr`, estimated from `m` samples.
pub fn run_pc_stable(
    corr: &CorrelationMatrix,
    m: usize,
    config: &SkeletonConfig,
) -> Result<SkeletonResult, SkeletonError> {
    config.validate()?;
    let n = corr.dim();
    let adj = AdjacencyMatrix::complete(n);
    let sepsets = SeparationSets::new();
    let mut stats = Vec::new();

    let stop_reason = 'levels: {
        let Ok(tau0) = threshold_tau(config.alpha, m, 0) else {
            break 'levels StopReason::SampleSize;
        };
        let workers = if config.strategy == Strategy::Serial { 1 } else { config.workers };
        stats.push(level_zero(corr, tau0, &adj, &sepsets, workers, config.schedule_seed));

        let mut ell = 1;
        loop {
            let snapshot = compact(&adj);
            if snapshot.max_width() < ell + 1 {
                break 'levels StopReason::MaxDegree;
            }
            if config.max_level.is_some_and(|cap| ell > cap) {
                break 'levels StopReason::MaxLevel;
            }
            let Ok(tau) = threshold_tau(config.alpha, m, ell) else {
                break 'levels StopReason::SampleSize;
            };
            stats.push(run_level(corr, tau, &adj, &snapshot, ell, config, &sepsets)?);
            ell += 1;
        }
    };

    Ok(SkeletonResult { skeleton: adj, sepsets, levels_run: stats.len(), stats, stop_reason })
}

fn run_level(
    corr: &CorrelationMatrix,
    tau: f64,
    adj: &AdjacencyMatrix,
    snapshot: &CompactedAdjacency,
    ell: usize,
    config: &SkeletonConfig,
    sepsets: &SeparationSets,
) -> Result<LevelStats, SkeletonError> {
    match config.strategy {
        Strategy::Serial => level_serial(corr, tau, adj, snapshot, ell, sepsets),
        Strategy::EdgeParallel => level_edge_parallel(corr, tau, adj, snapshot, ell, config, sepsets),
        Strategy::SetShared => level_set_shared(corr, tau, adj, snapshot, ell, config, sepsets),
    }
}

pub(crate) fn finish(level: usize, started: Instant, counters: impl IntoIterator<Item = Counters>) -> LevelStats {
    let mut stats = LevelStats { level, ..Default::default() };
    for c in counters {
        stats.ci_tests += c.ci_tests;
        stats.pseudo_inverses += c.pseudo_inverses;
        stats.edges_removed += c.edges_removed;
    }
    stats.elapsed = started.elapsed();
    stats
}

#[derive(Debug, Default, Clone, Copy)]
pub(crate) struct Counters {
    pub ci_tests: u64,
    pub pseudo_inverses: u64,
    pub edges_removed: u64,
}

#[cfg(test)]
mod tests;
