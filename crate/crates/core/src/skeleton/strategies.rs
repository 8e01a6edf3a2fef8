use std::time::Instant;

use super::pool::run_units;
use super::{early_termination, finish, Counters, Guard, SkeletonError, WorkUnit};
use crate::comb::{binomial, positions_into, CombError};
use crate::graph::{
    AdjacencyMatrix, CompactedAdjacency, CorrelationMatrix, LevelStats, SeparationSets, SkeletonConfig, Strategy,
};
use crate::stats::{fisher_z, ConditioningSet};

/// Marginal tests of every pair of the complete graph. Rows are the work
/// units; row `i` tests `(i, j)` for all `j > i`.
pub fn level_zero(
    corr: &CorrelationMatrix,
    tau0: f64,
    adj: &AdjacencyMatrix,
    sepsets: &SeparationSets,
    workers: usize,
    order_seed: Option<u64>,
) -> LevelStats {
    let started = Instant::now();
    let n = corr.dim();
    let rows: Vec<usize> = (0..n).collect();
    let locals = run_units(&rows, workers, order_seed, |&i, c: &mut Counters| {
        let row = corr.row(i);
        for j in i + 1..n {
            c.ci_tests += 1;
            if fisher_z(row[j]) <= tau0 && adj.remove_edge(i, j) {
                c.edges_removed += 1;
                sepsets.insert(i, j, Vec::new());
            }
        }
        Ok::<(), SkeletonError>(())
    })
    .expect("level zero cannot fail");
    finish(0, started, locals)
}

/// Runs one test and applies the removal. Returns whether the pair tested
/// independent.
#[inline]
#[allow(clippy::too_many_arguments)]
fn test_and_remove(
    corr: &CorrelationMatrix,
    set: &ConditioningSet,
    i: usize,
    j: usize,
    tau: f64,
    adj: &AdjacencyMatrix,
    sepsets: &SeparationSets,
    c: &mut Counters,
) -> bool {
    c.ci_tests += 1;
    // A degenerate residual covariance is inconclusive: keep the edge.
    match set.ci_test_unchecked(corr, i, j, tau) {
        Ok(d) if d.independent => {
            if adj.remove_edge(i, j) {
                c.edges_removed += 1;
            }
            sepsets.insert(i, j, set.members().to_vec());
            true
        }
        _ => false,
    }
}

fn members(row: &[usize], positions: &[usize]) -> Vec<usize> {
    positions.iter().map(|&p| row[p]).collect()
}

/// Reference level: every ordered edge `(i, j)` of the snapshot, one
/// conditioning set at a time in rank order, one pseudo-inverse per test.
pub fn level_serial(
    corr: &CorrelationMatrix,
    tau: f64,
    adj: &AdjacencyMatrix,
    snapshot: &CompactedAdjacency,
    ell: usize,
    sepsets: &SeparationSets,
) -> Result<LevelStats, SkeletonError> {
    if ell == 0 {
        return Err(SkeletonError::InvalidLevel { level: ell });
    }
    let started = Instant::now();
    let mut c = Counters::default();
    let mut pos = vec![0usize; ell];
    for i in 0..snapshot.len() {
        let row = snapshot.row(i);
        if row.len() < ell + 1 {
            continue;
        }
        let total = binomial(row.len() - 1, ell)?;
        for (p, &j) in row.iter().enumerate() {
            for t in 0..total {
                if !adj.has_edge(i, j) {
                    break;
                }
                positions_into(row.len() - 1, t, Some(p), &mut pos)?;
                let set = ConditioningSet::build(corr, members(row, &pos))?;
                c.pseudo_inverses += 1;
                if test_and_remove(corr, &set, i, j, tau, adj, sepsets, &mut c) {
                    break;
                }
            }
        }
    }
    Ok(finish(ell, started, [c]))
}

/// Neighbors handled by edge-parallel chunk `chunk` of a row.
pub fn edge_chunk(row: &[usize], chunk: usize, beta: usize) -> &[usize] {
    let lo = (chunk * beta).min(row.len());
    let hi = (lo + beta).min(row.len());
    &row[lo..hi]
}

/// Ranks visited by lane `lane` of `gamma` over a rank space of size `total`.
pub fn lane_ranks(total: u64, lane: usize, gamma: usize) -> impl Iterator<Item = u64> {
    (lane as u64..total).step_by(gamma)
}

/// Edge-parallel level. Units are `(row, chunk)` over an `n x ceil(n'/beta)`
/// grid; each covers `beta` consecutive snapshot neighbors. An edge's
/// `C(n'_i - 1, l)` conditioning sets are split over `gamma` lanes with
/// stride `gamma`. Lanes advance in lockstep: each step every lane reads the
/// live edge once, then all of them run their test, so a removal found by
/// one lane stops the others at the next step.
pub fn level_edge_parallel(
    corr: &CorrelationMatrix,
    tau: f64,
    adj: &AdjacencyMatrix,
    snapshot: &CompactedAdjacency,
    ell: usize,
    config: &SkeletonConfig,
    sepsets: &SeparationSets,
) -> Result<LevelStats, SkeletonError> {
    if ell == 0 {
        return Err(SkeletonError::InvalidLevel { level: ell });
    }
    let started = Instant::now();
    let chunks = snapshot.max_width().div_ceil(config.beta);
    let units: Vec<WorkUnit> =
        (0..snapshot.len()).flat_map(|row| (0..chunks).map(move |chunk| WorkUnit { row, chunk })).collect();
    let gamma = config.gamma as u64;
    let locals = run_units(&units, config.workers, config.schedule_seed, |u, c: &mut Counters| {
        let staged: Vec<usize> = snapshot.row(u.row).to_vec();
        if early_termination(staged.len(), ell, u.chunk, Strategy::EdgeParallel, config)? == Guard::Skip {
            return Ok(());
        }
        let i = u.row;
        let total = binomial(staged.len() - 1, ell)?;
        let mut pos = vec![0usize; ell];
        let first = u.chunk * config.beta;
        for (offset, &j) in edge_chunk(&staged, u.chunk, config.beta).iter().enumerate() {
            let p = first + offset;
            let mut step = 0u64;
            while step < total {
                if !adj.has_edge(i, j) {
                    break;
                }
                for t in step..(step + gamma).min(total) {
                    positions_into(staged.len() - 1, t, Some(p), &mut pos)?;
                    let set = ConditioningSet::build(corr, members(&staged, &pos))?;
                    c.pseudo_inverses += 1;
                    test_and_remove(corr, &set, i, j, tau, adj, sepsets, c);
                }
                step += gamma;
            }
        }
        Ok::<(), SkeletonError>(())
    })?;
    Ok(finish(ell, started, locals))
}

/// Ranks of the `C(n'_i, l)` set space handled by set-shared chunk `chunk`:
/// `theta` consecutive ranks starting at `chunk * theta`, then every
/// `theta * delta`.
pub fn set_shared_ranks(total: u64, chunk: usize, theta: usize, delta: usize) -> impl Iterator<Item = u64> {
    let (theta, stride) = (theta as u64, (theta * delta) as u64);
    (chunk as u64 * theta..total).step_by(stride as usize).flat_map(move |base| base..(base + theta).min(total))
}

/// Conditioning set `S` decoded from rank `t` of a row, and the neighbors
/// `j` of that row (in row order) that get tested against it.
pub fn set_shared_targets(row: &[usize], ell: usize, t: u64) -> Result<(Vec<usize>, Vec<usize>), CombError> {
    let mut pos = vec![0usize; ell];
    positions_into(row.len(), t, None, &mut pos)?;
    let set = members(row, &pos);
    let targets = row.iter().enumerate().filter(|(p, _)| !pos.contains(p)).map(|(_, &j)| j).collect();
    Ok((set, targets))
}

/// Set-shared level. Units are `(row, chunk)` over an `n x delta` grid. For
/// every conditioning set `S` of a row the pseudo-inverse of `C[S, S]` is
/// computed at most once and reused for each remaining edge `(i, j)` with
/// `j` not in `S`.
pub fn level_set_shared(
    corr: &CorrelationMatrix,
    tau: f64,
    adj: &AdjacencyMatrix,
    snapshot: &CompactedAdjacency,
    ell: usize,
    config: &SkeletonConfig,
    sepsets: &SeparationSets,
) -> Result<LevelStats, SkeletonError> {
    if ell == 0 {
        return Err(SkeletonError::InvalidLevel { level: ell });
    }
    let started = Instant::now();
    let units: Vec<WorkUnit> =
        (0..snapshot.len()).flat_map(|row| (0..config.delta).map(move |chunk| WorkUnit { row, chunk })).collect();
    let locals = run_units(&units, config.workers, config.schedule_seed, |u, c: &mut Counters| {
        let staged: Vec<usize> = snapshot.row(u.row).to_vec();
        if early_termination(staged.len(), ell, u.chunk, Strategy::SetShared, config)? == Guard::Skip {
            return Ok(());
        }
        let i = u.row;
        let total = binomial(staged.len(), ell)?;
        let mut pos = vec![0usize; ell];
        for t in set_shared_ranks(total, u.chunk, config.theta, config.delta) {
            positions_into(staged.len(), t, None, &mut pos)?;
            // Built on the first live target, so a set whose edges are all
            // gone already costs nothing.
            let mut shared: Option<ConditioningSet> = None;
            let mut next_in_set = 0;
            for (p, &j) in staged.iter().enumerate() {
                // `pos` is ascending, so membership is a merge walk.
                if next_in_set < ell && pos[next_in_set] == p {
                    next_in_set += 1;
                    continue;
                }
                if !adj.has_edge(i, j) {
                    continue;
                }
                let set = match shared {
                    Some(ref s) => s,
                    None => {
                        c.pseudo_inverses += 1;
                        shared.insert(ConditioningSet::build(corr, members(&staged, &pos))?)
                    }
                };
                test_and_remove(corr, set, i, j, tau, adj, sepsets, c);
            }
        }
        Ok::<(), SkeletonError>(())
    })?;
    Ok(finish(ell, started, locals))
}
