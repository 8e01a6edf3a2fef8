//! JSON run report written next to the skeleton. Timings are whole
//! milliseconds, truncated.

use serde::{Deserialize, Serialize};

use pcskel_core::{LevelStats, SkeletonConfig, SkeletonResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub alpha: f64,
    pub strategy: String,
    pub beta: usize,
    pub gamma: usize,
    pub theta: usize,
    pub delta: usize,
    pub workers: usize,
    pub max_level: Option<usize>,
}

impl From<&SkeletonConfig> for ConfigEcho {
    fn from(c: &SkeletonConfig) -> Self {
        Self {
            alpha: c.alpha,
            strategy: c.strategy.name().to_string(),
            beta: c.beta,
            gamma: c.gamma,
            theta: c.theta,
            delta: c.delta,
            workers: c.workers,
            max_level: c.max_level,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputFingerprint {
    pub n: usize,
    pub m: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LevelEntry {
    pub level: usize,
    pub ci_tests: u64,
    pub pseudo_inverses: u64,
    pub edges_removed: u64,
    pub elapsed_ms: u64,
}

impl From<&LevelStats> for LevelEntry {
    fn from(s: &LevelStats) -> Self {
        Self {
            level: s.level,
            ci_tests: s.ci_tests,
            pseudo_inverses: s.pseudo_inverses,
            edges_removed: s.edges_removed,
            elapsed_ms: s.elapsed.as_millis() as u64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: ConfigEcho,
    pub input: InputFingerprint,
    pub levels: Vec<LevelEntry>,
    /// Field-wise sums of `levels`; `level` holds the number of levels run.
    pub totals: LevelEntry,
    /// Correlation plus skeleton search.
    pub wall_ms: u64,
    pub stop_reason: String,
    pub edges_initial: u64,
    pub edges_final: u64,
}

impl RunReport {
    pub fn new(config: &SkeletonConfig, input: InputFingerprint, result: &SkeletonResult, wall_ms: u64) -> Self {
        let levels: Vec<LevelEntry> = result.stats.iter().map(LevelEntry::from).collect();
        let mut totals = LevelEntry { level: levels.len(), ..Default::default() };
        for l in &levels {
            totals.ci_tests += l.ci_tests;
            totals.pseudo_inverses += l.pseudo_inverses;
            totals.edges_removed += l.edges_removed;
            totals.elapsed_ms += l.elapsed_ms;
        }
        let n = input.n as u64;
        Self {
            config: config.into(),
            input,
            levels,
            totals,
            wall_ms,
            stop_reason: result.stop_reason.name().to_string(),
            edges_initial: n * n.saturating_sub(1) / 2,
            edges_final: result.skeleton.edge_count() as u64,
        }
    }

    /// Checks that levels are in order and the totals add up.
    pub fn check(&self) -> Result<(), String> {
        if self.levels.iter().enumerate().any(|(k, l)| l.level != k) {
            return Err("level entries out of order".into());
        }
        let sum = |f: fn(&LevelEntry) -> u64| self.levels.iter().map(f).sum::<u64>();
        if sum(|l| l.ci_tests) != self.totals.ci_tests
            || sum(|l| l.pseudo_inverses) != self.totals.pseudo_inverses
            || sum(|l| l.edges_removed) != self.totals.edges_removed
            || sum(|l| l.elapsed_ms) != self.totals.elapsed_ms
        {
            return Err("totals differ from the sum of levels".into());
        }
        if self.totals.elapsed_ms > self.wall_ms {
            return Err(format!("level time {} ms exceeds wall time {} ms", self.totals.elapsed_ms, self.wall_ms));
        }
        if self.edges_initial - self.totals.edges_removed != self.edges_final {
            return Err("removals do not account for the final edge count".into());
        }
        Ok(())
    }
}
