use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use pcskel_core::datagen::{random_dag, sample_linear_gaussian, SampleRng, WeightedDag};
use pcskel_core::orient::{to_cpdag, MixedGraph};
use pcskel_core::stats::compute_correlation;
use pcskel_core::{
    run_pc_stable, AdjacencyMatrix, DataMatrix, SeparationSets, SkeletonConfig, SkeletonResult, Strategy,
};

use crate::error::CliError;
use crate::formats;
use crate::report::{InputFingerprint, RunReport};

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
    fs::write(path, contents).map_err(CliError::io(path))
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(CliError::io(path))
}

/// Random DAG and samples for one seed. The seed feeds a generator whose
/// first two outputs seed the structure and the samples respectively.
pub fn dataset(n: usize, d: f64, m: usize, seed: u64) -> Result<(WeightedDag, DataMatrix), CliError> {
    if n < 2 {
        return Err(CliError::Usage(format!("n must be at least 2, got {n}")));
    }
    if m < DataMatrix::MIN_SAMPLES {
        return Err(CliError::Usage(format!("m must be at least {}, got {m}", DataMatrix::MIN_SAMPLES)));
    }
    if !(0.0..=1.0).contains(&d) {
        return Err(CliError::Usage(format!("d must lie in [0, 1], got {d}")));
    }
    let mut rng = SampleRng::new(seed);
    let dag = random_dag(n, d, rng.next_u64());
    let data = sample_linear_gaussian(&dag, m, rng.next_u64());
    Ok((dag, data))
}

/// Path of the ground-truth edge list written next to `data`.
pub fn truth_path(data: &Path) -> PathBuf {
    data.with_extension("truth.txt")
}

pub fn cmd_gen(n: usize, d: f64, m: usize, seed: u64, out: &Path) -> Result<(), CliError> {
    let (dag, data) = dataset(n, d, m, seed)?;
    write(out, formats::format_data(&data))?;
    write(&truth_path(out), formats::format_directed(n, &dag.edges()))
}

pub struct SkeletonOutput {
    pub result: SkeletonResult,
    pub report: RunReport,
}

pub const SKELETON_FILE: &str = "skeleton.txt";
pub const SEPSETS_FILE: &str = "sepsets.txt";
pub const REPORT_FILE: &str = "report.json";

/// Reads `data`, runs the search and writes skeleton, separation sets and
/// report into the directory `out`.
pub fn cmd_skeleton(data: &Path, config: &SkeletonConfig, out: &Path) -> Result<SkeletonOutput, CliError> {
    config.validate()?;
    let (matrix, bytes) = formats::read_data(data)?;
    let started = Instant::now();
    let corr = compute_correlation(&matrix)?;
    let result = run_pc_stable(&corr, matrix.samples(), config)?;
    let wall_ms = started.elapsed().as_millis() as u64;
    let input =
        InputFingerprint { n: matrix.variables(), m: matrix.samples(), sha256: hex::encode(Sha256::digest(&bytes)) };
    let report = RunReport::new(config, input, &result, wall_ms);
    fs::create_dir_all(out).map_err(CliError::io(out))?;
    write(&out.join(SKELETON_FILE), formats::format_skeleton(&result.skeleton))?;
    write(&out.join(SEPSETS_FILE), formats::format_sepsets(&result.sepsets))?;
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    write(&out.join(REPORT_FILE), json + "\n")?;
    Ok(SkeletonOutput { result, report })
}

/// Loads a skeleton and its separation sets, checking that they describe
/// the same graph.
pub fn load_skeleton(skeleton: &Path, sepsets: &Path) -> Result<(AdjacencyMatrix, SeparationSets), CliError> {
    let list = formats::parse_edge_list(&read_text(skeleton)?)?;
    if let Some((a, b)) = list.directed.first() {
        return Err(CliError::Data(format!("skeleton contains directed edge {a} > {b}")));
    }
    let n = list.nodes;
    let edges: Vec<(usize, usize)> = list.undirected.iter().copied().collect();
    let adj = AdjacencyMatrix::from_edges(n, &edges)?;
    let entries = formats::parse_sepsets(&read_text(sepsets)?)?;
    for ((i, j), set) in &entries {
        if let Some(v) = [*i, *j].iter().chain(set).find(|&&v| v >= n) {
            return Err(CliError::Data(format!("separating set for ({i}, {j}) names vertex {v} outside {n} nodes")));
        }
        if adj.has_edge(*i, *j) {
            return Err(CliError::Data(format!("pair ({i}, {j}) is adjacent but has a separating set")));
        }
    }
    Ok((adj, entries.into_iter().collect()))
}

pub fn cmd_orient(skeleton: &Path, sepsets: &Path, out: &Path) -> Result<MixedGraph, CliError> {
    let (adj, seps) = load_skeleton(skeleton, sepsets)?;
    let cpdag = to_cpdag(&adj, &seps)?;
    write(out, formats::format_cpdag(&cpdag))?;
    Ok(cpdag)
}

/// One `(n, d, m)` bench configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchCase {
    pub n: usize,
    pub d: f64,
    pub m: usize,
}

/// Parses `n:d:m[,n:d:m...]`.
pub fn parse_bench_spec(spec: &str) -> Result<Vec<BenchCase>, CliError> {
    let bad = |item: &str| CliError::Usage(format!("bench case {item:?} is not n:d:m"));
    spec.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|item| {
            let parts: Vec<&str> = item.split(':').collect();
            let [n, d, m] = parts.as_slice() else { return Err(bad(item)) };
            Ok(BenchCase {
                n: n.parse().map_err(|_| bad(item))?,
                d: d.parse().map_err(|_| bad(item))?,
                m: m.parse().map_err(|_| bad(item))?,
            })
        })
        .collect::<Result<Vec<_>, _>>()
        .and_then(|v| if v.is_empty() { Err(CliError::Usage("empty bench spec".into())) } else { Ok(v) })
}

pub fn parse_strategies(list: &str) -> Result<Vec<Strategy>, CliError> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<Strategy>().map_err(|_| CliError::Usage(format!("unknown strategy {s:?}"))))
        .collect()
}

/// One bench CSV row. Per-level columns hold `;`-separated values indexed
/// by level. Times are whole microseconds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub n: usize,
    pub d: f64,
    pub m: usize,
    pub seed: u64,
    pub strategy: String,
    pub workers: usize,
    pub repeat: usize,
    pub correlation_us: u64,
    pub skeleton_us: u64,
    pub wall_us: u64,
    pub levels: usize,
    pub ci_tests: u64,
    pub pseudo_inverses: u64,
    pub edges_removed: u64,
    pub edges_final: usize,
    pub level_us: String,
    pub level_ci_tests: String,
    pub level_pseudo_inverses: String,
    pub level_edges_removed: String,
}

fn joined(values: impl Iterator<Item = u64>) -> String {
    values.map(|v| v.to_string()).collect::<Vec<_>>().join(";")
}

fn split(values: &str) -> Result<Vec<u64>, String> {
    if values.is_empty() {
        return Ok(Vec::new());
    }
    values.split(';').map(|v| v.parse().map_err(|_| format!("bad per-level value {v:?}"))).collect()
}

impl BenchRow {
    /// Per-level columns have one entry per level and add up to the totals;
    /// level time fits inside skeleton time, which fits inside wall time.
    pub fn check(&self) -> Result<(), String> {
        let us = split(&self.level_us)?;
        let ci = split(&self.level_ci_tests)?;
        let pinv = split(&self.level_pseudo_inverses)?;
        let removed = split(&self.level_edges_removed)?;
        if [us.len(), ci.len(), pinv.len(), removed.len()].iter().any(|&l| l != self.levels) {
            return Err(format!("expected {} per-level entries", self.levels));
        }
        if ci.iter().sum::<u64>() != self.ci_tests {
            return Err("level CI tests do not sum to the total".into());
        }
        if pinv.iter().sum::<u64>() != self.pseudo_inverses {
            return Err("level pseudo-inverses do not sum to the total".into());
        }
        if removed.iter().sum::<u64>() != self.edges_removed {
            return Err("level removals do not sum to the total".into());
        }
        let complete = (self.n * (self.n - 1) / 2) as u64;
        if complete - self.edges_removed != self.edges_final as u64 {
            return Err("removals do not account for the final edge count".into());
        }
        if us.iter().sum::<u64>() > self.skeleton_us || self.correlation_us + self.skeleton_us > self.wall_us {
            return Err("phase times exceed the enclosing time".into());
        }
        Ok(())
    }
}

pub struct BenchParams {
    pub cases: Vec<BenchCase>,
    pub strategies: Vec<Strategy>,
    pub repeats: usize,
    pub seed: u64,
    /// Used for every strategy except the serial one.
    pub workers: usize,
    pub alpha: f64,
}

/// Runs every `(case, strategy, repeat)` combination. Case `k` draws its
/// data with seed `seed + k`; repeats reuse the same data.
pub fn run_bench(params: &BenchParams) -> Result<Vec<BenchRow>, CliError> {
    if params.repeats == 0 {
        return Err(CliError::Usage("repeats must be positive".into()));
    }
    let mut rows = Vec::new();
    for (k, case) in params.cases.iter().enumerate() {
        let seed = params.seed.wrapping_add(k as u64);
        let (_, data) = dataset(case.n, case.d, case.m, seed)?;
        for &strategy in &params.strategies {
            let workers = if strategy == Strategy::Serial { 1 } else { params.workers };
            let config =
                SkeletonConfig::default().with_strategy(strategy).with_workers(workers).with_alpha(params.alpha);
            config.validate()?;
            for repeat in 0..params.repeats {
                let started = Instant::now();
                let corr = compute_correlation(&data)?;
                let correlation_us = started.elapsed().as_micros() as u64;
                let search = Instant::now();
                let result = run_pc_stable(&corr, case.m, &config)?;
                let skeleton_us = search.elapsed().as_micros() as u64;
                let wall_us = started.elapsed().as_micros() as u64;
                let stats = &result.stats;
                rows.push(BenchRow {
                    n: case.n,
                    d: case.d,
                    m: case.m,
                    seed,
                    strategy: strategy.name().to_string(),
                    workers,
                    repeat,
                    correlation_us,
                    skeleton_us,
                    wall_us,
                    levels: result.levels_run,
                    ci_tests: result.total_ci_tests(),
                    pseudo_inverses: result.total_pseudo_inverses(),
                    edges_removed: stats.iter().map(|s| s.edges_removed).sum(),
                    edges_final: result.skeleton.edge_count(),
                    level_us: joined(stats.iter().map(|s| s.elapsed.as_micros() as u64)),
                    level_ci_tests: joined(stats.iter().map(|s| s.ci_tests)),
                    level_pseudo_inverses: joined(stats.iter().map(|s| s.pseudo_inverses)),
                    level_edges_removed: joined(stats.iter().map(|s| s.edges_removed)),
                });
            }
        }
    }
    Ok(rows)
}

pub fn format_bench(rows: &[BenchRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).expect("bench row serializes");
    }
    String::from_utf8(w.into_inner().expect("in-memory writer")).expect("CSV is UTF-8")
}

pub fn cmd_bench(params: &BenchParams, out: &Path) -> Result<Vec<BenchRow>, CliError> {
    let rows = run_bench(params)?;
    write(out, format_bench(&rows))?;
    Ok(rows)
}
