//! PC-stable causal skeleton discovery on multi-core CPUs.
//!
//! The crate provides the full pipeline: Gaussian CI testing on a
//! correlation matrix ([`stats`]), direct unranking of conditioning sets
//! ([`comb`]), the level-synchronous skeleton search with three
//! interchangeable execution strategies ([`skeleton`]), CPDAG orientation
//! ([`orient`]) and a seeded linear-Gaussian data generator ([`datagen`]).
//!
//! ```
//! use pcskel_core::{datagen, skeleton, stats, SkeletonConfig, Strategy};
//!
//! let dag = datagen::random_dag(20, 0.2, 1);
//! let data = datagen::sample_linear_gaussian(&dag, 1000, 2);
//! let corr = stats::compute_correlation(&data).unwrap();
//! let config = SkeletonConfig::default().with_strategy(Strategy::SetShared).with_workers(2);
//! let result = skeleton::run_pc_stable(&corr, data.samples(), &config).unwrap();
//! assert!(result.skeleton.is_symmetric());
//! ```

pub mod comb;
pub mod datagen;
pub mod graph;
pub mod orient;
pub mod skeleton;
pub mod stats;

pub use graph::{
    compact, decompress, AdjacencyMatrix, CompactedAdjacency, CorrelationMatrix, DataMatrix, GraphError, LevelStats,
    SeparationSets, SkeletonConfig, Strategy,
};
pub use skeleton::{run_pc_stable, SkeletonError, SkeletonResult, StopReason};
