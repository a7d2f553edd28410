//! Particle allocation and sample-size adaptation driven by the single-run estimators.

mod adaptive;
mod allocation;
mod replicates;

pub use adaptive::{adaptive_filter, AdaptiveOptions, AdaptiveRunResult, AdaptiveStage};
pub use allocation::{
    default_floor, optimal_allocation, two_stage_allocation, AllocationRule, OptimalAllocation, TwoStageOptions,
    TwoStageResult,
};
pub use replicates::{replicate_full, replicate_terminal, replicate_variance_study, ReplicateStudy};
