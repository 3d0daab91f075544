//! Pose hypotheses from cliques, consensus scoring and the end-to-end
//! registration pipeline.

mod pipeline;
mod pose;

pub use pipeline::{
    degree_distribution, fastmac_register, sample_count, sample_nodes, FilterChoice, PipelineConfig,
    RegistrationResult, ResultFlags, SamplerKind, SamplingOutcome, StageTimings,
};
pub use pose::{estimate_pose_svd, hypothesis_score, score_with, RigidTransform, ScoreMetric};
