use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fastmac_core::clique::CliqueBudget;
use fastmac_core::eval::MetricThresholds;
use fastmac_core::graph::GraphConfig;
use fastmac_core::registration::{FilterChoice, PipelineConfig, SamplerKind, ScoreMetric};
use fastmac_core::sampling::MagnitudeMode;
use fastmac_core::synth::{random_transform, OutlierMode, SceneSpec};

/// Spectral sampling of correspondence graphs and clique-based rigid registration
#[derive(Parser, Debug)]
#[command(name = "fastmac", version, about, arg_required_else_help = true)]
pub struct Cli {
    /// Worker threads (default: all cores). Outputs do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate synthetic correspondence scenes with ground truth
    Synth(SynthArgs),
    /// Score and sample the correspondences of a file
    Sample(SampleArgs),
    /// Register a correspondence file
    Register(RegisterArgs),
    /// Profile the pipeline stages over a range of sampling ratios
    Bench(BenchArgs),
    /// Recall sweeps over samplers, filters or signal codes
    Ablate(AblateArgs),
}

#[derive(Args, Debug, Clone)]
pub struct OutputArgs {
    #[arg(long, short = 'o')]
    pub output_dir: PathBuf,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplerArg {
    Degree,
    Random,
    Fps,
    Xyz,
    Greedy,
    DegreeXyz,
}

impl From<SamplerArg> for SamplerKind {
    fn from(s: SamplerArg) -> Self {
        match s {
            SamplerArg::Degree => SamplerKind::Degree,
            SamplerArg::Random => SamplerKind::Random,
            SamplerArg::Fps => SamplerKind::Fps,
            SamplerArg::Xyz => SamplerKind::Xyz,
            SamplerArg::Greedy => SamplerKind::Greedy,
            SamplerArg::DegreeXyz => SamplerKind::DegreeXyz,
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterArg {
    Laplacian,
    High,
    Low,
    All,
}

impl From<FilterArg> for FilterChoice {
    fn from(f: FilterArg) -> Self {
        match f {
            FilterArg::Laplacian => FilterChoice::Laplacian,
            FilterArg::High => FilterChoice::High,
            FilterArg::Low => FilterChoice::Low,
            FilterArg::All => FilterChoice::All,
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum MagnitudeArg {
    Squared,
    Abs,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScoreArg {
    /// number of correspondences within the inlier threshold
    Inliers,
    /// truncated mean absolute error
    Mae,
}

#[derive(Args, Debug, Clone)]
pub struct PipelineArgs {
    /// Fraction of correspondences kept by the sampler, in (0, 1]
    #[arg(long, default_value_t = 0.5)]
    pub ratio: f64,

    #[arg(long, value_enum, default_value_t = SamplerArg::Degree)]
    pub sampler: SamplerArg,

    /// Filter applied to the degree signal
    #[arg(long, value_enum, default_value_t = FilterArg::Laplacian)]
    pub filter: FilterArg,

    /// Response magnitude turned into sampling mass
    #[arg(long, value_enum, default_value_t = MagnitudeArg::Squared)]
    pub magnitude: MagnitudeArg,

    /// Compatibility distance scale
    #[arg(long, default_value_t = 0.1)]
    pub d_cmp: f64,

    /// Edge weight cut-off
    #[arg(long, default_value_t = 0.999)]
    pub tau: f64,

    #[arg(long, default_value_t = 0.1)]
    pub inlier_thresh: f64,

    #[arg(long, value_enum, default_value_t = ScoreArg::Inliers)]
    pub score: ScoreArg,

    /// Weight clique members by their compatibility when fitting the pose
    #[arg(long)]
    pub weighted_pose: bool,

    #[arg(long, default_value_t = 10_000_000)]
    pub max_cliques: u64,

    #[arg(long, default_value_t = 10_000)]
    pub time_budget_ms: u64,

    /// Neighbours used by the coordinate-signal samplers
    #[arg(long, default_value_t = 10)]
    pub knn_k: usize,

    /// Skip sampling and search cliques on the full graph
    #[arg(long)]
    pub no_sampling: bool,
}

impl PipelineArgs {
    pub fn config(&self, seed: u64) -> PipelineConfig {
        PipelineConfig {
            ratio: self.ratio,
            seed,
            graph: GraphConfig { d_cmp: self.d_cmp, t: self.tau },
            sampler: self.sampler.into(),
            filter: self.filter.into(),
            magnitude: match self.magnitude {
                MagnitudeArg::Squared => MagnitudeMode::Squared,
                MagnitudeArg::Abs => MagnitudeMode::Abs,
            },
            inlier_threshold: self.inlier_thresh,
            budget: CliqueBudget { max_cliques: self.max_cliques, time_budget_ms: self.time_budget_ms },
            score_metric: match self.score {
                ScoreArg::Inliers => ScoreMetric::InlierCount,
                ScoreArg::Mae => ScoreMetric::TruncatedMae,
            },
            weighted_pose: self.weighted_pose,
            knn_k: self.knn_k,
            greedy_bandwidth: None,
            sampling: !self.no_sampling,
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct ThresholdArgs {
    /// Largest rotation error (degrees) counted as a success
    #[arg(long, default_value_t = 15.0)]
    pub re_max: f64,

    /// Largest translation error counted as a success
    #[arg(long, default_value_t = 0.3)]
    pub te_max: f64,
}

impl ThresholdArgs {
    pub fn thresholds(&self) -> fastmac_core::Result<MetricThresholds> {
        MetricThresholds::new(self.re_max, self.te_max)
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutlierArg {
    Shuffled,
    Uniform,
}

#[derive(Args, Debug, Clone)]
pub struct SceneArgs {
    #[arg(long, default_value_t = 1000)]
    pub n_points: usize,

    #[arg(long, default_value_t = 0.3)]
    pub inlier_ratio: f64,

    /// Gaussian noise added to every target coordinate
    #[arg(long, default_value_t = 0.005)]
    pub noise: f64,

    #[arg(long, value_enum, default_value_t = OutlierArg::Shuffled)]
    pub outliers: OutlierArg,

    #[arg(long, default_value_t = 180.0)]
    pub max_angle: f64,

    #[arg(long, default_value_t = 5.0)]
    pub max_translation: f64,
}

impl SceneArgs {
    /// Scene `index` of a set generated from `seed`.
    pub fn spec(&self, seed: u64, index: usize) -> SceneSpec {
        let scene_seed = seed.wrapping_add(index as u64);
        SceneSpec {
            n_points: self.n_points,
            inlier_ratio: self.inlier_ratio,
            noise_sigma: self.noise,
            transform: random_transform(scene_seed ^ 0x5eed_0000_0000, self.max_angle, self.max_translation),
            outlier_mode: match self.outliers {
                OutlierArg::Shuffled => OutlierMode::ShuffledTargets,
                OutlierArg::Uniform => OutlierMode::UniformBox,
            },
            seed: scene_seed,
        }
    }
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[command(flatten)]
    pub out: OutputArgs,

    #[command(flatten)]
    pub scene: SceneArgs,

    #[arg(long, default_value_t = 1)]
    pub scenes: usize,
}

#[derive(Args, Debug)]
pub struct SampleArgs {
    /// Correspondence file, six values per line
    #[arg(long, short = 'i')]
    pub input: PathBuf,

    #[command(flatten)]
    pub out: OutputArgs,

    #[command(flatten)]
    pub pipeline: PipelineArgs,
}

#[derive(Args, Debug)]
pub struct RegisterArgs {
    #[arg(long, short = 'i')]
    pub input: PathBuf,

    /// Ground-truth JSON; adds rotation/translation errors to the result
    #[arg(long)]
    pub ground_truth: Option<PathBuf>,

    #[command(flatten)]
    pub out: OutputArgs,

    #[command(flatten)]
    pub pipeline: PipelineArgs,

    #[command(flatten)]
    pub thresholds: ThresholdArgs,

    /// Write zero for every timing, so outputs can be compared byte for byte
    #[arg(long)]
    pub redact_timings: bool,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    /// Correspondence file; a synthetic scene is generated when absent
    #[arg(long, short = 'i')]
    pub input: Option<PathBuf>,

    #[arg(long, requires = "input")]
    pub ground_truth: Option<PathBuf>,

    #[command(flatten)]
    pub out: OutputArgs,

    #[command(flatten)]
    pub pipeline: PipelineArgs,

    #[command(flatten)]
    pub scene: SceneArgs,

    #[command(flatten)]
    pub thresholds: ThresholdArgs,

    #[arg(long, value_delimiter = ',', default_values_t = [1.0, 0.5, 0.2, 0.1, 0.05, 0.01])]
    pub ratios: Vec<f64>,

    /// Runs per ratio
    #[arg(long, default_value_t = 1)]
    pub repeats: usize,

    #[arg(long)]
    pub redact_timings: bool,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Study {
    /// degree against random and 6D farthest-point sampling
    Samplers,
    /// laplacian (high), low-pass and all-pass filters on the degree signal
    Filters,
    /// 000 random, 110 coordinates, 001 degree, 111 both
    Codes,
}

#[derive(Args, Debug)]
pub struct AblateArgs {
    #[arg(long, value_enum, default_value_t = Study::Samplers)]
    pub study: Study,

    #[command(flatten)]
    pub out: OutputArgs,

    #[command(flatten)]
    pub pipeline: PipelineArgs,

    #[command(flatten)]
    pub scene: SceneArgs,

    #[command(flatten)]
    pub thresholds: ThresholdArgs,

    #[arg(long, default_value_t = 10)]
    pub scenes: usize,

    /// Sampling seeds per scene and ratio
    #[arg(long, default_value_t = 1)]
    pub runs: u64,

    #[arg(long, value_delimiter = ',', default_values_t = [0.05, 0.1])]
    pub ratios: Vec<f64>,

    /// Run rows one at a time so stage timings are not contended
    #[arg(long)]
    pub serial: bool,

    #[arg(long)]
    pub redact_timings: bool,
}
