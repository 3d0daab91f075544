use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::pose::{estimate_pose_svd, score_with, RigidTransform, ScoreMetric};
use crate::clique::{maximal_cliques, node_guided_selection, Clique, CliqueBudget};
use crate::correspondence::{Correspondence, CorrespondenceSet};
use crate::error::{Error, Result};
use crate::graph::{build_graph, CompatibilityGraph, GraphConfig};
use crate::gsp::{
    haar_high_pass_response, laplacian_response, normalize_shift, random_walk_low_pass_response, FilterKind,
};
use crate::sampling::{
    degree_xyz_distribution, fps_sample_6d, greedy_deterministic_sample, random_sample, response_to_distribution,
    stochastic_sample, xyz_signal_distribution, MagnitudeMode, SampleSelection, SamplingDistribution, SignalKind,
    XyzCombine,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerKind {
    /// filtered degree signal, stochastic draw
    Degree,
    Random,
    Fps,
    /// high-pass coordinate signals, stochastic draw
    Xyz,
    /// degree and coordinate scores summed
    DegreeXyz,
    /// deterministic greedy on the second-order shift's eigenbasis
    Greedy,
}

impl SamplerKind {
    pub fn name(&self) -> &'static str {
        match self {
            SamplerKind::Degree => "degree",
            SamplerKind::Random => "random",
            SamplerKind::Fps => "fps",
            SamplerKind::Xyz => "xyz",
            SamplerKind::DegreeXyz => "degree_xyz",
            SamplerKind::Greedy => "greedy",
        }
    }

    /// Whether the sampler scores nodes on the full compatibility graph.
    pub fn needs_full_graph(&self) -> bool {
        matches!(self, SamplerKind::Degree | SamplerKind::DegreeXyz | SamplerKind::Greedy)
    }
}

/// Filter applied to the degree signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterChoice {
    /// `Diag(s) − W_SOG`
    #[default]
    Laplacian,
    /// `I − W_SOG/λ_max`
    High,
    /// `I + D⁻¹W_SOG`; the distribution uses `|·|` regardless of the magnitude mode
    Low,
    /// identity; `|s_i|`
    All,
}

impl FilterChoice {
    pub fn name(&self) -> &'static str {
        match self {
            FilterChoice::Laplacian => "laplacian",
            FilterChoice::High => "high",
            FilterChoice::Low => "low",
            FilterChoice::All => "all",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// fraction of correspondences kept, in (0, 1]
    pub ratio: f64,
    pub seed: u64,
    pub graph: GraphConfig,
    pub sampler: SamplerKind,
    pub filter: FilterChoice,
    pub magnitude: MagnitudeMode,
    pub inlier_threshold: f64,
    pub budget: CliqueBudget,
    pub score_metric: ScoreMetric,
    /// weight each clique member by its summed `W_SOG` to the other members
    pub weighted_pose: bool,
    /// neighbours per point for the coordinate-signal samplers
    pub knn_k: usize,
    /// eigenvectors kept by the greedy sampler; defaults to the sample count
    pub greedy_bandwidth: Option<usize>,
    /// false skips sampling entirely and searches the full graph
    pub sampling: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            ratio: 0.5,
            seed: 0,
            graph: GraphConfig::default(),
            sampler: SamplerKind::Degree,
            filter: FilterChoice::Laplacian,
            magnitude: MagnitudeMode::Squared,
            inlier_threshold: 0.1,
            budget: CliqueBudget::default(),
            score_metric: ScoreMetric::InlierCount,
            weighted_pose: false,
            knn_k: 10,
            greedy_bandwidth: None,
            sampling: true,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.ratio > 0.0 && self.ratio <= 1.0) {
            return Err(Error::InvalidInput(format!("ratio {} must lie in (0, 1]", self.ratio)));
        }
        if !(self.inlier_threshold > 0.0 && self.inlier_threshold.is_finite()) {
            return Err(Error::InvalidInput("inlier threshold must be positive".into()));
        }
        if self.knn_k < 1 {
            return Err(Error::InvalidInput("knn_k must be at least 1".into()));
        }
        self.graph.validate()?;
        self.budget.validate()
    }
}

/// `max(3, ⌈ratio·n⌉)`, capped at `n`.
pub fn sample_count(n: usize, ratio: f64) -> usize {
    // the epsilon keeps e.g. 0.1·1000 from rounding up to 101
    let m = (ratio * n as f64 - 1e-9).ceil().max(0.0) as usize;
    m.max(3).min(n)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    #[serde(rename = "Sampling")]
    pub sampling: f64,
    #[serde(rename = "GC")]
    pub gc: f64,
    #[serde(rename = "MCS")]
    pub mcs: f64,
    #[serde(rename = "NCS")]
    pub ncs: f64,
    #[serde(rename = "PE")]
    pub pe: f64,
}

impl StageTimings {
    pub fn total(&self) -> f64 {
        self.sampling + self.gc + self.mcs + self.ncs + self.pe
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResultFlags {
    pub truncated_cliques: bool,
    pub degenerate_distribution: bool,
    pub insufficient_structure: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegistrationResult {
    #[serde(flatten)]
    pub transform: RigidTransform,
    #[serde(rename = "score")]
    pub best_score: f64,
    pub hypothesis_count: usize,
    #[serde(rename = "timings_ms")]
    pub stage_timings: StageTimings,
    pub flags: ResultFlags,
    /// sampled correspondence indices, ascending
    pub sampled: Vec<usize>,
    /// nodes (original indices) of the winning clique
    pub best_clique: Vec<usize>,
    pub total_ms: f64,
}

impl RegistrationResult {
    /// Turns a result without any usable clique into an error.
    pub fn check(self) -> Result<Self> {
        if self.flags.insufficient_structure {
            return Err(Error::InsufficientStructure);
        }
        Ok(self)
    }
}

/// Scores every node of `g` with the configured filter on the degree signal.
pub fn degree_distribution(g: &CompatibilityGraph, cfg: &PipelineConfig) -> Result<SamplingDistribution> {
    let s = g.degree();
    let (f, mode, kind) = match cfg.filter {
        FilterChoice::Laplacian => (laplacian_response(g, s)?, cfg.magnitude, FilterKind::Laplacian),
        FilterChoice::High => (haar_high_pass_response(g, s)?, cfg.magnitude, FilterKind::HaarHigh),
        FilterChoice::Low => (random_walk_low_pass_response(g, s)?, MagnitudeMode::Abs, FilterKind::HaarLow),
        FilterChoice::All => (s.to_vec(), MagnitudeMode::Abs, FilterKind::AllPass),
    };
    Ok(response_to_distribution(&f, mode)?.with_source(Some(kind), SignalKind::Degree))
}

/// Outcome of the sampling stage.
#[derive(Debug, Clone)]
pub struct SamplingOutcome {
    pub selection: SampleSelection,
    /// absent for the samplers that do not draw from a distribution
    pub distribution: Option<SamplingDistribution>,
}

/// Runs the configured sampler. `full` must be the graph of `corrs` when the
/// sampler needs it (degree, degree-xyz, greedy).
pub fn sample_nodes(
    corrs: &CorrespondenceSet,
    full: Option<&CompatibilityGraph>,
    cfg: &PipelineConfig,
) -> Result<SamplingOutcome> {
    let n = corrs.len();
    let m = sample_count(n, cfg.ratio);
    let need_graph = || full.ok_or_else(|| Error::InvalidInput("sampler needs the full graph".into()));
    let draw = |dist: SamplingDistribution| -> Result<SamplingOutcome> {
        let selection = stochastic_sample(&dist, m, cfg.seed, false)?;
        Ok(SamplingOutcome { selection, distribution: Some(dist) })
    };
    match cfg.sampler {
        SamplerKind::Degree => draw(degree_distribution(need_graph()?, cfg)?),
        SamplerKind::DegreeXyz => {
            let g = need_graph()?;
            let f = laplacian_response(g, g.degree())?;
            draw(degree_xyz_distribution(corrs, &f, cfg.magnitude, cfg.knn_k.min(n - 1))?)
        }
        SamplerKind::Xyz => draw(xyz_signal_distribution(corrs, cfg.knn_k.min(n - 1), XyzCombine::Both)?),
        SamplerKind::Random => {
            let dist = SamplingDistribution::uniform(n)?;
            Ok(SamplingOutcome { selection: random_sample(n, m, cfg.seed)?, distribution: Some(dist) })
        }
        SamplerKind::Fps => Ok(SamplingOutcome { selection: fps_sample_6d(corrs, m, cfg.seed)?, distribution: None }),
        SamplerKind::Greedy => {
            let g = need_graph()?;
            let shift = normalize_shift(&g.w_sog().to_dense())?;
            let k = cfg.greedy_bandwidth.unwrap_or(m).clamp(1, n);
            Ok(SamplingOutcome { selection: greedy_deterministic_sample(&shift, k, m)?, distribution: None })
        }
    }
}

fn ms_since(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Builds the graph, samples, searches cliques on the sampled subgraph and
/// returns the pose whose consensus over the full input set is best.
pub fn fastmac_register(corrs: &CorrespondenceSet, cfg: &PipelineConfig) -> Result<RegistrationResult> {
    let start = Instant::now();
    cfg.validate()?;
    let n = corrs.len();
    if n < 3 {
        return Err(Error::InvalidInput(format!("need at least 3 correspondences, got {n}")));
    }
    let mut timings = StageTimings::default();
    let mut flags = ResultFlags::default();

    let full = if !cfg.sampling || cfg.sampler.needs_full_graph() {
        let t = Instant::now();
        let g = build_graph(corrs, &cfg.graph)?;
        timings.gc += ms_since(t);
        Some(g)
    } else {
        None
    };

    let (graph, sampled) = if cfg.sampling {
        let t = Instant::now();
        let outcome = sample_nodes(corrs, full.as_ref(), cfg)?;
        flags.degenerate_distribution = outcome.distribution.as_ref().is_some_and(|d| d.is_degenerate());
        let sampled = outcome.selection.sorted_unique();
        timings.sampling += ms_since(t);

        let t = Instant::now();
        let graph = match full {
            Some(g) if sampled.len() == n => g,
            Some(g) => g.induced(&sampled),
            None => build_graph(&corrs.subset(&sampled)?, &cfg.graph)?,
        };
        timings.gc += ms_since(t);
        (graph, sampled)
    } else {
        (full.expect("graph built above"), (0..n).collect())
    };

    let t = Instant::now();
    let search = maximal_cliques(&graph, &cfg.budget)?;
    flags.truncated_cliques = !search.complete;
    timings.mcs += ms_since(t);

    let t = Instant::now();
    let usable: Vec<Clique> = search.cliques.into_iter().filter(|c| c.len() >= 3).collect();
    let selected = node_guided_selection(&usable, &graph);
    // freeing the enumerated cliques is part of the stage's cost
    drop(usable);
    timings.ncs += ms_since(t);

    let t = Instant::now();
    let hypotheses: Vec<(f64, Vec<usize>, RigidTransform)> = selected
        .par_iter()
        .filter_map(|clique| {
            let pairs: Vec<Correspondence> = clique.nodes.iter().map(|&v| *corrs.get(sampled[v])).collect();
            let weights: Option<Vec<f64>> = cfg.weighted_pose.then(|| {
                clique.nodes.iter().map(|&a| clique.nodes.iter().map(|&b| graph.w_sog().get(a, b)).sum()).collect()
            });
            match estimate_pose_svd(&pairs, weights.as_deref()) {
                Ok(tf) => {
                    let score = score_with(&tf, corrs, cfg.inlier_threshold, cfg.score_metric);
                    let nodes = clique.nodes.iter().map(|&v| sampled[v]).collect();
                    Some((score, nodes, tf))
                }
                Err(Error::DegenerateClique) => None,
                Err(e) => {
                    log::error!("pose estimation failed: {e}");
                    None
                }
            }
        })
        .collect();
    let hypothesis_count = hypotheses.len();
    let best = hypotheses.into_iter().reduce(|a, b| if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a });
    drop(selected);
    drop(graph);
    timings.pe += ms_since(t);

    let (best_score, best_clique, transform) = match best {
        Some(b) => b,
        None => {
            flags.insufficient_structure = true;
            (0.0, Vec::new(), RigidTransform::identity())
        }
    };
    Ok(RegistrationResult {
        transform,
        best_score,
        hypothesis_count,
        stage_timings: timings,
        flags,
        sampled,
        best_clique,
        total_ms: ms_since(start),
    })
}
