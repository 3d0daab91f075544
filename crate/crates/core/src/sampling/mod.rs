//! Node sampling on correspondence graphs.
//!
//! A filter response `f` becomes a probability vector over nodes
//! ([`response_to_distribution`]); [`stochastic_sample`] then draws node
//! subsets from it. The deterministic greedy sampler, the baselines (uniform
//! random, 6D farthest point, xyz-signal) and the reconstruction-error
//! formulas used to check optimality live in the submodules.

mod baselines;
mod greedy;
mod optimality;
mod stochastic;

pub use baselines::{
    degree_xyz_distribution, fps_sample_6d, fps_sample_6d_from, knn_adjacency, random_sample, rescale_unit,
    xyz_magnitudes, xyz_signal_distribution, XyzCombine,
};
pub use greedy::{greedy_deterministic_sample, greedy_select_rows};
pub use optimality::{expected_reconstruction_error, expected_reconstruction_error_for_draws, reconstruct};
pub use stochastic::stochastic_sample;

use crate::error::{Error, Result};
use crate::gsp::FilterKind;

/// Below this total magnitude a response is treated as carrying no signal.
pub const DEGENERATE_MASS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MagnitudeMode {
    /// `π_i ∝ |f_i|`
    Abs,
    /// `π_i ∝ f_i²`
    #[default]
    Squared,
}

impl MagnitudeMode {
    pub fn magnitude(&self, v: f64) -> f64 {
        match self {
            MagnitudeMode::Abs => v.abs(),
            MagnitudeMode::Squared => v * v,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalKind {
    Degree,
    Xyz,
    DegreeXyz,
    Custom,
}

/// Which filter and signal produced a distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct DistributionSource {
    pub filter: Option<FilterKind>,
    pub signal: SignalKind,
}

impl Default for DistributionSource {
    fn default() -> Self {
        Self { filter: None, signal: SignalKind::Custom }
    }
}

/// Probability vector over graph nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingDistribution {
    pi: Vec<f64>,
    mode: MagnitudeMode,
    source: DistributionSource,
    degenerate: bool,
}

impl SamplingDistribution {
    /// Normalizes nonnegative weights. All-zero (or vanishing) weights give the
    /// uniform distribution with the degenerate flag set.
    pub fn from_weights(weights: &[f64], mode: MagnitudeMode) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidInput("empty distribution".into()));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidInput("weights must be finite and nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        let n = weights.len();
        if total < DEGENERATE_MASS {
            return Ok(Self {
                pi: vec![1.0 / n as f64; n],
                mode,
                source: DistributionSource::default(),
                degenerate: true,
            });
        }
        Ok(Self {
            pi: weights.iter().map(|w| w / total).collect(),
            mode,
            source: DistributionSource::default(),
            degenerate: false,
        })
    }

    pub fn uniform(n: usize) -> Result<Self> {
        Self::from_weights(&vec![1.0; n], MagnitudeMode::Abs)
    }

    pub fn with_source(mut self, filter: Option<FilterKind>, signal: SignalKind) -> Self {
        self.source = DistributionSource { filter, signal };
        self
    }

    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    pub fn len(&self) -> usize {
        self.pi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pi.is_empty()
    }

    pub fn mode(&self) -> MagnitudeMode {
        self.mode
    }

    pub fn source(&self) -> DistributionSource {
        self.source
    }

    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    /// Number of nodes with positive probability.
    pub fn support(&self) -> usize {
        self.pi.iter().filter(|&&p| p > 0.0).count()
    }
}

/// Turns a filter response into a sampling distribution.
pub fn response_to_distribution(f: &[f64], mode: MagnitudeMode) -> Result<SamplingDistribution> {
    if f.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("filter response has non-finite entries".into()));
    }
    let mags: Vec<f64> = f.iter().map(|&v| mode.magnitude(v)).collect();
    SamplingDistribution::from_weights(&mags, mode)
}

/// Indices drawn by a sampler.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleSelection {
    pub indices: Vec<usize>,
    pub replacement: bool,
    pub seed: u64,
    /// Picks that had to come from the uniform top-up because the distribution
    /// ran out of nonzero mass.
    pub topped_up: usize,
}

impl SampleSelection {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Distinct indices in ascending order.
    pub fn sorted_unique(&self) -> Vec<usize> {
        let mut v = self.indices.clone();
        v.sort_unstable();
        v.dedup();
        v
    }
}
