//! Baseline samplers: uniform random, farthest point sampling in the 6D
//! correspondence space, and contour scores from the xyz coordinate signals.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{MagnitudeMode, SampleSelection, SamplingDistribution, SignalKind};
use crate::correspondence::CorrespondenceSet;
use crate::error::{Error, Result};
use crate::gsp::FilterKind;

/// `m` distinct indices drawn uniformly from `0..n`.
pub fn random_sample(n: usize, m: usize, seed: u64) -> Result<SampleSelection> {
    if m < 1 || m > n {
        return Err(Error::Sampling(format!("sample count {m} must lie in 1..={n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let indices = rand::seq::index::sample(&mut rng, n, m).into_vec();
    Ok(SampleSelection { indices, replacement: false, seed, topped_up: 0 })
}

/// Farthest point sampling on the 6-vectors `(x, y, z, u, v, w)`, starting at a
/// node chosen by `seed`.
pub fn fps_sample_6d(corrs: &CorrespondenceSet, m: usize, seed: u64) -> Result<SampleSelection> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = rng.random_range(0..corrs.len());
    let mut sel = fps_sample_6d_from(corrs, m, start)?;
    sel.seed = seed;
    Ok(sel)
}

/// Farthest point sampling from a given start node. Distance ties go to the
/// lower index.
pub fn fps_sample_6d_from(corrs: &CorrespondenceSet, m: usize, start: usize) -> Result<SampleSelection> {
    let n = corrs.len();
    if m < 1 || m > n {
        return Err(Error::Sampling(format!("sample count {m} must lie in 1..={n}")));
    }
    if start >= n {
        return Err(Error::InvalidInput(format!("start node {start} out of range")));
    }
    let pts: Vec<_> = corrs.iter().map(|c| c.as_vector6()).collect();
    let mut nearest = vec![f64::INFINITY; n];
    let mut indices = Vec::with_capacity(m);
    let mut current = start;
    for _ in 0..m {
        indices.push(current);
        nearest[current] = f64::NEG_INFINITY;
        let p = pts[current];
        let mut next = None::<(usize, f64)>;
        for (j, q) in pts.iter().enumerate() {
            if nearest[j] == f64::NEG_INFINITY {
                continue;
            }
            let d = (q - p).norm_squared();
            if d < nearest[j] {
                nearest[j] = d;
            }
            if next.is_none_or(|(_, best)| nearest[j] > best) {
                next = Some((j, nearest[j]));
            }
        }
        match next {
            Some((j, _)) => current = j,
            None => break,
        }
    }
    Ok(SampleSelection { indices, replacement: false, seed: 0, topped_up: 0 })
}

/// Symmetric unit-weight k-nearest-neighbour adjacency, as neighbour lists.
/// Node `j` is adjacent to `i` when either is among the other's `k` nearest
/// (distance ties go to the lower index).
pub fn knn_adjacency(points: &[Vector3<f64>], k: usize) -> Result<Vec<Vec<usize>>> {
    let n = points.len();
    if k < 1 {
        return Err(Error::InvalidInput("knn_k must be at least 1".into()));
    }
    if n <= k {
        return Err(Error::InvalidInput(format!("need more than {k} points, got {n}")));
    }
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut cand: Vec<(f64, usize)> = Vec::with_capacity(n - 1);
    for i in 0..n {
        cand.clear();
        cand.extend((0..n).filter(|&j| j != i).map(|j| ((points[i] - points[j]).norm_squared(), j)));
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        cand.select_nth_unstable_by(k - 1, cmp);
        for &(_, j) in &cand[..k] {
            adj[i].push(j);
            adj[j].push(i);
        }
    }
    for row in &mut adj {
        row.sort_unstable();
        row.dedup();
    }
    Ok(adj)
}

/// `‖((I − D⁻¹A) X)_i‖₂` for the coordinate signal `X` on the kNN graph.
pub fn xyz_magnitudes(points: &[Vector3<f64>], knn_k: usize) -> Result<Vec<f64>> {
    let adj = knn_adjacency(points, knn_k)?;
    Ok(adj
        .iter()
        .enumerate()
        .map(|(i, nb)| {
            let mean = nb.iter().fold(Vector3::zeros(), |acc, &j| acc + points[j]) / nb.len() as f64;
            (points[i] - mean).norm()
        })
        .collect())
}

/// Min-max rescaling to `[0, 1]`; a constant vector maps to zeros.
pub fn rescale_unit(v: &[f64]) -> Vec<f64> {
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    if span.is_nan() || span <= 0.0 {
        return vec![0.0; v.len()];
    }
    v.iter().map(|x| (x - lo) / span).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum XyzCombine {
    SourceOnly,
    TargetOnly,
    Both,
}

fn xyz_scores(corrs: &CorrespondenceSet, knn_k: usize, combine: XyzCombine) -> Result<Vec<f64>> {
    let src: Vec<_> = corrs.iter().map(|c| c.source).collect();
    let tgt: Vec<_> = corrs.iter().map(|c| c.target).collect();
    Ok(match combine {
        XyzCombine::SourceOnly => rescale_unit(&xyz_magnitudes(&src, knn_k)?),
        XyzCombine::TargetOnly => rescale_unit(&xyz_magnitudes(&tgt, knn_k)?),
        XyzCombine::Both => {
            let s = rescale_unit(&xyz_magnitudes(&src, knn_k)?);
            let t = rescale_unit(&xyz_magnitudes(&tgt, knn_k)?);
            s.iter().zip(&t).map(|(a, b)| a + b).collect()
        }
    })
}

/// Sampling distribution from the high-pass responses of the source and/or
/// target coordinate signals, each rescaled to `[0, 1]`.
pub fn xyz_signal_distribution(
    corrs: &CorrespondenceSet,
    knn_k: usize,
    combine: XyzCombine,
) -> Result<SamplingDistribution> {
    let scores = xyz_scores(corrs, knn_k, combine)?;
    Ok(SamplingDistribution::from_weights(&scores, MagnitudeMode::Abs)?
        .with_source(Some(FilterKind::HaarHigh), SignalKind::Xyz))
}

/// Sum of the rescaled degree-response magnitudes and the rescaled xyz
/// scores of both clouds.
pub fn degree_xyz_distribution(
    corrs: &CorrespondenceSet,
    degree_response: &[f64],
    mode: MagnitudeMode,
    knn_k: usize,
) -> Result<SamplingDistribution> {
    if degree_response.len() != corrs.len() {
        return Err(Error::InvalidInput("response length does not match correspondences".into()));
    }
    let mags: Vec<f64> = degree_response.iter().map(|&v| mode.magnitude(v)).collect();
    let deg = rescale_unit(&mags);
    let xyz = xyz_scores(corrs, knn_k, XyzCombine::Both)?;
    let total: Vec<f64> = deg.iter().zip(&xyz).map(|(a, b)| a + b).collect();
    Ok(SamplingDistribution::from_weights(&total, mode)?
        .with_source(Some(FilterKind::Laplacian), SignalKind::DegreeXyz))
}
