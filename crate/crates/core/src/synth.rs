//! Synthetic registration scenes with ground truth, connected caveman graphs
//! and nearest-neighbour feature matching.

use nalgebra::{DMatrix, Vector3};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::correspondence::{Correspondence, CorrespondenceSet};
use crate::error::{Error, Result};
use crate::graph::CompatibilityGraph;
use crate::registration::RigidTransform;

/// Side length of the cube source points are drawn from.
pub const SCENE_EXTENT: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutlierMode {
    /// target drawn uniformly from the transformed cube
    UniformBox,
    /// targets of the outlier subset permuted without fixed points
    #[default]
    ShuffledTargets,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub n_points: usize,
    pub inlier_ratio: f64,
    pub noise_sigma: f64,
    pub transform: RigidTransform,
    pub outlier_mode: OutlierMode,
    pub seed: u64,
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_points < 3 {
            return Err(Error::InvalidInput("a scene needs at least 3 points".into()));
        }
        if !(0.0..=1.0).contains(&self.inlier_ratio) {
            return Err(Error::InvalidInput("inlier ratio must lie in [0, 1]".into()));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::InvalidInput("noise sigma must be nonnegative".into()));
        }
        if !self.transform.is_valid(1e-9) {
            return Err(Error::InvalidInput("transform rotation is not a proper rotation".into()));
        }
        Ok(())
    }

    pub fn inlier_count(&self) -> usize {
        (self.inlier_ratio * self.n_points as f64).round() as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub corrs: CorrespondenceSet,
    pub transform: RigidTransform,
    pub inlier_mask: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    #[serde(flatten)]
    pub transform: RigidTransform,
    /// '1' for inliers, '0' for outliers
    pub inlier_mask: String,
}

impl Scene {
    pub fn ground_truth(&self) -> GroundTruth {
        GroundTruth {
            transform: self.transform,
            inlier_mask: self.inlier_mask.iter().map(|&b| if b { '1' } else { '0' }).collect(),
        }
    }

    pub fn inlier_count(&self) -> usize {
        self.inlier_mask.iter().filter(|&&b| b).count()
    }
}

impl GroundTruth {
    pub fn mask(&self) -> Result<Vec<bool>> {
        self.inlier_mask
            .chars()
            .map(|c| match c {
                '1' => Ok(true),
                '0' => Ok(false),
                _ => Err(Error::InvalidInput(format!("bad inlier mask character {c:?}"))),
            })
            .collect()
    }
}

fn uniform_point<R: Rng>(rng: &mut R) -> Vector3<f64> {
    Vector3::new(
        rng.random_range(0.0..SCENE_EXTENT),
        rng.random_range(0.0..SCENE_EXTENT),
        rng.random_range(0.0..SCENE_EXTENT),
    )
}

/// Generates a scene: exactly `round(inlier_ratio·n)` inliers at random
/// positions, each `(p, R p + t + noise)`, and outliers per the spec's mode.
pub fn generate_scene(spec: &SceneSpec) -> Result<Scene> {
    spec.validate()?;
    let n = spec.n_points;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = Normal::new(0.0, spec.noise_sigma).map_err(|e| Error::InvalidInput(e.to_string()))?;
    let tf = spec.transform;

    let sources: Vec<Vector3<f64>> = (0..n).map(|_| uniform_point(&mut rng)).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut inlier_mask = vec![false; n];
    for &i in &order[..spec.inlier_count()] {
        inlier_mask[i] = true;
    }
    let mut targets: Vec<Vector3<f64>> = sources
        .iter()
        .map(|p| {
            let jitter = Vector3::new(noise.sample(&mut rng), noise.sample(&mut rng), noise.sample(&mut rng));
            tf.apply(p) + jitter
        })
        .collect();

    let outliers: Vec<usize> = (0..n).filter(|&i| !inlier_mask[i]).collect();
    let mode = if outliers.len() < 2 { OutlierMode::UniformBox } else { spec.outlier_mode };
    match mode {
        OutlierMode::UniformBox => {
            for &i in &outliers {
                targets[i] = tf.apply(&uniform_point(&mut rng));
            }
        }
        OutlierMode::ShuffledTargets => {
            // Sattolo's algorithm: a uniformly random single cycle, so no
            // outlier keeps its own target
            let mut perm: Vec<usize> = (0..outliers.len()).collect();
            for k in (1..perm.len()).rev() {
                let j = rng.random_range(0..k);
                perm.swap(k, j);
            }
            let old: Vec<Vector3<f64>> = outliers.iter().map(|&i| targets[i]).collect();
            for (slot, &i) in outliers.iter().enumerate() {
                targets[i] = old[perm[slot]];
            }
        }
    }

    let corrs =
        CorrespondenceSet::new(sources.iter().zip(&targets).map(|(s, t)| Correspondence::new(*s, *t)).collect())?;
    Ok(Scene { corrs, transform: tf, inlier_mask })
}

/// Rotation about a uniformly random axis by an angle uniform in
/// `[0, max_angle_deg]`, translation uniform in `[−max_translation, max_translation]³`.
pub fn random_transform(seed: u64, max_angle_deg: f64, max_translation: f64) -> RigidTransform {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let axis = loop {
        let v: Vector3<f64> = Vector3::new(
            StandardNormal.sample(&mut rng),
            StandardNormal.sample(&mut rng),
            StandardNormal.sample(&mut rng),
        );
        if v.norm() > 1e-6 {
            break v;
        }
    };
    let angle = rng.random_range(0.0..=max_angle_deg).to_radians();
    let t = if max_translation > 0.0 {
        Vector3::new(
            rng.random_range(-max_translation..=max_translation),
            rng.random_range(-max_translation..=max_translation),
            rng.random_range(-max_translation..=max_translation),
        )
    } else {
        Vector3::zeros()
    };
    RigidTransform::from_axis_angle(axis, angle, t)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CavemanSpec {
    pub num_cliques: usize,
    pub clique_size: usize,
}

impl CavemanSpec {
    pub fn validate(&self) -> Result<()> {
        if self.num_cliques < 2 || self.clique_size < 3 {
            return Err(Error::InvalidInput("caveman graphs need ≥ 2 cliques of size ≥ 3".into()));
        }
        Ok(())
    }

    /// Clique that owns `node`.
    pub fn clique_of(&self, node: usize) -> usize {
        node / self.clique_size
    }
}

fn caveman_adjacency(spec: &CavemanSpec, anchors: &[(usize, usize)]) -> DMatrix<f64> {
    let (k, s) = (spec.num_cliques, spec.clique_size);
    let n = k * s;
    let mut a = DMatrix::zeros(n, n);
    for c in 0..k {
        for i in c * s..(c + 1) * s {
            for j in c * s..(c + 1) * s {
                if i != j {
                    a[(i, j)] = 1.0;
                }
            }
        }
    }
    for (c, &(anchor, partner)) in anchors.iter().enumerate() {
        a[(anchor, partner)] = 0.0;
        a[(partner, anchor)] = 0.0;
        let next = anchors[(c + 1) % k].0;
        a[(anchor, next)] = 1.0;
        a[(next, anchor)] = 1.0;
    }
    a
}

/// Connected caveman graph: `k` cliques of size `s` on consecutive node
/// blocks. In clique `c` the edge between its two lowest nodes is removed and
/// its lowest node is joined to the lowest node of clique `(c + 1) mod k`.
/// The graph's `W_SOG` is the unit adjacency itself.
pub fn connected_caveman(spec: &CavemanSpec) -> Result<CompatibilityGraph> {
    CompatibilityGraph::from_adjacency(&connected_caveman_adjacency(spec)?)
}

pub fn connected_caveman_adjacency(spec: &CavemanSpec) -> Result<DMatrix<f64>> {
    spec.validate()?;
    let s = spec.clique_size;
    let anchors: Vec<(usize, usize)> = (0..spec.num_cliques).map(|c| (c * s, c * s + 1)).collect();
    Ok(caveman_adjacency(spec, &anchors))
}

/// Same construction with the removed edge and the bridging node of every
/// clique chosen at random.
pub fn connected_caveman_seeded(spec: &CavemanSpec, seed: u64) -> Result<CompatibilityGraph> {
    spec.validate()?;
    let s = spec.clique_size;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let anchors: Vec<(usize, usize)> = (0..spec.num_cliques)
        .map(|c| {
            let pick = rand::seq::index::sample(&mut rng, s, 2);
            (c * s + pick.index(0), c * s + pick.index(1))
        })
        .collect();
    CompatibilityGraph::from_adjacency(&caveman_adjacency(spec, &anchors))
}

/// Pairs every source point with the target whose feature is nearest in L2
/// (ties go to the lower target index).
pub fn nn_match(
    features_source: &[Vec<f64>],
    features_target: &[Vec<f64>],
    points_source: &[Vector3<f64>],
    points_target: &[Vector3<f64>],
) -> Result<CorrespondenceSet> {
    if features_source.len() != points_source.len() || features_target.len() != points_target.len() {
        return Err(Error::InvalidInput("feature and point counts differ".into()));
    }
    if features_target.is_empty() {
        return Err(Error::InvalidInput("no target features".into()));
    }
    let dim = features_target[0].len();
    if features_source.iter().chain(features_target).any(|f| f.len() != dim) {
        return Err(Error::InvalidInput("feature dimensions differ".into()));
    }
    let items = features_source
        .iter()
        .zip(points_source)
        .map(|(fs, ps)| {
            let mut best = (f64::INFINITY, 0);
            for (j, ft) in features_target.iter().enumerate() {
                let d: f64 = fs.iter().zip(ft).map(|(a, b)| (a - b) * (a - b)).sum();
                if d < best.0 {
                    best = (d, j);
                }
            }
            Correspondence::new(*ps, points_target[best.1])
        })
        .collect();
    CorrespondenceSet::new(items)
}
