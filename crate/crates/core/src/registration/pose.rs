use nalgebra::{Matrix3, Rotation3, Unit, Vector3};
use serde::{Deserialize, Serialize};

use crate::correspondence::{Correspondence, CorrespondenceSet};
use crate::error::{Error, Result};

/// Rotation followed by translation: `x ↦ R x + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self { rotation: Matrix3::identity(), translation: Vector3::zeros() }
    }

    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        Self { rotation, translation }
    }

    /// Rotation by `angle` radians about `axis` (need not be normalized).
    pub fn from_axis_angle(axis: Vector3<f64>, angle: f64, translation: Vector3<f64>) -> Self {
        let r = Rotation3::from_axis_angle(&Unit::new_normalize(axis), angle);
        Self { rotation: *r.matrix(), translation }
    }

    pub fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    /// `self ∘ other`
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        RigidTransform {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> RigidTransform {
        let rt = self.rotation.transpose();
        RigidTransform { rotation: rt, translation: -(rt * self.translation) }
    }

    /// Orthonormal with determinant +1, within `tol`.
    pub fn is_valid(&self, tol: f64) -> bool {
        let ortho = (self.rotation.transpose() * self.rotation - Matrix3::identity()).amax();
        ortho <= tol && (self.rotation.determinant() - 1.0).abs() <= tol
    }

    pub fn rotation_row_major(&self) -> [f64; 9] {
        let r = &self.rotation;
        [r[(0, 0)], r[(0, 1)], r[(0, 2)], r[(1, 0)], r[(1, 1)], r[(1, 2)], r[(2, 0)], r[(2, 1)], r[(2, 2)]]
    }

    pub fn from_row_major(rotation: [f64; 9], translation: [f64; 3]) -> Self {
        Self { rotation: Matrix3::from_row_slice(&rotation), translation: Vector3::from(translation) }
    }
}

#[derive(Serialize, Deserialize)]
struct TransformRepr {
    rotation: [f64; 9],
    translation: [f64; 3],
}

impl Serialize for RigidTransform {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        TransformRepr { rotation: self.rotation_row_major(), translation: self.translation.into() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for RigidTransform {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = TransformRepr::deserialize(d)?;
        Ok(Self::from_row_major(r.rotation, r.translation))
    }
}

/// Relative size below which the second singular value of the
/// cross-covariance counts as zero.
const RANK_TOL: f64 = 1e-12;

/// Weighted least-squares rigid fit minimizing `Σ w_i ‖R p_i + t − q_i‖²`
/// (Kabsch), with the reflection case corrected to a proper rotation.
pub fn estimate_pose_svd(pairs: &[Correspondence], weights: Option<&[f64]>) -> Result<RigidTransform> {
    if pairs.len() < 3 {
        return Err(Error::DegenerateClique);
    }
    if let Some(w) = weights {
        if w.len() != pairs.len() {
            return Err(Error::InvalidInput("weight count does not match pairs".into()));
        }
        if w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidInput("weights must be finite and nonnegative".into()));
        }
    }
    let weight = |i: usize| weights.map_or(1.0, |w| w[i]);
    let total: f64 = (0..pairs.len()).map(weight).sum();
    if total.is_nan() || total <= 0.0 {
        return Err(Error::DegenerateClique);
    }
    let mut cs = Vector3::zeros();
    let mut ct = Vector3::zeros();
    for (i, c) in pairs.iter().enumerate() {
        cs += weight(i) * c.source;
        ct += weight(i) * c.target;
    }
    cs /= total;
    ct /= total;
    let mut h = Matrix3::zeros();
    for (i, c) in pairs.iter().enumerate() {
        h += weight(i) * (c.source - cs) * (c.target - ct).transpose();
    }
    let svd = h.svd(true, true);
    let mut sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    if sv[0].is_nan() || sv[0] <= 0.0 || sv[1] <= RANK_TOL * sv[0] {
        return Err(Error::DegenerateClique);
    }
    let u = svd.u.expect("requested U");
    let v = svd.v_t.expect("requested Vᵀ").transpose();
    let d = (v * u.transpose()).determinant().signum();
    let rotation = v * Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, d)) * u.transpose();
    let translation = ct - rotation * cs;
    Ok(RigidTransform { rotation, translation })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreMetric {
    /// number of correspondences with residual ≤ threshold
    #[default]
    InlierCount,
    /// `Σ (τ − r_i)/τ` over correspondences with residual `r_i ≤ τ`
    TruncatedMae,
}

/// Consensus score of a transform over a correspondence set.
pub fn hypothesis_score(tf: &RigidTransform, corrs: &CorrespondenceSet, threshold: f64) -> f64 {
    score_with(tf, corrs, threshold, ScoreMetric::InlierCount)
}

pub fn score_with(tf: &RigidTransform, corrs: &CorrespondenceSet, threshold: f64, metric: ScoreMetric) -> f64 {
    let mut total = 0.0;
    for c in corrs {
        let r = (tf.apply(&c.source) - c.target).norm();
        if r <= threshold {
            total += match metric {
                ScoreMetric::InlierCount => 1.0,
                ScoreMetric::TruncatedMae => (threshold - r) / threshold,
            };
        }
    }
    total
}
