//! First- and second-order compatibility graphs over a correspondence set.
//!
//! Two correspondences are compatible when the distance between their source
//! points matches the distance between their target points. The first-order
//! graph `W` thresholds a Gaussian-like score of that mismatch; the
//! second-order graph is `W ⊙ (W·W)`, which keeps an edge only when its
//! endpoints also share compatible neighbours. The generalized degree of a
//! node is its row sum in the second-order graph.
//!
//! Both matrices are symmetric with a zero diagonal and are stored as sorted
//! sparse rows. Dense copies are available through [`WeightRows::to_dense`];
//! the sparse row sums skip only exact zeros, so degrees match a dense row
//! sum bit for bit.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::correspondence::{Correspondence, CorrespondenceSet};
use crate::error::{Error, Result};

/// Hyperparameters of the first-order compatibility score.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GraphConfig {
    /// Length scale of the compatibility score.
    pub d_cmp: f64,
    /// Edge admission threshold; scores at or below it are dropped.
    pub t: f64,
}

impl Default for GraphConfig {
    fn default() -> Self {
        Self { d_cmp: 0.1, t: 0.999 }
    }
}

impl GraphConfig {
    pub fn new(d_cmp: f64, t: f64) -> Result<Self> {
        let cfg = Self { d_cmp, t };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.d_cmp > 0.0 && self.d_cmp.is_finite()) {
            return Err(Error::InvalidInput(format!("d_cmp must be > 0, got {}", self.d_cmp)));
        }
        if !(0.0..1.0).contains(&self.t) {
            return Err(Error::InvalidInput(format!("t must lie in [0, 1), got {}", self.t)));
        }
        Ok(())
    }
}

/// `| ‖p_i^s − p_j^s‖ − ‖p_i^t − p_j^t‖ |`
pub fn compatibility_distance(ci: &Correspondence, cj: &Correspondence) -> f64 {
    ((ci.source - cj.source).norm() - (ci.target - cj.target).norm()).abs()
}

/// First-order edge weight: `1 − d²/(2·d_cmp²)` when that exceeds `t`, else 0.
pub fn edge_weight(ci: &Correspondence, cj: &Correspondence, cfg: &GraphConfig) -> f64 {
    let d = compatibility_distance(ci, cj);
    let v = 1.0 - d * d / (2.0 * cfg.d_cmp * cfg.d_cmp);
    if v > cfg.t {
        v
    } else {
        0.0
    }
}

/// Symmetric sparse matrix stored row by row, columns ascending, zeros omitted.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightRows {
    rows: Vec<Vec<(usize, f64)>>,
}

impl WeightRows {
    fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Self {
        Self { rows }
    }

    pub fn zeros(n: usize) -> Self {
        Self { rows: vec![Vec::new(); n] }
    }

    /// Builds from a dense matrix, dropping exact zeros.
    pub fn from_dense(m: &DMatrix<f64>) -> Self {
        let rows = (0..m.nrows())
            .map(|i| {
                (0..m.ncols())
                    .filter_map(|j| {
                        let v = m[(i, j)];
                        (v != 0.0).then_some((j, v))
                    })
                    .collect()
            })
            .collect();
        Self { rows }
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let row = &self.rows[i];
        match row.binary_search_by_key(&j, |&(c, _)| c) {
            Ok(k) => row[k].1,
            Err(_) => 0.0,
        }
    }

    /// Number of stored (nonzero) entries, counting both triangles.
    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.iter().fold(0.0, |acc, &(_, v)| acc + v)).collect()
    }

    /// `y = M x`
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        self.rows.iter().map(|r| r.iter().fold(0.0, |acc, &(j, v)| acc + v * x[j])).collect()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.n();
        let mut m = DMatrix::zeros(n, n);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                m[(i, j)] = v;
            }
        }
        m
    }

    /// Principal submatrix on `indices`, re-indexed to `0..indices.len()`.
    /// `indices` must be strictly increasing.
    pub fn induced(&self, indices: &[usize]) -> Self {
        let mut local = vec![usize::MAX; self.n()];
        for (k, &i) in indices.iter().enumerate() {
            local[i] = k;
        }
        let rows = indices
            .iter()
            .map(|&i| {
                self.rows[i].iter().filter_map(|&(j, v)| (local[j] != usize::MAX).then_some((local[j], v))).collect()
            })
            .collect();
        Self { rows }
    }
}

/// Compatibility graph with its generalized degree signal.
#[derive(Debug, Clone, PartialEq)]
pub struct CompatibilityGraph {
    w: WeightRows,
    w_sog: WeightRows,
    degree: Vec<f64>,
}

impl CompatibilityGraph {
    pub fn n(&self) -> usize {
        self.degree.len()
    }

    /// First-order weights.
    pub fn w(&self) -> &WeightRows {
        &self.w
    }

    /// Second-order weights.
    pub fn w_sog(&self) -> &WeightRows {
        &self.w_sog
    }

    /// Generalized degree signal (row sums of the second-order weights).
    pub fn degree(&self) -> &[f64] {
        &self.degree
    }

    /// Builds the second-order graph from a given first-order matrix.
    pub fn from_first_order(w: &DMatrix<f64>) -> Result<Self> {
        validate_adjacency(w)?;
        let w = WeightRows::from_dense(w);
        let w_sog = second_order(&w);
        let degree = w_sog.row_sums();
        Ok(Self { w, w_sog, degree })
    }

    /// Uses `adjacency` directly as both first- and second-order weights.
    /// Crafted graphs (caveman graphs, stars) are filtered as given.
    pub fn from_adjacency(adjacency: &DMatrix<f64>) -> Result<Self> {
        validate_adjacency(adjacency)?;
        let w = WeightRows::from_dense(adjacency);
        let degree = w.row_sums();
        Ok(Self { w_sog: w.clone(), w, degree })
    }

    /// Graph induced on a strictly increasing subset of nodes. The first-order
    /// weights are restricted and the second-order weights recomputed, which is
    /// the same as building the graph from the corresponding correspondences.
    pub fn induced(&self, indices: &[usize]) -> Self {
        let w = self.w.induced(indices);
        let w_sog = second_order(&w);
        let degree = w_sog.row_sums();
        Self { w, w_sog, degree }
    }
}

fn validate_adjacency(m: &DMatrix<f64>) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::NonSquare { rows: m.nrows(), cols: m.ncols() });
    }
    let n = m.nrows();
    for i in 0..n {
        if m[(i, i)] != 0.0 {
            return Err(Error::InvalidInput(format!("nonzero diagonal at node {i}")));
        }
        for j in 0..n {
            let v = m[(i, j)];
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidInput(format!("invalid weight at ({i}, {j})")));
            }
            if v != m[(j, i)] {
                return Err(Error::NonSymmetric);
            }
        }
    }
    Ok(())
}

/// `W ⊙ (W·W)` evaluated only where `W` is nonzero. Each entry sums the
/// common-neighbour products in ascending neighbour order; the upper triangle
/// is computed and mirrored.
fn second_order(w: &WeightRows) -> WeightRows {
    let n = w.n();
    let upper: Vec<Vec<(usize, f64)>> = (0..n)
        .into_par_iter()
        .map_init(
            || vec![0.0; n],
            |dense, i| {
                let ri = w.row(i);
                for &(k, v) in ri {
                    dense[k] = v;
                }
                let start = ri.partition_point(|&(j, _)| j <= i);
                let out = ri[start..]
                    .iter()
                    .filter_map(|&(j, wij)| {
                        // non-neighbours of i contribute exact zeros
                        let common = w.row(j).iter().fold(0.0, |acc, &(k, wjk)| acc + dense[k] * wjk);
                        let v = wij * common;
                        (v > 0.0).then_some((j, v))
                    })
                    .collect();
                for &(k, _) in ri {
                    dense[k] = 0.0;
                }
                out
            },
        )
        .collect();
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (i, up) in upper.iter().enumerate() {
        for &(j, v) in up {
            rows[j].push((i, v));
        }
    }
    for (row, up) in rows.iter_mut().zip(upper) {
        row.extend(up);
    }
    WeightRows::from_rows(rows)
}

/// Builds `W`, `W_SOG` and the generalized degree signal.
pub fn build_graph(corrs: &CorrespondenceSet, cfg: &GraphConfig) -> Result<CompatibilityGraph> {
    cfg.validate()?;
    let items = corrs.items();
    let n = items.len();
    let rows: Vec<Vec<(usize, f64)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let ci = &items[i];
            (0..n)
                .filter(|&j| j != i)
                .filter_map(|j| {
                    let v = edge_weight(ci, &items[j], cfg);
                    (v > 0.0).then_some((j, v))
                })
                .collect()
        })
        .collect();
    let w = WeightRows::from_rows(rows);
    let w_sog = second_order(&w);
    let degree = w_sog.row_sums();
    Ok(CompatibilityGraph { w, w_sog, degree })
}
