//! Graph shifts, the graph Fourier transform and the graph filters used to
//! score nodes.
//!
//! Only symmetric shifts are decomposed; their eigenvectors form an
//! orthonormal basis, so `V⁻¹ = Vᵀ`. Eigenvalues are kept in descending
//! order, which puts low graph frequencies first.
//!
//! The Laplacian filter `Diag(s) − W_SOG` never needs a spectrum and has a
//! sparse matrix-free path ([`laplacian_response`]) used by the pipeline.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::graph::CompatibilityGraph;

const SYMMETRY_TOL: f64 = 1e-12;

/// Weighted adjacency operator scaled to unit spectral norm.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphShift {
    a: DMatrix<f64>,
    spectral_norm: f64,
    scale: f64,
}

impl GraphShift {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    /// Spectral norm of the normalized operator: 1, or 0 for the zero shift.
    pub fn spectral_norm(&self) -> f64 {
        self.spectral_norm
    }

    /// Largest singular value of the raw matrix the shift was built from.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn is_symmetric(&self) -> bool {
        is_symmetric(&self.a)
    }
}

fn is_symmetric(m: &DMatrix<f64>) -> bool {
    let n = m.nrows();
    let tol = SYMMETRY_TOL * m.amax().max(1.0);
    (0..n).all(|i| (0..i).all(|j| (m[(i, j)] - m[(j, i)]).abs() <= tol))
}

fn check_square(m: &DMatrix<f64>) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::NonSquare { rows: m.nrows(), cols: m.ncols() });
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("matrix has non-finite entries".into()));
    }
    Ok(())
}

/// Largest singular value. For symmetric input this is the largest eigenvalue
/// magnitude.
pub fn spectral_norm(m: &DMatrix<f64>) -> Result<f64> {
    check_square(m)?;
    if m.nrows() == 0 {
        return Ok(0.0);
    }
    if is_symmetric(m) {
        let eig = SymmetricEigen::try_new(m.clone(), f64::EPSILON, 0)
            .ok_or_else(|| Error::Decomposition("symmetric eigensolver did not converge".into()))?;
        Ok(eig.eigenvalues.amax())
    } else {
        let sv = m
            .clone()
            .try_svd(false, false, f64::EPSILON, 0)
            .ok_or_else(|| Error::Decomposition("SVD did not converge".into()))?
            .singular_values;
        Ok(sv.max())
    }
}

/// Divides `raw` by its largest singular value.
pub fn normalize_shift(raw: &DMatrix<f64>) -> Result<GraphShift> {
    let scale = spectral_norm(raw)?;
    if scale == 0.0 {
        return Ok(GraphShift { a: raw.clone(), spectral_norm: 0.0, scale: 0.0 });
    }
    Ok(GraphShift { a: raw / scale, spectral_norm: 1.0, scale })
}

/// Eigendecomposition `A = V Λ Vᵀ` of a symmetric shift.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    eigenvalues: Vec<f64>,
    eigenvectors: DMatrix<f64>,
}

impl SpectralDecomposition {
    pub fn new(shift: &GraphShift) -> Result<Self> {
        Self::of_symmetric(shift.matrix())
    }

    pub fn of_symmetric(m: &DMatrix<f64>) -> Result<Self> {
        check_square(m)?;
        if !is_symmetric(m) {
            return Err(Error::NonSymmetric);
        }
        let eig = SymmetricEigen::try_new(m.clone(), f64::EPSILON, 0)
            .ok_or_else(|| Error::Decomposition("symmetric eigensolver did not converge".into()))?;
        let n = m.nrows();
        let mut order: Vec<usize> = (0..n).collect();
        // descending, ties by original position for determinism
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
        let eigenvalues = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let eigenvectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
        Ok(Self { eigenvalues, eigenvectors })
    }

    /// Eigenvalues in descending order.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Column `k` is the eigenvector of `eigenvalues()[k]`.
    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        self.eigenvectors.transpose()
    }

    /// Spectrum `x̂ = V⁻¹ x`.
    pub fn gft(&self, x: &[f64]) -> Vec<f64> {
        let x = DVector::from_column_slice(x);
        (self.eigenvectors.tr_mul(&x)).iter().copied().collect()
    }

    /// Signal `x = V x̂`.
    pub fn inverse_gft(&self, spectrum: &[f64]) -> Vec<f64> {
        let s = DVector::from_column_slice(spectrum);
        (&self.eigenvectors * s).iter().copied().collect()
    }
}

pub fn gft(shift: &GraphShift, x: &[f64]) -> Result<Vec<f64>> {
    check_len(shift.n(), x.len())?;
    Ok(SpectralDecomposition::new(shift)?.gft(x))
}

pub fn inverse_gft(shift: &GraphShift, spectrum: &[f64]) -> Result<Vec<f64>> {
    check_len(shift.n(), spectrum.len())?;
    Ok(SpectralDecomposition::new(shift)?.inverse_gft(spectrum))
}

fn check_len(n: usize, len: usize) -> Result<()> {
    if n != len {
        return Err(Error::InvalidInput(format!("signal length {len} does not match graph size {n}")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterKind {
    HaarHigh,
    HaarLow,
    AllPass,
    Laplacian,
}

impl FilterKind {
    pub fn name(&self) -> &'static str {
        match self {
            FilterKind::HaarHigh => "haar_high",
            FilterKind::HaarLow => "haar_low",
            FilterKind::AllPass => "all_pass",
            FilterKind::Laplacian => "laplacian",
        }
    }
}

/// A linear graph filter in matrix form.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphFilter {
    kind: FilterKind,
    matrix: DMatrix<f64>,
}

impl GraphFilter {
    pub fn kind(&self) -> FilterKind {
        self.kind
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Diagonal of `Vᵀ H V`: the filter's gain at each graph frequency.
    pub fn spectral_response(&self, decomp: &SpectralDecomposition) -> Vec<f64> {
        let v = decomp.eigenvectors();
        let hv = &self.matrix * v;
        (0..v.ncols()).map(|k| v.column(k).dot(&hv.column(k))).collect()
    }
}

/// Haar-like high-pass `I − A`.
pub fn haar_high_pass(shift: &GraphShift) -> GraphFilter {
    let n = shift.n();
    GraphFilter { kind: FilterKind::HaarHigh, matrix: DMatrix::identity(n, n) - shift.matrix() }
}

/// Haar-like low-pass `I + A/|λ_max|`, with `|λ_max|` the spectral radius of
/// the (symmetric) shift.
pub fn haar_low_pass(shift: &GraphShift) -> Result<GraphFilter> {
    if !shift.is_symmetric() {
        return Err(Error::NonSymmetric);
    }
    let radius = spectral_norm(shift.matrix())?;
    if radius == 0.0 {
        return Err(Error::DegenerateShift);
    }
    let n = shift.n();
    Ok(GraphFilter { kind: FilterKind::HaarLow, matrix: DMatrix::identity(n, n) + shift.matrix() / radius })
}

pub fn all_pass(n: usize) -> GraphFilter {
    GraphFilter { kind: FilterKind::AllPass, matrix: DMatrix::identity(n, n) }
}

/// `Diag(s) − W_SOG` in dense form.
pub fn laplacian_filter(g: &CompatibilityGraph) -> GraphFilter {
    let mut m = -g.w_sog().to_dense();
    for (i, &s) in g.degree().iter().enumerate() {
        m[(i, i)] += s;
    }
    GraphFilter { kind: FilterKind::Laplacian, matrix: m }
}

pub fn apply_filter(filter: &GraphFilter, x: &[f64]) -> Result<Vec<f64>> {
    check_len(filter.matrix.nrows(), x.len())?;
    let x = DVector::from_column_slice(x);
    Ok((&filter.matrix * x).iter().copied().collect())
}

/// `(Diag(s) − W_SOG) x` without materializing the matrix.
pub fn laplacian_response(g: &CompatibilityGraph, x: &[f64]) -> Result<Vec<f64>> {
    check_len(g.n(), x.len())?;
    let s = g.degree();
    Ok((0..g.n())
        .map(|i| {
            let nb = g.w_sog().row(i).iter().fold(0.0, |acc, &(j, w)| acc + w * x[j]);
            s[i] * x[i] - nb
        })
        .collect())
}

/// `(I + D⁻¹ W_SOG) x` with `D = Diag(s)`. Rows of isolated nodes (`s_i = 0`)
/// of `D⁻¹ W_SOG` are zero.
pub fn random_walk_low_pass_response(g: &CompatibilityGraph, x: &[f64]) -> Result<Vec<f64>> {
    check_len(g.n(), x.len())?;
    let s = g.degree();
    Ok((0..g.n())
        .map(|i| {
            if s[i] == 0.0 {
                return x[i];
            }
            let nb = g.w_sog().row(i).iter().fold(0.0, |acc, &(j, w)| acc + w * x[j]);
            x[i] + nb / s[i]
        })
        .collect())
}

/// Largest eigenvalue of a nonnegative symmetric sparse matrix, by power
/// iteration on `W + I` (the shift makes the Perron root strictly dominant).
pub fn perron_root(w: &crate::graph::WeightRows) -> f64 {
    let n = w.n();
    if n == 0 || w.nnz() == 0 {
        return 0.0;
    }
    let mut v = vec![1.0 / (n as f64).sqrt(); n];
    let mut lambda = 0.0;
    for _ in 0..10_000 {
        let mut next = w.mul_vec(&v);
        for (a, b) in next.iter_mut().zip(&v) {
            *a += b;
        }
        let norm = next.iter().map(|x| x * x).sum::<f64>().sqrt();
        let est = norm - 1.0;
        next.iter_mut().for_each(|x| *x /= norm);
        v = next;
        if (est - lambda).abs() <= 1e-13 * est.abs().max(1.0) {
            return est;
        }
        lambda = est;
    }
    lambda
}

/// `(I − W_SOG/λ_max) x`, the Haar high-pass on the normalized second-order
/// shift, without materializing the matrix.
pub fn haar_high_pass_response(g: &CompatibilityGraph, x: &[f64]) -> Result<Vec<f64>> {
    check_len(g.n(), x.len())?;
    let radius = perron_root(g.w_sog());
    if radius == 0.0 {
        return Ok(x.to_vec());
    }
    let ax = g.w_sog().mul_vec(x);
    Ok(x.iter().zip(&ax).map(|(a, b)| a - b / radius).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_symmetric(n: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        (&m + m.transpose()) * 0.5
    }

    /// Independent route to the spectral norm: power iteration on `MᵀM`.
    fn power_iteration_norm(m: &DMatrix<f64>) -> f64 {
        let ata = m.transpose() * m;
        let mut v = DVector::from_element(m.ncols(), 1.0).normalize();
        let mut lambda = 0.0;
        for _ in 0..20_000 {
            let w = &ata * &v;
            let next = w.norm();
            v = w / next;
            if (next - lambda).abs() <= 1e-15 * next {
                lambda = next;
                break;
            }
            lambda = next;
        }
        lambda.sqrt()
    }

    fn two_node_shift() -> GraphShift {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        normalize_shift(&m).unwrap()
    }

    #[test]
    fn normalize_examples() {
        let id = DMatrix::<f64>::identity(3, 3);
        let s = normalize_shift(&id).unwrap();
        assert_eq!(s.matrix(), &id);
        assert_eq!(s.spectral_norm(), 1.0);
        let s = normalize_shift(&(id.clone() * 2.0)).unwrap();
        assert!((s.matrix() - &id).amax() < 1e-15);
        let z = normalize_shift(&DMatrix::zeros(4, 4)).unwrap();
        assert_eq!(z.spectral_norm(), 0.0);
        assert_eq!(z.matrix(), &DMatrix::zeros(4, 4));
        assert!(matches!(normalize_shift(&DMatrix::zeros(2, 3)), Err(Error::NonSquare { .. })));
    }

    #[test]
    fn normalized_norm_matches_power_iteration() {
        for seed in 0..5 {
            let s = normalize_shift(&random_symmetric(8, seed)).unwrap();
            let norm = power_iteration_norm(s.matrix());
            assert!((norm - 1.0).abs() < 1e-9, "seed {seed}: {norm}");
        }
        // nonsymmetric input goes through the SVD route
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let m = DMatrix::from_fn(6, 6, |_, _| rng.random_range(0.0..1.0));
        let s = normalize_shift(&m).unwrap();
        assert!((power_iteration_norm(s.matrix()) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn decomposition_reconstructs() {
        let s = normalize_shift(&random_symmetric(10, 3)).unwrap();
        let d = SpectralDecomposition::new(&s).unwrap();
        let ev = d.eigenvalues();
        assert!(ev.windows(2).all(|w| w[0] >= w[1]));
        let id = d.eigenvectors() * d.inverse();
        assert!((id - DMatrix::<f64>::identity(10, 10)).amax() < 1e-8);
        let lam = DMatrix::from_diagonal(&DVector::from_column_slice(ev));
        let rebuilt = d.eigenvectors() * lam * d.inverse();
        assert!((rebuilt - s.matrix()).amax() < 1e-10);
    }

    #[test]
    fn decomposition_rejects_nonsymmetric() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let s = normalize_shift(&m).unwrap();
        assert!(matches!(SpectralDecomposition::new(&s), Err(Error::NonSymmetric)));
        assert!(matches!(gft(&s, &[1.0, 0.0]), Err(Error::NonSymmetric)));
    }

    #[test]
    fn gft_examples() {
        let s = normalize_shift(&random_symmetric(7, 11)).unwrap();
        let d = SpectralDecomposition::new(&s).unwrap();
        for k in 0..7 {
            let x: Vec<f64> = d.eigenvectors().column(k).iter().copied().collect();
            let spec = d.gft(&x);
            for (j, v) in spec.iter().enumerate() {
                let want = if j == k { 1.0 } else { 0.0 };
                assert!((v - want).abs() < 1e-10);
            }
        }
        assert_eq!(gft(&s, &[0.0; 7]).unwrap(), vec![0.0; 7]);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x: Vec<f64> = (0..7).map(|_| rng.random_range(-3.0..3.0)).collect();
        let back = d.inverse_gft(&d.gft(&x));
        for (a, b) in x.iter().zip(&back) {
            assert!((a - b).abs() < 1e-8);
        }
        assert!(gft(&s, &[1.0; 3]).is_err());
    }

    #[test]
    fn haar_high_examples() {
        let id = normalize_shift(&DMatrix::identity(3, 3)).unwrap();
        assert_eq!(haar_high_pass(&id).matrix(), &DMatrix::zeros(3, 3));
        let z = normalize_shift(&DMatrix::zeros(3, 3)).unwrap();
        assert_eq!(haar_high_pass(&z).matrix(), &DMatrix::identity(3, 3));

        let s = two_node_shift();
        let d = SpectralDecomposition::new(&s).unwrap();
        assert_eq!(d.eigenvalues().len(), 2);
        let r = haar_high_pass(&s).spectral_response(&d);
        assert!((r[0] - 0.0).abs() < 1e-12 && (r[1] - 2.0).abs() < 1e-12, "{r:?}");
    }

    #[test]
    fn haar_low_examples() {
        let id = normalize_shift(&DMatrix::identity(3, 3)).unwrap();
        let f = haar_low_pass(&id).unwrap();
        assert!((f.matrix() - DMatrix::identity(3, 3) * 2.0).amax() < 1e-15);

        let s = two_node_shift();
        let d = SpectralDecomposition::new(&s).unwrap();
        let r = haar_low_pass(&s).unwrap().spectral_response(&d);
        assert!((r[0] - 2.0).abs() < 1e-12 && r[1].abs() < 1e-12, "{r:?}");

        let z = normalize_shift(&DMatrix::zeros(3, 3)).unwrap();
        assert!(matches!(haar_low_pass(&z), Err(Error::DegenerateShift)));
    }

    #[test]
    fn haar_responses_are_monotone_and_complementary() {
        for seed in 0..4 {
            let s = normalize_shift(&random_symmetric(9, 100 + seed)).unwrap();
            let d = SpectralDecomposition::new(&s).unwrap();
            let hi = haar_high_pass(&s);
            let lo = haar_low_pass(&s).unwrap();
            let rh = hi.spectral_response(&d);
            let rl = lo.spectral_response(&d);
            assert!(rh.windows(2).all(|w| w[0] <= w[1] + 1e-12));
            assert!(rl.windows(2).all(|w| w[0] + 1e-12 >= w[1]));
            let sum = hi.matrix() + lo.matrix();
            assert!((sum - DMatrix::identity(9, 9) * 2.0).amax() < 1e-12);
        }
    }

    #[test]
    fn all_pass_is_identity() {
        for n in [1, 5, 100] {
            let x: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
            assert_eq!(apply_filter(&all_pass(n), &x).unwrap(), x);
        }
    }

    fn star() -> CompatibilityGraph {
        let mut m = DMatrix::zeros(4, 4);
        for leaf in 1..4 {
            m[(0, leaf)] = 1.0;
            m[(leaf, 0)] = 1.0;
        }
        CompatibilityGraph::from_adjacency(&m).unwrap()
    }

    #[test]
    fn laplacian_star_values() {
        let g = star();
        let f = laplacian_filter(&g);
        let out = apply_filter(&f, g.degree()).unwrap();
        assert_eq!(out, vec![6.0, -2.0, -2.0, -2.0]);
        assert_eq!(laplacian_response(&g, g.degree()).unwrap(), out);
    }

    #[test]
    fn laplacian_annihilates_constants_and_regular_degree() {
        // 5-cycle: 2-regular
        let mut m = DMatrix::zeros(5, 5);
        for i in 0..5 {
            m[(i, (i + 1) % 5)] = 1.0;
            m[((i + 1) % 5, i)] = 1.0;
        }
        let g = CompatibilityGraph::from_adjacency(&m).unwrap();
        assert_eq!(laplacian_response(&g, g.degree()).unwrap(), vec![0.0; 5]);
        assert_eq!(laplacian_response(&g, &[3.5; 5]).unwrap(), vec![0.0; 5]);
        let f = laplacian_filter(&g);
        for i in 0..5 {
            assert_eq!(f.matrix().row(i).sum(), 0.0);
        }
    }

    #[test]
    fn random_walk_low_pass_on_star() {
        let g = star();
        // hub: 3 + (1+1+1)/3 = 4; leaf: 1 + 3/1 = 4
        let r = random_walk_low_pass_response(&g, g.degree()).unwrap();
        assert_eq!(r, vec![4.0; 4]);
    }

    #[test]
    fn sparse_high_pass_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let n = 30;
        let mut w = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i + 1..n {
                if rng.random::<f64>() < 0.3 {
                    let v = rng.random_range(0.1..1.0);
                    w[(i, j)] = v;
                    w[(j, i)] = v;
                }
            }
        }
        let g = CompatibilityGraph::from_adjacency(&w).unwrap();
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let dense = apply_filter(&haar_high_pass(&normalize_shift(&w).unwrap()), &x).unwrap();
        let sparse = haar_high_pass_response(&g, &x).unwrap();
        for (a, b) in dense.iter().zip(&sparse) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
        let empty = CompatibilityGraph::from_adjacency(&DMatrix::zeros(3, 3)).unwrap();
        assert_eq!(haar_high_pass_response(&empty, &[1.0, 2.0, 3.0]).unwrap(), vec![1.0, 2.0, 3.0]);
    }
}
