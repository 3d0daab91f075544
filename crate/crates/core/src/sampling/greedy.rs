//! Deterministic greedy sampling: grow a set of rows of the bandlimited
//! eigenbasis `V_(K)`, each step adding the row that maximizes the smallest
//! singular value of the stacked rows.
//!
//! Every candidate's `σ_min` is the square root of the smallest eigenvalue of
//! a Gram matrix. While the stack has at most `K` rows that is the row Gram
//! `S Sᵀ` bordered by the candidate (an arrowhead matrix in the eigenbasis of
//! `S Sᵀ`); afterwards it is the column Gram `SᵀS + r rᵀ`, a rank-one update.
//! Both smallest eigenvalues are found by bisection on Sylvester inertia
//! counts, which costs O(rows) per probe instead of an SVD per candidate.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;

use super::SampleSelection;
use crate::error::{Error, Result};
use crate::gsp::{GraphShift, SpectralDecomposition};

/// Ties in `σ_min` closer than this go to the lower row index.
const TIE_TOL: f64 = 1e-12;

/// Greedy sampling on the `k` lowest-frequency eigenvectors of a symmetric
/// shift. Returns the rows in the order they were picked.
pub fn greedy_deterministic_sample(shift: &GraphShift, k: usize, m: usize) -> Result<SampleSelection> {
    let n = shift.n();
    if k < 1 || k > n {
        return Err(Error::InvalidInput(format!("bandwidth {k} must lie in 1..={n}")));
    }
    if m < 1 || m > n {
        return Err(Error::Sampling(format!("sample count {m} must lie in 1..={n}")));
    }
    let decomp = SpectralDecomposition::new(shift)?;
    let basis = decomp.eigenvectors().columns(0, k).into_owned();
    let indices = greedy_select_rows(&basis, m)?;
    Ok(SampleSelection { indices, replacement: false, seed: 0, topped_up: 0 })
}

enum Stack {
    Empty,
    /// eigenvalues of the row Gram `S Sᵀ`
    Wide {
        values: Vec<f64>,
    },
    /// eigenvalues of the column Gram `SᵀS`
    Tall {
        values: Vec<f64>,
    },
}

/// Greedy row selection on an explicit `n × k` basis.
pub fn greedy_select_rows(basis: &DMatrix<f64>, m: usize) -> Result<Vec<usize>> {
    let (n, k) = basis.shape();
    if m > n {
        return Err(Error::Sampling(format!("cannot select {m} rows from {n}")));
    }
    if k == 0 {
        return Err(Error::InvalidInput("basis has no columns".into()));
    }
    let basis_t = basis.transpose();
    let sq_norm: Vec<f64> = (0..n).map(|c| basis_t.column(c).norm_squared()).collect();
    // dots[(t, c)] = row c · row selected[t]
    let mut dots = DMatrix::zeros(m.max(1), n);
    let mut available = vec![true; n];
    let mut selected: Vec<usize> = Vec::with_capacity(m);

    for _ in 0..m {
        let i = selected.len();
        // columns of `proj` are the candidates' coupling vectors in the Gram eigenbasis
        let (stack, proj) = if i == 0 {
            (Stack::Empty, DMatrix::zeros(0, n))
        } else if i < k {
            let gram = DMatrix::from_fn(i, i, |a, b| dots[(b, selected[a])]);
            let (vectors, values) = eigh(gram)?;
            let proj = vectors.tr_mul(&dots.rows(0, i));
            (Stack::Wide { values }, proj)
        } else {
            let sel = DMatrix::from_fn(k, i, |a, t| basis_t[(a, selected[t])]);
            let (vectors, values) = eigh(&sel * sel.transpose())?;
            let proj = vectors.tr_mul(&basis_t);
            (Stack::Tall { values }, proj)
        };

        let scores: Vec<(usize, f64)> = (0..n)
            .into_par_iter()
            .filter(|&c| available[c])
            .map(|c| {
                let z = proj.column(c);
                let z = z.as_slice();
                let lam = match &stack {
                    Stack::Empty => sq_norm[c],
                    Stack::Wide { values } => arrowhead_min_eigenvalue(values, z, sq_norm[c]),
                    Stack::Tall { values } => rank_one_min_eigenvalue(values, z),
                };
                (c, lam.max(0.0).sqrt())
            })
            .collect();

        let mut best: Option<(usize, f64)> = None;
        for (c, sigma) in scores {
            if best.is_none_or(|(_, b)| sigma > b + TIE_TOL) {
                best = Some((c, sigma));
            }
        }
        let (pick, _) = best.expect("at least one row remains");
        available[pick] = false;
        selected.push(pick);
        let row = basis_t.column(pick).transpose() * &basis_t;
        dots.row_mut(i).copy_from(&row);
    }
    Ok(selected)
}

fn eigh(m: DMatrix<f64>) -> Result<(DMatrix<f64>, Vec<f64>)> {
    let eig = SymmetricEigen::try_new(m, f64::EPSILON, 0)
        .ok_or_else(|| Error::Decomposition("Gram eigensolver did not converge".into()))?;
    Ok((eig.eigenvectors, eig.eigenvalues.iter().copied().collect()))
}

const BISECT_STEPS: usize = 200;

fn bisect<F: Fn(f64) -> bool>(mut lo: f64, mut hi: f64, below: F) -> f64 {
    // invariant: no eigenvalue below `lo`, at least one below `hi`
    let tol = 4.0 * f64::EPSILON * lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE);
    for _ in 0..BISECT_STEPS {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if below(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

fn nudge(d: f64) -> f64 {
    if d == 0.0 {
        -f64::MIN_POSITIVE
    } else {
        d
    }
}

/// Smallest eigenvalue of `[[diag(values), z], [zᵀ, alpha]]`.
pub(crate) fn arrowhead_min_eigenvalue(values: &[f64], z: &[f64], alpha: f64) -> f64 {
    let head = values.iter().copied().fold(alpha, f64::min);
    let znorm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
    let pad = 1e-14 * (1.0 + head.abs() + znorm);
    let lo = head - znorm - pad;
    let hi = head + pad;
    bisect(lo, hi, |mu| {
        let mut negatives = 0usize;
        let mut last = alpha - mu;
        for (&lam, &zj) in values.iter().zip(z) {
            let d = nudge(lam - mu);
            if d < 0.0 {
                negatives += 1;
            }
            last -= zj * zj / d;
        }
        if last < 0.0 {
            negatives += 1;
        }
        negatives >= 1
    })
}

/// Smallest eigenvalue of `diag(values) + z zᵀ`.
pub(crate) fn rank_one_min_eigenvalue(values: &[f64], z: &[f64]) -> f64 {
    let head = values.iter().copied().fold(f64::INFINITY, f64::min);
    let zsq: f64 = z.iter().map(|v| v * v).sum();
    let pad = 1e-14 * (1.0 + head.abs() + zsq);
    let lo = head - pad;
    let hi = head + zsq + pad;
    bisect(lo, hi, |mu| {
        let mut negatives = 0usize;
        let mut q = 1.0;
        for (&lam, &zj) in values.iter().zip(z) {
            let d = nudge(lam - mu);
            if d < 0.0 {
                negatives += 1;
            }
            q += zj * zj / d;
        }
        let count = if q <= 0.0 { negatives.saturating_sub(1) } else { negatives };
        count >= 1
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn min_eig(m: DMatrix<f64>) -> f64 {
        SymmetricEigen::new(m).eigenvalues.min()
    }

    #[test]
    fn arrowhead_matches_dense_eigensolver() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for size in 1..8 {
            for _ in 0..20 {
                let values: Vec<f64> = (0..size).map(|_| rng.random_range(0.0..3.0)).collect();
                let z: Vec<f64> = (0..size).map(|_| rng.random_range(-1.0..1.0)).collect();
                let alpha = rng.random_range(0.0..2.0);
                let mut m = DMatrix::zeros(size + 1, size + 1);
                for j in 0..size {
                    m[(j, j)] = values[j];
                    m[(j, size)] = z[j];
                    m[(size, j)] = z[j];
                }
                m[(size, size)] = alpha;
                let got = arrowhead_min_eigenvalue(&values, &z, alpha);
                let want = min_eig(m);
                assert!((got - want).abs() < 1e-12, "{got} vs {want}");
            }
        }
    }

    #[test]
    fn rank_one_matches_dense_eigensolver() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for size in 1..8 {
            for _ in 0..20 {
                let values: Vec<f64> = (0..size).map(|_| rng.random_range(0.0..3.0)).collect();
                let z: Vec<f64> = (0..size).map(|_| rng.random_range(-1.0..1.0)).collect();
                let zv = nalgebra::DVector::from_column_slice(&z);
                let m = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&values)) + &zv * zv.transpose();
                let got = rank_one_min_eigenvalue(&values, &z);
                let want = min_eig(m);
                assert!((got - want).abs() < 1e-12, "{got} vs {want}");
            }
        }
    }

    #[test]
    fn degenerate_directions() {
        // zero coupling: the smaller of the head entries
        assert!((arrowhead_min_eigenvalue(&[1.0, 2.0], &[0.0, 0.0], 0.5) - 0.5).abs() < 1e-14);
        assert!((arrowhead_min_eigenvalue(&[1.0, 2.0], &[0.0, 0.0], 3.0) - 1.0).abs() < 1e-14);
        assert!((rank_one_min_eigenvalue(&[0.0, 0.0], &[1.0, 0.0])).abs() < 1e-14);
    }

    #[test]
    fn selects_all_rows_when_m_equals_n() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let basis = DMatrix::from_fn(6, 3, |_, _| rng.random_range(-1.0..1.0));
        let mut got = greedy_select_rows(&basis, 6).unwrap();
        got.sort_unstable();
        assert_eq!(got, (0..6).collect::<Vec<_>>());
        assert!(greedy_select_rows(&basis, 7).is_err());
    }
}
