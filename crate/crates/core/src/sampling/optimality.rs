//! Reconstruction of a graph signal from weighted samples, and its expected
//! squared error.

use crate::error::{Error, Result};

/// `Σ_i (1/π_i − 1) f_i²`: the expected squared error of the single-draw
/// estimator `f_i / π_i · 1[i drawn]`. Infinite when a node with signal has
/// zero probability.
pub fn expected_reconstruction_error(pi: &[f64], f: &[f64]) -> Result<f64> {
    if pi.len() != f.len() {
        return Err(Error::InvalidInput("distribution and signal lengths differ".into()));
    }
    let mut total = 0.0;
    for (&p, &v) in pi.iter().zip(f) {
        if p <= 0.0 {
            if v != 0.0 {
                return Ok(f64::INFINITY);
            }
            continue;
        }
        total += (1.0 / p - 1.0) * v * v;
    }
    Ok(total)
}

/// Expected error of the average over `m` independent draws.
pub fn expected_reconstruction_error_for_draws(pi: &[f64], f: &[f64], m: usize) -> Result<f64> {
    if m < 1 {
        return Err(Error::InvalidInput("need at least one draw".into()));
    }
    Ok(expected_reconstruction_error(pi, f)? / m as f64)
}

/// Unbiased estimate `x̂_i = c_i f_i / (m π_i)` where `c_i` counts how often
/// node `i` was drawn.
pub fn reconstruct(f: &[f64], draws: &[usize], pi: &[f64]) -> Result<Vec<f64>> {
    if pi.len() != f.len() {
        return Err(Error::InvalidInput("distribution and signal lengths differ".into()));
    }
    if draws.is_empty() {
        return Err(Error::InvalidInput("need at least one draw".into()));
    }
    let m = draws.len() as f64;
    let mut out = vec![0.0; f.len()];
    for &i in draws {
        if i >= f.len() {
            return Err(Error::InvalidInput(format!("draw {i} out of range")));
        }
        if pi[i] <= 0.0 {
            return Err(Error::InvalidInput(format!("node {i} drawn with zero probability")));
        }
        out[i] += f[i] / (m * pi[i]);
    }
    Ok(out)
}
