use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{SampleSelection, SamplingDistribution};
use crate::error::{Error, Result};

/// Draws `m` nodes from `dist`.
///
/// With replacement the draws are i.i.d. Without replacement the result is
/// distributed as drawing one node at a time, each pick removing the node and
/// renormalizing the rest. When the positive-probability nodes run out, the
/// remainder is drawn uniformly from the unpicked nodes and counted in
/// `topped_up`.
pub fn stochastic_sample(
    dist: &SamplingDistribution,
    m: usize,
    seed: u64,
    replacement: bool,
) -> Result<SampleSelection> {
    let n = dist.len();
    if m < 1 {
        return Err(Error::Sampling("sample count must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if replacement {
        let w = WeightedIndex::new(dist.pi()).map_err(|e| Error::Sampling(e.to_string()))?;
        let indices = (0..m).map(|_| w.sample(&mut rng)).collect();
        return Ok(SampleSelection { indices, replacement, seed, topped_up: 0 });
    }
    if m > n {
        return Err(Error::Sampling(format!("cannot draw {m} distinct nodes from {n}")));
    }

    // Efraimidis–Spirakis: node i gets key ln(u_i)/π_i and the m largest keys,
    // in descending order, have the law of m sequential draws without
    // replacement. Zero-mass nodes follow in uniformly random order, which is
    // the uniform top-up.
    let mut weighted: Vec<(u64, usize)> = Vec::with_capacity(dist.support());
    let mut rest: Vec<usize> = Vec::new();
    for (i, &p) in dist.pi().iter().enumerate() {
        if p > 0.0 {
            let u = 1.0 - rng.random::<f64>();
            weighted.push((descending(u.ln() / p), i));
        } else {
            rest.push(i);
        }
    }
    let mut indices = top_keys(weighted, m);
    let topped_up = m - indices.len();
    if topped_up > 0 {
        let pick = rand::seq::index::sample(&mut rng, rest.len(), topped_up);
        indices.extend(pick.iter().map(|k| rest[k]));
        log::warn!("distribution has {} nonzero nodes; drawing {topped_up} more uniformly", dist.support());
    }
    Ok(SampleSelection { indices, replacement, seed, topped_up })
}

/// Integer that sorts ascending as `x` sorts descending under `f64::total_cmp`.
fn descending(x: f64) -> u64 {
    let b = x.to_bits();
    let ascending = if b >> 63 == 1 { !b } else { b | 1 << 63 };
    !ascending
}

/// Indices of the `k` smallest encoded keys, i.e. the largest keys first
/// (ties to the lower index).
fn top_keys(mut keyed: Vec<(u64, usize)>, k: usize) -> Vec<usize> {
    if k == 0 {
        return Vec::new();
    }
    if k < keyed.len() {
        keyed.select_nth_unstable(k - 1);
        keyed.truncate(k);
    }
    keyed.sort_unstable();
    keyed.into_iter().map(|(_, i)| i).collect()
}
