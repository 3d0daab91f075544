//! Maximal clique enumeration on the second-order graph and node-guided
//! clique selection.
//!
//! Enumeration is Bron–Kerbosch with Tomita pivoting over bitsets. The outer
//! level walks the vertices in degeneracy order, so each root branch only
//! sees later neighbours as candidates. Root branches run in parallel in
//! fixed-size chunks; results are concatenated in root order, which keeps a
//! count-truncated search independent of the thread count.

use std::io::Write;
use std::sync::atomic::{AtomicBool, Ordering};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::CompatibilityGraph;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CliqueBudget {
    pub max_cliques: u64,
    pub time_budget_ms: u64,
}

impl Default for CliqueBudget {
    fn default() -> Self {
        Self { max_cliques: 10_000_000, time_budget_ms: 10_000 }
    }
}

impl CliqueBudget {
    pub fn new(max_cliques: u64, time_budget_ms: u64) -> Result<Self> {
        let b = Self { max_cliques, time_budget_ms };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_cliques == 0 || self.time_budget_ms == 0 {
            return Err(Error::InvalidInput("clique budget must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clique {
    /// ascending
    pub nodes: Vec<usize>,
    pub weight: f64,
}

impl Clique {
    /// Builds a clique from its nodes, summing `W_SOG` over internal pairs.
    pub fn new(mut nodes: Vec<usize>, g: &CompatibilityGraph) -> Self {
        nodes.sort_unstable();
        let weight = clique_weight(&nodes, g);
        Self { nodes, weight }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Sum of `W_SOG` over unordered pairs of `nodes`, in a fixed order.
pub fn clique_weight(nodes: &[usize], g: &CompatibilityGraph) -> f64 {
    let w = g.w_sog();
    let mut total = 0.0;
    for (a, &i) in nodes.iter().enumerate() {
        for &j in &nodes[a + 1..] {
            total += w.get(i, j);
        }
    }
    total
}

#[derive(Debug, Clone, PartialEq)]
pub struct CliqueSearch {
    /// Sorted lexicographically by node sequence.
    pub cliques: Vec<Clique>,
    /// False when the budget cut the search short.
    pub complete: bool,
}

#[derive(Clone, PartialEq, Eq)]
struct Bits(Vec<u64>);

impl Bits {
    fn zeros(n: usize) -> Self {
        Bits(vec![0; n.div_ceil(64)])
    }
    fn set(&mut self, i: usize) {
        self.0[i / 64] |= 1 << (i % 64);
    }
    fn is_empty(&self) -> bool {
        self.0.iter().all(|&w| w == 0)
    }
    fn and(&self, o: &Bits) -> Bits {
        Bits(self.0.iter().zip(&o.0).map(|(a, b)| a & b).collect())
    }
    fn and_not(&self, o: &Bits) -> Bits {
        Bits(self.0.iter().zip(&o.0).map(|(a, b)| a & !b).collect())
    }
    fn and_count(&self, o: &Bits) -> u32 {
        self.0.iter().zip(&o.0).map(|(a, b)| (a & b).count_ones()).sum()
    }
    fn clear(&mut self, i: usize) {
        self.0[i / 64] &= !(1 << (i % 64));
    }
    fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().enumerate().flat_map(|(k, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let b = w.trailing_zeros() as usize;
                w &= w - 1;
                Some(k * 64 + b)
            })
        })
    }
}

/// `W_SOG` restricted to a root and its neighbours, which contain every
/// clique found from that root.
struct Block {
    members: Vec<usize>,
    w: Vec<f64>,
}

impl Block {
    fn new(root: usize, lists: &[Vec<usize>], g: &CompatibilityGraph) -> Self {
        let mut members = lists[root].clone();
        let at = members.partition_point(|&u| u < root);
        members.insert(at, root);
        let k = members.len();
        let mut w = vec![0.0; k * k];
        for (a, &i) in members.iter().enumerate() {
            // merge the sorted row with the sorted member list
            let mut b = 0;
            for &(j, v) in g.w_sog().row(i) {
                while b < k && members[b] < j {
                    b += 1;
                }
                if b == k {
                    break;
                }
                if members[b] == j {
                    w[a * k + b] = v;
                }
            }
        }
        Self { members, w }
    }

    /// Same summation order as `clique_weight`.
    fn weight(&self, sorted: &[usize]) -> f64 {
        let k = self.members.len();
        let idx: Vec<usize> =
            sorted.iter().map(|v| self.members.binary_search(v).expect("clique lies in the root block")).collect();
        let mut total = 0.0;
        for (a, &i) in idx.iter().enumerate() {
            for &j in &idx[a + 1..] {
                total += self.w[i * k + j];
            }
        }
        total
    }
}

struct Search<'a> {
    adj: &'a [Bits],
    block: Block,
    deadline: Instant,
    timed_out: &'a AtomicBool,
    limit: u64,
    found: Vec<Clique>,
    /// a clique beyond `limit` was reached
    cut: bool,
    calls: u32,
}

impl Search<'_> {
    fn stopped(&mut self) -> bool {
        if self.cut {
            return true;
        }
        self.calls = self.calls.wrapping_add(1);
        if self.calls.is_multiple_of(256) && Instant::now() >= self.deadline {
            self.timed_out.store(true, Ordering::Relaxed);
        }
        self.timed_out.load(Ordering::Relaxed)
    }

    fn expand(&mut self, r: &mut Vec<usize>, mut p: Bits, mut x: Bits) {
        if self.stopped() {
            return;
        }
        if p.is_empty() {
            if x.is_empty() {
                if self.found.len() as u64 >= self.limit {
                    self.cut = true;
                } else {
                    let mut nodes = r.clone();
                    nodes.sort_unstable();
                    let weight = self.block.weight(&nodes);
                    self.found.push(Clique { nodes, weight });
                }
            }
            return;
        }
        // pivot maximizing |P ∩ N(u)|
        let pivot = p
            .iter()
            .chain(x.iter())
            .max_by_key(|&u| (p.and_count(&self.adj[u]), std::cmp::Reverse(u)))
            .expect("P is non-empty");
        let branch: Vec<usize> = p.and_not(&self.adj[pivot]).iter().collect();
        for v in branch {
            r.push(v);
            self.expand(r, p.and(&self.adj[v]), x.and(&self.adj[v]));
            r.pop();
            p.clear(v);
            x.set(v);
            if self.stopped() {
                return;
            }
        }
    }
}

/// Smallest-last vertex order; ties go to the lower index.
fn degeneracy_order(adj: &[Vec<usize>]) -> Vec<usize> {
    let n = adj.len();
    let mut deg: Vec<usize> = adj.iter().map(Vec::len).collect();
    let max_deg = deg.iter().copied().max().unwrap_or(0);
    let mut buckets: Vec<std::collections::BTreeSet<usize>> = vec![Default::default(); max_deg + 1];
    for (v, &d) in deg.iter().enumerate() {
        buckets[d].insert(v);
    }
    let mut removed = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut lo = 0;
    for _ in 0..n {
        lo = lo.min(max_deg);
        while buckets[lo].is_empty() {
            lo += 1;
        }
        let v = buckets[lo].pop_first().expect("bucket is non-empty");
        removed[v] = true;
        order.push(v);
        for &u in &adj[v] {
            if !removed[u] {
                buckets[deg[u]].remove(&u);
                deg[u] -= 1;
                buckets[deg[u]].insert(u);
            }
        }
        lo = lo.saturating_sub(1);
    }
    order
}

const ROOT_CHUNK: usize = 64;

/// All maximal cliques of the graph `W_SOG > 0` that contain at least one
/// edge. Isolated vertices are not reported.
pub fn maximal_cliques(g: &CompatibilityGraph, budget: &CliqueBudget) -> Result<CliqueSearch> {
    budget.validate()?;
    let n = g.n();
    let w = g.w_sog();
    let lists: Vec<Vec<usize>> = (0..n).map(|i| w.row(i).iter().map(|&(j, _)| j).collect()).collect();
    let adj: Vec<Bits> = lists
        .iter()
        .map(|nb| {
            let mut b = Bits::zeros(n);
            nb.iter().for_each(|&j| b.set(j));
            b
        })
        .collect();

    let order = degeneracy_order(&lists);
    let mut position = vec![0; n];
    for (k, &v) in order.iter().enumerate() {
        position[v] = k;
    }
    let roots: Vec<usize> = order.iter().copied().filter(|&v| !lists[v].is_empty()).collect();

    let deadline = Instant::now() + Duration::from_millis(budget.time_budget_ms);
    let timed_out = AtomicBool::new(false);
    let mut raw: Vec<Clique> = Vec::new();
    let mut truncated = false;
    for chunk in roots.chunks(ROOT_CHUNK) {
        let remaining = budget.max_cliques - raw.len() as u64;
        let parts: Vec<(Vec<Clique>, bool)> = chunk
            .par_iter()
            .map(|&v| {
                let mut p = Bits::zeros(n);
                let mut x = Bits::zeros(n);
                for &u in &lists[v] {
                    if position[u] > position[v] {
                        p.set(u);
                    } else {
                        x.set(u);
                    }
                }
                let mut s = Search {
                    adj: &adj,
                    block: Block::new(v, &lists, g),
                    deadline,
                    timed_out: &timed_out,
                    limit: remaining,
                    found: Vec::new(),
                    cut: false,
                    calls: 0,
                };
                s.expand(&mut vec![v], p, x);
                (s.found, s.cut)
            })
            .collect();
        for (part, cut) in parts {
            raw.extend(part);
            truncated |= cut;
        }
        if raw.len() as u64 > budget.max_cliques {
            truncated = true;
            raw.truncate(budget.max_cliques as usize);
        }
        if truncated || timed_out.load(Ordering::Relaxed) {
            break;
        }
    }
    let complete = !truncated && !timed_out.load(Ordering::Relaxed);
    if !complete {
        log::warn!("clique search stopped early after {} cliques", raw.len());
    }
    let mut cliques = raw;
    // node sequences are distinct
    cliques.par_sort_unstable_by(|a, b| a.nodes.cmp(&b.nodes));
    Ok(CliqueSearch { cliques, complete })
}

/// Keeps, for every node, the heaviest clique containing it (ties go to the
/// lexicographically smaller node sequence), then removes duplicates. The
/// output is sorted by weight, heaviest first, then by node sequence.
pub fn node_guided_selection(cliques: &[Clique], g: &CompatibilityGraph) -> Vec<Clique> {
    let mut best: Vec<Option<usize>> = vec![None; g.n()];
    for (c, clique) in cliques.iter().enumerate() {
        for &v in &clique.nodes {
            let better = match best[v] {
                None => true,
                Some(b) => {
                    let cur = &cliques[b];
                    clique.weight > cur.weight || (clique.weight == cur.weight && clique.nodes < cur.nodes)
                }
            };
            if better {
                best[v] = Some(c);
            }
        }
    }
    let mut keep: Vec<usize> = best.into_iter().flatten().collect();
    keep.sort_unstable();
    keep.dedup();
    let mut out: Vec<Clique> = keep.into_iter().map(|c| cliques[c].clone()).collect();
    out.sort_by(|a, b| b.weight.total_cmp(&a.weight).then_with(|| a.nodes.cmp(&b.nodes)));
    out
}

/// Writes one `{"nodes": [...], "weight": w}` object per line.
pub fn write_cliques_jsonl<W: Write>(mut out: W, cliques: &[Clique]) -> Result<()> {
    for c in cliques {
        serde_json::to_writer(&mut out, c)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
