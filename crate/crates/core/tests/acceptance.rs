//! Acceptance suite. Runs every criterion in sequence (timing checks must not
//! share the machine with other tests) and prints one PASS/FAIL line each.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use fastmac_core::clique::{maximal_cliques, CliqueBudget};
use fastmac_core::eval::{filter_ablation, rotation_error, run_sweep, translation_error, SamplerSpec, SweepConfig};
use fastmac_core::graph::{build_graph, CompatibilityGraph, GraphConfig};
use fastmac_core::gsp::{laplacian_filter, laplacian_response, normalize_shift};
use fastmac_core::registration::{fastmac_register, PipelineConfig, SamplerKind};
use fastmac_core::sampling::{
    expected_reconstruction_error, expected_reconstruction_error_for_draws, greedy_deterministic_sample, reconstruct,
    response_to_distribution, stochastic_sample, MagnitudeMode, SamplingDistribution,
};
use fastmac_core::synth::{
    connected_caveman, connected_caveman_seeded, generate_scene, random_transform, CavemanSpec, OutlierMode, Scene,
    SceneSpec,
};
use fastmac_core::CorrespondenceSet;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn random_adjacency(n: usize, density: f64, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            if rng.random::<f64>() < density {
                let w = rng.random_range(0.1..1.0);
                a[(i, j)] = w;
                a[(j, i)] = w;
            }
        }
    }
    a
}

/// Maximal cliques (with at least one edge) by checking every subset.
fn brute_force_cliques(a: &DMatrix<f64>) -> BTreeSet<Vec<usize>> {
    let n = a.nrows();
    let adj = |i: usize, j: usize| a[(i, j)] > 0.0;
    let is_clique =
        |mask: u32| (0..n).all(|i| mask >> i & 1 == 0 || (i + 1..n).all(|j| mask >> j & 1 == 0 || adj(i, j)));
    let mut out = BTreeSet::new();
    for mask in 1u32..(1 << n) {
        if mask.count_ones() < 2 || !is_clique(mask) {
            continue;
        }
        let extendable = (0..n).any(|v| mask >> v & 1 == 0 && (0..n).all(|u| mask >> u & 1 == 0 || adj(u, v)));
        if !extendable {
            out.insert((0..n).filter(|&i| mask >> i & 1 == 1).collect());
        }
    }
    out
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let densities = [0.2, 0.5, 0.8];
    let mut mismatches = 0;
    let mut total_cliques = 0;
    for trial in 0..100 {
        let n = rng.random_range(1..=12);
        let a = random_adjacency(n, densities[trial % 3], &mut rng);
        let g = CompatibilityGraph::from_adjacency(&a).unwrap();
        let search = maximal_cliques(&g, &CliqueBudget::default()).unwrap();
        let got: BTreeSet<Vec<usize>> = search.cliques.iter().map(|c| c.nodes.clone()).collect();
        let want = brute_force_cliques(&a);
        total_cliques += want.len();
        if got != want || !search.complete || got.len() != search.cliques.len() {
            mismatches += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        mismatches == 0 && secs < 10.0,
        format!("100 graphs, {total_cliques} cliques, {mismatches} mismatches, {secs:.2} s"),
    )
}

fn dense_first_order(corrs: &CorrespondenceSet, d_cmp: f64, t: f64) -> DMatrix<f64> {
    let n = corrs.len();
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            return 0.0;
        }
        let (a, b) = (corrs.get(i), corrs.get(j));
        let s = ((a.source - b.source).norm() - (a.target - b.target).norm()).abs();
        let w = 1.0 - s * s / (2.0 * d_cmp * d_cmp);
        if w > t {
            w
        } else {
            0.0
        }
    })
}

fn criterion_2() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut edges = 0;
    for k in 0..50u64 {
        let n = 8 + (k as usize * 7) % 57;
        let scene = generate_scene(&SceneSpec {
            n_points: n,
            inlier_ratio: 0.6,
            noise_sigma: 0.002,
            transform: random_transform(k, 180.0, 3.0),
            outlier_mode: OutlierMode::ShuffledTargets,
            seed: 200 + k,
        })
        .unwrap();
        let cfg = GraphConfig::default();
        let g = build_graph(&scene.corrs, &cfg).unwrap();
        let w = dense_first_order(&scene.corrs, cfg.d_cmp, cfg.t);
        let mut sog = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let mut acc = 0.0;
                for l in 0..n {
                    acc += w[(i, l)] * w[(l, j)];
                }
                sog[(i, j)] = w[(i, j)] * acc;
            }
        }
        let got_w = g.w().to_dense();
        let got = g.w_sog().to_dense();
        worst = worst.max((got - &sog).amax()).max((got_w - &w).amax());
        edges += g.w_sog().nnz() / 2;
    }
    outcome(worst <= 1e-12 && edges > 0, format!("50 sets, {edges} second-order edges, max |Δ| = {worst:.2e}"))
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for trial in 0..20 {
        let n = 2 + trial * 12;
        let a = random_adjacency(n, 0.3, &mut rng);
        let g = CompatibilityGraph::from_first_order(&a).unwrap();
        let ones = vec![1.0; n];
        let sparse = laplacian_response(&g, &ones).unwrap();
        let dense = laplacian_filter(&g).matrix() * nalgebra::DVector::from_element(n, 1.0);
        worst = worst.max(sparse.iter().fold(0.0, |m: f64, v| m.max(v.abs()))).max(dense.amax());
    }
    let scale = 2.5;
    let mut star = DMatrix::zeros(4, 4);
    for leaf in 1..4 {
        star[(0, leaf)] = scale;
        star[(leaf, 0)] = scale;
    }
    let g = CompatibilityGraph::from_adjacency(&star).unwrap();
    let f = laplacian_response(&g, g.degree()).unwrap();
    let c2 = scale * scale;
    let star_ok = f == vec![6.0 * c2, -2.0 * c2, -2.0 * c2, -2.0 * c2];
    outcome(worst < 1e-12 && star_ok, format!("max |L·1| = {worst:.2e} over N ≤ 230; star response {f:?}"))
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut optimal_ok = true;
    for _ in 0..20 {
        let a = random_adjacency(50, 0.2, &mut rng);
        let g = CompatibilityGraph::from_first_order(&a).unwrap();
        let f = laplacian_response(&g, g.degree()).unwrap();
        let best = response_to_distribution(&f, MagnitudeMode::Abs).unwrap();
        let e_best = expected_reconstruction_error(best.pi(), &f).unwrap();
        let uniform = SamplingDistribution::uniform(50).unwrap();
        optimal_ok &= e_best <= expected_reconstruction_error(uniform.pi(), &f).unwrap();
        for _ in 0..20 {
            let w: Vec<f64> = best.pi().iter().map(|p| p * (0.5 * rng.random_range(-1.0..1.0f64)).exp()).collect();
            let p = SamplingDistribution::from_weights(&w, MagnitudeMode::Abs).unwrap();
            optimal_ok &= e_best <= expected_reconstruction_error(p.pi(), &f).unwrap() * (1.0 + 1e-12);
        }
    }

    let a = random_adjacency(16, 0.4, &mut rng);
    let g = CompatibilityGraph::from_first_order(&a).unwrap();
    let f = laplacian_response(&g, g.degree()).unwrap();
    let dist = response_to_distribution(&f, MagnitudeMode::Abs).unwrap();
    let (m, trials) = (4, 100_000u64);
    let mut sum = [0.0; 16];
    let mut sum_sq = [0.0; 16];
    let mut err = 0.0;
    for t in 0..trials {
        let draws = stochastic_sample(&dist, m, t, true).unwrap();
        let x = reconstruct(&f, &draws.indices, dist.pi()).unwrap();
        for i in 0..16 {
            sum[i] += x[i];
            sum_sq[i] += x[i] * x[i];
            err += (x[i] - f[i]) * (x[i] - f[i]);
        }
    }
    let tn = trials as f64;
    let mc = err / tn;
    let closed = expected_reconstruction_error_for_draws(dist.pi(), &f, m).unwrap();
    let single = expected_reconstruction_error(dist.pi(), &f).unwrap();
    let rel = (mc - closed).abs() / closed;
    let mut worst_z: f64 = 0.0;
    for i in 0..16 {
        let mean = sum[i] / tn;
        let var = sum_sq[i] / tn - mean * mean;
        let se = (var / tn).sqrt();
        let z = if se > 0.0 {
            (mean - f[i]).abs() / se
        } else if mean == f[i] {
            0.0
        } else {
            f64::INFINITY
        };
        worst_z = worst_z.max(z);
    }
    outcome(
        optimal_ok && rel <= 0.05 && worst_z <= 3.0,
        format!(
            "π∝|f| optimal on 20 graphs: {optimal_ok}; MC {mc:.4} vs closed form/m {closed:.4} (rel {rel:.3}, m-free form {single:.4}); max bias z = {worst_z:.2}"
        ),
    )
}

fn hard_scenes(count: u64) -> Vec<Scene> {
    (0..count)
        .map(|k| {
            generate_scene(&SceneSpec {
                n_points: 1000,
                inlier_ratio: 0.3,
                noise_sigma: 0.005,
                transform: random_transform(10_000 + k, 180.0, 5.0),
                outlier_mode: OutlierMode::ShuffledTargets,
                seed: k,
            })
            .unwrap()
        })
        .collect()
}

fn harness_config() -> SweepConfig {
    let mut cfg = SweepConfig::default();
    cfg.base.budget = CliqueBudget::new(100_000, 10_000).unwrap();
    cfg
}

fn criterion_5(scenes: &[Scene]) -> Outcome {
    let start = Instant::now();
    let cfg = harness_config();
    let samplers = [
        SamplerSpec::new(SamplerKind::Degree),
        SamplerSpec::new(SamplerKind::Random),
        SamplerSpec::new(SamplerKind::Fps),
    ];
    let low = run_sweep(scenes, &samplers, &[0.05, 0.1], &[0], &cfg);
    let full = run_sweep(scenes, &samplers[..1], &[1.0], &[0], &cfg);
    let rr = |label: &str| (low.group(label, 0.05).unwrap().rr + low.group(label, 0.1).unwrap().rr) / 2.0;
    let (deg, rnd, fps) = (rr("degree"), rr("random"), rr("fps"));
    let deg_01 = low.group("degree", 0.1).unwrap().rr;
    let deg_10 = full.group("degree", 1.0).unwrap().rr;
    let secs = start.elapsed().as_secs_f64();
    outcome(
        deg >= rnd && deg >= fps && (deg_01 - deg_10).abs() <= 0.05 && secs < 600.0,
        format!(
            "mean RR over 0.05/0.1: degree {deg:.3}, random {rnd:.3}, fps {fps:.3}; degree RR at 0.1 {deg_01:.3} vs 1.0 {deg_10:.3}; {secs:.1} s"
        ),
    )
}

fn criterion_6(scenes: &[Scene]) -> Outcome {
    let report = filter_ablation(scenes, &[0.05], &[0], &harness_config());
    let rr = |label: &str| report.group(label, 0.05).unwrap().rr;
    let (high, low, all) = (rr("high"), rr("low"), rr("all"));
    outcome(high >= all && high >= low, format!("RR at 0.05: high {high:.3}, low {low:.3}, all-pass {all:.3}"))
}

fn median_time<F: FnMut()>(reps: usize, mut f: F) -> Duration {
    let mut times: Vec<Duration> = (0..reps)
        .map(|_| {
            let t = Instant::now();
            f();
            t.elapsed()
        })
        .collect();
    times.sort();
    times[reps / 2]
}

fn criterion_7() -> Outcome {
    let scene = generate_scene(&SceneSpec {
        n_points: 5000,
        inlier_ratio: 0.1,
        noise_sigma: 0.005,
        transform: random_transform(7, 180.0, 5.0),
        outlier_mode: OutlierMode::ShuffledTargets,
        seed: 7,
    })
    .unwrap();
    let g = build_graph(&scene.corrs, &GraphConfig::default()).unwrap();
    let sample = |m: usize| {
        median_time(15, || {
            let f = laplacian_response(&g, g.degree()).unwrap();
            let d = response_to_distribution(&f, MagnitudeMode::Squared).unwrap();
            let s = stochastic_sample(&d, m, 11, false).unwrap();
            assert_eq!(s.len(), m);
        })
    };
    sample(50);
    let (t50, t2500) = (sample(50), sample(2500));

    let scene = generate_scene(&SceneSpec {
        n_points: 1000,
        inlier_ratio: 0.3,
        noise_sigma: 0.005,
        transform: random_transform(8, 180.0, 5.0),
        outlier_mode: OutlierMode::ShuffledTargets,
        seed: 8,
    })
    .unwrap();
    let g = build_graph(&scene.corrs, &GraphConfig::default()).unwrap();
    let shift = normalize_shift(&g.w_sog().to_dense()).unwrap();
    let greedy = |m: usize| {
        let t = Instant::now();
        greedy_deterministic_sample(&shift, m, m).unwrap();
        t.elapsed()
    };
    let (g20, g200) = (greedy(20), greedy(200));
    let r_s = t2500.as_secs_f64() / t50.as_secs_f64();
    let r_g = g200.as_secs_f64() / g20.as_secs_f64();
    outcome(
        r_s <= 2.0 && r_g >= 5.0,
        format!(
            "stochastic N=5000: m=50 {t50:.2?}, m=2500 {t2500:.2?} (×{r_s:.2}); greedy N=1000: m=20 {g20:.2?}, m=200 {g200:.2?} (×{r_g:.1})"
        ),
    )
}

fn criterion_8(scene: &Scene) -> Outcome {
    let base = harness_config().base;
    let mut worst_gap: f64 = 0.0;
    let mut downstream = Vec::new();
    for ratio in [1.0, 0.5, 0.2, 0.1, 0.05, 0.01] {
        let cfg = PipelineConfig { ratio, seed: 5, ..base };
        let t = Instant::now();
        let res = fastmac_register(&scene.corrs, &cfg).unwrap();
        let wall = t.elapsed().as_secs_f64() * 1e3;
        worst_gap = worst_gap.max((res.stage_timings.total() - wall).abs() / wall);
        let st = res.stage_timings;
        downstream.push((ratio, st.mcs + st.ncs + st.pe));
    }
    let at_full = downstream[0].1;
    let faster = downstream.iter().filter(|(r, _)| *r <= 0.2).all(|(_, t)| *t < at_full);
    let summary: Vec<String> = downstream.iter().map(|(r, t)| format!("{r}:{t:.1}ms")).collect();
    outcome(
        worst_gap <= 0.05 && faster,
        format!("max |Σstages − wall|/wall = {:.2}%; MCS+NCS+PE {}", worst_gap * 100.0, summary.join(" ")),
    )
}

/// Nodes whose |response| is at least the k-th largest.
fn top_k_with_ties(f: &[f64], k: usize) -> Vec<usize> {
    let mut mags: Vec<f64> = f.iter().map(|v| v.abs()).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    let cut = mags[k - 1];
    (0..f.len()).filter(|&i| f[i].abs() >= cut).collect()
}

fn criterion_9() -> Outcome {
    let spec = CavemanSpec { num_cliques: 8, clique_size: 6 };
    let covers = |g: &CompatibilityGraph| {
        let f = laplacian_response(g, g.degree()).unwrap();
        let top = top_k_with_ties(&f, 8);
        let hit: BTreeSet<usize> = top.iter().map(|&v| spec.clique_of(v)).collect();
        let mut per_clique = [0usize; 8];
        for v in top_k_with_ties(&f, 24) {
            per_clique[spec.clique_of(v)] += 1;
        }
        let rich = per_clique.iter().filter(|&&c| c >= 3).count();
        (hit.len() == 8, top.len(), rich >= 6)
    };
    let (base_hit, base_size, base_rich) = covers(&connected_caveman(&spec).unwrap());
    let mut seeded_ok = 0;
    for seed in 0..20 {
        let (hit, _, rich) = covers(&connected_caveman_seeded(&spec, seed).unwrap());
        if hit && rich {
            seeded_ok += 1;
        }
    }
    outcome(
        base_hit && base_rich && seeded_ok == 20,
        format!(
            "fixed rewiring: all cliques hit by top-8 ({base_size} nodes incl. ties): {base_hit}, top-24 ≥3 in ≥6 cliques: {base_rich}; random rewirings passing: {seeded_ok}/20"
        ),
    )
}

fn criterion_10() -> Outcome {
    let mut worst_re: f64 = 0.0;
    let mut worst_te: f64 = 0.0;
    let mut runs = 0;
    for seed in 0..20u64 {
        for n in [10, 60] {
            let scene = generate_scene(&SceneSpec {
                n_points: n,
                inlier_ratio: 1.0,
                noise_sigma: 0.0,
                transform: random_transform(500 + seed, 180.0, 5.0),
                outlier_mode: OutlierMode::ShuffledTargets,
                seed,
            })
            .unwrap();
            for ratio in [0.5, 0.75, 1.0] {
                let cfg = PipelineConfig { ratio, seed, ..PipelineConfig::default() };
                let res = fastmac_register(&scene.corrs, &cfg).unwrap();
                worst_re = worst_re.max(rotation_error(&res.transform.rotation, &scene.transform.rotation));
                worst_te = worst_te.max(translation_error(&res.transform.translation, &scene.transform.translation));
                runs += 1;
            }
        }
    }
    outcome(worst_re < 1e-6 && worst_te < 1e-8, format!("{runs} runs, max RE {worst_re:.2e}°, max TE {worst_te:.2e}"))
}

fn sweep_bytes(scenes: &[Scene]) -> (Vec<u8>, Vec<u8>, String) {
    let samplers = [
        SamplerSpec::new(SamplerKind::Degree),
        SamplerSpec::new(SamplerKind::Random),
        SamplerSpec::new(SamplerKind::Fps),
    ];
    let mut report = run_sweep(scenes, &samplers, &[0.1, 0.5], &[1, 2], &harness_config());
    report.redact_timings();
    let (mut rows, mut aggs) = (Vec::new(), Vec::new());
    report.write_rows_csv(&mut rows).unwrap();
    report.write_aggregates_csv(&mut aggs).unwrap();
    let cfg = PipelineConfig { ratio: 0.2, seed: 3, ..harness_config().base };
    let mut res = fastmac_register(&scenes[0].corrs, &cfg).unwrap();
    res.stage_timings = Default::default();
    res.total_ms = 0.0;
    (rows, aggs, serde_json::to_string(&res).unwrap())
}

fn criterion_11(scenes: &[Scene]) -> Outcome {
    let scenes = &scenes[..3];
    let pool = |threads: usize| rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    let first = pool(1).install(|| sweep_bytes(scenes));
    let second = pool(1).install(|| sweep_bytes(scenes));
    let wide = pool(4).install(|| sweep_bytes(scenes));
    outcome(
        first == second && first == wide,
        format!(
            "sweep CSVs ({} + {} bytes) and result JSON identical across repeat and 1/4 threads",
            first.0.len(),
            first.1.len()
        ),
    )
}

fn main() {
    let mut all_pass = true;
    let mut report = |id: usize, name: &str, o: Outcome| {
        all_pass &= o.pass;
        println!("criterion {id:>2} {}: {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    };
    report(1, "clique enumeration equals brute force", criterion_1());
    report(2, "second-order graph equals triple-loop oracle", criterion_2());
    report(3, "Laplacian filter correctness", criterion_3());
    report(4, "optimal sampling distribution", criterion_4());
    let scenes = hard_scenes(50);
    report(5, "degree sampling keeps recall at low ratios", criterion_5(&scenes));
    report(6, "high-pass filter at least as good as low/all-pass", criterion_6(&scenes));
    report(7, "sampling time shape", criterion_7());
    report(8, "stage accounting", criterion_8(&scenes[0]));
    report(9, "caveman coverage", criterion_9());
    report(10, "exact recovery", criterion_10());
    report(11, "determinism", criterion_11(&scenes));
    if !all_pass {
        std::process::exit(1);
    }
}
