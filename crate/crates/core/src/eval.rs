//! Registration metrics and sweep drivers.

use std::io::Write;

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::registration::{
    fastmac_register, FilterChoice, PipelineConfig, RegistrationResult, SamplerKind, StageTimings,
};
use crate::synth::Scene;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricThresholds {
    /// degrees
    pub re_max: f64,
    pub te_max: f64,
}

impl Default for MetricThresholds {
    /// Indoor thresholds: 15°, 0.3 length units.
    fn default() -> Self {
        Self { re_max: 15.0, te_max: 0.3 }
    }
}

impl MetricThresholds {
    pub fn new(re_max: f64, te_max: f64) -> Result<Self> {
        if !(re_max > 0.0 && te_max > 0.0) {
            return Err(Error::InvalidInput("metric thresholds must be positive".into()));
        }
        Ok(Self { re_max, te_max })
    }

    /// Outdoor (lidar) thresholds: 5°, 0.6 length units.
    pub fn outdoor() -> Self {
        Self { re_max: 5.0, te_max: 0.6 }
    }

    pub fn accepts(&self, re_deg: f64, te: f64) -> bool {
        re_deg <= self.re_max && te <= self.te_max
    }
}

/// Geodesic angle between two rotations, in degrees.
pub fn rotation_error(r_est: &Matrix3<f64>, r_gt: &Matrix3<f64>) -> f64 {
    let r = r_gt.transpose() * r_est;
    // 2 sin θ and 2 cos θ; atan2 keeps full precision near 0° and 180°
    let sin2 = Vector3::new(r[(2, 1)] - r[(1, 2)], r[(0, 2)] - r[(2, 0)], r[(1, 0)] - r[(0, 1)]).norm();
    let cos2 = r.trace() - 1.0;
    sin2.atan2(cos2).to_degrees()
}

pub fn translation_error(t_est: &Vector3<f64>, t_gt: &Vector3<f64>) -> f64 {
    (t_est - t_gt).norm()
}

/// Fraction of `(re_deg, te)` pairs within both thresholds; 0 for no runs.
pub fn registration_recall(results: &[(f64, f64)], thresholds: &MetricThresholds) -> f64 {
    if results.is_empty() {
        return 0.0;
    }
    let ok = results.iter().filter(|&&(re, te)| thresholds.accepts(re, te)).count();
    ok as f64 / results.len() as f64
}

/// A named sampler configuration in a sweep.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplerSpec {
    pub label: String,
    pub sampler: SamplerKind,
    pub filter: FilterChoice,
}

impl SamplerSpec {
    pub fn new(sampler: SamplerKind) -> Self {
        Self { label: sampler.name().to_string(), sampler, filter: FilterChoice::Laplacian }
    }

    pub fn with_filter(label: &str, sampler: SamplerKind, filter: FilterChoice) -> Self {
        Self { label: label.to_string(), sampler, filter }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub sampler: String,
    pub ratio: f64,
    pub seed: u64,
    pub scene: usize,
    /// NaN for failed runs
    pub re_deg: f64,
    pub te: f64,
    pub success: bool,
    pub timings: StageTimings,
    pub total_ms: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupAggregate {
    pub sampler: String,
    pub ratio: f64,
    pub runs: usize,
    pub failures: usize,
    pub rr: f64,
    pub re_mean: f64,
    pub re_var: f64,
    pub te_mean: f64,
    pub te_var: f64,
    pub timings_mean: StageTimings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub aggregates: Vec<GroupAggregate>,
    /// rows ran concurrently on more rows than hardware threads
    pub contended: bool,
}

pub const ROWS_HEADER: &str = "sampler,ratio,seed,re_deg,te,success,t_sampling_ms,t_gc_ms,t_mcs_ms,t_ncs_ms,t_pe_ms";
pub const AGGREGATES_HEADER: &str =
    "sampler,ratio,runs,failures,rr,re_mean,re_var,te_mean,te_var,t_sampling_ms,t_gc_ms,t_mcs_ms,t_ncs_ms,t_pe_ms";

impl SweepReport {
    pub fn write_rows_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{ROWS_HEADER}")?;
        for r in &self.rows {
            let t = &r.timings;
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{}",
                r.sampler, r.ratio, r.seed, r.re_deg, r.te, r.success, t.sampling, t.gc, t.mcs, t.ncs, t.pe
            )?;
        }
        Ok(())
    }

    pub fn write_aggregates_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{AGGREGATES_HEADER}")?;
        for a in &self.aggregates {
            let t = &a.timings_mean;
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                a.sampler,
                a.ratio,
                a.runs,
                a.failures,
                a.rr,
                a.re_mean,
                a.re_var,
                a.te_mean,
                a.te_var,
                t.sampling,
                t.gc,
                t.mcs,
                t.ncs,
                t.pe
            )?;
        }
        Ok(())
    }

    /// Zeroes every timing field, for output comparisons.
    pub fn redact_timings(&mut self) {
        for r in &mut self.rows {
            r.timings = StageTimings::default();
            r.total_ms = 0.0;
        }
        for a in &mut self.aggregates {
            a.timings_mean = StageTimings::default();
        }
    }

    pub fn group(&self, sampler: &str, ratio: f64) -> Option<&GroupAggregate> {
        self.aggregates.iter().find(|a| a.sampler == sampler && a.ratio == ratio)
    }
}

fn mean_var(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var)
}

/// Per-(sampler, ratio) aggregates, in order of first appearance. RE/TE
/// statistics cover runs that did not fail; RR counts failures as misses.
pub fn aggregate(rows: &[SweepRow]) -> Vec<GroupAggregate> {
    let mut keys: Vec<(String, f64)> = Vec::new();
    for r in rows {
        if !keys.iter().any(|(s, q)| *s == r.sampler && *q == r.ratio) {
            keys.push((r.sampler.clone(), r.ratio));
        }
    }
    keys.into_iter()
        .map(|(sampler, ratio)| {
            let group: Vec<&SweepRow> = rows.iter().filter(|r| r.sampler == sampler && r.ratio == ratio).collect();
            let ok: Vec<&&SweepRow> = group.iter().filter(|r| r.error.is_none()).collect();
            let re: Vec<f64> = ok.iter().map(|r| r.re_deg).collect();
            let te: Vec<f64> = ok.iter().map(|r| r.te).collect();
            let (re_mean, re_var) = mean_var(&re);
            let (te_mean, te_var) = mean_var(&te);
            let k = group.len() as f64;
            let mut tm = StageTimings::default();
            for r in &group {
                tm.sampling += r.timings.sampling / k;
                tm.gc += r.timings.gc / k;
                tm.mcs += r.timings.mcs / k;
                tm.ncs += r.timings.ncs / k;
                tm.pe += r.timings.pe / k;
            }
            GroupAggregate {
                runs: group.len(),
                failures: group.len() - ok.len(),
                rr: group.iter().filter(|r| r.success).count() as f64 / k,
                sampler,
                ratio,
                re_mean,
                re_var,
                te_mean,
                te_var,
                timings_mean: tm,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepConfig {
    /// sampler, filter, ratio and seed are overridden per run
    pub base: PipelineConfig,
    pub thresholds: MetricThresholds,
    /// run rows concurrently; keep false when timings matter
    pub parallel: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self { base: PipelineConfig::default(), thresholds: MetricThresholds::default(), parallel: true }
    }
}

#[derive(Debug)]
pub struct ScoredRun {
    /// NaN when the run failed
    pub re_deg: f64,
    pub te: f64,
    pub result: std::result::Result<RegistrationResult, Error>,
}

/// One registration run scored against the scene's ground truth.
pub fn run_one(scene: &Scene, spec: &SamplerSpec, ratio: f64, seed: u64, cfg: &SweepConfig) -> ScoredRun {
    let mut pc = cfg.base;
    pc.sampler = spec.sampler;
    pc.filter = spec.filter;
    pc.ratio = ratio;
    pc.seed = seed;
    match fastmac_register(&scene.corrs, &pc) {
        Ok(res) => {
            let re = rotation_error(&res.transform.rotation, &scene.transform.rotation);
            let te = translation_error(&res.transform.translation, &scene.transform.translation);
            ScoredRun { re_deg: re, te, result: Ok(res) }
        }
        Err(e) => ScoredRun { re_deg: f64::NAN, te: f64::NAN, result: Err(e) },
    }
}

/// Runs every (scene, sampler, ratio, seed) combination. Rows come out in
/// that nesting order whatever the execution order.
pub fn run_sweep(
    scenes: &[Scene],
    samplers: &[SamplerSpec],
    ratios: &[f64],
    seeds: &[u64],
    cfg: &SweepConfig,
) -> SweepReport {
    let mut jobs = Vec::new();
    for (si, _) in scenes.iter().enumerate() {
        for sp in samplers {
            for &ratio in ratios {
                for &seed in seeds {
                    jobs.push((si, sp, ratio, seed));
                }
            }
        }
    }
    let run = |&(si, sp, ratio, seed): &(usize, &SamplerSpec, f64, u64)| {
        let ScoredRun { re_deg: re, te, result } = run_one(&scenes[si], sp, ratio, seed, cfg);
        let (timings, total_ms, error, flagged) = match result {
            Ok(r) => (r.stage_timings, r.total_ms, None, r.flags.insufficient_structure),
            Err(e) => (StageTimings::default(), 0.0, Some(format!("{}: {e}", e.kind())), false),
        };
        SweepRow {
            sampler: sp.label.clone(),
            ratio,
            seed,
            scene: si,
            re_deg: re,
            te,
            success: error.is_none() && !flagged && cfg.thresholds.accepts(re, te),
            timings,
            total_ms,
            error,
        }
    };
    let rows: Vec<SweepRow> =
        if cfg.parallel { jobs.par_iter().map(run).collect() } else { jobs.iter().map(run).collect() };
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get());
    let contended = cfg.parallel && rows.len() > threads;
    if contended {
        log::info!("{} concurrent rows on {threads} threads; timings are contended", rows.len());
    }
    SweepReport { aggregates: aggregate(&rows), rows, contended }
}

/// Degree sampling with the Laplacian (high-pass), random-walk low-pass and
/// all-pass filters, labelled `high`, `low` and `all`.
pub fn filter_ablation(scenes: &[Scene], ratios: &[f64], seeds: &[u64], cfg: &SweepConfig) -> SweepReport {
    let samplers = [
        SamplerSpec::with_filter("high", SamplerKind::Degree, FilterChoice::Laplacian),
        SamplerSpec::with_filter("low", SamplerKind::Degree, FilterChoice::Low),
        SamplerSpec::with_filter("all", SamplerKind::Degree, FilterChoice::All),
    ];
    run_sweep(scenes, &samplers, ratios, seeds, cfg)
}
