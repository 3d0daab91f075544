use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use fastmac_core::eval::{
    filter_ablation, rotation_error, run_sweep, translation_error, SamplerSpec, SweepConfig, SweepReport,
};
use fastmac_core::graph::build_graph;
use fastmac_core::registration::{fastmac_register, sample_nodes, SamplerKind, StageTimings};
use fastmac_core::synth::{generate_scene, GroundTruth, Scene};
use fastmac_core::{CorrespondenceSet, Error, RigidTransform};
use serde_json::{json, Value};

use crate::args::{AblateArgs, BenchArgs, RegisterArgs, SampleArgs, SceneArgs, Study, SynthArgs};
use crate::manifest::{RunManifest, MANIFEST_FILE};

/// Bad flag values, reported with the usage exit code.
#[derive(Debug, thiserror::Error)]
#[error(transparent)]
pub struct Usage(#[from] pub Error);

fn usage(r: fastmac_core::Result<()>) -> Result<()> {
    r.map_err(|e| Usage(e).into())
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn write_json(dir: &Path, name: &str, mut value: Value) -> Result<()> {
    value["manifest"] = json!(MANIFEST_FILE);
    let mut w = create(dir, name)?;
    serde_json::to_writer_pretty(&mut w, &value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn prepare_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn read_corrs(path: &Path) -> Result<CorrespondenceSet> {
    CorrespondenceSet::read_path(path).with_context(|| format!("reading {}", path.display()))
}

fn read_ground_truth(path: &Path) -> Result<GroundTruth> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let gt: GroundTruth = serde_json::from_str(&text).map_err(Error::from)?;
    Ok(gt)
}

fn scenes(args: &SceneArgs, seed: u64, count: usize) -> Result<Vec<Scene>> {
    (0..count)
        .map(|i| {
            let spec = args.spec(seed, i);
            usage(spec.validate())?;
            Ok(generate_scene(&spec)?)
        })
        .collect()
}

pub fn synth(a: &SynthArgs) -> Result<()> {
    let dir = &a.out.output_dir;
    prepare_dir(dir)?;
    let specs: Vec<_> = (0..a.scenes).map(|i| a.scene.spec(a.out.seed, i)).collect();
    let mut manifest = RunManifest::start("synth", a.out.seed, json!({ "scenes": specs }));
    for (i, scene) in scenes(&a.scene, a.out.seed, a.scenes)?.iter().enumerate() {
        let name = format!("scene_{i:03}.txt");
        let header = [
            format!("manifest: {MANIFEST_FILE}"),
            format!("seed {} points {} inliers {}", specs[i].seed, scene.corrs.len(), scene.inlier_count()),
        ];
        let mut w = create(dir, &name)?;
        scene.corrs.write_text(&mut w, &header)?;
        w.flush()?;
        let gt_name = format!("scene_{i:03}_gt.json");
        write_json(dir, &gt_name, serde_json::to_value(scene.ground_truth())?)?;
        manifest.outputs.extend([name, gt_name]);
    }
    manifest.finish(dir)
}

pub fn sample(a: &SampleArgs) -> Result<()> {
    let cfg = a.pipeline.config(a.out.seed);
    usage(cfg.validate())?;
    let corrs = read_corrs(&a.input)?;
    let dir = &a.out.output_dir;
    prepare_dir(dir)?;
    let mut manifest = RunManifest::start("sample", a.out.seed, json!({ "input": a.input, "pipeline": cfg }));
    let full = if cfg.sampler.needs_full_graph() { Some(build_graph(&corrs, &cfg.graph)?) } else { None };
    let outcome = sample_nodes(&corrs, full.as_ref(), &cfg)?;
    let mut selected = vec![false; corrs.len()];
    for &i in &outcome.selection.indices {
        selected[i] = true;
    }
    let mut w = create(dir, "selection.csv")?;
    writeln!(w, "index,pi,selected")?;
    for (i, sel) in selected.iter().enumerate() {
        match &outcome.distribution {
            Some(d) => writeln!(w, "{i},{},{}", d.pi()[i], u8::from(*sel))?,
            // deterministic samplers carry no distribution
            None => writeln!(w, "{i},,{}", u8::from(*sel))?,
        }
    }
    w.flush()?;
    manifest.outputs.push("selection.csv".into());
    if outcome.selection.topped_up > 0 {
        log::warn!("{} picks came from the uniform top-up", outcome.selection.topped_up);
    }
    manifest.finish(dir)
}

pub fn register(a: &RegisterArgs) -> Result<()> {
    let cfg = a.pipeline.config(a.out.seed);
    usage(cfg.validate())?;
    let thresholds = a.thresholds.thresholds().map_err(Usage)?;
    let corrs = read_corrs(&a.input)?;
    let gt = a.ground_truth.as_deref().map(read_ground_truth).transpose()?;
    let dir = &a.out.output_dir;
    prepare_dir(dir)?;
    let mut manifest = RunManifest::start(
        "register",
        a.out.seed,
        json!({ "input": a.input, "ground_truth": a.ground_truth, "pipeline": cfg, "thresholds": thresholds }),
    );
    let mut res = fastmac_register(&corrs, &cfg)?;
    if a.redact_timings {
        res.stage_timings = StageTimings::default();
        res.total_ms = 0.0;
    }
    let mut value = serde_json::to_value(&res)?;
    if let Some(gt) = &gt {
        let re = rotation_error(&res.transform.rotation, &gt.transform.rotation);
        let te = translation_error(&res.transform.translation, &gt.transform.translation);
        value["re_deg"] = json!(re);
        value["te"] = json!(te);
        value["success"] = json!(!res.flags.insufficient_structure && thresholds.accepts(re, te));
    }
    write_json(dir, "result.json", value)?;
    manifest.outputs.push("result.json".into());
    manifest.finish(dir)?;
    res.check()?;
    Ok(())
}

const BENCH_HEADER: &str = "ratio,repeat,seed,sampled,score,hypotheses,truncated,re_deg,te,success,\
t_sampling_ms,t_gc_ms,t_mcs_ms,t_ncs_ms,t_pe_ms,stage_sum_ms,total_ms";

pub fn bench(a: &BenchArgs) -> Result<()> {
    let base = a.pipeline.config(a.out.seed);
    usage(base.validate())?;
    let thresholds = a.thresholds.thresholds().map_err(Usage)?;
    for &ratio in &a.ratios {
        usage(fastmac_core::PipelineConfig { ratio, ..base }.validate())?;
    }
    let (corrs, truth): (CorrespondenceSet, Option<RigidTransform>) = match &a.input {
        Some(path) => {
            let gt = a.ground_truth.as_deref().map(read_ground_truth).transpose()?;
            (read_corrs(path)?, gt.map(|g| g.transform))
        }
        None => {
            let scene = scenes(&a.scene, a.out.seed, 1)?.remove(0);
            (scene.corrs, Some(scene.transform))
        }
    };
    let dir = &a.out.output_dir;
    prepare_dir(dir)?;
    let scene_echo = if a.input.is_none() { json!(a.scene.spec(a.out.seed, 0)) } else { Value::Null };
    let mut manifest = RunManifest::start(
        "bench",
        a.out.seed,
        json!({
            "input": a.input,
            "ground_truth": a.ground_truth,
            "scene": scene_echo,
            "pipeline": base,
            "ratios": a.ratios,
            "repeats": a.repeats,
            "thresholds": thresholds,
        }),
    );
    let mut w = create(dir, "bench.csv")?;
    writeln!(w, "{BENCH_HEADER}")?;
    for &ratio in &a.ratios {
        for rep in 0..a.repeats {
            let seed = a.out.seed.wrapping_add(rep as u64);
            // the full ratio is the unsampled pipeline
            let cfg = fastmac_core::PipelineConfig { ratio, seed, sampling: base.sampling && ratio < 1.0, ..base };
            let r = fastmac_register(&corrs, &cfg)?;
            let (re, te, ok) = match &truth {
                Some(t) => {
                    let re = rotation_error(&r.transform.rotation, &t.rotation);
                    let te = translation_error(&r.transform.translation, &t.translation);
                    let ok = !r.flags.insufficient_structure && thresholds.accepts(re, te);
                    (re.to_string(), te.to_string(), ok.to_string())
                }
                None => Default::default(),
            };
            let (t, total) =
                if a.redact_timings { (StageTimings::default(), 0.0) } else { (r.stage_timings, r.total_ms) };
            writeln!(
                w,
                "{ratio},{rep},{seed},{},{},{},{},{re},{te},{ok},{},{},{},{},{},{},{total}",
                r.sampled.len(),
                r.best_score,
                r.hypothesis_count,
                r.flags.truncated_cliques,
                t.sampling,
                t.gc,
                t.mcs,
                t.ncs,
                t.pe,
                t.total(),
            )?;
        }
    }
    w.flush()?;
    manifest.outputs.push("bench.csv".into());
    manifest.finish(dir)
}

fn study_samplers(study: Study, filter: fastmac_core::registration::FilterChoice) -> Vec<SamplerSpec> {
    let spec = |label: &str, kind| SamplerSpec::with_filter(label, kind, filter);
    match study {
        Study::Samplers => vec![
            spec("degree", SamplerKind::Degree),
            spec("random", SamplerKind::Random),
            spec("fps", SamplerKind::Fps),
        ],
        Study::Codes => vec![
            spec("000", SamplerKind::Random),
            spec("110", SamplerKind::Xyz),
            spec("001", SamplerKind::Degree),
            spec("111", SamplerKind::DegreeXyz),
        ],
        Study::Filters => Vec::new(),
    }
}

pub fn ablate(a: &AblateArgs) -> Result<()> {
    let base = a.pipeline.config(a.out.seed);
    usage(base.validate())?;
    for &ratio in &a.ratios {
        usage(fastmac_core::PipelineConfig { ratio, ..base }.validate())?;
    }
    let cfg = SweepConfig { base, thresholds: a.thresholds.thresholds().map_err(Usage)?, parallel: !a.serial };
    let scene_list = scenes(&a.scene, a.out.seed, a.scenes)?;
    let seeds: Vec<u64> = (0..a.runs).map(|r| a.out.seed.wrapping_add(r)).collect();
    let dir = &a.out.output_dir;
    prepare_dir(dir)?;
    let samplers = study_samplers(a.study, base.filter);
    let mut manifest = RunManifest::start(
        "ablate",
        a.out.seed,
        json!({
            "study": format!("{:?}", a.study).to_lowercase(),
            "samplers": samplers,
            "scenes": (0..a.scenes).map(|i| a.scene.spec(a.out.seed, i)).collect::<Vec<_>>(),
            "seeds": seeds,
            "ratios": a.ratios,
            "pipeline": base,
            "thresholds": cfg.thresholds,
            "parallel": cfg.parallel,
        }),
    );
    let mut report: SweepReport = match a.study {
        Study::Filters => filter_ablation(&scene_list, &a.ratios, &seeds, &cfg),
        _ => run_sweep(&scene_list, &samplers, &a.ratios, &seeds, &cfg),
    };
    if a.redact_timings {
        report.redact_timings();
    }
    let mut w = create(dir, "rows.csv")?;
    report.write_rows_csv(&mut w)?;
    w.flush()?;
    let mut w = create(dir, "aggregates.csv")?;
    report.write_aggregates_csv(&mut w)?;
    w.flush()?;
    manifest.outputs.extend(["rows.csv".to_string(), "aggregates.csv".to_string()]);
    manifest.config["timings_contended"] = json!(report.contended);
    manifest.finish(dir)
}
