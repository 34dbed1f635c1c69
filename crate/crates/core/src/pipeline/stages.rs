use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use super::{require, FrameEntry, FrameManifest, RunContext};
use crate::distill::{
    classifier_forward, pixel_features, read_classifier, refine_predictions, train, write_classifier,
    write_training_log, ClassifierParams, PixelFeatureMap, Target, TrainHyper,
};
use crate::error::{Error, Result};
use crate::eval::{
    confusion_matrix, evaluate, hungarian_match, normalized_confusion_report, write_normalized_csv, write_report,
    ConfusionMatrix, EvalReport,
};
use crate::grid::{LabelGrid, GROUND, IGNORE};
use crate::pnm::{read_pgm16, read_ppm, write_pgm16};
use crate::projection::{densify, project_segments, read_calibration};
use crate::pseudolabel::{
    assemble_pseudo_labels, crop_segment, drop_small_segments, extract_features, kmeans_fit, load_external_features,
    save_features, segment_pixel_counts, write_cluster_model, SegmentFeature, SegmentSource,
};
use crate::rangeseg::{build_range_image, read_cloud_csv, segment_ground, segment_objects, RangeSegmentation};
use crate::seed::derive_seed;
use crate::synth::{generate_frame, read_meta, write_frame};

const RANGE_SEG: &str = "range_seg.pgm";
const IMAGE_SEG: &str = "image_seg.pgm";
const PSEUDO: &str = "pseudo.pgm";
const TEACHER_PRED: &str = "teacher_pred.pgm";
const REFINED: &str = "refined.pgm";
const TEACHER: &str = "teacher.bin";
const STUDENT: &str = "student.bin";

/// Runs `f` on every frame in parallel; the first failure in frame order wins.
fn per_frame<T: Send>(frames: &[FrameEntry], f: impl Fn(&FrameEntry) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    let results: Vec<Result<T>> = frames.par_iter().map(f).collect();
    results.into_iter().collect()
}

fn load_frames(ctx: &RunContext) -> Result<Vec<FrameEntry>> {
    let m = FrameManifest::load(&ctx.manifest)?;
    if m.frames.is_empty() {
        return Err(Error::EmptyManifest);
    }
    Ok(m.frames)
}

/// Per-frame artifact written by an earlier stage.
fn frame_input(ctx: &RunContext, id: &str, name: &str) -> Result<PathBuf> {
    let p = ctx.frame_dir(id).join(name);
    require(&p)?;
    Ok(p)
}

fn frame_output(ctx: &RunContext, id: &str, name: &str) -> Result<PathBuf> {
    let dir = ctx.frame_dir(id);
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    Ok(dir.join(name))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

pub(super) fn synth(ctx: &RunContext) -> Result<()> {
    let cfg = &ctx.config;
    create_dir(&ctx.out_dir)?;
    let ids = (0..cfg.synth.frames)
        .into_par_iter()
        .map(|i| {
            let frame = generate_frame(cfg.seed, i, &cfg.synth)?;
            write_frame(&ctx.frame_dir(&frame.frame_id), &frame)?;
            Ok(frame.frame_id)
        })
        .collect::<Vec<Result<String>>>()
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let base = ctx.manifest.parent().unwrap_or(Path::new(""));
    let mut entries = Vec::with_capacity(ids.len());
    for id in ids {
        let dir = ctx.frame_dir(&id);
        let rel = match dir.strip_prefix(base) {
            Ok(r) => r.to_path_buf(),
            Err(_) => std::path::absolute(&dir).map_err(|e| Error::io(&dir, e))?,
        };
        entries.push((id, rel, true));
    }
    if let Some(parent) = ctx.manifest.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    FrameManifest::write(&ctx.manifest, &entries)
}

pub(super) fn segment(ctx: &RunContext) -> Result<()> {
    let cfg = &ctx.config;
    per_frame(&load_frames(ctx)?, |f| {
        let meta = read_meta(&f.meta)?;
        let cloud = read_cloud_csv(&f.cloud, &meta.sensor_id)?;
        let ri = build_range_image(&cloud, &meta.lidar)?;
        let ground = segment_ground(&ri, &meta.lidar, &cfg.ground);
        let seg = segment_objects(&ri, &meta.lidar, &ground, &cfg.segment)?;
        write_pgm16(&frame_output(ctx, &f.id, RANGE_SEG)?, &seg.labels)
    })
    .map(drop)
}

pub(super) fn project(ctx: &RunContext) -> Result<()> {
    let cfg = &ctx.config;
    per_frame(&load_frames(ctx)?, |f| {
        let labels = read_pgm16(&frame_input(ctx, &f.id, RANGE_SEG)?)?;
        let meta = read_meta(&f.meta)?;
        let cloud = read_cloud_csv(&f.cloud, &meta.sensor_id)?;
        let calib = read_calibration(&f.calib)?;
        let seg = RangeSegmentation::from_labels(labels);
        let sparse = project_segments(&seg, &cloud, &meta.lidar, &calib, &cfg.project)?;
        write_pgm16(&frame_output(ctx, &f.id, IMAGE_SEG)?, &densify(&sparse, &cfg.densify))
    })
    .map(drop)
}

pub(super) fn cluster(ctx: &RunContext) -> Result<()> {
    let cfg = &ctx.config.cluster;
    let frames = load_frames(ctx)?;
    // (filtered segment map, descriptors) per frame
    let per: Vec<(LabelGrid, Vec<SegmentFeature>)> = per_frame(&frames, |f| {
        let image = read_ppm(&f.image)?;
        let segmap = drop_small_segments(&read_pgm16(&frame_input(ctx, &f.id, IMAGE_SEG)?)?, cfg.min_segment_pixels);
        let mut feats = Vec::new();
        if cfg.external_features.is_none() {
            for &id in segment_pixel_counts(&segmap).keys() {
                if id == GROUND && !cfg.include_ground {
                    continue;
                }
                let crop = crop_segment(&image, &segmap, id, &f.id)?;
                feats.push(extract_features(&crop, &cfg.features)?);
            }
        }
        Ok((segmap, feats))
    })?;

    let features: Vec<SegmentFeature> = match &cfg.external_features {
        None => per.iter().flat_map(|(_, f)| f.iter().cloned()).collect(),
        Some(path) => {
            let known: BTreeSet<SegmentSource> = frames
                .iter()
                .zip(&per)
                .flat_map(|(f, (segmap, _))| {
                    segment_pixel_counts(segmap).into_keys().map(|segment_id| SegmentSource {
                        frame_id: f.id.clone(),
                        segment_id,
                    })
                })
                .collect();
            load_external_features(path, Some(&known))?
        }
    };
    save_features(&ctx.artifact("features.csv"), &features)?;
    let data: Vec<Vec<f64>> = features.iter().map(|f| f.vector.clone()).collect();
    let fit = kmeans_fit(&data, cfg.k, derive_seed(ctx.config.seed, "cluster", 0), &cfg.kmeans)?;
    write_cluster_model(&ctx.artifact("clusters.csv"), &fit.model)?;

    let mut assignment: BTreeMap<&str, BTreeMap<u16, u16>> = BTreeMap::new();
    for (feat, &label) in features.iter().zip(&fit.labels) {
        assignment
            .entry(feat.source.frame_id.as_str())
            .or_default()
            .insert(feat.source.segment_id, label as u16 + 1);
    }
    let empty = BTreeMap::new();
    frames
        .par_iter()
        .zip(&per)
        .map(|(f, (segmap, _))| {
            let a = assignment.get(f.id.as_str()).unwrap_or(&empty);
            let pseudo = assemble_pseudo_labels(segmap, a, cfg.include_ground)?;
            write_pgm16(&frame_output(ctx, &f.id, PSEUDO)?, &pseudo)
        })
        .collect::<Vec<Result<()>>>()
        .into_iter()
        .collect()
}

fn frame_features(frames: &[FrameEntry]) -> Result<Vec<PixelFeatureMap>> {
    per_frame(frames, |f| Ok(pixel_features(&read_ppm(&f.image)?)))
}

fn train_stage(ctx: &RunContext, target_name: &str, partial: bool, hyper: &TrainHyper, salt: &str, model: &str) -> Result<()> {
    let frames = load_frames(ctx)?;
    let labels = per_frame(&frames, |f| read_pgm16(&frame_input(ctx, &f.id, target_name)?))?;
    let feats = frame_features(&frames)?;
    let targets: Vec<Target<'_>> = labels
        .iter()
        .map(|l| if partial { Target::Partial(l) } else { Target::Complete(l) })
        .collect();
    let hyper = TrainHyper {
        seed: derive_seed(ctx.config.seed, salt, 0),
        ..*hyper
    };
    let out = train(&feats, &targets, ctx.config.cluster.k, &hyper)?;
    write_classifier(&ctx.artifact(&format!("{model}.bin")), &out.params)?;
    write_training_log(&ctx.artifact(&format!("{model}_log.csv")), &out.log)
}

pub(super) fn train_teacher(ctx: &RunContext) -> Result<()> {
    train_stage(ctx, PSEUDO, true, &ctx.config.teacher, "teacher", "teacher")
}

pub(super) fn train_student(ctx: &RunContext) -> Result<()> {
    train_stage(ctx, REFINED, false, &ctx.config.student, "student", "student")
}

fn load_model(ctx: &RunContext, name: &str) -> Result<ClassifierParams> {
    let path = ctx.artifact(name);
    require(&path)?;
    read_classifier(&path)
}

fn predict(model: &ClassifierParams, image_path: &Path) -> Result<LabelGrid> {
    let feats = pixel_features(&read_ppm(image_path)?);
    Ok(classifier_forward(model, &feats)?.argmax().clone())
}

pub(super) fn refine(ctx: &RunContext) -> Result<()> {
    let teacher = load_model(ctx, TEACHER)?;
    per_frame(&load_frames(ctx)?, |f| {
        let segmap = read_pgm16(&frame_input(ctx, &f.id, IMAGE_SEG)?)?;
        let pred = predict(&teacher, &f.image)?;
        let refined = refine_predictions(&pred, &segmap, ctx.config.refine.include_ground)?;
        write_pgm16(&frame_output(ctx, &f.id, TEACHER_PRED)?, &pred)?;
        write_pgm16(&frame_output(ctx, &f.id, REFINED)?, &refined)
    })
    .map(drop)
}

/// Raw teacher against refined maps, both restricted to pixels inside a
/// voting region.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageComparison {
    pub covered_pixels: u64,
    pub teacher: EvalReport,
    pub refined: EvalReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalSummary {
    pub class_names: Vec<String>,
    pub teacher: EvalReport,
    pub student: EvalReport,
    pub refined: EvalReport,
    pub coverage: CoverageComparison,
}

#[derive(Serialize)]
struct RefinementFile {
    covered_pixels: u64,
    teacher_pixel_accuracy: f64,
    refined_pixel_accuracy: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    teacher_miou: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    refined_miou: Option<f64>,
}

struct FrameConfusions {
    classes: Vec<String>,
    teacher: ConfusionMatrix,
    student: ConfusionMatrix,
    refined: ConfusionMatrix,
    teacher_covered: ConfusionMatrix,
    refined_covered: ConfusionMatrix,
}

/// Scores teacher, refined maps and student against ground truth and writes
/// the reports under `<out>/eval`.
pub fn evaluate_run(ctx: &RunContext) -> Result<EvalSummary> {
    let teacher = load_model(ctx, TEACHER)?;
    let student = load_model(ctx, STUDENT)?;
    let k = teacher.classes;
    if student.classes != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            found: student.classes,
        });
    }
    let frames = load_frames(ctx)?;
    let include_ground = ctx.config.refine.include_ground;
    let per = per_frame(&frames, |f| {
        let gt_path = f.gt_class.clone().unwrap_or_else(|| f.dir.join("gt_class.pgm"));
        require(&gt_path)?;
        let gt = read_pgm16(&gt_path)?;
        let classes = read_meta(&f.meta)?.class_names;
        let c = classes.len();
        let refined = read_pgm16(&frame_input(ctx, &f.id, REFINED)?)?;
        let segmap = read_pgm16(&frame_input(ctx, &f.id, IMAGE_SEG)?)?;
        let t_pred = predict(&teacher, &f.image)?;
        let s_pred = predict(&student, &f.image)?;
        if !segmap.same_shape(&gt) {
            return Err(Error::ShapeMismatch(format!("frame {}: segment map and ground truth differ in size", f.id)));
        }
        let covered_gt = LabelGrid::from_fn(gt.rows(), gt.cols(), |r, col| {
            let s = *segmap.get(r, col);
            let votes = s != IGNORE && (include_ground || s != GROUND);
            if votes { *gt.get(r, col) } else { IGNORE }
        });
        Ok(FrameConfusions {
            teacher: confusion_matrix(&gt, &t_pred, c, k)?,
            student: confusion_matrix(&gt, &s_pred, c, k)?,
            refined: confusion_matrix(&gt, &refined, c, k)?,
            teacher_covered: confusion_matrix(&covered_gt, &t_pred, c, k)?,
            refined_covered: confusion_matrix(&covered_gt, &refined, c, k)?,
            classes,
        })
    })?;

    let class_names = per[0].classes.clone();
    let c = class_names.len();
    let mut acc: [ConfusionMatrix; 5] = std::array::from_fn(|_| ConfusionMatrix::zeros(c, k));
    for (f, fc) in frames.iter().zip(&per) {
        if fc.classes != class_names {
            return Err(Error::format(
                f.meta.display().to_string(),
                "class names differ from the first frame",
            ));
        }
        for (a, m) in acc.iter_mut().zip([&fc.teacher, &fc.student, &fc.refined, &fc.teacher_covered, &fc.refined_covered]) {
            a.merge(m)?;
        }
    }

    let eval_dir = ctx.artifact("eval");
    create_dir(&eval_dir)?;
    let score = |conf: &ConfusionMatrix, name: Option<&str>| -> Result<EvalReport> {
        let mapping = hungarian_match(conf)?;
        let report = evaluate(conf, &mapping)?;
        if let Some(name) = name {
            write_report(&eval_dir.join(format!("{name}_report.toml")), &report, Some(&class_names))?;
            let norm = normalized_confusion_report(conf, &mapping)?;
            write_normalized_csv(&eval_dir.join(format!("{name}_confusion.csv")), &norm)?;
        }
        Ok(report)
    };
    let [t, s, r, tc, rc] = &acc;
    let summary = EvalSummary {
        teacher: score(t, Some("teacher"))?,
        student: score(s, Some("student"))?,
        refined: score(r, Some("refined"))?,
        coverage: CoverageComparison {
            covered_pixels: tc.total_labeled(),
            teacher: score(tc, None)?,
            refined: score(rc, None)?,
        },
        class_names: class_names.clone(),
    };
    let cov = &summary.coverage;
    let file = RefinementFile {
        covered_pixels: cov.covered_pixels,
        teacher_pixel_accuracy: cov.teacher.pixel_accuracy,
        refined_pixel_accuracy: cov.refined.pixel_accuracy,
        teacher_miou: cov.teacher.miou,
        refined_miou: cov.refined.miou,
    };
    let path = eval_dir.join("refinement.toml");
    let text = toml::to_string(&file).map_err(|e| Error::format("refinement.toml", e.to_string()))?;
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(summary)
}
