//! End-to-end dataset construction over a batch of image pairs.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::thread;

use crate::adapter::{run_stage, AdapterGate, StageJob, StageName};
use crate::config::{PairConfig, PipelineConfig};
use crate::error::{PipelineError, Result};
use crate::filter::keep;
use crate::manifest::{read_manifest, shape_warnings, write_header, write_manifest, DatasetManifest, RecordAppender, HEADER_FILE};
use crate::overlay::render_overlay;
use maskflow_core::flow::{estimate_flow_sequence, flow_magnitude_stats};
use maskflow_core::io::{load_flow_sequence, load_mask, load_video, save_flow_sequence, save_mask_sequence, save_video};
use maskflow_core::propagate::{area_ratio, propagate_masks, select_initial_mask};
use maskflow_core::{EditPair, EditTask, PairStats, PairStatus, VideoMeta};

pub const SOURCE_DIR: &str = "source";
pub const TARGET_DIR: &str = "target";
pub const MASKS_DIR: &str = "masks";
pub const FLOWS_DIR: &str = "flows";
pub const OVERLAY_DIR: &str = "overlay";

/// Loads `config_path` and runs every pair, see [`run_with_config`].
pub fn run_pipeline(config_path: &Path) -> Result<DatasetManifest> {
    run_with_config(&PipelineConfig::load(config_path)?)
}

/// Processes every pair not already complete in the output manifest.
///
/// Finished records are appended to `manifest.jsonl` as they arrive; at the
/// end the file is rewritten in config order. A pair that fails becomes a
/// failed record and the batch continues.
pub fn run_with_config(cfg: &PipelineConfig) -> Result<DatasetManifest> {
    cfg.validate().map_err(|reason| PipelineError::Config {
        path: cfg.output_dir.clone(),
        reason,
    })?;
    let out = &cfg.output_dir;
    fs::create_dir_all(out).map_err(|e| PipelineError::io(out, e))?;

    let mut manifest = DatasetManifest::new(cfg.thresholds, cfg.tool_provenance());
    let mut done: HashMap<String, EditPair> = HashMap::new();
    if out.join(HEADER_FILE).is_file() {
        let previous = read_manifest(out)?;
        manifest.created_at = previous.created_at;
        if previous.thresholds == cfg.thresholds {
            done.extend(
                previous
                    .records
                    .into_iter()
                    .filter(|r| r.status == PairStatus::Complete)
                    .map(|r| (r.id.clone(), r)),
            );
        }
    }
    write_header(out, &manifest)?;

    let todo: Vec<(usize, &PairConfig)> = cfg
        .pairs
        .iter()
        .enumerate()
        .filter(|(_, p)| !done.contains_key(&p.id))
        .collect();
    log::info!("{} pairs, {} already complete", cfg.pairs.len(), cfg.pairs.len() - todo.len());

    let mut fresh: HashMap<usize, EditPair> = HashMap::new();
    if !todo.is_empty() {
        let mut appender = RecordAppender::open(out)?;
        let gate = AdapterGate::new(cfg.adapter_concurrency.unwrap_or(usize::MAX));
        let next = AtomicUsize::new(0);
        let (tx, rx) = mpsc::channel();
        let workers = cfg.worker_count().min(todo.len());
        thread::scope(|s| -> Result<()> {
            for _ in 0..workers {
                let tx = tx.clone();
                let (todo, next, gate) = (&todo, &next, &gate);
                s.spawn(move || loop {
                    let Some(&(index, pair)) = todo.get(next.fetch_add(1, Ordering::Relaxed)) else {
                        break;
                    };
                    if tx.send((index, process_pair(cfg, pair, gate))).is_err() {
                        break;
                    }
                });
            }
            drop(tx);
            for (index, rec) in rx {
                match &rec.error {
                    Some(e) => log::warn!("{}: failed: {e}", rec.id),
                    None => log::info!("{}: complete, keep={}", rec.id, rec.keep),
                }
                appender.append(&rec)?;
                fresh.insert(index, rec);
            }
            Ok(())
        })?;
    }

    manifest.records = cfg
        .pairs
        .iter()
        .enumerate()
        .map(|(i, p)| {
            fresh
                .remove(&i)
                .or_else(|| done.remove(&p.id))
                .expect("every pair is either reused or processed")
        })
        .collect();
    write_manifest(out, &manifest)?;
    Ok(manifest)
}

fn process_pair(cfg: &PipelineConfig, pair: &PairConfig, gate: &AdapterGate) -> EditPair {
    let rel = |name: &str| Path::new(&pair.id).join(name);
    let image_name = |role: &str, p: &Path| {
        let ext = p.extension().and_then(|e| e.to_str()).unwrap_or("png");
        rel(&format!("{role}_image.{ext}"))
    };
    let source_image = image_name("source", &pair.source_image);
    let target_image = image_name("target", &pair.target_image);
    match build_pair(cfg, pair, gate, &source_image, &target_image) {
        Ok(rec) => rec,
        Err(e) => {
            let instruction = pair
                .edit_instruction()
                .expect("validated with the config");
            EditPair::failed(pair.id.clone(), instruction, source_image, target_image, e.to_string())
        }
    }
}

fn copy(from: &Path, to: &Path) -> Result<()> {
    fs::copy(from, to).map(drop).map_err(|e| PipelineError::io(from, e))
}

fn build_pair(
    cfg: &PipelineConfig,
    pair: &PairConfig,
    gate: &AdapterGate,
    source_image: &Path,
    target_image: &Path,
) -> Result<EditPair> {
    let out = &cfg.output_dir;
    let root = out.join(&pair.id);
    if root.exists() {
        fs::remove_dir_all(&root).map_err(|e| PipelineError::io(&root, e))?;
    }
    fs::create_dir_all(root.join(MASKS_DIR)).map_err(|e| PipelineError::io(&root, e))?;
    copy(&pair.source_image, &out.join(source_image))?;
    copy(&pair.target_image, &out.join(target_image))?;
    let instruction = pair.edit_instruction()?;
    let stage = |name: StageName, job: StageJob| -> Result<PathBuf> {
        let spec = &cfg.adapters[&name];
        let _permit = gate.acquire();
        Ok(run_stage(spec, &job)?)
    };
    let job = |suffix: &str, input: PathBuf, output: PathBuf, prompt: &str, mask: Option<PathBuf>| StageJob {
        job: format!("{}-{suffix}", pair.id),
        input,
        output,
        prompt: prompt.to_string(),
        mask,
    };

    let source_dir = root.join(SOURCE_DIR);
    match &pair.source_video {
        Some(dir) => save_video(&load_video(dir)?, &source_dir)?,
        None => {
            let j = job("i2v", out.join(source_image), source_dir.clone(), instruction.scene_prompt(), None);
            stage(StageName::I2v, j)?;
        }
    }
    let video = load_video(&source_dir)?;

    let segment = |role: &str, image: &Path| -> Result<maskflow_core::MaskFrame> {
        let path = root.join(MASKS_DIR).join(format!("{role}_init.png"));
        stage(StageName::DetectSegment, job(&format!("segment-{role}"), out.join(image), path.clone(), &instruction.text, None))?;
        Ok(load_mask(&path)?)
    };
    let needs_source = matches!(pair.task, EditTask::Remove | EditTask::Replace);
    let needs_target = matches!(pair.task, EditTask::Add | EditTask::Replace);
    let source_mask = needs_source.then(|| segment("source", source_image)).transpose()?;
    let target_mask = needs_target.then(|| segment("target", target_image)).transpose()?;
    let initial = select_initial_mask(pair.task, source_mask.as_ref(), target_mask.as_ref())?;
    if initial.dims() != video.dims() {
        return Err(maskflow_core::Error::ShapeMismatch {
            expected: video.dims(),
            got: initial.dims(),
        }
        .into());
    }

    let flows = match &pair.flows {
        Some(dir) => load_flow_sequence(dir)?,
        None => estimate_flow_sequence(&video, &cfg.flow)?,
    };
    if flows.len() + 1 != video.len() || flows.dims() != Some(video.dims()) {
        return Err(PipelineError::invalid(
            "flows",
            format!("{} fields of {:?} for {} frames of {:?}", flows.len(), flows.dims(), video.len(), video.dims()),
        ));
    }
    save_flow_sequence(&flows, &root.join(FLOWS_DIR))?;

    let masks = propagate_masks(&initial, &flows, &cfg.propagation)?;
    save_mask_sequence(&masks, &root.join(MASKS_DIR))?;
    let stats = PairStats {
        area_ratio: area_ratio(&masks),
        flow_mag: flow_magnitude_stats(&flows)?.mean_magnitude,
    };
    let report = keep(&stats, &cfg.thresholds);
    render_overlay(&video, &masks, cfg.overlay_alpha, &root.join(OVERLAY_DIR))?;

    let target_video = if report.keep {
        let target_dir = root.join(TARGET_DIR);
        let j = job("inpaint", source_dir.clone(), target_dir.clone(), &instruction.text, Some(root.join(MASKS_DIR)));
        stage(StageName::Inpaint, j)?;
        let target = load_video(&target_dir)?;
        if target.len() != video.len() || target.dims() != video.dims() {
            return Err(PipelineError::invalid(
                "inpainted video",
                format!("{} frames of {:?}, source has {} of {:?}", target.len(), target.dims(), video.len(), video.dims()),
            ));
        }
        Some(rel_to(&pair.id, TARGET_DIR))
    } else {
        None
    };

    let (width, height) = video.dims();
    let mut rec = EditPair {
        id: pair.id.clone(),
        instruction,
        status: PairStatus::Complete,
        error: None,
        source_image: source_image.to_path_buf(),
        target_image: target_image.to_path_buf(),
        source_video: Some(rel_to(&pair.id, SOURCE_DIR)),
        target_video,
        masks: Some(rel_to(&pair.id, MASKS_DIR)),
        flows: Some(rel_to(&pair.id, FLOWS_DIR)),
        overlay: Some(rel_to(&pair.id, OVERLAY_DIR)),
        video: Some(VideoMeta {
            width,
            height,
            frames: video.len(),
            fps: video.fps(),
        }),
        stats: Some(stats),
        keep: report.keep,
        warnings: Vec::new(),
    };
    rec.warnings = shape_warnings(&rec);
    Ok(rec)
}

fn rel_to(id: &str, dir: &str) -> PathBuf {
    Path::new(id).join(dir)
}
