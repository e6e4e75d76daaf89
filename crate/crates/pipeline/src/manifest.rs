//! Dataset manifest: a `manifest.json` header and one record per line in
//! `manifest.jsonl`.

use std::collections::{BTreeMap, HashSet};
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{PipelineError, Result};
use crate::filter::{keep, FilterThresholds};
use maskflow_core::io::{load_flow_sequence, load_mask_sequence, load_video};
use maskflow_core::{EditPair, PairStatus};

pub const HEADER_FILE: &str = "manifest.json";
pub const RECORDS_FILE: &str = "manifest.jsonl";
pub const FORMAT_VERSION: u32 = 1;

pub const FPS_RANGE: (f64, f64) = (16.0, 24.0);
pub const FRAME_RANGE: (usize, usize) = (81, 121);
pub const MAX_LONG_SIDE: usize = 1280;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub records: Vec<EditPair>,
    pub thresholds: FilterThresholds,
    /// Adapter stage name to program and version.
    pub tool_provenance: BTreeMap<String, String>,
    pub created_at: DateTime<Utc>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    format_version: u32,
    thresholds: FilterThresholds,
    tool_provenance: BTreeMap<String, String>,
    #[serde(with = "rfc3339")]
    created_at: DateTime<Utc>,
}

mod rfc3339 {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(t: &DateTime<Utc>, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&t.to_rfc3339_opts(SecondsFormat::Secs, true))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<DateTime<Utc>, D::Error> {
        let s = String::deserialize(d)?;
        DateTime::parse_from_rfc3339(&s)
            .map(|t| t.with_timezone(&Utc))
            .map_err(serde::de::Error::custom)
    }
}

impl DatasetManifest {
    pub fn new(thresholds: FilterThresholds, tool_provenance: BTreeMap<String, String>) -> Self {
        let now = Utc::now();
        let created_at = DateTime::from_timestamp(now.timestamp(), 0).expect("current time is representable");
        Self {
            records: Vec::new(),
            thresholds,
            tool_provenance,
            created_at,
        }
    }

    pub fn record(&self, id: &str) -> Option<&EditPair> {
        self.records.iter().find(|r| r.id == id)
    }
}

/// The directory holding a manifest, given the directory itself or either file.
pub fn manifest_dir(path: &Path) -> PathBuf {
    if path.is_dir() {
        path.to_path_buf()
    } else {
        path.parent().map(Path::to_path_buf).unwrap_or_default()
    }
}

fn manifest_err(path: &Path, reason: impl Into<String>) -> PipelineError {
    PipelineError::Manifest {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(|e| PipelineError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| PipelineError::io(path, e))
}

fn record_line(rec: &EditPair) -> String {
    let mut line = serde_json::to_string(rec).expect("records serialize");
    line.push('\n');
    line
}

pub fn write_header(dir: &Path, m: &DatasetManifest) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| PipelineError::io(dir, e))?;
    let header = Header {
        format_version: FORMAT_VERSION,
        thresholds: m.thresholds,
        tool_provenance: m.tool_provenance.clone(),
        created_at: m.created_at,
    };
    let mut body = serde_json::to_vec_pretty(&header).expect("header serializes");
    body.push(b'\n');
    write_atomic(&dir.join(HEADER_FILE), &body)
}

/// Replaces both manifest files in `dir`.
pub fn write_manifest(dir: &Path, m: &DatasetManifest) -> Result<()> {
    write_header(dir, m)?;
    let body: String = m.records.iter().map(record_line).collect();
    write_atomic(&dir.join(RECORDS_FILE), body.as_bytes())
}

/// Appends records to `manifest.jsonl` one line at a time.
pub struct RecordAppender {
    path: PathBuf,
    file: File,
}

impl RecordAppender {
    pub fn open(dir: &Path) -> Result<Self> {
        let path = dir.join(RECORDS_FILE);
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| PipelineError::io(&path, e))?;
        Ok(Self { path, file })
    }

    pub fn append(&mut self, rec: &EditPair) -> Result<()> {
        self.file
            .write_all(record_line(rec).as_bytes())
            .and_then(|_| self.file.flush())
            .map_err(|e| PipelineError::io(&self.path, e))
    }
}

/// Reads the manifest in `path` (the directory or either of its files).
///
/// A final line cut short by a crash is dropped; any other unparseable line
/// is an error.
pub fn read_manifest(path: &Path) -> Result<DatasetManifest> {
    let dir = manifest_dir(path);
    let header_path = dir.join(HEADER_FILE);
    let text = fs::read_to_string(&header_path).map_err(|e| PipelineError::io(&header_path, e))?;
    let header: Header = serde_json::from_str(&text).map_err(|e| manifest_err(&header_path, e.to_string()))?;
    if header.format_version != FORMAT_VERSION {
        return Err(manifest_err(
            &header_path,
            format!("unsupported format version {}", header.format_version),
        ));
    }
    let records_path = dir.join(RECORDS_FILE);
    let body = match fs::read_to_string(&records_path) {
        Ok(body) => body,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => String::new(),
        Err(e) => return Err(PipelineError::io(&records_path, e)),
    };
    let complete = body.ends_with('\n');
    let lines: Vec<&str> = body.lines().collect();
    let mut records = Vec::with_capacity(lines.len());
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<EditPair>(line) {
            Ok(rec) => records.push(rec),
            Err(_) if i + 1 == lines.len() && !complete => {
                log::warn!("{}: dropping truncated final line", records_path.display())
            }
            Err(e) => return Err(manifest_err(&records_path, format!("line {}: {e}", i + 1))),
        }
    }
    Ok(DatasetManifest {
        records,
        thresholds: header.thresholds,
        tool_provenance: header.tool_provenance,
        created_at: header.created_at,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub errors: Vec<String>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.errors.is_empty()
    }
}

/// Warnings for video shapes outside the dataset's target ranges.
pub fn shape_warnings(rec: &EditPair) -> Vec<String> {
    let Some(v) = rec.video else {
        return Vec::new();
    };
    let mut out = Vec::new();
    if !(v.fps >= FPS_RANGE.0 && v.fps <= FPS_RANGE.1) {
        out.push(format!("{}: fps {} outside [{}, {}]", rec.id, v.fps, FPS_RANGE.0, FPS_RANGE.1));
    }
    if !(FRAME_RANGE.0..=FRAME_RANGE.1).contains(&v.frames) {
        out.push(format!(
            "{}: {} frames outside [{}, {}]",
            rec.id, v.frames, FRAME_RANGE.0, FRAME_RANGE.1
        ));
    }
    if v.width.max(v.height) > MAX_LONG_SIDE {
        out.push(format!(
            "{}: {}x{} exceeds long side {MAX_LONG_SIDE}",
            rec.id, v.width, v.height
        ));
    }
    out
}

fn check_files(rec: &EditPair, root: &Path, errors: &mut Vec<String>) {
    let mut missing = false;
    for (label, rel) in rec.referenced_paths() {
        if !root.join(rel).exists() {
            errors.push(format!("{}: {label} {} does not exist", rec.id, rel.display()));
            missing = true;
        }
    }
    if missing || rec.status != PairStatus::Complete {
        return;
    }
    let at = |p: &Option<PathBuf>| root.join(p.as_ref().expect("complete records carry paths"));
    let mut fail = |what: &str, e: &dyn std::fmt::Display| errors.push(format!("{}: {what}: {e}", rec.id));
    let source = match load_video(&at(&rec.source_video)) {
        Ok(v) => v,
        Err(e) => return fail("source video", &e),
    };
    if let Some(meta) = rec.video {
        if (meta.width, meta.height) != source.dims() || meta.frames != source.len() {
            fail("video metadata", &format!("{meta:?} disagrees with the source video"));
        }
    }
    match load_mask_sequence(&at(&rec.masks)) {
        Ok(m) if m.len() != source.len() || m.dims() != source.dims() => {
            fail("masks", &format!("{} masks of {:?} for {} frames", m.len(), m.dims(), source.len()))
        }
        Ok(_) => {}
        Err(e) => fail("masks", &e),
    }
    match load_flow_sequence(&at(&rec.flows)) {
        Ok(f) if f.len() + 1 != source.len() => fail("flows", &format!("{} pairs for {} frames", f.len(), source.len())),
        Ok(_) => {}
        Err(e) => fail("flows", &e),
    }
    if rec.keep {
        match load_video(&at(&rec.target_video)) {
            Ok(t) if t.len() != source.len() || t.dims() != source.dims() => {
                fail("target video", &"shape differs from the source video")
            }
            Ok(_) => {}
            Err(e) => fail("target video", &e),
        }
    }
}

/// Checks manifest invariants. With `root`, referenced files are also opened
/// and checked.
pub fn validate_manifest(m: &DatasetManifest, root: Option<&Path>) -> ValidationReport {
    let mut report = ValidationReport::default();
    if let Err(e) = m.thresholds.validate() {
        report.errors.push(e.to_string());
    }
    let mut seen = HashSet::new();
    for rec in &m.records {
        if !seen.insert(rec.id.as_str()) {
            report.errors.push(format!("{}: duplicate id", rec.id));
        }
        if let Err(e) = rec.validate() {
            report.errors.push(e.to_string());
        }
        if let Some(stats) = &rec.stats {
            let expect = keep(stats, &m.thresholds).keep;
            if rec.status == PairStatus::Complete && expect != rec.keep {
                report.errors.push(format!(
                    "{}: keep={} but the thresholds give {expect}",
                    rec.id, rec.keep
                ));
            }
        }
        if let Some(root) = root {
            check_files(rec, root, &mut report.errors);
        }
        report.warnings.extend(shape_warnings(rec));
    }
    report
}
