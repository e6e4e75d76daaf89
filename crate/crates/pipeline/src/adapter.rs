//! External-tool adapters for video generation, segmentation and inpainting.
//!
//! An adapter is a command template split on whitespace. Each token may hold
//! the placeholders `{in}`, `{out}`, `{prompt}` and `{mask}`, substituted per
//! job, so a prompt with spaces stays one argument. In `file-drop` mode the
//! expanded job is written to `{drop_dir}/{job}.json` and the adapter is done
//! once `{drop_dir}/{job}.done` appears.

use std::fmt;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::{Condvar, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::StageError;
use maskflow_core::io::{load_mask, load_video};

const POLL: Duration = Duration::from_millis(10);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageName {
    I2v,
    DetectSegment,
    Inpaint,
}

impl StageName {
    pub const ALL: [StageName; 3] = [StageName::I2v, StageName::DetectSegment, StageName::Inpaint];

    pub fn as_str(self) -> &'static str {
        match self {
            StageName::I2v => "i2v",
            StageName::DetectSegment => "detect_segment",
            StageName::Inpaint => "inpaint",
        }
    }

    /// Placeholders the command template must mention.
    pub fn required_placeholders(self) -> &'static [&'static str] {
        match self {
            StageName::I2v | StageName::DetectSegment => &["{in}", "{out}", "{prompt}"],
            StageName::Inpaint => &["{in}", "{mask}", "{out}", "{prompt}"],
        }
    }
}

impl fmt::Display for StageName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AdapterMode {
    #[default]
    Invoke,
    FileDrop,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdapterSpec {
    pub name: StageName,
    pub command_template: String,
    /// Seconds.
    pub timeout: f64,
    pub mode: AdapterMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drop_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub version: Option<String>,
}

impl AdapterSpec {
    pub fn invoke(name: StageName, command_template: impl Into<String>, timeout: f64) -> Self {
        Self {
            name,
            command_template: command_template.into(),
            timeout,
            mode: AdapterMode::Invoke,
            drop_dir: None,
            version: None,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.command_template.split_whitespace().next().is_none() {
            return Err(format!("{}: empty command template", self.name));
        }
        let missing: Vec<&str> = self
            .name
            .required_placeholders()
            .iter()
            .copied()
            .filter(|p| !self.command_template.contains(p))
            .collect();
        if !missing.is_empty() {
            return Err(format!("{}: command template lacks {}", self.name, missing.join(", ")));
        }
        if !(self.timeout.is_finite() && self.timeout > 0.0) {
            return Err(format!("{}: timeout must be > 0 seconds", self.name));
        }
        if self.mode == AdapterMode::FileDrop && self.drop_dir.is_none() {
            return Err(format!("{}: file-drop mode needs drop_dir", self.name));
        }
        Ok(())
    }

    /// Program name plus declared version, for manifest provenance.
    pub fn provenance(&self) -> String {
        let program = self.command_template.split_whitespace().next().unwrap_or("");
        let program = Path::new(program)
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        match &self.version {
            Some(v) => format!("{program} {v}"),
            None => program,
        }
    }

    /// The expanded argument vector for `job`.
    pub fn argv(&self, job: &StageJob) -> Vec<String> {
        let mask = job.mask.as_ref().map(|m| m.display().to_string()).unwrap_or_default();
        self.command_template
            .split_whitespace()
            .map(|tok| {
                tok.replace("{in}", &job.input.display().to_string())
                    .replace("{out}", &job.output.display().to_string())
                    .replace("{mask}", &mask)
                    .replace("{prompt}", &job.prompt)
            })
            .collect()
    }
}

/// One adapter invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageJob {
    /// Unique name; file-drop mode derives its file names from it.
    pub job: String,
    pub input: PathBuf,
    pub output: PathBuf,
    pub prompt: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<PathBuf>,
}

#[derive(Serialize)]
struct DropTicket<'a> {
    stage: StageName,
    argv: Vec<String>,
    #[serde(flatten)]
    job: &'a StageJob,
}

/// Runs one stage and checks its declared output.
pub fn run_stage(spec: &AdapterSpec, job: &StageJob) -> Result<PathBuf, StageError> {
    match spec.mode {
        AdapterMode::Invoke => invoke(spec, job)?,
        AdapterMode::FileDrop => file_drop(spec, job)?,
    }
    check_output(spec.name, &job.output)?;
    Ok(job.output.clone())
}

fn invoke(spec: &AdapterSpec, job: &StageJob) -> Result<(), StageError> {
    let argv = spec.argv(job);
    let mut child = Command::new(&argv[0])
        .args(&argv[1..])
        .stdin(Stdio::null())
        .stdout(Stdio::null())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|source| StageError::Spawn {
            stage: spec.name,
            program: argv[0].clone(),
            source,
        })?;
    let mut pipe = child.stderr.take().expect("stderr is piped");
    let reader = thread::spawn(move || {
        let mut s = String::new();
        let _ = pipe.read_to_string(&mut s);
        s
    });
    let deadline = Instant::now() + Duration::from_secs_f64(spec.timeout);
    let status = loop {
        match child.try_wait() {
            Ok(Some(status)) => break status,
            Ok(None) if Instant::now() >= deadline => {
                let _ = child.kill();
                let _ = child.wait();
                return Err(StageError::Timeout {
                    stage: spec.name,
                    seconds: spec.timeout,
                });
            }
            Ok(None) => thread::sleep(POLL),
            Err(source) => {
                return Err(StageError::Spawn {
                    stage: spec.name,
                    program: argv[0].clone(),
                    source,
                })
            }
        }
    };
    let stderr = reader.join().unwrap_or_default();
    if !status.success() {
        return Err(StageError::Exit {
            stage: spec.name,
            code: status.code(),
            stderr: stderr.trim().to_string(),
        });
    }
    Ok(())
}

fn file_drop(spec: &AdapterSpec, job: &StageJob) -> Result<(), StageError> {
    let dir = spec.drop_dir.as_deref().expect("validated: file-drop has drop_dir");
    let bad = |path: &Path, reason: String| StageError::BadOutput {
        stage: spec.name,
        path: path.to_path_buf(),
        reason,
    };
    fs::create_dir_all(dir).map_err(|e| bad(dir, e.to_string()))?;
    let ticket = dir.join(format!("{}.json", job.job));
    let done = dir.join(format!("{}.done", job.job));
    let _ = fs::remove_file(&done);
    let body = serde_json::to_vec_pretty(&DropTicket {
        stage: spec.name,
        argv: spec.argv(job),
        job,
    })
    .expect("ticket serializes");
    fs::write(&ticket, body).map_err(|e| bad(&ticket, e.to_string()))?;
    let deadline = Instant::now() + Duration::from_secs_f64(spec.timeout);
    while !done.exists() {
        if Instant::now() >= deadline {
            return Err(StageError::Timeout {
                stage: spec.name,
                seconds: spec.timeout,
            });
        }
        thread::sleep(POLL);
    }
    Ok(())
}

fn check_output(stage: StageName, path: &Path) -> Result<(), StageError> {
    let checked = match stage {
        StageName::I2v | StageName::Inpaint => load_video(path).map(drop),
        StageName::DetectSegment => load_mask(path).map(drop),
    };
    checked.map_err(|e| StageError::BadOutput {
        stage,
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

/// Counting semaphore capping concurrent adapter processes.
#[derive(Debug)]
pub struct AdapterGate {
    free: Mutex<usize>,
    wake: Condvar,
}

pub struct Permit<'a>(&'a AdapterGate);

impl AdapterGate {
    pub fn new(cap: usize) -> Self {
        Self {
            free: Mutex::new(cap.max(1)),
            wake: Condvar::new(),
        }
    }

    pub fn acquire(&self) -> Permit<'_> {
        let mut free = self.free.lock().expect("gate lock");
        while *free == 0 {
            free = self.wake.wait(free).expect("gate lock");
        }
        *free -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().expect("gate lock") += 1;
        self.0.wake.notify_one();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn job() -> StageJob {
        StageJob {
            job: "p1-i2v".into(),
            input: "in.png".into(),
            output: "out dir".into(),
            prompt: "a red ball".into(),
            mask: None,
        }
    }

    #[test]
    fn placeholders_expand_per_token() {
        let spec = AdapterSpec::invoke(StageName::I2v, "gen --src {in} --dst={out}  --text {prompt}", 5.0);
        assert_eq!(
            spec.argv(&job()),
            ["gen", "--src", "in.png", "--dst=out dir", "--text", "a red ball"]
        );
    }

    #[test]
    fn templates_must_name_required_placeholders() {
        assert!(AdapterSpec::invoke(StageName::I2v, "gen {in} {out} {prompt}", 5.0).validate().is_ok());
        assert!(AdapterSpec::invoke(StageName::Inpaint, "fill {in} {out} {prompt}", 5.0).validate().is_err());
        assert!(AdapterSpec::invoke(StageName::DetectSegment, "  ", 5.0).validate().is_err());
        assert!(AdapterSpec::invoke(StageName::I2v, "gen {in} {out} {prompt}", 0.0).validate().is_err());
        let mut drop = AdapterSpec::invoke(StageName::I2v, "gen {in} {out} {prompt}", 1.0);
        drop.mode = AdapterMode::FileDrop;
        assert!(drop.validate().is_err());
    }

    #[test]
    fn provenance_uses_program_basename() {
        let mut spec = AdapterSpec::invoke(StageName::I2v, "/opt/bin/gen {in} {out} {prompt}", 5.0);
        assert_eq!(spec.provenance(), "gen");
        spec.version = Some("1.2".into());
        assert_eq!(spec.provenance(), "gen 1.2");
    }

    #[test]
    fn nonzero_exit_carries_the_code() {
        let spec = AdapterSpec::invoke(StageName::I2v, "false {in} {out} {prompt}", 5.0);
        match run_stage(&spec, &job()) {
            Err(StageError::Exit { code, .. }) => assert_eq!(code, Some(1)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn slow_adapter_times_out() {
        let spec = AdapterSpec::invoke(StageName::I2v, "sh -c sleep${IFS}5 {in} {out} {prompt}", 0.2);
        let t = Instant::now();
        assert!(matches!(run_stage(&spec, &job()), Err(StageError::Timeout { .. })));
        assert!(t.elapsed() < Duration::from_secs(3));
    }

    #[test]
    fn missing_output_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let j = StageJob {
            output: dir.path().join("nothing"),
            ..job()
        };
        let spec = AdapterSpec::invoke(StageName::I2v, "true {in} {out} {prompt}", 5.0);
        assert!(matches!(run_stage(&spec, &j), Err(StageError::BadOutput { .. })));
    }

    #[test]
    fn missing_program_is_a_spawn_error() {
        let spec = AdapterSpec::invoke(StageName::I2v, "/nonexistent/tool {in} {out} {prompt}", 5.0);
        assert!(matches!(run_stage(&spec, &job()), Err(StageError::Spawn { .. })));
    }

    #[test]
    fn file_drop_without_result_times_out() {
        let dir = tempfile::tempdir().unwrap();
        let spec = AdapterSpec {
            mode: AdapterMode::FileDrop,
            drop_dir: Some(dir.path().to_path_buf()),
            ..AdapterSpec::invoke(StageName::I2v, "gen {in} {out} {prompt}", 0.1)
        };
        assert!(matches!(run_stage(&spec, &job()), Err(StageError::Timeout { .. })));
        let ticket: serde_json::Value =
            serde_json::from_slice(&fs::read(dir.path().join("p1-i2v.json")).unwrap()).unwrap();
        assert_eq!(ticket["stage"], "i2v");
        assert_eq!(ticket["prompt"], "a red ball");
        assert_eq!(ticket["argv"][0], "gen");
    }

    #[test]
    fn gate_caps_concurrency() {
        use std::sync::atomic::{AtomicUsize, Ordering};
        let gate = AdapterGate::new(2);
        let (active, peak) = (AtomicUsize::new(0), AtomicUsize::new(0));
        thread::scope(|s| {
            for _ in 0..6 {
                s.spawn(|| {
                    let _p = gate.acquire();
                    let now = active.fetch_add(1, Ordering::SeqCst) + 1;
                    peak.fetch_max(now, Ordering::SeqCst);
                    thread::sleep(Duration::from_millis(20));
                    active.fetch_sub(1, Ordering::SeqCst);
                });
            }
        });
        assert!(peak.load(Ordering::SeqCst) <= 2);
    }
}
