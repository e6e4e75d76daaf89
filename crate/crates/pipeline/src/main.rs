use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use maskflow_core::eval::{endpoint_error, temporal_iou};
use maskflow_core::flow::{estimate_flow_sequence, flow_magnitude_stats, read_flo, HsParams};
use maskflow_core::io::{load_flow_sequence, load_mask, load_mask_sequence, load_video, save_flow_sequence, save_mask, save_mask_sequence};
use maskflow_core::propagate::{
    area_ratio, propagate_masks, refine_mask, select_initial_mask, MorphParams, OcclusionFill, PropagationConfig,
    StructuringElement,
};
use maskflow_core::warp::ConsistencyParams;
use maskflow_core::{EditTask, FlowField, PairStats};
use maskflow_dmp::gradcheck::toy_grad_check;
use maskflow_dmp::train::{save_params, write_loss_curve};
use maskflow_dmp::{run_reference, DmpError, LossWeights, ReferenceConfig};
use maskflow_pipeline::mock::{mock_i2v, mock_inpaint, mock_segment};
use maskflow_pipeline::{demo, keep, read_manifest, render_overlay, run_pipeline, validate_manifest, FilterThresholds, PipelineError};

#[derive(Debug, Parser)]
#[command(name = "maskflow", version, about = "Flow-guided edit masks and video editing datasets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build or check a dataset.
    #[command(subcommand)]
    Pipeline(PipelineCmd),
    /// Optical flow estimation and statistics.
    #[command(subcommand)]
    Flow(FlowCmd),
    /// Initial mask construction and propagation.
    #[command(subcommand)]
    Mask(MaskCmd),
    /// Apply the area and motion filter.
    Filter(FilterArgs),
    /// Mask overlays for visual inspection.
    #[command(subcommand)]
    Render(RenderCmd),
    /// Toy diffusion mask predictor.
    #[command(subcommand)]
    Dmp(DmpCmd),
    /// Mask and flow metrics, one CSV row per frame.
    #[command(subcommand)]
    Eval(EvalCmd),
    #[command(subcommand, hide = true)]
    Mock(MockCmd),
}

#[derive(Debug, Subcommand)]
enum PipelineCmd {
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Check a manifest; exits 2 when it has errors.
    Validate {
        manifest: PathBuf,
        /// Skip opening the referenced files.
        #[arg(long)]
        no_files: bool,
    },
    /// Write a three-pair synthetic batch that uses the mock adapters.
    Demo {
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
struct HsArgs {
    #[arg(long, default_value_t = 0.1)]
    lambda: f64,
    #[arg(long, default_value_t = 200)]
    iterations: usize,
    #[arg(long, default_value_t = 3)]
    levels: usize,
    #[arg(long, default_value_t = 0.5)]
    scale: f64,
}

impl HsArgs {
    fn params(&self) -> HsParams {
        HsParams {
            smoothness_weight: self.lambda,
            iterations: self.iterations,
            pyramid_levels: self.levels,
            pyramid_scale: self.scale,
        }
    }
}

#[derive(Debug, Subcommand)]
enum FlowCmd {
    /// Forward and backward flow between consecutive frames.
    Estimate {
        #[arg(long)]
        frames: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        hs: HsArgs,
    },
    /// Magnitude statistics of a flow directory as JSON.
    Stats {
        #[arg(long)]
        flows: PathBuf,
    },
}

#[derive(Debug, Args)]
struct MorphArgs {
    #[arg(long, default_value_t = 1)]
    open_radius: usize,
    #[arg(long, default_value_t = 2)]
    close_radius: usize,
    #[arg(long, value_parser = parse_element, default_value = "square")]
    element: StructuringElement,
}

impl MorphArgs {
    fn params(&self) -> MorphParams {
        MorphParams {
            open_radius: self.open_radius,
            close_radius: self.close_radius,
            element: self.element,
        }
    }
}

#[derive(Debug, Subcommand)]
enum MaskCmd {
    /// Select and refine the first-frame mask for an edit.
    Init {
        #[arg(long, value_parser = parse_task)]
        task: EditTask,
        #[arg(long)]
        source_mask: Option<PathBuf>,
        #[arg(long)]
        target_mask: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        morph: MorphArgs,
    },
    Propagate {
        #[arg(long)]
        init: PathBuf,
        #[arg(long)]
        flows: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_parser = parse_fill, default_value = "hold-previous")]
        fill: OcclusionFill,
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
        #[arg(long, default_value_t = 0.5)]
        tau_abs: f64,
        #[arg(long, default_value_t = 0.01)]
        tau_rel: f64,
        #[command(flatten)]
        morph: MorphArgs,
    },
}

#[derive(Debug, Args)]
struct FilterArgs {
    /// Mask directory; with --flows, the statistics are measured.
    #[arg(long, requires = "flows", conflicts_with_all = ["area", "flow"])]
    masks: Option<PathBuf>,
    #[arg(long, requires = "masks")]
    flows: Option<PathBuf>,
    #[arg(long, requires = "flow")]
    area: Option<f64>,
    #[arg(long, requires = "area")]
    flow: Option<f64>,
    #[arg(long, default_value_t = 0.01)]
    alpha_min: f64,
    #[arg(long, default_value_t = 0.5)]
    alpha_max: f64,
    #[arg(long, default_value_t = 0.1)]
    beta_min: f64,
    #[arg(long, default_value_t = 20.0)]
    beta_max: f64,
}

#[derive(Debug, Subcommand)]
enum RenderCmd {
    /// Tint masked regions of each frame.
    Overlay {
        #[arg(long)]
        frames: PathBuf,
        #[arg(long)]
        masks: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
    },
}

#[derive(Debug, Subcommand)]
enum DmpCmd {
    /// Train on the synthetic task; writes params.bin, loss_curve.csv and summary.json.
    Train {
        #[arg(long)]
        out: PathBuf,
        /// JSON reference configuration; defaults to the bundled one.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Compare analytic and finite-difference gradients; exits 2 above tolerance.
    Gradcheck {
        #[arg(long, default_value_t = 5)]
        seeds: u64,
        #[arg(long, default_value_t = 1e-4)]
        fd_step: f64,
        #[arg(long, default_value_t = 1e-4)]
        tolerance: f64,
    },
}

#[derive(Debug, Subcommand)]
enum EvalCmd {
    Iou {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long = "ref")]
        reference: PathBuf,
    },
    /// Endpoint error of `.flo` files, or of the forward fields of two flow directories.
    Epe {
        #[arg(long)]
        flow: PathBuf,
        #[arg(long)]
        truth: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
enum MockCmd {
    I2v {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "")]
        prompt: String,
        #[arg(long, default_value_t = 8)]
        frames: usize,
        #[arg(long, value_parser = parse_shift, default_value = "0,0", allow_hyphen_values = true)]
        shift: (i64, i64),
        #[arg(long, default_value_t = 16.0)]
        fps: f64,
    },
    Segment {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "")]
        prompt: String,
    },
    Inpaint {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        mask: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "")]
        prompt: String,
    },
}

fn parse_task(s: &str) -> Result<EditTask, String> {
    s.parse().map_err(|e: maskflow_core::Error| e.to_string())
}

fn parse_element(s: &str) -> Result<StructuringElement, String> {
    match s {
        "square" => Ok(StructuringElement::Square),
        "disk" => Ok(StructuringElement::Disk),
        _ => Err(format!("unknown element {s:?}, expected square or disk")),
    }
}

fn parse_fill(s: &str) -> Result<OcclusionFill, String> {
    match s {
        "hold-previous" => Ok(OcclusionFill::HoldPrevious),
        "zero" => Ok(OcclusionFill::Zero),
        _ => Err(format!("unknown fill {s:?}, expected hold-previous or zero")),
    }
}

fn parse_shift(s: &str) -> Result<(i64, i64), String> {
    let (x, y) = s.split_once(',').ok_or("expected DX,DY")?;
    let num = |v: &str| v.trim().parse::<i64>().map_err(|e| format!("{v:?}: {e}"));
    Ok((num(x)?, num(y)?))
}

#[derive(Debug)]
enum Failure {
    Validation(String),
    Stage(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Validation(_) => 2,
            Failure::Stage(_) => 3,
        }
    }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Config { .. } | PipelineError::Invalid { .. } | PipelineError::Manifest { .. } => {
                Failure::Validation(e.to_string())
            }
            PipelineError::Core(core) => core.into(),
            PipelineError::Stage(_) | PipelineError::Io { .. } => Failure::Stage(e.to_string()),
        }
    }
}

impl From<maskflow_core::Error> for Failure {
    fn from(e: maskflow_core::Error) -> Self {
        use maskflow_core::Error as E;
        match e {
            E::Io { .. } | E::Image { .. } | E::MissingDir(_) | E::EmptyDir(_) => Failure::Stage(e.to_string()),
            _ => Failure::Validation(e.to_string()),
        }
    }
}

impl From<DmpError> for Failure {
    fn from(e: DmpError) -> Self {
        match e {
            DmpError::Invalid { .. } | DmpError::ShapeMismatch { .. } | DmpError::ParamFormat { .. } => {
                Failure::Validation(e.to_string())
            }
            _ => Failure::Stage(e.to_string()),
        }
    }
}

type Outcome = Result<(), Failure>;

fn print_json<T: Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("plain data serializes"));
}

fn pipeline(cmd: PipelineCmd) -> Outcome {
    match cmd {
        PipelineCmd::Run { config } => {
            let m = run_pipeline(&config)?;
            let failed: Vec<&str> = m.records.iter().filter_map(|r| r.error.as_ref().map(|_| r.id.as_str())).collect();
            print_json(&serde_json::json!({
                "records": m.records.len(),
                "kept": m.records.iter().filter(|r| r.keep).count(),
                "failed": failed,
            }));
            if failed.is_empty() {
                Ok(())
            } else {
                Err(Failure::Stage(format!("{} pair(s) failed", failed.len())))
            }
        }
        PipelineCmd::Validate { manifest, no_files } => {
            let m = read_manifest(&manifest)?;
            let root = maskflow_pipeline::manifest::manifest_dir(&manifest);
            let report = validate_manifest(&m, (!no_files).then_some(root.as_path()));
            print_json(&report);
            if report.is_valid() {
                Ok(())
            } else {
                Err(Failure::Validation(format!("{} error(s)", report.errors.len())))
            }
        }
        PipelineCmd::Demo { out } => {
            let exe = std::env::current_exe().map_err(|e| Failure::Stage(e.to_string()))?;
            let cfg = demo::write_demo(&out, &exe)?;
            println!("{}", cfg.display());
            Ok(())
        }
    }
}

fn flow(cmd: FlowCmd) -> Outcome {
    match cmd {
        FlowCmd::Estimate { frames, out, hs } => {
            let video = load_video(&frames)?;
            let flows = estimate_flow_sequence(&video, &hs.params())?;
            save_flow_sequence(&flows, &out)?;
            Ok(())
        }
        FlowCmd::Stats { flows } => {
            print_json(&flow_magnitude_stats(&load_flow_sequence(&flows)?)?);
            Ok(())
        }
    }
}

fn mask(cmd: MaskCmd) -> Outcome {
    match cmd {
        MaskCmd::Init {
            task,
            source_mask,
            target_mask,
            out,
            morph,
        } => {
            let load = |p: &Option<PathBuf>| p.as_deref().map(load_mask).transpose();
            let (s, t) = (load(&source_mask)?, load(&target_mask)?);
            let initial = select_initial_mask(task, s.as_ref(), t.as_ref())?;
            save_mask(&refine_mask(&initial, &morph.params())?, &out)?;
            Ok(())
        }
        MaskCmd::Propagate {
            init,
            flows,
            out,
            fill,
            threshold,
            tau_abs,
            tau_rel,
            morph,
        } => {
            let cfg = PropagationConfig {
                morph: morph.params(),
                binarize_threshold: threshold,
                consistency: ConsistencyParams { tau_abs, tau_rel },
                occlusion_fill: fill,
            };
            let seq = propagate_masks(&load_mask(&init)?, &load_flow_sequence(&flows)?, &cfg)?;
            save_mask_sequence(&seq, &out)?;
            Ok(())
        }
    }
}

fn filter(args: FilterArgs) -> Outcome {
    let th = FilterThresholds {
        alpha_min: args.alpha_min,
        alpha_max: args.alpha_max,
        beta_min: args.beta_min,
        beta_max: args.beta_max,
    };
    th.validate()?;
    let stats = match (&args.masks, &args.flows, args.area, args.flow) {
        (Some(m), Some(f), _, _) => PairStats {
            area_ratio: area_ratio(&load_mask_sequence(m)?),
            flow_mag: flow_magnitude_stats(&load_flow_sequence(f)?)?.mean_magnitude,
        },
        (_, _, Some(area_ratio), Some(flow_mag)) => PairStats { area_ratio, flow_mag },
        _ => return Err(Failure::Validation("give --masks and --flows, or --area and --flow".into())),
    };
    if !stats.is_finite() {
        return Err(Failure::Validation("statistics must be finite".into()));
    }
    print_json(&keep(&stats, &th));
    Ok(())
}

fn dmp(cmd: DmpCmd) -> Outcome {
    match cmd {
        DmpCmd::Train {
            out,
            config,
            steps,
            lr,
            seed,
        } => {
            let mut cfg = match config {
                Some(p) => {
                    let text = fs::read_to_string(&p).map_err(|e| Failure::Stage(format!("{}: {e}", p.display())))?;
                    serde_json::from_str(&text).map_err(|e| Failure::Validation(format!("{}: {e}", p.display())))?
                }
                None => ReferenceConfig::default(),
            };
            cfg.train.steps = steps.unwrap_or(cfg.train.steps);
            cfg.train.learning_rate = lr.unwrap_or(cfg.train.learning_rate);
            cfg.train.seed = seed.unwrap_or(cfg.train.seed);
            let report = run_reference(&cfg)?;
            fs::create_dir_all(&out).map_err(|e| Failure::Stage(format!("{}: {e}", out.display())))?;
            save_params(&out.join("params.bin"), &report.outcome.params)?;
            write_loss_curve(&out.join("loss_curve.csv"), &report.outcome.curve)?;
            let summary = serde_json::json!({
                "config": cfg,
                "initial_loss": report.outcome.initial_total(),
                "final_loss": report.outcome.tail_total(cfg.train.tail_window),
                "reduction": report.reduction,
                "mask_iou": report.mask_iou,
            });
            let text = serde_json::to_string_pretty(&summary).expect("summary serializes");
            fs::write(out.join("summary.json"), &text).map_err(|e| Failure::Stage(e.to_string()))?;
            println!("{text}");
            Ok(())
        }
        DmpCmd::Gradcheck {
            seeds,
            fd_step,
            tolerance,
        } => {
            let mut worst: f64 = 0.0;
            for seed in 0..seeds {
                let r = toy_grad_check(seed, &LossWeights::default(), fd_step)?;
                for g in &r.groups {
                    println!("seed {seed} {:<12} {:>6} params  max rel err {:.3e}", g.name, g.params, g.max_rel_error);
                }
                worst = worst.max(r.max_rel_error);
            }
            println!("worst {worst:.3e} (tolerance {tolerance:e})");
            if worst <= tolerance {
                Ok(())
            } else {
                Err(Failure::Validation(format!("gradient error {worst:e} above {tolerance:e}")))
            }
        }
    }
}

fn forward_fields(path: &Path) -> Result<Vec<FlowField>, Failure> {
    if path.is_dir() {
        Ok(load_flow_sequence(path)?.forward().to_vec())
    } else {
        Ok(vec![read_flo(path)?])
    }
}

fn eval(cmd: EvalCmd) -> Outcome {
    let mut w = csv::Writer::from_writer(std::io::stdout());
    let csv_err = |e: csv::Error| Failure::Stage(e.to_string());
    match cmd {
        EvalCmd::Iou { pred, reference } => {
            let report = temporal_iou(&load_mask_sequence(&pred)?, &load_mask_sequence(&reference)?)?;
            w.write_record(["frame", "iou"]).map_err(csv_err)?;
            for (i, v) in report.per_frame.iter().enumerate() {
                w.write_record([(i + 1).to_string(), v.to_string()]).map_err(csv_err)?;
            }
            w.write_record(["mean".to_string(), report.mean.to_string()]).map_err(csv_err)?;
        }
        EvalCmd::Epe { flow, truth } => {
            let (a, b) = (forward_fields(&flow)?, forward_fields(&truth)?);
            if a.len() != b.len() {
                return Err(Failure::Validation(format!("{} fields vs {} truth fields", a.len(), b.len())));
            }
            w.write_record(["frame", "mean_epe", "max_epe"]).map_err(csv_err)?;
            for (i, (f, t)) in a.iter().zip(&b).enumerate() {
                let r = endpoint_error(f, t)?;
                w.write_record([(i + 1).to_string(), r.mean.to_string(), r.max.to_string()]).map_err(csv_err)?;
            }
        }
    }
    w.flush().map_err(|e| Failure::Stage(e.to_string()))
}

fn mock(cmd: MockCmd) -> Outcome {
    match cmd {
        MockCmd::I2v {
            input,
            out,
            frames,
            shift,
            fps,
            ..
        } => mock_i2v(&input, &out, frames, shift, fps)?,
        MockCmd::Segment { input, out, .. } => mock_segment(&input, &out)?,
        MockCmd::Inpaint { input, mask, out, .. } => mock_inpaint(&input, &mask, &out)?,
    }
    Ok(())
}

fn dispatch(command: Command) -> Outcome {
    match command {
        Command::Pipeline(c) => pipeline(c),
        Command::Flow(c) => flow(c),
        Command::Mask(c) => mask(c),
        Command::Filter(a) => filter(a),
        Command::Render(RenderCmd::Overlay {
            frames,
            masks,
            out,
            alpha,
        }) => Ok(render_overlay(&load_video(&frames)?, &load_mask_sequence(&masks)?, alpha, &out)?),
        Command::Dmp(c) => dmp(c),
        Command::Eval(c) => eval(c),
        Command::Mock(c) => mock(c),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (Failure::Validation(msg) | Failure::Stage(msg)) = &f;
            eprintln!("maskflow: {msg}");
            ExitCode::from(f.code())
        }
    }
}
