//! `motionzero`: plan, generate, edit, evaluate and draw skeleton videos.
//!
//! Exit codes: 0 success, 1 usage or configuration, 2 backend unreachable or
//! failing, 3 any other stage failure.

use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use motionzero::io;
use motionzero::pipeline::{
    evaluate_run, plan_only, run_edit, run_generation, skeleton, write_skeleton, EditTarget, PipelineError, PlanSource,
};
use motionzero::planner::{fallback_skeleton_plan, parse_skeleton_plan, skeleton_with_llm, HttpProvider, Lexicon, LlmProvider, ReplayProvider};
use motionzero::{BackendKind, LlmKind, MotionPlan, PipelineConfig};

#[derive(Parser)]
#[command(name = "motionzero", version, about = "Prompt-driven motion control for text-to-video")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Turn a prompt into a motion plan and print it as JSON.
    Plan(PlanArgs),
    /// Generate a video from a prompt.
    Generate(GenerateArgs),
    /// Regenerate the foreground or background of an earlier run.
    Edit(EditArgs),
    /// Re-score a run directory.
    Eval(EvalArgs),
    /// Draw a stick-figure video.
    Skeleton(SkeletonArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Toy,
    Bridge,
}

#[derive(Clone, Copy, ValueEnum)]
enum LlmArg {
    Replay,
    Http,
    Fallback,
}

#[derive(Args)]
struct PlannerArgs {
    /// Where the plan comes from.
    #[arg(long, value_enum, default_value = "fallback")]
    llm: LlmArg,
    /// Recorded LLM exchanges for `--llm replay`.
    #[arg(long)]
    transcript: Option<PathBuf>,
    /// Chat-completions endpoint for `--llm http`.
    #[arg(long)]
    llm_endpoint: Option<String>,
    #[arg(long, default_value = "gpt-4")]
    llm_model: String,
    /// Extra LLM attempts when an answer does not parse.
    #[arg(long, default_value_t = 2)]
    retries: usize,
    /// Verb-phrase lexicon for `--llm fallback` (JSON).
    #[arg(long)]
    lexicon: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, default_value_t = 8)]
    frames: usize,
    /// Image side in pixels.
    #[arg(long, default_value_t = 512)]
    size: u32,
    /// Cells moved per frame on the latent grid.
    #[arg(long, default_value_t = 4)]
    sigma: u32,
    /// IoU threshold below which the attention anchor advances.
    #[arg(long, default_value_t = 0.6)]
    gamma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "toy")]
    backend: BackendArg,
    #[arg(long)]
    bridge_url: Option<String>,
    /// Also write an animated GIF.
    #[arg(long)]
    gif: bool,
}

impl RunArgs {
    fn config(&self, llm: Option<LlmArg>) -> PipelineConfig {
        PipelineConfig {
            frame_count: self.frames,
            image_size: self.size,
            sigma: self.sigma,
            gamma: self.gamma,
            seed: self.seed,
            backend: match self.backend {
                BackendArg::Toy => BackendKind::Toy,
                BackendArg::Bridge => BackendKind::Bridge,
            },
            bridge_url: self.bridge_url.clone(),
            llm: match llm {
                Some(LlmArg::Replay) => LlmKind::Replay,
                Some(LlmArg::Http) => LlmKind::Http,
                _ => LlmKind::Fallback,
            },
            ..PipelineConfig::default()
        }
    }
}

#[derive(Args)]
struct PlanArgs {
    #[arg(long)]
    prompt: String,
    #[arg(long, default_value_t = 8)]
    frames: usize,
    /// Keep this character still and move everything else the other way.
    #[arg(long)]
    camera: Option<String>,
    /// Prompts separated by `||`, each covering an equal share of frames.
    #[arg(long)]
    slices: Option<String>,
    #[command(flatten)]
    planner: PlannerArgs,
    /// Write the plan here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, default_value = "")]
    prompt: String,
    #[command(flatten)]
    run: RunArgs,
    #[command(flatten)]
    planner: PlannerArgs,
    /// Use this plan JSON instead of planning.
    #[arg(long)]
    plan: Option<PathBuf>,
    /// Keep this character still and move everything else the other way.
    #[arg(long)]
    camera: Option<String>,
    /// Prompts separated by `||`, each covering an equal share of frames.
    #[arg(long)]
    slices: Option<String>,
    /// Run every seed in `a..b` (inclusive) into `<out>/seed_<n>`.
    #[arg(long, value_parser = parse_seeds)]
    seeds: Option<RangeInclusive<u64>>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct EditLayer {
    /// New prompt for the moving characters.
    #[arg(long)]
    foreground: Option<String>,
    /// New prompt for the scene behind them.
    #[arg(long)]
    background: Option<String>,
}

#[derive(Args)]
struct EditArgs {
    /// Run directory to edit.
    #[arg(long)]
    base: PathBuf,
    #[command(flatten)]
    layer: EditLayer,
    #[command(flatten)]
    run: RunArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    run: PathBuf,
    /// Score against this plan instead of the run's own.
    #[arg(long)]
    plan: Option<PathBuf>,
    #[arg(long, default_value_t = 4)]
    sigma: u32,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SkeletonArgs {
    #[arg(long)]
    prompt: String,
    #[arg(long, default_value_t = 8)]
    frames: usize,
    /// Canvas side in pixels.
    #[arg(long, default_value_t = 512)]
    size: u32,
    /// Pixels moved per frame.
    #[arg(long, default_value_t = 16)]
    sigma: u32,
    /// `Frame k: node: direction` text to use instead of planning.
    #[arg(long)]
    plan: Option<PathBuf>,
    #[command(flatten)]
    planner: PlannerArgs,
    #[arg(long)]
    gif: bool,
    #[arg(long)]
    out: PathBuf,
}

fn parse_seeds(s: &str) -> Result<RangeInclusive<u64>, String> {
    let (a, b) = s.split_once("..").ok_or("expected a..b")?;
    let a: u64 = a.trim().parse().map_err(|e| format!("seed `{a}`: {e}"))?;
    let b: u64 = b.trim().parse().map_err(|e| format!("seed `{b}`: {e}"))?;
    if a > b {
        return Err(format!("empty seed range {a}..{b}"));
    }
    Ok(a..=b)
}

fn split_slices(s: &Option<String>) -> Option<Vec<String>> {
    s.as_ref()
        .map(|s| s.split("||").map(|p| p.trim().to_string()).collect())
}

fn usage(msg: impl Into<String>) -> PipelineError {
    PipelineError::Usage(msg.into())
}

fn provider(args: &PlannerArgs) -> Result<Option<Box<dyn LlmProvider>>, PipelineError> {
    match args.llm {
        LlmArg::Fallback => Ok(None),
        LlmArg::Replay => {
            let path = args.transcript.as_ref().ok_or_else(|| usage("--llm replay needs --transcript"))?;
            let replay = ReplayProvider::load(path).map_err(|e| usage(e.to_string()))?;
            Ok(Some(Box::new(replay)))
        }
        LlmArg::Http => {
            let endpoint = args.llm_endpoint.as_ref().ok_or_else(|| usage("--llm http needs --llm-endpoint"))?;
            let mut http = HttpProvider::new(endpoint.clone(), args.llm_model.clone());
            http.timeout = Duration::from_secs(60);
            Ok(Some(Box::new(http)))
        }
    }
}

fn lexicon(args: &PlannerArgs) -> Result<Lexicon, PipelineError> {
    match &args.lexicon {
        None => Ok(Lexicon::default()),
        Some(path) => {
            let text = io::read_text(path)?;
            Lexicon::from_json(&text).map_err(|e| usage(format!("{}: {e}", path.display())))
        }
    }
}

fn plan_source<'a>(args: &PlannerArgs, llm: &'a Option<Box<dyn LlmProvider>>) -> Result<PlanSource<'a>, PipelineError> {
    Ok(match llm {
        Some(p) => PlanSource::Llm {
            provider: p.as_ref(),
            retries: args.retries,
        },
        None => PlanSource::Fallback(lexicon(args)?),
    })
}

fn read_plan(path: &Path) -> Result<MotionPlan, PipelineError> {
    MotionPlan::from_json(&io::read_text(path)?).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), PipelineError> {
    match out {
        Some(p) => Ok(io::write_bytes(p, text.as_bytes())?),
        None => {
            use std::io::Write;
            // A closed pipe (`| head`) is not an error.
            let _ = writeln!(std::io::stdout(), "{text}");
            Ok(())
        }
    }
}

fn warn_all(warnings: &[String]) {
    for w in warnings {
        eprintln!("warning: {w}");
    }
}

fn summary(out: &Path, accuracy: Option<f64>) {
    match accuracy {
        Some(a) => println!("{}: motion accuracy {a:.3}", out.display()),
        None => println!("{}: no moving characters to score", out.display()),
    }
}

fn cmd_plan(args: PlanArgs) -> Result<(), PipelineError> {
    let config = PipelineConfig {
        frame_count: args.frames,
        camera: args.camera.clone(),
        slices: split_slices(&args.slices),
        ..PipelineConfig::default()
    };
    let llm = provider(&args.planner)?;
    let source = plan_source(&args.planner, &llm)?;
    let (plan, warnings) = plan_only(&config, &args.prompt, &source)?;
    warn_all(&warnings);
    emit(args.out.as_deref(), &plan.to_json())
}

fn cmd_generate(args: GenerateArgs) -> Result<(), PipelineError> {
    let mut config = args.run.config(Some(args.planner.llm));
    config.camera = args.camera.clone();
    config.slices = split_slices(&args.slices);
    let llm = provider(&args.planner)?;
    let source = match &args.plan {
        Some(p) => PlanSource::Fixed(read_plan(p)?),
        None => plan_source(&args.planner, &llm)?,
    };
    let Some(seeds) = args.seeds.clone() else {
        let gen = run_generation(&config, &args.prompt, &source, &args.out, args.run.gif)?;
        warn_all(&gen.report.warnings);
        summary(&args.out, gen.report.mean_accuracy);
        return Ok(());
    };
    std::fs::create_dir_all(&args.out).map_err(|e| {
        PipelineError::Io(io::IoError::Fs {
            path: args.out.clone(),
            source: e,
        })
    })?;
    let results: Vec<(u64, Result<Option<f64>, PipelineError>)> = seeds
        .into_par_iter()
        .map(|seed| {
            let cfg = PipelineConfig { seed, ..config.clone() };
            let out = args.out.join(format!("seed_{seed}"));
            let r = run_generation(&cfg, &args.prompt, &source, &out, args.run.gif).map(|g| g.report.mean_accuracy);
            (seed, r)
        })
        .collect();
    let mut first_err = None;
    for (seed, r) in results {
        let out = args.out.join(format!("seed_{seed}"));
        match r {
            Ok(acc) => summary(&out, acc),
            Err(e) => {
                eprintln!("seed {seed}: {e}");
                first_err.get_or_insert(e);
            }
        }
    }
    first_err.map_or(Ok(()), Err)
}

fn cmd_edit(args: EditArgs) -> Result<(), PipelineError> {
    let config = args.run.config(None);
    let target = match (args.layer.foreground, args.layer.background) {
        (Some(p), None) => EditTarget::Foreground(p),
        (None, Some(p)) => EditTarget::Background(p),
        _ => return Err(usage("pass exactly one of --foreground or --background")),
    };
    let result = run_edit(&config, &args.base, &target, &args.out, args.run.gif)?;
    warn_all(&result.report.warnings);
    summary(&args.out, result.report.mean_accuracy);
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<(), PipelineError> {
    let plan = args.plan.as_deref().map(read_plan).transpose()?;
    let report = evaluate_run(&args.run, plan.as_ref(), args.sigma)?;
    emit(args.out.as_deref(), &report.to_json())
}

fn cmd_skeleton(args: SkeletonArgs) -> Result<(), PipelineError> {
    if args.frames < 2 {
        return Err(usage("--frames must be at least 2"));
    }
    let llm = provider(&args.planner)?;
    let (plan, warnings) = match (&args.plan, &llm) {
        (Some(path), _) => {
            let text = io::read_text(path)?;
            let plan = parse_skeleton_plan(&text, args.frames).map_err(|e| usage(format!("{}: {e}", path.display())))?;
            (plan, Vec::new())
        }
        (None, Some(p)) => {
            let plan = skeleton_with_llm(p.as_ref(), &args.prompt, args.frames, args.planner.retries)
                .map_err(|e| PipelineError::Stage {
                    stage: "planner",
                    message: e.to_string(),
                })?;
            (plan, Vec::new())
        }
        (None, None) => fallback_skeleton_plan(&args.prompt, args.frames).map_err(|e| usage(e.to_string()))?,
    };
    let run = skeleton(plan, args.size, args.sigma, warnings)?;
    warn_all(&run.warnings);
    write_skeleton(&run, &args.out, args.gif)?;
    println!("{}: {} skeleton frames", args.out.display(), run.frames.len());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Plan(a) => cmd_plan(a),
        Command::Generate(a) => cmd_generate(a),
        Command::Edit(a) => cmd_edit(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Skeleton(a) => cmd_skeleton(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
