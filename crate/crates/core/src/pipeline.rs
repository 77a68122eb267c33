//! End-to-end runs: plan, first frame, segment, warp at `t₁`, settle,
//! denoise with anchored attention, decode, evaluate, write.

use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::bridge::BridgeClient;
use crate::config::{BackendKind, ConfigError, PipelineConfig};
use crate::diffusion::{
    ddim_denoise, generate_first_frame, replicate_initial_latents, BackendError, DenoiserBackend, DiffusionError,
    DiffusionSchedule, NoiseSource, Sampler, ToyBackend, VideoDenoiser,
};
use crate::direction::Direction;
use crate::evaluator::{emit_report, score_transitions, track_trajectory, EvalError, MotionScore, Report, Trajectory};
use crate::frame::FrameImage;
use crate::io::{self, IoError, Staging};
use crate::latent::LatentGrid;
use crate::mask::{Mask, Resolution};
use crate::motion_plan::{CharacterPlan, MotionPlan, PlanError};
use crate::planner::{
    fallback_plan, moving_objects, plan_with_llm, resolve_heading, HeadingError, HeadingHint, HeadingProvider,
    Lexicon, LlmProvider, PlannerError, ProviderError, ShapeHeadingProvider,
};
use crate::scene::compile_scene;
use crate::skeleton::{integrate_skeleton, render_skeleton_frames, Pose, SkeletonPlan};
use crate::scheduler::{anchor_schedule, slice_schedule, SliceSchedule};
use crate::segmenter::{segment, to_image_resolution, to_latent_resolution, SegmentError, SegmentationRequest, Segmenter, ToySegmenter};
use crate::warp::{apply_camera_mode, compose_next_frame, fuse_foreground_background};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("invalid configuration: {0}")]
    Config(#[from] ConfigError),
    #[error("{stage}: {source}")]
    Backend {
        stage: &'static str,
        #[source]
        source: BackendError,
    },
    #[error("{stage}: {message}")]
    Stage { stage: &'static str, message: String },
    #[error("state: {0}")]
    State(String),
    #[error(transparent)]
    Io(#[from] IoError),
}

impl PipelineError {
    /// 0 success, 1 usage, 2 backend, 3 stage or state failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Usage(_) | PipelineError::Config(_) => 1,
            PipelineError::Backend { .. } => 2,
            PipelineError::Stage { .. } | PipelineError::State(_) | PipelineError::Io(_) => 3,
        }
    }

    fn stage(stage: &'static str, err: impl std::fmt::Display) -> PipelineError {
        PipelineError::Stage {
            stage,
            message: err.to_string(),
        }
    }

    fn diffusion(stage: &'static str, err: DiffusionError) -> PipelineError {
        match err {
            DiffusionError::Backend(source) => PipelineError::Backend { stage, source },
            other => PipelineError::stage(stage, other),
        }
    }

    fn planner(err: PlannerError) -> PipelineError {
        match err {
            PlannerError::Provider(
                e @ (ProviderError::Unreachable { .. } | ProviderError::Status { .. } | ProviderError::Protocol { .. }),
            ) => PipelineError::Backend {
                stage: "planner",
                source: BackendError::Unreachable {
                    endpoint: "LLM".into(),
                    cause: e.to_string(),
                },
            },
            other => PipelineError::stage("planner", other),
        }
    }
}

/// Where the motion plan comes from.
pub enum PlanSource<'a> {
    Fixed(MotionPlan),
    Fallback(Lexicon),
    Llm {
        provider: &'a dyn LlmProvider,
        retries: usize,
    },
}

impl PlanSource<'_> {
    fn label(&self) -> &'static str {
        match self {
            PlanSource::Fixed(_) => "fixed",
            PlanSource::Fallback(_) => "fallback",
            PlanSource::Llm { .. } => "llm",
        }
    }
}

/// Denoiser, segmenter and heading provider for one run.
pub enum Services {
    Toy { backend: ToyBackend, segmenter: ToySegmenter },
    Bridge(BridgeClient),
}

impl Services {
    /// Toy services compile `first_prompt` into the scene the segmenter
    /// keys against; bridge services probe the bridge's health endpoint.
    pub fn connect(config: &PipelineConfig, first_prompt: &str) -> Result<Services, PipelineError> {
        match config.backend {
            BackendKind::Toy => {
                let scene = compile_scene(first_prompt, config.latent_size()).map_err(|e| PipelineError::Backend {
                    stage: "first frame",
                    source: e.into(),
                })?;
                Ok(Services::Toy {
                    backend: ToyBackend::new(config.latent_factor as usize),
                    segmenter: ToySegmenter::new(scene),
                })
            }
            BackendKind::Bridge => {
                let url = config.bridge_url.as_deref().ok_or(ConfigError::MissingBridgeUrl)?;
                let client = BridgeClient::connect(url)
                    .and_then(|c| c.check_schedule(&config.schedule).map(|_| c))
                    .map_err(|source| PipelineError::Backend { stage: "bridge", source })?;
                Ok(Services::Bridge(client))
            }
        }
    }

    pub fn denoiser(&self) -> &dyn DenoiserBackend {
        match self {
            Services::Toy { backend, .. } => backend,
            Services::Bridge(c) => c,
        }
    }

    pub fn segmenter(&self) -> &dyn Segmenter {
        match self {
            Services::Toy { segmenter, .. } => segmenter,
            Services::Bridge(c) => c,
        }
    }

    fn heading(&self) -> Box<dyn HeadingProvider + '_> {
        match self {
            Services::Toy { segmenter, .. } => Box::new(ShapeHeadingProvider::new(segmenter.clone())),
            Services::Bridge(c) => Box::new(c.clone()),
        }
    }
}

/// Everything a generation produced, in memory.
#[derive(Debug, Clone)]
pub struct Generation {
    pub plan: MotionPlan,
    pub slices: SliceSchedule,
    pub first_frame: FrameImage,
    /// Composed latents at `t₁`, before settling.
    pub latents_t1: Vec<LatentGrid>,
    /// `masks[k][i]`: latent-resolution mask of character `i` in frame `k`.
    pub masks: Vec<Vec<Mask>>,
    pub anchors: Vec<usize>,
    pub frames: Vec<FrameImage>,
    pub report: Report,
    pub factor: usize,
}

fn conditions_for(config: &PipelineConfig, prompt: &str) -> Result<SliceSchedule, PipelineError> {
    match &config.slices {
        Some(prompts) => slice_schedule(prompts, config.frame_count).map_err(|e| PipelineError::Usage(e.to_string())),
        None => Ok(SliceSchedule::single(prompt, config.frame_count)),
    }
}

/// Plans one prompt for `frames` frames.
fn plan_one(
    source: &PlanSource<'_>,
    prompt: &str,
    frames: usize,
    heading: Option<&HeadingHint>,
    warnings: &mut Vec<String>,
) -> Result<MotionPlan, PipelineError> {
    match source {
        PlanSource::Fixed(plan) => Ok(plan.clone()),
        PlanSource::Fallback(lexicon) => {
            let out = fallback_plan(prompt, frames, lexicon).map_err(PipelineError::planner)?;
            warnings.extend(out.warnings);
            Ok(out.plan)
        }
        PlanSource::Llm { provider, retries } => Ok(plan_with_llm(*provider, prompt, frames, heading, *retries)
            .map_err(PipelineError::planner)?
            .plan),
    }
}

/// Joins per-slice plans; slice `i` covers transitions `start+1 ..= end`
/// (the last slice stops at `F − 1`). Characters absent from a slice hold
/// still there.
fn merge_slice_plans(plans: &[(usize, MotionPlan)], frame_count: usize) -> Result<MotionPlan, PlanError> {
    let mut characters: Vec<CharacterPlan> = Vec::new();
    for (_, plan) in plans {
        for c in plan.characters() {
            if !characters.iter().any(|x| x.name == c.name) {
                characters.push(CharacterPlan::new(c.name.clone(), c.phrase.clone(), vec![Direction::Motionless; frame_count - 1]));
            }
        }
    }
    for (start, plan) in plans {
        for c in plan.characters() {
            let target = characters.iter_mut().find(|x| x.name == c.name).expect("collected above");
            target.directions[*start..*start + c.directions.len()].copy_from_slice(&c.directions);
        }
    }
    MotionPlan::new(frame_count, characters)
}

fn build_plan(
    config: &PipelineConfig,
    source: &PlanSource<'_>,
    slices: &SliceSchedule,
    heading: Option<HeadingHint>,
    warnings: &mut Vec<String>,
) -> Result<MotionPlan, PipelineError> {
    let f = config.frame_count;
    let plan = if let PlanSource::Fixed(plan) = source {
        if plan.frame_count() != f {
            return Err(PipelineError::Usage(format!(
                "plan covers {} frames, run has {f}",
                plan.frame_count()
            )));
        }
        plan.clone()
    } else {
        if slices.slices().len() == 1 {
            plan_one(source, &slices.slices()[0].prompt, f, heading.as_ref(), warnings)?
        } else {
            let last = slices.slices().len() - 1;
            let mut parts = Vec::new();
            for (i, s) in slices.slices().iter().enumerate() {
                let frames = s.end - s.start + usize::from(i < last);
                if frames < 2 {
                    continue;
                }
                let hint = if i == 0 { heading.as_ref() } else { None };
                parts.push((s.start, plan_one(source, &s.prompt, frames, hint, warnings)?));
            }
            merge_slice_plans(&parts, f).map_err(|e| PipelineError::stage("planner", e))?
        }
    };
    let plan = plan.fold_motionless();
    match &config.camera {
        Some(hero) => apply_camera_mode(&plan, hero).map_err(|e| PipelineError::Usage(format!("camera: {e}"))),
        None => Ok(plan),
    }
}

/// Plans `prompt` (or the configured slices) without a first frame, so no
/// heading hint is available. Returns the plan and planner warnings.
pub fn plan_only(
    config: &PipelineConfig,
    prompt: &str,
    source: &PlanSource<'_>,
) -> Result<(MotionPlan, Vec<String>), PipelineError> {
    config.validate()?;
    if prompt.trim().is_empty() && config.slices.is_none() {
        return Err(PipelineError::Usage("prompt must not be empty".into()));
    }
    let slices = conditions_for(config, prompt)?;
    let mut warnings = Vec::new();
    let plan = build_plan(config, source, &slices, None, &mut warnings)?;
    Ok((plan, warnings))
}

/// Heading of the first listed object that has one; provider failures
/// degrade to a prompt-only plan.
fn first_heading(
    frame: &FrameImage,
    objects: &[String],
    provider: &dyn HeadingProvider,
    warnings: &mut Vec<String>,
) -> Option<HeadingHint> {
    for object in objects {
        match resolve_heading(frame, object, provider) {
            Ok(h) => return Some(h),
            Err(HeadingError::NotFound(_)) => {}
            Err(HeadingError::Backend(e)) => {
                warnings.push(format!("heading provider failed ({e}); planning from the prompt only"));
                return None;
            }
        }
    }
    None
}

/// Segments every plan character in the first frame; characters that cannot
/// be found are dropped with a warning.
fn segment_characters(
    plan: MotionPlan,
    frame: &FrameImage,
    segmenter: &dyn Segmenter,
    config: &PipelineConfig,
    factor: usize,
    warnings: &mut Vec<String>,
) -> Result<(MotionPlan, Vec<Mask>), PipelineError> {
    let mut kept = Vec::new();
    let mut masks = Vec::new();
    for c in plan.characters() {
        let req = SegmentationRequest {
            confidence: config.segmentation_confidence,
            ..SegmentationRequest::new(frame, &c.phrase)
        };
        match segment(&req, segmenter) {
            Ok(m) => {
                masks.push(to_latent_resolution(&m, factor).map_err(|e| PipelineError::stage("segment", e))?);
                kept.push(c.clone());
            }
            Err(SegmentError::NoRegion { phrase }) => {
                warnings.push(format!("`{}` ({phrase}) not found in the first frame; left unwarped", c.name));
            }
            Err(SegmentError::Backend(source)) => return Err(PipelineError::Backend { stage: "segment", source }),
            Err(e) => return Err(PipelineError::stage("segment", e)),
        }
    }
    let plan = MotionPlan::new(plan.frame_count(), kept).map_err(|e| PipelineError::stage("segment", e))?;
    Ok((plan, masks))
}

/// Warps frame 0 through the plan, returning per-frame latents and masks.
fn compose_chain(
    plan: &MotionPlan,
    x_t1: &LatentGrid,
    masks0: &[Mask],
    sigma: u32,
    warnings: &mut Vec<String>,
) -> Result<(Vec<LatentGrid>, Vec<Vec<Mask>>), PipelineError> {
    let f = plan.frame_count();
    let mut latents = replicate_initial_latents(x_t1, f).map_err(|e| PipelineError::diffusion("replicate", e))?;
    let mut masks = vec![masks0.to_vec()];
    for k in 1..f {
        let deltas: Vec<_> = plan.characters().iter().map(|c| c.delta_into(k, sigma)).collect();
        let comp = compose_next_frame(&latents[k - 1], &masks[k - 1], &deltas, x_t1, masks0)
            .map_err(|e| PipelineError::stage("warp", e))?;
        for i in comp.exited {
            warnings.push(format!("`{}` left the frame at frame {k}", plan.characters()[i].name));
        }
        latents[k] = comp.latent;
        masks.push(comp.masks);
    }
    Ok((latents, masks))
}

/// Settles `t₁ → t₂` with DDPM, then DDIM `t₂ → 0`, both with anchored
/// attention, and decodes.
fn settle_and_decode(
    latents_t1: &[LatentGrid],
    anchors: &[usize],
    conditions: &[String],
    backend: &dyn DenoiserBackend,
    sched: &DiffusionSchedule,
    seed: u64,
) -> Result<Vec<FrameImage>, PipelineError> {
    let video = VideoDenoiser {
        backend,
        schedule: sched,
        conditions,
        anchors: Some(anchors),
        noise: NoiseSource::new(seed),
    };
    let settled = video
        .run(latents_t1, sched.t1(), sched.t2(), Sampler::Ddpm)
        .map_err(|e| PipelineError::diffusion("settle", e))?;
    let clean = video
        .run(&settled, sched.t2(), 0, Sampler::Ddim)
        .map_err(|e| PipelineError::diffusion("denoise", e))?;
    clean
        .iter()
        .map(|l| backend.decode(l).map_err(|source| PipelineError::Backend { stage: "decode", source }))
        .collect()
}

/// Scores every plan character on its mask sequence.
pub fn evaluate(
    plan: &MotionPlan,
    masks: &[Vec<Mask>],
    sigma: u32,
) -> Result<Vec<(Trajectory, MotionScore)>, EvalError> {
    let mut out = Vec::new();
    for (i, c) in plan.characters().iter().enumerate() {
        let seq: Vec<Mask> = masks.iter().map(|m| m[i].clone()).collect();
        let traj = track_trajectory(&seq, &c.name)?;
        let score = score_transitions(&traj, &c.directions, sigma)?;
        out.push((traj, score));
    }
    Ok(out)
}

#[derive(Serialize)]
struct ConfigEcho<'a> {
    prompt: &'a str,
    planner: &'a str,
    pipeline: &'a PipelineConfig,
}

/// Runs a generation in memory.
pub fn generate(config: &PipelineConfig, prompt: &str, source: &PlanSource<'_>) -> Result<Generation, PipelineError> {
    config.validate()?;
    if prompt.trim().is_empty() && config.slices.is_none() {
        return Err(PipelineError::Usage("prompt must not be empty".into()));
    }
    let sched = config.schedule.build().map_err(ConfigError::from)?;
    let slices = conditions_for(config, prompt)?;
    let first_prompt = slices.slices()[0].prompt.clone();
    let services = Services::connect(config, &first_prompt)?;
    let backend = services.denoiser();
    let mut warnings = Vec::new();

    // The moving-objects command only needs the prompt; its answer names the
    // characters whose heading is read off the first frame.
    let objects = match source {
        PlanSource::Llm { provider, .. } => moving_objects(*provider, &first_prompt).map_err(PipelineError::planner)?,
        _ => Vec::new(),
    };

    let first = generate_first_frame(&first_prompt, config.seed, backend, &sched, config.image_size)
        .map_err(|e| PipelineError::diffusion("first frame", e))?;
    let factor = first.image.width() as usize / first.latent.width();

    let heading = if objects.is_empty() {
        None
    } else {
        first_heading(&first.image, &objects, &*services.heading(), &mut warnings)
    };
    let plan = build_plan(config, source, &slices, heading, &mut warnings)?;
    let (plan, masks0) = segment_characters(plan, &first.image, services.segmenter(), config, factor, &mut warnings)?;

    let x_t1 = ddim_denoise(&first.initial_noise, sched.steps(), sched.t1(), backend, &first_prompt, &sched, 0)
        .map_err(|e| PipelineError::diffusion("invert", e))?;
    let (latents_t1, masks) = compose_chain(&plan, &x_t1, &masks0, config.sigma, &mut warnings)?;

    let anchors = anchor_schedule(&masks, config.gamma, &slices).map_err(|e| PipelineError::stage("anchors", e))?;
    let frames = settle_and_decode(&latents_t1, &anchors, &slices.conditions(), backend, &sched, config.seed)?;

    let scored = evaluate(&plan, &masks, config.sigma).map_err(|e| PipelineError::stage("evaluate", e))?;
    let echo = serde_json::to_value(ConfigEcho {
        prompt,
        planner: source.label(),
        pipeline: config,
    })
    .expect("config serialises");
    let report = emit_report(&scored, &anchors, slices.slices(), &warnings, echo);
    Ok(Generation {
        plan,
        slices,
        first_frame: first.image,
        latents_t1,
        masks,
        anchors,
        frames,
        report,
        factor,
    })
}

/// Writes a generation through a staging directory.
pub fn write_generation(gen: &Generation, out: &Path, gif: bool) -> Result<PathBuf, PipelineError> {
    let stage = Staging::new(out)?;
    for (k, frame) in gen.frames.iter().enumerate() {
        io::write_frame(&stage.path(&io::frame_file(k)), frame)?;
    }
    for (k, masks) in gen.masks.iter().enumerate() {
        for (c, m) in gen.plan.characters().iter().zip(masks) {
            let png = io::mask_to_png(&to_image_resolution(m, gen.factor));
            io::write_bytes(&stage.path(&io::mask_file(&c.name, k)), &png)?;
        }
    }
    io::write_bytes(&stage.path(io::PLAN_FILE), gen.plan.to_json().as_bytes())?;
    io::write_bytes(&stage.path(io::REPORT_FILE), gen.report.to_json().as_bytes())?;
    io::write_latents(&stage.path(io::LATENTS_T1_FILE), &gen.latents_t1)?;
    if gif {
        io::write_gif(&stage.path(io::GIF_FILE), &gen.frames)?;
    }
    Ok(stage.commit()?)
}

pub fn run_generation(
    config: &PipelineConfig,
    prompt: &str,
    source: &PlanSource<'_>,
    out: &Path,
    gif: bool,
) -> Result<Generation, PipelineError> {
    let gen = generate(config, prompt, source)?;
    write_generation(&gen, out, gif)?;
    Ok(gen)
}

/// Artifacts of an earlier run needed to edit or re-score it.
#[derive(Debug, Clone)]
pub struct SavedRun {
    pub plan: MotionPlan,
    pub latents_t1: Vec<LatentGrid>,
    /// Image-resolution masks, `masks[k][i]`.
    pub masks: Vec<Vec<Mask>>,
}

fn require(path: &Path) -> Result<(), PipelineError> {
    if path.exists() {
        Ok(())
    } else {
        Err(PipelineError::State(format!("missing run artifact {}", path.display())))
    }
}

/// Loads plan and masks, plus `t₁` latents when `with_latents`.
pub fn load_run(dir: &Path, with_latents: bool) -> Result<SavedRun, PipelineError> {
    let plan_path = dir.join(io::PLAN_FILE);
    require(&plan_path)?;
    let plan = MotionPlan::from_json(&io::read_text(&plan_path)?)
        .map_err(|e| PipelineError::State(format!("{}: {e}", plan_path.display())))?;
    let latents_t1 = if with_latents {
        let p = dir.join(io::LATENTS_T1_FILE);
        require(&p)?;
        let l = io::read_latents(&p)?;
        if l.len() != plan.frame_count() {
            return Err(PipelineError::State(format!(
                "{} holds {} frames, plan has {}",
                p.display(),
                l.len(),
                plan.frame_count()
            )));
        }
        l
    } else {
        Vec::new()
    };
    let mut masks = Vec::with_capacity(plan.frame_count());
    for k in 0..plan.frame_count() {
        let mut frame_masks = Vec::new();
        for c in plan.characters() {
            let p = dir.join(io::mask_file(&c.name, k));
            require(&p)?;
            frame_masks.push(io::read_mask(&p)?);
        }
        masks.push(frame_masks);
    }
    Ok(SavedRun { plan, latents_t1, masks })
}

/// Re-scores a saved run, optionally against a different plan.
pub fn evaluate_run(dir: &Path, plan: Option<&MotionPlan>, sigma: u32) -> Result<Report, PipelineError> {
    let run = load_run(dir, false)?;
    let plan = plan.unwrap_or(&run.plan);
    if plan.characters().len() != run.plan.characters().len()
        || plan.characters().iter().zip(run.plan.characters()).any(|(a, b)| a.name != b.name)
        || plan.frame_count() != run.plan.frame_count()
    {
        return Err(PipelineError::Usage("plan does not match the run's characters and frame count".into()));
    }
    let scored = evaluate(plan, &run.masks, sigma).map_err(|e| PipelineError::stage("evaluate", e))?;
    Ok(emit_report(&scored, &[], &[], &[], serde_json::json!({ "run": dir.display().to_string(), "sigma": sigma })))
}

/// Which layer an edit regenerates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EditTarget {
    Foreground(String),
    Background(String),
}

impl EditTarget {
    fn prompt(&self) -> &str {
        match self {
            EditTarget::Foreground(p) | EditTarget::Background(p) => p,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EditResult {
    pub plan: MotionPlan,
    pub latents_t1: Vec<LatentGrid>,
    /// Fusion masks, latent resolution, `masks[k][i]`.
    pub masks: Vec<Vec<Mask>>,
    pub anchors: Vec<usize>,
    pub frames: Vec<FrameImage>,
    pub report: Report,
    pub factor: usize,
}

fn union_all(masks: &[Mask], width: usize, height: usize) -> Result<Mask, PipelineError> {
    let mut acc = Mask::empty(width, height, Resolution::Latent);
    for m in masks {
        acc = acc.union(m).map_err(|e| PipelineError::stage("fuse", e))?;
    }
    Ok(acc)
}

/// Regenerates one layer of a saved run under a new prompt and fuses it
/// with the other layer frame by frame.
///
/// A background edit keeps the saved `t₁` latents inside the saved
/// character masks and fills the rest from the new prompt's first frame. A
/// foreground edit warps the new prompt's characters with the saved plan
/// and pastes them over the saved latents.
pub fn edit(config: &PipelineConfig, base: &Path, target: &EditTarget) -> Result<EditResult, PipelineError> {
    config.validate()?;
    if target.prompt().trim().is_empty() {
        return Err(PipelineError::Usage("edit prompt must not be empty".into()));
    }
    let run = load_run(base, true)?;
    if run.plan.frame_count() != config.frame_count {
        return Err(PipelineError::State(format!(
            "saved run has {} frames, configuration asks for {}",
            run.plan.frame_count(),
            config.frame_count
        )));
    }
    let sched = config.schedule.build().map_err(ConfigError::from)?;
    let prompt = target.prompt();
    let services = Services::connect(config, prompt)?;
    let backend = services.denoiser();
    let mut warnings = Vec::new();

    let first = generate_first_frame(prompt, config.seed, backend, &sched, config.image_size)
        .map_err(|e| PipelineError::diffusion("first frame", e))?;
    let (w, h) = (first.latent.width(), first.latent.height());
    let factor = first.image.width() as usize / w;
    if run.latents_t1[0].shape() != first.latent.shape() {
        return Err(PipelineError::State("saved latents do not match the backend's latent shape".into()));
    }
    let x_t1 = ddim_denoise(&first.initial_noise, sched.steps(), sched.t1(), backend, prompt, &sched, 0)
        .map_err(|e| PipelineError::diffusion("invert", e))?;

    let (plan, masks, fused) = match target {
        EditTarget::Background(_) => {
            let masks: Vec<Vec<Mask>> = run
                .masks
                .iter()
                .map(|frame| {
                    frame
                        .iter()
                        .map(|m| to_latent_resolution(m, factor))
                        .collect::<Result<Vec<_>, _>>()
                })
                .collect::<Result<_, _>>()
                .map_err(|e| PipelineError::State(format!("saved masks: {e}")))?;
            let mut fused = Vec::with_capacity(masks.len());
            for (k, frame_masks) in masks.iter().enumerate() {
                let fg = union_all(frame_masks, w, h)?;
                fused.push(fuse_foreground_background(&run.latents_t1[k], &x_t1, &fg).map_err(|e| PipelineError::stage("fuse", e))?);
            }
            (run.plan.clone(), masks, fused)
        }
        EditTarget::Foreground(_) => {
            let (plan, masks0) =
                segment_characters(run.plan.clone(), &first.image, services.segmenter(), config, factor, &mut warnings)?;
            let (new_latents, masks) = compose_chain(&plan, &x_t1, &masks0, config.sigma, &mut warnings)?;
            let mut fused = Vec::with_capacity(masks.len());
            for (k, frame_masks) in masks.iter().enumerate() {
                let fg = union_all(frame_masks, w, h)?;
                fused.push(fuse_foreground_background(&new_latents[k], &run.latents_t1[k], &fg).map_err(|e| PipelineError::stage("fuse", e))?);
            }
            (plan, masks, fused)
        }
    };

    let slices = SliceSchedule::single(prompt, config.frame_count);
    let anchors = anchor_schedule(&masks, config.gamma, &slices).map_err(|e| PipelineError::stage("anchors", e))?;
    let frames = settle_and_decode(&fused, &anchors, &slices.conditions(), backend, &sched, config.seed)?;
    let scored = evaluate(&plan, &masks, config.sigma).map_err(|e| PipelineError::stage("evaluate", e))?;
    let echo = serde_json::json!({
        "base": base.display().to_string(),
        "edit": match target { EditTarget::Foreground(_) => "foreground", EditTarget::Background(_) => "background" },
        "prompt": prompt,
        "pipeline": config,
    });
    let report = emit_report(&scored, &anchors, slices.slices(), &warnings, echo);
    Ok(EditResult {
        plan,
        latents_t1: fused,
        masks,
        anchors,
        frames,
        report,
        factor,
    })
}

pub fn run_edit(
    config: &PipelineConfig,
    base: &Path,
    target: &EditTarget,
    out: &Path,
    gif: bool,
) -> Result<EditResult, PipelineError> {
    let result = edit(config, base, target)?;
    let gen = Generation {
        plan: result.plan.clone(),
        slices: SliceSchedule::single(target.prompt(), config.frame_count),
        first_frame: result.frames[0].clone(),
        latents_t1: result.latents_t1.clone(),
        masks: result.masks.clone(),
        anchors: result.anchors.clone(),
        frames: result.frames.clone(),
        report: result.report.clone(),
        factor: result.factor,
    };
    write_generation(&gen, out, gif)?;
    Ok(result)
}

/// A rendered stick-figure run.
#[derive(Debug, Clone)]
pub struct SkeletonRun {
    pub plan: SkeletonPlan,
    pub poses: Vec<Pose>,
    pub frames: Vec<FrameImage>,
    pub warnings: Vec<String>,
}

pub const SKELETON_POSES_FILE: &str = "poses.json";

pub fn skeleton_frame_file(k: usize) -> String {
    format!("skeleton_{k:03}.png")
}

/// Integrates a skeleton plan from a standing pose on a `size × size` canvas
/// and renders it.
pub fn skeleton(plan: SkeletonPlan, size: u32, sigma: u32, warnings: Vec<String>) -> Result<SkeletonRun, PipelineError> {
    let poses = integrate_skeleton(&plan, &Pose::standing(size), sigma, size, size)
        .map_err(|e| PipelineError::stage("skeleton", e))?;
    let frames = render_skeleton_frames(&poses, size);
    Ok(SkeletonRun {
        plan,
        poses,
        frames,
        warnings,
    })
}

pub fn write_skeleton(run: &SkeletonRun, out: &Path, gif: bool) -> Result<PathBuf, PipelineError> {
    let stage = Staging::new(out)?;
    for (k, frame) in run.frames.iter().enumerate() {
        io::write_frame(&stage.path(&skeleton_frame_file(k)), frame)?;
    }
    let poses = serde_json::to_string_pretty(&serde_json::json!({
        "poses": run.poses,
        "warnings": run.warnings,
    }))
    .expect("poses serialise");
    io::write_bytes(&stage.path(SKELETON_POSES_FILE), poses.as_bytes())?;
    if gif {
        io::write_gif(&stage.path(io::GIF_FILE), &run.frames)?;
    }
    Ok(stage.commit()?)
}
