//! `dnd`: synthetic data, per-frame depth optimization and evaluation.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use dnd_core::config::{PipelineConfig, CONFIG_ENV};
use dnd_core::eval::{evaluate, SplitReport};
use dnd_core::io::{self, FrameStore};
use dnd_core::numeric::mix_seed;
use dnd_core::optim::{
    check_objective_terms, initialize_depth, optimize_frame, DepthVariable, GradCheckOptions, LossWeights,
};
use dnd_core::synth::{self, generate_scene, lognormal_noise, perturb_pose, BundleOptions, SceneConfig, SparsifyMode};

#[derive(Parser)]
#[command(name = "dnd", version, about = "Dense depth for crowded dynamic scenes from images, sparse depth and poses")]
struct Cli {
    /// Config file of `key = value` lines; flags override its values
    #[arg(long, global = true, env = CONFIG_ENV, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Override any config key, e.g. `--set lambda_flow_shape=0` (repeatable)
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,

    /// More log output (-v info, -vv debug, -vvv trace)
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a synthetic room with moving pedestrians into a frame directory
    Synth(SynthArgs),
    /// Pick sparse depth points from each frame's ground-truth depth
    Sparsify(SparsifyArgs),
    /// Rotate every pose in a pose file by a fixed angle about random axes
    PerturbPose(PerturbArgs),
    /// Optimize the dense depth of one frame
    Optimize(OptimizeArgs),
    /// Print depth metrics over the whole image (F+B) and pedestrians (F)
    Eval(EvalArgs),
    /// Check analytic loss gradients against finite differences
    Gradcheck(GradcheckArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Output frame directory [default: frames_dir from the config, `frames`]
    #[arg(long)]
    out: Option<PathBuf>,
    /// Number of frames
    #[arg(long, default_value_t = 3)]
    frames: usize,
    /// Image width in pixels (the field of view is fixed)
    #[arg(long, default_value_t = 64)]
    width: usize,
    /// Image height in pixels
    #[arg(long, default_value_t = 48)]
    height: usize,
    /// Texture seed [default: 0]
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Feature,
    Uniform,
}

#[derive(Args)]
struct SparsifyArgs {
    /// Frame directory [default: frames_dir from the config]
    #[arg(long)]
    frames_dir: Option<PathBuf>,
    /// Where points are taken: image-gradient features or uniformly at random
    #[arg(long, value_enum, default_value_t = ModeArg::Feature)]
    mode: ModeArg,
    /// Maximum points per frame [default: 200]
    #[arg(long)]
    max_points: Option<usize>,
    /// Sampling seed for the uniform mode [default: 0]
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct PerturbArgs {
    /// Input pose file
    #[arg(long)]
    input: PathBuf,
    /// Output pose file
    #[arg(long)]
    output: PathBuf,
    /// Rotation angle in degrees (the robustness study uses 0, 2, 5 and 10)
    #[arg(long)]
    angle: f64,
    /// Axis seed [default: 0]
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct OptimizeArgs {
    /// Frame directory [default: frames_dir from the config]
    #[arg(long)]
    frames_dir: Option<PathBuf>,
    /// Frame to optimize
    #[arg(long, default_value_t = 1)]
    frame: u64,
    /// Initial depth PFM [default: nearest-point fill of the sparse depth]
    #[arg(long)]
    init: Option<PathBuf>,
    /// Pose file overriding the frame directory's poses
    #[arg(long)]
    poses: Option<PathBuf>,
    /// Output depth PFM [default: <output_dir>/depth_<frame>.pfm]
    #[arg(long)]
    out: Option<PathBuf>,
    /// Loss trace file [default: <output_dir>/trace_<frame>.txt]
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Adam steps [default: 500]
    #[arg(long)]
    steps: Option<usize>,
    /// Adam learning rate on log-depth [default: 0.003]
    #[arg(long)]
    lr: Option<f64>,
    /// Sparse depth weight [default: 0.001]
    #[arg(long)]
    lambda_depth: Option<f64>,
    /// Photometric weight [default: 1]
    #[arg(long)]
    lambda_photometric: Option<f64>,
    /// Edge-aware smoothness weight [default: 0.3]
    #[arg(long)]
    lambda_smoothness: Option<f64>,
    /// Flow-guided shape weight [default: 0.1]
    #[arg(long)]
    lambda_flow_shape: Option<f64>,
    /// Normal-guided scale weight [default: 0.001]
    #[arg(long)]
    lambda_normal_scale: Option<f64>,
    /// Contact patch side in pixels [default: 20]
    #[arg(long)]
    patch_size: Option<usize>,
    /// Pixel-sampling seed [default: 0]
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct EvalArgs {
    /// Predicted depth PFM
    #[arg(long)]
    pred: PathBuf,
    /// Ground-truth depth PFM [default: depth_<frame>.pfm in the frame directory]
    #[arg(long)]
    gt: Option<PathBuf>,
    /// Instance mask PGM [default: instances_<frame>.pgm in the frame directory]
    #[arg(long)]
    instances: Option<PathBuf>,
    /// Frame directory used for the defaults above [default: frames_dir from the config]
    #[arg(long)]
    frames_dir: Option<PathBuf>,
    /// Frame used for the defaults above
    #[arg(long, default_value_t = 1)]
    frame: u64,
    /// Rescale the prediction by median(gt) / median(pred) first [default: off]
    #[arg(long)]
    median_scaling: bool,
    /// Keep ground truth inside `min,max` metres and clip predictions to it [default: none]
    #[arg(long, value_name = "MIN,MAX")]
    depth_range: Option<String>,
    /// Accepted for uniformity; evaluation is deterministic [default: 0]
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct GradcheckArgs {
    /// Width of the synthetic test bundle
    #[arg(long, default_value_t = 24)]
    width: usize,
    /// Height of the synthetic test bundle
    #[arg(long, default_value_t = 16)]
    height: usize,
    /// Central-difference step on log-depth
    #[arg(long, default_value_t = 1e-4)]
    eps: f64,
    /// Relative error tolerance per pixel
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
    /// Minimum fraction of tested pixels within tolerance
    #[arg(long, default_value_t = 0.95)]
    min_pass: f64,
    /// Scene and perturbation seed [default: 0]
    #[arg(long)]
    seed: Option<u64>,
}

fn load_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    for kv in &cli.overrides {
        let (k, v) = kv.split_once('=').with_context(|| format!("--set expects KEY=VALUE, got {kv:?}"))?;
        cfg.set(k.trim(), v.trim())?;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<ExitCode> {
    let mut cfg = load_config(&cli)?;
    match cli.command {
        Command::Synth(a) => synth_cmd(&cfg, a)?,
        Command::Sparsify(a) => sparsify_cmd(&cfg, a)?,
        Command::PerturbPose(a) => perturb_cmd(&cfg, a)?,
        Command::Optimize(a) => optimize_cmd(&mut cfg, a)?,
        Command::Eval(a) => eval_cmd(&mut cfg, a)?,
        Command::Gradcheck(a) => return gradcheck_cmd(&cfg, a),
    }
    Ok(ExitCode::SUCCESS)
}

fn synth_cmd(cfg: &PipelineConfig, a: SynthArgs) -> Result<()> {
    let out = a.out.unwrap_or_else(|| cfg.frames_dir.clone());
    let scene_cfg = SceneConfig {
        frames: a.frames,
        seed: a.seed.unwrap_or(cfg.optimizer.seed),
        ..SceneConfig::with_resolution(a.width, a.height)
    };
    let scene = generate_scene(&scene_cfg)?;
    FrameStore::new(&out).write_scene(&scene)?;
    log::info!("wrote {} frames to {}", a.frames, out.display());
    Ok(())
}

fn sparsify_cmd(cfg: &PipelineConfig, a: SparsifyArgs) -> Result<()> {
    let store = FrameStore::new(a.frames_dir.unwrap_or_else(|| cfg.frames_dir.clone()));
    let mode = match a.mode {
        ModeArg::Feature => SparsifyMode::Feature,
        ModeArg::Uniform => SparsifyMode::Uniform,
    };
    let max_points = a.max_points.unwrap_or(cfg.max_sparse_points);
    let seed = a.seed.unwrap_or(cfg.optimizer.seed);
    for (id, _) in store.poses()? {
        let depth = io::read_depth(&store.depth_path(id))?;
        let image = io::read_image(&store.image_path(id))?;
        let instances = io::read_instances(&store.instances_path(id))?;
        let sparse = synth::sparsify(&depth, &image, &instances, mode, max_points, mix_seed(&[seed, id]))?;
        io::write_sparse(&store.sparse_path(id), &sparse)?;
        log::info!("frame {id}: {} sparse points", sparse.count());
    }
    Ok(())
}

fn perturb_cmd(cfg: &PipelineConfig, a: PerturbArgs) -> Result<()> {
    let seed = a.seed.unwrap_or(cfg.optimizer.seed);
    let poses = io::read_poses(&a.input)?;
    let noisy = poses
        .iter()
        .map(|(id, p)| Ok((*id, perturb_pose(p, a.angle, mix_seed(&[seed, *id]))?)))
        .collect::<dnd_core::Result<Vec<_>>>()?;
    io::write_poses(&a.output, &noisy)?;
    Ok(())
}

fn optimize_cmd(cfg: &mut PipelineConfig, a: OptimizeArgs) -> Result<()> {
    let o = &mut cfg.optimizer;
    macro_rules! apply {
        ($($flag:ident => $field:expr),* $(,)?) => { $(if let Some(v) = a.$flag { $field = v; })* };
    }
    apply!(
        steps => o.steps,
        lr => o.adam.lr,
        lambda_depth => o.weights.depth,
        lambda_photometric => o.weights.photometric,
        lambda_smoothness => o.weights.smoothness,
        lambda_flow_shape => o.weights.flow_shape,
        lambda_normal_scale => o.weights.normal_scale,
        patch_size => o.settings.patch_size,
        seed => o.seed,
    );
    cfg.validate()?;

    let store = FrameStore::new(a.frames_dir.unwrap_or_else(|| cfg.frames_dir.clone()));
    let poses = a.poses.as_deref().map(io::read_poses).transpose()?;
    let bundle = store.load_bundle(a.frame, poses.as_deref())?;
    let init = match &a.init {
        Some(path) => io::read_depth(path)?,
        None => initialize_depth(&bundle.target.sparse, None),
    };
    let result = optimize_frame(&bundle, &init, &[], &cfg.optimizer)?;

    let out = a.out.unwrap_or_else(|| cfg.output_dir.join(format!("depth_{:04}.pfm", a.frame)));
    let trace = a.trace.unwrap_or_else(|| cfg.output_dir.join(format!("trace_{:04}.txt", a.frame)));
    for p in [&out, &trace] {
        ensure_parent(p)?;
    }
    io::write_depth(&out, &result.depth)?;
    io::write_atomic(&trace, io::format_trace(&result.trace).as_bytes())?;
    match (result.trace.first(), result.trace.last()) {
        (Some(first), Some(last)) => println!("steps {}  loss {:.6} -> {:.6}", result.trace.len(), first.total, last.total),
        _ => println!("steps 0  initialization copied"),
    }
    Ok(())
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(())
}

fn eval_cmd(cfg: &mut PipelineConfig, a: EvalArgs) -> Result<()> {
    if a.median_scaling {
        cfg.median_scaling = true;
    }
    if let Some(range) = &a.depth_range {
        cfg.set("depth_range", range)?;
    }
    let opts = cfg.eval_options()?;
    let store = FrameStore::new(a.frames_dir.unwrap_or_else(|| cfg.frames_dir.clone()));
    let gt_path = a.gt.unwrap_or_else(|| store.depth_path(a.frame));
    let inst_path = a.instances.unwrap_or_else(|| store.instances_path(a.frame));
    let pred = io::read_depth(&a.pred)?;
    let gt = io::read_depth(&gt_path)?;
    let instances = io::read_instances(&inst_path)?;
    let report = evaluate(&pred, &gt, &instances, &opts)?;
    println!("{}", SplitReport::header());
    println!("{report}");
    Ok(())
}

fn gradcheck_cmd(cfg: &PipelineConfig, a: GradcheckArgs) -> Result<ExitCode> {
    let seed = a.seed.unwrap_or(cfg.optimizer.seed);
    let scene_cfg = SceneConfig { seed, ..SceneConfig::with_resolution(a.width, a.height) };
    let scene = generate_scene(&scene_cfg)?;
    let bundle = synth::build_bundle(&scene, 1, &BundleOptions { seed, ..Default::default() })?;
    let Some(gt) = bundle.target.ground_truth.as_ref() else { bail!("synthetic bundle lacks ground truth") };
    let target = DepthVariable::from_depth(&lognormal_noise(gt, 0.3, seed)?);
    let neighbors: Vec<DepthVariable> = bundle
        .neighbors
        .iter()
        .zip(0u64..)
        .map(|(nb, k)| {
            let d = nb.frame.ground_truth.as_ref().context("neighbour lacks ground truth")?;
            Ok(DepthVariable::from_depth(&lognormal_noise(d, 0.3, mix_seed(&[seed, k + 1]))?))
        })
        .collect::<Result<_>>()?;
    let indices: Vec<usize> = (0..a.width * a.height).collect();
    let opts = GradCheckOptions { eps: a.eps, rel_tol: a.tol, ..Default::default() };
    let weights: LossWeights = cfg.optimizer.weights;
    let reports =
        check_objective_terms(&bundle, &target, &neighbors, &weights, &cfg.optimizer.settings, seed, &indices, &opts)?;
    let mut ok = true;
    println!("term\ttested\tkinks\tpassed\tmax_rel_err\tstatus");
    for (name, r) in &reports {
        let pass = r.passes(a.min_pass);
        ok &= pass;
        println!(
            "{name}\t{}\t{}\t{:.1}%\t{:.2e}\t{}",
            r.tested(),
            r.kinks.len(),
            100.0 * r.pass_fraction(),
            r.max_rel_error(),
            if pass { "ok" } else { "FAIL" }
        );
    }
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        2 => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
