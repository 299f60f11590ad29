//! End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any criterion fails.

use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use dnd_core::eval::{compute_metrics, evaluate, EvalOptions, MetricReport};
use dnd_core::geometry::{PoseKind, PoseSe3};
use dnd_core::io::*;
use dnd_core::losses::{photometric_loss, smoothness_loss, PhotometricSource, PHOTOMETRIC_ALPHA};
use dnd_core::dynamic::flow_shape_loss;
use dnd_core::optim::{
    check_objective_terms, ground_of, optimize_frame, DepthVariable, FrameBundle, GradCheckOptions, LossSettings,
    LossWeights, OptimizerConfig, TERM_NAMES,
};
use dnd_core::raster::{DepthField, FlowField, ImageRgb, InstanceMask, Mask, SparseDepth};
use dnd_core::synth::{
    build_bundle, generate_scene, lognormal_noise, perturb_pose, sparsify, BundleOptions, Scene, SceneConfig,
    SparsifyMode, MAX_SPARSE_POINTS,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

fn random_depth(rng: &mut ChaCha8Rng, w: usize, h: usize, lo: f64, hi: f64) -> DepthField {
    DepthField::from_values(w, h, (0..w * h).map(|_| rng.random_range(lo..hi)).collect()).unwrap()
}

fn random_image(rng: &mut ChaCha8Rng, w: usize, h: usize) -> ImageRgb {
    ImageRgb::new(w, h, (0..w * h).map(|_| [rng.random(), rng.random(), rng.random()]).collect()).unwrap()
}

fn gradients() -> Outcome {
    let start = Instant::now();
    let seed = 0;
    let scene = generate_scene(&SceneConfig { seed, ..SceneConfig::with_resolution(24, 16) }).map_err(|e| e.to_string())?;
    let bundle = build_bundle(&scene, 1, &BundleOptions::default()).unwrap();
    let target = DepthVariable::from_depth(&lognormal_noise(bundle.target.ground_truth.as_ref().unwrap(), 0.3, 1).unwrap());
    let neighbors: Vec<DepthVariable> = bundle
        .neighbors
        .iter()
        .zip(2u64..)
        .map(|(nb, s)| DepthVariable::from_depth(&lognormal_noise(nb.frame.ground_truth.as_ref().unwrap(), 0.3, s).unwrap()))
        .collect();
    let indices: Vec<usize> = (0..24 * 16).collect();
    let reports = check_objective_terms(
        &bundle,
        &target,
        &neighbors,
        &LossWeights::default(),
        &LossSettings::default(),
        seed,
        &indices,
        &GradCheckOptions::default(),
    )
    .map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    let worst = reports.iter().map(|(_, r)| r.pass_fraction()).fold(1.0, f64::min);
    let all = reports.len() == TERM_NAMES.len() && reports.iter().all(|(_, r)| r.passes(0.95));
    let kinks: usize = reports.iter().map(|(_, r)| r.kinks.len()).sum();
    check(
        all && secs < 60.0,
        format!("{} terms, worst pass rate {:.1}%, {kinks} kink pixels excluded, {secs:.1}s", reports.len(), 100.0 * worst),
    )
}

fn scale_invariance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (w, h) = (16, 12);
    let mut worst_loss: f64 = 0.0;
    let mut worst_metric: f64 = 0.0;
    for _ in 0..20 {
        let (d, dp) = (random_depth(&mut rng, w, h, 0.5, 20.0), random_depth(&mut rng, w, h, 0.5, 20.0));
        let img = random_image(&mut rng, w, h);
        let flow = FlowField::new(w, h, (0..w * h).map(|_| [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)]).collect()).unwrap();
        let full = Mask::full(w, h);
        let s0 = smoothness_loss(&d, &img, &full).unwrap().value;
        let f0 = flow_shape_loss(&d, &dp, &flow, &full).unwrap().0.value;
        let gt = random_depth(&mut rng, w, h, 0.5, 20.0);
        let inst = InstanceMask::new(w, h, (0..w * h).map(|i| u16::from(i % 7 == 0)).collect()).unwrap();
        let opts = EvalOptions { median_scaling: true, ..Default::default() };
        let m0 = evaluate(&d, &gt, &inst, &opts).unwrap();
        for c in [0.5, 2.0, 10.0] {
            let dc = d.scaled(c);
            worst_loss = worst_loss
                .max(rel(s0, smoothness_loss(&dc, &img, &full).unwrap().value))
                .max(rel(f0, flow_shape_loss(&dc, &dp, &flow, &full).unwrap().0.value))
                .max(rel(f0, flow_shape_loss(&d, &dp.scaled(c), &flow, &full).unwrap().0.value));
            let mc = evaluate(&dc, &gt, &inst, &opts).unwrap();
            for (a, b) in [(m0.all, mc.all), (m0.humans.unwrap(), mc.humans.unwrap())] {
                for (x, y) in a.values().iter().zip(b.values()) {
                    worst_metric = worst_metric.max((x - y).abs());
                }
            }
        }
    }
    check(
        worst_loss < 1e-9 && worst_metric <= 1e-12,
        format!("max loss change {worst_loss:.1e} (rel), max metric change {worst_metric:.1e}"),
    )
}

fn photometric_identity(scene: &Scene) -> Outcome {
    let frame = &scene.frames[1];
    let src = PhotometricSource { image: &frame.image, pose: PoseSe3::identity(PoseKind::Relative) };
    let r = photometric_loss(&frame.image, &[src], &frame.depth, scene.intrinsics(), PHOTOMETRIC_ALPHA)
        .map_err(|e| e.to_string())?;
    let max_err = r.error_map.as_ref().map_or(f64::NAN, |m| m.iter().fold(0.0, |a: f64, e| a.max(*e)));
    let kept = r.kept.as_ref().map_or(usize::MAX, Mask::count);
    check(
        max_err == 0.0 && kept == 0 && r.value == 0.0 && r.empty,
        format!("max error before masking {max_err:e}, kept {kept} pixels, loss {}", r.value),
    )
}

fn ground_detection(scene: &Scene) -> Outcome {
    let k = *scene.intrinsics();
    let settings = LossSettings::default();
    let mut worst: f64 = 1.0;
    for t in 0..scene.frames.len() {
        let ground = ground_of(&scene.frames[t].depth, &k, &settings).unwrap();
        let floor = scene.floor_mask(t);
        let (mut inter, mut union) = (0usize, 0usize);
        for v in 1..k.height - 1 {
            for u in 1..k.width - 1 {
                let f = floor[v * k.width + u];
                let interior = (v - 1..=v + 1).all(|y| (u - 1..=u + 1).all(|x| floor[y * k.width + x] == f));
                if interior {
                    let g = ground.get(u, v);
                    inter += usize::from(g && f);
                    union += usize::from(g || f);
                }
            }
        }
        worst = worst.min(inter as f64 / union as f64);
    }
    check(
        worst >= 0.95 && scene.config.pitch_deg == 10.0 && settings.ground_threshold_deg == 15.0,
        format!("pitch {} deg, threshold {} deg, worst IoU {worst:.4}", scene.config.pitch_deg, settings.ground_threshold_deg),
    )
}

struct Run {
    all: MetricReport,
    humans: MetricReport,
}

fn score(bundle: &FrameBundle, depth: &DepthField) -> Run {
    let gt = bundle.target.ground_truth.as_ref().unwrap();
    let r = evaluate(depth, gt, &bundle.target.instances, &EvalOptions::default()).unwrap();
    Run { all: r.all, humans: r.humans.unwrap() }
}

/// The contact patch is scaled to the 64x48 scene; everything else is default.
fn acceptance_config(weights: LossWeights) -> OptimizerConfig {
    let mut cfg = OptimizerConfig { weights, ..Default::default() };
    cfg.settings.patch_size = 6;
    cfg
}

fn run(bundle: &FrameBundle, init: &DepthField, weights: LossWeights) -> Run {
    let out = optimize_frame(bundle, init, &[], &acceptance_config(weights)).unwrap();
    score(bundle, &out.depth)
}

fn convergence_and_ablation(scene: &Scene) -> (Outcome, Outcome) {
    let start = Instant::now();
    let bundle = build_bundle(scene, 1, &BundleOptions::default()).unwrap();
    let init = lognormal_noise(bundle.target.ground_truth.as_ref().unwrap(), 0.3, 7).unwrap();
    let before = score(&bundle, &init);
    let full = LossWeights::default();
    let no_f = LossWeights { flow_shape: 0.0, ..full };
    let no_fn = LossWeights { flow_shape: 0.0, normal_scale: 0.0, ..full };
    let (a, b, c) = std::thread::scope(|s| {
        let a = s.spawn(|| {
            let r = run(&bundle, &init, full);
            (r, start.elapsed().as_secs_f64())
        });
        let b = s.spawn(|| run(&bundle, &init, no_f));
        let c = s.spawn(|| run(&bundle, &init, no_fn));
        (a.join().unwrap(), b.join().unwrap(), c.join().unwrap())
    });
    let (after, secs) = a;
    let gain_all = 1.0 - after.all.rmse / before.all.rmse;
    let gain_f = 1.0 - after.humans.rmse / before.humans.rmse;
    let conv = check(
        gain_all >= 0.60 && gain_f >= 0.40 && secs < 300.0 && bundle.target.sparse.count() <= MAX_SPARSE_POINTS,
        format!(
            "RMSE F+B {:.3} -> {:.3} (-{:.0}%), F {:.3} -> {:.3} (-{:.0}%), {} sparse points, {secs:.0}s",
            before.all.rmse,
            after.all.rmse,
            100.0 * gain_all,
            before.humans.rmse,
            after.humans.rmse,
            100.0 * gain_f,
            bundle.target.sparse.count()
        ),
    );
    let (f_full, f_nof, f_nofn) = (after.humans.rmse, b.humans.rmse, c.humans.rmse);
    let ablation = check(
        f_full < f_nof && f_nof < f_nofn,
        format!("F RMSE full {f_full:.3}, no flow-shape {f_nof:.3}, no flow-shape/normal-scale {f_nofn:.3}"),
    );
    (conv, ablation)
}

fn robustness(scene: &Scene) -> Outcome {
    let levels = [0.0, 2.0, 5.0, 10.0];
    let abs_rel: Vec<f64> = std::thread::scope(|s| {
        let handles: Vec<_> = levels
            .iter()
            .map(|&alpha| {
                s.spawn(move || {
                    let bundle = build_bundle(scene, 1, &BundleOptions { pose_noise_deg: alpha, ..Default::default() }).unwrap();
                    let init = lognormal_noise(bundle.target.ground_truth.as_ref().unwrap(), 0.3, 7).unwrap();
                    run(&bundle, &init, LossWeights::default()).all.abs_rel
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let detail = levels.iter().zip(&abs_rel).map(|(a, r)| format!("{a}deg {r:.4}")).collect::<Vec<_>>().join(", ");
    check(abs_rel.windows(2).all(|p| p[0] <= p[1]), format!("Abs Rel {detail}"))
}

/// Straight scalar loop over the metric definitions.
fn brute_force_metrics(pred: &[f64], gt: &[f64]) -> [f64; 7] {
    let mut sums = [0.0f64; 7];
    let mut n = 0.0;
    for (&p, &g) in pred.iter().zip(gt) {
        if !(p.is_finite() && p > 0.0 && g.is_finite() && g > 0.0) {
            continue;
        }
        n += 1.0;
        sums[0] += (p - g).abs() / g;
        sums[1] += (p - g).powi(2) / g;
        sums[2] += (p - g).powi(2);
        sums[3] += (p.ln() - g.ln()).powi(2);
        let ratio = if p > g { p / g } else { g / p };
        for k in 0..3 {
            if ratio < 1.25f64.powi(k as i32 + 1) {
                sums[4 + k] += 1.0;
            }
        }
    }
    [sums[0] / n, sums[1] / n, (sums[2] / n).sqrt(), (sums[3] / n).sqrt(), sums[4] / n, sums[5] / n, sums[6] / n]
}

fn metric_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst: f64 = 0.0;
    let mut monotone = true;
    for _ in 0..100 {
        let (w, h) = (rng.random_range(1..20), rng.random_range(1..20));
        let gt: Vec<f64> =
            (0..w * h).map(|_| if rng.random_bool(0.1) { f64::NAN } else { rng.random_range(0.1..80.0) }).collect();
        let spread: f64 = rng.random_range(0.01..1.5);
        let pred: Vec<f64> = gt.iter().map(|g| if g.is_nan() { 1.0 } else { g * rng.random_range(-spread..spread).exp() }).collect();
        let Ok(r) = compute_metrics(
            &DepthField::from_values(w, h, pred.clone()).unwrap(),
            &DepthField::from_values(w, h, gt.clone()).unwrap(),
            None,
        ) else {
            continue;
        };
        for (a, b) in r.values().iter().zip(brute_force_metrics(&pred, &gt)) {
            worst = worst.max((a - b).abs() / b.abs().max(1.0));
        }
        monotone &= r.delta1 <= r.delta2 && r.delta2 <= r.delta3;
    }
    check(worst <= 1e-12 && monotone, format!("100 pairs, max deviation {worst:.1e}, delta ordering held: {monotone}"))
}

fn sparsifier_contract() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (mut most, mut on_humans) = (0, 0);
    for trial in 0..50u64 {
        let (w, h) = (rng.random_range(8..64), rng.random_range(8..48));
        let depth = random_depth(&mut rng, w, h, 0.5, 30.0);
        let image = random_image(&mut rng, w, h);
        let ids = (0..w * h).map(|_| if rng.random_bool(0.2) { rng.random_range(1..5) } else { 0 }).collect();
        let inst = InstanceMask::new(w, h, ids).unwrap();
        let mode = if trial % 2 == 0 { SparsifyMode::Feature } else { SparsifyMode::Uniform };
        let s = sparsify(&depth, &image, &inst, mode, MAX_SPARSE_POINTS, trial).unwrap();
        most = most.max(s.count());
        on_humans += s.points().iter().filter(|&&(u, v, _)| inst.get(u, v) != 0).count();
    }
    check(
        most <= MAX_SPARSE_POINTS && on_humans == 0,
        format!("50 rasters, at most {most} points, {on_humans} on pedestrians"),
    )
}

fn dnd_fails(args: &[&std::ffi::OsStr]) -> bool {
    let out = Command::new(env!("CARGO_BIN_EXE_dnd")).args(args).env_remove("DND_CONFIG").output().unwrap();
    !out.status.success()
}

fn io_round_trips() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut failures = Vec::new();
    for i in 0..50 {
        let (w, h) = (rng.random_range(1..16), rng.random_range(1..16));
        let channels = if i % 2 == 0 { 1 } else { 3 };
        let data: Vec<f32> = (0..w * h * channels).map(|_| f32::from_bits(rng.random())).collect();
        let pfm = PfmImage::new(w, h, channels, data).unwrap();
        for order in [ByteOrder::Little, ByteOrder::Big] {
            let back = decode_pfm(&encode_pfm(&pfm, order)).unwrap();
            if back.data.iter().map(|x| x.to_bits()).ne(pfm.data.iter().map(|x| x.to_bits())) {
                failures.push(format!("pfm #{i}"));
            }
        }

        let flow = FlowField::new(w, h, (0..w * h).map(|_| [f64::from(rng.random::<f32>() * 40.0 - 20.0), f64::from(rng.random::<f32>())]).collect()).unwrap();
        if decode_flo(&encode_flo(&flow)).unwrap() != flow {
            failures.push(format!("flo #{i}"));
        }

        let img = ImageRgb::new(w, h, (0..w * h).map(|_| [0; 3].map(|_: u8| f64::from(rng.random::<u8>()) / 255.0)).collect()).unwrap();
        if decode_ppm(&encode_ppm(&img)).unwrap() != img {
            failures.push(format!("ppm #{i}"));
        }
        let mask = InstanceMask::new(w, h, (0..w * h).map(|_| rng.random()).collect()).unwrap();
        if decode_pgm(&encode_pgm16(&mask)).unwrap() != mask {
            failures.push(format!("pgm #{i}"));
        }

        let poses: Vec<(u64, PoseSe3)> = (0..rng.random_range(1..5u64))
            .map(|id| {
                let mut p = perturb_pose(&PoseSe3::identity(PoseKind::CameraToWorld), rng.random_range(0.0..180.0), rng.random()).unwrap();
                p.translation.x = rng.random_range(-20.0..20.0);
                p.translation.y = rng.random_range(-20.0..20.0);
                p.translation.z = rng.random_range(-20.0..20.0);
                (id, p)
            })
            .collect();
        if parse_poses(&format_poses(&poses)).unwrap() != poses {
            failures.push(format!("poses #{i}"));
        }

        let mut pts = Vec::new();
        for j in 0..w * h {
            if rng.random_bool(0.3) {
                pts.push((j % w, j / w, rng.random_range(0.01..90.0)));
            }
        }
        let sparse = SparseDepth::from_points(w, h, &pts).unwrap();
        if parse_sparse(&format_sparse(&sparse), w, h).unwrap().points() != sparse.points() {
            failures.push(format!("sparse #{i}"));
        }
    }

    let rejected = malformed_inputs_rejected();
    let detail = format!(
        "50 fixtures per format, {} round-trip failures{}; malformed headers rejected: {}",
        failures.len(),
        failures.first().map(|f| format!(" (first {f})")).unwrap_or_default(),
        rejected.join(", ")
    );
    check(failures.is_empty() && rejected.len() == 5, detail)
}

/// Corrupts one file of each format in a frame directory and runs the binary on it.
fn malformed_inputs_rejected() -> Vec<&'static str> {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let scene = generate_scene(&SceneConfig { frames: 3, ..SceneConfig::with_resolution(16, 12) }).unwrap();
    let store = FrameStore::new(root);
    store.write_scene(&scene).unwrap();
    let bad_pfm = root.join("bad.pfm");
    std::fs::write(&bad_pfm, b"PF\n16 -12\n-1.0\n").unwrap();
    let bad_poses = root.join("bad_poses.txt");
    std::fs::write(&bad_poses, "0 1 0 0 0 0 1 0 0 0 0 1 0 0 0 1\n").unwrap();

    let os = |p: &Path| p.as_os_str().to_owned();
    let s = |x: &str| std::ffi::OsString::from(x);
    let optimize = |root: &Path| [s("optimize"), s("--frames-dir"), os(root), s("--steps"), s("0"), s("--out"), os(&root.join("o.pfm")), s("--trace"), os(&root.join("o.txt"))];
    let mut rejected = Vec::new();

    let eval = [s("eval"), s("--pred"), os(&bad_pfm), s("--frames-dir"), os(root)];
    if dnd_fails(&eval.iter().map(|a| a.as_os_str()).collect::<Vec<_>>()) {
        rejected.push("pfm");
    }
    let perturb = [s("perturb-pose"), s("--input"), os(&bad_poses), s("--output"), os(&root.join("p.txt")), s("--angle"), s("1")];
    if dnd_fails(&perturb.iter().map(|a| a.as_os_str()).collect::<Vec<_>>()) {
        rejected.push("poses");
    }
    for (name, file, bytes) in [
        ("flo", store.flow_path(1, 2), b"PIEH\x10\0\0\0".to_vec()),
        ("ppm", store.image_path(1), b"P6\n16 12\n255\n\0\0\0".to_vec()),
        ("pgm", store.instances_path(1), b"P2\n16 12\n255\n".to_vec()),
    ] {
        let original = std::fs::read(&file).unwrap();
        std::fs::write(&file, bytes).unwrap();
        let args = optimize(root);
        if dnd_fails(&args.iter().map(|a| a.as_os_str()).collect::<Vec<_>>()) {
            rejected.push(name);
        }
        std::fs::write(&file, original).unwrap();
    }
    rejected
}

fn main() -> ExitCode {
    let scene = generate_scene(&SceneConfig::default()).expect("default scene");
    let mut results: Vec<(u32, Outcome)> = vec![
        (1, gradients()),
        (2, scale_invariance()),
        (3, photometric_identity(&scene)),
        (4, ground_detection(&scene)),
    ];
    let (conv, ablation) = convergence_and_ablation(&scene);
    results.push((5, conv));
    results.push((6, ablation));
    results.push((7, robustness(&scene)));
    results.push((8, metric_oracle()));
    results.push((9, sparsifier_contract()));
    results.push((10, io_round_trips()));

    let mut failed = 0;
    for (n, r) in &results {
        match r {
            Ok(d) => println!("criterion {n}: PASS {d}"),
            Err(d) => {
                failed += 1;
                println!("criterion {n}: FAIL {d}");
            }
        }
    }
    println!("acceptance: {} of {} criteria passed", results.len() - failed, results.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
