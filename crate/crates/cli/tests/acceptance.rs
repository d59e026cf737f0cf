//! End-to-end acceptance run. Prints one line per criterion and exits
//! non-zero when any of them fails.
//!
//! Criteria 1, 7, 8 and 11 share the desk-scale overfit run: a 16-frame
//! 128×128 moving checkerboard fitted with the default configuration.

use std::fs;
use std::process::{Command, ExitCode};
use std::time::Instant;

use fanerv::codec::{decode_video, entropy_decode, entropy_encode, max_symbol, quantize_model, Bitstream, QuantizedTensor, StreamHeader, VideoDims};
use fanerv::evaluation::{bd_rate, Metric, RDCurve};
use fanerv::model::{HybridUpsample, Model, ModelConfig, GridSpec, UpsampleMode};
use fanerv::objectives::{
    enhanced_target, hf_residual, ms_ssim, total_loss, total_loss_with_grad, video_psnr, LossWeights, TargetGradient,
};
use fanerv::pipeline::{self, EncodeOutcome, RunConfig};
use fanerv::render::render_level;
use fanerv::synthetic::{moving_checkerboard, Checkerboard};
use fanerv::training::{evaluate, Ablation, EpochLog};
use fanerv::video_io::{build_pyramid, enumerate_patches, store_png_sequence, PatchCoordinate, PatchSpec, VideoTensor};
use fanerv::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const VIDEO_SEED: u64 = 1;
const ABLATION_SEEDS: [u64; 3] = [0, 1, 2];

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn desk_video() -> VideoTensor {
    moving_checkerboard(16, 128, 128, VIDEO_SEED, Checkerboard::default()).expect("synthetic video")
}

fn progress(tag: &str) -> impl FnMut(&EpochLog) + '_ {
    move |e: &EpochLog| {
        if let Some(p) = e.eval_psnr {
            if e.epoch % 50 == 0 {
                eprintln!("  [{tag}] epoch {:>3}  eval PSNR {p:.2} dB", e.epoch);
            }
        }
    }
}

struct DeskRun {
    video: VideoTensor,
    outcome: EncodeOutcome,
    train_seconds: f64,
}

fn desk_run() -> DeskRun {
    let video = desk_video();
    let cfg = RunConfig::default();
    let t0 = Instant::now();
    let mut log = progress("full seed 0");
    let outcome = pipeline::encode(&video, &cfg, &mut log).expect("desk encode");
    DeskRun {
        video,
        outcome,
        train_seconds: t0.elapsed().as_secs_f64(),
    }
}

fn criterion_1(run: &DeskRun) -> Verdict {
    let o = &run.outcome;
    let model = o.train.best_model();
    let params = model.count_parameters().total;
    let full = evaluate(model, &o.prepared.set).expect("evaluate").psnr;
    let frames = run.video.frames();
    let mut levels = Vec::new();
    for r in 1..=2 {
        let out = render_level(model, frames, &o.prepared.set.spec, r).expect("render");
        levels.push(video_psnr(&out, o.prepared.set.pyramid.level(r)).expect("psnr"));
    }
    let hours = run.train_seconds / 3600.0;
    let pass = full >= 32.0 && levels.iter().all(|&p| p >= 30.0) && hours <= 4.0 && (100_000..=200_000).contains(&params);
    verdict(
        pass,
        format!(
            "{params} params, full {full:.2} dB, level 1 {:.2} dB, level 2 {:.2} dB, train+qat {:.1} min",
            levels[0],
            levels[1],
            run.train_seconds / 60.0
        ),
    )
}

// ---- criterion 2 ----

fn grad_model_config() -> ModelConfig {
    ModelConfig {
        num_stages: 2,
        base_channels: 12,
        grids: vec![
            GridSpec { frames: 3, channels: 4, height: 4, width: 4 },
            GridSpec { frames: 1, channels: 4, height: 4, width: 4 },
        ],
        ..ModelConfig::default()
    }
    .with_geometry(3, 48, 48, 24, 24)
}

fn frozen_target_loss(
    model: &Model<f64>,
    coords: &[PatchCoordinate],
    targets: &[Vec<Tensor<f64>>],
    frozen: &[Tensor<f64>],
    weights: &LossWeights,
) -> f64 {
    let mut w = weights.clone();
    w.inject_beta = 0.0;
    let mut total = 0.0;
    for ((c, t), f) in coords.iter().zip(targets).zip(frozen) {
        let preds = model.forward(c).unwrap();
        let refs = vec![&t[0], f];
        total += total_loss(&preds, &refs, &w).unwrap().total;
    }
    total
}

fn criterion_2() -> Verdict {
    let cfg = grad_model_config();
    let mut model = Model::<f64>::init(&cfg, 3).unwrap();
    let count = model.count_parameters().total;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for (_, p) in model.params_mut() {
        for v in p.data_mut() {
            *v += rng.gen_range(-0.05..0.05);
        }
    }
    let coords = [PatchCoordinate::new(0.25, 0.75, 0.0).unwrap(), PatchCoordinate::new(0.75, 0.25, 0.6).unwrap()];
    let weights = LossWeights::default_for(2);
    let targets: Vec<Vec<Tensor<f64>>> = coords
        .iter()
        .map(|_| {
            (1..=2)
                .map(|r| {
                    let (h, w) = cfg.level_dims(r);
                    let data = (0..3 * h * w).map(|_| rng.gen_range(0.0..1.0)).collect();
                    Tensor::from_vec(&[3, h, w], data).unwrap()
                })
                .collect()
        })
        .collect();

    let mut grads = model.zeros_like();
    let mut frozen = Vec::new();
    for (c, t) in coords.iter().zip(&targets) {
        let pass = model.run(c, 2, &[true, true]);
        let preds: Vec<Tensor<f64>> = pass
            .heads
            .iter()
            .enumerate()
            .map(|(i, h)| {
                let (hh, ww) = cfg.level_dims(i + 1);
                Tensor::from_vec(&[3, hh, ww], h.clone().unwrap()).unwrap()
            })
            .collect();
        let p: Vec<Option<&Tensor<f64>>> = preds.iter().map(Some).collect();
        let refs: Vec<&Tensor<f64>> = t.iter().collect();
        let out = total_loss_with_grad(&p, &refs, &weights, TargetGradient::Stop).unwrap();
        let res = hf_residual(&t[1], &preds[1], weights.hf_sigma).unwrap();
        frozen.push(enhanced_target(&t[1], &res, weights.inject_beta, false).unwrap());
        let hg: Vec<Option<Vec<f64>>> = out.grads.into_iter().map(|g| g.map(Tensor::into_data)).collect();
        model.backward(&pass.trace, &hg, &mut grads);
    }

    let eps = 1e-5;
    let analytic: Vec<Vec<f64>> = grads.params().into_iter().map(|(_, t)| t.data().to_vec()).collect();
    let mut worst = 0.0f64;
    for (pi, g) in analytic.iter().enumerate() {
        for (idx, &an) in g.iter().enumerate() {
            let mut plus = model.clone();
            plus.params_mut()[pi].1.data_mut()[idx] += eps;
            let mut minus = model.clone();
            minus.params_mut()[pi].1.data_mut()[idx] -= eps;
            let fd = (frozen_target_loss(&plus, &coords, &targets, &frozen, &weights)
                - frozen_target_loss(&minus, &coords, &targets, &frozen, &weights))
                / (2.0 * eps);
            worst = worst.max((fd - an).abs() / fd.abs().max(an.abs()).max(1e-6));
        }
    }
    verdict(count <= 5000 && worst <= 1e-4, format!("{count} params, max relative error {worst:.2e}"))
}

// ---- criterion 3 ----

fn criterion_3() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let targets: Vec<Tensor<f64>> = [8usize, 16, 32]
        .iter()
        .map(|&s| Tensor::from_vec(&[3, s, s], (0..3 * s * s).map(|_| rng.gen_range(0.0..1.0)).collect()).unwrap())
        .collect();
    let refs: Vec<&Tensor<f64>> = targets.iter().collect();
    let mut nonzero = Vec::new();
    for beta in [0.0, 0.1, 0.5, 1.0, 3.0, 50.0] {
        let mut w = LossWeights::default_for(3);
        w.inject_beta = beta;
        let out = total_loss(&targets, &refs, &w).unwrap();
        if out.total != 0.0 {
            nonzero.push(format!("beta {beta}: {}", out.total));
        }
    }
    verdict(nonzero.is_empty(), if nonzero.is_empty() { "L_total == 0.0 for 6 betas".into() } else { nonzero.join(", ") })
}

// ---- criterion 4 ----

fn brute_force_max(v: &VideoTensor, f: usize) -> Vec<f32> {
    let (t, h, w) = v.dims();
    let mut out = Vec::new();
    for fr in 0..t {
        for y in 0..h / f {
            for x in 0..w / f {
                for c in 0..3 {
                    let mut m = f32::NEG_INFINITY;
                    for dy in 0..f {
                        for dx in 0..f {
                            m = m.max(v.at(fr, y * f + dy, x * f + dx, c));
                        }
                    }
                    out.push(m);
                }
            }
        }
    }
    out
}

fn criterion_4() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut mismatches = 0;
    for _ in 0..100 {
        let data = (0..2 * 16 * 16 * 3).map(|_| rng.gen_range(0.0f32..1.0)).collect();
        let v = VideoTensor::new(2, 16, 16, data).unwrap();
        let p = build_pyramid(&v, 3, 2).unwrap();
        let ok = p.full() == &v
            && p.level(2).data() == brute_force_max(&v, 2).as_slice()
            && p.level(1).data() == brute_force_max(&v, 4).as_slice();
        if !ok {
            mismatches += 1;
        }
    }
    let hd = build_pyramid(&VideoTensor::filled(1, 1080, 1920, 0.5).unwrap(), 3, 2).unwrap();
    let dims: Vec<(usize, usize)> = (1..=3).map(|r| (hd.level(r).width(), hd.level(r).height())).collect();
    let dims_ok = dims == [(480, 270), (960, 540), (1920, 1080)];
    verdict(mismatches == 0 && dims_ok, format!("{mismatches}/100 mismatches, 1080p levels {dims:?}"))
}

// ---- criterion 5 ----

fn reference_bilinear(x: &[f64], c: usize, h: usize, w: usize, f: usize) -> Vec<f64> {
    let src = |n: usize, o: usize| -> (usize, usize, f64) {
        let p = ((o as f64 + 0.5) / f as f64 - 0.5).max(0.0);
        let i0 = (p.floor() as usize).min(n - 1);
        let i1 = (i0 + 1).min(n - 1);
        (i0, i1, p - i0 as f64)
    };
    let mut out = Vec::with_capacity(c * h * w * f * f);
    for ch in 0..c {
        for oy in 0..h * f {
            let (y0, y1, fy) = src(h, oy);
            for ox in 0..w * f {
                let (x0, x1, fx) = src(w, ox);
                let at = |y: usize, xx: usize| x[(ch * h + y) * w + xx];
                let top = at(y0, x0) * (1.0 - fx) + at(y0, x1) * fx;
                let bot = at(y1, x0) * (1.0 - fx) + at(y1, x1) * fx;
                out.push(top * (1.0 - fy) + bot * fy);
            }
        }
    }
    out
}

fn criterion_5() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let c = rng.gen_range(1..6);
        let h = rng.gen_range(1..10);
        let w = rng.gen_range(1..10);
        let x: Vec<f64> = (0..c * h * w).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let up = HybridUpsample::<f64>::zeros(c, c, 2, 3, UpsampleMode::Hybrid);
        let (y, _) = up.forward(&x, h, w);
        let r = reference_bilinear(&x, c, h, w, 2);
        if y.len() != r.len() {
            return verdict(false, format!("length {} vs {}", y.len(), r.len()));
        }
        worst = y.iter().zip(&r).fold(worst, |m, (a, b)| m.max((a - b).abs()));
    }
    verdict(worst <= 1e-6, format!("max abs deviation {worst:.2e} over 100 inputs"))
}

// ---- criterion 6 ----

fn criterion_6() -> Verdict {
    let header = StreamHeader {
        model: ModelConfig::default(),
        video: VideoDims {
            frames: 4,
            height: 32,
            width: 32,
        },
        patch: PatchSpec::covering(32, 32, 16, 16).unwrap(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let random_tensor = |rng: &mut ChaCha8Rng, i: usize| {
        let bits = rng.gen_range(2..=16u8);
        let spread = rng.gen_range(0..=max_symbol(bits));
        let shape: Vec<usize> = (0..rng.gen_range(1..=3)).map(|_| rng.gen_range(1..=12)).collect();
        let n = shape.iter().product();
        QuantizedTensor {
            name: format!("t{i:04}"),
            shape,
            bits,
            scale: rng.gen_range(1e-4f32..2.0),
            symbols: (0..n).map(|_| rng.gen_range(-spread..=spread)).collect(),
        }
    };
    let mut lossy = 0;
    for i in 0..200 {
        let t = random_tensor(&mut rng, i);
        let back = entropy_decode(&entropy_encode(&header, std::slice::from_ref(&t)).unwrap());
        if !matches!(back, Ok(b) if b.tensors == vec![t]) {
            lossy += 1;
        }
    }
    let ts: Vec<QuantizedTensor> = (0..5).map(|i| random_tensor(&mut rng, i)).collect();
    let bytes = entropy_encode(&header, &ts).unwrap();
    let mut silent = 0;
    for _ in 0..100 {
        let mut bad = bytes.clone();
        let pos = rng.gen_range(0..bad.len());
        bad[pos] ^= rng.gen_range(1..=255u8);
        if entropy_decode(&bad).is_ok() {
            silent += 1;
        }
    }
    verdict(lossy == 0 && silent == 0, format!("{lossy}/200 lossy round trips, {silent}/100 undetected corruptions"))
}

// ---- criterion 7 ----

fn criterion_7(run: &DeskRun) -> Verdict {
    let o = &run.outcome;
    let float_model = o.train.best_model();
    let mut worst_ratio = 0.0f64;
    let originals = float_model.params();
    let quantized = quantize_model(float_model, 8).expect("quantize");
    for q in &quantized {
        let (_, orig) = originals.iter().find(|(n, _)| *n == q.name).expect("tensor present");
        let err = q.max_error(orig);
        let half = q.scale as f64 / 2.0;
        let ratio = if half > 0.0 { err / half } else if err == 0.0 { 0.0 } else { f64::INFINITY };
        worst_ratio = worst_ratio.max(ratio);
    }
    let float_psnr = evaluate(float_model, &o.prepared.set).expect("evaluate").psnr;
    let parsed = Bitstream::from_bytes(&o.bytes).expect("parse stream");
    let decoded = decode_video(&parsed, parsed.header.model.num_stages).expect("decode");
    let qat_psnr = video_psnr(&decoded, &run.video).expect("psnr");
    let drop = float_psnr - qat_psnr;
    verdict(
        worst_ratio <= 1.0 + 1e-6 && drop <= 0.5 && o.qat_log.len() == 30,
        format!(
            "{} tensors, worst |err|/(scale/2) {worst_ratio:.4}; float {float_psnr:.2} dB, QAT-8 decoded {qat_psnr:.2} dB (drop {drop:.3} dB)",
            quantized.len()
        ),
    )
}

// ---- criterion 8 ----

fn criterion_8(run: &DeskRun) -> Verdict {
    let parsed = Bitstream::from_bytes(&run.outcome.bytes).expect("parse stream");
    let model = parsed.model().expect("dequantize");
    let s = parsed.header.model.num_stages;
    let spec = parsed.header.patch;
    let (frames, h, w) = run.video.dims();
    let patches = enumerate_patches(frames, spec.frame_height(), spec.frame_width(), &spec).unwrap();
    let full_outputs: Vec<Vec<Tensor<f32>>> = patches.iter().map(|(c, _)| model.forward(c).unwrap()).collect();
    let mut notes = Vec::new();
    let mut pass = true;
    for r in 1..=s {
        let decoded = decode_video(&parsed, r).expect("decode level");
        let down = 1usize << (s - r);
        let want_dims = (frames, h / down, w / down);
        // Stitch head r of the untruncated forward pass.
        let (fh, fw) = (spec.frame_height() / down, spec.frame_width() / down);
        let mut data = vec![0.0f32; frames * fh * fw * 3];
        for ((_, window), outs) in patches.iter().zip(&full_outputs) {
            let win = window.scaled_down(down);
            let out = outs[r - 1].data();
            let plane = win.height * win.width;
            for y in 0..win.height {
                for x in 0..win.width {
                    let base = ((win.frame * fh + win.y0 + y) * fw + win.x0 + x) * 3;
                    for c in 0..3 {
                        data[base + c] = out[c * plane + y * win.width + x].clamp(0.0, 1.0);
                    }
                }
            }
        }
        let reference = VideoTensor::new(frames, fh, fw, data).unwrap().crop(h / down, w / down).unwrap();
        let dims_ok = decoded.dims() == want_dims;
        let identical = decoded.data().iter().zip(reference.data()).all(|(a, b)| a.to_bits() == b.to_bits())
            && decoded.data().len() == reference.data().len();
        pass &= dims_ok && identical;
        notes.push(format!(
            "level {r} {}x{} {}",
            decoded.width(),
            decoded.height(),
            if identical { "bit-identical" } else { "DIFFERS" }
        ));
    }
    verdict(pass, notes.join(", "))
}

// ---- criterion 9 ----

fn criterion_9() -> Verdict {
    let base = [(0.05, 30.0), (0.1, 32.5), (0.2, 34.8), (0.4, 36.9), (0.8, 38.7)];
    let curve = |k: f64| {
        let pts: Vec<(f64, f64)> = base.iter().map(|&(b, q)| (b * k, q)).collect();
        RDCurve::from_pairs("c", Metric::Psnr, &pts).unwrap()
    };
    let reference = curve(1.0);
    let same = bd_rate(&reference, &curve(1.0)).unwrap();
    let half = bd_rate(&reference, &curve(0.5)).unwrap();
    let double = bd_rate(&reference, &curve(2.0)).unwrap();
    let other: Vec<(f64, f64)> = base.iter().map(|&(b, q)| (b * 0.8, q + 0.4 * (b * 10.0).sin())).collect();
    let test = RDCurve::from_pairs("t", Metric::Psnr, &other).unwrap();
    let plain = bd_rate(&reference, &test).unwrap();
    let scaled_test: Vec<(f64, f64)> = other.iter().map(|&(b, q)| (b * 7.3, q)).collect();
    let rescaled = bd_rate(&curve(7.3), &RDCurve::from_pairs("t", Metric::Psnr, &scaled_test).unwrap()).unwrap();
    let pass = same.abs() < 1e-9
        && (half + 50.0).abs() <= 0.01
        && (double - 100.0).abs() <= 0.01
        && (plain - rescaled).abs() <= 1e-9;
    verdict(
        pass,
        format!(
            "identical {same:+.2e}%, x0.5 {half:+.4}%, x2 {double:+.4}%, rescale shift {:.1e}",
            (plain - rescaled).abs()
        ),
    )
}

// ---- criterion 10 ----

struct SplitMix64(u64);

impl SplitMix64 {
    fn unit(&mut self) -> f64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        ((z ^ (z >> 31)) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

/// TensorFlow `ssim_multiscale` (max_val 1, default window and weights)
/// on the pairs produced by [`ms_ssim_pair`].
const TF_MS_SSIM: [f64; 10] = [
    0.9958464503288269,
    0.9834704399108887,
    0.9654224514961243,
    0.9370501637458801,
    0.9113747477531433,
    0.8746034502983093,
    0.8365168571472168,
    0.8034362196922302,
    0.7700136303901672,
    0.7262442708015442,
];

fn ms_ssim_pair(index: usize) -> (Tensor<f64>, Tensor<f64>) {
    const SIDE: usize = 192;
    let mut rng = SplitMix64(1000 + index as u64);
    let n = SIDE * SIDE * 3;
    let x: Vec<f64> = (0..n).map(|_| rng.unit()).collect();
    let noise: Vec<f64> = (0..n).map(|_| rng.unit()).collect();
    let amp = 0.1 * (index + 1) as f64;
    let y: Vec<f64> = x.iter().zip(&noise).map(|(&a, &e)| (a + amp * (e - 0.5)).clamp(0.0, 1.0)).collect();
    let planar = |hwc: &[f64]| {
        let mut out = vec![0.0; hwc.len()];
        for p in 0..SIDE * SIDE {
            for c in 0..3 {
                out[c * SIDE * SIDE + p] = hwc[p * 3 + c];
            }
        }
        Tensor::from_vec(&[3, SIDE, SIDE], out).unwrap()
    };
    (planar(&x), planar(&y))
}

fn criterion_10() -> Verdict {
    let mut worst = 0.0f64;
    let mut identity_exact = true;
    for (i, &want) in TF_MS_SSIM.iter().enumerate() {
        let (x, y) = ms_ssim_pair(i);
        worst = worst.max((ms_ssim(&x, &y).unwrap() - want).abs());
        identity_exact &= ms_ssim(&x, &x).unwrap() == 1.0;
    }
    verdict(
        worst <= 1e-4 && identity_exact,
        format!("max deviation {worst:.2e} over 10 pairs, identity exactly 1.0: {identity_exact}"),
    )
}

// ---- criterion 11 ----

fn final_psnr(log: &[EpochLog]) -> f64 {
    log.last().and_then(|e| e.eval_psnr).expect("final epoch is evaluated")
}

fn criterion_11(run: &DeskRun) -> Verdict {
    let video = &run.video;
    let mut wins = [0usize; 2];
    let mut rows = Vec::new();
    for &seed in &ABLATION_SEEDS {
        let full = if seed == 0 {
            final_psnr(&run.outcome.train.log)
        } else {
            let mut cfg = RunConfig::default();
            cfg.train.seed = seed;
            let tag = format!("full seed {seed}");
            let (_, out) = pipeline::represent(video, &cfg, &mut progress(&tag)).expect("train");
            final_psnr(&out.log)
        };
        let mut row = format!("seed {seed}: full {full:.2}");
        for (k, ablation) in [Ablation::V1, Ablation::V2].into_iter().enumerate() {
            let cfg = RunConfig {
                ablation: Some(ablation),
                train: fanerv::training::TrainConfig {
                    seed,
                    ..Default::default()
                },
                ..RunConfig::default()
            };
            let tag = format!("{ablation} seed {seed}");
            let (_, out) = pipeline::represent(video, &cfg, &mut progress(&tag)).expect("train");
            let p = final_psnr(&out.log);
            if full > p {
                wins[k] += 1;
            }
            row.push_str(&format!(" {ablation} {p:.2}"));
        }
        eprintln!("  {row}");
        rows.push(row);
    }
    verdict(
        wins[0] >= 2 && wins[1] >= 2,
        format!("full beats v1 in {}/3, v2 in {}/3 ({})", wins[0], wins[1], rows.join("; ")),
    )
}

// ---- criterion 12 ----

fn criterion_12() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let video = moving_checkerboard(4, 32, 32, VIDEO_SEED, Checkerboard { cell: 8.0, ..Checkerboard::default() }).unwrap();
    let frames = dir.path().join("video");
    store_png_sequence(&video, &frames).unwrap();
    let config = dir.path().join("small.toml");
    fs::write(
        &config,
        "[model]\nnum_stages = 2\nbase_channels = 16\n\n[train]\nepochs = 4\nbatch_patches = 4\neval_every = 2\nqat_epochs = 2\n\n[patch]\nheight = 16\nwidth = 16\n",
    )
    .unwrap();
    let mut streams = Vec::new();
    for name in ["a.fnrv", "b.fnrv"] {
        let out = dir.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_fanerv"))
            .args(["encode"])
            .arg(&frames)
            .arg("--config")
            .arg(&config)
            .args(["--seed", "42", "--out"])
            .arg(&out)
            .env("FANERV_DETERMINISTIC", "1")
            .output()
            .unwrap();
        if !status.status.success() {
            return verdict(false, format!("encode failed: {}", String::from_utf8_lossy(&status.stderr)));
        }
        streams.push(fs::read(&out).unwrap());
    }
    let same = streams[0] == streams[1];
    verdict(same, format!("two {}-byte streams, identical: {same}", streams[0].len()))
}

fn main() -> ExitCode {
    let started = Instant::now();
    let mut results: Vec<(usize, Verdict)> = Vec::new();
    let mut report = |n: usize, v: Verdict| {
        println!("criterion {n:>2}: {} {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
        results.push((n, v));
    };

    report(2, criterion_2());
    report(3, criterion_3());
    report(4, criterion_4());
    report(5, criterion_5());
    report(6, criterion_6());
    report(9, criterion_9());
    report(10, criterion_10());
    report(12, criterion_12());

    eprintln!("training the desk-scale model (several minutes)");
    let run = desk_run();
    report(1, criterion_1(&run));
    report(7, criterion_7(&run));
    report(8, criterion_8(&run));
    eprintln!("training ablation variants over {} seeds", ABLATION_SEEDS.len());
    report(11, criterion_11(&run));

    results.sort_by_key(|(n, _)| *n);
    let failed: Vec<usize> = results.iter().filter(|(_, v)| !v.pass).map(|(n, _)| *n).collect();
    println!("\nsummary ({:.1} min):", started.elapsed().as_secs_f64() / 60.0);
    for (n, v) in &results {
        println!("criterion {n:>2}: {}", if v.pass { "PASS" } else { "FAIL" });
    }
    if failed.is_empty() {
        println!("all {} criteria passed", results.len());
        ExitCode::SUCCESS
    } else {
        println!("failed: {failed:?}");
        ExitCode::FAILURE
    }
}
