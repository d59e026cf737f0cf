use std::path::{Path, PathBuf};
use std::time::Instant;

use fanerv::codec::{decode_video, measure_bpp, Bitstream};
use fanerv::evaluation::{bd_key, bd_rate, export_results, ingest_external_rd, BdTable};
use fanerv::fsutil::{read_file, write_atomic};
use fanerv::model::checkpoint::save_checkpoint;
use fanerv::objectives::{video_ms_ssim, video_psnr};
use fanerv::pipeline::{self, RunConfig};
use fanerv::synthetic::{moving_checkerboard, Checkerboard};
use fanerv::training::{evaluate, EpochLog};
use fanerv::video_io::{load_video, store_png_sequence};
use serde_json::{json, Value};

use crate::config::{load_config, Overrides};
use crate::error::{CliError, CliResult};
use crate::manifest::RunManifest;

fn fmt_db(v: f64) -> String {
    if v.is_infinite() {
        "inf".into()
    } else {
        format!("{v:.4}")
    }
}

struct Log {
    lines: Vec<u8>,
    phase: &'static str,
}

impl Log {
    fn record(&mut self, e: &EpochLog) {
        let mut v = serde_json::to_value(e).expect("log entry serializes");
        v["phase"] = Value::from(self.phase);
        serde_json::to_writer(&mut self.lines, &v).expect("in-memory write");
        self.lines.push(b'\n');
        if let Some(p) = e.eval_psnr {
            eprintln!(
                "[{}] epoch {:>4}  loss {:.5}  train psnr {}  eval psnr {}",
                self.phase,
                e.epoch,
                e.loss_total,
                fmt_db(e.psnr),
                fmt_db(p)
            );
        }
    }
}

fn start(command: &str, video: &Path, cfg_path: Option<&Path>, ov: &Overrides) -> CliResult<(RunConfig, RunManifest)> {
    let cfg = load_config(cfg_path, ov)?;
    if !video.exists() {
        return Err(fanerv::Error::MissingPath(video.to_path_buf()).into());
    }
    let mut manifest = RunManifest::new(command, &[video], Some(cfg.to_value()))?;
    manifest.fingerprint = Some(cfg.effective_train().fingerprint());
    manifest.metric("ablation", cfg.ablation.map(|a| a.to_string()));
    Ok((cfg, manifest))
}

pub fn represent(video_path: &Path, cfg_path: Option<&Path>, ov: &Overrides, out: &Path) -> CliResult<()> {
    let (cfg, mut manifest) = start("represent", video_path, cfg_path, ov)?;
    let t0 = Instant::now();
    let video = load_video(video_path)?;
    eprintln!("run: {}", manifest.fingerprint.as_deref().unwrap_or(""));
    let mut log = Log {
        lines: Vec::new(),
        phase: "train",
    };
    let (prep, outcome) = pipeline::represent(&video, &cfg, &mut |e| log.record(e))?;
    manifest.timings_s.insert("train".into(), t0.elapsed().as_secs_f64());
    let best = outcome.best_model();
    let eval = evaluate(best, &prep.set)?;

    let ckpt = out.join("checkpoint.fnck");
    let state = out.join("state.fnck");
    let metrics = out.join("metrics.jsonl");
    save_checkpoint(best, &ckpt)?;
    outcome.state.save(&state)?;
    write_atomic(&metrics, &log.lines)?;

    let counts = prep.model.parameter_counts();
    println!("final full-resolution PSNR: {} dB", fmt_db(eval.psnr));
    if let Some(m) = eval.ms_ssim {
        println!("MS-SSIM: {m:.6}");
    }
    println!("parameters: total {} (grids {})", counts.total, counts.grids);
    for (i, n) in counts.stages.iter().enumerate() {
        println!("  stage {}: {n}", i + 1);
    }
    manifest.metric("psnr", eval.psnr);
    manifest.metric("ms_ssim", eval.ms_ssim);
    manifest.metric("parameters", &counts.total);
    manifest.metric("stage_parameters", &counts.stages);
    manifest.metric("best_epoch", outcome.state.best.as_ref().map(|b| b.epoch));
    manifest.artifacts.insert("checkpoint".into(), ckpt);
    manifest.artifacts.insert("state".into(), state);
    manifest.artifacts.insert("metrics".into(), metrics);
    manifest.write(&out.join("manifest.json"))
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.{suffix}"))
}

pub fn encode(video_path: &Path, cfg_path: Option<&Path>, ov: &Overrides, out: &Path) -> CliResult<()> {
    let (cfg, mut manifest) = start("encode", video_path, cfg_path, ov)?;
    let t0 = Instant::now();
    let video = load_video(video_path)?;
    eprintln!("run: {}", manifest.fingerprint.as_deref().unwrap_or(""));
    let mut log = Log {
        lines: Vec::new(),
        phase: "train",
    };
    let mut qat_lines = Log {
        lines: Vec::new(),
        phase: "qat",
    };
    let epochs = cfg.effective_train().epochs;
    let mut seen = 0usize;
    let outcome = pipeline::encode(&video, &cfg, &mut |e| {
        if seen < epochs {
            log.record(e)
        } else {
            qat_lines.record(e)
        }
        seen += 1;
    })?;
    manifest.timings_s.insert("encode".into(), t0.elapsed().as_secs_f64());
    write_atomic(out, &outcome.bytes)?;

    // Score what a decoder will actually see.
    let t1 = Instant::now();
    let parsed = Bitstream::from_bytes(&outcome.bytes)?;
    let s = parsed.header.model.num_stages;
    let decoded = decode_video(&parsed, s)?;
    manifest.timings_s.insert("verify_decode".into(), t1.elapsed().as_secs_f64());
    let psnr = video_psnr(&decoded, &video)?;
    let ms = video_ms_ssim(&decoded, &video).ok();
    let bpp = measure_bpp(outcome.bytes.len(), &parsed.header.video)?;
    let float_psnr = evaluate(outcome.train.best_model(), &outcome.prepared.set)?.psnr;

    let metrics = sibling(out, "log.jsonl");
    log.lines.extend_from_slice(&qat_lines.lines);
    write_atomic(&metrics, &log.lines)?;

    println!("stream: {} bytes, {bpp:.6} bpp", outcome.bytes.len());
    println!("decoded PSNR: {} dB (float model {} dB)", fmt_db(psnr), fmt_db(float_psnr));
    if let Some(m) = ms {
        println!("decoded MS-SSIM: {m:.6}");
    }
    manifest.metric("bits", cfg.bits);
    manifest.metric("bytes", outcome.bytes.len());
    manifest.metric("bpp", bpp);
    manifest.metric("psnr", psnr);
    manifest.metric("ms_ssim", ms);
    manifest.metric("float_psnr", float_psnr);
    manifest.metric("ptq_psnr", outcome.ptq_psnr);
    manifest.metric("parameters", outcome.prepared.model.parameter_counts().total);
    manifest.artifacts.insert("stream".into(), out.to_path_buf());
    manifest.artifacts.insert("metrics".into(), metrics);
    manifest.write(&sibling(out, "manifest.json"))
}

pub fn decode(stream_path: &Path, level: Option<usize>, out: &Path) -> CliResult<()> {
    let mut manifest = RunManifest::new("decode", &[stream_path], None)?;
    let t0 = Instant::now();
    let bytes = read_file(stream_path)?;
    let stream = Bitstream::from_bytes(&bytes)?;
    let level = level.unwrap_or(stream.header.model.num_stages);
    let video = decode_video(&stream, level)?;
    let secs = t0.elapsed().as_secs_f64();
    let frames = store_png_sequence(&video, out)?;
    let fps = video.frames() as f64 / secs.max(f64::MIN_POSITIVE);
    let report = json!({
        "level": level,
        "frames": video.frames(),
        "height": video.height(),
        "width": video.width(),
        "seconds": secs,
        "fps": fps,
    });
    let mut bytes = serde_json::to_vec_pretty(&report)?;
    bytes.push(b'\n');
    write_atomic(&out.join("decode.json"), &bytes)?;
    println!(
        "decoded {} frames at level {level}: {}x{}, {fps:.2} fps",
        video.frames(),
        video.width(),
        video.height()
    );
    manifest.metric("level", level);
    manifest.metric("fps", fps);
    manifest.timings_s.insert("decode".into(), secs);
    manifest.artifacts.insert("frames".into(), out.to_path_buf());
    manifest.metric("frame_files", frames.len());
    manifest.write(&out.join("manifest.json"))
}

pub fn eval(
    decoded: &Path,
    reference: &Path,
    ours: Option<&Path>,
    external: Option<&Path>,
    out: Option<&Path>,
) -> CliResult<()> {
    let a = load_video(decoded)?;
    let b = load_video(reference)?;
    if a.dims() != b.dims() {
        return Err(fanerv::Error::InvalidArgument(format!(
            "decoded video is {:?} (frames, height, width), reference is {:?}",
            a.dims(),
            b.dims()
        ))
        .into());
    }
    let psnr = video_psnr(&a, &b)?;
    let ms = video_ms_ssim(&a, &b).ok();
    println!("PSNR: {}", fmt_db(psnr));
    match ms {
        Some(m) => println!("MS-SSIM: {m:.6}"),
        None => println!("MS-SSIM: n/a (frames too small)"),
    }
    let mut inputs = vec![decoded, reference];
    inputs.extend(ours);
    inputs.extend(external);
    let mut manifest = RunManifest::new("eval", &inputs, None)?;
    manifest.metric("psnr", if psnr.is_finite() { json!(psnr) } else { json!("inf") });
    manifest.metric("ms_ssim", ms);

    let mut curves = Vec::new();
    let mut table = BdTable::new();
    if let Some(p) = ours {
        let mine = ingest_external_rd(p)?;
        if let Some(e) = external {
            let theirs = ingest_external_rd(e)?;
            for m in &mine {
                for t in theirs.iter().filter(|t| t.metric == m.metric) {
                    let v = bd_rate(t, m)?;
                    println!("BD-rate {} vs {} ({}): {v:+.4}%", m.codec, t.codec, m.metric);
                    table.insert(bd_key(&m.codec, &t.codec, m.metric), v);
                }
            }
            curves.extend(theirs);
        }
        curves.splice(0..0, mine);
    } else if external.is_some() {
        return Err(CliError::Usage("--external needs --ours with our RD points".into()));
    }
    if let Some(dir) = out {
        if !curves.is_empty() {
            let files = export_results(&curves, &table, dir)?;
            manifest.artifacts.insert("rd_curves".into(), files.rd_curves);
            manifest.artifacts.insert("bd_rates".into(), files.bd_rates);
        }
        manifest.metric("bd_rates", &table);
        manifest.write(&dir.join("manifest.json"))?;
    }
    Ok(())
}

pub fn synth(frames: usize, height: usize, width: usize, seed: u64, out: &Path) -> CliResult<()> {
    let video = moving_checkerboard(frames, height, width, seed, Checkerboard::default())?;
    let files = store_png_sequence(&video, out)?;
    println!("wrote {} frames to {}", files.len(), out.display());
    Ok(())
}
