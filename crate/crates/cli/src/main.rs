//! `fanerv`: fit, compress, decode and score videos.

mod commands;
mod config;
mod error;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fanerv::training::Ablation;

use crate::config::Overrides;

#[derive(Parser, Debug)]
#[command(name = "fanerv", version, about = "Frequency-aware neural video representation codec")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct RunFlags {
    /// TOML or JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides `train.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Component ablation: v1 (no multi-resolution supervision), v2 (no
    /// high-frequency injection), v3 (learnable upsampling only), v4
    /// (bilinear upsampling only).
    #[arg(long, value_parser = parse_ablation)]
    ablation: Option<Ablation>,
    /// Override any config key, e.g. `--set train.epochs=50`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

fn parse_ablation(s: &str) -> Result<Ablation, String> {
    s.parse().map_err(|e: fanerv::Error| e.to_string())
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit a model to a video and save the checkpoint and training log.
    Represent {
        /// PNG directory or raw RGB24 file with a JSON sidecar.
        video: PathBuf,
        #[command(flatten)]
        run: RunFlags,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit, fine-tune with quantization and write a `.fnrv` stream.
    Encode {
        video: PathBuf,
        #[command(flatten)]
        run: RunFlags,
        /// Weight bit depth (overrides `bits`).
        #[arg(long)]
        bits: Option<u32>,
        /// Output stream path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Decode a stream to PNG frames at a resolution level.
    Decode {
        stream: PathBuf,
        /// 1 is the coarsest level; defaults to full resolution.
        #[arg(long)]
        level: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score decoded frames against a reference, optionally with BD-rate
    /// against external RD points.
    Eval {
        decoded: PathBuf,
        reference: PathBuf,
        /// Our RD points, CSV `codec,metric,bpp,quality`.
        #[arg(long)]
        ours: Option<PathBuf>,
        /// External codec RD points, same schema.
        #[arg(long)]
        external: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the synthetic moving-checkerboard test video as PNGs.
    Synth {
        #[arg(long, default_value_t = 16)]
        frames: usize,
        #[arg(long, default_value_t = 128)]
        height: usize,
        #[arg(long, default_value_t = 128)]
        width: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

pub(crate) fn deterministic() -> bool {
    std::env::var("FANERV_DETERMINISTIC").is_ok_and(|v| v == "1")
}

impl RunFlags {
    fn overrides(&self, bits: Option<u32>) -> Overrides {
        Overrides {
            seed: self.seed,
            bits,
            ablation: self.ablation,
            set: self.set.clone(),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if deterministic() {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(1).build_global();
    }
    let res = match cli.command {
        Command::Represent { video, run, out } => commands::represent(&video, run.config.as_deref(), &run.overrides(None), &out),
        Command::Encode { video, run, bits, out } => {
            commands::encode(&video, run.config.as_deref(), &run.overrides(bits), &out)
        }
        Command::Decode { stream, level, out } => commands::decode(&stream, level, &out),
        Command::Eval {
            decoded,
            reference,
            ours,
            external,
            out,
        } => commands::eval(&decoded, &reference, ours.as_deref(), external.as_deref(), out.as_deref()),
        Command::Synth {
            frames,
            height,
            width,
            seed,
            out,
        } => commands::synth(frames, height, width, seed, &out),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
