use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pfloc::ingest::{run_segment, run_track};
use pfloc::{run_experiment, HarnessError, Scenario, ScenarioConfig};
use pfloc_core::segmentation::SegmentParams;

#[derive(Parser)]
#[command(name = "pfloc", version, about = "Localise static objects from segmentation masks and camera poses")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a synthetic scenario over one or more seeds.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Override `n_seeds`.
        #[arg(long)]
        seeds: Option<u64>,
        /// Write every mask and its poses under `seed_<n>/frames`.
        #[arg(long)]
        dump_frames: bool,
        /// Dump every k-th frame.
        #[arg(long)]
        dump_stride: Option<u64>,
    },
    /// Run the tracker over masks on disk.
    Track {
        #[command(flatten)]
        common: Common,
        /// Directory of `NNNNNN.pgm` masks.
        #[arg(long)]
        masks: PathBuf,
        /// Pose log (`frame_id,x,y,z,roll,pitch,yaw`) or a `frames.ndjson` dump.
        #[arg(long)]
        poses: PathBuf,
        /// JSON list of `{"id", "centre"}` targets; enables metrics.
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Turn grayscale PGM frames into masks.
    Segment {
        #[arg(long)]
        images: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = SegmentParams::default().threshold)]
        threshold: u8,
        #[arg(long, default_value_t = SegmentParams::default().erode_iterations)]
        erode: u32,
        #[arg(long, default_value_t = SegmentParams::default().dilate_iterations)]
        dilate: u32,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Override `base_seed`.
    #[arg(long)]
    base_seed: Option<u64>,
}

impl Common {
    fn load(&self, edit: impl FnOnce(&mut ScenarioConfig)) -> Result<Scenario, HarnessError> {
        let mut cfg = ScenarioConfig::load(&self.config)?;
        if let Some(seed) = self.base_seed {
            cfg.base_seed = seed;
        }
        edit(&mut cfg);
        cfg.build()
    }
}

fn execute(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Simulate {
            common,
            seeds,
            dump_frames,
            dump_stride,
        } => {
            let scenario = common.load(|cfg| {
                if let Some(n) = seeds {
                    cfg.n_seeds = n;
                }
                cfg.output.dump_frames |= dump_frames;
                if let Some(k) = dump_stride {
                    cfg.output.dump_stride = k;
                }
            })?;
            let exp = run_experiment(&scenario, Some(&common.out))?;
            let fmt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.2}"));
            println!(
                "{} seeds: rmse min {} m, rmse 200-1k {} m, nlpd min {}",
                exp.runs.len(),
                fmt(exp.summary.rmse_min),
                fmt(exp.summary.rmse_window_mean),
                fmt(exp.summary.nlpd_min),
            );
        }
        Command::Track {
            common,
            masks,
            poses,
            truth,
        } => {
            let scenario = common.load(|_| {})?;
            let steps = run_track(
                &scenario,
                scenario.base_seed,
                &masks,
                &poses,
                truth.as_deref(),
                &common.out,
            )?;
            println!("{} frames tracked", steps.len());
        }
        Command::Segment {
            images,
            out,
            threshold,
            erode,
            dilate,
        } => {
            let params = SegmentParams {
                threshold,
                erode_iterations: erode,
                dilate_iterations: dilate,
            };
            let n = run_segment(&images, &params, &out)?;
            println!("{n} frames segmented");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
