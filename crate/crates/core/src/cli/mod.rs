//! Command-line front end.
//!
//! Exit codes: 0 on success (per-clip failures are reported but tolerated),
//! 1 when a clip fails under `--strict` or a command cannot complete, 2 for
//! usage errors such as bad flags, an unreadable or empty manifest, or an
//! invalid configuration.

mod commands;
pub mod manifest;
pub mod stats;
pub mod visualize;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use commands::{
    cmd_genmask, cmd_heatmap, cmd_preprocess, load_bundle, plan_file_name, Job, Outcome, GENMASK_REPORT,
    GENMASK_SUMMARY, PREPROCESS_REPORT,
};

use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::maskgen::Stream;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CLIP_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "signmask",
    version,
    about = "Sign-video preprocessing, mask planning and heatmaps"
)]
pub struct Cli {
    /// Pipeline config file (`key = value` lines).
    #[arg(long, global = true, env = "SIGNMASK_CONFIG")]
    pub config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true, default_value_t = 0)]
    pub jobs: usize,
    /// Exit nonzero when any clip fails.
    #[arg(long, global = true)]
    pub strict: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct BatchArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Crop, resample and trim source clips into tokenizable bundles.
    Preprocess(BatchArgs),
    /// Write mask plans for every clip and stream.
    Genmask {
        #[command(flatten)]
        batch: BatchArgs,
        /// Comma-separated subset of video-tube, video-st, keypoint-st.
        #[arg(long, value_delimiter = ',', value_parser = parse_stream)]
        streams: Option<Vec<Stream>>,
    },
    /// Render keypoint heatmap dumps.
    Heatmap(BatchArgs),
    /// Draw mask overlays for one clip and stream.
    Visualize {
        #[arg(long)]
        clip: String,
        #[arg(long, value_parser = parse_stream)]
        stream: Stream,
        /// Directory holding the plan files; defaults to --out.
        #[arg(long)]
        plans: Option<PathBuf>,
        /// Raw RGB frame dump.
        #[arg(long)]
        frames: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Summarise plans and reports in a genmask output directory.
    Stats {
        #[arg(long)]
        out: PathBuf,
        /// Preprocessing report; defaults to report.jsonl in --out.
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

fn parse_stream(s: &str) -> std::result::Result<Stream, String> {
    Stream::from_name(s).ok_or_else(|| format!("unknown stream {s:?}; expected video-tube, video-st or keypoint-st"))
}

fn load_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path).map_err(|e| match e {
            Error::Io { path, source } => Error::Usage(format!("cannot read config {}: {source}", path.display())),
            other => other,
        })?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn batch_job(cli: &Cli, cfg: PipelineConfig, batch: &BatchArgs, streams: Vec<Stream>) -> Job {
    Job {
        config: cfg,
        manifest: batch.manifest.clone(),
        out: batch.out.clone(),
        streams,
        jobs: cli.jobs,
    }
}

/// Runs a parsed command line and returns the process exit code.
pub fn execute(cli: &Cli) -> Result<i32> {
    let cfg = load_config(cli)?;
    let outcome = match &cli.command {
        Command::Preprocess(batch) => cmd_preprocess(&batch_job(cli, cfg, batch, vec![]))?,
        Command::Genmask { batch, streams } => {
            let streams = streams.clone().unwrap_or_else(|| Stream::ALL.to_vec());
            cmd_genmask(&batch_job(cli, cfg, batch, streams))?
        }
        Command::Heatmap(batch) => cmd_heatmap(&batch_job(cli, cfg, batch, vec![]))?,
        Command::Visualize {
            clip,
            stream,
            plans,
            frames,
            out,
        } => {
            let plans = plans.as_deref().unwrap_or(out);
            visualize::cmd_visualize(plans, clip, stream.name(), frames.as_deref(), out)?;
            Outcome { clips: 1, failed: 0 }
        }
        Command::Stats { out, report } => {
            let stats = stats::collect(out, report.as_deref())?;
            stats::print(&stats, &mut std::io::stdout().lock()).map_err(|e| Error::io("<stdout>", e))?;
            Outcome {
                clips: stats.rows.len(),
                failed: stats.failed,
            }
        }
    };
    Ok(if cli.strict && outcome.failed > 0 {
        EXIT_CLIP_FAILURE
    } else {
        EXIT_OK
    })
}

/// Parses `args` (program name first), runs the command and returns the
/// exit code, printing any error to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                Error::Usage(_) | Error::InvalidConfig(_) => EXIT_USAGE,
                _ => EXIT_CLIP_FAILURE,
            }
        }
    }
}
