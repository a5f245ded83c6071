//! Command-line interface: argument parsing, configuration and the batch
//! commands.

mod commands;
mod config;
mod image;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use commands::{
    cmd_eval, cmd_render, cmd_segment, cmd_synth, infer_geometry, slice_window, window_file_stem, EvalReport,
    Manifest, Metric, WindowOutput, EVENTS, GEOMETRY, GT_BOXES, GT_MASKS, LABELS, MANIFEST,
};
pub use config::{ConfigOverrides, KernelChoice, RunConfig};
pub use image::{decode_ppm, encode_ppm, label_color, read_ppm, render, write_ppm, RenderStyle, RgbImage, PALETTE};

use crate::error::Error;

/// Environment variable holding the log filter.
pub const LOG_ENV: &str = "EVSEG_LOG";

#[derive(Parser, Debug)]
#[command(name = "evseg", version, about = "Motion segmentation of event-camera streams")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Segment every window of an event file.
    Segment {
        /// Event text file with `t x y p` lines.
        #[arg(long)]
        events: PathBuf,
        /// Sensor geometry file; inferred from the events when absent.
        #[arg(long)]
        geometry: Option<PathBuf>,
        /// Key-value config file; flags override its entries.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        overrides: ConfigOverrides,
    },
    /// Generate a labeled synthetic event stream.
    Synth {
        /// Scene description file.
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Number of evenly spaced ground-truth samples.
        #[arg(long, default_value_t = 50)]
        gt_samples: usize,
    },
    /// Score a segmentation run against ground truth.
    Eval {
        /// Output directory of a segment run.
        #[arg(long)]
        results: PathBuf,
        /// Output directory of a synth run.
        #[arg(long)]
        gt: PathBuf,
        #[arg(long, value_enum)]
        metric: Metric,
        /// Event file to use instead of the one named in the manifest.
        #[arg(long)]
        events: Option<PathBuf>,
        /// Report file; defaults to `eval_<metric>.txt` in the results.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Draw a result document as a color label image.
    Render {
        /// Window result document.
        #[arg(long)]
        result: PathBuf,
        /// Event file the result was computed from.
        #[arg(long)]
        events: PathBuf,
        /// Sensor geometry file; defaults to the one next to the result.
        #[arg(long)]
        geometry: Option<PathBuf>,
        /// Output image file.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = RenderStyle::Iwe)]
        style: RenderStyle,
    },
}

/// Process exit status of an error: 1 usage or configuration, 2 I/O or
/// parsing, 3 evaluation mismatch.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) => 1,
        Error::Parse { .. } | Error::Range { .. } | Error::Io { .. } => 2,
        Error::Eval(_) => 3,
    }
}

pub fn execute(command: Command) -> crate::Result<()> {
    match command {
        Command::Segment {
            events,
            geometry,
            config,
            out,
            overrides,
        } => {
            let file = match &config {
                Some(path) => ConfigOverrides::from_file(path)?,
                None => ConfigOverrides::default(),
            };
            let flags = ConfigOverrides {
                out: Some(out),
                ..overrides
            };
            let run = RunConfig::resolve(flags.over(file))?;
            let outputs = cmd_segment(&events, geometry.as_deref(), &run)?;
            println!("{} windows written to {}", outputs.len(), run.out.display());
        }
        Command::Synth {
            spec,
            seed,
            out,
            gt_samples,
        } => {
            let n = cmd_synth(&spec, seed, &out, gt_samples)?;
            println!("{n} events written to {}", out.display());
        }
        Command::Eval {
            results,
            gt,
            metric,
            events,
            report,
        } => {
            let r = cmd_eval(&results, &gt, metric, events.as_deref())?;
            let text = r.to_text();
            let path = report.unwrap_or_else(|| results.join(format!("eval_{}.txt", metric.name())));
            std::fs::write(&path, &text).map_err(|e| Error::io(&path, e))?;
            print!("{text}");
        }
        Command::Render {
            result,
            events,
            geometry,
            out,
            style,
        } => cmd_render(&result, &events, geometry.as_deref(), &out, style)?,
    }
    Ok(())
}

/// Runs the tool on `args` and returns the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
