use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gliofuse_cli::{CliResult, DemoNetOptions, Overrides, PipelineConfig, RunOutcome};
use gliofuse_core::postprocess::Connectivity;
use gliofuse_core::staple::FusionMethod;
use gliofuse_netkit::Architecture;
use log::{error, info};

#[derive(Parser)]
#[command(name = "gliofuse", version, about = "Brain tumor segmentation ensemble pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON pipeline configuration; flags below take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    et_min_volume: Option<usize>,
    #[arg(long)]
    staple_tol: Option<f64>,
    #[arg(long)]
    staple_max_iter: Option<usize>,
    /// staple or majority
    #[arg(long)]
    method: Option<FusionMethod>,
    /// ET component connectivity: 6, 18 or 26
    #[arg(long, value_parser = parse_connectivity)]
    connectivity: Option<Connectivity>,
    /// Cases processed concurrently.
    #[arg(long)]
    parallel: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Z-score and percentile-rescale every modality of every case.
    Normalize {
        input: PathBuf,
        output: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Fuse the label maps of several ensemble members.
    Fuse {
        /// Member prediction directory (repeatable); replaces prediction_dirs from the config.
        #[arg(long = "member")]
        members: Vec<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
        /// Fail cases missing from a member instead of skipping them.
        #[arg(long)]
        strict: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Remove small ET components and repair tumor-core holes.
    Postprocess {
        input: PathBuf,
        output: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Dice and HD95 per case and region, written as a JSON report.
    Evaluate {
        pred: PathBuf,
        truth: PathBuf,
        report: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Build a network, run a random forward pass and print its layer table.
    DemoNet {
        /// unet3d, vnet or msavnet
        #[arg(long)]
        arch: Architecture,
        /// Input size: one edge length or DxHxW.
        #[arg(long, default_value = "32", value_parser = parse_size)]
        size: [usize; 3],
        #[arg(long, default_value_t = 1)]
        batch: usize,
        #[arg(long, default_value_t = 4)]
        classes: usize,
        #[arg(long, default_value_t = 32)]
        base_features: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn parse_connectivity(s: &str) -> Result<Connectivity, String> {
    let n: u8 = s.parse().map_err(|_| format!("expected 6, 18 or 26, got {s:?}"))?;
    Connectivity::try_from(n).map_err(|e| e.to_string())
}

fn parse_size(s: &str) -> Result<[usize; 3], String> {
    let parts: Vec<usize> = s
        .split(['x', ','])
        .map(|p| p.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|_| format!("bad size {s:?}"))?;
    match parts[..] {
        [n] => Ok([n; 3]),
        [d, h, w] => Ok([d, h, w]),
        _ => Err(format!("size must be N or DxHxW, got {s:?}")),
    }
}

impl Common {
    fn resolve(&self) -> CliResult<PipelineConfig> {
        let overrides = Overrides {
            et_min_volume: self.et_min_volume,
            staple_tol: self.staple_tol,
            staple_max_iter: self.staple_max_iter,
            method: self.method,
            connectivity: self.connectivity,
            parallel: self.parallel,
        };
        PipelineConfig::resolve(self.config.as_deref(), &overrides)
    }
}

fn finish(name: &str, outcome: RunOutcome) -> i32 {
    info!(
        "{name}: {} succeeded, {} failed, {} skipped",
        outcome.succeeded.len(),
        outcome.failed.len(),
        outcome.skipped.len()
    );
    outcome.exit_code()
}

fn run(command: Command) -> CliResult<i32> {
    Ok(match command {
        Command::Normalize { input, output, common } => {
            finish("normalize", gliofuse_cli::normalize(&common.resolve()?, &input, &output)?)
        }
        Command::Fuse {
            members,
            output,
            strict,
            common,
        } => {
            let mut config = common.resolve()?;
            if !members.is_empty() {
                config.prediction_dirs = members;
            }
            if output.is_some() {
                config.output_dir = output;
            }
            config.strict |= strict;
            finish("fuse", gliofuse_cli::fuse(&config)?)
        }
        Command::Postprocess { input, output, common } => {
            finish("postprocess", gliofuse_cli::postprocess(&common.resolve()?, &input, &output)?)
        }
        Command::Evaluate {
            pred,
            truth,
            report,
            common,
        } => finish("evaluate", gliofuse_cli::evaluate(&common.resolve()?, &pred, &truth, &report)?),
        Command::DemoNet {
            arch,
            size,
            batch,
            classes,
            base_features,
            seed,
        } => {
            let options = DemoNetOptions {
                batch,
                num_classes: classes,
                base_features,
                seed,
                ..DemoNetOptions::new(arch, size)
            };
            print!("{}", gliofuse_cli::demo_net(&options)?);
            0
        }
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let code = match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            error!("{e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}
