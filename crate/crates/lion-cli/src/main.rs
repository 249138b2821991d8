//! Command-line surface for the lion library.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::RunConfig;

#[derive(Parser)]
#[command(
    name = "lion",
    about = "Training-free Clifford geometric propagation with a learnable holographic aggregation head",
    version
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthetic multimodal-attributed graph (or import text
    /// matrices) and write a MAG1 dataset file.
    GenData(CommonArgs),
    /// Lift, build edge geometry, propagate, and write the CGP1 stack cache
    /// plus per-layer Dirichlet energies.
    Precompute(CommonArgs),
    /// Train the aggregation head on a cached stack and write metrics.
    Train(CommonArgs),
    /// Evaluate a trained checkpoint (or the initialized model).
    Eval(CommonArgs),
    /// Run the property-verification suite; exits nonzero on any failure.
    Verify(CommonArgs),
    /// Train and evaluate the full model plus all five module variants.
    Ablate(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Key = value configuration file (applied before environment and flags).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for artifacts and the config echo.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Dataset file path (default <out>/dataset.mag).
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Stack cache path (default <out>/stack.cgp1).
    #[arg(long)]
    cache: Option<PathBuf>,
    /// Model checkpoint path (default <out>/model.aha1).
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// node_classification | link_prediction | node_clustering | modality_retrieval
    #[arg(long)]
    task: Option<String>,
    /// Propagation depth L.
    #[arg(long)]
    depth: Option<usize>,
    /// Damping of the propagation update, in (0, 1].
    #[arg(long)]
    damping: Option<f64>,
    /// Stability constant in the potential denominator.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Rotor exponent scaling: squared (default) or linear.
    #[arg(long, value_name = "squared|linear")]
    rotor_angle_mode: Option<String>,
    /// Run the unscaled propagation update (residual plus full neighbor sum).
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    literal_eq3: Option<bool>,
    /// Module variants to disable: rotor, potential, energy, consensus, scale.
    #[arg(long, value_delimiter = ',')]
    ablate: Vec<String>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    /// Any other configuration key, repeatable: --set key=value.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

fn resolve(args: &CommonArgs) -> Result<RunConfig, lion::error::LionError> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &args.config {
        cfg.apply_file(path)?;
    }
    cfg.apply_env()?;
    for pair in &args.set {
        let (k, v) = pair.split_once('=').ok_or_else(|| {
            lion::error::LionError::Config(format!("--set {pair:?}: expected KEY=VALUE"))
        })?;
        cfg.apply(k.trim(), v)?;
    }
    if let Some(v) = &args.out {
        cfg.out = v.clone();
    }
    if let Some(v) = &args.dataset {
        cfg.dataset = Some(v.clone());
    }
    if let Some(v) = &args.cache {
        cfg.cache = Some(v.clone());
    }
    if let Some(v) = &args.model {
        cfg.model = Some(v.clone());
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = &args.task {
        cfg.task = v.parse()?;
    }
    if let Some(v) = args.depth {
        cfg.depth = v;
    }
    if let Some(v) = args.damping {
        cfg.damping = v;
    }
    if let Some(v) = args.epsilon {
        cfg.epsilon = v;
    }
    if let Some(v) = &args.rotor_angle_mode {
        cfg.rotor_angle_mode = v.parse()?;
    }
    if let Some(v) = args.literal_eq3 {
        cfg.literal_eq3 = v;
    }
    if !args.ablate.is_empty() {
        cfg.ablate = args.ablate.clone();
    }
    if let Some(v) = args.epochs {
        cfg.epochs = v;
    }
    if let Some(v) = args.lr {
        cfg.lr = Some(v);
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.cmd {
        Cmd::GenData(args) => resolve(args).and_then(|cfg| commands::cmd_gen_data(&cfg)),
        Cmd::Precompute(args) => resolve(args).and_then(|cfg| commands::cmd_precompute(&cfg)),
        Cmd::Train(args) => resolve(args).and_then(|cfg| commands::cmd_train(&cfg)),
        Cmd::Eval(args) => resolve(args).and_then(|cfg| commands::cmd_eval(&cfg)),
        Cmd::Ablate(args) => resolve(args).and_then(|cfg| commands::cmd_ablate(&cfg)),
        Cmd::Verify(args) => {
            match resolve(args).and_then(|cfg| commands::cmd_verify(&cfg)) {
                Ok(true) => return ExitCode::SUCCESS,
                Ok(false) => {
                    eprintln!("verification failed");
                    return ExitCode::FAILURE;
                }
                Err(e) => Err(e),
            }
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
