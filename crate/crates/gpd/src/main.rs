use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gpd_core::coarsening::{build_hierarchy, DEFAULT_GAMMA};
use gpd_core::experiments::{self, DenoiseSpec, ExperimentConfig, ExperimentKind};
use gpd_core::io::load_edge_list;
use gpd_core::Error;

const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(name = "gpd", version, about = "Graph-signal denoising with untrained graph networks")]
struct Cli {
    /// More log output (repeatable); RUST_LOG takes precedence.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// TOML or JSON file merged over the experiment's defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Master seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Trial count override.
    #[arg(long)]
    trials: Option<usize>,
    /// Output directory.
    #[arg(long, env = "GPD_OUT")]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// NMSE per epoch when fitting clean, noise-only and noisy targets.
    FitCurves(RunArgs),
    /// Eigenvector similarity between the graph and the expected squared Jacobian.
    Eigsim(RunArgs),
    /// Denoiser comparison on bandlimited signals.
    CompareBl(RunArgs),
    /// Denoiser comparison on diffused-white signals.
    CompareDw(RunArgs),
    /// Monte-Carlo squared Jacobians against the closed form.
    JacobianCheck(RunArgs),
    /// Early-stopping error bound and observed gradient-descent error.
    BoundCurve(RunArgs),
    /// Denoise CSV signals as configured in a [denoise] section.
    DenoiseFile(RunArgs),
    /// Denoise CSV signals with one method.
    Denoise(DenoiseArgs),
    /// Print an experiment's default configuration.
    Defaults { experiment: String },
    /// Export the coarsening hierarchy of a graph as JSON.
    Hierarchy(HierarchyArgs),
}

#[derive(Args)]
struct DenoiseArgs {
    /// Edge list with header src,dst[,weight].
    #[arg(long)]
    graph: PathBuf,
    /// Signals with header node,value or node,sig_0,...
    #[arg(long)]
    signal: PathBuf,
    /// bl, lr, tv, med or a model name from the config.
    #[arg(long)]
    method: String,
    /// Clean signals for scoring.
    #[arg(long)]
    reference: Option<PathBuf>,
    /// Model and fit settings.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    bl_k: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Also write fitted weights.
    #[arg(long)]
    checkpoint: bool,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, env = "GPD_OUT")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct HierarchyArgs {
    #[arg(long)]
    graph: PathBuf,
    /// Layer sizes from coarsest to the node count, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    sizes: Vec<usize>,
    #[arg(long, default_value_t = DEFAULT_GAMMA)]
    gamma: f64,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn load(kind: ExperimentKind, config: Option<&PathBuf>) -> Result<ExperimentConfig, Error> {
    match config {
        Some(path) => ExperimentConfig::load(kind, path),
        None => ExperimentConfig::defaults(kind),
    }
}

fn run_experiment(kind: ExperimentKind, args: RunArgs) -> Result<(), Error> {
    let mut cfg = load(kind, args.config.as_ref())?;
    if let Some(seed) = args.seed {
        cfg.master_seed = seed;
    }
    if let Some(trials) = args.trials {
        cfg.trials = trials;
    }
    if let Some(out) = args.out {
        cfg.output_dir = out;
    }
    cfg.validate()?;
    log::info!("{kind}: {} trials, seed {}, {} jobs", cfg.trials, cfg.master_seed, args.jobs);
    for path in experiments::run(&cfg, args.jobs)? {
        println!("{}", path.display());
    }
    Ok(())
}

fn run_denoise(args: DenoiseArgs) -> Result<(), Error> {
    let mut cfg = load(ExperimentKind::DenoiseFile, args.config.as_ref())?;
    let base = cfg.denoise.take();
    cfg.denoise = Some(DenoiseSpec {
        graph: args.graph,
        signal: args.signal,
        reference: args.reference,
        methods: vec![args.method],
        bl_k: args.bl_k.or(base.as_ref().and_then(|d| d.bl_k)),
        alpha: args.alpha.or(base.as_ref().map(|d| d.alpha)).unwrap_or(1.0),
        med_passes: base.as_ref().map_or(1, |d| d.med_passes),
        checkpoints: args.checkpoint,
    });
    if let Some(seed) = args.seed {
        cfg.master_seed = seed;
    }
    if let Some(out) = args.out {
        cfg.output_dir = out;
    }
    for path in experiments::run(&cfg, 1)? {
        println!("{}", path.display());
    }
    Ok(())
}

fn run_hierarchy(args: HierarchyArgs) -> Result<(), Error> {
    let g = load_edge_list(&args.graph, None)?;
    let json = build_hierarchy(&g, &args.sizes, args.gamma)?.to_json()?;
    match args.out {
        Some(path) => std::fs::write(path, json + "\n")?,
        None => println!("{json}"),
    }
    Ok(())
}

fn dispatch(command: Command) -> Result<(), Error> {
    match command {
        Command::FitCurves(a) => run_experiment(ExperimentKind::FitCurves, a),
        Command::Eigsim(a) => run_experiment(ExperimentKind::Eigsim, a),
        Command::CompareBl(a) => run_experiment(ExperimentKind::CompareBl, a),
        Command::CompareDw(a) => run_experiment(ExperimentKind::CompareDw, a),
        Command::JacobianCheck(a) => run_experiment(ExperimentKind::JacobianCheck, a),
        Command::BoundCurve(a) => run_experiment(ExperimentKind::BoundCurve, a),
        Command::DenoiseFile(a) => run_experiment(ExperimentKind::DenoiseFile, a),
        Command::Denoise(a) => run_denoise(a),
        Command::Defaults { experiment } => {
            let kind = ExperimentKind::from_name(&experiment)
                .ok_or_else(|| Error::Config(format!("unknown experiment {experiment}")))?;
            print!("{}", kind.defaults());
            Ok(())
        }
        Command::Hierarchy(a) => run_hierarchy(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { EXIT_CONFIG } else { EXIT_RUNTIME })
        }
    }
}
