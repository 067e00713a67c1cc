use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use colcomplete::config::{ExperimentConfig, GridSpec, Mode};

#[derive(Parser)]
#[command(
    name = "colcomplete",
    about = "Low-rank reconstruction experiments from sampled columns with polynomial side information",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve single instances and report per-trial errors
    Solve(RunArgs),
    /// Error versus number of sampled columns
    SweepD(RunArgs),
    /// Error versus noise level at fixed d
    SweepNoise(RunArgs),
    /// Smallest column budget for exact noiseless recovery per rank
    SweepMinD(RunArgs),
    /// Solve one instance and emit the full diagnostic report
    TheoryReport(RunArgs),
    /// Check a config and list every violated constraint
    Validate(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON experiment configuration
    #[arg(long)]
    config: PathBuf,
    /// Output directory (must be empty unless --force)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Allow writing into a non-empty output directory
    #[arg(long)]
    force: bool,
    /// Interpret configured column indices as 1-based
    #[arg(long)]
    one_based: bool,
    /// Worker threads for trials (default: all cores)
    #[arg(long)]
    threads: Option<usize>,
    /// Write fitted factors per trial under <out>/models/
    #[arg(long)]
    save_models: bool,
    /// Record per-trial wall-clock in results.csv (breaks bit-for-bit
    /// reproducibility of the CSV)
    #[arg(long)]
    timing: bool,
    /// Rescale basis rows to unit norm inside the coefficient fit
    #[arg(long)]
    normalize_basis: bool,
    /// Read the coordinate grid from a file (one value per line)
    #[arg(long)]
    grid_file: Option<PathBuf>,
    /// Use the default grid with this many points
    #[arg(long, value_name = "M")]
    grid_default: Option<usize>,
    /// Estimate baseline row factors from the fitted polynomial model
    /// instead of sampling true rows (file data)
    #[arg(long)]
    hybrid_rows: bool,
}

fn apply_overrides(cfg: &mut ExperimentConfig, args: &RunArgs, mode: Option<Mode>) {
    if let Some(mode) = mode {
        cfg.mode = mode;
    }
    if args.out.is_some() {
        cfg.out = args.out.clone();
    }
    cfg.force |= args.force;
    cfg.save_models |= args.save_models;
    cfg.timing |= args.timing;
    cfg.hybrid_rows |= args.hybrid_rows;
    if args.normalize_basis {
        cfg.solver.normalize_basis = true;
    }
    if args.threads.is_some() {
        cfg.threads = args.threads;
    }
    let grid_override = if let Some(path) = &args.grid_file {
        Some(GridSpec::File { path: path.clone() })
    } else if args.grid_default.is_some() {
        Some(GridSpec::Default)
    } else {
        None
    };
    if let Some(grid) = grid_override {
        match &mut cfg.data {
            colcomplete::DataSpec::Synthetic { grid: g, .. } => *g = Some(grid),
            colcomplete::DataSpec::File { grid: g, .. } => *g = Some(grid),
        }
    }
}

fn load(args: &RunArgs, mode: Option<Mode>) -> anyhow::Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load_with_base(&args.config, args.one_based)?;
    apply_overrides(&mut cfg, args, mode);
    if let Some(points) = args.grid_default {
        if let colcomplete::DataSpec::Synthetic { m, .. } = &cfg.data {
            anyhow::ensure!(
                points == *m,
                "--grid-default {points} does not match the {m} data columns"
            );
        }
    }
    Ok(cfg)
}

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();

    let (args, mode) = match &cli.command {
        Command::Solve(a) => (a, Some(Mode::Solve)),
        Command::SweepD(a) => (a, Some(Mode::SweepD)),
        Command::SweepNoise(a) => (a, Some(Mode::SweepNoise)),
        Command::SweepMinD(a) => (a, Some(Mode::SweepMinD)),
        Command::TheoryReport(a) => (a, Some(Mode::TheoryReport)),
        Command::Validate(a) => (a, None),
    };
    let cfg = load(args, mode)?;

    if matches!(cli.command, Command::Validate(_)) {
        let diags = cfg.validate();
        if diags.is_empty() {
            println!("config ok");
        } else {
            for d in &diags {
                println!("diagnostic: {d}");
            }
        }
        return Ok(());
    }

    let artifacts = colcomplete::run(&cfg)?;
    println!(
        "{} rows -> {}",
        artifacts.row_count,
        artifacts.results_csv.display()
    );
    println!("summary -> {}", artifacts.summary_json.display());
    if let Some(theory) = &artifacts.theory_json {
        println!("theory  -> {}", theory.display());
        if cfg.mode == Mode::TheoryReport {
            println!("{}", std::fs::read_to_string(theory)?);
        }
    }
    Ok(())
}
