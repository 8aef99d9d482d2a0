//! Command-line driver for sparse hyperelastic model discovery.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hyperfit::data::{self, generate_synthetic, load_csv, save_csv, NoiseSpec};
use hyperfit::kinematics::ModeKind;
use hyperfit::pipeline::{benchmark, run_discovery, CellReport, RunConfig, ScenarioSpec};
use hyperfit::refine::evaluate_metrics;
use hyperfit::selection::Criterion;
use hyperfit::solvers::Algorithm;

#[derive(Parser)]
#[command(
    name = "hyperfit",
    about = "Discover sparse hyperelastic constitutive models from stress-strain data",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset CSV from a named ground truth.
    Generate(GenerateArgs),
    /// Run discovery cells from a JSON run configuration.
    Discover(DiscoverArgs),
    /// Sweep benchmark scenarios and write a summary table.
    Benchmark(BenchmarkArgs),
    /// Evaluate a saved model report against a dataset.
    Evaluate(EvaluateArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Ground truth name (O2, MR2, MR1O1, MR2O2).
    #[arg(long)]
    truth: String,
    /// Comma-separated mode labels (default UT,PS,EBT).
    #[arg(long)]
    modes: Option<String>,
    /// Samples per mode.
    #[arg(long, default_value_t = 60)]
    n: usize,
    /// Parameter range as lo:hi.
    #[arg(long, default_value = "0.6:5.0")]
    range: String,
    /// Relative noise level.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    /// Noise seed (mandatory when noise > 0).
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DiscoverArgs {
    /// Run configuration JSON.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides the config's out_dir).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Restrict to cells, e.g. "lasso:bic,omp:cv".
    #[arg(long)]
    cells: Option<String>,
}

#[derive(Args)]
struct BenchmarkArgs {
    /// Scenario list JSON.
    #[arg(long)]
    scenarios: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Saved cell report JSON.
    #[arg(long)]
    model: PathBuf,
    /// Dataset CSV.
    #[arg(long)]
    data: PathBuf,
    /// Output JSON path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, Box<dyn std::error::Error>> {
    match cli.command {
        Command::Generate(args) => {
            let truth = data::truths::by_name(&args.truth)
                .ok_or_else(|| format!("unknown ground truth '{}'", args.truth))?;
            let modes = match &args.modes {
                None => data::benchmark_modes(),
                Some(spec) => spec
                    .split(',')
                    .map(|label| {
                        ModeKind::parse(label.trim())
                            .map(hyperfit::kinematics::LoadingMode::standard)
                            .ok_or_else(|| format!("unknown mode label '{label}'"))
                    })
                    .collect::<Result<Vec<_>, _>>()?,
            };
            let (lo, hi) = parse_range(&args.range)?;
            let noise = if args.noise > 0.0 {
                let seed = args
                    .seed
                    .ok_or("a seed is mandatory when noise is requested")?;
                NoiseSpec {
                    relative_std: args.noise,
                    seed,
                }
            } else {
                NoiseSpec::none()
            };
            let dataset = generate_synthetic(&truth, &modes, args.n, (lo, hi), &noise)?;
            save_csv(&dataset, &args.out)?;
            println!(
                "wrote {} observations ({} blocks) to {}",
                dataset.n_obs(),
                dataset.blocks.len(),
                args.out.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Discover(args) => {
            let text = std::fs::read_to_string(&args.config)?;
            let mut config: RunConfig = serde_json::from_str(&text)?;
            if let Some(out) = args.out {
                config.out_dir = Some(out);
            }
            if let Some(seed) = args.seed {
                config.seed = Some(seed);
            }
            if let Some(cells) = &args.cells {
                config.cells = Some(parse_cells(cells)?);
            }
            let run = run_discovery(&config)?;
            for cell in &run.cells {
                match &cell.report {
                    Some(report) => {
                        let terms: Vec<String> = report
                            .model
                            .terms
                            .iter()
                            .map(|t| format!("{}={:.6e}", t.descriptor, t.coefficient))
                            .collect();
                        println!(
                            "{}-{}: {} terms [{}]",
                            cell.algorithm,
                            cell.criterion,
                            report.model.terms.len(),
                            terms.join(", ")
                        );
                    }
                    None => println!(
                        "{}-{}: failed: {}",
                        cell.algorithm,
                        cell.criterion,
                        cell.error.as_deref().unwrap_or("unknown")
                    ),
                }
            }
            if run.any_failed() {
                Ok(ExitCode::FAILURE)
            } else {
                Ok(ExitCode::SUCCESS)
            }
        }
        Command::Benchmark(args) => {
            let text = std::fs::read_to_string(&args.scenarios)?;
            let scenarios: Vec<ScenarioSpec> = serde_json::from_str(&text)?;
            let rows = benchmark(&scenarios, Some(&args.out))?;
            let mut any_failed = false;
            for row in &rows {
                if row.status != "ok" {
                    any_failed = true;
                }
                println!(
                    "{} {} {}: {} recovered={:?} n={:?}",
                    row.scenario,
                    row.algorithm,
                    row.criterion,
                    row.status,
                    row.ground_truth_recovered,
                    row.n_active
                );
            }
            println!("summary written to {}", args.out.display());
            if any_failed {
                Ok(ExitCode::FAILURE)
            } else {
                Ok(ExitCode::SUCCESS)
            }
        }
        Command::Evaluate(args) => {
            let report: CellReport = serde_json::from_str(&std::fs::read_to_string(&args.model)?)?;
            let dataset = load_csv(&args.data)?;
            let lib = report.library.build()?;
            let metrics = evaluate_metrics(&report.model, &dataset, &lib)?;
            let json = serde_json::to_string_pretty(&metrics)?;
            match args.out {
                Some(path) => std::fs::write(path, json)?,
                None => println!("{json}"),
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn parse_range(spec: &str) -> Result<(f64, f64), String> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 2 {
        return Err(format!("range must be lo:hi, got '{spec}'"));
    }
    let lo = parts[0]
        .parse()
        .map_err(|_| format!("invalid range bound '{}'", parts[0]))?;
    let hi = parts[1]
        .parse()
        .map_err(|_| format!("invalid range bound '{}'", parts[1]))?;
    Ok((lo, hi))
}

fn parse_cells(spec: &str) -> Result<Vec<(Algorithm, Criterion)>, String> {
    spec.split(',')
        .map(|cell| {
            let mut parts = cell.trim().split(':');
            let alg = parts
                .next()
                .and_then(Algorithm::parse)
                .ok_or_else(|| format!("bad cell '{cell}' (expected algorithm:criterion)"))?;
            let crit = parts
                .next()
                .and_then(Criterion::parse)
                .ok_or_else(|| format!("bad cell '{cell}' (expected algorithm:criterion)"))?;
            if parts.next().is_some() {
                return Err(format!("bad cell '{cell}'"));
            }
            Ok((alg, crit))
        })
        .collect()
}
