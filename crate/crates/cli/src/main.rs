use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use cqpolar::hilbert::Truncation;
use cqpolar::polar::PolarCode;
use cqpolar::qsim::NoisyReceiver;
use cqpolar::rates::{dolinar_pie, evaluate_point, holevo_pie, optimize_alpha, ChannelModel, NoiselessModel};
use cqpolar::scdecoder::{build_sc_povm_with, effective_channel};
use cqpolar_cli::config::{ExperimentConfig, NoiseKind, NoiseSpec};
use cqpolar_cli::selftest::run_selftest;
use cqpolar_cli::sweep::{write_csv, write_outputs};
use cqpolar_cli::{run_sweep, CliError};

#[derive(Parser)]
#[command(name = "cqpolar", version, about = "Polar-code quantum receiver sweeps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate a config's grid and write CSV plus a metadata sidecar.
    Sweep(SweepArgs),
    /// Print the successive-cancellation POVM as JSON.
    DumpPovm(PointArgs),
    /// Print the effective classical channel as JSON.
    DumpTransition(PointArgs),
    /// Optimize the input distribution (and optionally α) at one point.
    OptimizePoint(OptimizeArgs),
    /// Check the reference matrices and circuit/POVM agreement.
    Selftest,
}

/// Fields a flag may override in the config file.
#[derive(Args)]
struct Overrides {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Number of time bins (2, 4 or 8), built-in frozen set.
    #[arg(long)]
    n_bins: Option<usize>,
    #[arg(long)]
    noise_kind: Option<String>,
    /// Gate error model: independent, uniform or paired.
    #[arg(long)]
    model: Option<String>,
    /// Comma-separated error probabilities.
    #[arg(long, value_delimiter = ',')]
    noise_p: Option<Vec<f64>>,
    #[arg(long)]
    max_photons: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    overrides: Overrides,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long)]
    optimize_alpha: bool,
}

#[derive(Args)]
struct PointArgs {
    #[command(flatten)]
    overrides: Overrides,
    #[arg(long, conflicts_with = "nbar")]
    alpha: Option<f64>,
    #[arg(long)]
    nbar: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OptimizeArgs {
    #[command(flatten)]
    point: PointArgs,
    /// Search α over the config grid instead of using a fixed point.
    #[arg(long)]
    optimize_alpha: bool,
}

fn load(overrides: &Overrides) -> Result<ExperimentConfig, CliError> {
    let mut config = match &overrides.config {
        Some(path) => ExperimentConfig::from_path(path)?,
        None => ExperimentConfig::from_json(
            r#"{"name": "cli", "code": {"n_bins": 4}, "grid": {"variable": "nbar", "min": 1e-4, "max": 1e-1, "points": 13}}"#,
        )?,
    };
    if let Some(n) = overrides.n_bins {
        config.code.n_bins = n;
        config.code.k_info = None;
        config.code.frozen = None;
    }
    if let Some(kind) = &overrides.noise_kind {
        config.noise.kind = kind.parse::<NoiseKind>()?;
        if config.noise.kind == NoiseKind::None {
            config.noise = NoiseSpec::default();
        }
    }
    if let Some(model) = &overrides.model {
        config.noise.model = model.clone();
    }
    if let Some(p) = &overrides.noise_p {
        config.noise.p = p.clone();
    }
    if let Some(m) = overrides.max_photons {
        config.multiphoton.max_photons = m;
    }
    if let Some(seed) = overrides.seed {
        config.seed = seed;
    }
    config.validate()?;
    Ok(config)
}

fn point_alpha(args: &PointArgs) -> Result<f64, CliError> {
    match (args.alpha, args.nbar) {
        (Some(a), None) if a >= 0.0 && a.is_finite() => Ok(a),
        (None, Some(n)) if n >= 0.0 && n.is_finite() => Ok(n.sqrt()),
        (None, None) => Err(CliError::field("alpha", "pass --alpha or --nbar")),
        _ => Err(CliError::field("alpha", "must be finite and non-negative")),
    }
}

fn single_p(config: &ExperimentConfig) -> Result<f64, CliError> {
    match config.noise.p.as_slice() {
        [p] => Ok(*p),
        _ => Err(CliError::field("noise.p", "point commands take exactly one value")),
    }
}

fn model(config: &ExperimentConfig) -> Result<Box<dyn ChannelModel + Send>, CliError> {
    let code = config.code.build()?;
    if config.noise.kind == NoiseKind::None {
        let mut m = NoiselessModel::new(code);
        m.truncation = config.truncation();
        m.policy = config.multiphoton.policy;
        m.eigen_tol = config.tolerances.eigen_tol;
        return Ok(Box::new(m));
    }
    Ok(Box::new(NoisyReceiver::new(&code, config.noise.at(single_p(config)?)?)?))
}

fn emit(text: &str, out: Option<&Path>) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| CliError::Io(path.display().to_string(), e)),
        None => match writeln!(std::io::stdout().lock(), "{text}") {
            // a closed pipe (e.g. `| head`) is not an error
            Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(CliError::Io("stdout".into(), e)),
            _ => Ok(()),
        },
    }
}

fn run(cli: Cli) -> Result<ExitCode, CliError> {
    match cli.command {
        Command::Sweep(args) => {
            let mut config = load(&args.overrides)?;
            if args.optimize_alpha {
                config.optimize_alpha = true;
            }
            if let Some(out) = args.out {
                config.output = Some(out);
            }
            let output = run_sweep(&config, args.workers)?;
            match &config.output {
                Some(path) => {
                    write_outputs(&output, path)?;
                    eprintln!("wrote {} rows to {}", output.rows.len(), path.display());
                }
                None => {
                    let stdout = std::io::stdout();
                    write_csv(&output.rows, stdout.lock())?;
                    stdout.lock().flush().map_err(|e| CliError::Io("stdout".into(), e))?;
                }
            }
        }
        Command::DumpPovm(args) => {
            let config = load(&args.overrides)?;
            let alpha = point_alpha(&args)?;
            let code: PolarCode = config.code.build()?;
            let povm = build_sc_povm_with(&code, alpha, config.truncation(), config.tolerances.eigen_tol)?;
            let text = serde_json::to_string_pretty(&povm.export()).expect("export serializes");
            emit(&text, args.out.as_deref())?;
        }
        Command::DumpTransition(args) => {
            let config = load(&args.overrides)?;
            let alpha = point_alpha(&args)?;
            let channel = if config.noise.kind == NoiseKind::None {
                let code = config.code.build()?;
                let truncation: Truncation = config.truncation();
                let povm = build_sc_povm_with(&code, alpha, truncation, config.tolerances.eigen_tol)?;
                effective_channel(&code, alpha, &povm, config.multiphoton.policy)?
            } else {
                model(&config)?.channel(alpha)?
            };
            let text = serde_json::to_string_pretty(&channel.export()).expect("export serializes");
            emit(&text, args.out.as_deref())?;
        }
        Command::OptimizePoint(args) => {
            let config = load(&args.point.overrides)?;
            let m = model(&config)?;
            let id = format!("{}/optimize-point", config.name);
            let point = if args.optimize_alpha {
                let grid = config.grid.alphas()?;
                optimize_alpha(m.as_ref(), &grid, &config.tolerances.alpha_search(), &id)?
            } else {
                evaluate_point(m.as_ref(), point_alpha(&args.point)?, &config.tolerances.ba(), &id)?
            };
            let report = serde_json::json!({
                "point": point,
                "baseline_dolinar_pie": dolinar_pie(point.nbar)?,
                "baseline_holevo_pie": holevo_pie(point.nbar)?,
            });
            emit(&serde_json::to_string_pretty(&report).expect("report serializes"), args.point.out.as_deref())?;
        }
        Command::Selftest => {
            let results = run_selftest();
            for r in &results {
                println!("{}  {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
            }
            if results.iter().any(|r| !r.passed) {
                return Ok(ExitCode::FAILURE);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
