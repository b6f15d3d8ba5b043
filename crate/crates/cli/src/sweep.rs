//! Grid evaluation on a worker pool, written back in grid order.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use cqpolar::qsim::NoisyReceiver;
use cqpolar::rates::{dolinar_pie, evaluate_point, holevo_pie, optimize_alpha, ChannelModel, NoiselessModel, RatePoint};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ExperimentConfig, NoiseKind};
use crate::CliError;

pub const CSV_HEADER: [&str; 9] = [
    "nbar",
    "alpha",
    "I_bits",
    "pie",
    "baseline_dolinar_pie",
    "baseline_holevo_pie",
    "config_id",
    "noise_p",
    "optimal_input",
];

/// One CSV row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub nbar: f64,
    pub alpha: f64,
    #[serde(rename = "I_bits")]
    pub mutual_information_bits: f64,
    pub pie: f64,
    pub baseline_dolinar_pie: f64,
    pub baseline_holevo_pie: f64,
    pub config_id: String,
    pub noise_p: f64,
    /// `label=probability` pairs joined by `;`.
    pub optimal_input: String,
}

impl Row {
    fn from_point(point: &RatePoint, noise_p: f64) -> Result<Self, CliError> {
        let optimal_input = point
            .input_labels
            .iter()
            .zip(point.optimal_input.probabilities())
            .map(|(l, p)| format!("{l}={p}"))
            .collect::<Vec<_>>()
            .join(";");
        Ok(Self {
            nbar: point.nbar,
            alpha: point.alpha,
            mutual_information_bits: point.mutual_information_bits,
            pie: point.pie,
            baseline_dolinar_pie: dolinar_pie(point.nbar)?,
            baseline_holevo_pie: holevo_pie(point.nbar)?,
            config_id: point.config_id.clone(),
            noise_p,
            optimal_input,
        })
    }
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, Serialize)]
pub struct SweepMetadata {
    pub software: String,
    pub generated_unix_seconds: u64,
    pub config: ExperimentConfig,
    pub alpha_grid: Vec<f64>,
    pub nbar_grid: Vec<f64>,
    pub workers: usize,
    pub rows: usize,
}

#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub rows: Vec<Row>,
    pub metadata: SweepMetadata,
}

type Model = Box<dyn ChannelModel + Send>;

fn build_model(config: &ExperimentConfig, p: f64) -> Result<Model, CliError> {
    let code = config.code.build()?;
    if config.noise.kind == NoiseKind::None {
        let mut model = NoiselessModel::new(code);
        model.truncation = config.truncation();
        model.policy = config.multiphoton.policy;
        model.eigen_tol = config.tolerances.eigen_tol;
        return Ok(Box::new(model));
    }
    Ok(Box::new(NoisyReceiver::new(&code, config.noise.at(p)?)?))
}

fn config_id(config: &ExperimentConfig, p: f64) -> String {
    format!("{}/N{}/{}/p={p}", config.name, config.code.n_bins, config.noise.kind)
}

/// Evaluates every grid point (or, with `optimize_alpha`, every noise value)
/// on `workers` threads. Rows come back in grid order.
pub fn run_sweep(config: &ExperimentConfig, workers: usize) -> Result<SweepOutput, CliError> {
    config.validate()?;
    if workers == 0 {
        return Err(CliError::field("workers", "must be at least 1"));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Pool(e.to_string()))?;
    let alphas = config.grid.alphas()?;
    let ba = config.tolerances.ba();
    let search = config.tolerances.alpha_search();

    let rows = pool.install(|| -> Result<Vec<Row>, CliError> {
        let models = config
            .noise
            .p
            .par_iter()
            .map(|&p| build_model(config, p).map(|m| (p, m)))
            .collect::<Result<Vec<_>, _>>()?;
        if config.optimize_alpha {
            return models
                .par_iter()
                .map(|(p, model)| {
                    let point = optimize_alpha(model.as_ref(), &alphas, &search, &config_id(config, *p))?;
                    Row::from_point(&point, *p)
                })
                .collect();
        }
        let tasks: Vec<(usize, f64)> = (0..models.len())
            .flat_map(|m| alphas.iter().map(move |&a| (m, a)))
            .collect();
        tasks
            .par_iter()
            .map(|&(m, alpha)| {
                let (p, model) = &models[m];
                let point = evaluate_point(model.as_ref(), alpha, &ba, &config_id(config, *p))?;
                Row::from_point(&point, *p)
            })
            .collect()
    })?;

    let metadata = SweepMetadata {
        software: format!("{} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION")),
        generated_unix_seconds: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        config: config.clone(),
        nbar_grid: alphas.iter().map(|a| a * a).collect(),
        alpha_grid: alphas,
        workers,
        rows: rows.len(),
    };
    Ok(SweepOutput { rows, metadata })
}

pub fn write_csv<W: std::io::Write>(rows: &[Row], writer: W) -> Result<(), CliError> {
    // explicit header so an empty sweep still gets one
    let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    out.write_record(CSV_HEADER)?;
    for row in rows {
        out.serialize(row)?;
    }
    out.flush().map_err(|e| CliError::Io("csv output".into(), e))
}

/// Sidecar path next to a CSV file: `out.csv` → `out.meta.json`.
pub fn metadata_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("meta.json")
}

/// Writes the CSV and its metadata sidecar.
pub fn write_outputs(output: &SweepOutput, csv_path: &Path) -> Result<(), CliError> {
    let io = |e| CliError::Io(csv_path.display().to_string(), e);
    if let Some(dir) = csv_path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io)?;
    }
    let file = std::fs::File::create(csv_path).map_err(io)?;
    write_csv(&output.rows, file)?;
    let meta = serde_json::to_string_pretty(&output.metadata).expect("metadata serializes");
    let meta_path = metadata_path(csv_path);
    std::fs::write(&meta_path, meta).map_err(|e| CliError::Io(meta_path.display().to_string(), e))
}
