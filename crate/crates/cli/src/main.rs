mod render;

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use aex_core::evaluation::{
    eval_correctness, eval_correctness_binary, eval_effectiveness, eval_effectiveness_synthetic, eval_robustness,
    BinaryCorrectnessConfig, CorrectnessConfig, EffectivenessConfig, EffectivenessReport, Policy, RobustnessConfig,
    SetMethod, SyntheticEffectivenessConfig,
};
use aex_core::{
    explain_instance, explain_total_error, gen_binary_logic, gen_linear_artificial, iqr_threshold, load_csv,
    sample_background, save_csv, Activation, Attribution64, Autoencoder64, Dataset64, ExplainConfig, Explanation64,
    Method, NormStats64, PerfectModel, Selection, TrainConfig,
};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::render::{render_html, render_terminal, RenderOptions};

/// Explain autoencoder anomalies with Kernel SHAP.
#[derive(Parser)]
#[command(name = "aex", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset as CSV.
    GenData(GenDataArgs),
    /// Train an autoencoder on the normal rows of a CSV dataset.
    Train(TrainArgs),
    /// Score rows and list those above the IQR threshold.
    Detect(DetectArgs),
    /// Explain anomalous rows.
    Explain(ExplainArgs),
    /// Check explanations against known feature dependencies.
    EvalCorrectness(CorrectnessArgs),
    /// Compare SHAP and LIME on an injected noise feature.
    EvalRobustness(RobustnessArgs),
    /// Measure anomaly-score reduction by explanation-guided substitution.
    EvalEffectiveness(EffectivenessArgs),
    /// Render an explanation document as a terminal or HTML table.
    Render(RenderArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum DataKind {
    Linear,
    Binary,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutputActivation {
    Identity,
    Sigmoid,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum MethodArg {
    Shap,
    Lime,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct SeedArg {
    /// Random seed; falls back to AEX_SEED, then 0.
    #[arg(long, env = "AEX_SEED", default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct GenDataArgs {
    #[arg(long, value_enum, default_value = "linear")]
    kind: DataKind,
    #[arg(long, default_value_t = 15_000)]
    rows: usize,
    #[arg(long, default_value_t = 500)]
    anomalies: usize,
    /// Independent extra bits (binary data only).
    #[arg(long, default_value_t = 16)]
    extra: usize,
    #[command(flatten)]
    seed: SeedArg,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainOptions {
    /// Hidden layer widths, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "4,2,4")]
    hidden: Vec<usize>,
    #[arg(long, default_value_t = 50)]
    epochs: usize,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    #[arg(long, default_value_t = 0.05)]
    learning_rate: f64,
    #[arg(long, default_value_t = 0.0)]
    weight_decay: f64,
    #[arg(long, value_enum, default_value = "identity")]
    output_activation: OutputActivation,
}

impl TrainOptions {
    fn config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            hidden_sizes: self.hidden.clone(),
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            seed,
            output_activation: match self.output_activation {
                OutputActivation::Identity => Activation::Identity,
                OutputActivation::Sigmoid => Activation::Sigmoid,
            },
            weight_decay: self.weight_decay,
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    /// Model file to write.
    #[arg(long)]
    out: PathBuf,
    /// Min-max scale the data first; the statistics are stored next to the
    /// model and reapplied by the other commands.
    #[arg(long)]
    normalize: bool,
    #[command(flatten)]
    train: TrainOptions,
    #[command(flatten)]
    seed: SeedArg,
    /// Training report (JSON); stdout when absent.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct DetectArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExplainArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Rows the background set is drawn from; the data itself when absent.
    #[arg(long)]
    background: Option<PathBuf>,
    /// Rows to explain (0-based, comma separated); the detected anomalies
    /// when absent.
    #[arg(long, value_delimiter = ',')]
    rows: Vec<usize>,
    /// Cap on the number of detected anomalies explained, highest score first.
    #[arg(long)]
    limit: Option<usize>,
    #[arg(long, default_value_t = 0.8)]
    error_percent: f64,
    /// mean, median or topK (e.g. top5).
    #[arg(long, default_value = "top5")]
    selection: Selection,
    #[arg(long, value_enum, default_value = "shap")]
    method: MethodArg,
    #[arg(long, default_value_t = 200)]
    background_size: usize,
    #[arg(long, default_value_t = 5000)]
    lime_samples: usize,
    #[command(flatten)]
    seed: SeedArg,
    /// Entries per polarity shown in rendered tables.
    #[arg(long, default_value_t = 3)]
    display_count: usize,
    /// Attribute the total reconstruction error instead of each high-error
    /// feature.
    #[arg(long)]
    total_error: bool,
    /// Explanation document (JSON); stdout when absent. With a file, the
    /// tables are printed to stdout instead.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    html: Option<PathBuf>,
    /// ANSI colours in printed tables.
    #[arg(long)]
    color: bool,
}

#[derive(Args)]
struct CorrectnessArgs {
    /// Train on AND/OR binary data instead of using the perfect linear models.
    #[arg(long)]
    binary: bool,
    #[arg(long)]
    rows: Option<usize>,
    #[arg(long)]
    anomalies: Option<usize>,
    #[arg(long)]
    background_size: Option<usize>,
    #[arg(long, default_value_t = 0.8)]
    error_percent: f64,
    #[arg(long, default_value = "top2")]
    selection: Selection,
    /// Perfect models to check (linear data only).
    #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
    models: Vec<u8>,
    #[command(flatten)]
    seed: SeedArg,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RobustnessArgs {
    /// Labelled CSV dataset; a generated linear dataset when absent.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, default_value_t = 5_000)]
    rows: usize,
    #[arg(long, default_value_t = 250)]
    anomalies: usize,
    #[arg(long, default_value_t = 1)]
    noise_features: usize,
    #[arg(long, default_value_t = 5)]
    repetitions: usize,
    #[arg(long, default_value_t = 100)]
    max_anomalies: usize,
    #[arg(long, default_value_t = 200)]
    background_size: usize,
    #[arg(long, default_value_t = 5000)]
    lime_samples: usize,
    #[command(flatten)]
    train: RobustnessTrainOptions,
    #[command(flatten)]
    seed: SeedArg,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RobustnessTrainOptions {
    #[arg(long, value_delimiter = ',', default_value = "4")]
    hidden: Vec<usize>,
    #[arg(long, default_value_t = 50)]
    epochs: usize,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    #[arg(long, default_value_t = 0.2)]
    learning_rate: f64,
}

#[derive(Args)]
struct EffectivenessArgs {
    /// Trained model; with --data, replaces the synthetic setup.
    #[arg(long, requires = "data")]
    model: Option<PathBuf>,
    #[arg(long, requires = "model")]
    data: Option<PathBuf>,
    #[arg(long)]
    selection: Option<Selection>,
    #[arg(long, default_value_t = 200)]
    max_anomalies: usize,
    #[arg(long)]
    background_size: Option<usize>,
    #[arg(long, default_value_t = 5000)]
    lime_samples: usize,
    #[command(flatten)]
    seed: SeedArg,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Summary table with the columns of the substitution comparison.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct RenderArgs {
    /// Explanation document written by `explain`.
    #[arg(long)]
    input: PathBuf,
    /// Write a self-contained HTML page instead of printing.
    #[arg(long)]
    html: Option<PathBuf>,
    #[arg(long, default_value_t = 3)]
    display_count: usize,
    #[arg(long)]
    color: bool,
    /// Add the generation time to the HTML page (breaks byte stability).
    #[arg(long)]
    stamp: bool,
}

/// Exit status classes: 1 validation, 2 I/O, 3 numerical.
#[derive(Debug)]
enum CliError {
    Validation(String),
    Io(String),
    Core(aex_core::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Io(_) => 2,
            CliError::Core(e) if e.is_io() => 2,
            CliError::Core(e) if e.is_numerical() => 3,
            CliError::Core(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Validation(m) | CliError::Io(m) => f.write_str(m),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<aex_core::Error> for CliError {
    fn from(e: aex_core::Error) -> Self {
        CliError::Core(e)
    }
}

type CliResult<T = ()> = Result<T, CliError>;

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

const DETECT_SCHEMA: &str = "aex.detect/1";
const TRAIN_SCHEMA: &str = "aex.train/1";
const EXPLANATIONS_SCHEMA: &str = "aex.explanations/1";
const TOTAL_ERROR_SCHEMA: &str = "aex.total-error/1";
const CORRECTNESS_SCHEMA: &str = "aex.correctness/1";
const BINARY_CORRECTNESS_SCHEMA: &str = "aex.binary-correctness/1";
const ROBUSTNESS_SCHEMA: &str = "aex.robustness/1";
const EFFECTIVENESS_SCHEMA: &str = "aex.effectiveness/1";

/// A report with its schema tag in front.
#[derive(Serialize)]
struct Doc<'a, R: Serialize> {
    schema: &'a str,
    #[serde(flatten)]
    body: R,
}

fn to_json<R: Serialize>(schema: &str, body: R) -> CliResult<String> {
    let mut text = serde_json::to_string_pretty(&Doc { schema, body }).map_err(aex_core::Error::from)?;
    text.push('\n');
    Ok(text)
}

fn write_text(path: &Path, text: &str) -> CliResult {
    std::fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn read_text(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// To the file when given, else to stdout.
fn emit(out: Option<&Path>, text: &str) -> CliResult {
    match out {
        Some(p) => write_text(p, text),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Io(format!("stdout: {e}"))),
    }
}

fn sidecar_path(model: &Path) -> PathBuf {
    let mut name = model.file_name().unwrap_or_default().to_os_string();
    name.push(".norm.json");
    model.with_file_name(name)
}

/// Loads a model and, when it references one, its normalisation sidecar
/// (resolved next to the model file).
fn load_model(path: &Path) -> CliResult<(Autoencoder64, Option<NormStats64>)> {
    let (model, stats_ref) = Autoencoder64::load(path)?;
    let stats = match stats_ref {
        None => None,
        Some(name) => {
            let p = path.parent().unwrap_or(Path::new(".")).join(name);
            Some(NormStats64::from_json(&read_text(&p)?)?)
        }
    };
    Ok((model, stats))
}

fn load_scaled(path: &Path, stats: Option<&NormStats64>, width: usize) -> CliResult<Dataset64> {
    let d = load_csv::<f64>(path)?;
    if d.n_features() != width {
        return Err(invalid(format!(
            "{}: {} features, the model expects {width}",
            path.display(),
            d.n_features()
        )));
    }
    Ok(match stats {
        Some(s) => s.apply(&d)?,
        None => d,
    })
}

#[derive(Serialize, Deserialize)]
struct Scored {
    row: usize,
    score: f64,
}

/// Rows above the IQR threshold, highest score first (ties by row).
fn detect(model: &Autoencoder64, d: &Dataset64) -> CliResult<(f64, Vec<Scored>)> {
    let scores = model.anomaly_scores(d.rows().view())?;
    let threshold = iqr_threshold(&scores)?;
    let mut flagged: Vec<Scored> = scores
        .iter()
        .enumerate()
        .filter(|&(_, &s)| s > threshold)
        .map(|(row, &score)| Scored { row, score })
        .collect();
    flagged.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.row.cmp(&b.row)));
    Ok((threshold, flagged))
}

fn cmd_gen_data(a: &GenDataArgs) -> CliResult {
    let d = match a.kind {
        DataKind::Linear => gen_linear_artificial::<f64>(a.rows, a.anomalies, a.seed.seed)?,
        DataKind::Binary => gen_binary_logic::<f64>(a.rows, a.anomalies, a.extra, a.seed.seed)?,
    };
    save_csv(&d, &a.out)?;
    Ok(())
}

#[derive(Serialize)]
struct TrainOutput<'a> {
    config: &'a TrainConfig,
    n_rows: usize,
    normalized: bool,
    epoch_losses: Vec<f64>,
}

fn cmd_train(a: &TrainArgs) -> CliResult {
    let cfg = a.train.config(a.seed.seed);
    cfg.validate()?;
    let raw = load_csv::<f64>(&a.data)?;
    let (data, stats) = if a.normalize {
        let stats = NormStats64::fit(&raw);
        (stats.apply(&raw)?, Some(stats))
    } else {
        (raw, None)
    };
    let train_rows = data.normal_rows();
    if train_rows.n_rows() == 0 {
        return Err(invalid("no normal rows to train on"));
    }
    let mut model = Autoencoder64::build(data.n_features(), &cfg)?;
    let report = model.train(&train_rows, &cfg)?;
    let sidecar = match &stats {
        Some(s) => {
            let p = sidecar_path(&a.out);
            write_text(&p, &s.to_json()?)?;
            p.file_name().map(|n| n.to_string_lossy().into_owned())
        }
        None => None,
    };
    model.save(&a.out, sidecar.as_deref())?;
    let text = to_json(
        TRAIN_SCHEMA,
        TrainOutput {
            config: &cfg,
            n_rows: train_rows.n_rows(),
            normalized: stats.is_some(),
            epoch_losses: report.epoch_losses,
        },
    )?;
    emit(a.report.as_deref(), &text)
}

#[derive(Serialize)]
struct DetectOutput {
    threshold: f64,
    n_rows: usize,
    anomalies: Vec<Scored>,
}

fn cmd_detect(a: &DetectArgs) -> CliResult {
    let (model, stats) = load_model(&a.model)?;
    let d = load_scaled(&a.data, stats.as_ref(), model.n_features())?;
    let (threshold, anomalies) = detect(&model, &d)?;
    let text = match a.format {
        Format::Json => to_json(
            DETECT_SCHEMA,
            DetectOutput {
                threshold,
                n_rows: d.n_rows(),
                anomalies,
            },
        )?,
        Format::Csv => {
            let mut t = String::from("row,score\n");
            for s in &anomalies {
                t.push_str(&format!("{},{}\n", s.row, s.score));
            }
            t
        }
    };
    emit(a.out.as_deref(), &text)
}

#[derive(Serialize, Deserialize)]
struct ExplanationsDoc {
    config: ExplainConfig,
    feature_names: Vec<String>,
    explanations: Vec<Explanation64>,
}

#[derive(Serialize)]
struct RowAttribution {
    row: usize,
    anomaly_score: f64,
    attribution: Attribution64,
}

#[derive(Serialize)]
struct TotalErrorDoc {
    config: ExplainConfig,
    feature_names: Vec<String>,
    attributions: Vec<RowAttribution>,
}

fn cmd_explain(a: &ExplainArgs) -> CliResult {
    let cfg = ExplainConfig {
        error_percent: a.error_percent,
        selection: a.selection,
        method: match a.method {
            MethodArg::Shap => Method::Shap,
            MethodArg::Lime => Method::Lime,
        },
        background_size: a.background_size,
        seed: a.seed.seed,
        lime_samples: a.lime_samples,
        ..ExplainConfig::default()
    };
    cfg.validate()?;
    if a.total_error && a.method == MethodArg::Lime {
        return Err(invalid("--total-error is computed with Kernel SHAP only"));
    }
    if a.display_count == 0 {
        return Err(invalid("--display-count must be at least 1"));
    }
    let (model, stats) = load_model(&a.model)?;
    let d = load_scaled(&a.data, stats.as_ref(), model.n_features())?;
    let bg_source = match &a.background {
        Some(p) => load_scaled(p, stats.as_ref(), model.n_features())?,
        None => d.clone(),
    };
    // small inputs cap the background at what is there
    let cfg = ExplainConfig {
        background_size: a.background_size.min(bg_source.n_rows()),
        ..cfg
    };
    let bg = sample_background(&bg_source, cfg.background_size, a.seed.seed)?;
    let rows: Vec<usize> = if a.rows.is_empty() {
        let (_, flagged) = detect(&model, &d)?;
        flagged
            .iter()
            .map(|s| s.row)
            .take(a.limit.unwrap_or(usize::MAX))
            .collect()
    } else {
        if let Some(&bad) = a.rows.iter().find(|&&r| r >= d.n_rows()) {
            return Err(invalid(format!("row {bad} out of range for {} rows", d.n_rows())));
        }
        a.rows.clone()
    };
    let names = d.feature_names().to_vec();

    if a.total_error {
        let mut attributions = Vec::with_capacity(rows.len());
        for &r in &rows {
            let x = d.row(r).to_vec();
            attributions.push(RowAttribution {
                row: r,
                anomaly_score: model.anomaly_score(&x)?,
                attribution: explain_total_error(&model, &x, &bg, &cfg)?,
            });
        }
        let text = to_json(
            TOTAL_ERROR_SCHEMA,
            TotalErrorDoc {
                config: cfg,
                feature_names: names,
                attributions,
            },
        )?;
        return emit(a.out.as_deref(), &text);
    }

    let mut explanations = Vec::with_capacity(rows.len());
    for &r in &rows {
        let mut e = explain_instance(&model, &d.row(r).to_vec(), &bg, &cfg)?;
        e.instance = Some(r);
        explanations.push(e);
    }
    let opts = RenderOptions {
        feature_names: &names,
        display_count: a.display_count,
        color: a.color,
        stamp: None,
    };
    if let Some(p) = &a.html {
        write_text(p, &render_html(&explanations, &opts))?;
    }
    if a.out.is_some() {
        let mut tables = String::new();
        for e in &explanations {
            tables.push_str(&render_terminal(e, &opts));
            tables.push('\n');
        }
        emit(None, &tables)?;
    }
    let text = to_json(
        EXPLANATIONS_SCHEMA,
        ExplanationsDoc {
            config: cfg,
            feature_names: names,
            explanations,
        },
    )?;
    emit(a.out.as_deref(), &text)
}

fn cmd_eval_correctness(a: &CorrectnessArgs) -> CliResult {
    if a.binary {
        let defaults = BinaryCorrectnessConfig::default();
        let cfg = BinaryCorrectnessConfig {
            n_rows: a.rows.unwrap_or(defaults.n_rows),
            n_anomalies: a.anomalies.unwrap_or(defaults.n_anomalies),
            background_size: a.background_size.unwrap_or(defaults.background_size),
            error_percent: a.error_percent,
            selection: a.selection,
            seed: a.seed.seed,
            train: TrainConfig {
                seed: a.seed.seed,
                ..defaults.train
            },
            ..defaults
        };
        let report = eval_correctness_binary::<f64>(&cfg)?;
        return emit(a.out.as_deref(), &to_json(BINARY_CORRECTNESS_SCHEMA, report)?);
    }
    let models = a
        .models
        .iter()
        .map(|&id| PerfectModel::from_id(id))
        .collect::<Result<Vec<_>, _>>()?;
    let anomalies = a.anomalies.unwrap_or(500);
    let d = gen_linear_artificial::<f64>(a.rows.unwrap_or(15_000), anomalies, a.seed.seed)?;
    let cfg = CorrectnessConfig {
        background_size: a.background_size.unwrap_or(200),
        error_percent: a.error_percent,
        selection: a.selection,
        seed: a.seed.seed,
        max_anomalies: Some(anomalies),
        ..CorrectnessConfig::default()
    };
    let report = eval_correctness(&d, &models, &cfg)?;
    emit(a.out.as_deref(), &to_json(CORRECTNESS_SCHEMA, report)?)
}

fn cmd_eval_robustness(a: &RobustnessArgs) -> CliResult {
    let d = match &a.data {
        Some(p) => load_csv::<f64>(p)?,
        None => gen_linear_artificial::<f64>(a.rows, a.anomalies, a.seed.seed)?,
    };
    let cfg = RobustnessConfig {
        n_noise_features: a.noise_features,
        repetitions: a.repetitions,
        max_anomalies: a.max_anomalies,
        background_size: a.background_size,
        lime_samples: a.lime_samples,
        train: TrainConfig {
            hidden_sizes: a.train.hidden.clone(),
            epochs: a.train.epochs,
            batch_size: a.train.batch_size,
            learning_rate: a.train.learning_rate,
            ..TrainConfig::default()
        },
        seed: a.seed.seed,
        ..RobustnessConfig::default()
    };
    cfg.train.validate()?;
    let report = eval_robustness(&d, &cfg)?;
    emit(a.out.as_deref(), &to_json(ROBUSTNESS_SCHEMA, report)?)
}

/// One line per report: the before score, the highest-error-only baseline
/// and each method under both policies.
fn effectiveness_csv(label: &str, r: &EffectivenessReport) -> String {
    let mut header = vec!["data".to_string(), "n".to_string(), "mean_before".to_string()];
    let mut values = vec![label.to_string(), r.n_anomalies.to_string(), r.mean_before.to_string()];
    for b in &r.highest_error_only {
        header.push(format!("highest_error_{}", policy_name(b.policy)));
        values.push(b.mean_after.to_string());
    }
    for method in SetMethod::ALL {
        for policy in Policy::ALL {
            header.push(format!("{method}_{}", policy_name(policy)));
            values.push(
                r.scores(method, policy)
                    .map_or(String::new(), |s| s.mean_after.to_string()),
            );
        }
    }
    format!("{}\n{}\n", header.join(","), values.join(","))
}

fn policy_name(p: Policy) -> &'static str {
    match p {
        Policy::Mean => "mean",
        Policy::Predicted => "predicted",
    }
}

fn cmd_eval_effectiveness(a: &EffectivenessArgs) -> CliResult {
    let (label, report) = match (&a.model, &a.data) {
        (Some(model_path), Some(data_path)) => {
            let (model, stats) = load_model(model_path)?;
            let d = load_scaled(data_path, stats.as_ref(), model.n_features())?;
            let (_, flagged) = detect(&model, &d)?;
            let rows: Vec<usize> = flagged.iter().map(|s| s.row).collect();
            let anomalies = d.select_rows(&rows);
            let reference = d.normal_rows();
            let reference = if reference.n_rows() > 0 { reference } else { d.clone() };
            let bg = sample_background(&reference, a.background_size.unwrap_or(200), a.seed.seed)?;
            let cfg = EffectivenessConfig {
                selection: a.selection.unwrap_or(EffectivenessConfig::default().selection),
                max_anomalies: a.max_anomalies,
                lime_samples: a.lime_samples,
                seed: a.seed.seed,
                ..EffectivenessConfig::default()
            };
            let label = data_path
                .file_stem()
                .map_or("data".into(), |s| s.to_string_lossy().into_owned());
            (
                label,
                eval_effectiveness(&model, anomalies.rows().view(), &reference.column_means(), &bg, &cfg)?,
            )
        }
        _ => {
            let defaults = SyntheticEffectivenessConfig::default();
            let cfg = SyntheticEffectivenessConfig {
                background_size: a.background_size.unwrap_or(defaults.background_size),
                seed: a.seed.seed,
                effectiveness: EffectivenessConfig {
                    selection: a.selection.unwrap_or(defaults.effectiveness.selection),
                    max_anomalies: a.max_anomalies,
                    lime_samples: a.lime_samples,
                    seed: a.seed.seed,
                    ..defaults.effectiveness
                },
                ..defaults
            };
            ("synthetic".to_string(), eval_effectiveness_synthetic::<f64>(&cfg)?)
        }
    };
    if let Some(p) = &a.csv {
        write_text(p, &effectiveness_csv(&label, &report))?;
    }
    emit(a.out.as_deref(), &to_json(EFFECTIVENESS_SCHEMA, report)?)
}

#[derive(Deserialize)]
struct AnyExplanations {
    schema: String,
    #[serde(flatten)]
    doc: ExplanationsDoc,
}

fn cmd_render(a: &RenderArgs) -> CliResult {
    if a.display_count == 0 {
        return Err(invalid("--display-count must be at least 1"));
    }
    let text = read_text(&a.input)?;
    let parsed: AnyExplanations = serde_json::from_str(&text).map_err(aex_core::Error::from)?;
    if parsed.schema != EXPLANATIONS_SCHEMA {
        return Err(invalid(format!(
            "{}: schema {:?}, expected {EXPLANATIONS_SCHEMA:?}",
            a.input.display(),
            parsed.schema
        )));
    }
    let stamp = a.stamp.then(|| {
        let secs = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map_or(0, |d| d.as_secs());
        format!("Generated at Unix time {secs}")
    });
    let opts = RenderOptions {
        feature_names: &parsed.doc.feature_names,
        display_count: a.display_count,
        color: a.color,
        stamp,
    };
    match &a.html {
        Some(p) => write_text(p, &render_html(&parsed.doc.explanations, &opts)),
        None => {
            let mut out = String::new();
            for e in &parsed.doc.explanations {
                out.push_str(&render_terminal(e, &opts));
                out.push('\n');
            }
            emit(None, &out)
        }
    }
}

fn run(cli: &Cli) -> CliResult {
    match &cli.command {
        Command::GenData(a) => cmd_gen_data(a),
        Command::Train(a) => cmd_train(a),
        Command::Detect(a) => cmd_detect(a),
        Command::Explain(a) => cmd_explain(a),
        Command::EvalCorrectness(a) => cmd_eval_correctness(a),
        Command::EvalRobustness(a) => cmd_eval_robustness(a),
        Command::EvalEffectiveness(a) => cmd_eval_effectiveness(a),
        Command::Render(a) => cmd_render(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("aex: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
