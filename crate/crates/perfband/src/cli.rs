//! Command-line surface: `sample`, `tune`, `train`, `predict`, `evaluate`.
//!
//! Flags win over the optional JSON config file (flat keys), which wins over
//! built-in defaults. Every command is deterministic given its inputs and
//! seed. Exit codes: 0 success, 2 usage/config error, 3 data error,
//! 4 numerical failure.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::bnn::DEFAULT_PREDICTIVE_SAMPLES;
use crate::calibration::{default_levels, DEFAULT_GRID_SIZE};
use crate::dataset::{
    load_dataset, remove_collinear, twise_coverage, twise_sample_rows, DEFAULT_COLLINEARITY_TOL,
};
use crate::ensemble::{train_ensemble, EnsembleModel, PredictOptions, TrainOptions, DEFAULT_FOLDS};
use crate::error::{Error, Result};
use crate::hpo::{final_tune, tune_depth, EvaluationRecord, Hyperparams};
use crate::metrics::{cal_score_from_curve, mape_counting, summarize, EvalSummary};
use crate::seeds;

const DEFAULT_PERF_COLUMN: &str = "performance";
const DEFAULT_T: usize = 2;
const DEFAULT_REPEATS: usize = 5;

const STREAM_CMD_PREDICT: u64 = 0xCD01;
const STREAM_CMD_EVALUATE: u64 = 0xCD02;

#[derive(Parser)]
#[command(
    name = "perfband",
    version,
    about = "Performance prediction for configurable software with calibrated confidence intervals"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Select a t-wise covering sample from a measured population CSV
    Sample(SampleArgs),
    /// Tune hyperparameters by Bayesian optimization with layer growth
    Tune(TuneArgs),
    /// Train the calibrated ensemble and write the model JSON
    Train(TrainArgs),
    /// Predict performance and confidence intervals for configurations
    Predict(PredictArgs),
    /// Evaluate a model on a test CSV (MAPE, cal score, reliability curve)
    Evaluate(EvaluateArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// JSON config file with flat keys; flags override it
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed for every derived random stream
    #[arg(long)]
    seed: Option<u64>,
    /// Name of the performance column in CSV inputs
    #[arg(long)]
    performance_column: Option<String>,
}

#[derive(Args)]
struct SampleArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Population CSV holding every measured configuration
    #[arg(long)]
    population: Option<PathBuf>,
    /// Covering strength (1, 2 or 3)
    #[arg(long)]
    t: Option<usize>,
    /// Output CSV of selected configurations
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TuneArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Training CSV
    #[arg(long)]
    train: Option<PathBuf>,
    /// Output tuning-trace JSON
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Training CSV
    #[arg(long)]
    train: Option<PathBuf>,
    /// Output model JSON
    #[arg(long)]
    out: Option<PathBuf>,
    /// Tuning trace produced by `tune`; its chosen hyperparameters are used
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    base_lr: Option<f64>,
    #[arg(long)]
    neurons_per_layer: Option<usize>,
    #[arg(long)]
    laplace_scale: Option<f64>,
    /// Ensemble size
    #[arg(long)]
    k: Option<usize>,
    /// Predictive sample count
    #[arg(long)]
    samples: Option<usize>,
    /// Calibration grid resolution
    #[arg(long)]
    grid_size: Option<usize>,
    /// Calibration levels in percent
    #[arg(long, value_delimiter = ',')]
    levels: Option<Vec<f64>>,
}

#[derive(Args)]
struct PredictArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Trained model JSON
    #[arg(long)]
    model: Option<PathBuf>,
    /// Input CSV of configurations (option columns of the model's schema)
    #[arg(long)]
    input: Option<PathBuf>,
    /// Output prediction CSV
    #[arg(long)]
    out: Option<PathBuf>,
    /// Confidence levels to emit, in percent
    #[arg(long, value_delimiter = ',')]
    levels: Option<Vec<f64>>,
    #[arg(long)]
    samples: Option<usize>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Trained model JSON
    #[arg(long)]
    model: Option<PathBuf>,
    /// Test CSV with measured performance
    #[arg(long)]
    test: Option<PathBuf>,
    /// Output report JSON
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output reliability-curve CSV (default: report path with .curve.csv)
    #[arg(long)]
    curve: Option<PathBuf>,
    /// Evaluation repeats (each with a derived seed)
    #[arg(long)]
    repeats: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    levels: Option<Vec<f64>>,
    #[arg(long)]
    samples: Option<usize>,
}

/// Flat-key JSON config file. Unknown keys are rejected.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub k: Option<usize>,
    pub samples: Option<usize>,
    pub levels: Option<Vec<f64>>,
    pub grid_size: Option<usize>,
    pub t: Option<usize>,
    pub performance_column: Option<String>,
    pub repeats: Option<usize>,
    pub depth: Option<usize>,
    pub epochs: Option<usize>,
    pub base_lr: Option<f64>,
    pub neurons_per_layer: Option<usize>,
    pub laplace_scale: Option<f64>,
    pub population: Option<PathBuf>,
    pub train: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub input: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub trace: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub curve: Option<PathBuf>,
}

fn require_path(flag: Option<PathBuf>, file: Option<PathBuf>, name: &str) -> Result<PathBuf> {
    flag.or(file)
        .ok_or_else(|| Error::config(format!("missing path '--{name}' (flag or config key)")))
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(FileConfig::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                serde_json::from_str(&text)
                    .map_err(|e| Error::config(format!("bad config file '{}': {e}", p.display())))
            }
        }
    }
}

/// Tuning trace written by `tune` and consumed by `train`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TuneTrace {
    pub seed: u64,
    pub chosen_depth: usize,
    pub final_hyperparams: Hyperparams,
    pub records: Vec<EvaluationRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LevelAlpha {
    pub rho: f64,
    pub alpha_before: f64,
    pub alpha_after: f64,
}

/// Report written by `evaluate`. `cal_pooled_*` are recomputed from the
/// pooled curve in `per_level`, so they match the curve CSV exactly.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvaluateReport {
    pub seed: u64,
    pub repeats: usize,
    pub samples: usize,
    pub mape: EvalSummary,
    pub cal: EvalSummary,
    pub cal_before: EvalSummary,
    pub cal_pooled_after: f64,
    pub cal_pooled_before: f64,
    pub per_level: Vec<LevelAlpha>,
    pub decisions: Vec<String>,
}

/// Entry point: returns the process exit code.
pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = match cli.command {
        Command::Sample(args) => cmd_sample(args),
        Command::Tune(args) => cmd_tune(args),
        Command::Train(args) => cmd_train(args),
        Command::Predict(args) => cmd_predict(args),
        Command::Evaluate(args) => cmd_evaluate(args),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn cmd_sample(args: SampleArgs) -> Result<()> {
    let cfg = FileConfig::load(args.common.config.as_deref())?;
    let seed = pick(args.common.seed, cfg.seed, 0);
    let t = pick(args.t, cfg.t, DEFAULT_T);
    let perf_col = pick(
        args.common.performance_column,
        cfg.performance_column,
        DEFAULT_PERF_COLUMN.to_string(),
    );
    let population_path = require_path(args.population, cfg.population, "population")?;
    let out_path = require_path(args.out, cfg.out, "out")?;
    let population = load_dataset(&population_path, &perf_col)?;
    let picks = twise_sample_rows(&population, t, seed)?;
    let sample = population.subset(&picks);
    crate::dataset::write_csv(&sample, &perf_col, &out_path)?;
    let (covered, total) = twise_coverage(&population.schema, t, &sample.rows)?;
    println!(
        "selected {} of {} configurations; covered {covered}/{total} {t}-wise tuples",
        sample.len(),
        population.len()
    );
    Ok(())
}

fn cmd_tune(args: TuneArgs) -> Result<()> {
    let cfg = FileConfig::load(args.common.config.as_deref())?;
    let seed = pick(args.common.seed, cfg.seed, 0);
    let perf_col = pick(
        args.common.performance_column,
        cfg.performance_column,
        DEFAULT_PERF_COLUMN.to_string(),
    );
    let train_path = require_path(args.train, cfg.train, "train")?;
    let out_path = require_path(args.out, cfg.out, "out")?;
    let raw = load_dataset(&train_path, &perf_col)?;
    let (pre, _) = remove_collinear(&raw, DEFAULT_COLLINEARITY_TOL)?;
    let (chosen_depth, mut records) = tune_depth(&pre, seed)?;
    let (final_hyperparams, new_records) = final_tune(&pre, chosen_depth, &records, seed)?;
    records.extend(new_records);
    let trace = TuneTrace {
        seed,
        chosen_depth,
        final_hyperparams,
        records,
    };
    let json = serde_json::to_string_pretty(&trace)
        .map_err(|e| Error::config(format!("trace serialization failed: {e}")))?;
    write_text(&out_path, &(json + "\n"))?;
    println!(
        "tuned depth {} over {} evaluations; trace written to {}",
        trace.chosen_depth,
        trace.records.len(),
        out_path.display()
    );
    Ok(())
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let cfg = FileConfig::load(args.common.config.as_deref())?;
    let seed = pick(args.common.seed, cfg.seed, 0);
    let perf_col = pick(
        args.common.performance_column,
        cfg.performance_column,
        DEFAULT_PERF_COLUMN.to_string(),
    );
    let train_path = require_path(args.train, cfg.train, "train")?;
    let out_path = require_path(args.out, cfg.out.clone(), "out")?;
    let train = load_dataset(&train_path, &perf_col)?;

    let traced: Option<Hyperparams> = match &args.trace.or(cfg.trace.clone()) {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            let trace: TuneTrace = serde_json::from_str(&text)
                .map_err(|e| Error::data(format!("bad tuning trace '{}': {e}", p.display())))?;
            Some(trace.final_hyperparams)
        }
        None => None,
    };
    let field = |flag: Option<usize>, file: Option<usize>, traced: Option<usize>, name: &str| {
        flag.or(file).or(traced).ok_or_else(|| {
            Error::config(format!("missing hyperparameter '{name}': pass --{name} or --trace"))
        })
    };
    let hp = Hyperparams {
        depth: field(args.depth, cfg.depth, traced.as_ref().map(|h| h.depth), "depth")?,
        epochs: field(args.epochs, cfg.epochs, traced.as_ref().map(|h| h.epochs), "epochs")?,
        base_lr: args
            .base_lr
            .or(cfg.base_lr)
            .or(traced.as_ref().map(|h| h.base_lr))
            .ok_or_else(|| Error::config("missing hyperparameter 'base_lr': pass --base-lr or --trace"))?,
        neurons_per_layer: field(
            args.neurons_per_layer,
            cfg.neurons_per_layer,
            traced.as_ref().map(|h| h.neurons_per_layer),
            "neurons-per-layer",
        )?,
        laplace_scale: args
            .laplace_scale
            .or(cfg.laplace_scale)
            .or(traced.as_ref().map(|h| h.laplace_scale))
            .ok_or_else(|| {
                Error::config("missing hyperparameter 'laplace_scale': pass --laplace-scale or --trace")
            })?,
    };

    let opts = TrainOptions {
        k: pick(args.k, cfg.k, DEFAULT_FOLDS),
        seed,
        samples: pick(args.samples, cfg.samples, DEFAULT_PREDICTIVE_SAMPLES),
        levels: pick(args.levels, cfg.levels, default_levels()),
        grid_size: pick(args.grid_size, cfg.grid_size, DEFAULT_GRID_SIZE),
        collinearity_tol: DEFAULT_COLLINEARITY_TOL,
    };
    let model = train_ensemble(&train, &hp, &opts)?;
    write_text(&out_path, &(model.to_json() + "\n"))?;
    println!(
        "trained {}-member ensemble on {} points; model written to {}",
        model.k,
        train.len(),
        out_path.display()
    );
    Ok(())
}

/// 9-significant-digit decimal formatting (printf %.9g style) for
/// reproducible output bytes.
pub fn format_sig9(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    if !v.is_finite() {
        return format!("{v}");
    }
    let exp = v.abs().log10().floor() as i32;
    if !(-4..9).contains(&exp) {
        let s = format!("{:.8e}", v);
        let (mantissa, e) = s.split_once('e').expect("exp format");
        format!("{}e{}", trim_decimal_zeros(mantissa), e)
    } else {
        let prec = (8 - exp).max(0) as usize;
        trim_decimal_zeros(&format!("{v:.prec$}"))
    }
}

fn trim_decimal_zeros(s: &str) -> String {
    if !s.contains('.') {
        return s.to_string();
    }
    let s = s.trim_end_matches('0');
    s.trim_end_matches('.').to_string()
}

fn format_level(rho: f64) -> String {
    if rho.fract() == 0.0 {
        format!("{}", rho as i64)
    } else {
        format_sig9(rho)
    }
}

/// Map the model's option names onto the input CSV's columns. Every schema
/// option must be present; columns that are neither options nor the ignored
/// performance column are rejected.
fn schema_column_map(
    model: &EnsembleModel,
    headers: &[String],
    ignore: &str,
    path: &Path,
) -> Result<Vec<usize>> {
    let mut missing = Vec::new();
    let mut map = Vec::with_capacity(model.schema.len());
    for opt in &model.schema.options {
        match headers.iter().position(|h| *h == opt.name) {
            Some(i) => map.push(i),
            None => missing.push(opt.name.clone()),
        }
    }
    if !missing.is_empty() {
        return Err(Error::data(format!(
            "'{}' is missing schema columns: {}",
            path.display(),
            missing.join(", ")
        )));
    }
    let unknown: Vec<&str> = headers
        .iter()
        .filter(|h| *h != ignore && model.schema.index_of(h).is_none())
        .map(|h| h.as_str())
        .collect();
    if !unknown.is_empty() {
        return Err(Error::data(format!(
            "'{}' has columns not in the model schema: {}",
            path.display(),
            unknown.join(", ")
        )));
    }
    Ok(map)
}

fn load_model(path: &Path) -> Result<EnsembleModel> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    EnsembleModel::from_json(&text)
}

fn cmd_predict(args: PredictArgs) -> Result<()> {
    let cfg = FileConfig::load(args.common.config.as_deref())?;
    let seed = pick(args.common.seed, cfg.seed, 0);
    let samples = pick(args.samples, cfg.samples, DEFAULT_PREDICTIVE_SAMPLES);
    let levels = pick(args.levels, None, vec![95.0]);
    let perf_col = pick(
        args.common.performance_column,
        cfg.performance_column,
        DEFAULT_PERF_COLUMN.to_string(),
    );
    for &rho in &levels {
        if !(rho > 0.0 && rho < 100.0) {
            return Err(Error::config(format!(
                "confidence level must lie in (0, 100); got {rho}"
            )));
        }
    }
    let model_path = require_path(args.model, cfg.model, "model")?;
    let input_path = require_path(args.input, cfg.input, "input")?;
    let out_path = require_path(args.out, cfg.out, "out")?;
    let model = load_model(&model_path)?;

    let file = std::fs::File::open(&input_path).map_err(|e| Error::io(&input_path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Error::data(format!("cannot read header of '{}': {e}", input_path.display())))?
        .iter()
        .map(|s| s.to_string())
        .collect();
    let map = schema_column_map(&model, &headers, &perf_col, &input_path)?;

    let mut out = String::new();
    for opt in &model.schema.options {
        out.push_str(&opt.name);
        out.push(',');
    }
    out.push_str("prediction");
    for &rho in &levels {
        out.push_str(&format!(",lo_{0},hi_{0}", format_level(rho)));
    }
    out.push('\n');

    for (r, record) in reader.records().enumerate() {
        let record = record
            .map_err(|e| Error::data(format!("'{}' row {}: {e}", input_path.display(), r + 1)))?;
        let mut x = Vec::with_capacity(map.len());
        for (&col, opt) in map.iter().zip(&model.schema.options) {
            let cell = record.get(col).unwrap_or("");
            let v: f64 = cell.parse().unwrap_or(f64::NAN);
            if !v.is_finite() {
                return Err(Error::data(format!(
                    "'{}' row {}, column '{}': cannot parse '{}' as a finite number",
                    input_path.display(),
                    r + 1,
                    opt.name,
                    cell
                )));
            }
            x.push(v);
        }
        let popts = PredictOptions {
            samples,
            seed: seeds::derive2(seed, STREAM_CMD_PREDICT, r as u64),
        };
        let eval = model.evaluate_row(&x, &levels, &popts)?;
        for &v in &x {
            out.push_str(&format_sig9(v));
            out.push(',');
        }
        out.push_str(&format_sig9(eval.prediction));
        for &(lo, hi) in &eval.calibrated {
            out.push_str(&format!(",{},{}", format_sig9(lo), format_sig9(hi)));
        }
        out.push('\n');
    }
    write_text(&out_path, &out)
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<()> {
    let cfg = FileConfig::load(args.common.config.as_deref())?;
    let seed = pick(args.common.seed, cfg.seed, 0);
    let samples = pick(args.samples, cfg.samples, DEFAULT_PREDICTIVE_SAMPLES);
    let levels = pick(args.levels, cfg.levels, default_levels());
    let repeats = pick(args.repeats, cfg.repeats, DEFAULT_REPEATS);
    let perf_col = pick(
        args.common.performance_column,
        cfg.performance_column,
        DEFAULT_PERF_COLUMN.to_string(),
    );
    if repeats < 2 {
        return Err(Error::config("need at least 2 evaluation repeats"));
    }
    let model_path = require_path(args.model, cfg.model, "model")?;
    let test_path = require_path(args.test, cfg.test, "test")?;
    let out_path = require_path(args.out, cfg.out, "out")?;
    let model = load_model(&model_path)?;
    let test = load_dataset(&test_path, &perf_col)?;
    let names: Vec<String> = test.schema.options.iter().map(|o| o.name.clone()).collect();
    let map = schema_column_map(&model, &names, &perf_col, &test_path)?;
    let rows: Vec<Vec<f64>> = test
        .rows
        .iter()
        .map(|r| map.iter().map(|&j| r[j]).collect())
        .collect();
    let truths = &test.performance;
    let n_members = model.members.len();

    let mut mape_scores = Vec::with_capacity(repeats);
    let mut cal_after_scores = Vec::with_capacity(repeats);
    let mut cal_before_scores = Vec::with_capacity(repeats);
    let mut pooled_after = vec![0.0; levels.len()];
    let mut pooled_before = vec![0.0; levels.len()];
    let mut member_after = vec![vec![0.0; levels.len()]; n_members];
    let mut member_before = vec![vec![0.0; levels.len()]; n_members];
    let mut decisions: Vec<String> = Vec::new();
    let mut skipped_zero = 0usize;

    for rep in 0..repeats {
        let rep_seed = seeds::derive2(seed, STREAM_CMD_EVALUATE, rep as u64);
        let mut preds = Vec::with_capacity(rows.len());
        let mut cal_ivals: Vec<Vec<(f64, f64)>> = vec![Vec::with_capacity(rows.len()); levels.len()];
        let mut raw_ivals: Vec<Vec<(f64, f64)>> = vec![Vec::with_capacity(rows.len()); levels.len()];
        let mut m_cal: Vec<Vec<Vec<(f64, f64)>>> =
            vec![vec![Vec::with_capacity(rows.len()); levels.len()]; n_members];
        let mut m_raw: Vec<Vec<Vec<(f64, f64)>>> =
            vec![vec![Vec::with_capacity(rows.len()); levels.len()]; n_members];
        for (r, x) in rows.iter().enumerate() {
            let popts = PredictOptions {
                samples,
                seed: seeds::derive(rep_seed, r as u64),
            };
            let eval = model.evaluate_row(x, &levels, &popts)?;
            preds.push(eval.prediction);
            for (j, (&c, &u)) in eval.calibrated.iter().zip(&eval.uncalibrated).enumerate() {
                cal_ivals[j].push(c);
                raw_ivals[j].push(u);
            }
            for (m, mi) in eval.per_member.iter().enumerate() {
                for j in 0..levels.len() {
                    m_cal[m][j].push(mi.calibrated[j]);
                    m_raw[m][j].push(mi.uncalibrated[j]);
                }
            }
        }
        let (m, skipped) = mape_counting(&preds, truths)?;
        skipped_zero = skipped;
        mape_scores.push(m);
        let mut alphas_after = Vec::with_capacity(levels.len());
        let mut alphas_before = Vec::with_capacity(levels.len());
        for j in 0..levels.len() {
            alphas_after.push(crate::calibration::observed_frequency(&cal_ivals[j], truths)?);
            alphas_before.push(crate::calibration::observed_frequency(&raw_ivals[j], truths)?);
        }
        cal_after_scores.push(cal_score_from_curve(&levels, &alphas_after, None)?);
        cal_before_scores.push(cal_score_from_curve(&levels, &alphas_before, None)?);
        for j in 0..levels.len() {
            pooled_after[j] += alphas_after[j] / repeats as f64;
            pooled_before[j] += alphas_before[j] / repeats as f64;
            for m in 0..n_members {
                member_after[m][j] +=
                    crate::calibration::observed_frequency(&m_cal[m][j], truths)? / repeats as f64;
                member_before[m][j] +=
                    crate::calibration::observed_frequency(&m_raw[m][j], truths)? / repeats as f64;
            }
        }
    }
    if skipped_zero > 0 {
        decisions.push(format!(
            "excluded {skipped_zero} zero-truth points from MAPE (undefined ratio)"
        ));
    }

    let per_level: Vec<LevelAlpha> = levels
        .iter()
        .zip(pooled_before.iter().zip(&pooled_after))
        .map(|(&rho, (&b, &a))| LevelAlpha {
            rho,
            alpha_before: b,
            alpha_after: a,
        })
        .collect();
    let report = EvaluateReport {
        seed,
        repeats,
        samples,
        mape: summarize(&mape_scores)?,
        cal: summarize(&cal_after_scores)?,
        cal_before: summarize(&cal_before_scores)?,
        cal_pooled_after: cal_score_from_curve(&levels, &pooled_after, None)?,
        cal_pooled_before: cal_score_from_curve(&levels, &pooled_before, None)?,
        per_level,
        decisions,
    };
    let json = serde_json::to_string_pretty(&report)
        .map_err(|e| Error::config(format!("report serialization failed: {e}")))?;
    write_text(&out_path, &(json + "\n"))?;

    let write_curve = |path: &Path, before: &[f64], after: &[f64]| -> Result<()> {
        let mut curve = String::from("rho,alpha_before,alpha_after\n");
        for (j, &rho) in levels.iter().enumerate() {
            curve.push_str(&format!(
                "{},{},{}\n",
                format_sig9(rho),
                format_sig9(before[j]),
                format_sig9(after[j])
            ));
        }
        write_text(path, &curve)
    };
    let curve_path = args
        .curve
        .or(cfg.curve)
        .unwrap_or_else(|| out_path.with_extension("curve.csv"));
    write_curve(&curve_path, &pooled_before, &pooled_after)?;
    for m in 0..n_members {
        let member_path = curve_path.with_extension(format!("member{m}.csv"));
        write_curve(&member_path, &member_before[m], &member_after[m])?;
    }
    println!(
        "MAPE {:.3} ± {:.3}, cal {:.3} ± {:.3} (pre-calibration {:.3}); report written to {}",
        report.mape.mean,
        report.mape.margin,
        report.cal.mean,
        report.cal.margin,
        report.cal_before.mean,
        out_path.display()
    );
    Ok(())
}
