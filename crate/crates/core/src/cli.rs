//! `depthrank` command-line harness.
//!
//! Exit codes: 0 success, 1 runtime or verification failure, 2 usage error,
//! 3 training divergence.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::data::{generate_synthetic, read_dataset, write_dataset, Dataset, SyntheticSpec};
use crate::error::Error;
use crate::gradcheck::{run_suite, SuiteConfig};
use crate::losses::{DiscountFn, GainFn, LossKind, WeightConfig};
use crate::metrics::{EvalConfig, MetricReport};
use crate::report::{comparison_table, Report, ReportFormat};
use crate::trainer::{evaluate_params, read_params, train, write_params, ScorerFamily, ScorerParams, TrainConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DIVERGED: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "depthrank",
    version,
    about = "Listwise ranking losses for relative depth, on synthetic data"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic ordinal-depth dataset.
    GenData(GenDataArgs),
    /// Train a scorer and write its parameters and a report.
    Train(TrainArgs),
    /// Evaluate one or two parameter files on a dataset.
    Eval(EvalArgs),
    /// Compare analytic gradients with central finite differences.
    Gradcheck(GradcheckArgs),
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub n_samples: u64,
    /// Items per sample.
    #[arg(long, default_value_t = 500, value_parser = clap::value_parser!(u64).range(1..))]
    pub items: u64,
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
    pub dim: u64,
    /// Standard deviation of the label noise added to raw depth scores.
    #[arg(long, default_value_t = 0.0, value_parser = non_negative)]
    pub noise: f64,
    #[arg(long, value_enum, default_value_t = ScorerFamily::Linear)]
    pub family: ScorerFamily,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum GainArg {
    TwoPowMinusOne,
    IdentityOne,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum DiscountArg {
    InverseLog,
    IdentityOne,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum)]
    pub loss: LossKind,
    #[arg(long, value_enum, default_value_t = ScorerFamily::Linear)]
    pub family: ScorerFamily,
    /// Hidden units of the MLP scorer.
    #[arg(long, default_value_t = 16, value_parser = clap::value_parser!(u64).range(1..))]
    pub hidden: u64,
    #[arg(long, default_value_t = 0.05, value_parser = positive)]
    pub lr: f64,
    #[arg(long, default_value_t = 0.9, value_parser = momentum)]
    pub momentum: f64,
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
    pub epochs: u64,
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
    pub batch: u64,
    #[arg(long)]
    pub seed: u64,
    /// Pairs drawn per sample and epoch (pairwise loss).
    #[arg(long, default_value_t = 3000, value_parser = clap::value_parser!(u64).range(1..))]
    pub pairs: u64,
    /// Points drawn per sample and epoch (listwise losses).
    #[arg(long, default_value_t = 500, value_parser = clap::value_parser!(u64).range(1..))]
    pub points: u64,
    #[arg(long, value_enum, default_value_t = GainArg::TwoPowMinusOne)]
    pub gain: GainArg,
    #[arg(long, value_enum, default_value_t = DiscountArg::InverseLog)]
    pub discount: DiscountArg,
    #[arg(long, default_value_t = 2.0)]
    pub log_base: f64,
    /// Ground-truth gap at or below which a pair is labelled equal.
    #[arg(long, default_value_t = 0.0, value_parser = non_negative)]
    pub gt_tie: f64,
    /// Trailing fraction of samples held out for evaluation (0 evaluates on
    /// the training samples).
    #[arg(long, default_value_t = 0.2, value_parser = fraction)]
    pub holdout: f64,
    #[arg(long)]
    pub out_params: PathBuf,
    #[arg(long)]
    pub out_report: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ReportFormat::Kv)]
    pub format: ReportFormat,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub params: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Second parameter file evaluated side by side.
    #[arg(long)]
    pub compare: Option<PathBuf>,
    /// Evaluate only the trailing held-out fraction (0 evaluates everything).
    #[arg(long, default_value_t = 0.0, value_parser = fraction)]
    pub holdout: f64,
    #[arg(long, default_value_t = 0.0, value_parser = non_negative)]
    pub gt_tie: f64,
    /// Predicted gap at or below which a pair is predicted equal.
    #[arg(long, default_value_t = 0.0, value_parser = non_negative)]
    pub pred_tie: f64,
    #[arg(long, default_value_t = 2.0)]
    pub log_base: f64,
    #[arg(long)]
    pub out_report: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ReportFormat::Kv)]
    pub format: ReportFormat,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    /// Tolerance applied to every case; defaults to 1e-5 for linear and
    /// 1e-4 for MLP scorers.
    #[arg(long, value_parser = non_negative)]
    pub tol: Option<f64>,
    /// Losses to check (comma separated).
    #[arg(long, value_enum, value_delimiter = ',')]
    pub cases: Vec<LossKind>,
    /// Scorer families to check (comma separated).
    #[arg(long, value_enum, value_delimiter = ',')]
    pub families: Vec<ScorerFamily>,
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    pub instances: u64,
    #[arg(long, default_value_t = 50, value_parser = clap::value_parser!(u64).range(2..))]
    pub max_items: u64,
    #[arg(long, default_value_t = 1e-5, value_parser = positive)]
    pub step: f64,
    #[arg(long, default_value_t = SuiteConfig::default().seed)]
    pub seed: u64,
}

fn parse_f64(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if !v.is_finite() {
        return Err("value must be finite".into());
    }
    Ok(v)
}

fn non_negative(s: &str) -> Result<f64, String> {
    let v = parse_f64(s)?;
    if v < 0.0 {
        return Err("value must be >= 0".into());
    }
    Ok(v)
}

fn positive(s: &str) -> Result<f64, String> {
    let v = parse_f64(s)?;
    if v <= 0.0 {
        return Err("value must be > 0".into());
    }
    Ok(v)
}

fn momentum(s: &str) -> Result<f64, String> {
    let v = parse_f64(s)?;
    if !(0.0..1.0).contains(&v) {
        return Err("momentum must lie in [0, 1)".into());
    }
    Ok(v)
}

fn fraction(s: &str) -> Result<f64, String> {
    let v = parse_f64(s)?;
    if !(0.0..1.0).contains(&v) {
        return Err("fraction must lie in [0, 1)".into());
    }
    Ok(v)
}

/// A failed command: message plus exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    fn runtime(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_FAILURE,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Diverged { .. } => Self {
                code: EXIT_DIVERGED,
                message: e.to_string(),
            },
            Error::InvalidInput(_) | Error::Range(_) => Self::usage(e.to_string()),
            other => Self::runtime(other.to_string()),
        }
    }
}

type CmdResult = Result<(), Failure>;

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let rendered = e.render().to_string();
            let _ = if e.use_stderr() {
                write!(err, "{rendered}")
            } else {
                write!(out, "{rendered}")
            };
            return code;
        }
    };
    let result = match cli.command {
        Command::GenData(a) => cmd_gen_data(&a, out),
        Command::Train(a) => cmd_train(&a, out, err),
        Command::Eval(a) => cmd_eval(&a, out, err),
        Command::Gradcheck(a) => cmd_gradcheck(&a, out),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

fn io_failure(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::runtime(format!("{}: {e}", path.display()))
}

fn load_dataset(path: &Path) -> Result<Dataset, Failure> {
    read_dataset(path).map_err(|e| match e {
        Error::Io(io) => io_failure(path, io),
        other => Failure::runtime(format!("{}: {other}", path.display())),
    })
}

fn load_params(path: &Path) -> Result<ScorerParams, Failure> {
    read_params(path).map_err(|e| match e {
        Error::Io(io) => io_failure(path, io),
        other => Failure::runtime(format!("{}: {other}", path.display())),
    })
}

fn emit(report: &Report, format: ReportFormat, out_path: Option<&Path>, out: &mut dyn Write) -> CmdResult {
    let text = report.render(format);
    if let Some(path) = out_path {
        fs::write(path, &text).map_err(|e| io_failure(path, e))?;
    }
    out.write_all(text.as_bytes())
        .map_err(|e| Failure::runtime(format!("stdout: {e}")))
}

pub fn cmd_gen_data(a: &GenDataArgs, out: &mut dyn Write) -> CmdResult {
    let spec = SyntheticSpec {
        n_samples: a.n_samples as usize,
        items_per_sample: a.items as usize,
        feature_dim: a.dim as usize,
        noise_sigma: a.noise,
        family: a.family,
        seed: a.seed,
    };
    let ds = generate_synthetic(&spec)?;
    write_dataset(&ds, &a.out).map_err(|e| io_failure(&a.out, e))?;
    writeln!(
        out,
        "wrote {} samples x {} items x {} features ({} family, noise {}, seed {}) to {}",
        spec.n_samples,
        spec.items_per_sample,
        spec.feature_dim,
        spec.family,
        spec.noise_sigma,
        spec.seed,
        a.out.display()
    )
    .map_err(|e| Failure::runtime(e.to_string()))
}

fn train_config(a: &TrainArgs) -> Result<TrainConfig, Failure> {
    let weights = WeightConfig::new(
        match a.gain {
            GainArg::TwoPowMinusOne => GainFn::TwoPowMinusOne,
            GainArg::IdentityOne => GainFn::IdentityOne,
        },
        match a.discount {
            DiscountArg::InverseLog => DiscountFn::InverseLog,
            DiscountArg::IdentityOne => DiscountFn::IdentityOne,
        },
        a.log_base,
    )
    .map_err(|e| Failure::usage(e.to_string()))?;
    Ok(TrainConfig {
        loss: a.loss,
        family: a.family,
        hidden: a.hidden as usize,
        learning_rate: a.lr,
        momentum: a.momentum,
        epochs: a.epochs as usize,
        batch: a.batch as usize,
        seed: a.seed,
        points_per_sample: a.points as usize,
        pairs_per_sample: a.pairs as usize,
        weights,
        gt_tie_threshold: a.gt_tie,
    })
}

fn push_train_config(report: &mut Report, cfg: &TrainConfig, a: &TrainArgs) {
    report.push("seed", cfg.seed);
    report.push("config.data", a.data.display());
    report.push("config.loss", cfg.loss);
    report.push("config.family", cfg.family);
    report.push("config.hidden", cfg.hidden);
    report.push("config.lr", cfg.learning_rate);
    report.push("config.momentum", cfg.momentum);
    report.push("config.epochs", cfg.epochs);
    report.push("config.batch", cfg.batch);
    report.push("config.points", cfg.points_per_sample);
    report.push("config.pairs", cfg.pairs_per_sample);
    report.push("config.gain", format!("{:?}", cfg.weights.gain));
    report.push("config.discount", format!("{:?}", cfg.weights.discount));
    report.push("config.log_base", cfg.weights.log_base);
    report.push("config.gt_tie", cfg.gt_tie_threshold);
    report.push("config.holdout", a.holdout);
}

pub fn cmd_train(a: &TrainArgs, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    let cfg = train_config(a)?;
    let ds = load_dataset(&a.data)?;
    let (train_set, eval_set) = ds.holdout(a.holdout).map_err(|e| Failure::usage(e.to_string()))?;
    let mut report = Report::new("train");
    push_train_config(&mut report, &cfg, a);
    report.push("data.samples", ds.len());
    report.push("data.feature_dim", ds.feature_dim());
    report.push("data.train_samples", train_set.len());
    report.push("data.eval_samples", eval_set.len());

    let outcome = match train(train_set, eval_set, &cfg) {
        Ok(o) => o,
        Err(Error::Diverged { epoch, reason, partial }) => {
            report.push("status", "diverged");
            report.push("diverged.epoch", epoch);
            report.push("diverged.reason", &reason);
            report.push_trace(&partial);
            emit(&report, a.format, a.out_report.as_deref(), out)?;
            return Err(Failure {
                code: EXIT_DIVERGED,
                message: format!("training diverged at epoch {epoch}: {reason}"),
            });
        }
        Err(e) => return Err(e.into()),
    };
    write_params(&outcome.params, &a.out_params).map_err(|e| io_failure(&a.out_params, e))?;

    let eval_cfg = EvalConfig {
        gt_tie_threshold: cfg.gt_tie_threshold,
        log_base: cfg.weights.log_base,
        ..EvalConfig::default()
    };
    let train_metrics = evaluate_params(&outcome.params, train_set, &eval_cfg)?;
    let eval_slice = if eval_set.is_empty() { train_set } else { eval_set };
    let eval_metrics = evaluate_params(&outcome.params, eval_slice, &eval_cfg)?;
    report.push("status", "ok");
    report.push_trace(&outcome.trace);
    report.push_metrics("train", &train_metrics);
    report.push_metrics("eval", &eval_metrics);
    warn_ties(&eval_metrics, err);
    emit(&report, a.format, a.out_report.as_deref(), out)
}

fn warn_ties(m: &MetricReport, err: &mut dyn Write) {
    if m.has_degenerate_ties() {
        let _ = writeln!(
            err,
            "warning: {} of {} samples have all-tied predictions",
            m.tied_prediction_samples, m.n_samples
        );
    }
}

fn model_label(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

pub fn cmd_eval(a: &EvalArgs, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    if !(a.log_base.is_finite() && a.log_base > 1.0) {
        return Err(Failure::usage("--log-base must be > 1"));
    }
    let ds = load_dataset(&a.data)?;
    let (_, held) = ds.holdout(a.holdout).map_err(|e| Failure::usage(e.to_string()))?;
    let samples = if a.holdout == 0.0 { &ds.samples[..] } else { held };
    let cfg = EvalConfig {
        gt_tie_threshold: a.gt_tie,
        pred_tie_threshold: a.pred_tie,
        log_base: a.log_base,
    };

    let mut models = vec![(a.params.clone(), load_params(&a.params)?)];
    if let Some(path) = &a.compare {
        models.push((path.clone(), load_params(path)?));
    }
    for (path, params) in &models {
        if params.dim() != ds.feature_dim() {
            return Err(Failure::usage(format!(
                "{} expects {} features but {} has {}",
                path.display(),
                params.dim(),
                a.data.display(),
                ds.feature_dim()
            )));
        }
    }

    let mut report = Report::new("eval");
    report.push("config.data", a.data.display());
    report.push("config.holdout", a.holdout);
    report.push("config.gt_tie", a.gt_tie);
    report.push("config.pred_tie", a.pred_tie);
    report.push("config.log_base", a.log_base);
    let mut results = Vec::new();
    for (idx, (path, params)) in models.iter().enumerate() {
        let m = evaluate_params(params, samples, &cfg)?;
        let prefix = if idx == 0 {
            "eval".to_string()
        } else {
            "compare".to_string()
        };
        report.push(format!("{prefix}.params"), path.display());
        report.push(format!("{prefix}.family"), params.family());
        report.push_metrics(&prefix, &m);
        warn_ties(&m, err);
        results.push((model_label(path), m));
    }

    if a.compare.is_some() && a.format == ReportFormat::Table {
        let text = comparison_table(&results);
        if let Some(path) = &a.out_report {
            fs::write(path, &text).map_err(|e| io_failure(path, e))?;
        }
        return out
            .write_all(text.as_bytes())
            .map_err(|e| Failure::runtime(e.to_string()));
    }
    emit(&report, a.format, a.out_report.as_deref(), out)
}

pub fn cmd_gradcheck(a: &GradcheckArgs, out: &mut dyn Write) -> CmdResult {
    let defaults = SuiteConfig::default();
    let cfg = SuiteConfig {
        losses: if a.cases.is_empty() {
            defaults.losses.clone()
        } else {
            a.cases.clone()
        },
        families: if a.families.is_empty() {
            defaults.families.clone()
        } else {
            a.families.clone()
        },
        instances: a.instances as usize,
        max_items: a.max_items as usize,
        step: a.step,
        tol_linear: a.tol.unwrap_or(defaults.tol_linear),
        tol_mlp: a.tol.unwrap_or(defaults.tol_mlp),
        seed: a.seed,
        ..defaults
    };
    let results = run_suite(&cfg)?;
    let w = |e: std::io::Error| Failure::runtime(e.to_string());
    writeln!(
        out,
        "{:<24} {:>9} {:>12} {:>10}  result",
        "case", "instances", "max_rel_err", "tol"
    )
    .map_err(w)?;
    let mut failed = Vec::new();
    for r in &results {
        let verdict = if r.passed() { "pass" } else { "FAIL" };
        writeln!(
            out,
            "{:<24} {:>9} {:>12.3e} {:>10.1e}  {verdict}",
            r.name(),
            r.instances,
            r.max_error,
            r.tolerance
        )
        .map_err(w)?;
        if !r.passed() {
            failed.push(r.name());
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::runtime(format!(
            "gradient check failed for {}",
            failed.join(", ")
        )))
    }
}
