//! Command-line surface. Every subcommand is a plain library function so it
//! can be driven from tests and examples; [`run`] adds argument parsing and
//! exit codes (0 success, 2 config, 3 data, 4 training, 5 evaluation).

use std::ffi::OsString;
use std::fs;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::blstm::{BlstmConfig, Variant};
use crate::config::{CvGrid, ExperimentConfig, ModelKind, SEED_ENV};
use crate::corpus::{group_by_sentence, kfold_split, parse_csv, parse_json, DatasetFormat, HeadlineInstance, LoadOptions};
use crate::error::{Error, Result};
use crate::eval::{cross_validate, evaluate, EvalReport, MetricSelector, PredictionSet, DEFAULT_TOP_K};
use crate::pipeline::{load_word_vectors, ConfigEstimator, DatasetInfo, Manifest, TrainedModel};
use crate::seed;
use crate::tokenize::{Tokenizer, TokenizerKind};

pub const FOLD_SEED_LABEL: &str = "cv/folds";

#[derive(Debug, Parser)]
#[command(name = "finsent", version, about = "Aspect-based sentiment regression for financial headlines")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model and write it to a directory.
    Train {
        #[command(flatten)]
        config: ConfigArgs,
        #[command(flatten)]
        data: DataArgs,
        /// Output model directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a dataset with a trained model.
    Predict {
        /// Model directory written by `train`.
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        data: DataArgs,
        /// Predictions JSON to write.
        #[arg(long)]
        out: PathBuf,
        /// Clamp scores to [-1, 1].
        #[arg(long)]
        clamp: bool,
        /// Word vectors for BLSTM models; defaults to the path in the manifest.
        #[arg(long)]
        embeddings: Option<PathBuf>,
    },
    /// Compare predictions with gold labels.
    Evaluate {
        #[arg(long)]
        predictions: PathBuf,
        /// Labeled dataset (JSON array or CSV).
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        lenient: bool,
        #[arg(long, default_value_t = DEFAULT_TOP_K)]
        top_k: usize,
        /// Score missing predictions as 0 in metric 2 instead of failing.
        #[arg(long)]
        allow_partial: bool,
        /// Also write the report here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cross-validate every point of a parameter grid.
    Cv {
        #[command(flatten)]
        config: ConfigArgs,
        #[command(flatten)]
        data: DataArgs,
        /// Number of folds; defaults to `cv.k` from the config.
        #[arg(long)]
        k: Option<usize>,
        /// TOML grid file; defaults to the full search grid.
        #[arg(long)]
        grid: Option<PathBuf>,
        /// metric1, metric2, metric3 or mae; defaults to `cv.metric`.
        #[arg(long)]
        metric: Option<MetricSelector>,
        /// Also write the ranked table as JSON here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tokenize text given as arguments, or stdin lines.
    Tokenize {
        /// whitespace or rules.
        #[arg(long, alias = "tokenizer", default_value = "rules")]
        mode: TokenizerKind,
        /// Keep the original case.
        #[arg(long, alias = "keep-case")]
        no_lowercase: bool,
        text: Vec<String>,
    },
    /// Nearest neighbours of a word in an embedding file.
    Neighbors {
        /// word2vec file (binary, or text for .txt / .vec).
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        word: String,
        #[arg(long, default_value_t = 10)]
        n: usize,
    },
}

#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// Shipped preset: best-svr, slstm or elstm.
    #[arg(long, conflicts_with = "config")]
    pub preset: Option<String>,
    /// TOML experiment config.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override a config key, e.g. `--set svr.C=1`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Word vectors; overrides `embedding_path`.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Root seed; takes precedence over the environment and `--set seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Keep the original case when tokenizing.
    #[arg(long)]
    pub no_lowercase: bool,
    /// BLSTM variant; also selects the model kind. Switching variant resets
    /// the epoch budget to that variant's default.
    #[arg(long)]
    pub variant: Option<Variant>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub val_fraction: Option<f64>,
    #[arg(long)]
    pub lr: Option<f64>,
}

impl ConfigArgs {
    /// Resolves the config, reading the seed override from the environment.
    pub fn resolve(&self) -> Result<ExperimentConfig> {
        let env_seed = std::env::var(SEED_ENV).ok();
        let mut cfg = ExperimentConfig::resolve(
            self.preset.as_deref(),
            self.config.as_deref(),
            &self.overrides,
            env_seed.as_deref(),
        )?;
        if let Some(path) = &self.embeddings {
            cfg.embedding_path = Some(path.clone());
        }
        self.apply_flags(&mut cfg);
        cfg.validate()?;
        Ok(cfg)
    }

    /// Dedicated flags win over the file, `--set` and the environment.
    fn apply_flags(&self, cfg: &mut ExperimentConfig) {
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if self.no_lowercase {
            cfg.lowercase = false;
        }
        if let Some(v) = self.variant {
            if cfg.blstm.variant != v {
                cfg.blstm.epochs = BlstmConfig::for_variant(v).epochs;
                cfg.blstm.variant = v;
            }
            cfg.model_kind = match v {
                Variant::Slstm => ModelKind::Slstm,
                Variant::Elstm => ModelKind::Elstm,
            };
        }
        let b = &mut cfg.blstm;
        if let Some(h) = self.hidden {
            b.hidden = h;
        }
        if let Some(e) = self.epochs {
            b.epochs = e;
        }
        if let Some(p) = self.patience {
            b.patience = p;
        }
        if let Some(f) = self.val_fraction {
            b.val_fraction = f;
        }
        if let Some(lr) = self.lr {
            b.learning_rate = lr;
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Dataset file (JSON array or CSV).
    #[arg(long)]
    pub data: PathBuf,
    /// Dataset format; inferred from the extension when omitted.
    #[arg(long)]
    pub format: Option<DatasetFormat>,
    /// Ignore unknown JSON keys.
    #[arg(long)]
    pub lenient: bool,
}

impl DataArgs {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        DataArgs {
            data: path.into(),
            format: None,
            lenient: false,
        }
    }

    /// Parsed instances plus the checksum of the raw file.
    pub fn load(&self) -> Result<(Vec<HeadlineInstance>, DatasetInfo)> {
        let bytes = fs::read(&self.data).map_err(|e| Error::io(&self.data, e))?;
        let raw = std::str::from_utf8(&bytes).map_err(|e| Error::Parse {
            record: 0,
            message: format!("{}: not UTF-8: {e}", self.data.display()),
        })?;
        let instances = match self.format.unwrap_or_else(|| DatasetFormat::from_path(&self.data)) {
            DatasetFormat::Json => parse_json(raw, LoadOptions { lenient: self.lenient })?,
            DatasetFormat::Csv => parse_csv(raw)?,
        };
        let info = DatasetInfo::from_bytes(&bytes, instances.len());
        Ok((instances, info))
    }
}

impl std::str::FromStr for DatasetFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "json" => Ok(DatasetFormat::Json),
            "csv" => Ok(DatasetFormat::Csv),
            other => Err(format!("unknown dataset format {other:?}")),
        }
    }
}

fn load_embeddings(cfg: &ExperimentConfig) -> Result<Option<crate::embeddings::WordVectors>> {
    match &cfg.embedding_path {
        Some(path) => load_word_vectors(path).map(Some),
        None if cfg.needs_embeddings() => Err(Error::Config(format!(
            "model kind {:?} with replacement groups {:?} needs --embeddings",
            cfg.model_kind, cfg.replacements.groups
        ))),
        None => Ok(None),
    }
}

pub fn cmd_train(cfg: &ExperimentConfig, data: &DataArgs, out: &Path) -> Result<Manifest> {
    let wv = load_embeddings(cfg)?;
    let (train, info) = data.load()?;
    let model = TrainedModel::fit(cfg, &train, wv.as_ref())?;
    model.save(out, &info)
}

pub fn cmd_predict(
    model_dir: &Path,
    data: &DataArgs,
    out: &Path,
    clamp: bool,
    embeddings: Option<&Path>,
) -> Result<PredictionSet> {
    let model = TrainedModel::load(model_dir)?;
    let wv = match (&model.pipeline, embeddings.or(model.config.embedding_path.as_deref())) {
        (crate::pipeline::Pipeline::Svr(_), _) => None,
        (_, Some(path)) => Some(load_word_vectors(path)?),
        (_, None) => return Err(Error::Config("BLSTM prediction needs --embeddings".into())),
    };
    let (instances, _) = data.load()?;
    let scores = model.predict(&instances, wv.as_ref(), clamp)?;
    let preds = PredictionSet::new(instances.iter().map(|i| i.id.clone()).zip(scores))?;
    preds.write(out)?;
    Ok(preds)
}

pub fn cmd_evaluate(predictions: &Path, gold: &DataArgs, top_k: usize, allow_partial: bool) -> Result<EvalReport> {
    let preds = PredictionSet::load(predictions)?;
    let (gold, _) = gold.load()?;
    evaluate(&preds, &gold, top_k, allow_partial)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvRow {
    pub rank: usize,
    pub label: String,
    pub mean: f64,
    pub per_fold: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvTable {
    pub metric: MetricSelector,
    pub k: usize,
    pub rows: Vec<CvRow>,
}

impl CvTable {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data")
    }

    pub fn render(&self) -> String {
        let width = self.rows.iter().map(|r| r.label.len()).max().unwrap_or(0);
        let mut out = format!("{:>4}  {:<width$}  {:>9}  per fold ({:?}, k={})\n", "rank", "config", "mean", self.metric, self.k);
        for row in &self.rows {
            let folds: Vec<String> = row.per_fold.iter().map(|f| format!("{f:.4}")).collect();
            out.push_str(&format!("{:>4}  {:<width$}  {:>9.4}  {}\n", row.rank, row.label, row.mean, folds.join(" ")));
        }
        out
    }
}

/// Runs cross-validation for every grid point over `cfg` and ranks them by
/// mean score; ties keep grid order.
pub fn cmd_cv(cfg: &ExperimentConfig, data: &DataArgs, grid: &CvGrid) -> Result<CvTable> {
    let (instances, _) = data.load()?;
    let folds = kfold_split(&group_by_sentence(&instances), cfg.cv.k, seed::derive(cfg.seed, FOLD_SEED_LABEL))?;
    let points = grid.expand(cfg)?;
    let wv = if points.iter().any(|p| p.config.needs_embeddings()) {
        load_embeddings(&points.iter().find(|p| p.config.needs_embeddings()).expect("checked").config)?
    } else {
        None
    };
    let mut rows = Vec::with_capacity(points.len());
    for point in &points {
        let estimator = ConfigEstimator {
            config: &point.config,
            embeddings: wv.as_ref(),
        };
        let report = cross_validate(&estimator, &instances, &folds, cfg.cv.metric)?;
        rows.push(CvRow {
            rank: 0,
            label: point.label.clone(),
            mean: report.mean,
            per_fold: report.per_fold,
        });
    }
    let higher = cfg.cv.metric.higher_is_better();
    rows.sort_by(|a, b| {
        let ord = a.mean.total_cmp(&b.mean);
        if higher { ord.reverse() } else { ord }
    });
    for (i, row) in rows.iter_mut().enumerate() {
        row.rank = i + 1;
    }
    Ok(CvTable {
        metric: cfg.cv.metric,
        k: cfg.cv.k,
        rows,
    })
}

/// One space-joined token line per input line.
pub fn cmd_tokenize(tokenizer: Tokenizer, lines: &[String]) -> Vec<String> {
    lines.iter().map(|l| tokenizer.tokenize(l).join()).collect()
}

pub fn cmd_neighbors(model: &Path, word: &str, n: usize) -> Result<Vec<(String, f64)>> {
    load_word_vectors(model)?.most_similar(word, n)
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn execute(command: Command, stdout: &mut dyn Write) -> Result<()> {
    let emit = |out: &mut dyn Write, text: &str| -> Result<()> {
        out.write_all(text.as_bytes()).map_err(|e| Error::io("<stdout>", e))
    };
    match command {
        Command::Train { config, data, out } => {
            let cfg = config.resolve()?;
            let manifest = cmd_train(&cfg, &data, &out)?;
            emit(
                stdout,
                &format!(
                    "trained {:?} model on {} instances into {}\n",
                    manifest.model_kind,
                    manifest.dataset.n_instances,
                    out.display()
                ),
            )
        }
        Command::Predict { model, data, out, clamp, embeddings } => {
            let preds = cmd_predict(&model, &data, &out, clamp, embeddings.as_deref())?;
            emit(stdout, &format!("wrote {} predictions to {}\n", preds.len(), out.display()))
        }
        Command::Evaluate { predictions, gold, lenient, top_k, allow_partial, out } => {
            let gold = DataArgs {
                lenient,
                ..DataArgs::new(gold)
            };
            let json = cmd_evaluate(&predictions, &gold, top_k, allow_partial)?.to_json();
            if let Some(path) = out {
                write_file(&path, &json)?;
            }
            emit(stdout, &format!("{json}\n"))
        }
        Command::Cv { config, data, k, grid, metric, out } => {
            let mut cfg = config.resolve()?;
            if let Some(k) = k {
                cfg.cv.k = k;
            }
            if let Some(metric) = metric {
                cfg.cv.metric = metric;
            }
            let grid = match grid {
                Some(path) => CvGrid::load(&path)?,
                None => CvGrid::default(),
            };
            let table = cmd_cv(&cfg, &data, &grid)?;
            if let Some(path) = out {
                write_file(&path, &table.to_json())?;
            }
            emit(stdout, &table.render())
        }
        Command::Tokenize { mode, no_lowercase, text } => {
            let lines = if text.is_empty() {
                io::stdin()
                    .lock()
                    .lines()
                    .collect::<io::Result<Vec<_>>>()
                    .map_err(|e| Error::io("<stdin>", e))?
            } else {
                text
            };
            let tok = Tokenizer {
                kind: mode,
                lowercase: !no_lowercase,
            };
            let mut out = String::new();
            for line in cmd_tokenize(tok, &lines) {
                out.push_str(&line);
                out.push('\n');
            }
            emit(stdout, &out)
        }
        Command::Neighbors { model, word, n } => {
            let mut out = String::new();
            for (w, sim) in cmd_neighbors(&model, &word, n)? {
                out.push_str(&format!("{w}\t{sim:.6}\n"));
            }
            emit(stdout, &out)
        }
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(stderr, "{}", e.render());
            return e.exit_code();
        }
    };
    match execute(cli.command, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.category().exit_code()
        }
    }
}
