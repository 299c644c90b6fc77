//! Command-line front end: synthesize datasets, train, evaluate, run the
//! streaming detector, and gradient-check the implementation.

use clap::{Args, Parser, Subcommand};
use gntm_core::data::{self, LabeledWindow, Schema, SynthSpec, CLASS_NAMES, WINDOW_SIZE};
use gntm_core::error::{Error, Result};
use gntm_core::eval::{emit_report, evaluate};
use gntm_core::model::{argmax, forward, grad_check, ModelConfig};
use gntm_core::rng::Rng;
use gntm_core::training::{train, write_epoch_log, Checkpoint, CheckpointMeta, TrainConfig};
use gntm_core::Tensor;
use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "gntm",
    about = "GRU-NTM classifier for Normal/DoS/DDoS traffic windows",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded synthetic dataset (per-class CSVs plus schema)
    Synth(SynthArgs),
    /// Train on a dataset directory and write checkpoint + logs
    Train(TrainArgs),
    /// Evaluate a checkpoint and emit report files
    Eval(EvalArgs),
    /// Stream records through a rolling window and classify each step
    Detect(DetectArgs),
    /// Finite-difference check of the analytic gradients
    Gradcheck(GradcheckArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Output directory for normal.csv / dos.csv / ddos.csv / schema.txt
    #[arg(long, default_value = "data")]
    out_dir: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    per_class: Option<usize>,
    #[arg(long)]
    features: Option<usize>,
    /// Key-value config file (flags take precedence)
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    /// Dataset directory produced by `synth` (or matching its layout)
    #[arg(long, default_value = "data")]
    data_dir: PathBuf,
    /// Where to write model.gntm, epochlog.csv and test.gnw
    #[arg(long, default_value = "run")]
    out_dir: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    max_epochs: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    val_fraction: Option<f64>,
    #[arg(long)]
    reduce_fraction: Option<f64>,
    /// Held-out test share of all windows
    #[arg(long)]
    test_fraction: Option<f64>,
    #[arg(long)]
    chunk_size: Option<usize>,
    /// Record the epoch log with 0.000 in the seconds column so identical
    /// runs produce byte-identical logs
    #[arg(long)]
    no_timing: bool,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Window cache (.gnw from `train`) or a labeled CSV
    #[arg(long)]
    data: PathBuf,
    /// Schema file, required when --data is a CSV
    #[arg(long)]
    schema: Option<PathBuf>,
    /// Directory for report.json, confusion.csv and ROC curves
    #[arg(long, default_value = "report")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct DetectArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// CSV of feature rows in arrival order (header required)
    #[arg(long)]
    input: PathBuf,
    /// Print `uncertain` instead of a class when the top probability is
    /// below this threshold
    #[arg(long)]
    min_confidence: Option<f64>,
    /// Schema file naming a label column to ignore, if present
    #[arg(long)]
    schema: Option<PathBuf>,
}

#[derive(Args)]
struct GradcheckArgs {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 1e-4)]
    tolerance: f64,
    /// Minimum number of sampled coordinates
    #[arg(long, default_value_t = 200)]
    coords: usize,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap prints its own help/version output on code 0.
            let code = if e.exit_code() == 0 { 0 } else { 1 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let outcome = match cli.command {
        Command::Synth(a) => cmd_synth(a),
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Detect(a) => cmd_detect(a),
        Command::Gradcheck(a) => cmd_gradcheck(a),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) => ExitCode::from(1),
                _ => ExitCode::from(2),
            }
        }
    }
}

// ---------------------------------------------------------------- config --

/// Key-value config file contents; every key must be known.
struct FileConfig(HashMap<String, String>);

const KNOWN_KEYS: &[&str] = &[
    "seed",
    "per_class",
    "features",
    "chunk_size",
    "batch_size",
    "max_epochs",
    "patience",
    "learning_rate",
    "val_fraction",
    "reduce_fraction",
    "test_fraction",
    "min_confidence",
    "tolerance",
    "coords",
    "no_timing",
];

impl FileConfig {
    fn load(path: Option<&Path>) -> Result<Self> {
        let mut map = HashMap::new();
        if let Some(path) = path {
            let text = std::fs::read_to_string(path)?;
            for (key, value) in data::parse_kv(&text)? {
                if !KNOWN_KEYS.contains(&key.as_str()) {
                    return Err(Error::Config(format!(
                        "unknown config key '{key}' in {}",
                        path.display()
                    )));
                }
                map.insert(key, value);
            }
        }
        Ok(FileConfig(map))
    }

    fn get<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.0.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|_| Error::Config(format!("bad value '{raw}' for config key '{key}'"))),
        }
    }
}

/// Seed precedence: flag, then config file, then GNTM_SEED, then default.
fn resolve_seed(flag: Option<u64>, file: &FileConfig, default: u64) -> Result<u64> {
    if let Some(s) = flag {
        return Ok(s);
    }
    if let Some(s) = file.get::<u64>("seed")? {
        return Ok(s);
    }
    match std::env::var("GNTM_SEED") {
        Ok(raw) => raw
            .parse()
            .map_err(|_| Error::Config(format!("bad GNTM_SEED value '{raw}'"))),
        Err(_) => Ok(default),
    }
}

fn pick<T>(flag: Option<T>, file_value: Option<T>, default: T) -> T {
    flag.or(file_value).unwrap_or(default)
}

// ----------------------------------------------------------------- synth --

const CLASS_FILES: [&str; 3] = ["normal.csv", "dos.csv", "ddos.csv"];

fn cmd_synth(args: SynthArgs) -> Result<u8> {
    let file = FileConfig::load(args.config.as_deref())?;
    let spec = SynthSpec {
        seed: resolve_seed(args.seed, &file, 7)?,
        per_class: pick(args.per_class, file.get("per_class")?, 2000),
        features: pick(args.features, file.get("features")?, 12),
    };
    let classes = data::synth_generate(&spec)?;
    std::fs::create_dir_all(&args.out_dir)?;
    for (records, name) in classes.iter().zip(CLASS_FILES) {
        data::write_records_csv(&args.out_dir.join(name), records)?;
    }
    Schema::synthetic().save(&args.out_dir.join("schema.txt"))?;
    println!(
        "wrote {} records per class ({} features, seed {}) to {}",
        spec.per_class,
        spec.features,
        spec.seed,
        args.out_dir.display()
    );
    Ok(0)
}

// ----------------------------------------------------------------- train --

fn cmd_train(args: TrainArgs) -> Result<u8> {
    let file = FileConfig::load(args.config.as_deref())?;
    let seed = resolve_seed(args.seed, &file, 42)?;
    let defaults = TrainConfig::default();
    let cfg = TrainConfig {
        learning_rate: pick(
            args.learning_rate,
            file.get("learning_rate")?,
            defaults.learning_rate,
        ),
        batch_size: pick(args.batch_size, file.get("batch_size")?, defaults.batch_size),
        max_epochs: pick(args.max_epochs, file.get("max_epochs")?, defaults.max_epochs),
        patience: pick(args.patience, file.get("patience")?, defaults.patience),
        val_fraction: pick(
            args.val_fraction,
            file.get("val_fraction")?,
            defaults.val_fraction,
        ),
        reduce_fraction: pick(
            args.reduce_fraction,
            file.get("reduce_fraction")?,
            defaults.reduce_fraction,
        ),
        seed,
        record_timing: !(args.no_timing || file.get("no_timing")?.unwrap_or(false)),
        ..defaults
    };
    let test_fraction = pick(args.test_fraction, file.get("test_fraction")?, 0.2);
    let chunk_size = pick(args.chunk_size, file.get("chunk_size")?, 80_000);

    // Ingest the per-class files and group records by label.
    let schema = Schema::load(&args.data_dir.join("schema.txt"))?;
    let mut per_class: Vec<Vec<data::FlowRecord>> = vec![Vec::new(); CLASS_NAMES.len()];
    for name in CLASS_FILES {
        let path = args.data_dir.join(name);
        let ingested = data::ingest_csv(&path, &schema)?;
        if ingested.rejected_rows > 0 {
            eprintln!("{}: {} rows rejected", path.display(), ingested.rejected_rows);
        }
        for r in ingested.records {
            per_class[r.label].push(r);
        }
    }

    // Balance to the smallest class (capped at chunk_size), then window
    // each class separately: class runs stay contiguous, so no window
    // straddles a class boundary and last-record labels are unambiguous.
    let take = per_class
        .iter()
        .map(|c| c.len().min(chunk_size))
        .min()
        .ok_or_else(|| Error::Data("no classes".into()))?;
    if take < WINDOW_SIZE {
        return Err(Error::Data(format!(
            "smallest class has {take} records; need at least {WINDOW_SIZE}"
        )));
    }
    let mut windows = Vec::new();
    for class_records in &per_class {
        windows.extend(data::make_windows(
            &class_records[..take],
            WINDOW_SIZE,
            1,
        )?);
    }

    let mut rng = Rng::new(seed);
    rng.shuffle(&mut windows);

    // Held-out test split first, then the paper's 20% data reduction and
    // the train/validation split.
    let test_n = ((windows.len() as f64) * test_fraction).round() as usize;
    let test: Vec<LabeledWindow> = windows.split_off(windows.len() - test_n);
    let reduced = data::reduce_fraction(windows, cfg.reduce_fraction, &mut rng)?;
    let (mut train_set, mut val_set) = data::train_val_split(reduced, cfg.val_fraction, &mut rng)?;

    // Normalization is fitted on the training split only.
    let norm = data::fit_minmax_windows(&train_set)?;
    data::apply_minmax_windows(&mut train_set, &norm);
    data::apply_minmax_windows(&mut val_set, &norm);
    let mut test = test;
    data::apply_minmax_windows(&mut test, &norm);

    let features = norm.features();
    let model_config = ModelConfig::standard(features);
    println!(
        "training on {} windows ({} val, {} test), {} features, seed {}",
        train_set.len(),
        val_set.len(),
        test.len(),
        features,
        seed
    );
    let result = train(&model_config, &cfg, &train_set, &val_set)?;

    std::fs::create_dir_all(&args.out_dir)?;
    let checkpoint = Checkpoint {
        config: model_config,
        params: result.params,
        norm,
        meta: CheckpointMeta {
            epoch: result.best_epoch as u32,
            val_loss: result.best_val_loss,
            seed,
        },
    };
    checkpoint.save(&args.out_dir.join("model.gntm"))?;
    write_epoch_log(&args.out_dir.join("epochlog.csv"), &result.logs)?;
    data::save_windows(&args.out_dir.join("test.gnw"), &test)?;

    println!(
        "stopped after epoch {} (best epoch {}, val loss {:.6}); wrote {}",
        result.stopped_epoch,
        result.best_epoch,
        result.best_val_loss,
        args.out_dir.display()
    );
    Ok(0)
}

// ------------------------------------------------------------------ eval --

fn load_eval_windows(args: &EvalArgs, checkpoint: &Checkpoint) -> Result<Vec<LabeledWindow>> {
    // A window cache is already normalized (it comes out of `train`);
    // a CSV is raw and gets the checkpoint's normalization applied.
    if let Ok(windows) = data::load_windows(&args.data) {
        return Ok(windows);
    }
    let schema_path = args
        .schema
        .as_ref()
        .ok_or_else(|| Error::Config("--schema is required when --data is a CSV".into()))?;
    let schema = Schema::load(schema_path)?;
    let mut records = data::ingest_csv(&args.data, &schema)?.records;
    let found = records
        .first()
        .map(|r| r.features.len())
        .ok_or_else(|| Error::Data("no usable records in the evaluation CSV".into()))?;
    if found != checkpoint.config.input_features {
        return Err(Error::Data(format!(
            "feature count mismatch: model expects {}, data has {found}",
            checkpoint.config.input_features
        )));
    }
    data::apply_minmax(&mut records, &checkpoint.norm);
    data::make_windows(&records, checkpoint.config.window, 1)
}

fn cmd_eval(args: EvalArgs) -> Result<u8> {
    let checkpoint = Checkpoint::load(&args.checkpoint)?;
    let windows = load_eval_windows(&args, &checkpoint)?;
    if let Some(w) = windows.first() {
        if w.window.cols() != checkpoint.config.input_features {
            return Err(Error::Data(format!(
                "feature count mismatch: model expects {}, data has {}",
                checkpoint.config.input_features,
                w.window.cols()
            )));
        }
    }
    let report = evaluate(&checkpoint.params, &windows)?;
    emit_report(&args.out_dir, &report, None)?;
    let aucs: Vec<String> = report
        .classes
        .iter()
        .map(|c| match c.auc {
            Some(a) => format!("{}:{:.4}", c.name, a),
            None => format!("{}:n/a", c.name),
        })
        .collect();
    println!(
        "accuracy={:.4} macro_f1={:.4} auc={}",
        report.accuracy,
        report.macro_f1,
        aucs.join(",")
    );
    println!("report written to {}", args.out_dir.display());
    Ok(0)
}

// ---------------------------------------------------------------- detect --

fn cmd_detect(args: DetectArgs) -> Result<u8> {
    let checkpoint = Checkpoint::load(&args.checkpoint)?;
    let features = checkpoint.config.input_features;
    let window = checkpoint.config.window;
    let min_confidence = args.min_confidence.unwrap_or(0.0);

    // An optional schema names a label column (and drop columns) to skip;
    // otherwise every CSV column is a feature.
    let skip_columns: Vec<String> = match &args.schema {
        Some(path) => {
            let schema = Schema::load(path)?;
            let mut skip = schema.drop_columns.clone();
            skip.push(schema.label_column.clone());
            skip
        }
        None => Vec::new(),
    };

    let mut reader = csv::Reader::from_path(&args.input)
        .map_err(|e| Error::Data(format!("cannot open {}: {e}", args.input.display())))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Data(format!("bad CSV header: {e}")))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let feature_cols: Vec<usize> = headers
        .iter()
        .enumerate()
        .filter(|(_, h)| !skip_columns.contains(h))
        .map(|(i, _)| i)
        .collect();
    if feature_cols.len() != features {
        return Err(Error::Data(format!(
            "feature count mismatch: model expects {features}, input has {}",
            feature_cols.len()
        )));
    }

    let mut buffer: Vec<Vec<f64>> = Vec::new();
    let mut index = 0usize;
    for row in reader.records() {
        let row = row.map_err(|e| Error::Data(format!("CSV parse error: {e}")))?;
        index += 1;
        let mut rec = Vec::with_capacity(features);
        for (fi, &ci) in feature_cols.iter().enumerate() {
            let cell = row.get(ci).unwrap_or("").trim();
            let value: f64 = cell.parse().map_err(|_| {
                Error::Data(format!("record {index}: bad numeric value '{cell}'"))
            })?;
            rec.push(checkpoint.norm.normalize_value(fi, value));
        }
        buffer.push(rec);
        if buffer.len() > window {
            buffer.remove(0);
        }
        if buffer.len() < window {
            continue;
        }
        let data: Vec<f64> = buffer.iter().flatten().copied().collect();
        let tensor = Tensor::new(vec![window, features], data)?;
        let (probs, _) = forward(&checkpoint.params, &tensor)?;
        let top = argmax(&probs);
        let label = if probs[top] >= min_confidence {
            CLASS_NAMES[top]
        } else {
            "uncertain"
        };
        println!(
            "{index},{label},{:.6},{:.6},{:.6}",
            probs[0], probs[1], probs[2]
        );
    }
    if index < window {
        eprintln!("warm-up: {index} records seen, need {window} before the first classification");
    }
    Ok(0)
}

// ------------------------------------------------------------- gradcheck --

fn cmd_gradcheck(args: GradcheckArgs) -> Result<u8> {
    let file = FileConfig::load(None)?;
    let seed = resolve_seed(args.seed, &file, 1234)?;
    let report = grad_check(&ModelConfig::tiny(), seed, args.tolerance, args.coords)?;
    println!(
        "max rel err {:.3e} at {}[{}] over {} coordinates (tolerance {:.0e})",
        report.max_rel_err,
        report.worst_tensor,
        report.worst_index,
        report.coords_checked,
        report.tolerance
    );
    if report.passed() {
        println!("gradcheck PASS");
        Ok(0)
    } else {
        println!("gradcheck FAIL");
        Ok(3)
    }
}
