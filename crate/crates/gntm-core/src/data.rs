//! Dataset pipeline: CSV ingestion with a schema file, chunk balancing,
//! min-max normalization, one-hot labels, sliding windows, train/val
//! splitting, the seeded synthetic traffic generator, and the windowed
//! dataset cache.

use crate::error::{Error, Result};
use crate::fileio;
use crate::rng::Rng;
use crate::tensor::Tensor;
use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

/// Frozen class order: Normal=0, DoS=1, DDoS=2.
pub const CLASS_NAMES: [&str; 3] = ["Normal", "DoS", "DDoS"];
pub const NUM_CLASSES: usize = 3;

pub fn class_name(id: usize) -> &'static str {
    CLASS_NAMES[id]
}

/// One network-flow feature row.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowRecord {
    pub features: Vec<f64>,
    pub label: usize,
}

/// A 10 x F feature window plus its one-hot label (label of the window's
/// last record).
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledWindow {
    pub window: Tensor,
    pub label_onehot: Tensor,
}

impl LabeledWindow {
    pub fn label(&self) -> usize {
        crate::model::argmax(self.label_onehot.data())
    }
}

pub fn one_hot(label: usize) -> Result<Tensor> {
    if label >= NUM_CLASSES {
        return Err(Error::Domain(format!(
            "class id {label} out of range 0..{NUM_CLASSES}"
        )));
    }
    let mut data = vec![0.0; NUM_CLASSES];
    data[label] = 1.0;
    Ok(Tensor::vector(data))
}

// ---------------------------------------------------------------- schema --

/// How a non-numeric column is turned into a feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CategoricalMode {
    /// Stable 64-bit FNV-1a hash scaled into [0, 1).
    Hash,
    /// Column removed entirely.
    Drop,
}

/// Declares the label column, the class-name -> id mapping and the
/// handling of non-numeric columns for a CSV dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Schema {
    pub label_column: String,
    pub classes: HashMap<String, usize>,
    pub drop_columns: Vec<String>,
    pub hash_columns: Vec<String>,
}

impl Schema {
    /// Schema for the synthetic CSVs: plain numeric features, `label`
    /// column holding class names.
    pub fn synthetic() -> Self {
        Schema {
            label_column: "label".into(),
            classes: CLASS_NAMES
                .iter()
                .enumerate()
                .map(|(i, n)| (n.to_string(), i))
                .collect(),
            drop_columns: Vec::new(),
            hash_columns: Vec::new(),
        }
    }

    /// Parse the flat key-value schema format (`#` comments, `key = value`).
    pub fn parse(text: &str) -> Result<Self> {
        let kv = parse_kv(text)?;
        let mut label_column = None;
        let mut classes = HashMap::new();
        let mut drop_columns = Vec::new();
        let mut hash_columns = Vec::new();
        for (key, value) in kv {
            if key == "label_column" {
                label_column = Some(value);
            } else if let Some(name) = key.strip_prefix("class.") {
                let id: usize = value
                    .parse()
                    .map_err(|_| Error::Config(format!("bad class id '{value}' for {name}")))?;
                if id >= NUM_CLASSES {
                    return Err(Error::Config(format!("class id {id} out of range")));
                }
                classes.insert(name.to_string(), id);
            } else if key == "drop_columns" {
                drop_columns = split_list(&value);
            } else if key == "hash_columns" {
                hash_columns = split_list(&value);
            } else {
                return Err(Error::Config(format!("unknown schema key '{key}'")));
            }
        }
        let label_column =
            label_column.ok_or_else(|| Error::Config("schema missing label_column".into()))?;
        if classes.is_empty() {
            return Err(Error::Config("schema declares no classes".into()));
        }
        Ok(Schema {
            label_column,
            classes,
            drop_columns,
            hash_columns,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        out.push_str("# GRU-NTM dataset schema\n");
        out.push_str(&format!("label_column = {}\n", self.label_column));
        let mut classes: Vec<(&String, &usize)> = self.classes.iter().collect();
        classes.sort_by_key(|(_, &id)| id);
        for (name, id) in classes {
            out.push_str(&format!("class.{name} = {id}\n"));
        }
        if !self.drop_columns.is_empty() {
            out.push_str(&format!("drop_columns = {}\n", self.drop_columns.join(",")));
        }
        if !self.hash_columns.is_empty() {
            out.push_str(&format!("hash_columns = {}\n", self.hash_columns.join(",")));
        }
        std::fs::write(path, out).map_err(Into::into)
    }
}

/// Flat key-value parser shared by schema and run-config files.
pub fn parse_kv(text: &str) -> Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!("line {}: expected 'key = value'", lineno + 1))
        })?;
        pairs.push((key.trim().to_string(), value.trim().to_string()));
    }
    Ok(pairs)
}

fn split_list(value: &str) -> Vec<String> {
    value
        .split(',')
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect()
}

/// Stable string -> [0, 1) bucket via FNV-1a.
pub fn hash_to_unit(s: &str) -> f64 {
    fileio::fnv1a64(s.as_bytes()) as f64 / (u64::MAX as f64 + 1.0)
}

// ------------------------------------------------------------- ingestion --

#[derive(Debug)]
pub struct IngestResult {
    pub records: Vec<FlowRecord>,
    pub rejected_rows: usize,
    /// Feature column names in order, after drops.
    pub feature_names: Vec<String>,
}

/// Parse a headered CSV into flow records per the schema. Rows with
/// unparseable numeric cells are rejected (and counted); more than 10%
/// rejects is a hard error, as is an unknown label string.
pub fn ingest_csv(path: &Path, schema: &Schema) -> Result<IngestResult> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| Error::Data(format!("cannot open {}: {e}", path.display())))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Data(format!("bad CSV header: {e}")))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();

    let label_idx = headers
        .iter()
        .position(|h| *h == schema.label_column)
        .ok_or_else(|| {
            Error::Data(format!(
                "label column '{}' not found in {}",
                schema.label_column,
                path.display()
            ))
        })?;

    #[derive(Clone, Copy)]
    enum ColKind {
        Numeric,
        Hash,
        Skip,
    }
    let kinds: Vec<ColKind> = headers
        .iter()
        .enumerate()
        .map(|(i, h)| {
            if i == label_idx || schema.drop_columns.contains(h) {
                ColKind::Skip
            } else if schema.hash_columns.contains(h) {
                ColKind::Hash
            } else {
                ColKind::Numeric
            }
        })
        .collect();
    let feature_names: Vec<String> = headers
        .iter()
        .zip(&kinds)
        .filter(|(_, k)| !matches!(k, ColKind::Skip))
        .map(|(h, _)| h.clone())
        .collect();

    let mut records = Vec::new();
    let mut rejected = 0usize;
    let mut total = 0usize;
    for row in reader.records() {
        let row = row.map_err(|e| Error::Data(format!("CSV parse error: {e}")))?;
        total += 1;
        let label_str = row.get(label_idx).unwrap_or("").trim();
        let label = *schema.classes.get(label_str).ok_or_else(|| {
            Error::Data(format!(
                "unknown label '{label_str}' in {} (row {total})",
                path.display()
            ))
        })?;
        let mut features = Vec::with_capacity(feature_names.len());
        let mut ok = true;
        for (i, cell) in row.iter().enumerate() {
            match kinds.get(i) {
                Some(ColKind::Numeric) => match cell.trim().parse::<f64>() {
                    Ok(v) if v.is_finite() => features.push(v),
                    _ => {
                        ok = false;
                        break;
                    }
                },
                Some(ColKind::Hash) => features.push(hash_to_unit(cell.trim())),
                _ => {}
            }
        }
        if ok && features.len() == feature_names.len() {
            records.push(FlowRecord { features, label });
        } else {
            rejected += 1;
        }
    }
    if total > 0 && rejected * 10 > total {
        return Err(Error::Data(format!(
            "{rejected} of {total} rows rejected in {} (> 10%)",
            path.display()
        )));
    }
    Ok(IngestResult {
        records,
        rejected_rows: rejected,
        feature_names,
    })
}

/// Write records as a headered CSV (features f0..fN, label as class name).
pub fn write_records_csv(path: &Path, records: &[FlowRecord]) -> Result<()> {
    let file = File::create(path)?;
    let mut w = BufWriter::new(file);
    let f = records.first().map(|r| r.features.len()).unwrap_or(0);
    let header: Vec<String> = (0..f).map(|i| format!("f{i}")).collect();
    writeln!(w, "{},label", header.join(","))?;
    for r in records {
        let cells: Vec<String> = r.features.iter().map(|v| format!("{v:.9}")).collect();
        writeln!(w, "{},{}", cells.join(","), class_name(r.label))?;
    }
    Ok(())
}

// -------------------------------------------------------------- balancing --

/// Equalizes the per-class lists to min(smallest class, chunk_size) records
/// each, merges and shuffles them with the seeded RNG.
pub fn chunk_balance(
    per_class: &[Vec<FlowRecord>],
    chunk_size: usize,
    rng: &mut Rng,
) -> Result<Vec<FlowRecord>> {
    if per_class.iter().any(|c| c.is_empty()) {
        return Err(Error::Data("chunk_balance: empty class list".into()));
    }
    let take = per_class
        .iter()
        .map(|c| c.len().min(chunk_size))
        .min()
        .unwrap();
    let mut merged: Vec<FlowRecord> = per_class
        .iter()
        .flat_map(|c| c[..take].iter().cloned())
        .collect();
    rng.shuffle(&mut merged);
    Ok(merged)
}

// ---------------------------------------------------------- normalization --

/// Per-feature min/max fitted on the training split only.
#[derive(Debug, Clone, PartialEq)]
pub struct NormStats {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    /// How categorical columns were encoded when these stats were fitted.
    pub categorical_mode: CategoricalMode,
}

impl NormStats {
    pub fn features(&self) -> usize {
        self.min.len()
    }

    /// X' = (X - min) / (max - min), clamped to [0, 1]. A constant feature
    /// (max == min) maps to 0.
    pub fn normalize_value(&self, feature: usize, value: f64) -> f64 {
        let (lo, hi) = (self.min[feature], self.max[feature]);
        if hi <= lo {
            return 0.0;
        }
        ((value - lo) / (hi - lo)).clamp(0.0, 1.0)
    }
}

pub fn fit_minmax(records: &[FlowRecord]) -> Result<NormStats> {
    let f = records
        .first()
        .map(|r| r.features.len())
        .ok_or_else(|| Error::Data("fit_minmax: no records".into()))?;
    let mut min = vec![f64::INFINITY; f];
    let mut max = vec![f64::NEG_INFINITY; f];
    for r in records {
        for (i, &v) in r.features.iter().enumerate() {
            min[i] = min[i].min(v);
            max[i] = max[i].max(v);
        }
    }
    Ok(NormStats {
        min,
        max,
        categorical_mode: CategoricalMode::Hash,
    })
}

pub fn apply_minmax(records: &mut [FlowRecord], stats: &NormStats) {
    for r in records {
        for (i, v) in r.features.iter_mut().enumerate() {
            *v = stats.normalize_value(i, *v);
        }
    }
}

/// Fit on windows (equivalent to fitting on their source records: the map
/// is a pure per-feature transform).
pub fn fit_minmax_windows(windows: &[LabeledWindow]) -> Result<NormStats> {
    let f = windows
        .first()
        .map(|w| w.window.cols())
        .ok_or_else(|| Error::Data("fit_minmax_windows: no windows".into()))?;
    let mut min = vec![f64::INFINITY; f];
    let mut max = vec![f64::NEG_INFINITY; f];
    for w in windows {
        for t in 0..w.window.rows() {
            for (i, &v) in w.window.row(t).iter().enumerate() {
                min[i] = min[i].min(v);
                max[i] = max[i].max(v);
            }
        }
    }
    Ok(NormStats {
        min,
        max,
        categorical_mode: CategoricalMode::Hash,
    })
}

pub fn apply_minmax_windows(windows: &mut [LabeledWindow], stats: &NormStats) {
    for w in windows {
        let cols = w.window.cols();
        for (idx, v) in w.window.data_mut().iter_mut().enumerate() {
            *v = stats.normalize_value(idx % cols, *v);
        }
    }
}

// --------------------------------------------------------------- windows --

pub const WINDOW_SIZE: usize = 10;

/// Cut sliding windows; each window is labeled by its LAST record.
pub fn make_windows(records: &[FlowRecord], window: usize, stride: usize) -> Result<Vec<LabeledWindow>> {
    make_windows_opts(records, window, stride, false)
}

/// `pure_only` drops windows whose records span more than one label.
pub fn make_windows_opts(
    records: &[FlowRecord],
    window: usize,
    stride: usize,
    pure_only: bool,
) -> Result<Vec<LabeledWindow>> {
    if window == 0 || stride == 0 {
        return Err(Error::Config("window and stride must be >= 1".into()));
    }
    if records.len() < window {
        return Err(Error::Data(format!(
            "need at least {window} records, got {}",
            records.len()
        )));
    }
    let f = records[0].features.len();
    let count = (records.len() - window) / stride + 1;
    let mut out = Vec::with_capacity(count);
    for k in 0..count {
        let start = k * stride;
        let slice = &records[start..start + window];
        if pure_only && slice.iter().any(|r| r.label != slice[window - 1].label) {
            continue;
        }
        let mut data = Vec::with_capacity(window * f);
        for r in slice {
            data.extend_from_slice(&r.features);
        }
        out.push(LabeledWindow {
            window: Tensor::new(vec![window, f], data)?,
            label_onehot: one_hot(slice[window - 1].label)?,
        });
    }
    Ok(out)
}

// ---------------------------------------------------------------- splits --

/// Seeded shuffle, then split; validation gets round(n * fraction) windows.
pub fn train_val_split(
    windows: Vec<LabeledWindow>,
    val_fraction: f64,
    rng: &mut Rng,
) -> Result<(Vec<LabeledWindow>, Vec<LabeledWindow>)> {
    if windows.is_empty() {
        return Err(Error::Data("train_val_split: empty input".into()));
    }
    if !(0.0..1.0).contains(&val_fraction) || val_fraction == 0.0 {
        return Err(Error::Config(format!(
            "val_fraction must be in (0, 1), got {val_fraction}"
        )));
    }
    let mut windows = windows;
    rng.shuffle(&mut windows);
    let val_n = ((windows.len() as f64) * val_fraction).round() as usize;
    let val = windows.split_off(windows.len() - val_n);
    Ok((windows, val))
}

/// Seeded uniform sample without replacement of round(n * fraction) windows.
pub fn reduce_fraction(
    windows: Vec<LabeledWindow>,
    fraction: f64,
    rng: &mut Rng,
) -> Result<Vec<LabeledWindow>> {
    if !(0.0..=1.0).contains(&fraction) || fraction == 0.0 {
        return Err(Error::Config(format!(
            "fraction must be in (0, 1], got {fraction}"
        )));
    }
    if fraction == 1.0 {
        return Ok(windows);
    }
    let keep = ((windows.len() as f64) * fraction).round() as usize;
    let perm = rng.permutation(windows.len());
    let mut picked: Vec<usize> = perm[..keep].to_vec();
    // Preserve the original relative order of the survivors.
    picked.sort_unstable();
    Ok(picked.into_iter().map(|i| windows[i].clone()).collect())
}

// ------------------------------------------------------------- synthetic --

/// Seeded synthetic traffic generator; a desk-scale stand-in for the real
/// flow datasets. Feature roles: f0 = flow rate, f1 = source entropy,
/// the rest are generic protocol statistics with mild class drift.
#[derive(Debug, Clone, Copy)]
pub struct SynthSpec {
    pub seed: u64,
    pub per_class: usize,
    pub features: usize,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.features < 2 {
            return Err(Error::Config("synthetic generator needs >= 2 features".into()));
        }
        if self.per_class < 10 {
            return Err(Error::Config("need >= 10 samples per class".into()));
        }
        Ok(())
    }
}

struct ClassProfile {
    rate_mean: f64,
    rate_ramp: f64,
    entropy_mean: f64,
    generic_offset: f64,
}

const PROFILES: [ClassProfile; 3] = [
    // Normal: stationary moderate-rate traffic, mid entropy.
    ClassProfile {
        rate_mean: 1.0,
        rate_ramp: 0.0,
        entropy_mean: 0.5,
        generic_offset: 0.0,
    },
    // DoS: single-source burst; high rate ramping up, low source entropy.
    ClassProfile {
        rate_mean: 4.0,
        rate_ramp: 1.0,
        entropy_mean: 0.08,
        generic_offset: 0.3,
    },
    // DDoS: many sources; high rate ramping up, high source entropy.
    ClassProfile {
        rate_mean: 4.0,
        rate_ramp: 1.0,
        entropy_mean: 0.92,
        generic_offset: -0.3,
    },
];

const RATE_STD: f64 = 0.25;
const ENTROPY_STD: f64 = 0.1;
const GENERIC_STD: f64 = 0.5;
const AR_COEFF: f64 = 0.8;

/// Generates three class-conditional record streams. Records within a class
/// are temporally autocorrelated (AR(1) within runs of 60-100 records) so
/// windows carry sequence information; runs are contiguous, so windows cut
/// within a class list never cross a class boundary.
pub fn synth_generate(spec: &SynthSpec) -> Result<[Vec<FlowRecord>; 3]> {
    spec.validate()?;
    let mut rng = Rng::new(spec.seed);
    let mut out: [Vec<FlowRecord>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    for (class, profile) in PROFILES.iter().enumerate() {
        let records = &mut out[class];
        // AR(1) deviations, one per feature.
        let mut dev = vec![0.0f64; spec.features];
        let innov = (1.0 - AR_COEFF * AR_COEFF).sqrt();
        while records.len() < spec.per_class {
            let run_len = (60 + rng.below(41)).min(spec.per_class - records.len()).max(1);
            for d in dev.iter_mut() {
                *d = 0.0;
            }
            for t in 0..run_len {
                let ramp = profile.rate_ramp * t as f64 / run_len as f64;
                let mut features = Vec::with_capacity(spec.features);
                for f in 0..spec.features {
                    let (mean, std) = match f {
                        0 => (profile.rate_mean + ramp, RATE_STD),
                        1 => (profile.entropy_mean, ENTROPY_STD),
                        _ => (profile.generic_offset * (1.0 + f as f64 * 0.1), GENERIC_STD),
                    };
                    dev[f] = AR_COEFF * dev[f] + innov * rng.normal();
                    let mut v = mean + std * dev[f];
                    if f == 1 {
                        v = v.clamp(0.0, 1.0);
                    }
                    features.push(v);
                }
                records.push(FlowRecord {
                    features,
                    label: class,
                });
            }
        }
        records.truncate(spec.per_class);
    }
    Ok(out)
}

// ----------------------------------------------------------- window cache --

const CACHE_VERSION: u16 = 1;

/// Versioned binary container for windowed datasets: magic `GNTM`, kind,
/// version, F, T, count, then per window T*F features plus the 3-float
/// one-hot label, all little-endian f64.
pub fn save_windows(path: &Path, windows: &[LabeledWindow]) -> Result<()> {
    if windows.is_empty() {
        return Err(Error::Data("save_windows: nothing to save".into()));
    }
    let t = windows[0].window.rows();
    let f = windows[0].window.cols();
    let file = File::create(path)?;
    let mut w = BufWriter::new(file);
    fileio::write_header(&mut w, fileio::KIND_WINDOW_CACHE, CACHE_VERSION)?;
    fileio::write_u32(&mut w, f as u32)?;
    fileio::write_u32(&mut w, t as u32)?;
    fileio::write_u32(&mut w, windows.len() as u32)?;
    for win in windows {
        if win.window.rows() != t || win.window.cols() != f {
            return Err(Error::Shape("save_windows: inconsistent window shapes".into()));
        }
        for &v in win.window.data() {
            fileio::write_f64(&mut w, v)?;
        }
        for &v in win.label_onehot.data() {
            fileio::write_f64(&mut w, v)?;
        }
    }
    w.flush().map_err(Into::into)
}

pub fn load_windows(path: &Path) -> Result<Vec<LabeledWindow>> {
    let file = File::open(path)?;
    let mut r = BufReader::new(file);
    fileio::read_header(&mut r, fileio::KIND_WINDOW_CACHE, CACHE_VERSION)?;
    let f = fileio::read_u32(&mut r)? as usize;
    let t = fileio::read_u32(&mut r)? as usize;
    let count = fileio::read_u32(&mut r)? as usize;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let mut data = Vec::with_capacity(t * f);
        for _ in 0..t * f {
            data.push(fileio::read_f64(&mut r)?);
        }
        let mut label = Vec::with_capacity(NUM_CLASSES);
        for _ in 0..NUM_CLASSES {
            label.push(fileio::read_f64(&mut r)?);
        }
        out.push(LabeledWindow {
            window: Tensor::new(vec![t, f], data)?,
            label_onehot: Tensor::vector(label),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(features: Vec<f64>, label: usize) -> FlowRecord {
        FlowRecord { features, label }
    }

    fn records_with_labels(n: usize, label: usize) -> Vec<FlowRecord> {
        (0..n).map(|i| record(vec![i as f64, 1.0], label)).collect()
    }

    #[test]
    fn one_hot_basis_vectors() {
        assert_eq!(one_hot(0).unwrap().data(), &[1.0, 0.0, 0.0]);
        assert_eq!(one_hot(1).unwrap().data(), &[0.0, 1.0, 0.0]);
        assert_eq!(one_hot(2).unwrap().data(), &[0.0, 0.0, 1.0]);
        assert!(one_hot(3).is_err());
    }

    #[test]
    fn schema_parse_roundtrip() {
        let text = "# comment\nlabel_column = attack\nclass.Normal = 0\nclass.DoS = 1\nclass.DDoS = 2\ndrop_columns = ts, id\nhash_columns = proto\n";
        let schema = Schema::parse(text).unwrap();
        assert_eq!(schema.label_column, "attack");
        assert_eq!(schema.classes["DoS"], 1);
        assert_eq!(schema.drop_columns, vec!["ts", "id"]);
        assert_eq!(schema.hash_columns, vec!["proto"]);
    }

    #[test]
    fn schema_rejects_unknown_key() {
        assert!(Schema::parse("label_column = l\nclass.Normal = 0\nwhatever = 1\n").is_err());
    }

    #[test]
    fn ingest_well_formed_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        std::fs::write(&path, "a,b,label\n1.0,2.0,Normal\n3.0,4.0,DoS\n").unwrap();
        let res = ingest_csv(&path, &Schema::synthetic()).unwrap();
        assert_eq!(res.records.len(), 2);
        assert_eq!(res.rejected_rows, 0);
        assert_eq!(res.records[0].features, vec![1.0, 2.0]);
        assert_eq!(res.records[1].label, 1);
        assert_eq!(res.feature_names, vec!["a", "b"]);
    }

    #[test]
    fn ingest_unknown_label_is_hard_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        std::fs::write(&path, "a,label\n1.0,Sneaky\n").unwrap();
        let err = ingest_csv(&path, &Schema::synthetic()).unwrap_err();
        assert!(err.to_string().contains("Sneaky"), "{err}");
    }

    #[test]
    fn ingest_drop_vs_hash_changes_feature_count() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        std::fs::write(&path, "a,proto,label\n1.0,tcp,Normal\n2.0,udp,DoS\n").unwrap();
        let mut drop_schema = Schema::synthetic();
        drop_schema.drop_columns = vec!["proto".into()];
        let mut hash_schema = Schema::synthetic();
        hash_schema.hash_columns = vec!["proto".into()];
        let dropped = ingest_csv(&path, &drop_schema).unwrap();
        let hashed = ingest_csv(&path, &hash_schema).unwrap();
        assert_eq!(dropped.records[0].features.len() + 1, hashed.records[0].features.len());
        let h = hashed.records[0].features[1];
        assert!((0.0..1.0).contains(&h));
        // Stable hash: same input, same bucket.
        assert_eq!(h, hash_to_unit("tcp"));
    }

    #[test]
    fn ingest_rejects_bad_rows_and_caps_at_ten_percent() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        let mut text = String::from("a,label\n");
        for _ in 0..20 {
            text.push_str("1.0,Normal\n");
        }
        text.push_str("oops,Normal\n");
        std::fs::write(&path, &text).unwrap();
        let res = ingest_csv(&path, &Schema::synthetic()).unwrap();
        assert_eq!(res.rejected_rows, 1);
        assert_eq!(res.records.len(), 20);

        // Mostly junk -> hard error.
        let bad = dir.path().join("bad.csv");
        std::fs::write(&bad, "a,label\nx,Normal\ny,Normal\n1.0,Normal\n").unwrap();
        assert!(ingest_csv(&bad, &Schema::synthetic()).is_err());
    }

    #[test]
    fn chunk_balance_equal_classes() {
        let per_class = vec![
            records_with_labels(100, 0),
            records_with_labels(100, 1),
            records_with_labels(100, 2),
        ];
        let mut rng = Rng::new(1);
        let merged = chunk_balance(&per_class, 80, &mut rng).unwrap();
        assert_eq!(merged.len(), 240);
        for c in 0..3 {
            assert_eq!(merged.iter().filter(|r| r.label == c).count(), 80);
        }
    }

    #[test]
    fn chunk_balance_smallest_class_dominates() {
        let per_class = vec![
            records_with_labels(50, 0),
            records_with_labels(100, 1),
            records_with_labels(100, 2),
        ];
        let mut rng = Rng::new(1);
        let merged = chunk_balance(&per_class, 80, &mut rng).unwrap();
        assert_eq!(merged.len(), 150);
        for c in 0..3 {
            assert_eq!(merged.iter().filter(|r| r.label == c).count(), 50);
        }
    }

    #[test]
    fn chunk_balance_deterministic_and_rejects_empty() {
        let per_class = vec![
            records_with_labels(30, 0),
            records_with_labels(30, 1),
            records_with_labels(30, 2),
        ];
        let a = chunk_balance(&per_class, 100, &mut Rng::new(5)).unwrap();
        let b = chunk_balance(&per_class, 100, &mut Rng::new(5)).unwrap();
        assert_eq!(a, b);
        let with_empty = vec![records_with_labels(10, 0), Vec::new(), records_with_labels(10, 2)];
        assert!(chunk_balance(&with_empty, 100, &mut Rng::new(5)).is_err());
    }

    #[test]
    fn minmax_basic_column() {
        let mut records = vec![
            record(vec![0.0], 0),
            record(vec![5.0], 0),
            record(vec![10.0], 0),
        ];
        let stats = fit_minmax(&records).unwrap();
        apply_minmax(&mut records, &stats);
        assert_eq!(records[0].features[0], 0.0);
        assert_eq!(records[1].features[0], 0.5);
        assert_eq!(records[2].features[0], 1.0);
    }

    #[test]
    fn minmax_constant_column_maps_to_zero() {
        let mut records = vec![record(vec![7.0], 0), record(vec![7.0], 0)];
        let stats = fit_minmax(&records).unwrap();
        apply_minmax(&mut records, &stats);
        assert!(records.iter().all(|r| r.features[0] == 0.0));
    }

    #[test]
    fn minmax_clamps_out_of_range_test_values() {
        let train = vec![record(vec![0.0], 0), record(vec![10.0], 0)];
        let stats = fit_minmax(&train).unwrap();
        assert_eq!(stats.normalize_value(0, 15.0), 1.0);
        assert_eq!(stats.normalize_value(0, -5.0), 0.0);
    }

    #[test]
    fn windows_count_and_labels() {
        let records = records_with_labels(100, 1);
        let windows = make_windows(&records, 10, 1).unwrap();
        assert_eq!(windows.len(), 91);
        assert!(windows.iter().all(|w| w.label() == 1));
    }

    #[test]
    fn windows_exact_fit_labeled_by_last() {
        let mut records = records_with_labels(9, 0);
        records.push(record(vec![99.0, 1.0], 2));
        let windows = make_windows(&records, 10, 1).unwrap();
        assert_eq!(windows.len(), 1);
        assert_eq!(windows[0].label(), 2);
        // Window k starts at record k*stride; contiguous slices.
        assert_eq!(windows[0].window.row(9)[0], 99.0);
    }

    #[test]
    fn windows_too_few_records() {
        assert!(make_windows(&records_with_labels(5, 0), 10, 1).is_err());
    }

    #[test]
    fn windows_pure_only_drops_mixed() {
        let mut records = records_with_labels(10, 0);
        records.extend(records_with_labels(10, 1));
        let all = make_windows(&records, 10, 1).unwrap();
        let pure = make_windows_opts(&records, 10, 1, true).unwrap();
        assert_eq!(all.len(), 11);
        assert_eq!(pure.len(), 2);
        assert!(pure.iter().all(|w| w.label() == 0 || w.label() == 1));
    }

    #[test]
    fn split_80_20() {
        let windows = make_windows(&records_with_labels(109, 0), 10, 1).unwrap();
        assert_eq!(windows.len(), 100);
        let (train, val) = train_val_split(windows, 0.2, &mut Rng::new(3)).unwrap();
        assert_eq!(train.len(), 80);
        assert_eq!(val.len(), 20);
    }

    #[test]
    fn split_rounding_and_partition() {
        let windows = make_windows(&records_with_labels(14, 0), 10, 1).unwrap();
        assert_eq!(windows.len(), 5);
        let (train, val) = train_val_split(windows.clone(), 0.2, &mut Rng::new(3)).unwrap();
        assert_eq!((train.len(), val.len()), (4, 1));
        // Disjoint and exhaustive: multiset of labels+first values matches.
        let mut before: Vec<f64> = windows.iter().map(|w| w.window.data()[0]).collect();
        let mut after: Vec<f64> = train
            .iter()
            .chain(&val)
            .map(|w| w.window.data()[0])
            .collect();
        before.sort_by(f64::total_cmp);
        after.sort_by(f64::total_cmp);
        assert_eq!(before, after);
    }

    #[test]
    fn reduce_fraction_identity_and_sampling() {
        let windows = make_windows(&records_with_labels(30, 0), 10, 1).unwrap();
        let all = reduce_fraction(windows.clone(), 1.0, &mut Rng::new(4)).unwrap();
        assert_eq!(all.len(), windows.len());
        let some = reduce_fraction(windows.clone(), 0.2, &mut Rng::new(4)).unwrap();
        assert_eq!(some.len(), 4);
        let again = reduce_fraction(windows, 0.2, &mut Rng::new(4)).unwrap();
        assert_eq!(some, again);
    }

    #[test]
    fn synth_counts_and_determinism() {
        let spec = SynthSpec {
            seed: 7,
            per_class: 100,
            features: 6,
        };
        let a = synth_generate(&spec).unwrap();
        let b = synth_generate(&spec).unwrap();
        for c in 0..3 {
            assert_eq!(a[c].len(), 100);
            assert_eq!(a[c], b[c]);
        }
    }

    #[test]
    fn synth_signature_features_separate_classes() {
        let spec = SynthSpec {
            seed: 11,
            per_class: 500,
            features: 5,
        };
        let classes = synth_generate(&spec).unwrap();
        let stats = |records: &[FlowRecord], f: usize| -> (f64, f64) {
            let n = records.len() as f64;
            let mean = records.iter().map(|r| r.features[f]).sum::<f64>() / n;
            let var = records
                .iter()
                .map(|r| (r.features[f] - mean).powi(2))
                .sum::<f64>()
                / n;
            (mean, var.sqrt())
        };
        // Rate separates Normal from both attacks.
        for attack in [1, 2] {
            let (m0, s0) = stats(&classes[0], 0);
            let (m1, s1) = stats(&classes[attack], 0);
            assert!((m1 - m0).abs() >= 3.0 * s0.max(s1), "rate: {m0}/{s0} vs {m1}/{s1}");
        }
        // Source entropy separates DoS from DDoS.
        let (m1, s1) = stats(&classes[1], 1);
        let (m2, s2) = stats(&classes[2], 1);
        assert!((m2 - m1).abs() >= 3.0 * s1.max(s2), "entropy: {m1}/{s1} vs {m2}/{s2}");
    }

    #[test]
    fn normalize_then_window_commutes() {
        let records = records_with_labels(40, 0);
        let stats = fit_minmax(&records).unwrap();

        let mut normalized = records.clone();
        apply_minmax(&mut normalized, &stats);
        let windows_a = make_windows(&normalized, 10, 1).unwrap();

        let mut windows_b = make_windows(&records, 10, 1).unwrap();
        apply_minmax_windows(&mut windows_b, &stats);

        assert_eq!(windows_a, windows_b);
    }

    #[test]
    fn csv_roundtrip_is_identity() {
        let spec = SynthSpec {
            seed: 3,
            per_class: 20,
            features: 4,
        };
        let classes = synth_generate(&spec).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("roundtrip.csv");
        write_records_csv(&path, &classes[1]).unwrap();
        let back = ingest_csv(&path, &Schema::synthetic()).unwrap();
        assert_eq!(back.records.len(), classes[1].len());
        for (a, b) in back.records.iter().zip(&classes[1]) {
            assert_eq!(a.label, b.label);
            for (x, y) in a.features.iter().zip(&b.features) {
                assert!((x - y).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn window_cache_roundtrip() {
        let windows = make_windows(&records_with_labels(25, 2), 10, 1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.gnw");
        save_windows(&path, &windows).unwrap();
        let back = load_windows(&path).unwrap();
        assert_eq!(windows, back);
    }

    #[test]
    fn window_cache_rejects_truncation_and_bad_magic() {
        let windows = make_windows(&records_with_labels(15, 0), 10, 1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.gnw");
        save_windows(&path, &windows).unwrap();
        let bytes = std::fs::read(&path).unwrap();

        let truncated = dir.path().join("t.gnw");
        std::fs::write(&truncated, &bytes[..bytes.len() / 2]).unwrap();
        assert!(load_windows(&truncated).is_err());

        let mut corrupt = bytes.clone();
        corrupt[0] = b'X';
        let bad = dir.path().join("b.gnw");
        std::fs::write(&bad, &corrupt).unwrap();
        assert!(load_windows(&bad).is_err());
    }
}
