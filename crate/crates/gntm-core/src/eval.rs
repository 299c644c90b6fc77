//! Evaluation: confusion matrix, accuracy / precision / recall / F1,
//! per-class one-vs-rest ROC with AUC, and plot-ready report files.

use crate::data::{LabeledWindow, CLASS_NAMES, NUM_CLASSES};
use crate::error::{Error, Result};
use crate::model::{forward, argmax, ModelParams};
use crate::training::EpochLog;
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

/// Rows are true classes, columns predicted, in canonical order
/// Normal, DoS, DDoS.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    n: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(n: usize) -> Self {
        ConfusionMatrix {
            n,
            counts: vec![0; n * n],
        }
    }

    pub fn from_labels(preds: &[usize], truths: &[usize], n: usize) -> Result<Self> {
        if preds.len() != truths.len() || preds.is_empty() {
            return Err(Error::Data(format!(
                "confusion: {} predictions vs {} truths",
                preds.len(),
                truths.len()
            )));
        }
        let mut cm = ConfusionMatrix::new(n);
        for (&p, &t) in preds.iter().zip(truths) {
            if p >= n || t >= n {
                return Err(Error::Domain(format!("class id out of range: pred {p}, true {t}")));
            }
            cm.counts[t * n + p] += 1;
        }
        Ok(cm)
    }

    pub fn classes(&self) -> usize {
        self.n
    }

    pub fn at(&self, truth: usize, pred: usize) -> u64 {
        self.counts[truth * self.n + pred]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.n).map(|i| self.at(i, i)).sum()
    }

    pub fn row_sum(&self, truth: usize) -> u64 {
        (0..self.n).map(|p| self.at(truth, p)).sum()
    }

    pub fn col_sum(&self, pred: usize) -> u64 {
        (0..self.n).map(|t| self.at(t, pred)).sum()
    }

    pub fn rows(&self) -> Vec<Vec<u64>> {
        (0..self.n)
            .map(|t| (0..self.n).map(|p| self.at(t, p)).collect())
            .collect()
    }
}

/// One point of a ROC curve as (false positive rate, true positive rate).
pub type RocPoint = (f64, f64);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub name: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Windows whose true class this is.
    pub support: u64,
    /// TPR/FPR at the argmax operating point.
    pub tpr: f64,
    pub fpr: f64,
    /// Absent when the class has no positives or no negatives.
    pub auc: Option<f64>,
    pub roc_points: Option<Vec<RocPoint>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub classes: Vec<ClassMetrics>,
    pub confusion: ConfusionMatrix,
}

fn ratio(num: u64, den: u64) -> f64 {
    // Zero denominator -> 0 by convention (empty predicted or true class).
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Per-class and macro metrics from a confusion matrix alone (no ROC).
pub fn metrics_from_confusion(cm: &ConfusionMatrix, names: &[&str]) -> Result<EvalReport> {
    if names.len() != cm.classes() {
        return Err(Error::Shape(format!(
            "{} class names for a {}-class matrix",
            names.len(),
            cm.classes()
        )));
    }
    let total = cm.total();
    let mut classes = Vec::with_capacity(cm.classes());
    for c in 0..cm.classes() {
        let tp = cm.at(c, c);
        let fp = cm.col_sum(c) - tp;
        let fn_ = cm.row_sum(c) - tp;
        let tn = total - tp - fp - fn_;
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        classes.push(ClassMetrics {
            name: names[c].to_string(),
            precision,
            recall,
            f1,
            support: cm.row_sum(c),
            tpr: recall,
            fpr: ratio(fp, fp + tn),
            auc: None,
            roc_points: None,
        });
    }
    let k = classes.len() as f64;
    Ok(EvalReport {
        accuracy: ratio(cm.trace(), total),
        macro_precision: classes.iter().map(|c| c.precision).sum::<f64>() / k,
        macro_recall: classes.iter().map(|c| c.recall).sum::<f64>() / k,
        macro_f1: classes.iter().map(|c| c.f1).sum::<f64>() / k,
        classes,
        confusion: cm.clone(),
    })
}

/// One-vs-rest ROC by threshold sweep over the unique scores, AUC by the
/// trapezoidal rule. Returns None when either class is empty (AUC
/// undefined, not zero).
pub fn roc_auc(scores: &[f64], truths: &[bool]) -> Option<(Vec<RocPoint>, f64)> {
    let pos = truths.iter().filter(|&&t| t).count();
    let neg = truths.len() - pos;
    if pos == 0 || neg == 0 {
        return None;
    }
    let mut thresholds: Vec<f64> = scores.to_vec();
    thresholds.sort_by(|a, b| b.total_cmp(a));
    thresholds.dedup();

    let mut points = vec![(0.0, 0.0)];
    for &theta in &thresholds {
        let mut tp = 0usize;
        let mut fp = 0usize;
        for (&s, &t) in scores.iter().zip(truths) {
            if s >= theta {
                if t {
                    tp += 1;
                } else {
                    fp += 1;
                }
            }
        }
        points.push((fp as f64 / neg as f64, tp as f64 / pos as f64));
    }
    if *points.last().unwrap() != (1.0, 1.0) {
        points.push((1.0, 1.0));
    }

    let mut auc = 0.0;
    for pair in points.windows(2) {
        let ((x0, y0), (x1, y1)) = (pair[0], pair[1]);
        auc += (x1 - x0) * (y0 + y1) / 2.0;
    }
    Some((points, auc))
}

/// Full evaluation of a trained model on labeled windows: confusion matrix,
/// classification metrics and a ROC curve per class using the softmax
/// probability of that class as the score.
pub fn evaluate(params: &ModelParams, windows: &[LabeledWindow]) -> Result<EvalReport> {
    if windows.is_empty() {
        return Err(Error::Data("evaluate: no windows".into()));
    }
    let mut preds = Vec::with_capacity(windows.len());
    let mut truths = Vec::with_capacity(windows.len());
    let mut probs = Vec::with_capacity(windows.len());
    for w in windows {
        let (p, _) = forward(params, &w.window)?;
        preds.push(argmax(&p));
        truths.push(w.label());
        probs.push(p);
    }
    let cm = ConfusionMatrix::from_labels(&preds, &truths, NUM_CLASSES)?;
    let mut report = metrics_from_confusion(&cm, &CLASS_NAMES)?;
    for c in 0..NUM_CLASSES {
        let scores: Vec<f64> = probs.iter().map(|p| p[c]).collect();
        let binary: Vec<bool> = truths.iter().map(|&t| t == c).collect();
        if let Some((points, auc)) = roc_auc(&scores, &binary) {
            report.classes[c].auc = Some(auc);
            report.classes[c].roc_points = Some(points);
        }
    }
    Ok(report)
}

/// Writes `report.json`, `confusion.csv`, one `roc_<class>.csv` per class
/// with an AUC, and (if epoch logs are given) `curves.csv`. Plot-ready,
/// deterministic bytes.
pub fn emit_report(dir: &Path, report: &EvalReport, epochs: Option<&[EpochLog]>) -> Result<()> {
    std::fs::create_dir_all(dir)?;

    let json = serde_json::to_string_pretty(report)
        .map_err(|e| Error::Format(format!("report serialization failed: {e}")))?;
    std::fs::write(dir.join("report.json"), json + "\n")?;

    let mut w = BufWriter::new(File::create(dir.join("confusion.csv"))?);
    let names: Vec<&str> = report.classes.iter().map(|c| c.name.as_str()).collect();
    writeln!(w, "true\\pred,{}", names.join(","))?;
    for (t, row) in report.confusion.rows().iter().enumerate() {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(w, "{},{}", names[t], cells.join(","))?;
    }
    w.flush()?;

    for class in &report.classes {
        let Some(points) = &class.roc_points else {
            continue;
        };
        let path = dir.join(format!("roc_{}.csv", class.name.to_lowercase()));
        let mut w = BufWriter::new(File::create(path)?);
        writeln!(w, "fpr,tpr")?;
        for (fpr, tpr) in points {
            writeln!(w, "{fpr:.6},{tpr:.6}")?;
        }
        w.flush()?;
    }

    if let Some(logs) = epochs {
        crate::training::write_epoch_log(&dir.join("curves.csv"), logs)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    /// Tie-adjusted pairwise ranking probability: the fraction of
    /// (positive, negative) pairs where the positive outranks the
    /// negative, ties counting half.
    fn pairwise_auc(scores: &[f64], truths: &[bool]) -> Option<f64> {
        let mut wins = 0.0;
        let mut pairs = 0.0;
        for (i, &ti) in truths.iter().enumerate() {
            if !ti {
                continue;
            }
            for (j, &tj) in truths.iter().enumerate() {
                if tj {
                    continue;
                }
                pairs += 1.0;
                if scores[i] > scores[j] {
                    wins += 1.0;
                } else if scores[i] == scores[j] {
                    wins += 0.5;
                }
            }
        }
        if pairs == 0.0 {
            None
        } else {
            Some(wins / pairs)
        }
    }

    #[test]
    fn confusion_accumulates_counts() {
        let cm = ConfusionMatrix::from_labels(&[0, 1, 1, 2, 0], &[0, 1, 2, 2, 1], 3).unwrap();
        assert_eq!(cm.at(0, 0), 1);
        assert_eq!(cm.at(1, 0), 1);
        assert_eq!(cm.at(2, 1), 1);
        assert_eq!(cm.at(2, 2), 1);
        assert_eq!(cm.total(), 5);
        assert_eq!(cm.trace(), 3);
    }

    #[test]
    fn confusion_rejects_length_mismatch() {
        assert!(ConfusionMatrix::from_labels(&[0, 1], &[0], 3).is_err());
        assert!(ConfusionMatrix::from_labels(&[], &[], 3).is_err());
    }

    #[test]
    fn all_same_prediction_fills_one_column() {
        let cm = ConfusionMatrix::from_labels(&[0; 6], &[0, 0, 1, 1, 2, 2], 3).unwrap();
        for t in 0..3 {
            assert_eq!(cm.at(t, 0), 2);
            assert_eq!(cm.at(t, 1), 0);
            assert_eq!(cm.at(t, 2), 0);
        }
    }

    #[test]
    fn published_perfect_matrix_gives_unit_metrics() {
        // Diagonal counts 1812 Normal, 1790 DoS, 1796 DDoS, zeros elsewhere.
        let mut preds = Vec::new();
        for (c, n) in [(0usize, 1812usize), (1, 1790), (2, 1796)] {
            preds.extend(std::iter::repeat(c).take(n));
        }
        let cm = ConfusionMatrix::from_labels(&preds, &preds, 3).unwrap();
        assert_eq!(cm.at(0, 0), 1812);
        assert_eq!(cm.at(1, 1), 1790);
        assert_eq!(cm.at(2, 2), 1796);
        let r = metrics_from_confusion(&cm, &CLASS_NAMES).unwrap();
        assert_eq!(r.accuracy, 1.0);
        assert_eq!(r.macro_precision, 1.0);
        assert_eq!(r.macro_recall, 1.0);
        assert_eq!(r.macro_f1, 1.0);
        for c in &r.classes {
            assert_eq!((c.precision, c.recall, c.f1), (1.0, 1.0, 1.0));
            assert_eq!(c.fpr, 0.0);
        }
    }

    #[test]
    fn two_class_hand_count() {
        // cm = [[1,1],[0,0]]: one true class-0 hit, one class-0 sample
        // predicted as class 1, no class-1 samples.
        let cm = ConfusionMatrix::from_labels(&[0, 1], &[0, 0], 2).unwrap();
        let r = metrics_from_confusion(&cm, &["a", "b"]).unwrap();
        assert_eq!(r.classes[0].precision, 1.0);
        assert_eq!(r.classes[0].recall, 0.5);
        assert!((r.classes[0].f1 - 2.0 / 3.0).abs() < 1e-12);
        // Class b never occurs as truth: recall denominator 0 -> 0.
        assert_eq!(r.classes[1].recall, 0.0);
        assert_eq!(r.accuracy, 0.5);
    }

    #[test]
    fn empty_predicted_class_gives_zero_precision() {
        let cm = ConfusionMatrix::from_labels(&[0, 0, 0], &[0, 1, 2], 3).unwrap();
        let r = metrics_from_confusion(&cm, &CLASS_NAMES).unwrap();
        assert_eq!(r.classes[1].precision, 0.0);
        assert_eq!(r.classes[1].f1, 0.0);
    }

    #[test]
    fn auc_perfect_separation() {
        let (points, auc) =
            roc_auc(&[0.9, 0.8, 0.2, 0.1], &[true, true, false, false]).unwrap();
        assert!((auc - 1.0).abs() < 1e-12);
        assert_eq!(points.first(), Some(&(0.0, 0.0)));
        assert_eq!(points.last(), Some(&(1.0, 1.0)));
    }

    #[test]
    fn auc_tied_pair_is_half() {
        let (_, auc) = roc_auc(&[0.5, 0.5], &[true, false]).unwrap();
        assert!((auc - 0.5).abs() < 1e-12);
    }

    #[test]
    fn auc_pairwise_example() {
        // Pairs: (0.8 vs 0.9) wrong, (0.8 vs 0.1) right,
        //        (0.7 vs 0.9) wrong, (0.7 vs 0.1) right -> 2/4.
        let (_, auc) = roc_auc(&[0.8, 0.9, 0.7, 0.1], &[true, false, true, false]).unwrap();
        assert!((auc - 0.5).abs() < 1e-12);
    }

    #[test]
    fn auc_degenerate_is_absent() {
        assert!(roc_auc(&[0.1, 0.9], &[true, true]).is_none());
        assert!(roc_auc(&[0.1, 0.9], &[false, false]).is_none());
    }

    #[test]
    fn trapezoid_equals_pairwise_on_random_scores() {
        let mut rng = Rng::new(99);
        for trial in 0..50 {
            let n = 5 + rng.below(40) as usize;
            let mut scores = Vec::with_capacity(n);
            let mut truths = Vec::with_capacity(n);
            for _ in 0..n {
                // Coarse grid so ties actually happen.
                scores.push((rng.below(10) as f64) / 10.0);
                truths.push(rng.below(2) == 1);
            }
            let trapezoid = roc_auc(&scores, &truths).map(|(_, a)| a);
            let pairwise = pairwise_auc(&scores, &truths);
            match (trapezoid, pairwise) {
                (None, None) => {}
                (Some(a), Some(b)) => {
                    assert!((a - b).abs() < 1e-9, "trial {trial}: {a} vs {b}")
                }
                other => panic!("trial {trial}: definedness disagrees: {other:?}"),
            }
        }
    }

    #[test]
    fn metrics_are_permutation_invariant() {
        let preds = [0, 1, 2, 1, 0, 2, 2, 1];
        let truths = [0, 1, 1, 1, 2, 2, 2, 0];
        let base = metrics_from_confusion(
            &ConfusionMatrix::from_labels(&preds, &truths, 3).unwrap(),
            &CLASS_NAMES,
        )
        .unwrap();
        let perm = [3usize, 7, 1, 0, 5, 2, 6, 4];
        let p2: Vec<usize> = perm.iter().map(|&i| preds[i]).collect();
        let t2: Vec<usize> = perm.iter().map(|&i| truths[i]).collect();
        let shuffled = metrics_from_confusion(
            &ConfusionMatrix::from_labels(&p2, &t2, 3).unwrap(),
            &CLASS_NAMES,
        )
        .unwrap();
        assert_eq!(base, shuffled);
    }

    fn sample_report() -> EvalReport {
        let cm = ConfusionMatrix::from_labels(&[0, 1, 2, 0, 1, 2], &[0, 1, 2, 0, 2, 2], 3).unwrap();
        let mut r = metrics_from_confusion(&cm, &CLASS_NAMES).unwrap();
        let scores = [0.9, 0.1, 0.2, 0.8, 0.3, 0.15];
        let truths = [true, false, false, true, false, false];
        let (points, auc) = roc_auc(&scores, &truths).unwrap();
        r.classes[0].auc = Some(auc);
        r.classes[0].roc_points = Some(points);
        r
    }

    #[test]
    fn report_json_roundtrip() {
        let report = sample_report();
        let dir = tempfile::tempdir().unwrap();
        emit_report(dir.path(), &report, None).unwrap();
        let text = std::fs::read_to_string(dir.path().join("report.json")).unwrap();
        let back: EvalReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back, report);
    }

    #[test]
    fn report_files_deterministic_with_roc_endpoints() {
        let report = sample_report();
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        emit_report(d1.path(), &report, None).unwrap();
        emit_report(d2.path(), &report, None).unwrap();
        for name in ["report.json", "confusion.csv", "roc_normal.csv"] {
            assert_eq!(
                std::fs::read(d1.path().join(name)).unwrap(),
                std::fs::read(d2.path().join(name)).unwrap(),
                "{name}"
            );
        }
        let roc = std::fs::read_to_string(d1.path().join("roc_normal.csv")).unwrap();
        let lines: Vec<&str> = roc.trim().lines().collect();
        assert_eq!(lines[0], "fpr,tpr");
        assert_eq!(lines[1], "0.000000,0.000000");
        assert_eq!(*lines.last().unwrap(), "1.000000,1.000000");
        // Classes without an AUC get no ROC file.
        assert!(!d1.path().join("roc_dos.csv").exists());
    }

    #[test]
    fn evaluate_on_trained_free_model_is_consistent() {
        // Zero params give uniform probabilities: every AUC degenerates to
        // 0.5 and predictions collapse to class 0.
        use crate::data::{make_windows, FlowRecord};
        use crate::model::{ModelConfig, ModelParams};
        let records: Vec<FlowRecord> = (0..20)
            .map(|i| FlowRecord {
                features: vec![i as f64 / 20.0; 4],
                label: (i / 7).min(2),
            })
            .collect();
        let windows = make_windows(&records, 3, 1).unwrap();
        let params = ModelParams::zeros(&ModelConfig::tiny());
        let report = evaluate(&params, &windows).unwrap();
        assert_eq!(report.confusion.total() as usize, windows.len());
        for class in &report.classes {
            if let Some(auc) = class.auc {
                assert!((auc - 0.5).abs() < 1e-9);
            }
        }
        let pred_col0: u64 = (0..3).map(|t| report.confusion.at(t, 0)).sum();
        assert_eq!(pred_col0, report.confusion.total());
    }
}
