//! Classification and overlap metrics, stratified folds and cross-validation.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gbdt::{train, Dataset, HyperParams};
use crate::grid::Mask;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

/// Metrics as fractions. A degenerate flag marks a ratio whose denominator
/// was zero; the ratio is then reported as 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub counts: ConfusionCounts,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub precision_degenerate: bool,
    pub recall_degenerate: bool,
}

pub fn confusion_metrics(pred: &[u8], truth: &[u8]) -> Result<Classification> {
    if pred.len() != truth.len() {
        return Err(Error::LengthMismatch(format!("{} predictions, {} labels", pred.len(), truth.len())));
    }
    if pred.is_empty() {
        return Err(Error::InvalidParam("no samples to evaluate".into()));
    }
    let mut c = ConfusionCounts::default();
    for (&p, &t) in pred.iter().zip(truth) {
        match (p, t) {
            (1, 1) => c.tp += 1,
            (1, 0) => c.fp += 1,
            (0, 0) => c.tn += 1,
            (0, 1) => c.fn_ += 1,
            _ => return Err(Error::InvalidParam(format!("labels must be 0 or 1, got ({p}, {t})"))),
        }
    }
    let ratio = |num: usize, den: usize| if den == 0 { (0.0, true) } else { (num as f64 / den as f64, false) };
    let (precision, precision_degenerate) = ratio(c.tp, c.tp + c.fp);
    let (recall, recall_degenerate) = ratio(c.tp, c.tp + c.fn_);
    Ok(Classification {
        counts: c,
        accuracy: (c.tp + c.tn) as f64 / c.total() as f64,
        precision,
        recall,
        precision_degenerate,
        recall_degenerate,
    })
}

/// Intersection, sizes and union of two aligned masks' foregrounds.
fn overlap(a: &Mask, b: &Mask) -> Result<(usize, usize, usize, usize)> {
    a.check_aligned_with(b)?;
    let (mut inter, mut na, mut nb) = (0, 0, 0);
    for (&x, &y) in a.data().iter().zip(b.data()) {
        na += usize::from(x);
        nb += usize::from(y);
        inter += usize::from(x && y);
    }
    Ok((inter, na, nb, a.len()))
}

/// `2|A n B| / (|A| + |B|)`; 1 when both foregrounds are empty.
pub fn dice(a: &Mask, b: &Mask) -> Result<f64> {
    let (inter, na, nb, _) = overlap(a, b)?;
    Ok(if na + nb == 0 { 1.0 } else { 2.0 * inter as f64 / (na + nb) as f64 })
}

fn iou(inter: usize, union: usize) -> f64 {
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

/// Foreground `|A n B| / |A u B|`; 1 when both foregrounds are empty.
pub fn foreground_iou(a: &Mask, b: &Mask) -> Result<f64> {
    let (inter, na, nb, _) = overlap(a, b)?;
    Ok(iou(inter, na + nb - inter))
}

/// Mean of the foreground and background IoU.
pub fn miou(a: &Mask, b: &Mask) -> Result<f64> {
    let (inter, na, nb, n) = overlap(a, b)?;
    let union = na + nb - inter;
    // Background intersection is everything outside the foreground union.
    let bg_inter = n - union;
    let bg_union = n - inter;
    Ok(0.5 * (iou(inter, union) + iou(bg_inter, bg_union)))
}

/// Voxel-wise precision `|P n T| / |P|` and recall `|P n T| / |T|` of a
/// predicted mask against the truth; a ratio with an empty denominator is 0.
pub fn voxel_precision_recall(pred: &Mask, truth: &Mask) -> Result<(f64, f64)> {
    let (inter, np, nt, _) = overlap(pred, truth)?;
    let ratio = |d: usize| if d == 0 { 0.0 } else { inter as f64 / d as f64 };
    Ok((ratio(np), ratio(nt)))
}

/// Fold index per case, aligned with the input order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldAssignment {
    pub k: usize,
    pub case_ids: Vec<String>,
    pub fold: Vec<usize>,
}

impl FoldAssignment {
    /// Training and test sample indices for fold `f`.
    pub fn split(&self, f: usize) -> (Vec<usize>, Vec<usize>) {
        (0..self.fold.len()).partition(|&i| self.fold[i] != f)
    }

    pub fn by_case(&self) -> BTreeMap<String, usize> {
        self.case_ids.iter().cloned().zip(self.fold.iter().copied()).collect()
    }

    pub fn fold_sizes(&self, labels: &[u8], label: u8) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for (&f, &l) in self.fold.iter().zip(labels) {
            if l == label {
                sizes[f] += 1;
            }
        }
        sizes
    }
}

/// Deals each class round-robin over `k` folds after sorting its case ids
/// and shuffling them with a ChaCha8 generator seeded by `seed`. Class 1 is
/// dealt first starting at fold 0; class 0 continues from the fold after the
/// last positive so the fold totals also differ by at most one.
pub fn stratified_kfold(case_ids: &[String], labels: &[u8], k: usize, seed: u64) -> Result<FoldAssignment> {
    if case_ids.len() != labels.len() {
        return Err(Error::LengthMismatch(format!("{} case ids, {} labels", case_ids.len(), labels.len())));
    }
    if k < 2 {
        return Err(Error::InvalidParam(format!("k must be at least 2, got {k}")));
    }
    let mut seen = HashSet::new();
    for id in case_ids {
        if !seen.insert(id.as_str()) {
            return Err(Error::DuplicateCase(id.clone()));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold = vec![usize::MAX; labels.len()];
    let mut start = 0;
    for label in [1u8, 0] {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == label).collect();
        if members.len() < k {
            return Err(Error::Stratification {
                label,
                count: members.len(),
                k,
            });
        }
        members.sort_by(|&a, &b| case_ids[a].cmp(&case_ids[b]));
        members.shuffle(&mut rng);
        for (r, &i) in members.iter().enumerate() {
            fold[i] = (start + r) % k;
        }
        start = (start + members.len()) % k;
    }
    if let Some(i) = fold.iter().position(|&f| f == usize::MAX) {
        return Err(Error::InvalidParam(format!("label {} is not 0 or 1", labels[i])));
    }
    Ok(FoldAssignment {
        k,
        case_ids: case_ids.to_vec(),
        fold,
    })
}

/// One value per metric, in percent.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricTriple {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
}

impl MetricTriple {
    fn to_array(self) -> [f64; 3] {
        [self.accuracy, self.precision, self.recall]
    }

    fn from_array(a: [f64; 3]) -> Self {
        MetricTriple {
            accuracy: a[0],
            precision: a[1],
            recall: a[2],
        }
    }
}

/// Arithmetic mean and population standard deviation (divisor = number of
/// folds) per metric.
pub fn aggregate(per_fold: &[MetricTriple]) -> Result<(MetricTriple, MetricTriple)> {
    if per_fold.is_empty() {
        return Err(Error::InvalidParam("no folds to aggregate".into()));
    }
    let n = per_fold.len() as f64;
    let mut mean = [0.0; 3];
    for m in per_fold {
        for (acc, v) in mean.iter_mut().zip(m.to_array()) {
            *acc += v;
        }
    }
    mean.iter_mut().for_each(|v| *v /= n);
    let mut var = [0.0; 3];
    for m in per_fold {
        for ((acc, v), mu) in var.iter_mut().zip(m.to_array()).zip(mean) {
            *acc += (v - mu).powi(2);
        }
    }
    let std = var.map(|v| (v / n).sqrt());
    Ok((MetricTriple::from_array(mean), MetricTriple::from_array(std)))
}

/// `"81.91 ± 2.93"`.
pub fn format_mean_std(mean: f64, std: f64) -> String {
    format!("{mean:.2} ± {std:.2}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub precision_degenerate: bool,
    pub recall_degenerate: bool,
    pub counts: ConfusionCounts,
}

/// Cross-validation report; metrics in percent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub per_fold: Vec<FoldResult>,
    pub mean: MetricTriple,
    pub std: MetricTriple,
    pub seed: u64,
    pub hyperparams: HyperParams,
}

impl MetricSummary {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes")
    }

    /// Fold table with a mean ± std footer.
    pub fn render_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<8} {:>14} {:>14} {:>14}", "Fold", "Accuracy (%)", "Precision (%)", "Recall (%)");
        for f in &self.per_fold {
            let _ = writeln!(
                s,
                "{:<8} {:>14.2} {:>14.2} {:>14.2}",
                f.fold + 1,
                f.accuracy,
                f.precision,
                f.recall
            );
        }
        let _ = writeln!(
            s,
            "{:<8} {:>14} {:>14} {:>14}",
            "Average",
            format_mean_std(self.mean.accuracy, self.std.accuracy),
            format_mean_std(self.mean.precision, self.std.precision),
            format_mean_std(self.mean.recall, self.std.recall)
        );
        s
    }
}

/// Trains on `k - 1` folds and evaluates on the held-out fold, for every
/// fold. Folds run concurrently; results are assembled in fold order.
pub fn cross_validate(data: &Dataset, hp: &HyperParams, k: usize, seed: u64) -> Result<MetricSummary> {
    let folds = stratified_kfold(&data.case_ids, &data.labels, k, seed)?;
    let per_fold = (0..k)
        .into_par_iter()
        .map(|f| {
            let (train_idx, test_idx) = folds.split(f);
            let model = train(&data.subset(&train_idx), hp)?;
            let pred = test_idx
                .iter()
                .map(|&i| model.predict_class(&data.rows[i]))
                .collect::<Result<Vec<_>>>()?;
            let truth: Vec<u8> = test_idx.iter().map(|&i| data.labels[i]).collect();
            let m = confusion_metrics(&pred, &truth)?;
            Ok(FoldResult {
                fold: f,
                accuracy: 100.0 * m.accuracy,
                precision: 100.0 * m.precision,
                recall: 100.0 * m.recall,
                precision_degenerate: m.precision_degenerate,
                recall_degenerate: m.recall_degenerate,
                counts: m.counts,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let triples: Vec<MetricTriple> = per_fold
        .iter()
        .map(|f| MetricTriple {
            accuracy: f.accuracy,
            precision: f.precision,
            recall: f.recall,
        })
        .collect();
    let (mean, std) = aggregate(&triples)?;
    Ok(MetricSummary {
        per_fold,
        mean,
        std,
        seed,
        hyperparams: hp.clone(),
    })
}
