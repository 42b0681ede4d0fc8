//! Second-order gradient boosted trees on logistic loss.
//!
//! Each round fits one regression tree to the gradients `g = p - y` and
//! hessians `h = p (1 - p)` of the current margins by exact greedy search:
//! every midpoint between consecutive distinct values of every feature is a
//! candidate, scored by
//!
//! ```text
//! gain = 1/2 [GL^2/(HL+l) + GR^2/(HR+l) - (GL+GR)^2/(HL+HR+l)] - gamma
//! ```
//!
//! Leaves carry `-G/(H+l)`. A root that admits no split becomes a zero
//! weight leaf, so a model whose trees never split predicts `base_score`.
//!
//! # Model file
//!
//! ```json
//! {
//!   "version": 1,
//!   "base_score": 0.5,
//!   "learning_rate": 0.3,
//!   "feature_names": ["firstorder_Energy", "..."],
//!   "trees": [{"nodes": [{"feature": 3, "threshold": 1.5}, {"leaf": -0.2}, {"leaf": 0.4}]}]
//! }
//! ```
//!
//! `nodes` lists a tree in pre-order: a split node is followed by its whole
//! left subtree, then its right subtree. `feature` indexes `feature_names`;
//! a sample goes left when its value is `< threshold`.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{confusion_metrics, stratified_kfold};
use crate::io::CaseRecord;
use crate::radiomics::FeatureVector;

pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HyperParams {
    pub n_estimators: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub l2_lambda: f64,
    pub gamma_min_gain: f64,
    pub min_child_weight: f64,
    pub base_score: f64,
}

impl Default for HyperParams {
    /// Three trees of depth two, otherwise the usual XGBoost defaults.
    fn default() -> Self {
        HyperParams {
            n_estimators: 3,
            max_depth: 2,
            learning_rate: 0.3,
            l2_lambda: 1.0,
            gamma_min_gain: 0.0,
            min_child_weight: 1.0,
            base_score: 0.5,
        }
    }
}

impl HyperParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParam(what.to_string()));
        if self.n_estimators < 1 {
            return bad("n_estimators must be at least 1");
        }
        if self.max_depth < 1 {
            return bad("max_depth must be at least 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return bad("learning_rate must lie in (0, 1]");
        }
        if !(self.l2_lambda >= 0.0) {
            return bad("l2_lambda must be non-negative");
        }
        if !(self.gamma_min_gain >= 0.0) {
            return bad("gamma_min_gain must be non-negative");
        }
        if !(self.min_child_weight >= 0.0) {
            return bad("min_child_weight must be non-negative");
        }
        if !(self.base_score > 0.0 && self.base_score < 1.0) {
            return bad("base_score must lie in (0, 1)");
        }
        Ok(())
    }
}

/// Row-major training table.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub case_ids: Vec<String>,
    pub feature_names: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<u8>,
}

impl Dataset {
    pub fn new(feature_names: Vec<String>, rows: Vec<Vec<f64>>, labels: Vec<u8>) -> Result<Self> {
        let case_ids = (0..rows.len()).map(|i| format!("{i:06}")).collect();
        Self::with_ids(case_ids, feature_names, rows, labels)
    }

    pub fn with_ids(case_ids: Vec<String>, feature_names: Vec<String>, rows: Vec<Vec<f64>>, labels: Vec<u8>) -> Result<Self> {
        if rows.len() != labels.len() || rows.len() != case_ids.len() {
            return Err(Error::LengthMismatch(format!(
                "{} rows, {} labels, {} case ids",
                rows.len(),
                labels.len(),
                case_ids.len()
            )));
        }
        if let Some(r) = rows.iter().find(|r| r.len() != feature_names.len()) {
            return Err(Error::Schema(format!(
                "row has {} values for {} features",
                r.len(),
                feature_names.len()
            )));
        }
        if labels.iter().any(|&l| l > 1) {
            return Err(Error::InvalidParam("labels must be 0 or 1".into()));
        }
        Ok(Dataset {
            case_ids,
            feature_names,
            rows,
            labels,
        })
    }

    /// Builds a table from records that all carry feature vectors with the
    /// same names.
    pub fn from_records(records: &[CaseRecord]) -> Result<Self> {
        let mut names: Option<Vec<String>> = None;
        let mut rows = Vec::with_capacity(records.len());
        for r in records {
            let fv = r
                .features
                .as_ref()
                .ok_or_else(|| Error::Schema(format!("case {} has no features", r.case_id)))?;
            let these: Vec<String> = fv.names().map(str::to_string).collect();
            match &names {
                None => names = Some(these),
                Some(n) if *n != these => {
                    return Err(Error::Schema(format!("case {} has a different feature set", r.case_id)));
                }
                _ => {}
            }
            rows.push(fv.to_vec());
        }
        Self::with_ids(
            records.iter().map(|r| r.case_id.clone()).collect(),
            names.unwrap_or_default(),
            rows,
            records.iter().map(|r| r.label).collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            case_ids: idx.iter().map(|&i| self.case_ids[i].clone()).collect(),
            feature_names: self.feature_names.clone(),
            rows: idx.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
    Leaf {
        weight: f64,
    },
}

impl Node {
    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut node = self;
        loop {
            match node {
                Node::Leaf { weight } => return *weight,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => node = if x[*feature] < *threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Node::Leaf { .. } => 0,
            Node::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn n_splits(&self) -> usize {
        match self {
            Node::Leaf { .. } => 0,
            Node::Split { left, right, .. } => 1 + left.n_splits() + right.n_splits(),
        }
    }

    fn preorder(&self, out: &mut Vec<NodeRecord>) {
        match self {
            Node::Leaf { weight } => out.push(NodeRecord::Leaf { leaf: *weight }),
            Node::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                out.push(NodeRecord::Split {
                    feature: *feature,
                    threshold: *threshold,
                });
                left.preorder(out);
                right.preorder(out);
            }
        }
    }

    fn from_preorder(nodes: &[NodeRecord], pos: &mut usize, n_features: usize) -> Result<Node> {
        let rec = nodes
            .get(*pos)
            .ok_or_else(|| Error::Schema("tree node list ends inside a subtree".into()))?;
        *pos += 1;
        match *rec {
            NodeRecord::Leaf { leaf } => Ok(Node::Leaf { weight: leaf }),
            NodeRecord::Split { feature, threshold } => {
                if feature >= n_features {
                    return Err(Error::Schema(format!("split on feature {feature} of {n_features}")));
                }
                let left = Self::from_preorder(nodes, pos, n_features)?;
                let right = Self::from_preorder(nodes, pos, n_features)?;
                Ok(Node::Split {
                    feature,
                    threshold,
                    left: Box::new(left),
                    right: Box::new(right),
                })
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub base_score: f64,
    pub learning_rate: f64,
    pub feature_names: Vec<String>,
    pub trees: Vec<Node>,
}

pub fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

impl Model {
    pub fn margin_row(&self, x: &[f64]) -> f64 {
        logit(self.base_score) + self.learning_rate * self.trees.iter().map(|t| t.eval(x)).sum::<f64>()
    }

    /// Probability of class 1 for a raw row in the model's feature order.
    pub fn predict_row(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.feature_names.len() {
            return Err(Error::Schema(format!(
                "row has {} values, model expects {}",
                x.len(),
                self.feature_names.len()
            )));
        }
        Ok(sigmoid(self.margin_row(x)))
    }

    pub fn predict_proba(&self, x: &FeatureVector) -> Result<f64> {
        if x.len() != self.feature_names.len() || !x.names().zip(&self.feature_names).all(|(a, b)| a == b) {
            return Err(Error::Schema("feature names differ from the model's".into()));
        }
        self.predict_row(&x.to_vec())
    }

    pub fn predict_class(&self, x: &[f64]) -> Result<u8> {
        Ok(u8::from(self.predict_row(x)? >= 0.5))
    }

    pub fn to_json(&self) -> String {
        let file = ModelFile {
            version: MODEL_VERSION,
            base_score: self.base_score,
            learning_rate: self.learning_rate,
            feature_names: self.feature_names.clone(),
            trees: self
                .trees
                .iter()
                .map(|t| {
                    let mut nodes = Vec::new();
                    t.preorder(&mut nodes);
                    TreeRecord { nodes }
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Model> {
        let raw: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::Schema(format!("model file: {e}")))?;
        match raw.get("version").and_then(|v| v.as_u64()) {
            Some(v) if v == u64::from(MODEL_VERSION) => {}
            Some(v) => return Err(Error::Version(v as u32)),
            None => return Err(Error::Schema("model file has no integer version".into())),
        }
        let file: ModelFile = serde_json::from_value(raw).map_err(|e| Error::Schema(format!("model file: {e}")))?;
        let n = file.feature_names.len();
        let trees = file
            .trees
            .iter()
            .map(|t| {
                let mut pos = 0;
                let node = Node::from_preorder(&t.nodes, &mut pos, n)?;
                if pos != t.nodes.len() {
                    return Err(Error::Schema("trailing nodes after a complete tree".into()));
                }
                Ok(node)
            })
            .collect::<Result<Vec<_>>>()?;
        if !(file.base_score > 0.0 && file.base_score < 1.0) {
            return Err(Error::Schema("base_score outside (0, 1)".into()));
        }
        Ok(Model {
            base_score: file.base_score,
            learning_rate: file.learning_rate,
            feature_names: file.feature_names,
            trees,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Model> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    version: u32,
    base_score: f64,
    learning_rate: f64,
    feature_names: Vec<String>,
    trees: Vec<TreeRecord>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TreeRecord {
    nodes: Vec<NodeRecord>,
}

#[derive(Serialize, Deserialize, Clone, Copy)]
#[serde(untagged, deny_unknown_fields)]
enum NodeRecord {
    Split { feature: usize, threshold: f64 },
    Leaf { leaf: f64 },
}

/// Best split of one node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitCandidate {
    pub feature: usize,
    pub threshold: f64,
    pub gain: f64,
}

fn score(g: f64, h: f64, lambda: f64) -> f64 {
    g * g / (h + lambda)
}

/// Split gain of partitioning `(g, h)` sums into left and right parts.
pub fn split_gain(gl: f64, hl: f64, gr: f64, hr: f64, hp: &HyperParams) -> f64 {
    let l = hp.l2_lambda;
    0.5 * (score(gl, hl, l) + score(gr, hr, l) - score(gl + gr, hl + hr, l)) - hp.gamma_min_gain
}

fn midpoint(a: f64, b: f64) -> f64 {
    let m = a + (b - a) / 2.0;
    if m > a {
        m
    } else {
        b
    }
}

/// Exact greedy search over the samples `idx`. Returns the highest-gain
/// admissible split with positive gain; ties go to the lowest feature index,
/// then the lowest threshold.
pub fn find_best_split(rows: &[Vec<f64>], grad: &[f64], hess: &[f64], idx: &[usize], hp: &HyperParams) -> Option<SplitCandidate> {
    let n_features = rows.first().map_or(0, Vec::len);
    let g_total: f64 = idx.iter().map(|&i| grad[i]).sum();
    let h_total: f64 = idx.iter().map(|&i| hess[i]).sum();
    let mut best: Option<SplitCandidate> = None;
    let mut order = idx.to_vec();
    for f in 0..n_features {
        order.sort_by(|&a, &b| rows[a][f].total_cmp(&rows[b][f]).then(a.cmp(&b)));
        let (mut gl, mut hl) = (0.0, 0.0);
        for w in 0..order.len().saturating_sub(1) {
            let i = order[w];
            gl += grad[i];
            hl += hess[i];
            let (here, next) = (rows[i][f], rows[order[w + 1]][f]);
            if here == next {
                continue;
            }
            let (gr, hr) = (g_total - gl, h_total - hl);
            if hl < hp.min_child_weight || hr < hp.min_child_weight {
                continue;
            }
            let gain = split_gain(gl, hl, gr, hr, hp);
            if gain > 0.0 && best.map_or(true, |b| gain > b.gain) {
                best = Some(SplitCandidate {
                    feature: f,
                    threshold: midpoint(here, next),
                    gain,
                });
            }
        }
    }
    best
}

fn leaf_weight(idx: &[usize], grad: &[f64], hess: &[f64], lambda: f64) -> f64 {
    let g: f64 = idx.iter().map(|&i| grad[i]).sum();
    let h: f64 = idx.iter().map(|&i| hess[i]).sum();
    if h + lambda == 0.0 {
        0.0
    } else {
        -g / (h + lambda)
    }
}

fn grow(rows: &[Vec<f64>], grad: &[f64], hess: &[f64], idx: &[usize], depth: usize, hp: &HyperParams) -> Node {
    let split = if depth < hp.max_depth {
        find_best_split(rows, grad, hess, idx, hp)
    } else {
        None
    };
    match split {
        None => Node::Leaf {
            weight: leaf_weight(idx, grad, hess, hp.l2_lambda),
        },
        Some(s) => {
            let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| rows[i][s.feature] < s.threshold);
            Node::Split {
                feature: s.feature,
                threshold: s.threshold,
                left: Box::new(grow(rows, grad, hess, &l, depth + 1, hp)),
                right: Box::new(grow(rows, grad, hess, &r, depth + 1, hp)),
            }
        }
    }
}

/// Mean logistic loss of labels under margins.
pub fn logistic_loss(margins: &[f64], labels: &[u8]) -> f64 {
    let total: f64 = margins
        .iter()
        .zip(labels)
        .map(|(&m, &y)| {
            // log(1 + e^m) - y m, computed stably.
            let softplus = if m > 0.0 { m + (-m).exp().ln_1p() } else { m.exp().ln_1p() };
            softplus - f64::from(y) * m
        })
        .sum();
    total / margins.len() as f64
}

/// Trains and also returns the mean training loss before the first round and
/// after each round.
pub fn train_with_history(data: &Dataset, hp: &HyperParams) -> Result<(Model, Vec<f64>)> {
    hp.validate()?;
    if data.len() < 2 {
        return Err(Error::InvalidParam(format!("need at least 2 samples, got {}", data.len())));
    }
    if data.labels.iter().all(|&l| l == data.labels[0]) {
        return Err(Error::DegenerateLabels);
    }
    if let Some(f) = data.rows.iter().flatten().find(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("training value {f}")));
    }

    let n = data.len();
    let all: Vec<usize> = (0..n).collect();
    let mut margins = vec![logit(hp.base_score); n];
    let mut history = vec![logistic_loss(&margins, &data.labels)];
    let mut trees = Vec::with_capacity(hp.n_estimators);
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];

    for _ in 0..hp.n_estimators {
        for i in 0..n {
            let p = sigmoid(margins[i]);
            grad[i] = p - f64::from(data.labels[i]);
            hess[i] = p * (1.0 - p);
        }
        let tree = match grow(&data.rows, &grad, &hess, &all, 0, hp) {
            Node::Leaf { .. } => Node::Leaf { weight: 0.0 },
            t => t,
        };
        for (i, m) in margins.iter_mut().enumerate() {
            *m += hp.learning_rate * tree.eval(&data.rows[i]);
        }
        history.push(logistic_loss(&margins, &data.labels));
        trees.push(tree);
    }

    Ok((
        Model {
            base_score: hp.base_score,
            learning_rate: hp.learning_rate,
            feature_names: data.feature_names.clone(),
            trees,
        },
        history,
    ))
}

pub fn train(data: &Dataset, hp: &HyperParams) -> Result<Model> {
    train_with_history(data, hp).map(|(m, _)| m)
}

/// Estimators `{1,2,3,5,10}` x depth `{1,2,3,4}` x learning rate
/// `{0.1, 0.3}`, other fields at their defaults.
pub fn default_grid() -> Vec<HyperParams> {
    let mut grid = Vec::new();
    for n_estimators in [1, 2, 3, 5, 10] {
        for max_depth in [1, 2, 3, 4] {
            for learning_rate in [0.1, 0.3] {
                grid.push(HyperParams {
                    n_estimators,
                    max_depth,
                    learning_rate,
                    ..HyperParams::default()
                });
            }
        }
    }
    grid
}

/// Mean stratified k-fold accuracy of one configuration, as a fraction.
pub fn cv_accuracy(data: &Dataset, hp: &HyperParams, k: usize, seed: u64) -> Result<f64> {
    let folds = stratified_kfold(&data.case_ids, &data.labels, k, seed)?;
    let mut total = 0.0;
    for f in 0..k {
        let (train_idx, test_idx) = folds.split(f);
        let model = train(&data.subset(&train_idx), hp)?;
        let pred = test_idx
            .iter()
            .map(|&i| model.predict_class(&data.rows[i]))
            .collect::<Result<Vec<_>>>()?;
        let truth: Vec<u8> = test_idx.iter().map(|&i| data.labels[i]).collect();
        total += confusion_metrics(&pred, &truth)?.accuracy;
    }
    Ok(total / k as f64)
}

/// Picks the configuration with the best mean CV accuracy. Ties go to fewer
/// estimators, then smaller depth, then earlier grid position. Returns the
/// winner and the accuracy of every configuration in grid order.
pub fn grid_search(data: &Dataset, grid: &[HyperParams], k: usize, seed: u64) -> Result<(HyperParams, Vec<(HyperParams, f64)>)> {
    if grid.is_empty() {
        return Err(Error::InvalidParam("empty hyperparameter grid".into()));
    }
    let scores = grid
        .par_iter()
        .map(|hp| cv_accuracy(data, hp, k, seed))
        .collect::<Result<Vec<f64>>>()?;
    let mut best = 0;
    for i in 1..grid.len() {
        let (a, b) = (&grid[i], &grid[best]);
        let better = scores[i] > scores[best]
            || (scores[i] == scores[best]
                && (a.n_estimators, a.max_depth) < (b.n_estimators, b.max_depth));
        if better {
            best = i;
        }
    }
    let table = grid.iter().cloned().zip(scores).collect();
    Ok((grid[best].clone(), table))
}
