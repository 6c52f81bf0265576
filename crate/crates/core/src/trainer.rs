//! Mini-batch training with validation-F1 early stopping, plus the
//! classification metrics used to monitor and report it.
//!
//! Residential (label 1) is the positive class throughout. Confusion matrices
//! are laid out `[[TN, FP], [FN, TP]]`: rows are true classes, columns are
//! predicted classes, non-residential first.

use std::fmt::Write as _;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{FeatureMatrix, SplitIndices};
use crate::geodata_io::BuildingClass;
use crate::neuralnet::{bce_loss, AmsGradConfig, Mlp, NetError, OptimizerState};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("the {0} split is empty")]
    EmptySplit(&'static str),
    #[error("split index {0} is out of range")]
    IndexOutOfRange(usize),
    #[error("loss diverged (non-finite) at epoch {epoch}")]
    DivergedLoss { epoch: usize },
    #[error("{0} predictions vs {1} labels")]
    LengthMismatch(usize, usize),
    #[error("cannot compute accuracy of an empty set")]
    EmptySet,
    #[error(transparent)]
    Net(#[from] NetError),
}

/// Validation metric that drives early stopping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Monitor {
    /// Support-weighted mean of the two per-class F1 scores.
    #[default]
    WeightedF1,
    /// F1 of the residential class alone.
    PositiveF1,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    /// Probability at or above which a building is called residential.
    pub threshold: f64,
    pub monitor: Monitor,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub bias_correction: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let opt = AmsGradConfig::default();
        TrainConfig {
            learning_rate: 0.001,
            batch_size: 8,
            max_epochs: 500,
            patience: 50,
            threshold: 0.5,
            monitor: Monitor::WeightedF1,
            seed: 42,
            beta1: opt.beta1,
            beta2: opt.beta2,
            epsilon: opt.epsilon,
            bias_correction: opt.bias_correction,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: String| Err(TrainError::InvalidConfig(m));
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate must be >= 0, got {}", self.learning_rate));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1".into());
        }
        if self.max_epochs == 0 {
            return bad("max_epochs must be >= 1".into());
        }
        if self.patience == 0 {
            return bad("patience must be >= 1".into());
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return bad(format!("threshold must lie in (0, 1), got {}", self.threshold));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return bad(format!("{name} must lie in [0, 1), got {b}"));
            }
        }
        if !(self.epsilon > 0.0) {
            return bad(format!("epsilon must be > 0, got {}", self.epsilon));
        }
        Ok(())
    }

    pub fn optimizer(&self) -> AmsGradConfig {
        AmsGradConfig {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
            bias_correction: self.bias_correction,
        }
    }
}

/// Harmonic mean of precision and recall; 0 when both are 0.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

pub fn accuracy(correct: usize, total: usize) -> Result<f64, TrainError> {
    if total == 0 {
        return Err(TrainError::EmptySet);
    }
    Ok(correct as f64 / total as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassBreakdown {
    pub non_residential: ClassMetrics,
    pub residential: ClassMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub classes: ClassBreakdown,
    pub accuracy: f64,
    pub macro_avg: ClassMetrics,
    pub weighted_avg: ClassMetrics,
    /// `[[TN, FP], [FN, TP]]` with residential as the positive class.
    pub confusion_matrix: [[usize; 2]; 2],
    pub loss: Option<f64>,
}

impl ClassificationReport {
    pub fn monitored_f1(&self, monitor: Monitor) -> f64 {
        match monitor {
            Monitor::WeightedF1 => self.weighted_avg.f1,
            Monitor::PositiveF1 => self.classes.residential.f1,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report always serializes")
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Per-class and averaged metrics for binary labels (1 = residential).
pub fn classification_report(
    y_true: &[u8],
    y_pred: &[u8],
    loss: Option<f64>,
) -> Result<ClassificationReport, TrainError> {
    if y_true.len() != y_pred.len() {
        return Err(TrainError::LengthMismatch(y_pred.len(), y_true.len()));
    }
    if y_true.is_empty() {
        return Err(TrainError::EmptySet);
    }
    let mut cm = [[0usize; 2]; 2];
    for (&t, &p) in y_true.iter().zip(y_pred) {
        cm[usize::from(t == 1)][usize::from(p == 1)] += 1;
    }
    let n = y_true.len();
    let class = |c: usize| {
        let tp = cm[c][c];
        let support = cm[c][0] + cm[c][1];
        let predicted = cm[0][c] + cm[1][c];
        let (precision, recall) = (ratio(tp, predicted), ratio(tp, support));
        ClassMetrics {
            precision,
            recall,
            f1: f1_score(precision, recall),
            support,
        }
    };
    let (neg, pos) = (class(0), class(1));
    let avg = |f: fn(&ClassMetrics) -> f64, weighted: bool| {
        if weighted {
            (f(&neg) * neg.support as f64 + f(&pos) * pos.support as f64) / n as f64
        } else {
            (f(&neg) + f(&pos)) / 2.0
        }
    };
    let summary = |weighted| ClassMetrics {
        precision: avg(|m| m.precision, weighted),
        recall: avg(|m| m.recall, weighted),
        f1: avg(|m| m.f1, weighted),
        support: n,
    };
    Ok(ClassificationReport {
        classes: ClassBreakdown {
            non_residential: neg,
            residential: pos,
        },
        accuracy: accuracy(cm[0][0] + cm[1][1], n)?,
        macro_avg: summary(false),
        weighted_avg: summary(true),
        confusion_matrix: cm,
        loss,
    })
}

/// Probabilities and thresholded classes (residential iff `p >= threshold`).
pub fn predict(
    model: &Mlp,
    x: &Array2<f64>,
    threshold: f64,
) -> Result<(Vec<f64>, Vec<BuildingClass>), TrainError> {
    let probs = model.predict_proba(x.view())?.to_vec();
    let classes = probs.iter().map(|&p| classify(p, threshold)).collect();
    Ok((probs, classes))
}

#[inline]
pub fn classify(probability: f64, threshold: f64) -> BuildingClass {
    if probability >= threshold {
        BuildingClass::Residential
    } else {
        BuildingClass::NonResidential
    }
}

fn labels_at(probs: &[f64], threshold: f64) -> Vec<u8> {
    probs.iter().map(|&p| classify(p, threshold).label()).collect()
}

/// Report for `model` on the given rows, including the mean BCE loss.
pub fn evaluate(
    model: &Mlp,
    data: &FeatureMatrix,
    indices: &[usize],
    threshold: f64,
) -> Result<ClassificationReport, TrainError> {
    let (x, y) = data.select(indices);
    let probs = model.predict_proba(x.view())?.to_vec();
    let loss = bce_loss(&probs, &y)?;
    let truth: Vec<u8> = indices.iter().map(|&i| data.y[i]).collect();
    classification_report(&truth, &labels_at(&probs, threshold), Some(loss))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopDecision {
    Improved,
    Waiting,
    Stop,
}

/// Patience-based early stopping on a maximized metric. Only a strict
/// improvement resets the patience counter.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    best: Option<(usize, f64)>,
    wait: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping {
            patience,
            best: None,
            wait: 0,
        }
    }

    pub fn update(&mut self, epoch: usize, value: f64) -> StopDecision {
        let improved = match self.best {
            None => !value.is_nan(),
            Some((_, best)) => value > best,
        };
        if improved {
            self.best = Some((epoch, value));
            self.wait = 0;
            return StopDecision::Improved;
        }
        self.wait += 1;
        if self.wait >= self.patience {
            StopDecision::Stop
        } else {
            StopDecision::Waiting
        }
    }

    pub fn best_epoch(&self) -> Option<usize> {
        self.best.map(|(e, _)| e)
    }

    pub fn best_value(&self) -> Option<f64> {
        self.best.map(|(_, v)| v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    /// Monitored F1 over the predictions made while training the epoch.
    pub train_f1: f64,
    /// Monitored F1 over the whole validation split at epoch end.
    pub val_f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub stopped_epoch: usize,
}

impl TrainHistory {
    pub fn best(&self) -> &EpochRecord {
        &self.epochs[self.best_epoch]
    }

    /// `epoch,train_loss,val_loss,train_f1,val_f1` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,val_loss,train_f1,val_f1\n");
        for e in &self.epochs {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                e.epoch, e.train_loss, e.val_loss, e.train_f1, e.val_f1
            );
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Weights from the best validation epoch.
    pub model: Mlp,
    pub history: TrainHistory,
    pub state: OptimizerState,
}

fn check_split(split: &SplitIndices, n: usize) -> Result<(), TrainError> {
    for (name, idx) in [("train", &split.train), ("validation", &split.val)] {
        if idx.is_empty() {
            return Err(TrainError::EmptySplit(name));
        }
    }
    let all = split.train.iter().chain(&split.val).chain(&split.test);
    if let Some(&bad) = all.into_iter().find(|&&i| i >= n) {
        return Err(TrainError::IndexOutOfRange(bad));
    }
    Ok(())
}

/// Train a fresh optimizer state from `config`.
pub fn train(
    model: Mlp,
    data: &FeatureMatrix,
    split: &SplitIndices,
    config: &TrainConfig,
) -> Result<TrainOutcome, TrainError> {
    let state = OptimizerState::new(&model, config.optimizer());
    train_with_state(model, state, data, split, config, |_| {})
}

/// The training loop.
///
/// Each epoch shuffles the training rows with the seeded RNG, runs
/// forward/backward/AMSGrad per mini-batch (the last batch may be short),
/// then scores the full validation split. `observer` sees every epoch record
/// before early stopping does and may adjust it. Training stops after
/// `patience` epochs without a strict improvement of `val_f1`, or after
/// `max_epochs`; the weights of the best epoch are returned.
pub fn train_with_state(
    mut model: Mlp,
    mut state: OptimizerState,
    data: &FeatureMatrix,
    split: &SplitIndices,
    config: &TrainConfig,
    mut observer: impl FnMut(&mut EpochRecord),
) -> Result<TrainOutcome, TrainError> {
    config.validate()?;
    check_split(split, data.y.len())?;
    if data.x.ncols() != model.input_dim() {
        return Err(NetError::ShapeMismatch(format!(
            "data has {} features, model expects {}",
            data.x.ncols(),
            model.input_dim()
        ))
        .into());
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let (x_val, y_val) = data.select(&split.val);
    let val_truth: Vec<u8> = split.val.iter().map(|&i| data.y[i]).collect();

    let mut stopper = EarlyStopping::new(config.patience);
    let mut best_model = model.clone();
    let mut epochs = Vec::new();
    let mut order = split.train.clone();

    for epoch in 0..config.max_epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut seen_pred = Vec::with_capacity(order.len());
        let mut seen_true = Vec::with_capacity(order.len());
        for batch in order.chunks(config.batch_size) {
            let (xb, yb) = data.select(batch);
            let trace = model.forward(xb.view())?;
            let out = trace.output.as_slice().expect("contiguous output");
            let loss = bce_loss(out, &yb)?;
            if !loss.is_finite() {
                return Err(TrainError::DivergedLoss { epoch });
            }
            loss_sum += loss * batch.len() as f64;
            seen_pred.extend(labels_at(out, config.threshold));
            seen_true.extend(batch.iter().map(|&i| data.y[i]));
            let grads = model.backward(&trace, &yb)?;
            match state.step(&mut model, &grads) {
                Err(NetError::NonFiniteGradient) => return Err(TrainError::DivergedLoss { epoch }),
                other => other?,
            }
        }
        let train_loss = loss_sum / order.len() as f64;
        let train_f1 = classification_report(&seen_true, &seen_pred, None)?.monitored_f1(config.monitor);

        let val_probs = model.predict_proba(x_val.view())?.to_vec();
        let val_loss = bce_loss(&val_probs, &y_val)?;
        if !val_loss.is_finite() {
            return Err(TrainError::DivergedLoss { epoch });
        }
        let val_report = classification_report(&val_truth, &labels_at(&val_probs, config.threshold), None)?;

        let mut record = EpochRecord {
            epoch,
            train_loss,
            val_loss,
            train_f1,
            val_f1: val_report.monitored_f1(config.monitor),
        };
        observer(&mut record);
        log::debug!(
            "epoch {epoch}: train_loss {train_loss:.6} val_loss {val_loss:.6} val_f1 {:.6}",
            record.val_f1
        );
        epochs.push(record);
        match stopper.update(epoch, record.val_f1) {
            StopDecision::Improved => best_model = model.clone(),
            StopDecision::Waiting => {}
            StopDecision::Stop => break,
        }
    }

    let stopped_epoch = epochs.len() - 1;
    Ok(TrainOutcome {
        model: best_model,
        history: TrainHistory {
            best_epoch: stopper.best_epoch().unwrap_or(0),
            stopped_epoch,
            epochs,
        },
        state,
    })
}
