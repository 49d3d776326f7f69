//! The shared training loop: mini-batch epochs, validation-loss early
//! stopping with best-weight restoration, and batched evaluation.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::metrics::{cohen_kappa, Confusion, Metrics};
use super::ExpError;
use crate::models::{
    frames_to_batch, labels_to_onehot, train_step_adaptation, train_step_standard, Model,
    ModelFamily,
};
use crate::nn::{softmax_cross_entropy, AdamConfig, NnError, ParamStore, Scalar, Tensor4};
use crate::preprocess::DfsFrame;

/// Optimization and stopping hyperparameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without validation-loss improvement tolerated before stopping.
    pub patience: usize,
    /// Improvement must beat the best loss by more than this margin.
    pub min_delta: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-4,
            batch_size: 12,
            max_epochs: 100,
            patience: 5,
            min_delta: 0.0,
            seed: 42,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ExpError> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(ExpError::Config(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 || self.max_epochs == 0 {
            return Err(ExpError::Config(
                "batch size and max epochs must be positive".into(),
            ));
        }
        if self.patience == 0 {
            return Err(ExpError::Config("patience must be at least 1".into()));
        }
        if !(self.min_delta.is_finite() && self.min_delta >= 0.0) {
            return Err(ExpError::Config(format!(
                "min_delta must be non-negative, got {}",
                self.min_delta
            )));
        }
        Ok(())
    }
}

/// Class-labeled input batch pool.
#[derive(Clone, Debug)]
pub struct LabeledSet<S> {
    x: Tensor4<S>,
    labels: Vec<u32>,
    classes: usize,
}

impl<S: Scalar> LabeledSet<S> {
    pub fn new(x: Tensor4<S>, labels: Vec<u32>, classes: usize) -> Result<Self, ExpError> {
        if labels.is_empty() {
            return Err(ExpError::EmptyDataset("no labeled records".into()));
        }
        if x.dims()[0] != labels.len() {
            return Err(ExpError::Config(format!(
                "{} inputs for {} labels",
                x.dims()[0],
                labels.len()
            )));
        }
        if classes < 2 {
            return Err(ExpError::Config("need at least 2 classes".into()));
        }
        if let Some(l) = labels.iter().find(|&&l| l as usize >= classes) {
            return Err(ExpError::Config(format!(
                "label {l} out of range for {classes} classes"
            )));
        }
        Ok(LabeledSet { x, labels, classes })
    }

    /// Batches peak-normalized spectrogram frames with their motion labels.
    pub fn from_frames(frames: &[&DfsFrame], classes: usize) -> Result<Self, ExpError> {
        let x = frames_to_batch(frames, true)?;
        let labels: Vec<u32> = frames.iter().map(|f| f.meta.class.id()).collect();
        LabeledSet::new(x, labels, classes)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn x(&self) -> &Tensor4<S> {
        &self.x
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    /// Input dims per record as [h, w, c].
    pub fn input_dims(&self) -> [usize; 3] {
        let d = self.x.dims();
        [d[1], d[2], d[3]]
    }

    /// Gathers the indexed records into an input batch and one-hot targets.
    fn batch(&self, idx: &[usize]) -> Result<(Tensor4<S>, Tensor4<S>), ExpError> {
        let x = gather_rows(&self.x, idx);
        let labels: Vec<u32> = idx.iter().map(|&i| self.labels[i]).collect();
        let y = labels_to_onehot(&labels, self.classes)?;
        Ok((x, y))
    }
}

/// Copies whole records (contiguous in batch-major layout) into a new batch.
pub(crate) fn gather_rows<S: Scalar>(x: &Tensor4<S>, idx: &[usize]) -> Tensor4<S> {
    let [_, h, w, c] = x.dims();
    let row = h * w * c;
    let mut data = Vec::with_capacity(idx.len() * row);
    for &i in idx {
        data.extend_from_slice(&x.data()[i * row..(i + 1) * row]);
    }
    Tensor4::from_vec([idx.len(), h, w, c], data).expect("gathered rows keep record shape")
}

/// Runs the model in inference mode over `data` in fixed-size batches and
/// aggregates mean loss, accuracy and kappa. Argmax ties resolve to the
/// lowest class id.
pub fn evaluate<S: Scalar>(
    model: &Model,
    store: &ParamStore<S>,
    data: &LabeledSet<S>,
    batch_size: usize,
) -> Result<Metrics, ExpError> {
    if batch_size == 0 {
        return Err(ExpError::Config("batch size must be positive".into()));
    }
    let mut confusion = Confusion::new(data.classes());
    let mut loss_sum = 0.0;
    let all: Vec<usize> = (0..data.len()).collect();
    for chunk in all.chunks(batch_size) {
        let (x, y) = data.batch(chunk)?;
        let probs = model.predict(&x, store)?;
        let (loss, _) = softmax_cross_entropy(&probs, &y)?;
        loss_sum += loss.to_f64() * chunk.len() as f64;
        for (row, &i) in chunk.iter().enumerate() {
            let mut pred = 0;
            let mut best = probs.at(row, 0, 0, 0);
            for k in 1..data.classes() {
                let p = probs.at(row, 0, 0, k);
                if p > best {
                    best = p;
                    pred = k;
                }
            }
            confusion.record(data.labels[i] as usize, pred);
        }
    }
    let loss = loss_sum / data.len() as f64;
    let accuracy = confusion.accuracy();
    let kappa = cohen_kappa(&confusion)?;
    Ok(Metrics { loss, accuracy, kappa, confusion })
}

/// What the stopping rule decided about one epoch's validation loss.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopDecision {
    Improved,
    Wait,
    Stop,
}

/// Validation-loss early stopping. An epoch improves only when its loss
/// beats the best seen by more than `min_delta`; an equal loss counts as
/// non-improvement. `patience` consecutive non-improvements stop training.
#[derive(Clone, Debug)]
pub struct EarlyStopping {
    patience: usize,
    min_delta: f64,
    pub best: f64,
    pub best_epoch: usize,
    wait: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize, min_delta: f64) -> Self {
        EarlyStopping { patience, min_delta, best: f64::INFINITY, best_epoch: 0, wait: 0 }
    }

    pub fn observe(&mut self, epoch: usize, val_loss: f64) -> StopDecision {
        if val_loss < self.best - self.min_delta {
            self.best = val_loss;
            self.best_epoch = epoch;
            self.wait = 0;
            StopDecision::Improved
        } else {
            self.wait += 1;
            if self.wait >= self.patience {
                StopDecision::Stop
            } else {
                StopDecision::Wait
            }
        }
    }
}

/// Per-epoch training record; `epoch` is 1-based.
#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
    pub val_kappa: f64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TrialStatus {
    Completed,
    /// Training aborted on a numerical error; parameters hold the best
    /// earlier epoch (or the initialization when none completed).
    Failed(String),
}

/// Outcome of one training run.
#[derive(Clone, Debug)]
pub struct TrialResult {
    pub history: Vec<EpochRecord>,
    /// 1-based epoch whose parameters were restored; 0 when no epoch
    /// finished its validation pass.
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub status: TrialStatus,
    /// Effective skip-connection flags of the trained architecture.
    pub residuals: Vec<(String, bool)>,
}

impl TrialResult {
    pub fn completed(&self) -> bool {
        self.status == TrialStatus::Completed
    }
}

/// Trains with shuffled mini-batches until early stopping or `max_epochs`,
/// then restores the parameters of the best validation epoch.
///
/// Domain-adaptation models additionally reconstruct unlabeled inputs drawn
/// from `target_pool` each step; when no pool is given the training inputs
/// stand in. A numerical abort ends the trial as `Failed` with the best
/// earlier parameters restored; it is not an `Err`.
pub fn train_with_early_stopping<S: Scalar>(
    model: &Model,
    store: &mut ParamStore<S>,
    train: &LabeledSet<S>,
    val: &LabeledSet<S>,
    target_pool: Option<&Tensor4<S>>,
    cfg: &TrainConfig,
) -> Result<TrialResult, ExpError> {
    cfg.validate()?;
    if train.classes() != model.cfg.classes || val.classes() != model.cfg.classes {
        return Err(ExpError::Config(format!(
            "data has {}/{} classes, model expects {}",
            train.classes(),
            val.classes(),
            model.cfg.classes
        )));
    }
    let adaptation = model.cfg.family == ModelFamily::DomainAdaptation;
    let pool: Option<&Tensor4<S>> = if adaptation {
        Some(target_pool.unwrap_or(train.x()))
    } else {
        None
    };

    let adam = AdamConfig { lr: cfg.learning_rate, ..AdamConfig::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut stopper = EarlyStopping::new(cfg.patience, cfg.min_delta);
    let mut history = Vec::new();
    let mut best_params = None;
    let mut failure = None;

    'epochs: for epoch in 1..=cfg.max_epochs {
        let mut order: Vec<usize> = (0..train.len()).collect();
        order.shuffle(&mut rng);
        let mut train_loss_sum = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let (x, y) = train.batch(chunk)?;
            let step = if let Some(pool) = pool {
                let n = pool.dims()[0];
                let picks: Vec<usize> =
                    (0..chunk.len()).map(|_| rng.random_range(0..n)).collect();
                let tx = gather_rows(pool, &picks);
                train_step_adaptation(model, store, &x, &y, &tx, &adam).map(|(c, _)| c)
            } else {
                train_step_standard(model, store, &x, &y, &adam)
            };
            match step {
                Ok(loss) => train_loss_sum += loss.to_f64() * chunk.len() as f64,
                Err(NnError::Numerical(msg)) => {
                    failure = Some(msg);
                    break 'epochs;
                }
                Err(e) => return Err(e.into()),
            }
        }
        let train_loss = train_loss_sum / train.len() as f64;

        let val_metrics = match evaluate(model, store, val, cfg.batch_size) {
            Ok(m) if m.loss.is_finite() => m,
            Ok(m) => {
                failure = Some(format!("non-finite validation loss {}", m.loss));
                break 'epochs;
            }
            Err(ExpError::Nn(NnError::Numerical(msg))) => {
                failure = Some(msg);
                break 'epochs;
            }
            Err(e) => return Err(e),
        };
        history.push(EpochRecord {
            epoch,
            train_loss,
            val_loss: val_metrics.loss,
            val_accuracy: val_metrics.accuracy,
            val_kappa: val_metrics.kappa,
        });
        match stopper.observe(epoch, val_metrics.loss) {
            StopDecision::Improved => best_params = Some(store.snapshot()),
            StopDecision::Wait => {}
            StopDecision::Stop => break,
        }
    }

    if let Some(p) = &best_params {
        store.restore(p);
    }
    Ok(TrialResult {
        history,
        best_epoch: stopper.best_epoch,
        best_val_loss: stopper.best,
        status: match failure {
            None => TrialStatus::Completed,
            Some(msg) => TrialStatus::Failed(msg),
        },
        residuals: model.effective_residuals(),
    })
}
