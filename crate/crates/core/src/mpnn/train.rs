use log::debug;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::model::{example_gradient, forward, Mode};
use super::{init_model, loss_on_output, to_prediction, ModelParams, MpnnError, TrainConfig};
use crate::chem_io::TaskKind;
use crate::featurize::MolGraph;
use crate::metrics;

/// Linear warmup from `max·init_ratio` to `max` over `warmup_steps`, then
/// exponential decay reaching `max·final_ratio` at `total_steps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LrSchedule {
    pub max_lr: f64,
    pub init_ratio: f64,
    pub final_ratio: f64,
    pub warmup_steps: usize,
    pub total_steps: usize,
}

impl LrSchedule {
    pub fn new(config: &TrainConfig, steps_per_epoch: usize) -> Self {
        let total_steps = config.epochs * steps_per_epoch;
        LrSchedule {
            max_lr: config.max_lr,
            init_ratio: config.init_lr_ratio,
            final_ratio: config.final_lr_ratio,
            warmup_steps: (config.warmup_epochs * steps_per_epoch).min(total_steps),
            total_steps,
        }
    }

    pub fn at(&self, step: usize) -> f64 {
        let step = step.min(self.total_steps);
        if step < self.warmup_steps {
            let init = self.max_lr * self.init_ratio;
            return init + (self.max_lr - init) * step as f64 / self.warmup_steps as f64;
        }
        let decay_steps = self.total_steps - self.warmup_steps;
        if decay_steps == 0 {
            return self.max_lr * self.final_ratio;
        }
        if step == self.total_steps {
            return self.max_lr * self.final_ratio;
        }
        let frac = (step - self.warmup_steps) as f64 / decay_steps as f64;
        self.max_lr * self.final_ratio.powf(frac)
    }
}

/// Learning rate at `step` of `total_steps` with the warmup length implied
/// by `config.warmup_epochs` and `steps_per_epoch`.
pub fn lr_at(step: usize, total_steps: usize, steps_per_epoch: usize, config: &TrainConfig) -> f64 {
    let mut s = LrSchedule::new(config, steps_per_epoch);
    s.total_steps = total_steps;
    s.warmup_steps = s.warmup_steps.min(total_steps);
    s.at(step)
}

pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: i32,
    m: ModelParams,
    v: ModelParams,
}

impl Adam {
    pub fn new(model: &ModelParams) -> Self {
        Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: model.zeros_like(),
            v: model.zeros_like(),
        }
    }

    pub fn step(&mut self, model: &mut ModelParams, grads: &ModelParams, lr: f64) {
        self.t += 1;
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        let c1 = 1.0 - b1.powi(self.t);
        let c2 = 1.0 - b2.powi(self.t);
        let params = model.tensors_mut();
        let ms = self.m.tensors_mut();
        let vs = self.v.tensors_mut();
        for (((mut p, (_, g)), mut m), mut v) in
            params.into_iter().zip(grads.tensors()).zip(ms).zip(vs)
        {
            ndarray::Zip::from(&mut p)
                .and(&g)
                .and(&mut m)
                .and(&mut v)
                .for_each(|p, &g, m, v| {
                    *m = b1 * *m + (1.0 - b1) * g;
                    *v = b2 * *v + (1.0 - b2) * g * g;
                    *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
                });
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    /// AUC for classification, RMSE for regression.
    pub val_metric: f64,
    /// Selection score, higher is better.
    pub score: f64,
    pub lr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
}

impl History {
    pub fn best(&self) -> &EpochRecord {
        &self.epochs[self.best_epoch]
    }
}

fn targets(graphs: &[MolGraph]) -> Result<Vec<f64>, MpnnError> {
    graphs
        .iter()
        .map(|g| {
            g.label
                .map(|l| l.value())
                .ok_or_else(|| MpnnError::MissingLabel(g.id.clone()))
        })
        .collect()
}

fn check_fingerprints(expected: &str, graphs: &[MolGraph]) -> Result<(), MpnnError> {
    match graphs.iter().find(|g| g.fingerprint != expected) {
        Some(g) => Err(MpnnError::FingerprintMismatch {
            expected: expected.to_string(),
            found: g.fingerprint.clone(),
        }),
        None => Ok(()),
    }
}

/// Mixes a run seed with a step and example index into a dropout seed.
fn dropout_seed(seed: u64, step: usize, example: usize) -> u64 {
    let mut z = seed
        ^ (step as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ (example as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A batch loss this many times above `max(1, first batch loss)` counts as
/// divergence even while still finite.
pub const DIVERGENCE_FACTOR: f64 = 1e8;

/// Examples per parallel work unit. Fixed so the gradient sum order does
/// not depend on the thread count.
const GRAD_CHUNK: usize = 4;

fn batch_gradient(
    model: &ModelParams,
    graphs: &[MolGraph],
    targets: &[f64],
    batch: &[usize],
    step: usize,
) -> Result<(f64, ModelParams), MpnnError> {
    let seed = model.config.seed;
    let partials: Vec<Result<(f64, ModelParams), MpnnError>> = batch
        .par_chunks(GRAD_CHUNK)
        .map(|chunk| {
            let mut total = 0.0;
            let mut acc = model.zeros_like();
            for &i in chunk {
                let mode = Mode::Train {
                    seed: dropout_seed(seed, step, i),
                };
                let (l, g) = example_gradient(model, &graphs[i], targets[i], mode)?;
                total += l;
                acc.add_assign(&g);
            }
            Ok((total, acc))
        })
        .collect();
    let mut total = 0.0;
    let mut grads = model.zeros_like();
    for p in partials {
        let (l, g) = p?;
        total += l;
        grads.add_assign(&g);
    }
    let inv = 1.0 / batch.len() as f64;
    grads.scale(inv);
    Ok((total * inv, grads))
}

fn raw_outputs(model: &ModelParams, graphs: &[MolGraph]) -> Result<Vec<f64>, MpnnError> {
    graphs
        .par_iter()
        .map(|g| forward(model, g, Mode::Eval).map(|t| t.output))
        .collect()
}

/// Mean loss and validation metric, with the selection score (higher is
/// better). A single-class classification set has no AUC; its score falls
/// back to the negated loss.
fn evaluate(
    model: &ModelParams,
    graphs: &[MolGraph],
    targets: &[f64],
) -> Result<(f64, f64, f64), MpnnError> {
    let task = model.config.task;
    let outputs = raw_outputs(model, graphs)?;
    let loss = outputs
        .iter()
        .zip(targets)
        .map(|(&o, &y)| loss_on_output(o, y, task).0)
        .sum::<f64>()
        / graphs.len() as f64;
    let preds: Vec<f64> = outputs.iter().map(|&o| to_prediction(o, task)).collect();
    Ok(match task {
        TaskKind::Classification => {
            let labels: Vec<bool> = targets.iter().map(|&y| y > 0.5).collect();
            match metrics::auc_roc(&preds, &labels) {
                Ok(auc) => (loss, auc, auc),
                Err(_) => (loss, f64::NAN, -loss),
            }
        }
        TaskKind::Regression => {
            let rmse = metrics::rmse(&preds, targets).unwrap_or(f64::NAN);
            (loss, rmse, -rmse)
        }
    })
}

/// Trains from a Glorot initialization seeded by `config.seed` and returns
/// the weights of the epoch with the best validation score together with
/// the per-epoch history. Score ties go to the lower validation loss, then
/// to the earlier epoch.
pub fn train(
    train_set: &[MolGraph],
    val_set: &[MolGraph],
    config: &TrainConfig,
) -> Result<(ModelParams, History), MpnnError> {
    config.validate().map_err(MpnnError::InvalidConfig)?;
    if train_set.is_empty() {
        return Err(MpnnError::EmptyPartition("train"));
    }
    if val_set.is_empty() {
        return Err(MpnnError::EmptyPartition("validation"));
    }
    let fingerprint = train_set[0].fingerprint.clone();
    check_fingerprints(&fingerprint, train_set)?;
    check_fingerprints(&fingerprint, val_set)?;
    let train_targets = targets(train_set)?;
    let val_targets = targets(val_set)?;

    let mut model = init_model(config, train_set[0].node_width(), config.seed);
    model.fingerprint = fingerprint;
    let mut adam = Adam::new(&model);
    let steps_per_epoch = train_set.len().div_ceil(config.batch_size);
    let schedule = LrSchedule::new(config, steps_per_epoch);
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(config.seed);
    shuffle_rng.set_stream(1);

    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut history = History {
        epochs: Vec::with_capacity(config.epochs),
        best_epoch: 0,
    };
    let mut best: Option<((f64, f64), ModelParams)> = None;
    let mut loss_ceiling = f64::INFINITY;
    let mut step = 0;
    for epoch in 0..config.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0;
        let mut lr = schedule.at(step);
        for batch in order.chunks(config.batch_size) {
            lr = schedule.at(step);
            let (l, grads) = batch_gradient(&model, train_set, &train_targets, batch, step)?;
            if !l.is_finite() || l > loss_ceiling {
                return Err(MpnnError::Diverged { epoch });
            }
            if step == 0 {
                loss_ceiling = DIVERGENCE_FACTOR * l.max(1.0);
            }
            loss_sum += l * batch.len() as f64;
            adam.step(&mut model, &grads, lr);
            step += 1;
        }
        if !model.is_finite() {
            return Err(MpnnError::Diverged { epoch });
        }
        let (val_loss, val_metric, score) = evaluate(&model, val_set, &val_targets)?;
        if !val_loss.is_finite() {
            return Err(MpnnError::Diverged { epoch });
        }
        let train_loss = loss_sum / train_set.len() as f64;
        debug!("epoch {epoch}: train loss {train_loss:.5}, val loss {val_loss:.5}, val metric {val_metric:.5}");
        history.epochs.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
            val_metric,
            score,
            lr,
        });
        // equal scores fall back to the lower validation loss
        let key = (score, -val_loss);
        if best.as_ref().is_none_or(|(k, _)| key > *k) {
            history.best_epoch = epoch;
            best = Some((key, model.clone()));
        }
    }
    let (_, best_model) = best.expect("at least one epoch");
    Ok((best_model, history))
}

/// Eval-mode predictions (probabilities for classification) in input
/// order. Every graph must carry the model's featurization fingerprint.
pub fn predict_batch(model: &ModelParams, graphs: &[MolGraph]) -> Result<Vec<f64>, MpnnError> {
    check_fingerprints(&model.fingerprint, graphs)?;
    let task = model.config.task;
    Ok(raw_outputs(model, graphs)?
        .into_iter()
        .map(|o| to_prediction(o, task))
        .collect())
}
