use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{adam_update, clip_global_norm, AdamConfig, EarlyStopper, Gradients, Objective, ParameterStore, Verdict};
use crate::seed::{rng_for, Rng};
use crate::Result;

/// A model trained by minibatch Adam over a list of examples.
pub trait Trainable {
    type Example;

    fn store(&self) -> &ParameterStore;
    fn store_mut(&mut self) -> &mut ParameterStore;

    /// Adds the gradient of the summed loss over `example` to `grads` and
    /// returns `(loss_sum, n_targets)`. `rng` drives dropout.
    fn accumulate(&self, example: &Self::Example, grads: &mut Gradients, rng: &mut Rng) -> Result<(f64, usize)>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub max_epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub clip_norm: f64,
    pub patience: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            max_epochs: 30,
            batch_size: 128,
            adam: AdamConfig::default(),
            clip_norm: 5.0,
            patience: 25,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 0 is the evaluation before any update.
    pub epoch: usize,
    /// Mean per-target training loss for the epoch (`None` for epoch 0).
    pub train_loss: Option<f64>,
    pub dev_metric: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct TrainLog {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_metric: f64,
    pub stopped_early: bool,
}

/// Runs epochs of shuffled minibatch training with gradient clipping and
/// early stopping on `eval`, then restores the best-epoch weights.
pub fn fit<M, E>(
    model: &mut M,
    train: &[M::Example],
    cfg: &TrainConfig,
    objective: Objective,
    mut eval: E,
    observer: &mut dyn FnMut(&EpochRecord),
) -> Result<TrainLog>
where
    M: Trainable,
    E: FnMut(&M) -> Result<f64>,
{
    let mut shuffle_rng = rng_for(cfg.seed, "train-shuffle");
    let mut dropout_rng = rng_for(cfg.seed, "train-dropout");
    let mut stopper = EarlyStopper::new(cfg.patience, objective);
    let mut log = TrainLog::default();

    let initial = eval(model)?;
    stopper.observe(initial);
    let mut best = model.store().snapshot();
    let rec = EpochRecord {
        epoch: 0,
        train_loss: None,
        dev_metric: initial,
    };
    observer(&rec);
    log.epochs.push(rec);

    let mut order: Vec<usize> = (0..train.len()).collect();
    let batch = cfg.batch_size.max(1);
    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut shuffle_rng);
        let (mut loss_sum, mut count) = (0.0, 0usize);
        for chunk in order.chunks(batch) {
            let mut grads = model.store().zero_gradients();
            let (mut bl, mut bc) = (0.0, 0usize);
            for &i in chunk {
                let (l, c) = model.accumulate(&train[i], &mut grads, &mut dropout_rng)?;
                bl += l;
                bc += c;
            }
            if bc == 0 {
                continue;
            }
            grads.scale(1.0 / bc as f64);
            clip_global_norm(&mut grads, cfg.clip_norm);
            adam_update(model.store_mut(), &grads, &cfg.adam)?;
            loss_sum += bl;
            count += bc;
        }
        model.store().check_finite()?;
        let metric = eval(model)?;
        let rec = EpochRecord {
            epoch,
            train_loss: (count > 0).then(|| loss_sum / count as f64),
            dev_metric: metric,
        };
        observer(&rec);
        log.epochs.push(rec);
        match stopper.observe(metric) {
            Verdict::Improved => best = model.store().snapshot(),
            Verdict::NoImprovement => {}
            Verdict::Stop => {
                log.stopped_early = true;
                break;
            }
        }
    }
    model.store_mut().restore(&best);
    log.best_epoch = stopper.best_epoch.unwrap_or(0);
    log.best_metric = stopper.best_metric.unwrap_or(initial);
    Ok(log)
}
