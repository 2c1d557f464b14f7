use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::net::{Gradients, SegNetSmall};
use crate::confusion::{binarize, DEFAULT_THRESHOLD};
use crate::data::Sample;
use crate::error::{invalid, Result};
use crate::grid::AugmentParams;
use crate::losses::{evaluate, LossConfig, LossKind};
use crate::metrics::eval_pair;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub loss: LossConfig,
    pub augment: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            batch_size: 8,
            epochs: 50,
            seed: 0,
            loss: LossConfig::with_kind(LossKind::Mcc),
            augment: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(invalid(format!(
                "learning rate must be nonnegative, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(invalid("batch size must be at least 1"));
        }
        if self.loss.epsilon.is_nan() || self.loss.epsilon <= 0.0 {
            return Err(invalid("loss epsilon must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_jaccard: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the best validation Jaccard.
    pub best: SegNetSmall,
    pub best_epoch: usize,
    /// Mean validation Jaccard before the first update.
    pub baseline_val_jaccard: f64,
    pub log: Vec<EpochLog>,
}

/// Mean hard Jaccard of binarized predictions over `samples`.
pub fn mean_jaccard(net: &SegNetSmall, samples: &[Sample]) -> Result<f64> {
    if samples.is_empty() {
        return Err(invalid("cannot score an empty sample list"));
    }
    let mut total = 0.0;
    for s in samples {
        let pred = binarize(&net.predict(&s.image)?, DEFAULT_THRESHOLD)?;
        total += eval_pair(&pred, &s.mask)?.jaccard;
    }
    Ok(total / samples.len() as f64)
}

/// Shuffled mini-batch SGD on per-image losses averaged over each batch.
///
/// Batch order and augmentation draws come from one ChaCha stream seeded by
/// `cfg.seed`, and gradients are summed in batch order, so identical inputs
/// give bit-identical parameters.
pub fn train(
    mut net: SegNetSmall,
    train_set: &[Sample],
    validation: &[Sample],
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train_set.is_empty() || validation.is_empty() {
        return Err(invalid(format!(
            "training needs nonempty splits, got {} train and {} validation samples",
            train_set.len(),
            validation.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let baseline = mean_jaccard(&net, validation)?;
    let mut best = net.clone();
    let mut best_score = f64::NEG_INFINITY;
    let mut best_epoch = 0;
    let mut log = Vec::with_capacity(cfg.epochs);
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let scale = 1.0 / batch.len() as f64;
            let mut grads = Gradients::zeros_like(&net);
            for &i in batch {
                let s = &train_set[i];
                let aug_seed = rng.next_u64();
                let (image, mask) = if cfg.augment {
                    AugmentParams::from_seed(aug_seed).apply(&s.image, &s.mask)?
                } else {
                    (s.image.clone(), s.mask.clone())
                };
                let (pred, cache) = net.forward(&image)?;
                let mut e = evaluate(&pred, &mask, &cfg.loss)?;
                loss_sum += e.value;
                e.grad.iter_mut().for_each(|g| *g *= scale);
                grads.add_assign(&net.backward(&cache, &e.grad)?);
            }
            net.sgd_step(&grads, cfg.learning_rate)?;
        }
        let val_jaccard = mean_jaccard(&net, validation)?;
        log.push(EpochLog {
            epoch,
            train_loss: loss_sum / train_set.len() as f64,
            val_jaccard,
        });
        if val_jaccard > best_score {
            best_score = val_jaccard;
            best_epoch = epoch;
            best = net.clone();
        }
    }
    Ok(TrainOutcome {
        best,
        best_epoch,
        baseline_val_jaccard: baseline,
        log,
    })
}

/// Training log as CSV with header `epoch,train_loss,val_jaccard`.
pub fn write_log_csv<W: std::io::Write>(log: &[EpochLog], mut out: W) -> std::io::Result<()> {
    writeln!(out, "epoch,train_loss,val_jaccard")?;
    for e in log {
        writeln!(out, "{},{},{}", e.epoch, e.train_loss, e.val_jaccard)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, SynthConfig};

    fn tiny_data() -> Vec<Sample> {
        generate_synthetic(&SynthConfig {
            count: 6,
            size: 16,
            fg_fraction_min: 0.1,
            fg_fraction_max: 0.2,
            seed: 4,
            ..SynthConfig::default()
        })
        .unwrap()
    }

    #[test]
    fn zero_learning_rate_changes_nothing() {
        let data = tiny_data();
        let net = SegNetSmall::new(1, 8).unwrap();
        let cfg = TrainConfig {
            learning_rate: 0.0,
            epochs: 2,
            batch_size: 2,
            seed: 1,
            ..TrainConfig::default()
        };
        let out = train(net.clone(), &data[..4], &data[4..], &cfg).unwrap();
        assert_eq!(out.best.flat_params(), net.flat_params());
        assert!(out.log.iter().all(|e| e.val_jaccard == out.baseline_val_jaccard));
    }

    #[test]
    fn training_is_deterministic() {
        let data = tiny_data();
        let cfg = TrainConfig {
            learning_rate: 0.1,
            epochs: 2,
            batch_size: 3,
            seed: 2,
            ..TrainConfig::default()
        };
        let a = train(SegNetSmall::new(1, 8).unwrap(), &data[..4], &data[4..], &cfg).unwrap();
        let b = train(SegNetSmall::new(1, 8).unwrap(), &data[..4], &data[4..], &cfg).unwrap();
        assert_eq!(a.log, b.log);
        assert_eq!(a.best.flat_params(), b.best.flat_params());
    }

    #[test]
    fn empty_splits_rejected() {
        let data = tiny_data();
        let net = SegNetSmall::new(1, 8).unwrap();
        assert!(train(net.clone(), &[], &data, &TrainConfig::default()).is_err());
        assert!(train(net, &data, &[], &TrainConfig::default()).is_err());
    }

    #[test]
    fn log_csv_layout() {
        let mut buf = Vec::new();
        write_log_csv(
            &[EpochLog {
                epoch: 1,
                train_loss: 0.5,
                val_jaccard: 0.25,
            }],
            &mut buf,
        )
        .unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "epoch,train_loss,val_jaccard\n1,0.5,0.25\n"
        );
    }
}
