//! Twin training runs that differ only in the loss: same data, split,
//! initialization, batch order and augmentation draws.

use serde::{Deserialize, Serialize};

use crate::data::{generate_synthetic, split_60_10_30, SynthConfig};
use crate::error::Result;
use crate::losses::{LossConfig, LossKind};
use crate::model::{train, Checkpoint, EpochLog, Predictor, SegNetSmall, TrainConfig};
use crate::report::{compare, evaluate_samples, Comparison, EvalReport};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwinConfig {
    pub data: SynthConfig,
    pub train: TrainConfig,
    pub losses: (LossKind, LossKind),
}

/// Everything a twin run produces.
#[derive(Clone, Debug)]
pub struct TwinRun {
    pub checkpoints: (Checkpoint, Checkpoint),
    pub logs: (Vec<EpochLog>, Vec<EpochLog>),
    pub reports: (EvalReport, EvalReport),
    pub comparison: Comparison,
}

/// Generates the dataset, splits it with the training seed, trains one
/// network per loss from the same initialization, and compares them on the
/// test split.
pub fn run_twin(cfg: &TwinConfig) -> Result<TwinRun> {
    let samples = generate_synthetic(&cfg.data)?;
    let split = split_60_10_30(samples, cfg.train.seed)?;
    let init = SegNetSmall::new(1, cfg.train.seed)?;

    let run_one = |kind: LossKind| -> Result<(Checkpoint, Vec<EpochLog>, EvalReport)> {
        let tc = TrainConfig {
            loss: LossConfig {
                kind,
                ..cfg.train.loss
            },
            ..cfg.train.clone()
        };
        let out = train(init.clone(), &split.train, &split.validation, &tc)?;
        let report = evaluate_samples(
            &Predictor::Net(out.best.clone()),
            &split.test,
            kind.name(),
            "test",
        )?;
        Ok((Checkpoint::from_net(&out.best, tc.seed), out.log, report))
    };

    let (ck_a, log_a, rep_a) = run_one(cfg.losses.0)?;
    let (ck_b, log_b, rep_b) = run_one(cfg.losses.1)?;
    let comparison = compare(&rep_a, &rep_b)?;
    Ok(TwinRun {
        checkpoints: (ck_a, ck_b),
        logs: (log_a, log_b),
        reports: (rep_a, rep_b),
        comparison,
    })
}
