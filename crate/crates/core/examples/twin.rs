//! Trains an MCC and a Dice network from the same start and compares them
//! on the test split.
//!
//! ```text
//! cargo run --release -p mccseg --example twin -- [seed] [epochs] [lr]
//! ```

use std::time::Instant;

use mccseg::data::SynthConfig;
use mccseg::experiment::{run_twin, TwinConfig};
use mccseg::losses::LossKind;
use mccseg::model::TrainConfig;

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize| args.get(i).map(|s| s.as_str());
    let seed: u64 = arg(0).map_or(1, |s| s.parse().expect("seed"));
    let epochs: usize = arg(1).map_or(40, |s| s.parse().expect("epochs"));
    let lr: f64 = arg(2).map_or(0.05, |s| s.parse().expect("learning rate"));

    let cfg = TwinConfig {
        data: SynthConfig::default(),
        train: TrainConfig {
            learning_rate: lr,
            epochs,
            seed,
            ..TrainConfig::default()
        },
        losses: (LossKind::Mcc, LossKind::Dice),
    };
    let t = Instant::now();
    let run = run_twin(&cfg).expect("twin run");
    for (kind, log) in [(cfg.losses.0, &run.logs.0), (cfg.losses.1, &run.logs.1)] {
        let curve: Vec<String> = log.iter().map(|e| format!("{:.3}", e.val_jaccard)).collect();
        println!("{kind:<8} val jaccard by epoch: {}", curve.join(" "));
    }
    print!("{}", run.comparison.table());
    println!("elapsed {:.1}s", t.elapsed().as_secs_f64());
}
