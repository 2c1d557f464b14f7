//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.
//!
//! Criteria can be selected by number: `cargo test --test acceptance -- 1 5`.

use std::process::ExitCode;
use std::time::Instant;

use mccseg::confusion::soft_confusion;
use mccseg::data::{generate_synthetic, resample_samples, split_60_10_30, SynthConfig};
use mccseg::experiment::{run_twin, TwinConfig, TwinRun};
use mccseg::grid::{BinaryMask, ProbMask};
use mccseg::losses::{grad_check, mcc_loss, random_grad_instance, LossConfig, LossKind};
use mccseg::metrics::{eval_pair, METRIC_NAMES};
use mccseg::model::{train, Predictor, SegNetSmall, TrainConfig};
use mccseg::report::{compare, evaluate_samples, significance_stars};
use mccseg::stats::{kde_epanechnikov, linspace, silverman_bandwidth, wilcoxon_signed_rank, Bandwidth};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// criterion 1
const GRAD_CASES: usize = 100;
const GRAD_MIN_SIDE: usize = 4;
const GRAD_MAX_SIDE: usize = 16;
const GRAD_STEP: f64 = 1e-5;
const GRAD_MAX_REL_ERR: f64 = 1e-5;
// criterion 2
const CONFUSION_PAIRS: usize = 1000;
const CONFUSION_TOL: f64 = 1e-9;
// criterion 3
const BOUND_INPUTS: usize = 1000;
const BOUND_TOL: f64 = 1e-6;
const ANCHOR_TOL: f64 = 1e-9;
// criterion 4
const IDENTITY_PAIRS: usize = 1000;
/// Floating-point rounding slack for the dice/jaccard identity.
const IDENTITY_ROUNDING: f64 = 1e-12;
const HARD_MCC_TOL: f64 = 1e-6;
// criterion 5
const WILCOXON_CASES: usize = 200;
const WILCOXON_MAX_N: usize = 12;
const WILCOXON_TOL: f64 = f64::EPSILON;
// criterion 6
const KDE_SETS: usize = 50;
const KDE_INTEGRAL_TOL: f64 = 0.01;
const KDE_GRID_POINTS: usize = 4001;
const KDE_POINTWISE_TOL: f64 = 1e-12;
// criteria 7 and 8
const TWIN_SEEDS: [u64; 5] = [1, 2, 3, 4, 5];
const TWIN_REQUIRED_WINS: usize = 4;
const TWIN_MAX_EPOCHS: usize = 100;
const TWIN_EPOCHS: usize = 40;
const _: () = assert!(TWIN_EPOCHS <= TWIN_MAX_EPOCHS);
const TWIN_LEARNING_RATE: f64 = 0.05;
const TWIN_DATA_SEED: u64 = 0;
const TWIN_ALPHA: f64 = 0.05;
// criterion 9
const PIPELINE_SIZE: usize = 128;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn random_binary(rng: &mut ChaCha8Rng, len: usize) -> Vec<u8> {
    (0..len).map(|_| rng.random_range(0..=1)).collect()
}

fn random_shape(rng: &mut ChaCha8Rng) -> (usize, usize) {
    (rng.random_range(1..=16), rng.random_range(1..=16))
}

/// Binary mask with at least one pixel of each class.
fn random_two_class(rng: &mut ChaCha8Rng) -> BinaryMask {
    loop {
        let (h, w) = random_shape(rng);
        let labels = random_binary(rng, h * w);
        let fg = labels.iter().filter(|&&l| l == 1).count();
        if fg > 0 && fg < labels.len() {
            return BinaryMask::new(h, w, labels).unwrap();
        }
    }
}

fn gradient_fidelity() -> Outcome {
    let mut worst = Vec::new();
    for kind in LossKind::ALL {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + kind as u64);
        let mut max_rel = 0.0f64;
        for _ in 0..GRAD_CASES {
            let (pred, gt) = random_grad_instance(&mut rng, GRAD_MIN_SIDE, GRAD_MAX_SIDE).unwrap();
            assert!(pred.probs().iter().all(|&p| p > 0.1 && p < 0.9));
            max_rel = max_rel.max(grad_check(kind, &pred, &gt, GRAD_STEP).unwrap().max_rel_err);
        }
        worst.push((kind, max_rel));
    }
    let passed = worst.iter().all(|(_, e)| *e <= GRAD_MAX_REL_ERR);
    let detail = worst
        .iter()
        .map(|(k, e)| format!("{k} {e:.2e}"))
        .collect::<Vec<_>>()
        .join(", ");
    outcome(
        passed,
        format!("max relative error over {GRAD_CASES} cases: {detail} (limit {GRAD_MAX_REL_ERR:e}, h = {GRAD_STEP:e})"),
    )
}

fn confusion_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(200);
    let mut max_dev = 0.0f64;
    for _ in 0..CONFUSION_PAIRS {
        let (h, w) = random_shape(&mut rng);
        let p = random_binary(&mut rng, h * w);
        let y = random_binary(&mut rng, h * w);
        let (mut tp, mut tn, mut fp, mut fn_) = (0u64, 0u64, 0u64, 0u64);
        for (&a, &b) in p.iter().zip(&y) {
            match (a, b) {
                (1, 1) => tp += 1,
                (0, 0) => tn += 1,
                (1, 0) => fp += 1,
                _ => fn_ += 1,
            }
        }
        let pred = BinaryMask::new(h, w, p).unwrap().to_prob();
        let gt = BinaryMask::new(h, w, y).unwrap();
        let c = soft_confusion(&pred, &gt).unwrap();
        for (soft, hard) in [(c.tp, tp), (c.tn, tn), (c.fp, fp), (c.fn_, fn_)] {
            max_dev = max_dev
                .max((soft.round() - hard as f64).abs())
                .max((soft - hard as f64).abs());
        }
    }
    outcome(
        max_dev <= CONFUSION_TOL,
        format!("{CONFUSION_PAIRS} binary pairs, max deviation from counting {max_dev:.2e} (limit {CONFUSION_TOL:e})"),
    )
}

fn loss_bounds_and_anchors() -> Outcome {
    let cfg = LossConfig::with_kind(LossKind::Mcc);
    let mut rng = ChaCha8Rng::seed_from_u64(300);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for _ in 0..BOUND_INPUTS {
        let (h, w) = random_shape(&mut rng);
        let probs = (0..h * w).map(|_| rng.random_range(0.0..=1.0)).collect();
        let pred = ProbMask::new(h, w, probs).unwrap();
        let gt = BinaryMask::new(h, w, random_binary(&mut rng, h * w)).unwrap();
        let v = mcc_loss(&pred, &gt, &cfg).unwrap().value;
        lo = lo.min(v);
        hi = hi.max(v);
    }
    let bounded = lo >= -BOUND_TOL && hi <= 2.0 + BOUND_TOL;

    let (mut perfect, mut inverted) = (f64::NEG_INFINITY, f64::INFINITY);
    for _ in 0..100 {
        let gt = random_two_class(&mut rng);
        perfect = perfect.max(mcc_loss(&gt.to_prob(), &gt, &cfg).unwrap().value);
        inverted = inverted.min(mcc_loss(&gt.inverted().to_prob(), &gt, &cfg).unwrap().value);
    }
    // tp = 1, tn = 2, fp = 0, fn = 1
    let pred = BinaryMask::new(1, 4, vec![1, 0, 0, 0]).unwrap().to_prob();
    let gt = BinaryMask::new(1, 4, vec![1, 0, 0, 1]).unwrap();
    let anchor = mcc_loss(&pred, &gt, &cfg).unwrap().value;
    let expected = 1.0 - 2.0 / 12f64.sqrt();
    let anchor_dev = (anchor - expected).abs();

    let passed = bounded && perfect <= BOUND_TOL && inverted >= 2.0 - BOUND_TOL && anchor_dev <= ANCHOR_TOL;
    outcome(
        passed,
        format!(
            "range [{lo:.6}, {hi:.6}] over {BOUND_INPUTS} inputs; perfect max {perfect:.2e}; \
             inversion min {inverted:.9}; (1,2,0,1) deviation {anchor_dev:.2e} (limit {ANCHOR_TOL:e})"
        ),
    )
}

fn metric_identities() -> Outcome {
    let cfg = LossConfig::with_kind(LossKind::Mcc);
    let mut rng = ChaCha8Rng::seed_from_u64(400);
    let (mut identity_dev, mut mcc_dev) = (0.0f64, 0.0f64);
    let mut ordered = true;
    for _ in 0..IDENTITY_PAIRS {
        let (h, w) = random_shape(&mut rng);
        let pred = BinaryMask::new(h, w, random_binary(&mut rng, h * w)).unwrap();
        let gt = BinaryMask::new(h, w, random_binary(&mut rng, h * w)).unwrap();
        let m = eval_pair(&pred, &gt).unwrap();
        identity_dev = identity_dev.max((m.dice - 2.0 * m.jaccard / (1.0 + m.jaccard)).abs());
        ordered &= m.dice >= m.jaccard;
        let loss = mcc_loss(&pred.to_prob(), &gt, &cfg).unwrap().value;
        mcc_dev = mcc_dev.max((m.mcc - (1.0 - loss)).abs());
    }
    outcome(
        identity_dev <= IDENTITY_ROUNDING && ordered && mcc_dev <= HARD_MCC_TOL,
        format!(
            "{IDENTITY_PAIRS} pairs: |dice - 2j/(1+j)| max {identity_dev:.2e}, dice >= jaccard {ordered}, \
             |mcc - (1 - mcc_loss)| max {mcc_dev:.2e} (limit {HARD_MCC_TOL:e})"
        ),
    )
}

/// Two-sided p by listing all `2^n` sign assignments of ranks `1..=n`.
fn enumerated_p(n: usize, w_plus: f64) -> f64 {
    let (mut below, mut above) = (0u64, 0u64);
    for signs in 0u32..(1 << n) {
        let w: f64 = (0..n)
            .filter(|i| signs >> i & 1 == 1)
            .map(|i| (i + 1) as f64)
            .sum();
        if w <= w_plus {
            below += 1;
        }
        if w >= w_plus {
            above += 1;
        }
    }
    (2.0 * below.min(above) as f64 / (1u64 << n) as f64).min(1.0)
}

fn wilcoxon_exactness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(500);
    let mut max_dev = 0.0f64;
    for case in 0..WILCOXON_CASES {
        let n = 1 + case % WILCOXON_MAX_N;
        let (a, b) = loop {
            let a: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
            let b: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
            let mut mags: Vec<f64> = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).collect();
            mags.sort_by(f64::total_cmp);
            if mags[0] > 0.0 && mags.windows(2).all(|p| p[0] != p[1]) {
                break (a, b);
            }
        };
        let r = wilcoxon_signed_rank(&a, &b).unwrap();
        max_dev = max_dev.max((r.p_value - enumerated_p(n, r.w_plus)).abs());
    }
    let all_positive = wilcoxon_signed_rank(&[2.0, 3.0, 4.0, 5.0, 6.0], &[1.0; 5])
        .unwrap()
        .p_value;
    outcome(
        max_dev <= WILCOXON_TOL && all_positive == 0.0625,
        format!(
            "{WILCOXON_CASES} tie-free samples, n <= {WILCOXON_MAX_N}: max |p - enumeration| {max_dev:.2e}; \
             n = 5 all positive p = {all_positive}"
        ),
    )
}

fn kde_normalization() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(600);
    let (mut integral_dev, mut point_dev) = (0.0f64, 0.0f64);
    for _ in 0..KDE_SETS {
        let n = rng.random_range(2..=80);
        let center = rng.random_range(-5.0..5.0);
        let scale = rng.random_range(0.01..3.0);
        let samples: Vec<f64> = (0..n)
            .map(|_| center + scale * rng.random_range(-1.0..1.0))
            .collect();
        let h = silverman_bandwidth(&samples).unwrap();
        let lo = samples.iter().copied().fold(f64::INFINITY, f64::min) - h;
        let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max) + h;
        let grid = linspace(lo, hi, KDE_GRID_POINTS);
        let curve = kde_epanechnikov(&samples, Some(&grid), Bandwidth::Silverman).unwrap();
        assert_eq!(curve.bandwidth, h);
        integral_dev = integral_dev.max((curve.integral() - 1.0).abs());
        for (&x, &d) in curve.grid.iter().zip(&curve.density).step_by(37) {
            let direct: f64 = samples
                .iter()
                .map(|s| {
                    let u = (x - s) / h;
                    (1.0 - u * u).max(0.0)
                })
                .sum::<f64>()
                * 0.75
                / (n as f64 * h);
            point_dev = point_dev.max((d - direct).abs() / direct.max(1.0));
        }
    }
    outcome(
        integral_dev <= KDE_INTEGRAL_TOL && point_dev <= KDE_POINTWISE_TOL,
        format!(
            "{KDE_SETS} sets: max |integral - 1| {integral_dev:.2e} (limit {KDE_INTEGRAL_TOL}), \
             max pointwise deviation {point_dev:.2e}"
        ),
    )
}

fn twin_config(seed: u64) -> TwinConfig {
    TwinConfig {
        data: SynthConfig {
            count: 200,
            size: 64,
            fg_fraction_min: 0.04,
            fg_fraction_max: 0.06,
            seed: TWIN_DATA_SEED,
            ..SynthConfig::default()
        },
        train: TrainConfig {
            learning_rate: TWIN_LEARNING_RATE,
            epochs: TWIN_EPOCHS,
            seed,
            ..TrainConfig::default()
        },
        losses: (LossKind::Mcc, LossKind::Dice),
    }
}

fn run_all_twins() -> Vec<TwinRun> {
    TWIN_SEEDS
        .iter()
        .map(|&s| run_twin(&twin_config(s)).unwrap())
        .collect()
}

fn directional_replication(runs: &[TwinRun]) -> Outcome {
    let mut wins = 0;
    let mut lines = Vec::new();
    for (seed, run) in TWIN_SEEDS.iter().zip(runs) {
        let j = run.comparison.metric("jaccard").unwrap();
        assert_eq!(run.comparison.n, 60);
        let win = j.a.mean > j.b.mean && j.wilcoxon.p_value < TWIN_ALPHA;
        wins += usize::from(win);
        lines.push(format!(
            "seed {seed}: mcc {:.4} vs dice {:.4}, p {:.2e} {}",
            j.a.mean,
            j.b.mean,
            j.wilcoxon.p_value,
            if win { "win" } else { "no win" }
        ));
    }
    outcome(
        wins >= TWIN_REQUIRED_WINS,
        format!(
            "MCC beats Dice on test Jaccard with p < {TWIN_ALPHA} in {wins}/{} seeds (need {TWIN_REQUIRED_WINS}); {}",
            TWIN_SEEDS.len(),
            lines.join("; ")
        ),
    )
}

/// Serialized form of everything a twin run produces; equal strings mean
/// bit-identical floats since serialization round-trips exactly.
fn fingerprint(run: &TwinRun) -> String {
    let logs: Vec<String> = [&run.logs.0, &run.logs.1]
        .iter()
        .flat_map(|l| l.iter())
        .map(|e| {
            format!(
                "{}:{:016x}:{:016x}",
                e.epoch,
                e.train_loss.to_bits(),
                e.val_jaccard.to_bits()
            )
        })
        .collect();
    [
        run.checkpoints.0.to_json().unwrap(),
        run.checkpoints.1.to_json().unwrap(),
        logs.join(","),
        serde_json::to_string(&run.reports.0).unwrap(),
        serde_json::to_string(&run.reports.1).unwrap(),
        serde_json::to_string(&run.comparison).unwrap(),
    ]
    .join("\n")
}

fn determinism(first: &[TwinRun]) -> Outcome {
    let second = run_all_twins();
    let same = first
        .iter()
        .zip(&second)
        .filter(|(a, b)| fingerprint(a) == fingerprint(b) && a.checkpoints == b.checkpoints)
        .count();
    outcome(
        same == first.len(),
        format!(
            "{same}/{} seeds reproduce checkpoints, logs and reports bit for bit",
            first.len()
        ),
    )
}

/// Every numeric cell of the table has four decimals and every row ends with
/// the stars its p-value earns.
fn table_is_well_formed(table: &str, stars: &[(String, f64)]) -> bool {
    let rows: Vec<&str> = table.lines().skip(1).take(METRIC_NAMES.len()).collect();
    rows.len() == METRIC_NAMES.len()
        && rows.iter().zip(stars).all(|(row, (star, p))| {
            let cells: Vec<&str> = row.split_whitespace().collect();
            let numbers: Vec<&str> = cells
                .iter()
                .copied()
                .filter(|c| c.parse::<f64>().is_ok())
                .collect();
            numbers.len() == 5
                && numbers
                    .iter()
                    .all(|c| c.split('.').nth(1).is_some_and(|d| d.len() == 4))
                && star == significance_stars(*p)
                && (star.is_empty() || row.trim_end().ends_with(star.as_str()))
        })
}

fn pipeline_shapes() -> Outcome {
    let cfg = SynthConfig {
        count: 20,
        size: 64,
        seed: 9,
        ..SynthConfig::default()
    };
    let samples = resample_samples(generate_synthetic(&cfg).unwrap(), PIPELINE_SIZE).unwrap();
    let all_sized = samples
        .iter()
        .all(|s| s.image.shape() == (PIPELINE_SIZE, PIPELINE_SIZE));
    let split = split_60_10_30(samples, 9).unwrap();
    let init = SegNetSmall::new(1, 9).unwrap();
    let reports: Vec<_> = [LossKind::Mcc, LossKind::Dice]
        .iter()
        .map(|&kind| {
            let tc = TrainConfig {
                learning_rate: TWIN_LEARNING_RATE,
                epochs: 1,
                seed: 9,
                loss: LossConfig::with_kind(kind),
                ..TrainConfig::default()
            };
            let out = train(init.clone(), &split.train, &split.validation, &tc).unwrap();
            evaluate_samples(&Predictor::Net(out.best), &split.test, kind.name(), "test").unwrap()
        })
        .collect();
    let cmp = compare(&reports[0], &reports[1]).unwrap();
    let stars: Vec<(String, f64)> = cmp
        .metrics
        .iter()
        .map(|m| (m.stars.clone(), m.wilcoxon.p_value))
        .collect();
    let table = cmp.table();
    let star_rule = significance_stars(0.0009) == "***"
        && significance_stars(0.001) == "*"
        && significance_stars(0.0499) == "*"
        && significance_stars(0.05).is_empty()
        && significance_stars(0.0625).is_empty();
    outcome(
        all_sized && table_is_well_formed(&table, &stars) && star_rule,
        format!(
            "{PIPELINE_SIZE}x{PIPELINE_SIZE} resample -> train -> eval -> compare on {} test images; \
             table has 4-decimal cells and p<0.001 ***, p<0.05 * annotations",
            split.test.len()
        ),
    )
}

fn main() -> ExitCode {
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let wanted = |n: u32| selected.is_empty() || selected.contains(&n);
    let mut failures = 0;
    let mut report = |n: u32, name: &str, run: &mut dyn FnMut() -> Outcome| {
        if !wanted(n) {
            return;
        }
        let t = Instant::now();
        let o = run();
        failures += usize::from(!o.passed);
        println!(
            "criterion {n} {} {name}: {} [{:.1}s]",
            if o.passed { "PASS" } else { "FAIL" },
            o.detail,
            t.elapsed().as_secs_f64()
        );
    };
    report(1, "gradient fidelity", &mut gradient_fidelity);
    report(2, "confusion oracle", &mut confusion_oracle);
    report(3, "loss bounds and anchors", &mut loss_bounds_and_anchors);
    report(4, "metric identities", &mut metric_identities);
    report(5, "wilcoxon exactness", &mut wilcoxon_exactness);
    report(6, "kde normalization", &mut kde_normalization);
    if wanted(7) || wanted(8) {
        let t = Instant::now();
        let runs = run_all_twins();
        let first_pass = t.elapsed().as_secs_f64();
        report(7, "directional replication", &mut || {
            let mut o = directional_replication(&runs);
            o.detail.push_str(&format!(" (training {first_pass:.1}s)"));
            o
        });
        report(8, "end-to-end determinism", &mut || determinism(&runs));
    }
    report(9, "pipeline shapes", &mut pipeline_shapes);
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failures} criterion(s) failed");
        ExitCode::FAILURE
    }
}
