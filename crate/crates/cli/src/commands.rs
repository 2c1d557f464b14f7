use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use mccseg::data::{
    export_directory, generate_synthetic, load_directory, resample_samples, split_60_10_30, Sample,
    SplitName, SynthConfig,
};
use mccseg::losses::{run_grad_suite, GradSuiteConfig, LossConfig, LossKind};
use mccseg::metrics::METRIC_NAMES;
use mccseg::model::{train as train_net, write_log_csv, Checkpoint, SegNetSmall, TrainConfig};
use mccseg::report::{
    compare as compare_reports, evaluate_samples, metric_densities, metric_label, EvalReport,
};
use serde::{Deserialize, Serialize};

use crate::config::resolve;
use crate::manifest::Recorder;
use crate::{CliError, CompareFlags, EvalFlags, GradcheckFlags, SynthFlags, TrainFlags};

pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const TRAIN_LOG_FILE: &str = "train_log.csv";
pub const REPORT_FILE: &str = "report.json";

fn usage(e: impl Into<anyhow::Error>) -> CliError {
    CliError::Usage(e.into())
}

fn create_dir(dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)?)
        .with_context(|| format!("cannot write {}", path.display()))
}

/// Loads a dataset directory, reports skipped files on stderr, and resamples
/// when asked.
fn load_samples(dir: &Path, resize: Option<usize>) -> anyhow::Result<Vec<Sample>> {
    let (samples, report) =
        load_directory(dir).with_context(|| format!("cannot load dataset {}", dir.display()))?;
    for s in &report.skipped {
        eprintln!("skipped {}: {}", s.path.display(), s.reason);
    }
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    Ok(match resize {
        Some(size) => resample_samples(samples, size)?,
        None => samples,
    })
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SynthRun {
    out: PathBuf,
    #[serde(default = "defaults::count")]
    count: usize,
    #[serde(default = "defaults::size")]
    size: usize,
    #[serde(default = "defaults::fg_min")]
    fg_min: f64,
    #[serde(default = "defaults::fg_max")]
    fg_max: f64,
    #[serde(default = "defaults::contrast")]
    contrast: f64,
    #[serde(default = "defaults::noise")]
    noise: f64,
    #[serde(default)]
    seed: u64,
}

mod defaults {
    use mccseg::data::SynthConfig;
    use mccseg::model::TrainConfig;

    pub fn count() -> usize {
        SynthConfig::default().count
    }
    pub fn size() -> usize {
        SynthConfig::default().size
    }
    pub fn fg_min() -> f64 {
        SynthConfig::default().fg_fraction_min
    }
    pub fn fg_max() -> f64 {
        SynthConfig::default().fg_fraction_max
    }
    pub fn contrast() -> f64 {
        SynthConfig::default().contrast
    }
    pub fn noise() -> f64 {
        SynthConfig::default().noise_sigma
    }
    pub fn lr() -> f64 {
        TrainConfig::default().learning_rate
    }
    pub fn batch_size() -> usize {
        TrainConfig::default().batch_size
    }
    pub fn epochs() -> usize {
        TrainConfig::default().epochs
    }
    pub fn yes() -> bool {
        true
    }
    pub fn epsilon() -> f64 {
        mccseg::losses::DEFAULT_EPSILON
    }
}

pub fn synth(flags: &SynthFlags, argv: &[String]) -> Result<(), CliError> {
    let run: SynthRun = resolve("synth", flags, flags.config.as_deref())?;
    let cfg = SynthConfig {
        count: run.count,
        size: run.size,
        fg_fraction_min: run.fg_min,
        fg_fraction_max: run.fg_max,
        contrast: run.contrast,
        noise_sigma: run.noise,
        seed: run.seed,
    };
    cfg.validate().map_err(usage)?;
    let mut rec = Recorder::start("synth", argv);
    let samples = generate_synthetic(&cfg)?;
    create_dir(&run.out)?;
    rec.outputs(export_directory(&samples, &run.out)?);
    rec.finish(&run.out, &run, Some(run.seed))?;
    say!(
        "wrote {} image/mask pairs to {}",
        samples.len(),
        run.out.display()
    );
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrainRun {
    data: PathBuf,
    out: PathBuf,
    #[serde(default = "mcc")]
    loss: LossKind,
    #[serde(default = "defaults::lr")]
    lr: f64,
    #[serde(default = "defaults::batch_size")]
    batch_size: usize,
    #[serde(default = "defaults::epochs")]
    epochs: usize,
    #[serde(default)]
    seed: u64,
    #[serde(default = "defaults::yes")]
    augment: bool,
    #[serde(default = "defaults::epsilon")]
    epsilon: f64,
    #[serde(default)]
    resize: Option<usize>,
}

fn mcc() -> LossKind {
    LossKind::Mcc
}

#[derive(Debug, Serialize)]
struct TrainSummary {
    best_epoch: usize,
    best_val_jaccard: Option<f64>,
    baseline_val_jaccard: f64,
    train_images: usize,
    validation_images: usize,
    test_images: usize,
}

pub fn train(flags: &TrainFlags, argv: &[String]) -> Result<(), CliError> {
    let run: TrainRun = resolve("train", flags, flags.config.as_deref())?;
    let cfg = TrainConfig {
        learning_rate: run.lr,
        batch_size: run.batch_size,
        epochs: run.epochs,
        seed: run.seed,
        loss: LossConfig::new(run.loss, run.epsilon).map_err(usage)?,
        augment: run.augment,
    };
    cfg.validate().map_err(usage)?;
    if run.resize == Some(0) {
        return Err(usage(anyhow!("--resize must be positive")));
    }

    let mut rec = Recorder::start("train", argv);
    rec.input_dir(&run.data)?;
    let samples = load_samples(&run.data, run.resize)?;
    let split = split_60_10_30(samples, run.seed)?;
    let channels = split.train.first().map(|s| s.image.channels()).unwrap_or(1);
    let net = SegNetSmall::new(channels, run.seed)?;
    let outcome = train_net(net, &split.train, &split.validation, &cfg)?;

    create_dir(&run.out)?;
    let ck_path = run.out.join(CHECKPOINT_FILE);
    Checkpoint::from_net(&outcome.best, run.seed).save(&ck_path)?;
    let log_path = run.out.join(TRAIN_LOG_FILE);
    write_log_csv(&outcome.log, BufWriter::new(File::create(&log_path)?))?;
    let summary_path = run.out.join("summary.json");
    let (n_train, n_val, n_test) = split.sizes();
    write_json(
        &summary_path,
        &TrainSummary {
            best_epoch: outcome.best_epoch,
            best_val_jaccard: outcome
                .log
                .iter()
                .find(|e| e.epoch == outcome.best_epoch)
                .map(|e| e.val_jaccard),
            baseline_val_jaccard: outcome.baseline_val_jaccard,
            train_images: n_train,
            validation_images: n_val,
            test_images: n_test,
        },
    )?;
    for p in [&ck_path, &log_path, &summary_path] {
        rec.output(p);
    }
    rec.finish(&run.out, &run, Some(run.seed))?;
    for e in &outcome.log {
        say!(
            "epoch {:>3}  loss {:.4}  val jaccard {:.4}",
            e.epoch,
            e.train_loss,
            e.val_jaccard
        );
    }
    say!(
        "best epoch {} (baseline val jaccard {:.4}); checkpoint {}",
        outcome.best_epoch,
        outcome.baseline_val_jaccard,
        ck_path.display()
    );
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EvalRun {
    data: PathBuf,
    out: PathBuf,
    #[serde(default)]
    checkpoint: Option<PathBuf>,
    #[serde(default)]
    oracle: bool,
    #[serde(default = "test_split")]
    split: SplitName,
    #[serde(default)]
    split_seed: Option<u64>,
    #[serde(default)]
    resize: Option<usize>,
    #[serde(default)]
    label: Option<String>,
}

fn test_split() -> SplitName {
    SplitName::Test
}

fn split_label(s: SplitName) -> &'static str {
    match s {
        SplitName::Train => "train",
        SplitName::Validation => "validation",
        SplitName::Test => "test",
    }
}

pub fn eval(flags: &EvalFlags, argv: &[String]) -> Result<(), CliError> {
    let run: EvalRun = resolve("eval", flags, flags.config.as_deref())?;
    let mut rec = Recorder::start("eval", argv);
    let checkpoint = match (&run.checkpoint, run.oracle) {
        (Some(_), true) => return Err(usage(anyhow!("give either --checkpoint or --oracle, not both"))),
        (None, false) => return Err(usage(anyhow!("one of --checkpoint or --oracle is required"))),
        (None, true) => Checkpoint::oracle(run.split_seed.unwrap_or(0)),
        (Some(path), false) => {
            rec.input(path);
            Checkpoint::load(path)?
        }
    };
    if run.resize == Some(0) {
        return Err(usage(anyhow!("--resize must be positive")));
    }
    let predictor = checkpoint.predictor()?;
    let label = run.label.clone().unwrap_or_else(|| match &run.checkpoint {
        None => "oracle".into(),
        Some(p) => p
            .parent()
            .and_then(|d| d.file_name())
            .and_then(|n| n.to_str())
            .unwrap_or("model")
            .to_owned(),
    });
    let split_seed = run.split_seed.unwrap_or(checkpoint.seed);

    rec.input_dir(&run.data)?;
    let samples = load_samples(&run.data, run.resize)?;
    let split = split_60_10_30(samples, split_seed)?;
    let subset = split.get(run.split);
    let report = evaluate_samples(&predictor, subset, &label, split_label(run.split))?;

    create_dir(&run.out)?;
    let csv_path = run.out.join("per_image.csv");
    report.write_csv(BufWriter::new(File::create(&csv_path)?))?;
    let report_path = run.out.join(REPORT_FILE);
    write_json(&report_path, &report)?;
    let agg_path = run.out.join("aggregate.json");
    write_json(&agg_path, &report.aggregate)?;
    for p in [&csv_path, &report_path, &agg_path] {
        rec.output(p);
    }
    rec.finish(&run.out, &run, Some(split_seed))?;

    say!(
        "{label} on {} split ({} images)",
        report.split,
        report.records.len()
    );
    for m in METRIC_NAMES {
        let v = report.aggregate.get(m).expect("known metric");
        say!("{:<12} {:.4} ± {:.4}", metric_label(m), v.mean, v.se);
    }
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CompareRun {
    a: PathBuf,
    b: PathBuf,
    out: PathBuf,
}

fn report_path(p: &Path) -> PathBuf {
    if p.is_dir() {
        p.join(REPORT_FILE)
    } else {
        p.to_path_buf()
    }
}

fn read_report(path: &Path) -> anyhow::Result<EvalReport> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("{} is not an evaluation report", path.display()))
}

/// Keeps letters, digits, `-` and `_` so labels are safe in file names.
fn file_safe(label: &str) -> String {
    label
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

pub fn compare(flags: &CompareFlags, argv: &[String]) -> Result<(), CliError> {
    let run: CompareRun = resolve("compare", flags, flags.config.as_deref())?;
    let mut rec = Recorder::start("compare", argv);
    let (pa, pb) = (report_path(&run.a), report_path(&run.b));
    rec.input(&pa);
    rec.input(&pb);
    let (a, b) = (read_report(&pa)?, read_report(&pb)?);
    let cmp = compare_reports(&a, &b)?;
    let table = cmp.table();

    create_dir(&run.out)?;
    let cmp_path = run.out.join("comparison.json");
    write_json(&cmp_path, &cmp)?;
    let table_path = run.out.join("table.txt");
    fs::write(&table_path, &table)?;
    rec.output(&cmp_path);
    rec.output(&table_path);

    let kde_dir = run.out.join("kde");
    create_dir(&kde_dir)?;
    for (side, report) in [("a", &a), ("b", &b)] {
        for (metric, curve) in metric_densities(report)? {
            let path = kde_dir.join(format!("{side}_{}_{metric}.csv", file_safe(&report.label)));
            curve.write_csv(BufWriter::new(File::create(&path)?))?;
            rec.output(&path);
        }
    }
    rec.finish(&run.out, &run, None)?;
    say!("{}", table.trim_end());
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GradcheckRun {
    #[serde(default = "gradcheck_dir")]
    out: PathBuf,
    #[serde(default = "suite::cases")]
    cases: usize,
    #[serde(default)]
    seed: u64,
    #[serde(default = "suite::step")]
    step: f64,
    #[serde(default = "suite::tolerance")]
    tolerance: f64,
    #[serde(default = "suite::min_side")]
    min_side: usize,
    #[serde(default = "suite::max_side")]
    max_side: usize,
    #[serde(default = "all_losses")]
    losses: Vec<LossKind>,
}

mod suite {
    use mccseg::losses::GradSuiteConfig;

    pub fn cases() -> usize {
        GradSuiteConfig::default().cases
    }
    pub fn step() -> f64 {
        GradSuiteConfig::default().step
    }
    pub fn tolerance() -> f64 {
        GradSuiteConfig::default().tolerance
    }
    pub fn min_side() -> usize {
        GradSuiteConfig::default().min_side
    }
    pub fn max_side() -> usize {
        GradSuiteConfig::default().max_side
    }
}

fn gradcheck_dir() -> PathBuf {
    PathBuf::from("gradcheck")
}

fn all_losses() -> Vec<LossKind> {
    LossKind::ALL.to_vec()
}

pub fn gradcheck(flags: &GradcheckFlags, argv: &[String]) -> Result<(), CliError> {
    let run: GradcheckRun = resolve("gradcheck", flags, flags.config.as_deref())?;
    let cfg = GradSuiteConfig {
        cases: run.cases,
        min_side: run.min_side,
        max_side: run.max_side,
        step: run.step,
        tolerance: run.tolerance,
        seed: run.seed,
    };
    if run.losses.is_empty() {
        return Err(usage(anyhow!("no losses selected")));
    }
    let mut rec = Recorder::start("gradcheck", argv);
    let mut results = Vec::with_capacity(run.losses.len());
    for &kind in &run.losses {
        let r = run_grad_suite(kind, &cfg).map_err(usage)?;
        say!(
            "{:<8} {} cases  max rel err {:.4e}  max abs err {:.4e}  {}",
            kind.name(),
            r.cases,
            r.max_rel_err,
            r.max_abs_err,
            if r.passed { "PASS" } else { "FAIL" }
        );
        results.push(r);
    }
    create_dir(&run.out)?;
    let path = run.out.join("gradcheck.json");
    write_json(&path, &results)?;
    rec.output(&path);
    rec.finish(&run.out, &run, Some(run.seed))?;
    let failed: Vec<&str> = results
        .iter()
        .filter(|r| !r.passed)
        .map(|r| r.kind.name())
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Runtime(anyhow!(
            "gradient check failed for {} (tolerance {:e})",
            failed.join(", "),
            run.tolerance
        )))
    }
}
