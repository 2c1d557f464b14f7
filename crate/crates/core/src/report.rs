//! Per-split evaluation reports and paired two-model comparisons: mean ±
//! standard error tables with significance stars, Wilcoxon p-values, and
//! Epanechnikov density curves per metric.

use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::confusion::{binarize, DEFAULT_THRESHOLD};
use crate::data::Sample;
use crate::error::{invalid, Result};
use crate::metrics::{aggregate, eval_pair, MeanSe, MetricRecord, MetricReport, METRIC_NAMES};
use crate::model::Predictor;
use crate::stats::{kde_epanechnikov, wilcoxon_signed_rank, Bandwidth, KdeCurve, WilcoxonResult};

/// p-value below which one star is shown.
pub const ONE_STAR: f64 = 0.05;
/// p-value below which three stars are shown.
pub const THREE_STARS: f64 = 0.001;

pub fn significance_stars(p: f64) -> &'static str {
    if p < THREE_STARS {
        "***"
    } else if p < ONE_STAR {
        "*"
    } else {
        ""
    }
}

/// Human-readable metric label.
pub fn metric_label(name: &str) -> &str {
    match name {
        "dice" => "Dice",
        "jaccard" => "Jaccard",
        "accuracy" => "Accuracy",
        "sensitivity" => "Sensitivity",
        "specificity" => "Specificity",
        "mcc" => "MCC",
        other => other,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImageScore {
    pub image: String,
    #[serde(flatten)]
    pub metrics: MetricRecord,
}

/// Metrics of one model on one list of images.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub label: String,
    pub split: String,
    /// SHA-256 over image names and ground-truth masks, in order.
    pub image_set_sha256: String,
    pub records: Vec<ImageScore>,
    pub aggregate: MetricReport,
}

/// Hash identifying an ordered list of evaluation images and their masks.
pub fn image_set_digest(samples: &[Sample]) -> String {
    let mut h = Sha256::new();
    for s in samples {
        h.update(s.name.as_bytes());
        h.update([0u8]);
        h.update((s.mask.height() as u64).to_le_bytes());
        h.update((s.mask.width() as u64).to_le_bytes());
        h.update(s.mask.labels());
    }
    hex(&h.finalize())
}

/// Lowercase hex SHA-256 of `bytes`.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

fn hex(bytes: &[u8]) -> String {
    bytes
        .iter()
        .fold(String::with_capacity(bytes.len() * 2), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
}

/// Predicts, binarizes at 0.5 and scores every sample.
pub fn evaluate_samples(
    predictor: &Predictor,
    samples: &[Sample],
    label: &str,
    split: &str,
) -> Result<EvalReport> {
    if samples.is_empty() {
        return Err(invalid(format!("split '{split}' has no images to evaluate")));
    }
    let mut records = Vec::with_capacity(samples.len());
    for s in samples {
        let prob = predictor.predict(&s.image, &s.mask)?;
        let pred = binarize(&prob, DEFAULT_THRESHOLD)?;
        records.push(ImageScore {
            image: s.name.clone(),
            metrics: eval_pair(&pred, &s.mask)?,
        });
    }
    let metrics: Vec<MetricRecord> = records.iter().map(|r| r.metrics).collect();
    Ok(EvalReport {
        label: label.to_owned(),
        split: split.to_owned(),
        image_set_sha256: image_set_digest(samples),
        aggregate: aggregate(&metrics)?,
        records,
    })
}

impl EvalReport {
    pub fn column(&self, metric: &str) -> Vec<f64> {
        self.records
            .iter()
            .map(|r| r.metrics.get(metric).expect("known metric"))
            .collect()
    }

    /// One row per image followed by a `mean` row.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["image"];
        header.extend(METRIC_NAMES);
        w.write_record(&header).map_err(csv_err)?;
        for r in &self.records {
            let mut row = vec![r.image.clone()];
            row.extend(r.metrics.values().iter().map(|v| v.to_string()));
            w.write_record(&row).map_err(csv_err)?;
        }
        let mut row = vec!["mean".to_owned()];
        row.extend(self.aggregate.means().values().iter().map(|v| v.to_string()));
        w.write_record(&row).map_err(csv_err)?;
        w.flush()?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> crate::Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => io.into(),
        other => invalid(format!("csv: {other:?}")),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricComparison {
    pub metric: String,
    pub a: MeanSe,
    pub b: MeanSe,
    pub wilcoxon: WilcoxonResult,
    pub stars: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub label_a: String,
    pub label_b: String,
    pub split: String,
    pub n: usize,
    pub metrics: Vec<MetricComparison>,
}

/// Paired comparison of two reports over the same images.
pub fn compare(a: &EvalReport, b: &EvalReport) -> Result<Comparison> {
    if a.image_set_sha256 != b.image_set_sha256 || a.records.len() != b.records.len() {
        return Err(invalid(
            "reports were computed on different image lists and cannot be paired",
        ));
    }
    let metrics = METRIC_NAMES
        .iter()
        .map(|&m| {
            let w = wilcoxon_signed_rank(&a.column(m), &b.column(m))?;
            Ok(MetricComparison {
                metric: m.to_owned(),
                a: a.aggregate.get(m).expect("known metric"),
                b: b.aggregate.get(m).expect("known metric"),
                stars: significance_stars(w.p_value).to_owned(),
                wilcoxon: w,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Comparison {
        label_a: a.label.clone(),
        label_b: b.label.clone(),
        split: a.split.clone(),
        n: a.records.len(),
        metrics,
    })
}

impl Comparison {
    pub fn metric(&self, name: &str) -> Option<&MetricComparison> {
        self.metrics.iter().find(|m| m.metric == name)
    }

    /// Side-by-side `mean ± SE` table with Wilcoxon p-values, 4 decimals.
    pub fn table(&self) -> String {
        let col = |s: &str| format!("{s:<17}");
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<12} {} {} {:<8} sig",
            "Metric",
            col(&self.label_a),
            col(&self.label_b),
            "p",
        );
        for m in &self.metrics {
            let _ = writeln!(
                out,
                "{:<12} {} {} {:<8} {}",
                metric_label(&m.metric),
                col(&format!("{:.4} ± {:.4}", m.a.mean, m.a.se)),
                col(&format!("{:.4} ± {:.4}", m.b.mean, m.b.se)),
                format!("{:.4}", m.wilcoxon.p_value),
                m.stars
            );
        }
        let _ = writeln!(
            out,
            "n = {} paired images; *** p<0.001, * p<0.05 (Wilcoxon two-sided signed-rank)",
            self.n
        );
        out
    }
}

/// Density curve of every metric over the report's images, on the default
/// grid clipped to the observed values.
pub fn metric_densities(report: &EvalReport) -> Result<Vec<(String, KdeCurve)>> {
    if report.records.len() < 2 {
        return Err(invalid("density curves need at least two images"));
    }
    METRIC_NAMES
        .iter()
        .map(|&m| {
            Ok((
                m.to_owned(),
                kde_epanechnikov(&report.column(m), None, Bandwidth::Silverman)?,
            ))
        })
        .collect()
}
