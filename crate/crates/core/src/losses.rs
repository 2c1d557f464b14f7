//! Differentiable overlap and correlation losses on soft confusion entries.
//!
//! Every loss here is a function of the four soft confusion sums only, and
//! each sum is linear in the prediction of a pixel:
//!
//! | entry | ∂/∂p for y = 1 | ∂/∂p for y = 0 |
//! |-------|----------------|----------------|
//! | tp    | 1              | 0              |
//! | tn    | 0              | -1             |
//! | fp    | 0              | 1              |
//! | fn    | -1             | 0              |
//!
//! so the per-pixel gradient takes one of two values depending on the label.
//! Losses compute the partials with respect to `(tp, tn, fp, fn)` and spread
//! them over the grid.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::confusion::{soft_confusion, SoftConfusion};
use crate::error::{invalid, Result};
use crate::grid::{ensure_same_shape, BinaryMask, ProbMask};

/// Default denominator smoothing.
pub const DEFAULT_EPSILON: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Mcc,
    Dice,
    Jaccard,
}

impl LossKind {
    pub const ALL: [LossKind; 3] = [LossKind::Mcc, LossKind::Dice, LossKind::Jaccard];

    pub fn name(self) -> &'static str {
        match self {
            LossKind::Mcc => "mcc",
            LossKind::Dice => "dice",
            LossKind::Jaccard => "jaccard",
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LossKind {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mcc" => Ok(LossKind::Mcc),
            "dice" => Ok(LossKind::Dice),
            "jaccard" | "iou" => Ok(LossKind::Jaccard),
            other => Err(invalid(format!("unknown loss kind '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    pub kind: LossKind,
    pub epsilon: f64,
}

impl LossConfig {
    pub fn new(kind: LossKind, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(invalid(format!("epsilon must be positive, got {epsilon}")));
        }
        Ok(Self { kind, epsilon })
    }

    pub fn with_kind(kind: LossKind) -> Self {
        Self {
            kind,
            epsilon: DEFAULT_EPSILON,
        }
    }
}

/// A loss value together with `∂L/∂p` for every pixel.
#[derive(Clone, Debug, PartialEq)]
pub struct LossEval {
    pub value: f64,
    pub grad: Vec<f64>,
    pub height: usize,
    pub width: usize,
}

/// Partial derivatives of a loss with respect to the four confusion sums.
#[derive(Clone, Copy, Debug)]
struct EntryPartials {
    tp: f64,
    tn: f64,
    fp: f64,
    fn_: f64,
}

impl EntryPartials {
    /// Gradient with respect to a foreground / background pixel prediction.
    fn per_class(&self) -> (f64, f64) {
        (self.tp - self.fn_, self.fp - self.tn)
    }
}

/// The product of the four marginals, floored at `eps` so a vanishing
/// marginal never divides by zero. Above the floor the value is exact.
fn mcc_value(c: &SoftConfusion, eps: f64) -> f64 {
    let num = c.tp * c.tn - c.fp * c.fn_;
    let den = ((c.tp + c.fp) * (c.tp + c.fn_) * (c.tn + c.fp) * (c.tn + c.fn_)).max(eps);
    1.0 - num / den.sqrt()
}

fn mcc_partials(c: &SoftConfusion, eps: f64) -> EntryPartials {
    let a = c.tp + c.fp;
    let b = c.tp + c.fn_;
    let cc = c.tn + c.fp;
    let d = c.tn + c.fn_;
    let num = c.tp * c.tn - c.fp * c.fn_;
    let prod = a * b * cc * d;
    let den = prod.max(eps);
    let s = den.sqrt();
    // dMCC/dx = num'/s - num * den' / (2 s^3); the loss is 1 - MCC.
    // On the floor the denominator is constant.
    let k = if prod >= eps { num / (2.0 * den * s) } else { 0.0 };
    let dmcc = |dnum: f64, dden: f64| dnum / s - k * dden;
    EntryPartials {
        tp: -dmcc(c.tn, b * cc * d + a * cc * d),
        tn: -dmcc(c.tp, a * b * d + a * b * cc),
        fp: -dmcc(-c.fn_, b * cc * d + a * b * d),
        fn_: -dmcc(-c.fp, a * cc * d + a * b * cc),
    }
}

fn dice_value(c: &SoftConfusion, eps: f64) -> f64 {
    1.0 - (2.0 * c.tp + eps) / (2.0 * c.tp + c.fp + c.fn_ + eps)
}

fn dice_partials(c: &SoftConfusion, eps: f64) -> EntryPartials {
    let num = 2.0 * c.tp + eps;
    let den = 2.0 * c.tp + c.fp + c.fn_ + eps;
    let q = num / (den * den);
    EntryPartials {
        tp: -(2.0 / den - 2.0 * q),
        tn: 0.0,
        fp: q,
        fn_: q,
    }
}

fn jaccard_value(c: &SoftConfusion, eps: f64) -> f64 {
    1.0 - (c.tp + eps) / (c.tp + c.fp + c.fn_ + eps)
}

fn jaccard_partials(c: &SoftConfusion, eps: f64) -> EntryPartials {
    let num = c.tp + eps;
    let den = c.tp + c.fp + c.fn_ + eps;
    let q = num / (den * den);
    EntryPartials {
        tp: -(1.0 / den - q),
        tn: 0.0,
        fp: q,
        fn_: q,
    }
}

fn checked_confusion(pred: &ProbMask, gt: &BinaryMask) -> Result<SoftConfusion> {
    ensure_same_shape(gt.shape(), pred.shape())?;
    if pred.probs().iter().any(|p| p.is_nan()) {
        return Err(invalid("prediction contains NaN"));
    }
    soft_confusion(pred, gt)
}

fn value_of(kind: LossKind, c: &SoftConfusion, eps: f64) -> f64 {
    match kind {
        LossKind::Mcc => mcc_value(c, eps),
        LossKind::Dice => dice_value(c, eps),
        LossKind::Jaccard => jaccard_value(c, eps),
    }
}

fn partials_of(kind: LossKind, c: &SoftConfusion, eps: f64) -> EntryPartials {
    match kind {
        LossKind::Mcc => mcc_partials(c, eps),
        LossKind::Dice => dice_partials(c, eps),
        LossKind::Jaccard => jaccard_partials(c, eps),
    }
}

fn spread(partials: EntryPartials, gt: &BinaryMask) -> Vec<f64> {
    let (g_fg, g_bg) = partials.per_class();
    gt.labels()
        .iter()
        .map(|&y| if y == 1 { g_fg } else { g_bg })
        .collect()
}

/// Loss value only; skips the gradient grid.
pub fn loss_value(pred: &ProbMask, gt: &BinaryMask, cfg: &LossConfig) -> Result<f64> {
    let c = checked_confusion(pred, gt)?;
    Ok(value_of(cfg.kind, &c, cfg.epsilon))
}

/// Loss value and per-pixel analytic gradient for the configured loss kind.
pub fn evaluate(pred: &ProbMask, gt: &BinaryMask, cfg: &LossConfig) -> Result<LossEval> {
    let c = checked_confusion(pred, gt)?;
    Ok(LossEval {
        value: value_of(cfg.kind, &c, cfg.epsilon),
        grad: spread(partials_of(cfg.kind, &c, cfg.epsilon), gt),
        height: pred.height(),
        width: pred.width(),
    })
}

/// `1 - MCC` on soft confusion entries; the marginal product under the
/// square root is floored at `epsilon`.
pub fn mcc_loss(pred: &ProbMask, gt: &BinaryMask, cfg: &LossConfig) -> Result<LossEval> {
    evaluate(
        pred,
        gt,
        &LossConfig {
            kind: LossKind::Mcc,
            ..*cfg
        },
    )
}

/// `∂(1 - MCC)/∂p` per pixel.
pub fn mcc_loss_gradient(pred: &ProbMask, gt: &BinaryMask, cfg: &LossConfig) -> Result<Vec<f64>> {
    Ok(mcc_loss(pred, gt, cfg)?.grad)
}

/// `1 - (2tp + ε)/(2tp + fp + fn + ε)`.
pub fn dice_loss(pred: &ProbMask, gt: &BinaryMask, cfg: &LossConfig) -> Result<LossEval> {
    evaluate(
        pred,
        gt,
        &LossConfig {
            kind: LossKind::Dice,
            ..*cfg
        },
    )
}

/// `1 - (tp + ε)/(tp + fp + fn + ε)`.
pub fn jaccard_loss(pred: &ProbMask, gt: &BinaryMask, cfg: &LossConfig) -> Result<LossEval> {
    evaluate(
        pred,
        gt,
        &LossConfig {
            kind: LossKind::Jaccard,
            ..*cfg
        },
    )
}

/// Per-image losses averaged over a batch. Each returned gradient grid is
/// already scaled by `1 / batch_len`.
pub fn batch_loss(preds: &[ProbMask], gts: &[BinaryMask], cfg: &LossConfig) -> Result<(f64, Vec<Vec<f64>>)> {
    if preds.is_empty() || preds.len() != gts.len() {
        return Err(invalid(format!(
            "batch needs matching nonempty prediction/target lists, got {} and {}",
            preds.len(),
            gts.len()
        )));
    }
    let scale = 1.0 / preds.len() as f64;
    let mut total = 0.0;
    let mut grads = Vec::with_capacity(preds.len());
    for (p, g) in preds.iter().zip(gts) {
        let mut e = evaluate(p, g, cfg)?;
        total += e.value;
        e.grad.iter_mut().for_each(|v| *v *= scale);
        grads.push(e.grad);
    }
    Ok((total * scale, grads))
}

/// Result of comparing the analytic gradient against central differences.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub max_abs_err: f64,
    pub max_rel_err: f64,
    pub worst_pixel: usize,
}

/// Relative errors are taken against `max(|analytic|, |numeric|, REL_FLOOR)`.
pub const REL_FLOOR: f64 = 1e-8;

/// Compares the analytic gradient of `kind` against
/// `(L(p_i + h) - L(p_i - h)) / 2h` for every pixel.
pub fn grad_check(kind: LossKind, pred: &ProbMask, gt: &BinaryMask, step: f64) -> Result<GradCheckReport> {
    if !(step > 0.0 && step < 0.5) {
        return Err(invalid(format!("finite-difference step {step} out of range")));
    }
    if let Some(p) = pred.probs().iter().find(|&&p| p <= step || p >= 1.0 - step) {
        return Err(invalid(format!(
            "prediction {p} not strictly inside ({step}, {})",
            1.0 - step
        )));
    }
    let cfg = LossConfig::with_kind(kind);
    let analytic = evaluate(pred, gt, &cfg)?.grad;
    let mut report = GradCheckReport {
        max_abs_err: 0.0,
        max_rel_err: 0.0,
        worst_pixel: 0,
    };
    for (i, (&p, &a)) in pred.probs().iter().zip(&analytic).enumerate() {
        let up = loss_value(&pred.with_pixel(i, p + step), gt, &cfg)?;
        let down = loss_value(&pred.with_pixel(i, p - step), gt, &cfg)?;
        let numeric = (up - down) / (2.0 * step);
        let abs = (a - numeric).abs();
        let rel = abs / a.abs().max(numeric.abs()).max(REL_FLOOR);
        report.max_abs_err = report.max_abs_err.max(abs);
        if rel > report.max_rel_err || i == 0 {
            report.max_rel_err = rel;
            report.worst_pixel = i;
        }
    }
    Ok(report)
}

/// Random gradient-check instances: grids with sides drawn from
/// `min_side..=max_side`, predictions uniform in `(0.1, 0.9)`, and ground
/// truths that always contain both classes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradSuiteConfig {
    pub cases: usize,
    pub min_side: usize,
    pub max_side: usize,
    pub step: f64,
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for GradSuiteConfig {
    fn default() -> Self {
        Self {
            cases: 100,
            min_side: 4,
            max_side: 16,
            step: 1e-5,
            tolerance: 1e-5,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradSuiteResult {
    pub kind: LossKind,
    pub cases: usize,
    pub max_abs_err: f64,
    pub max_rel_err: f64,
    /// Case index holding `max_rel_err`.
    pub worst_case: usize,
    pub passed: bool,
}

/// Draws one instance for [`run_grad_suite`].
pub fn random_grad_instance<R: Rng + ?Sized>(
    rng: &mut R,
    min_side: usize,
    max_side: usize,
) -> Result<(ProbMask, BinaryMask)> {
    if min_side == 0 || min_side > max_side || max_side * max_side < 2 {
        return Err(invalid(format!("bad side range {min_side}..={max_side}")));
    }
    let (h, w) = loop {
        let h = rng.random_range(min_side..=max_side);
        let w = rng.random_range(min_side..=max_side);
        if h * w >= 2 {
            break (h, w);
        }
    };
    let probs = (0..h * w).map(|_| rng.random_range(0.1..0.9)).collect();
    let mut labels: Vec<u8> = (0..h * w).map(|_| rng.random_range(0..=1)).collect();
    if labels.iter().all(|&l| l == labels[0]) {
        let i = rng.random_range(0..labels.len());
        labels[i] = 1 - labels[i];
    }
    Ok((ProbMask::new(h, w, probs)?, BinaryMask::new(h, w, labels)?))
}

/// Gradient checks on `cfg.cases` random instances for one loss.
pub fn run_grad_suite(kind: LossKind, cfg: &GradSuiteConfig) -> Result<GradSuiteResult> {
    if cfg.tolerance.is_nan() || cfg.tolerance <= 0.0 {
        return Err(invalid("tolerance must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = GradSuiteResult {
        kind,
        cases: cfg.cases,
        max_abs_err: 0.0,
        max_rel_err: 0.0,
        worst_case: 0,
        passed: true,
    };
    for case in 0..cfg.cases {
        let (pred, gt) = random_grad_instance(&mut rng, cfg.min_side, cfg.max_side)?;
        let r = grad_check(kind, &pred, &gt, cfg.step)?;
        out.max_abs_err = out.max_abs_err.max(r.max_abs_err);
        if r.max_rel_err > out.max_rel_err {
            out.max_rel_err = r.max_rel_err;
            out.worst_case = case;
        }
    }
    out.passed = out.max_rel_err <= cfg.tolerance;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::confusion::hard_confusion;
    use crate::error::Error;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn row_mask(labels: &[u8]) -> BinaryMask {
        BinaryMask::new(1, labels.len(), labels.to_vec()).unwrap()
    }

    fn cfg(kind: LossKind) -> LossConfig {
        LossConfig::with_kind(kind)
    }

    fn random_instance(rng: &mut ChaCha8Rng, h: usize, w: usize) -> (ProbMask, BinaryMask) {
        let probs = (0..h * w).map(|_| rng.random_range(0.1..0.9)).collect();
        let mut labels: Vec<u8> = (0..h * w).map(|_| u8::from(rng.random_bool(0.3))).collect();
        labels[0] = 1;
        labels[1] = 0;
        (
            ProbMask::new(h, w, probs).unwrap(),
            BinaryMask::new(h, w, labels).unwrap(),
        )
    }

    #[test]
    fn small_suite_passes_for_every_loss() {
        let cfg = GradSuiteConfig {
            cases: 5,
            ..GradSuiteConfig::default()
        };
        for kind in LossKind::ALL {
            let r = run_grad_suite(kind, &cfg).unwrap();
            assert!(r.passed, "{kind}: {r:?}");
        }
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let (_, gt) = random_grad_instance(&mut rng, 1, 2).unwrap();
            assert!(gt.foreground_count() > 0 && gt.foreground_count() < gt.len());
        }
    }

    #[test]
    fn mcc_anchor_instance() {
        let pred = row_mask(&[1, 0, 0, 0]).to_prob();
        let gt = row_mask(&[1, 1, 0, 0]);
        let e = mcc_loss(&pred, &gt, &cfg(LossKind::Mcc)).unwrap();
        // counts (1, 2, 0, 1): MCC = (1*2 - 0)/sqrt(1*2*2*3) = 2/sqrt(12)
        let expected = 1.0 - 2.0 / 12f64.sqrt();
        assert!((e.value - expected).abs() < 1e-9, "{}", e.value);
    }

    #[test]
    fn mcc_perfect_and_inverted() {
        let gt = row_mask(&[1, 0, 0, 1, 0, 0, 0, 0]);
        let c = cfg(LossKind::Mcc);
        assert!(mcc_loss(&gt.to_prob(), &gt, &c).unwrap().value <= 1e-6);
        assert!(mcc_loss(&gt.inverted().to_prob(), &gt, &c).unwrap().value >= 2.0 - 1e-6);
        let g = mcc_loss_gradient(&gt.to_prob(), &gt, &c).unwrap();
        assert!(g.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn mcc_degenerate_marginals_are_finite() {
        let gt = BinaryMask::zeros(4, 4).unwrap();
        let c = cfg(LossKind::Mcc);
        for p in [0.0, 0.3, 1.0] {
            let e = mcc_loss(&ProbMask::filled(4, 4, p).unwrap(), &gt, &c).unwrap();
            assert!(e.value.is_finite());
            assert!(e.grad.iter().all(|v| v.is_finite()));
        }
    }

    #[test]
    fn constant_background_gt_matches_differences() {
        let gt = BinaryMask::zeros(3, 3).unwrap();
        let pred = ProbMask::new(3, 3, (1..=9).map(|i| 0.05 + 0.1 * i as f64 / 1.1).collect()).unwrap();
        let r = grad_check(LossKind::Mcc, &pred, &gt, 1e-5).unwrap();
        assert!(r.max_abs_err < 1e-6, "{r:?}");
    }

    #[test]
    fn dice_and_jaccard_anchors() {
        let pred = row_mask(&[1, 0, 0, 0]).to_prob();
        let gt = row_mask(&[1, 1, 0, 0]);
        let d = dice_loss(&pred, &gt, &cfg(LossKind::Dice)).unwrap().value;
        let j = jaccard_loss(&pred, &gt, &cfg(LossKind::Jaccard)).unwrap().value;
        assert!((d - 1.0 / 3.0).abs() < 1e-6);
        assert!((j - 0.5).abs() < 1e-6);

        let empty = BinaryMask::zeros(2, 2).unwrap();
        assert_eq!(
            dice_loss(&empty.to_prob(), &empty, &cfg(LossKind::Dice))
                .unwrap()
                .value,
            0.0
        );

        let a = row_mask(&[1, 1, 0, 0]);
        let b = row_mask(&[0, 0, 1, 1]);
        let j = jaccard_loss(&a.to_prob(), &b, &cfg(LossKind::Jaccard))
            .unwrap()
            .value;
        assert!((j - 1.0).abs() < 1e-6);
        assert!(dice_loss(&b.to_prob(), &b, &cfg(LossKind::Dice)).unwrap().value <= 1e-6);
        assert!(
            jaccard_loss(&b.to_prob(), &b, &cfg(LossKind::Jaccard))
                .unwrap()
                .value
                <= 1e-6
        );
    }

    #[test]
    fn errors() {
        let gt = BinaryMask::zeros(2, 2).unwrap();
        let pred = ProbMask::filled(1, 4, 0.5).unwrap();
        assert!(matches!(
            mcc_loss(&pred, &gt, &cfg(LossKind::Mcc)),
            Err(Error::ShapeMismatch { .. })
        ));
        let nan = ProbMask::filled(2, 2, 0.5).unwrap().with_pixel(1, f64::NAN);
        assert!(matches!(
            mcc_loss(&nan, &gt, &cfg(LossKind::Mcc)),
            Err(Error::InvalidArgument(_))
        ));
        assert!(LossConfig::new(LossKind::Mcc, 0.0).is_err());
        assert!("focal".parse::<LossKind>().is_err());
        assert_eq!("MCC".parse::<LossKind>().unwrap(), LossKind::Mcc);
    }

    #[test]
    fn grad_check_rejects_boundary_predictions() {
        let gt = row_mask(&[1, 0]);
        let pred = ProbMask::new(1, 2, vec![0.5, 1.0]).unwrap();
        assert!(grad_check(LossKind::Mcc, &pred, &gt, 1e-5).is_err());
    }

    #[test]
    fn grad_check_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for kind in LossKind::ALL {
            let (pred, gt) = random_instance(&mut rng, 8, 8);
            let r = grad_check(kind, &pred, &gt, 1e-5).unwrap();
            assert!(r.max_rel_err < 1e-5, "{kind}: {r:?}");
        }
    }

    #[test]
    fn grad_check_constant_half_prediction() {
        let gt = row_mask(&[1, 0, 1, 0, 0, 0]);
        let pred = ProbMask::filled(1, 6, 0.5).unwrap();
        for kind in LossKind::ALL {
            let r = grad_check(kind, &pred, &gt, 1e-5).unwrap();
            assert!(r.max_abs_err.is_finite() && r.max_rel_err.is_finite());
        }
    }

    #[test]
    fn mcc_is_class_symmetric_dice_is_not() {
        // 2 foreground pixels out of 10
        let gt = row_mask(&[1, 1, 0, 0, 0, 0, 0, 0, 0, 0]);
        let pred = ProbMask::new(1, 10, vec![0.9, 0.4, 0.2, 0.1, 0.3, 0.1, 0.1, 0.2, 0.6, 0.1]).unwrap();
        let inv_pred = pred.complement();
        let inv_gt = gt.inverted();
        let m = |p: &ProbMask, g: &BinaryMask| mcc_loss(p, g, &cfg(LossKind::Mcc)).unwrap().value;
        let d = |p: &ProbMask, g: &BinaryMask| dice_loss(p, g, &cfg(LossKind::Dice)).unwrap().value;
        assert!((m(&pred, &gt) - m(&inv_pred, &inv_gt)).abs() < 1e-9);
        assert!((d(&pred, &gt) - d(&inv_pred, &inv_gt)).abs() > 0.1);
    }

    #[test]
    fn batch_loss_averages() {
        let gt = row_mask(&[1, 0, 0, 0]);
        let p1 = gt.to_prob();
        let p2 = gt.inverted().to_prob();
        let c = cfg(LossKind::Mcc);
        let (v, grads) = batch_loss(&[p1.clone(), p2.clone()], &[gt.clone(), gt.clone()], &c).unwrap();
        assert!((v - 1.0).abs() < 1e-6);
        let g1 = evaluate(&p1, &gt, &c).unwrap().grad;
        assert!((grads[0][0] - 0.5 * g1[0]).abs() < 1e-15);
        assert!(batch_loss(&[], &[], &c).is_err());
    }

    proptest! {
        #[test]
        fn mcc_loss_stays_in_range(
            probs in proptest::collection::vec(0.0..=1.0f64, 16),
            labels in proptest::collection::vec(0u8..=1, 16),
        ) {
            let pred = ProbMask::new(4, 4, probs).unwrap();
            let gt = BinaryMask::new(4, 4, labels).unwrap();
            let v = mcc_loss(&pred, &gt, &cfg(LossKind::Mcc)).unwrap().value;
            prop_assert!((-1e-6..=2.0 + 1e-6).contains(&v));
        }

        #[test]
        fn dice_jaccard_monotone_relation(
            probs in proptest::collection::vec(0.0..=1.0f64, 16),
            labels in proptest::collection::vec(0u8..=1, 16),
        ) {
            let pred = ProbMask::new(4, 4, probs).unwrap();
            let gt = BinaryMask::new(4, 4, labels).unwrap();
            // unsmoothed scores from the soft entries
            let c = soft_confusion(&pred, &gt).unwrap();
            prop_assume!(c.tp + c.fp + c.fn_ > 1e-3);
            let dsc = 2.0 * c.tp / (2.0 * c.tp + c.fp + c.fn_);
            let jac = c.tp / (c.tp + c.fp + c.fn_);
            prop_assert!((dsc - 2.0 * jac / (1.0 + jac)).abs() < 1e-12);
            // smoothed losses agree up to epsilon slack
            let d = 1.0 - dice_loss(&pred, &gt, &cfg(LossKind::Dice)).unwrap().value;
            let j = 1.0 - jaccard_loss(&pred, &gt, &cfg(LossKind::Jaccard)).unwrap().value;
            prop_assert!((d - 2.0 * j / (1.0 + j)).abs() < 1e-5);
        }

        #[test]
        fn binary_mcc_loss_matches_counts(
            p in proptest::collection::vec(0u8..=1, 16),
            y in proptest::collection::vec(0u8..=1, 16),
        ) {
            let pred = BinaryMask::new(4, 4, p).unwrap();
            let gt = BinaryMask::new(4, 4, y).unwrap();
            let h = SoftConfusion::from(hard_confusion(&pred, &gt).unwrap());
            let v = mcc_loss(&pred.to_prob(), &gt, &cfg(LossKind::Mcc)).unwrap().value;
            prop_assert!((v - mcc_value(&h, DEFAULT_EPSILON)).abs() < 1e-12);
        }
    }
}
