use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layers::{
    concat_channels, max_pool2, max_pool2_backward, relu_backward_inplace, relu_inplace, sigmoid,
    split_channels, upsample2, upsample2_backward, Conv2d, ConvGrad, FeatureMap,
};
use crate::error::{invalid, Error, Result};
use crate::grid::{Image, ProbMask};

/// Topology tag written into checkpoints.
pub const TOPOLOGY: &str = "segnet-small-v1";

/// Layer names in declaration order.
pub const LAYER_NAMES: [&str; 6] = ["enc1", "enc2", "bottleneck", "dec1", "dec2", "head"];

const ENC1: usize = 8;
const ENC2: usize = 16;
const BOTTLENECK: usize = 16;
const DEC1: usize = 16;
const DEC2: usize = 8;

/// Output probabilities are kept this far away from 0 and 1.
const PROB_MARGIN: f64 = 1e-12;

/// Two-level encoder-decoder with one full-resolution skip connection and a
/// logistic 1x1 head.
///
/// ```text
/// x ─ conv3(8) ─ relu ─┬─ pool ─ conv3(16) ─ relu ─ pool ─ conv3(16) ─ relu
///                      │                                              │
///                      │                    conv3(16) ─ relu ─ up ────┘
///                      │                         │
///                      └──── concat ─── up ──────┘
///                              │
///                   conv3(8) ─ relu ─ conv1(1) ─ sigmoid
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegNetSmall {
    pub in_channels: usize,
    /// In [`LAYER_NAMES`] order.
    pub layers: Vec<Conv2d>,
    #[serde(skip)]
    generation: u64,
}

/// Per-layer gradients, in [`LAYER_NAMES`] order.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub layers: Vec<ConvGrad>,
}

impl Gradients {
    pub fn zeros_like(net: &SegNetSmall) -> Self {
        Self {
            layers: net.layers.iter().map(ConvGrad::zeros_like).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weight.iter_mut().zip(&b.weight).for_each(|(x, y)| *x += y);
            a.bias.iter_mut().zip(&b.bias).for_each(|(x, y)| *x += y);
        }
    }

    pub fn scale(&mut self, s: f64) {
        for l in &mut self.layers {
            l.weight.iter_mut().chain(l.bias.iter_mut()).for_each(|v| *v *= s);
        }
    }

    pub fn flat(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weight.iter().chain(&l.bias).copied())
            .collect()
    }
}

/// Activations recorded by [`SegNetSmall::forward`] for the backward pass.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    generation: u64,
    input: FeatureMap,
    e1: FeatureMap,
    pool1: Vec<usize>,
    p1: FeatureMap,
    e2: FeatureMap,
    pool2: Vec<usize>,
    p2: FeatureMap,
    b: FeatureMap,
    u1: FeatureMap,
    d1: FeatureMap,
    cat: FeatureMap,
    d2: FeatureMap,
    out: Vec<f64>,
}

impl SegNetSmall {
    pub fn new(in_channels: usize, seed: u64) -> Result<Self> {
        if in_channels == 0 {
            return Err(invalid("network needs at least one input channel"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = vec![
            Conv2d::init(in_channels, ENC1, 3, &mut rng),
            Conv2d::init(ENC1, ENC2, 3, &mut rng),
            Conv2d::init(ENC2, BOTTLENECK, 3, &mut rng),
            Conv2d::init(BOTTLENECK, DEC1, 3, &mut rng),
            Conv2d::init(DEC1 + ENC1, DEC2, 3, &mut rng),
            Conv2d::init(DEC2, 1, 1, &mut rng),
        ];
        Ok(Self {
            in_channels,
            layers,
            generation: 0,
        })
    }

    /// Rebuilds a network from stored layers, checking them against the
    /// fixed topology.
    pub fn from_layers(in_channels: usize, layers: Vec<Conv2d>) -> Result<Self> {
        let template = Self::new(in_channels, 0)?;
        if layers.len() != template.layers.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} layers, found {}",
                template.layers.len(),
                layers.len()
            )));
        }
        for ((name, t), l) in LAYER_NAMES.iter().zip(&template.layers).zip(&layers) {
            let ok = t.in_channels == l.in_channels
                && t.out_channels == l.out_channels
                && t.kernel == l.kernel
                && t.weight.len() == l.weight.len()
                && t.bias.len() == l.bias.len();
            if !ok {
                return Err(Error::Checkpoint(format!("layer {name} does not match topology")));
            }
        }
        Ok(Self {
            in_channels,
            layers,
            generation: 0,
        })
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Conv2d::param_count).sum()
    }

    pub fn flat_params(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weight.iter().chain(&l.bias).copied())
            .collect()
    }

    fn check_input(&self, img: &Image) -> Result<()> {
        if img.channels() != self.in_channels {
            return Err(invalid(format!(
                "network expects {} channels, image has {}",
                self.in_channels,
                img.channels()
            )));
        }
        if !img.height().is_multiple_of(4) || !img.width().is_multiple_of(4) {
            return Err(invalid(format!(
                "spatial size {}x{} must be divisible by 4",
                img.height(),
                img.width()
            )));
        }
        Ok(())
    }

    pub fn forward(&self, img: &Image) -> Result<(ProbMask, ForwardCache)> {
        self.check_input(img)?;
        let input = FeatureMap {
            channels: img.channels(),
            height: img.height(),
            width: img.width(),
            data: img.values().to_vec(),
        };
        let [enc1, enc2, bottleneck, dec1, dec2, head] = self.layers_array();

        let mut e1 = enc1.forward(&input);
        relu_inplace(&mut e1);
        let (p1, pool1) = max_pool2(&e1);
        let mut e2 = enc2.forward(&p1);
        relu_inplace(&mut e2);
        let (p2, pool2) = max_pool2(&e2);
        let mut b = bottleneck.forward(&p2);
        relu_inplace(&mut b);
        let u1 = upsample2(&b);
        let mut d1 = dec1.forward(&u1);
        relu_inplace(&mut d1);
        let cat = concat_channels(&upsample2(&d1), &e1);
        let mut d2 = dec2.forward(&cat);
        relu_inplace(&mut d2);
        let logits = head.forward(&d2);
        let out: Vec<f64> = logits
            .data
            .iter()
            .map(|&z| sigmoid(z).clamp(PROB_MARGIN, 1.0 - PROB_MARGIN))
            .collect();

        let pred = ProbMask::new(img.height(), img.width(), out.clone())?;
        let cache = ForwardCache {
            generation: self.generation,
            input,
            e1,
            pool1,
            p1,
            e2,
            pool2,
            p2,
            b,
            u1,
            d1,
            cat,
            d2,
            out,
        };
        Ok((pred, cache))
    }

    pub fn predict(&self, img: &Image) -> Result<ProbMask> {
        Ok(self.forward(img)?.0)
    }

    /// Parameter gradients for a per-pixel output gradient `dL/dp`.
    pub fn backward(&self, cache: &ForwardCache, loss_grad: &[f64]) -> Result<Gradients> {
        if cache.generation != self.generation {
            return Err(Error::InvalidState(
                "forward cache predates the current parameters".into(),
            ));
        }
        if loss_grad.len() != cache.out.len() {
            return Err(Error::InvalidState(format!(
                "loss gradient has {} entries, cache has {} outputs",
                loss_grad.len(),
                cache.out.len()
            )));
        }
        let [enc1, enc2, bottleneck, dec1, dec2, head] = self.layers_array();
        let mut grads = Gradients::zeros_like(self);
        let (h, w) = (cache.input.height, cache.input.width);

        let dlogit = FeatureMap {
            channels: 1,
            height: h,
            width: w,
            data: loss_grad
                .iter()
                .zip(&cache.out)
                .map(|(g, p)| g * p * (1.0 - p))
                .collect(),
        };
        let mut g = head
            .backward(&cache.d2, &dlogit, &mut grads.layers[5], true)
            .unwrap();
        relu_backward_inplace(&mut g, &cache.d2);
        let gcat = dec2.backward(&cache.cat, &g, &mut grads.layers[4], true).unwrap();
        let (gu2, mut ge1) = split_channels(&gcat, DEC1);
        let mut g = upsample2_backward(&gu2);
        relu_backward_inplace(&mut g, &cache.d1);
        let gu1 = dec1.backward(&cache.u1, &g, &mut grads.layers[3], true).unwrap();
        let mut g = upsample2_backward(&gu1);
        relu_backward_inplace(&mut g, &cache.b);
        let gp2 = bottleneck
            .backward(&cache.p2, &g, &mut grads.layers[2], true)
            .unwrap();
        let mut g = max_pool2_backward(&gp2, &cache.pool2, cache.e2.height, cache.e2.width);
        relu_backward_inplace(&mut g, &cache.e2);
        let gp1 = enc2.backward(&cache.p1, &g, &mut grads.layers[1], true).unwrap();
        let g = max_pool2_backward(&gp1, &cache.pool1, h, w);
        ge1.data.iter_mut().zip(&g.data).for_each(|(a, b)| *a += b);
        relu_backward_inplace(&mut ge1, &cache.e1);
        enc1.backward(&cache.input, &ge1, &mut grads.layers[0], false);
        Ok(grads)
    }

    /// `θ ← θ - lr · ∂L/∂θ` for every parameter.
    pub fn sgd_step(&mut self, grads: &Gradients, lr: f64) -> Result<()> {
        if !(lr >= 0.0 && lr.is_finite()) {
            return Err(invalid(format!("learning rate must be nonnegative, got {lr}")));
        }
        if grads.layers.len() != self.layers.len()
            || grads
                .layers
                .iter()
                .zip(&self.layers)
                .any(|(g, l)| g.weight.len() != l.weight.len() || g.bias.len() != l.bias.len())
        {
            return Err(invalid("gradient shapes do not match parameters"));
        }
        for (l, g) in self.layers.iter_mut().zip(&grads.layers) {
            l.weight.iter_mut().zip(&g.weight).for_each(|(p, d)| *p -= lr * d);
            l.bias.iter_mut().zip(&g.bias).for_each(|(p, d)| *p -= lr * d);
        }
        self.generation += 1;
        Ok(())
    }

    fn layers_array(&self) -> [&Conv2d; 6] {
        let l = &self.layers;
        [&l[0], &l[1], &l[2], &l[3], &l[4], &l[5]]
    }
}
