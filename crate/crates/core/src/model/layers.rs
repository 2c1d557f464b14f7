//! Channel-major feature maps and the handful of layer kernels the network
//! needs, each with a hand-written backward pass.

use rand::Rng;
use serde::{Deserialize, Serialize};

/// A `channels x height x width` feature map for one image.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMap {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl FeatureMap {
    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self {
            channels,
            height,
            width,
            data: vec![0.0; channels * height * width],
        }
    }

    pub fn plane_len(&self) -> usize {
        self.height * self.width
    }

    pub fn plane(&self, c: usize) -> &[f64] {
        let n = self.plane_len();
        &self.data[c * n..(c + 1) * n]
    }

    pub fn plane_mut(&mut self, c: usize) -> &mut [f64] {
        let n = self.plane_len();
        &mut self.data[c * n..(c + 1) * n]
    }
}

/// Square convolution with stride 1 and zero "same" padding.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Conv2d {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    /// `[out][in][ky][kx]`
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Gradients for one [`Conv2d`].
#[derive(Clone, Debug, PartialEq)]
pub struct ConvGrad {
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl ConvGrad {
    pub fn zeros_like(conv: &Conv2d) -> Self {
        Self {
            weight: vec![0.0; conv.weight.len()],
            bias: vec![0.0; conv.bias.len()],
        }
    }
}

impl Conv2d {
    /// Uniform in `±sqrt(6 / (fan_in + fan_out))`, zero biases.
    pub fn init<R: Rng + ?Sized>(
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        rng: &mut R,
    ) -> Self {
        let k2 = kernel * kernel;
        let limit = (6.0 / ((in_channels + out_channels) * k2) as f64).sqrt();
        let weight = (0..out_channels * in_channels * k2)
            .map(|_| rng.random_range(-limit..=limit))
            .collect();
        Self {
            in_channels,
            out_channels,
            kernel,
            weight,
            bias: vec![0.0; out_channels],
        }
    }

    pub fn param_count(&self) -> usize {
        self.weight.len() + self.bias.len()
    }

    #[cfg(test)]
    fn w_index(&self, o: usize, i: usize, ky: usize, kx: usize) -> usize {
        ((o * self.in_channels + i) * self.kernel + ky) * self.kernel + kx
    }

    /// Copies `input` into zero-padded planes of size `(h + 2p) x (w + 2p)`.
    fn pad(&self, input: &FeatureMap) -> Vec<f64> {
        let p = self.kernel / 2;
        let (h, w) = (input.height, input.width);
        let wp = w + 2 * p;
        let plane = (h + 2 * p) * wp;
        let mut padded = vec![0.0; input.channels * plane];
        for c in 0..input.channels {
            let src = input.plane(c);
            let dst = &mut padded[c * plane..(c + 1) * plane];
            for y in 0..h {
                dst[(y + p) * wp + p..][..w].copy_from_slice(&src[y * w..(y + 1) * w]);
            }
        }
        padded
    }

    /// Output positions are laid out with the padded row stride, so every tap
    /// becomes one contiguous shifted slice of the padded input. Returns the
    /// stride and the number of strided positions that cover the output.
    fn strided_span(&self, h: usize, w: usize) -> (usize, usize) {
        let wp = w + 2 * (self.kernel / 2);
        (wp, (h - 1) * wp + w)
    }

    /// Offset of tap `t = ky * kernel + kx` within a padded plane.
    fn tap_offset(&self, t: usize, wp: usize) -> usize {
        (t / self.kernel) * wp + t % self.kernel
    }

    /// Each tap is one product of the `out x in` weight slice with the
    /// shifted padded input, read as an `in x span` matrix of row stride
    /// `plane`.
    pub fn forward(&self, input: &FeatureMap) -> FeatureMap {
        debug_assert_eq!(input.channels, self.in_channels);
        let (h, w) = (input.height, input.width);
        let p = self.kernel / 2;
        let k2 = self.kernel * self.kernel;
        let plane = (h + 2 * p) * (w + 2 * p);
        let (wp, span) = self.strided_span(h, w);
        let padded = self.pad(input);
        let mut acc = vec![0.0; self.out_channels * span];
        for (row, b) in acc.chunks_exact_mut(span).zip(&self.bias) {
            row.fill(*b);
        }
        for t in 0..k2 {
            gemm(
                (self.out_channels, self.in_channels, span),
                (&self.weight[t..], self.in_channels * k2, k2),
                (&padded[self.tap_offset(t, wp)..], plane, 1),
                (&mut acc, span, 1),
            );
        }
        let mut out = FeatureMap::zeros(self.out_channels, h, w);
        for o in 0..self.out_channels {
            let src = &acc[o * span..(o + 1) * span];
            let dst = out.plane_mut(o);
            for y in 0..h {
                dst[y * w..(y + 1) * w].copy_from_slice(&src[y * wp..y * wp + w]);
            }
        }
        out
    }

    /// Accumulates parameter gradients into `grad` and returns the gradient
    /// with respect to `input` when `want_input` is set.
    pub fn backward(
        &self,
        input: &FeatureMap,
        grad_out: &FeatureMap,
        grad: &mut ConvGrad,
        want_input: bool,
    ) -> Option<FeatureMap> {
        let (h, w) = (input.height, input.width);
        let p = self.kernel / 2;
        let k2 = self.kernel * self.kernel;
        let plane = (h + 2 * p) * (w + 2 * p);
        let (wp, span) = self.strided_span(h, w);
        let padded = self.pad(input);

        // strided copy of the output gradient; the gap columns stay zero
        let mut go = vec![0.0; self.out_channels * span];
        for o in 0..self.out_channels {
            let g = grad_out.plane(o);
            grad.bias[o] += g.iter().sum::<f64>();
            let dst = &mut go[o * span..(o + 1) * span];
            for y in 0..h {
                dst[y * wp..y * wp + w].copy_from_slice(&g[y * w..(y + 1) * w]);
            }
        }
        let mut grad_pad = want_input.then(|| vec![0.0; self.in_channels * plane]);
        for t in 0..k2 {
            let off = self.tap_offset(t, wp);
            // dW[:, :, t] += go * shifted^T
            gemm(
                (self.out_channels, span, self.in_channels),
                (&go, span, 1),
                (&padded[off..], 1, plane),
                (&mut grad.weight[t..], self.in_channels * k2, k2),
            );
            // shifted gradient += W[:, :, t]^T * go
            if let Some(gp) = grad_pad.as_mut() {
                gemm(
                    (self.in_channels, self.out_channels, span),
                    (&self.weight[t..], k2, self.in_channels * k2),
                    (&go, span, 1),
                    (&mut gp[off..], plane, 1),
                );
            }
        }
        grad_pad.map(|gp| {
            let mut gi = FeatureMap::zeros(self.in_channels, h, w);
            for i in 0..self.in_channels {
                let src = &gp[i * plane..(i + 1) * plane];
                let dst = gi.plane_mut(i);
                for y in 0..h {
                    dst[y * w..(y + 1) * w].copy_from_slice(&src[(y + p) * wp + p..][..w]);
                }
            }
            gi
        })
    }
}

/// `c += a * b` for an `m x k` by `k x n` product, each matrix given with
/// its row and column strides.
fn gemm(
    (m, k, n): (usize, usize, usize),
    (a, rsa, csa): (&[f64], usize, usize),
    (b, rsb, csb): (&[f64], usize, usize),
    (c, rsc, csc): (&mut [f64], usize, usize),
) {
    let last = |rows: usize, cols: usize, rs: usize, cs: usize| {
        (rows > 0 && cols > 0).then(|| (rows - 1) * rs + (cols - 1) * cs)
    };
    assert!(last(m, k, rsa, csa).is_none_or(|i| i < a.len()));
    assert!(last(k, n, rsb, csb).is_none_or(|i| i < b.len()));
    assert!(last(m, n, rsc, csc).is_none_or(|i| i < c.len()));
    // SAFETY: the assertions above keep every strided access in bounds, and
    // `c` is a unique borrow that does not alias `a` or `b`.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            1.0,
            c.as_mut_ptr(),
            rsc as isize,
            csc as isize,
        );
    }
}

pub fn relu_inplace(x: &mut FeatureMap) {
    x.data.iter_mut().for_each(|v| *v = v.max(0.0));
}

/// Zeroes gradient entries where the rectifier output was not positive.
pub fn relu_backward_inplace(grad: &mut FeatureMap, output: &FeatureMap) {
    for (g, o) in grad.data.iter_mut().zip(&output.data) {
        if *o <= 0.0 {
            *g = 0.0;
        }
    }
}

/// 2x2 max pooling. Returns the pooled map and the flat argmax index of each
/// pooled cell within its input plane.
pub fn max_pool2(input: &FeatureMap) -> (FeatureMap, Vec<usize>) {
    let (h, w) = (input.height / 2, input.width / 2);
    let mut out = FeatureMap::zeros(input.channels, h, w);
    let mut argmax = Vec::with_capacity(input.channels * h * w);
    for c in 0..input.channels {
        let src = input.plane(c);
        let dst = out.plane_mut(c);
        for y in 0..h {
            for x in 0..w {
                let base = 2 * y * input.width + 2 * x;
                let cands = [base, base + 1, base + input.width, base + input.width + 1];
                let mut best = cands[0];
                for &idx in &cands[1..] {
                    if src[idx] > src[best] {
                        best = idx;
                    }
                }
                dst[y * w + x] = src[best];
                argmax.push(best);
            }
        }
    }
    (out, argmax)
}

pub fn max_pool2_backward(
    grad_out: &FeatureMap,
    argmax: &[usize],
    height: usize,
    width: usize,
) -> FeatureMap {
    let mut grad_in = FeatureMap::zeros(grad_out.channels, height, width);
    let n = grad_out.plane_len();
    for c in 0..grad_out.channels {
        let g = grad_out.plane(c);
        let idx = &argmax[c * n..(c + 1) * n];
        let dst = grad_in.plane_mut(c);
        for (gv, &i) in g.iter().zip(idx) {
            dst[i] += gv;
        }
    }
    grad_in
}

/// 2x nearest-neighbor upsampling.
pub fn upsample2(input: &FeatureMap) -> FeatureMap {
    let (h, w) = (input.height * 2, input.width * 2);
    let mut out = FeatureMap::zeros(input.channels, h, w);
    for c in 0..input.channels {
        let src = input.plane(c);
        let dst = out.plane_mut(c);
        for y in 0..h {
            let row = &src[(y / 2) * input.width..][..input.width];
            for (x, d) in dst[y * w..(y + 1) * w].iter_mut().enumerate() {
                *d = row[x / 2];
            }
        }
    }
    out
}

/// Sums each 2x2 block of the gradient.
pub fn upsample2_backward(grad_out: &FeatureMap) -> FeatureMap {
    let (h, w) = (grad_out.height / 2, grad_out.width / 2);
    let mut grad_in = FeatureMap::zeros(grad_out.channels, h, w);
    for c in 0..grad_out.channels {
        let src = grad_out.plane(c);
        let dst = grad_in.plane_mut(c);
        for y in 0..grad_out.height {
            for x in 0..grad_out.width {
                dst[(y / 2) * w + x / 2] += src[y * grad_out.width + x];
            }
        }
    }
    grad_in
}

/// Stacks `a` then `b` along the channel axis.
pub fn concat_channels(a: &FeatureMap, b: &FeatureMap) -> FeatureMap {
    debug_assert_eq!((a.height, a.width), (b.height, b.width));
    let mut data = Vec::with_capacity(a.data.len() + b.data.len());
    data.extend_from_slice(&a.data);
    data.extend_from_slice(&b.data);
    FeatureMap {
        channels: a.channels + b.channels,
        height: a.height,
        width: a.width,
        data,
    }
}

/// Inverse of [`concat_channels`] for gradients.
pub fn split_channels(x: &FeatureMap, first: usize) -> (FeatureMap, FeatureMap) {
    let cut = first * x.plane_len();
    let a = FeatureMap {
        channels: first,
        height: x.height,
        width: x.width,
        data: x.data[..cut].to_vec(),
    };
    let b = FeatureMap {
        channels: x.channels - first,
        height: x.height,
        width: x.width,
        data: x.data[cut..].to_vec(),
    };
    (a, b)
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
