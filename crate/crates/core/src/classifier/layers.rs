//! Batched layer kernels. Activations are `[batch, channels, height, width]`
//! or `[batch, features]`, flattened row-major.

use serde::{Deserialize, Serialize};

use super::tensor::Tensor;

pub const KERNEL: usize = 3;

/// 3×3 convolution, stride 1, no padding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conv2d {
    /// `[out, in, 3, 3]`
    pub weight: Tensor,
    /// `[out]`
    pub bias: Tensor,
}

impl Conv2d {
    pub fn zeros(in_ch: usize, out_ch: usize) -> Self {
        Self {
            weight: Tensor::zeros(&[out_ch, in_ch, KERNEL, KERNEL]),
            bias: Tensor::zeros(&[out_ch]),
        }
    }

    pub fn out_channels(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn in_channels(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn forward(&self, x: &[f64], n: usize, h: usize, w: usize) -> Vec<f64> {
        let (ci, co) = (self.in_channels(), self.out_channels());
        let (oh, ow) = (h - KERNEL + 1, w - KERNEL + 1);
        let wt = self.weight.data();
        let b = self.bias.data();
        let mut out = vec![0.0; n * co * oh * ow];
        for s in 0..n {
            for o in 0..co {
                let out_plane = &mut out[(s * co + o) * oh * ow..][..oh * ow];
                out_plane.fill(b[o]);
                for c in 0..ci {
                    let in_plane = &x[(s * ci + c) * h * w..][..h * w];
                    for ki in 0..KERNEL {
                        for kj in 0..KERNEL {
                            let k = wt[((o * ci + c) * KERNEL + ki) * KERNEL + kj];
                            for i in 0..oh {
                                let src = &in_plane[(i + ki) * w + kj..][..ow];
                                let dst = &mut out_plane[i * ow..][..ow];
                                for (d, v) in dst.iter_mut().zip(src) {
                                    *d += k * v;
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }

    /// Accumulates parameter gradients and returns the input gradient when
    /// `want_dx` is set.
    #[allow(clippy::too_many_arguments)]
    pub fn backward(
        &self,
        x: &[f64],
        dout: &[f64],
        n: usize,
        h: usize,
        w: usize,
        dw: &mut [f64],
        db: &mut [f64],
        want_dx: bool,
    ) -> Option<Vec<f64>> {
        let (ci, co) = (self.in_channels(), self.out_channels());
        let (oh, ow) = (h - KERNEL + 1, w - KERNEL + 1);
        let wt = self.weight.data();
        let mut dx = if want_dx { vec![0.0; n * ci * h * w] } else { Vec::new() };
        for s in 0..n {
            for o in 0..co {
                let g_plane = &dout[(s * co + o) * oh * ow..][..oh * ow];
                db[o] += g_plane.iter().sum::<f64>();
                for c in 0..ci {
                    let in_plane = &x[(s * ci + c) * h * w..][..h * w];
                    for ki in 0..KERNEL {
                        for kj in 0..KERNEL {
                            let widx = ((o * ci + c) * KERNEL + ki) * KERNEL + kj;
                            let mut acc = 0.0;
                            for i in 0..oh {
                                let src = &in_plane[(i + ki) * w + kj..][..ow];
                                let g = &g_plane[i * ow..][..ow];
                                acc += src.iter().zip(g).map(|(a, b)| a * b).sum::<f64>();
                            }
                            dw[widx] += acc;
                            if want_dx {
                                let k = wt[widx];
                                let dx_plane = &mut dx[(s * ci + c) * h * w..][..h * w];
                                for i in 0..oh {
                                    let dst = &mut dx_plane[(i + ki) * w + kj..][..ow];
                                    let g = &g_plane[i * ow..][..ow];
                                    for (d, gv) in dst.iter_mut().zip(g) {
                                        *d += k * gv;
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        want_dx.then_some(dx)
    }
}

/// Per-channel batch normalization over batch and spatial positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchNorm2d {
    pub gamma: Tensor,
    pub beta: Tensor,
    pub running_mean: Tensor,
    pub running_var: Tensor,
    pub eps: f64,
    pub momentum: f64,
}

/// Intermediates of a training-mode pass.
#[derive(Debug, Clone)]
pub struct BnCache {
    pub xhat: Vec<f64>,
    pub inv_std: Vec<f64>,
    pub mean: Vec<f64>,
    /// Biased batch variance.
    pub var: Vec<f64>,
}

impl BatchNorm2d {
    pub fn new(c: usize) -> Self {
        Self {
            gamma: Tensor::filled(&[c], 1.0),
            beta: Tensor::zeros(&[c]),
            running_mean: Tensor::zeros(&[c]),
            running_var: Tensor::filled(&[c], 1.0),
            eps: 1e-5,
            momentum: 0.1,
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.len()
    }

    pub fn forward_train(&self, x: &[f64], n: usize, hw: usize) -> (Vec<f64>, BnCache) {
        let c_n = self.channels();
        let m = (n * hw) as f64;
        let mut mean = vec![0.0; c_n];
        let mut var = vec![0.0; c_n];
        for s in 0..n {
            for c in 0..c_n {
                mean[c] += x[(s * c_n + c) * hw..][..hw].iter().sum::<f64>();
            }
        }
        mean.iter_mut().for_each(|v| *v /= m);
        for s in 0..n {
            for c in 0..c_n {
                var[c] += x[(s * c_n + c) * hw..][..hw]
                    .iter()
                    .map(|v| (v - mean[c]).powi(2))
                    .sum::<f64>();
            }
        }
        var.iter_mut().for_each(|v| *v /= m);
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + self.eps).sqrt()).collect();
        let (g, b) = (self.gamma.data(), self.beta.data());
        let mut xhat = vec![0.0; x.len()];
        let mut y = vec![0.0; x.len()];
        for s in 0..n {
            for c in 0..c_n {
                let off = (s * c_n + c) * hw;
                for k in off..off + hw {
                    xhat[k] = (x[k] - mean[c]) * inv_std[c];
                    y[k] = g[c] * xhat[k] + b[c];
                }
            }
        }
        (y, BnCache { xhat, inv_std, mean, var })
    }

    pub fn forward_eval(&self, x: &[f64], n: usize, hw: usize) -> Vec<f64> {
        let c_n = self.channels();
        let (g, b) = (self.gamma.data(), self.beta.data());
        let (rm, rv) = (self.running_mean.data(), self.running_var.data());
        let mut y = vec![0.0; x.len()];
        for s in 0..n {
            for c in 0..c_n {
                let inv = 1.0 / (rv[c] + self.eps).sqrt();
                let off = (s * c_n + c) * hw;
                for k in off..off + hw {
                    y[k] = g[c] * (x[k] - rm[c]) * inv + b[c];
                }
            }
        }
        y
    }

    /// Folds one batch's statistics into the running estimates, using the
    /// unbiased variance.
    pub fn update_running(&mut self, cache: &BnCache, count: usize) {
        let mom = self.momentum;
        let correction = if count > 1 { count as f64 / (count as f64 - 1.0) } else { 1.0 };
        for (r, m) in self.running_mean.data_mut().iter_mut().zip(&cache.mean) {
            *r = (1.0 - mom) * *r + mom * m;
        }
        for (r, v) in self.running_var.data_mut().iter_mut().zip(&cache.var) {
            *r = (1.0 - mom) * *r + mom * v * correction;
        }
    }

    pub fn backward(
        &self,
        dy: &[f64],
        cache: &BnCache,
        n: usize,
        hw: usize,
        dgamma: &mut [f64],
        dbeta: &mut [f64],
    ) -> Vec<f64> {
        let c_n = self.channels();
        let m = (n * hw) as f64;
        let g = self.gamma.data();
        let mut sum_dxhat = vec![0.0; c_n];
        let mut sum_dxhat_xhat = vec![0.0; c_n];
        for s in 0..n {
            for c in 0..c_n {
                let off = (s * c_n + c) * hw;
                for (&d, &xh) in dy[off..off + hw].iter().zip(&cache.xhat[off..off + hw]) {
                    dbeta[c] += d;
                    dgamma[c] += d * xh;
                    let dxh = d * g[c];
                    sum_dxhat[c] += dxh;
                    sum_dxhat_xhat[c] += dxh * xh;
                }
            }
        }
        let mut dx = vec![0.0; dy.len()];
        for s in 0..n {
            for c in 0..c_n {
                let off = (s * c_n + c) * hw;
                let scale = cache.inv_std[c] / m;
                for k in off..off + hw {
                    let dxh = dy[k] * g[c];
                    dx[k] = scale * (m * dxh - sum_dxhat[c] - cache.xhat[k] * sum_dxhat_xhat[c]);
                }
            }
        }
        dx
    }
}

/// Fully connected layer, `y = W·x + b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    /// `[out, in]`
    pub weight: Tensor,
    /// `[out]`
    pub bias: Tensor,
}

impl Linear {
    pub fn zeros(inp: usize, out: usize) -> Self {
        Self { weight: Tensor::zeros(&[out, inp]), bias: Tensor::zeros(&[out]) }
    }

    pub fn in_features(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn out_features(&self) -> usize {
        self.weight.shape()[0]
    }

    /// Output `o` for a single input row.
    pub fn unit(&self, x: &[f64], o: usize) -> f64 {
        let fin = self.in_features();
        let row = &self.weight.data()[o * fin..][..fin];
        self.bias.data()[o] + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
    }

    pub fn forward(&self, x: &[f64], n: usize) -> Vec<f64> {
        let (fin, fout) = (self.in_features(), self.out_features());
        let mut out = vec![0.0; n * fout];
        for s in 0..n {
            let xs = &x[s * fin..][..fin];
            for o in 0..fout {
                out[s * fout + o] = self.unit(xs, o);
            }
        }
        out
    }

    pub fn backward(
        &self,
        x: &[f64],
        dout: &[f64],
        n: usize,
        dw: &mut [f64],
        db: &mut [f64],
        want_dx: bool,
    ) -> Option<Vec<f64>> {
        let (fin, fout) = (self.in_features(), self.out_features());
        let wt = self.weight.data();
        let mut dx = if want_dx { vec![0.0; n * fin] } else { Vec::new() };
        for s in 0..n {
            let xs = &x[s * fin..][..fin];
            for o in 0..fout {
                let g = dout[s * fout + o];
                if g == 0.0 {
                    continue;
                }
                db[o] += g;
                let dwr = &mut dw[o * fin..][..fin];
                for (d, v) in dwr.iter_mut().zip(xs) {
                    *d += g * v;
                }
                if want_dx {
                    let row = &wt[o * fin..][..fin];
                    let dxs = &mut dx[s * fin..][..fin];
                    for (d, wv) in dxs.iter_mut().zip(row) {
                        *d += g * wv;
                    }
                }
            }
        }
        want_dx.then_some(dx)
    }
}

pub fn relu_inplace(x: &mut [f64]) {
    for v in x.iter_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
}

/// Zeroes gradient entries whose forward output was clamped.
pub fn relu_backward_inplace(activated: &[f64], grad: &mut [f64]) {
    for (g, a) in grad.iter_mut().zip(activated) {
        if *a <= 0.0 {
            *g = 0.0;
        }
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// `−log softmax(logits)[label]`, computed via log-sum-exp.
pub fn cross_entropy(logits: &[f64], label: usize) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
    lse - logits[label]
}
