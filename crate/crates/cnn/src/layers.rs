//! Small f32 layer set with explicit backward passes.
//!
//! Activations are dense NCHW buffers. Convolutions lower to a matrix
//! product per sample (im2col); training-mode forward passes cache what the
//! backward pass needs.

use rand::Rng;
use rand_distr::{Distribution, Normal};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Shape {
    pub n: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
}

impl Shape {
    pub fn new(n: usize, c: usize, h: usize, w: usize) -> Self {
        Self { n, c, h, w }
    }

    pub fn len(&self) -> usize {
        self.n * self.c * self.h * self.w
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Values per sample.
    pub fn per_sample(&self) -> usize {
        self.c * self.h * self.w
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Activation {
    pub shape: Shape,
    pub data: Vec<f32>,
}

impl Activation {
    pub fn zeros(shape: Shape) -> Self {
        Self {
            shape,
            data: vec![0.0; shape.len()],
        }
    }

    pub fn new(shape: Shape, data: Vec<f32>) -> Self {
        assert_eq!(shape.len(), data.len(), "activation buffer does not match its shape");
        Self { shape, data }
    }

    pub fn sample(&self, i: usize) -> &[f32] {
        let s = self.shape.per_sample();
        &self.data[i * s..(i + 1) * s]
    }

    /// Views each sample as a flat feature vector.
    pub fn flatten(mut self) -> Self {
        self.shape = Shape::new(self.shape.n, self.shape.per_sample(), 1, 1);
        self
    }
}

/// Trainable tensor with its gradient accumulator.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub value: Vec<f32>,
    pub grad: Vec<f32>,
}

impl Param {
    pub fn new(value: Vec<f32>) -> Self {
        let grad = vec![0.0; value.len()];
        Self { value, grad }
    }

    fn normal(len: usize, std: f64, rng: &mut impl Rng) -> Self {
        let dist = Normal::new(0.0, std).expect("finite std");
        Self::new((0..len).map(|_| dist.sample(rng) as f32).collect())
    }

    pub fn zero_grad(&mut self) {
        self.grad.iter_mut().for_each(|g| *g = 0.0);
    }
}

/// `C = A B + beta C` for row-major operands described by strides.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f32],
    (rsa, csa): (usize, usize),
    b: &[f32],
    (rsb, csb): (usize, usize),
    beta: f32,
    c: &mut [f32],
    rsc: usize,
) {
    if m == 0 || n == 0 {
        return;
    }
    assert!(k == 0 || ((m - 1) * rsa + (k - 1) * csa) < a.len());
    assert!(k == 0 || ((k - 1) * rsb + (n - 1) * csb) < b.len());
    assert!((m - 1) * rsc + n - 1 < c.len());
    // SAFETY: the asserts above keep every strided access inside the slices,
    // and `c` is uniquely borrowed.
    unsafe {
        matrixmultiply::sgemm(
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
            beta,
            c.as_mut_ptr(),
            rsc as isize,
            1,
        );
    }
}

/// Square-kernel convolution without bias (a batch norm always follows).
#[derive(Debug, Clone)]
pub struct Conv2d {
    pub c_in: usize,
    pub c_out: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
    /// `c_out x (c_in * kernel * kernel)`, row-major.
    pub weight: Param,
    input: Option<Activation>,
}

impl Conv2d {
    pub fn new(c_in: usize, c_out: usize, kernel: usize, stride: usize, pad: usize, rng: &mut impl Rng) -> Self {
        let fan_in = c_in * kernel * kernel;
        Self {
            c_in,
            c_out,
            kernel,
            stride,
            pad,
            weight: Param::normal(c_out * fan_in, (2.0 / fan_in as f64).sqrt(), rng),
            input: None,
        }
    }

    pub fn out_hw(&self, h: usize, w: usize) -> (usize, usize) {
        (
            (h + 2 * self.pad - self.kernel) / self.stride + 1,
            (w + 2 * self.pad - self.kernel) / self.stride + 1,
        )
    }

    fn patch_len(&self) -> usize {
        self.c_in * self.kernel * self.kernel
    }

    fn im2col(&self, x: &[f32], h: usize, w: usize, col: &mut [f32]) {
        let (ho, wo) = self.out_hw(h, w);
        let k = self.kernel;
        let cols = ho * wo;
        for ci in 0..self.c_in {
            let plane = &x[ci * h * w..(ci + 1) * h * w];
            for ky in 0..k {
                for kx in 0..k {
                    let row = &mut col[((ci * k + ky) * k + kx) * cols..][..cols];
                    for oy in 0..ho {
                        let iy = (oy * self.stride + ky) as isize - self.pad as isize;
                        let dst = &mut row[oy * wo..(oy + 1) * wo];
                        if iy < 0 || iy >= h as isize {
                            dst.iter_mut().for_each(|v| *v = 0.0);
                            continue;
                        }
                        let src = &plane[iy as usize * w..(iy as usize + 1) * w];
                        for (ox, d) in dst.iter_mut().enumerate() {
                            let ix = (ox * self.stride + kx) as isize - self.pad as isize;
                            *d = if ix < 0 || ix >= w as isize { 0.0 } else { src[ix as usize] };
                        }
                    }
                }
            }
        }
    }

    fn col2im(&self, col: &[f32], h: usize, w: usize, dx: &mut [f32]) {
        let (ho, wo) = self.out_hw(h, w);
        let k = self.kernel;
        let cols = ho * wo;
        for ci in 0..self.c_in {
            let plane = &mut dx[ci * h * w..(ci + 1) * h * w];
            for ky in 0..k {
                for kx in 0..k {
                    let row = &col[((ci * k + ky) * k + kx) * cols..][..cols];
                    for oy in 0..ho {
                        let iy = (oy * self.stride + ky) as isize - self.pad as isize;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        let dst = &mut plane[iy as usize * w..(iy as usize + 1) * w];
                        for ox in 0..wo {
                            let ix = (ox * self.stride + kx) as isize - self.pad as isize;
                            if ix >= 0 && ix < w as isize {
                                dst[ix as usize] += row[oy * wo + ox];
                            }
                        }
                    }
                }
            }
        }
    }

    pub fn forward(&mut self, x: Activation, train: bool) -> Activation {
        let s = x.shape;
        assert_eq!(s.c, self.c_in, "conv input channels");
        let (ho, wo) = self.out_hw(s.h, s.w);
        let kk = self.patch_len();
        let mut col = vec![0.0; kk * ho * wo];
        let mut out = Activation::zeros(Shape::new(s.n, self.c_out, ho, wo));
        let out_len = self.c_out * ho * wo;
        for i in 0..s.n {
            self.im2col(x.sample(i), s.h, s.w, &mut col);
            gemm(
                self.c_out,
                kk,
                ho * wo,
                &self.weight.value,
                (kk, 1),
                &col,
                (ho * wo, 1),
                0.0,
                &mut out.data[i * out_len..(i + 1) * out_len],
                ho * wo,
            );
        }
        self.input = if train { Some(x) } else { None };
        out
    }

    /// Accumulates the weight gradient; returns the input gradient when asked.
    pub fn backward(&mut self, dy: &Activation, need_dx: bool) -> Option<Activation> {
        let x = self.input.take().expect("conv backward without a training forward");
        let s = x.shape;
        let (ho, wo) = self.out_hw(s.h, s.w);
        let kk = self.patch_len();
        let hw = ho * wo;
        let mut col = vec![0.0; kk * hw];
        let mut dcol = vec![0.0; kk * hw];
        let mut dx = need_dx.then(|| Activation::zeros(s));
        let out_len = self.c_out * hw;
        for i in 0..s.n {
            let dyi = &dy.data[i * out_len..(i + 1) * out_len];
            self.im2col(x.sample(i), s.h, s.w, &mut col);
            // dW += dY col^T
            gemm(self.c_out, hw, kk, dyi, (hw, 1), &col, (1, hw), 1.0, &mut self.weight.grad, kk);
            if let Some(dx) = dx.as_mut() {
                // dcol = W^T dY
                gemm(kk, self.c_out, hw, &self.weight.value, (1, kk), dyi, (hw, 1), 0.0, &mut dcol, hw);
                let per = s.per_sample();
                self.col2im(&dcol, s.h, s.w, &mut dx.data[i * per..(i + 1) * per]);
            }
        }
        dx
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.weight]
    }
}

/// Per-channel batch normalization fused with the following ReLU.
#[derive(Debug, Clone)]
pub struct BatchNormRelu {
    pub channels: usize,
    pub gamma: Param,
    pub beta: Param,
    pub running_mean: Vec<f32>,
    pub running_var: Vec<f32>,
    pub momentum: f32,
    pub eps: f32,
    xhat: Vec<f32>,
    inv_std: Vec<f32>,
    shape: Option<Shape>,
}

impl BatchNormRelu {
    pub fn new(channels: usize) -> Self {
        Self {
            channels,
            gamma: Param::new(vec![1.0; channels]),
            beta: Param::new(vec![0.0; channels]),
            running_mean: vec![0.0; channels],
            running_var: vec![1.0; channels],
            momentum: 0.1,
            eps: 1e-5,
            xhat: Vec::new(),
            inv_std: Vec::new(),
            shape: None,
        }
    }

    pub fn forward(&mut self, mut x: Activation, train: bool) -> Activation {
        let s = x.shape;
        assert_eq!(s.c, self.channels, "batch norm channels");
        let hw = s.h * s.w;
        let (c_n, per) = (s.c, s.per_sample());
        if train {
            let m = (s.n * hw) as f64;
            self.inv_std = vec![0.0; c_n];
            for c in 0..c_n {
                let (mut sum, mut sq) = (0.0f64, 0.0f64);
                for i in 0..s.n {
                    for &v in &x.data[i * per + c * hw..][..hw] {
                        sum += v as f64;
                        sq += (v as f64) * (v as f64);
                    }
                }
                let mean = sum / m;
                let var = (sq / m - mean * mean).max(0.0);
                let inv = 1.0 / (var + self.eps as f64).sqrt();
                self.inv_std[c] = inv as f32;
                let unbiased = if m > 1.0 { var * m / (m - 1.0) } else { var };
                let mom = self.momentum;
                self.running_mean[c] = (1.0 - mom) * self.running_mean[c] + mom * mean as f32;
                self.running_var[c] = (1.0 - mom) * self.running_var[c] + mom * unbiased as f32;
                for i in 0..s.n {
                    for v in &mut x.data[i * per + c * hw..][..hw] {
                        *v = ((*v as f64 - mean) * inv) as f32;
                    }
                }
            }
            self.xhat = x.data.clone();
            self.shape = Some(s);
            for i in 0..s.n {
                for c in 0..c_n {
                    let (g, b) = (self.gamma.value[c], self.beta.value[c]);
                    for v in &mut x.data[i * per + c * hw..][..hw] {
                        *v = (g * *v + b).max(0.0);
                    }
                }
            }
        } else {
            for c in 0..c_n {
                let inv = 1.0 / (self.running_var[c] + self.eps).sqrt();
                let scale = self.gamma.value[c] * inv;
                let shift = self.beta.value[c] - self.running_mean[c] * scale;
                for i in 0..s.n {
                    for v in &mut x.data[i * per + c * hw..][..hw] {
                        *v = (scale * *v + shift).max(0.0);
                    }
                }
            }
        }
        x
    }

    pub fn backward(&mut self, mut dy: Activation) -> Activation {
        let s = self.shape.take().expect("batch norm backward without a training forward");
        let hw = s.h * s.w;
        let per = s.per_sample();
        let m = (s.n * hw) as f32;
        for c in 0..s.c {
            let (g, b) = (self.gamma.value[c], self.beta.value[c]);
            let (mut dg, mut db) = (0.0f64, 0.0f64);
            for i in 0..s.n {
                let off = i * per + c * hw;
                for (d, &xh) in dy.data[off..off + hw].iter_mut().zip(&self.xhat[off..off + hw]) {
                    if g * xh + b <= 0.0 {
                        *d = 0.0;
                    }
                    dg += (*d * xh) as f64;
                    db += *d as f64;
                }
            }
            self.gamma.grad[c] += dg as f32;
            self.beta.grad[c] += db as f32;
            let k = g * self.inv_std[c] / m;
            let (dg, db) = (dg as f32, db as f32);
            for i in 0..s.n {
                let off = i * per + c * hw;
                for (d, &xh) in dy.data[off..off + hw].iter_mut().zip(&self.xhat[off..off + hw]) {
                    *d = k * (m * *d - db - xh * dg);
                }
            }
        }
        self.xhat = Vec::new();
        dy
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.gamma, &mut self.beta]
    }
}

/// Convolution, batch norm, ReLU.
#[derive(Debug, Clone)]
pub struct ConvBlock {
    pub conv: Conv2d,
    pub norm: BatchNormRelu,
}

impl ConvBlock {
    pub fn new(c_in: usize, c_out: usize, kernel: usize, stride: usize, pad: usize, rng: &mut impl Rng) -> Self {
        Self {
            conv: Conv2d::new(c_in, c_out, kernel, stride, pad, rng),
            norm: BatchNormRelu::new(c_out),
        }
    }

    pub fn forward(&mut self, x: Activation, train: bool) -> Activation {
        let y = self.conv.forward(x, train);
        self.norm.forward(y, train)
    }

    pub fn backward(&mut self, dy: Activation, need_dx: bool) -> Option<Activation> {
        let d = self.norm.backward(dy);
        self.conv.backward(&d, need_dx)
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut p = self.conv.params_mut();
        p.extend(self.norm.params_mut());
        p
    }

    pub fn n_params(&self) -> usize {
        self.conv.weight.value.len() + 2 * self.norm.channels
    }
}

/// Fully connected layer on flattened samples.
#[derive(Debug, Clone)]
pub struct Linear {
    pub f_in: usize,
    pub f_out: usize,
    /// `f_out x f_in`, row-major.
    pub weight: Param,
    pub bias: Param,
    input: Option<Activation>,
}

impl Linear {
    /// `gain` scales the He-normal initialization.
    pub fn new(f_in: usize, f_out: usize, gain: f64, rng: &mut impl Rng) -> Self {
        Self {
            f_in,
            f_out,
            weight: Param::normal(f_in * f_out, gain * (2.0 / f_in as f64).sqrt(), rng),
            bias: Param::new(vec![0.0; f_out]),
            input: None,
        }
    }

    pub fn forward(&mut self, x: Activation, train: bool) -> Activation {
        let n = x.shape.n;
        assert_eq!(x.shape.per_sample(), self.f_in, "linear input width");
        let mut out = Activation::zeros(Shape::new(n, self.f_out, 1, 1));
        for i in 0..n {
            out.data[i * self.f_out..(i + 1) * self.f_out].copy_from_slice(&self.bias.value);
        }
        gemm(n, self.f_in, self.f_out, &x.data, (self.f_in, 1), &self.weight.value, (1, self.f_in), 1.0, &mut out.data, self.f_out);
        self.input = if train { Some(x) } else { None };
        out
    }

    pub fn backward(&mut self, dy: &Activation, need_dx: bool) -> Option<Activation> {
        let x = self.input.take().expect("linear backward without a training forward");
        let n = x.shape.n;
        gemm(self.f_out, n, self.f_in, &dy.data, (1, self.f_out), &x.data, (self.f_in, 1), 1.0, &mut self.weight.grad, self.f_in);
        for i in 0..n {
            for (g, d) in self.bias.grad.iter_mut().zip(&dy.data[i * self.f_out..(i + 1) * self.f_out]) {
                *g += d;
            }
        }
        need_dx.then(|| {
            let mut dx = Activation::zeros(x.shape);
            gemm(n, self.f_out, self.f_in, &dy.data, (self.f_out, 1), &self.weight.value, (self.f_in, 1), 0.0, &mut dx.data, self.f_in);
            dx
        })
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.weight, &mut self.bias]
    }

    pub fn n_params(&self) -> usize {
        self.weight.value.len() + self.bias.value.len()
    }
}

pub fn relu_forward(mut x: Activation) -> Activation {
    x.data.iter_mut().for_each(|v| *v = v.max(0.0));
    x
}

/// Masks `dy` where the forward output was zero.
pub fn relu_backward(mut dy: Activation, output: &[f32]) -> Activation {
    for (d, &y) in dy.data.iter_mut().zip(output) {
        if y <= 0.0 {
            *d = 0.0;
        }
    }
    dy
}
