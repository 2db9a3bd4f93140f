//! Four-stage network: channel-expanding convolutions, strided downsampling,
//! and two parallel heads for the cell encoding and the model order.

use gridfree_core::labels::CellGrid;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CnnError, Result};
use crate::layers::{relu_backward, relu_forward, Activation, ConvBlock, Linear, Param, Shape};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetworkConfig {
    /// Four real maps per window.
    pub input_channels: usize,
    pub n_freq: usize,
    pub n_time: usize,
    pub stage1_blocks: usize,
    /// Output channels of the first block; every further block doubles them.
    pub base_channels: usize,
    /// Stride-2 blocks, each halving both spatial sizes.
    pub downsample_blocks: usize,
    pub downsample_kernel: usize,
    pub head_conv_blocks: usize,
    /// Channel division per cell-head convolution block.
    pub head_reduction: usize,
    pub order_conv_channels: usize,
    pub eta_hidden: usize,
    pub order_hidden: usize,
    pub kernel_size: usize,
    pub cell_grid: CellGrid,
    pub p_max: usize,
}

impl Default for NetworkConfig {
    /// The 64 x 64 configuration (about 24.5 million parameters).
    fn default() -> Self {
        Self {
            input_channels: 32,
            n_freq: 64,
            n_time: 64,
            stage1_blocks: 5,
            base_channels: 64,
            downsample_blocks: 3,
            downsample_kernel: 2,
            head_conv_blocks: 2,
            head_reduction: 4,
            order_conv_channels: 16,
            eta_hidden: 512,
            order_hidden: 512,
            kernel_size: 3,
            cell_grid: CellGrid::default(),
            p_max: 20,
        }
    }
}

impl NetworkConfig {
    /// Narrow variant for desk-scale training on small grids.
    pub fn reduced(n_freq: usize, n_time: usize, p_max: usize) -> Self {
        Self {
            n_freq,
            n_time,
            base_channels: 4,
            downsample_blocks: 2,
            order_conv_channels: 8,
            eta_hidden: 256,
            order_hidden: 128,
            p_max,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(CnnError::Config(m.to_string()));
        if self.input_channels == 0 || self.base_channels == 0 || self.stage1_blocks == 0 {
            return bad("channel counts and stage-1 blocks must be positive");
        }
        if self.kernel_size % 2 == 0 {
            return bad("kernel_size must be odd to preserve the data shape");
        }
        if self.downsample_kernel == 0 {
            return bad("downsample_kernel must be positive");
        }
        let f = 1usize << self.downsample_blocks;
        if self.n_freq % f != 0 || self.n_time % f != 0 || self.n_freq < f || self.n_time < f {
            return bad("input size must be divisible by 2^downsample_blocks");
        }
        if self.head_reduction == 0 || self.trunk_channels() / self.head_reduction.pow(self.head_conv_blocks as u32) == 0 {
            return bad("head_reduction leaves no channels");
        }
        if self.order_conv_channels == 0 || self.eta_hidden == 0 || self.order_hidden == 0 || self.p_max == 0 {
            return bad("head widths and p_max must be positive");
        }
        self.cell_grid.validate().map_err(|e| CnnError::Config(e.to_string()))?;
        Ok(())
    }

    pub fn trunk_channels(&self) -> usize {
        self.base_channels << (self.stage1_blocks - 1)
    }

    pub fn trunk_hw(&self) -> (usize, usize) {
        (self.n_freq >> self.downsample_blocks, self.n_time >> self.downsample_blocks)
    }

    pub fn eta_len(&self) -> usize {
        self.cell_grid.eta_len()
    }

    fn eta_channels(&self) -> Vec<usize> {
        (0..=self.head_conv_blocks)
            .map(|b| self.trunk_channels() / self.head_reduction.pow(b as u32))
            .collect()
    }

    /// Expected per-sample activation shapes after every block, by name.
    pub fn layer_shapes(&self) -> Vec<(String, Shape)> {
        let mut out = Vec::new();
        let mut c = self.input_channels;
        let (mut h, mut w) = (self.n_freq, self.n_time);
        for b in 0..self.stage1_blocks {
            c = self.base_channels << b;
            out.push((format!("stage1.{b}"), Shape::new(1, c, h, w)));
        }
        for b in 0..self.downsample_blocks {
            h /= 2;
            w /= 2;
            out.push((format!("stage2.{b}"), Shape::new(1, c, h, w)));
        }
        for (b, &ch) in self.eta_channels().iter().enumerate().skip(1) {
            out.push((format!("stage3.conv{}", b - 1), Shape::new(1, ch, h, w)));
        }
        out.push(("stage3.fc0".into(), Shape::new(1, self.eta_hidden, 1, 1)));
        out.push(("stage3.fc1".into(), Shape::new(1, self.eta_len(), 1, 1)));
        out.push(("stage4.conv0".into(), Shape::new(1, self.order_conv_channels, h, w)));
        out.push(("stage4.fc0".into(), Shape::new(1, self.order_hidden, 1, 1)));
        out.push(("stage4.fc1".into(), Shape::new(1, self.p_max, 1, 1)));
        out
    }

    /// Trainable parameter count, computed from the configuration alone.
    pub fn parameter_count(&self) -> usize {
        let k2 = self.kernel_size * self.kernel_size;
        let block = |cin: usize, cout: usize, kk: usize| cin * cout * kk + 2 * cout;
        let mut n = 0;
        let mut c = self.input_channels;
        for b in 0..self.stage1_blocks {
            let co = self.base_channels << b;
            n += block(c, co, k2);
            c = co;
        }
        n += self.downsample_blocks * block(c, c, self.downsample_kernel * self.downsample_kernel);
        let (h, w) = self.trunk_hw();
        let ch = self.eta_channels();
        for pair in ch.windows(2) {
            n += block(pair[0], pair[1], k2);
        }
        let flat = ch[ch.len() - 1] * h * w;
        n += flat * self.eta_hidden + self.eta_hidden + self.eta_hidden * self.eta_len() + self.eta_len();
        n += block(c, self.order_conv_channels, k2);
        let flat = self.order_conv_channels * h * w;
        n += flat * self.order_hidden + self.order_hidden + self.order_hidden * self.p_max + self.p_max;
        n
    }
}

/// Raw network outputs for a batch, row per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub n: usize,
    pub eta: Vec<f32>,
    pub rho: Vec<f32>,
}

impl Output {
    pub fn eta_row(&self, i: usize) -> &[f32] {
        let l = self.eta.len() / self.n;
        &self.eta[i * l..(i + 1) * l]
    }

    pub fn rho_row(&self, i: usize) -> &[f32] {
        let l = self.rho.len() / self.n;
        &self.rho[i * l..(i + 1) * l]
    }
}

#[derive(Debug, Clone)]
pub struct Network {
    config: NetworkConfig,
    trunk: Vec<ConvBlock>,
    eta_convs: Vec<ConvBlock>,
    eta_fc: [Linear; 2],
    order_conv: ConvBlock,
    order_fc: [Linear; 2],
    eta_hidden_out: Vec<f32>,
    order_hidden_out: Vec<f32>,
}

/// Initial detection logit for every slot; most slots are empty.
const DETECTION_PRIOR: f32 = -2.0;

impl Network {
    pub fn new(config: &NetworkConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = config.kernel_size;
        let pad = k / 2;
        let mut trunk = Vec::new();
        let mut c = config.input_channels;
        for b in 0..config.stage1_blocks {
            let co = config.base_channels << b;
            trunk.push(ConvBlock::new(c, co, k, 1, pad, &mut rng));
            c = co;
        }
        let dk = config.downsample_kernel;
        for _ in 0..config.downsample_blocks {
            // stride 2 with padding chosen so every block halves exactly
            trunk.push(ConvBlock::new(c, c, dk, 2, (dk - 1) / 2, &mut rng));
        }
        let (h, w) = config.trunk_hw();
        let ch = config.eta_channels();
        let eta_convs: Vec<ConvBlock> = ch.windows(2).map(|p| ConvBlock::new(p[0], p[1], k, 1, pad, &mut rng)).collect();
        let flat = ch[ch.len() - 1] * h * w;
        let eta_fc1 = Linear::new(flat, config.eta_hidden, 1.0, &mut rng);
        let mut eta_fc2 = Linear::new(config.eta_hidden, config.eta_len(), 0.5f64.sqrt(), &mut rng);
        for (i, b) in eta_fc2.bias.value.iter_mut().enumerate() {
            *b = if i % 3 == 0 { DETECTION_PRIOR } else { 0.5 };
        }
        let order_conv = ConvBlock::new(c, config.order_conv_channels, k, 1, pad, &mut rng);
        let flat = config.order_conv_channels * h * w;
        let order_fc1 = Linear::new(flat, config.order_hidden, 1.0, &mut rng);
        let order_fc2 = Linear::new(config.order_hidden, config.p_max, 0.5f64.sqrt(), &mut rng);
        let net = Self {
            config: config.clone(),
            trunk,
            eta_convs,
            eta_fc: [eta_fc1, eta_fc2],
            order_conv,
            order_fc: [order_fc1, order_fc2],
            eta_hidden_out: Vec::new(),
            order_hidden_out: Vec::new(),
        };
        debug_assert_eq!(net.n_params(), config.parameter_count());
        Ok(net)
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn input_shape(&self, n: usize) -> Shape {
        Shape::new(n, self.config.input_channels, self.config.n_freq, self.config.n_time)
    }

    pub fn forward(&mut self, x: Activation, train: bool) -> Result<Output> {
        let want = self.input_shape(x.shape.n);
        if x.shape != want || x.shape.n == 0 {
            return Err(CnnError::Shape(format!("input {:?}, network expects {:?}", x.shape, want)));
        }
        let n = x.shape.n;
        let mut t = x;
        for b in &mut self.trunk {
            t = b.forward(t, train);
        }
        let mut e = t.clone();
        for b in &mut self.eta_convs {
            e = b.forward(e, train);
        }
        let e = relu_forward(self.eta_fc[0].forward(e.flatten(), train));
        if train {
            self.eta_hidden_out = e.data.clone();
        }
        let eta = self.eta_fc[1].forward(e, train);

        let r = self.order_conv.forward(t, train).flatten();
        let r = relu_forward(self.order_fc[0].forward(r, train));
        if train {
            self.order_hidden_out = r.data.clone();
        }
        let rho = self.order_fc[1].forward(r, train);
        Ok(Output {
            n,
            eta: eta.data,
            rho: rho.data,
        })
    }

    /// Accumulates parameter gradients for output gradients of the last
    /// training-mode forward pass.
    pub fn backward(&mut self, d_eta: &[f32], d_rho: &[f32]) {
        let n = d_eta.len() / self.config.eta_len();
        let (h, w) = self.config.trunk_hw();
        let tc = self.config.trunk_channels();

        let d = Activation::new(Shape::new(n, self.config.eta_len(), 1, 1), d_eta.to_vec());
        let d = self.eta_fc[1].backward(&d, true).expect("dx");
        let d = relu_backward(d, &self.eta_hidden_out);
        let d = self.eta_fc[0].backward(&d, true).expect("dx");
        let last = *self.config.eta_channels().last().expect("channels");
        let mut d = Activation::new(Shape::new(n, last, h, w), d.data);
        for b in self.eta_convs.iter_mut().rev() {
            d = b.backward(d, true).expect("dx");
        }
        let mut d_trunk = d;

        let d = Activation::new(Shape::new(n, self.config.p_max, 1, 1), d_rho.to_vec());
        let d = self.order_fc[1].backward(&d, true).expect("dx");
        let d = relu_backward(d, &self.order_hidden_out);
        let d = self.order_fc[0].backward(&d, true).expect("dx");
        let d = Activation::new(Shape::new(n, self.config.order_conv_channels, h, w), d.data);
        let d = self.order_conv.backward(d, true).expect("dx");
        debug_assert_eq!(d_trunk.shape, Shape::new(n, tc, h, w));
        for (a, b) in d_trunk.data.iter_mut().zip(&d.data) {
            *a += b;
        }

        let blocks = self.trunk.len();
        for (i, b) in self.trunk.iter_mut().rev().enumerate() {
            let need_dx = i + 1 < blocks;
            match b.backward(d_trunk, need_dx) {
                Some(dx) => d_trunk = dx,
                None => break,
            }
        }
    }

    /// Trainable tensors in a fixed order.
    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut p = Vec::new();
        for b in &mut self.trunk {
            p.extend(b.params_mut());
        }
        for b in &mut self.eta_convs {
            p.extend(b.params_mut());
        }
        for l in &mut self.eta_fc {
            p.extend(l.params_mut());
        }
        p.extend(self.order_conv.params_mut());
        for l in &mut self.order_fc {
            p.extend(l.params_mut());
        }
        p
    }

    pub fn zero_grad(&mut self) {
        self.params_mut().into_iter().for_each(Param::zero_grad);
    }

    pub fn n_params(&self) -> usize {
        let blocks: usize = self
            .trunk
            .iter()
            .chain(&self.eta_convs)
            .chain(std::iter::once(&self.order_conv))
            .map(ConvBlock::n_params)
            .sum();
        let fcs: usize = self.eta_fc.iter().chain(&self.order_fc).map(Linear::n_params).sum();
        blocks + fcs
    }

    /// Every stored tensor (parameters, then batch-norm running statistics)
    /// in serialization order.
    pub fn state_mut(&mut self) -> Vec<&mut Vec<f32>> {
        let mut out: Vec<&mut Vec<f32>> = Vec::new();
        for b in self
            .trunk
            .iter_mut()
            .chain(self.eta_convs.iter_mut())
            .chain(std::iter::once(&mut self.order_conv))
        {
            out.push(&mut b.conv.weight.value);
            out.push(&mut b.norm.gamma.value);
            out.push(&mut b.norm.beta.value);
            out.push(&mut b.norm.running_mean);
            out.push(&mut b.norm.running_var);
        }
        for l in self.eta_fc.iter_mut().chain(self.order_fc.iter_mut()) {
            out.push(&mut l.weight.value);
            out.push(&mut l.bias.value);
        }
        out
    }

    pub fn state(&self) -> Vec<f32> {
        let mut copy = self.clone();
        copy.state_mut().into_iter().flat_map(|t| t.iter().copied()).collect::<Vec<_>>()
    }

    pub fn load_state(&mut self, values: &[f32]) -> Result<()> {
        let total: usize = self.state_mut().iter().map(|t| t.len()).sum();
        if total != values.len() {
            return Err(CnnError::Format(format!("weights hold {} values, network needs {total}", values.len())));
        }
        let mut off = 0;
        for t in self.state_mut() {
            let l = t.len();
            t.copy_from_slice(&values[off..off + l]);
            off += l;
        }
        Ok(())
    }
}
