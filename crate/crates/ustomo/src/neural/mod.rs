//! A small dense neural-network engine: forward, exact backprop, Adam.
//!
//! Two topologies cover everything the signal-correction pipeline needs:
//!
//! * a plain dense chain (the trace encoder `α` and decoder `β`), and
//! * a block-sparse graph of parallel subnets with cyclic windowed wiring
//!   and an optional residual sum at the output (the correction network
//!   `φ'` and the direct-inversion baseline).
//!
//! In the block topology the input is split into one block per transmitter.
//! Each level-1 subnet reads a window of angularly adjacent input blocks,
//! each level-2/3 subnet a window of the previous level's outputs, and a
//! final linear layer per block maps back to the block width. With the
//! final layer zero-initialized the residual network starts as the exact
//! identity, which is also what a freshly built `φ'` should be: "change
//! nothing until trained".
//!
//! Everything runs in f64 and is deterministic given the seeds.

mod train;

pub use train::{train, Loss, TrainOptions, TrainSet, TrainingRecord};

use ndarray::{Array1, Array2, Array3, Axis};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::rng::rng_from_seed;
use crate::wavesim::MeasurementSet;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Linear,
}

/// Shape descriptor of one dense layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub in_width: usize,
    pub out_width: usize,
    pub activation: Activation,
}

/// One dense layer: `act(x·Wᵀ + b)` with `W` stored `out × in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
    pub activation: Activation,
}

impl Dense {
    pub fn spec(&self) -> LayerSpec {
        LayerSpec {
            in_width: self.w.ncols(),
            out_width: self.w.nrows(),
            activation: self.activation,
        }
    }

    fn zeros(spec: LayerSpec) -> Self {
        Dense {
            w: Array2::zeros((spec.out_width, spec.in_width)),
            b: Array1::zeros(spec.out_width),
            activation: spec.activation,
        }
    }

    /// He initialization for ReLU layers, Xavier-ish for linear ones.
    fn random(spec: LayerSpec, rng: &mut rand_chacha::ChaCha8Rng) -> Self {
        let std = match spec.activation {
            Activation::Relu => (2.0 / spec.in_width as f64).sqrt(),
            Activation::Linear => (1.0 / spec.in_width as f64).sqrt(),
        };
        let normal = Normal::new(0.0, std).expect("init distribution");
        let mut layer = Dense::zeros(spec);
        for v in layer.w.iter_mut() {
            *v = normal.sample(rng);
        }
        layer
    }

    fn affine_batch(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut z = x.dot(&self.w.t());
        z += &self.b;
        z
    }
}

fn activate_inplace(z: &mut Array2<f64>, act: Activation) {
    if act == Activation::Relu {
        z.mapv_inplace(|v| if v > 0.0 { v } else { 0.0 });
    }
}

/// Derivative mask of the activation at pre-activation `z`; ReLU uses the
/// zero subgradient at exactly 0.
fn act_grad_inplace(gz: &mut Array2<f64>, z: &Array2<f64>, act: Activation) {
    if act == Activation::Relu {
        gz.zip_mut_with(z, |g, &zz| {
            if zz <= 0.0 {
                *g = 0.0;
            }
        });
    }
}

/// One level of the block-sparse topology: `nets[k]` reads the
/// concatenation of the previous level's blocks `k-h ..= k+h` (cyclic,
/// `fan_in = 2h+1`).
#[derive(Debug, Clone, PartialEq)]
pub struct BlockLevel {
    pub fan_in: usize,
    pub nets: Vec<Dense>,
}

/// Block-sparse network graph.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockNet {
    pub n_blocks: usize,
    /// Width of each input block.
    pub in_block_width: usize,
    pub levels: Vec<BlockLevel>,
    /// Add input block `k` to output block `k` (requires matching widths).
    pub residual: bool,
}

impl BlockNet {
    /// Cyclic window of source-block indices feeding subnet `k`.
    pub fn window(k: usize, fan_in: usize, n_blocks: usize) -> Vec<usize> {
        let h = (fan_in / 2) as i64;
        (-h..=h)
            .map(|off| ((k as i64 + off).rem_euclid(n_blocks as i64)) as usize)
            .collect()
    }

    fn level_out_widths(&self, level: usize) -> Vec<usize> {
        self.levels[level].nets.iter().map(|d| d.w.nrows()).collect()
    }

    fn output_width(&self) -> usize {
        self.level_out_widths(self.levels.len() - 1).iter().sum()
    }

    fn validate(&self) -> Result<()> {
        if self.n_blocks == 0 || self.levels.is_empty() {
            return Err(Error::Shape("empty block network".into()));
        }
        let mut prev_widths = vec![self.in_block_width; self.n_blocks];
        for (li, level) in self.levels.iter().enumerate() {
            if level.fan_in == 0 || level.fan_in % 2 == 0 || level.fan_in > self.n_blocks {
                return Err(Error::Shape(format!(
                    "level {li}: fan-in {} must be odd and at most {}",
                    level.fan_in, self.n_blocks
                )));
            }
            if level.nets.len() != self.n_blocks {
                return Err(Error::Shape(format!(
                    "level {li}: expected {} subnets, got {}",
                    self.n_blocks,
                    level.nets.len()
                )));
            }
            for (k, net) in level.nets.iter().enumerate() {
                let expect: usize = Self::window(k, level.fan_in, self.n_blocks)
                    .iter()
                    .map(|&s| prev_widths[s])
                    .sum();
                if net.w.ncols() != expect {
                    return Err(Error::Shape(format!(
                        "level {li} block {k}: input width {} != window width {expect}",
                        net.w.ncols()
                    )));
                }
            }
            prev_widths = self.level_out_widths(li);
        }
        if self.residual {
            if self
                .level_out_widths(self.levels.len() - 1)
                .iter()
                .any(|&w| w != self.in_block_width)
            {
                return Err(Error::Shape(
                    "residual sum requires output blocks as wide as input blocks".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Network graph: either a dense chain or a block-sparse net.
#[derive(Debug, Clone, PartialEq)]
pub enum Topology {
    Chain(Vec<Dense>),
    Blocks(BlockNet),
}

/// Serializable shape of a [`Topology`] (weights live separately).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TopologyDesc {
    Chain {
        layers: Vec<LayerSpec>,
    },
    Blocks {
        n_blocks: usize,
        in_block_width: usize,
        residual: bool,
        levels: Vec<LevelDesc>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelDesc {
    pub fan_in: usize,
    pub layers: Vec<LayerSpec>,
}

/// Adam moment accumulators, one pair per dense layer in traversal order.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<(Array2<f64>, Array1<f64>)>,
    pub v: Vec<(Array2<f64>, Array1<f64>)>,
    pub step: u64,
}

/// A network plus its I/O conventions and optimizer state.
///
/// `apply` computes `out_offset + out_scale · net(in_scale · x)`; the raw
/// layers are trained on pre-scaled data and the scales record how physical
/// values map to network values (trace normalization for the autoencoder,
/// field normalization for the direct inverter).
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkBundle {
    pub topology: Topology,
    pub adam: Option<AdamState>,
    pub in_scale: f64,
    pub out_scale: f64,
    pub out_offset: f64,
}

impl NetworkBundle {
    pub fn new(topology: Topology) -> Result<Self> {
        let bundle = Self {
            topology,
            adam: None,
            in_scale: 1.0,
            out_scale: 1.0,
            out_offset: 0.0,
        };
        bundle.validate()?;
        Ok(bundle)
    }

    pub fn validate(&self) -> Result<()> {
        match &self.topology {
            Topology::Chain(layers) => {
                if layers.is_empty() {
                    return Err(Error::Shape("empty chain".into()));
                }
                for pair in layers.windows(2) {
                    if pair[0].w.nrows() != pair[1].w.ncols() {
                        return Err(Error::Shape(format!(
                            "adjacent layer widths {} -> {} incompatible",
                            pair[0].w.nrows(),
                            pair[1].w.ncols()
                        )));
                    }
                }
                Ok(())
            }
            Topology::Blocks(b) => b.validate(),
        }
    }

    pub fn input_width(&self) -> usize {
        match &self.topology {
            Topology::Chain(layers) => layers[0].w.ncols(),
            Topology::Blocks(b) => b.n_blocks * b.in_block_width,
        }
    }

    pub fn output_width(&self) -> usize {
        match &self.topology {
            Topology::Chain(layers) => layers.last().unwrap().w.nrows(),
            Topology::Blocks(b) => b.output_width(),
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.layers().map(|d| d.w.len() + d.b.len()).sum()
    }

    /// Dense layers in canonical traversal order (chain order, or level by
    /// level then block by block).
    pub fn layers(&self) -> impl Iterator<Item = &Dense> {
        let v: Vec<&Dense> = match &self.topology {
            Topology::Chain(layers) => layers.iter().collect(),
            Topology::Blocks(b) => b.levels.iter().flat_map(|l| l.nets.iter()).collect(),
        };
        v.into_iter()
    }

    pub fn layers_mut(&mut self) -> Vec<&mut Dense> {
        match &mut self.topology {
            Topology::Chain(layers) => layers.iter_mut().collect(),
            Topology::Blocks(b) => b
                .levels
                .iter_mut()
                .flat_map(|l| l.nets.iter_mut())
                .collect(),
        }
    }

    pub fn desc(&self) -> TopologyDesc {
        match &self.topology {
            Topology::Chain(layers) => TopologyDesc::Chain {
                layers: layers.iter().map(|d| d.spec()).collect(),
            },
            Topology::Blocks(b) => TopologyDesc::Blocks {
                n_blocks: b.n_blocks,
                in_block_width: b.in_block_width,
                residual: b.residual,
                levels: b
                    .levels
                    .iter()
                    .map(|l| LevelDesc {
                        fan_in: l.fan_in,
                        layers: l.nets.iter().map(|d| d.spec()).collect(),
                    })
                    .collect(),
            },
        }
    }

    /// Rebuilds a zero-weight bundle from a shape descriptor.
    pub fn from_desc(desc: &TopologyDesc) -> Result<Self> {
        let topology = match desc {
            TopologyDesc::Chain { layers } => {
                Topology::Chain(layers.iter().map(|s| Dense::zeros(*s)).collect())
            }
            TopologyDesc::Blocks {
                n_blocks,
                in_block_width,
                residual,
                levels,
            } => Topology::Blocks(BlockNet {
                n_blocks: *n_blocks,
                in_block_width: *in_block_width,
                residual: *residual,
                levels: levels
                    .iter()
                    .map(|l| BlockLevel {
                        fan_in: l.fan_in,
                        nets: l.layers.iter().map(|s| Dense::zeros(*s)).collect(),
                    })
                    .collect(),
            }),
        };
        NetworkBundle::new(topology)
    }

    /// Scaled single-sample forward pass.
    pub fn apply(&self, x: &Array1<f64>) -> Result<Array1<f64>> {
        let batch = x.view().insert_axis(Axis(0)).to_owned();
        let out = self.apply_batch(&batch)?;
        Ok(out.index_axis(Axis(0), 0).to_owned())
    }

    /// Scaled batched forward pass (`rows = samples`).
    pub fn apply_batch(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        let scaled = x.mapv(|v| v * self.in_scale);
        let raw = self.forward_raw_batch(&scaled)?;
        Ok(raw.mapv(|v| self.out_offset + self.out_scale * v))
    }

    /// Unscaled forward pass on pre-normalized data (the training view).
    pub fn forward_raw_batch(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        let (out, _) = self.forward_cached(x, false)?;
        Ok(out)
    }

    pub(crate) fn forward_cached(
        &self,
        x: &Array2<f64>,
        keep_cache: bool,
    ) -> Result<(Array2<f64>, ForwardCache)> {
        if x.ncols() != self.input_width() {
            return Err(Error::Shape(format!(
                "input width {} does not match network input {}",
                x.ncols(),
                self.input_width()
            )));
        }
        match &self.topology {
            Topology::Chain(layers) => {
                let mut cache = ForwardCache::default();
                let mut a = x.clone();
                for layer in layers {
                    let z = layer.affine_batch(&a);
                    if keep_cache {
                        cache.chain.push((a, z.clone()));
                    }
                    a = z;
                    activate_inplace(&mut a, layer.activation);
                }
                Ok((a, cache))
            }
            Topology::Blocks(bn) => {
                let n = x.nrows();
                let w_in = bn.in_block_width;
                let mut cache = ForwardCache::default();
                // Current per-block activations.
                let mut blocks: Vec<Array2<f64>> = (0..bn.n_blocks)
                    .map(|k| {
                        x.slice(ndarray::s![.., k * w_in..(k + 1) * w_in])
                            .to_owned()
                    })
                    .collect();
                let input_blocks = if bn.residual { blocks.clone() } else { Vec::new() };
                for level in &bn.levels {
                    let mut next: Vec<Array2<f64>> = Vec::with_capacity(bn.n_blocks);
                    let mut level_cache = Vec::with_capacity(bn.n_blocks);
                    for (k, net) in level.nets.iter().enumerate() {
                        let window = BlockNet::window(k, level.fan_in, bn.n_blocks);
                        let total: usize = window.iter().map(|&s| blocks[s].ncols()).sum();
                        let mut xw = Array2::zeros((n, total));
                        let mut col = 0;
                        for &s in &window {
                            let wsz = blocks[s].ncols();
                            xw.slice_mut(ndarray::s![.., col..col + wsz])
                                .assign(&blocks[s]);
                            col += wsz;
                        }
                        let z = net.affine_batch(&xw);
                        let mut a = z.clone();
                        activate_inplace(&mut a, net.activation);
                        if keep_cache {
                            level_cache.push((xw, z));
                        }
                        next.push(a);
                    }
                    if keep_cache {
                        cache.blocks.push(level_cache);
                    }
                    blocks = next;
                }
                if bn.residual {
                    for (b, x0) in blocks.iter_mut().zip(input_blocks.iter()) {
                        *b += x0;
                    }
                }
                let total: usize = blocks.iter().map(|b| b.ncols()).sum();
                let mut out = Array2::zeros((n, total));
                let mut col = 0;
                for b in &blocks {
                    out.slice_mut(ndarray::s![.., col..col + b.ncols()]).assign(b);
                    col += b.ncols();
                }
                Ok((out, cache))
            }
        }
    }

    /// Exact reverse-mode gradients of the unscaled forward map. Returns the
    /// per-layer parameter gradients (traversal order) and the gradient with
    /// respect to the input batch.
    pub fn backward_batch(
        &self,
        x: &Array2<f64>,
        grad_out: &Array2<f64>,
    ) -> Result<(Vec<(Array2<f64>, Array1<f64>)>, Array2<f64>)> {
        let (out, cache) = self.forward_cached(x, true)?;
        if grad_out.dim() != out.dim() {
            return Err(Error::Shape(format!(
                "output-gradient shape {:?} does not match output {:?}",
                grad_out.dim(),
                out.dim()
            )));
        }
        Ok(self.backward_from_cache(x, &cache, grad_out))
    }

    pub(crate) fn backward_from_cache(
        &self,
        x: &Array2<f64>,
        cache: &ForwardCache,
        grad_out: &Array2<f64>,
    ) -> (Vec<(Array2<f64>, Array1<f64>)>, Array2<f64>) {
        match &self.topology {
            Topology::Chain(layers) => {
                let mut grads: Vec<(Array2<f64>, Array1<f64>)> = layers
                    .iter()
                    .map(|d| (Array2::zeros(d.w.dim()), Array1::zeros(d.b.len())))
                    .collect();
                let mut ga = grad_out.clone();
                for (li, layer) in layers.iter().enumerate().rev() {
                    let (xin, z) = &cache.chain[li];
                    let mut gz = ga;
                    act_grad_inplace(&mut gz, z, layer.activation);
                    grads[li].0 = gz.t().dot(xin);
                    grads[li].1 = gz.sum_axis(Axis(0));
                    ga = gz.dot(&layer.w);
                }
                (grads, ga)
            }
            Topology::Blocks(bn) => {
                let n = x.nrows();
                let w_in = bn.in_block_width;
                let n_levels = bn.levels.len();
                // Gradient flowing into each block's activation, per level.
                let last_widths = bn.level_out_widths(n_levels - 1);
                let mut gblocks: Vec<Array2<f64>> = Vec::with_capacity(bn.n_blocks);
                let mut col = 0;
                for w in &last_widths {
                    gblocks.push(grad_out.slice(ndarray::s![.., col..col + w]).to_owned());
                    col += w;
                }
                // Residual path: the output gradient also reaches the input.
                let mut gx = Array2::zeros((n, bn.n_blocks * w_in));
                if bn.residual {
                    for (k, g) in gblocks.iter().enumerate() {
                        gx.slice_mut(ndarray::s![.., k * w_in..(k + 1) * w_in])
                            .assign(g);
                    }
                }
                let mut grads: Vec<Vec<(Array2<f64>, Array1<f64>)>> = bn
                    .levels
                    .iter()
                    .map(|l| {
                        l.nets
                            .iter()
                            .map(|d| (Array2::zeros(d.w.dim()), Array1::zeros(d.b.len())))
                            .collect()
                    })
                    .collect();
                for li in (0..n_levels).rev() {
                    let level = &bn.levels[li];
                    let prev_widths: Vec<usize> = if li == 0 {
                        vec![w_in; bn.n_blocks]
                    } else {
                        bn.level_out_widths(li - 1)
                    };
                    let mut gprev: Vec<Array2<f64>> = prev_widths
                        .iter()
                        .map(|&w| Array2::zeros((n, w)))
                        .collect();
                    for (k, net) in level.nets.iter().enumerate() {
                        let (xw, z) = &cache.blocks[li][k];
                        let mut gz = gblocks[k].clone();
                        act_grad_inplace(&mut gz, z, net.activation);
                        grads[li][k].0 = gz.t().dot(xw);
                        grads[li][k].1 = gz.sum_axis(Axis(0));
                        let gxw = gz.dot(&net.w);
                        let mut col = 0;
                        for &s in &BlockNet::window(k, level.fan_in, bn.n_blocks) {
                            let wsz = prev_widths[s];
                            let mut dst = gprev[s].view_mut();
                            let src = gxw.slice(ndarray::s![.., col..col + wsz]);
                            dst += &src;
                            col += wsz;
                        }
                    }
                    if li == 0 {
                        for (k, g) in gprev.iter().enumerate() {
                            let mut dst =
                                gx.slice_mut(ndarray::s![.., k * w_in..(k + 1) * w_in]);
                            dst += g;
                        }
                    } else {
                        gblocks = gprev;
                    }
                }
                (grads.into_iter().flatten().collect(), gx)
            }
        }
    }
}

/// Cached intermediates of one forward pass (inputs + pre-activations).
#[derive(Default)]
pub(crate) struct ForwardCache {
    chain: Vec<(Array2<f64>, Array2<f64>)>,
    blocks: Vec<Vec<(Array2<f64>, Array2<f64>)>>,
}

// ---------------------------------------------------------------------------
// Builders
// ---------------------------------------------------------------------------

/// Builds the trace autoencoder `α` and autodecoder `β`.
///
/// Both are three dense layers (ReLU, ReLU, linear); the encoder narrows
/// `m_t → m_t/2 → 4·m_p → m_p` and the decoder mirrors it. For training the
/// two are composed end to end (see [`compose_chains`]).
pub fn build_autoencoder(m_t: usize, m_p: usize, seed: u64) -> Result<(NetworkBundle, NetworkBundle)> {
    if m_p >= m_t {
        return Err(Error::Shape(format!(
            "bottleneck {m_p} must be narrower than the trace length {m_t}"
        )));
    }
    let h1 = (m_t / 2).max(m_p + 1);
    let h2 = (4 * m_p).max(m_p + 1);
    let mut rng = rng_from_seed(seed);
    let spec = |i, o, a| LayerSpec {
        in_width: i,
        out_width: o,
        activation: a,
    };
    let enc = vec![
        Dense::random(spec(m_t, h1, Activation::Relu), &mut rng),
        Dense::random(spec(h1, h2, Activation::Relu), &mut rng),
        Dense::random(spec(h2, m_p, Activation::Linear), &mut rng),
    ];
    let dec = vec![
        Dense::random(spec(m_p, h2, Activation::Relu), &mut rng),
        Dense::random(spec(h2, h1, Activation::Relu), &mut rng),
        Dense::random(spec(h1, m_t, Activation::Linear), &mut rng),
    ];
    Ok((
        NetworkBundle::new(Topology::Chain(enc))?,
        NetworkBundle::new(Topology::Chain(dec))?,
    ))
}

/// Concatenates two chains (used to train encoder+decoder end to end).
pub fn compose_chains(a: &NetworkBundle, b: &NetworkBundle) -> Result<NetworkBundle> {
    match (&a.topology, &b.topology) {
        (Topology::Chain(la), Topology::Chain(lb)) => {
            let mut layers = la.clone();
            layers.extend(lb.iter().cloned());
            NetworkBundle::new(Topology::Chain(layers))
        }
        _ => Err(Error::Shape("compose_chains needs two chains".into())),
    }
}

/// Splits a composed chain back into its two halves.
pub fn split_chain(net: &NetworkBundle, first_len: usize) -> Result<(NetworkBundle, NetworkBundle)> {
    match &net.topology {
        Topology::Chain(layers) if layers.len() > first_len => Ok((
            NetworkBundle::new(Topology::Chain(layers[..first_len].to_vec()))?,
            NetworkBundle::new(Topology::Chain(layers[first_len..].to_vec()))?,
        )),
        _ => Err(Error::Shape("cannot split chain at that point".into())),
    }
}

/// Parameters of the block-sparse correction network `φ'`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhiSpec {
    pub m_s: usize,
    pub m_r: usize,
    pub m_p: usize,
    /// Input blocks read by every level-1 subnet (odd, cyclic window).
    pub fan_in_1: usize,
    /// Level outputs read by every level-2/3 subnet (odd, cyclic window).
    pub fan_in_2: usize,
    /// Hidden width of every subnet.
    pub hidden: usize,
}

impl PhiSpec {
    /// The published configuration: 16 blocks of 64×50 with fan-ins 7 and 9.
    pub fn paper() -> Self {
        PhiSpec {
            m_s: 16,
            m_r: 64,
            m_p: 50,
            fan_in_1: 7,
            fan_in_2: 9,
            hidden: 256,
        }
    }

    pub fn block_width(&self) -> usize {
        self.m_r * self.m_p
    }

    /// Closed-form parameter count of [`build_phi`] for this spec.
    pub fn parameter_count(&self) -> usize {
        let w = self.block_width();
        let per_block = (self.fan_in_1 * w * self.hidden + self.hidden)
            + 2 * (self.fan_in_2 * self.hidden * self.hidden + self.hidden)
            + (self.hidden * w + w);
        self.m_s * per_block
    }

    /// Parameter count of the infeasible alternative: four dense layers,
    /// each as wide as the full `M_s·M_r·M_p` input/output vector.
    pub fn dense_equivalent_count(&self) -> usize {
        let total = self.m_s * self.block_width();
        4 * (total * total + total)
    }
}

/// Builds the residual block-sparse correction network `φ'`.
///
/// Three ReLU levels of parallel subnets wired with cyclic windows, one
/// linear layer per block, and the residual sum of input block `k` into
/// output block `k`. The final layer is zero-initialized, so a freshly
/// built network is exactly the identity map.
pub fn build_phi(spec: PhiSpec, seed: u64) -> Result<NetworkBundle> {
    let w = spec.block_width();
    if spec.fan_in_1 > spec.m_s {
        return Err(Error::Shape(format!(
            "fan_in_1 {} exceeds the number of blocks {}",
            spec.fan_in_1, spec.m_s
        )));
    }
    let mut rng = rng_from_seed(seed);
    let relu = |i, o| LayerSpec {
        in_width: i,
        out_width: o,
        activation: Activation::Relu,
    };
    let mut levels = Vec::new();
    levels.push(BlockLevel {
        fan_in: spec.fan_in_1,
        nets: (0..spec.m_s)
            .map(|_| Dense::random(relu(spec.fan_in_1 * w, spec.hidden), &mut rng))
            .collect(),
    });
    for _ in 0..2 {
        levels.push(BlockLevel {
            fan_in: spec.fan_in_2,
            nets: (0..spec.m_s)
                .map(|_| Dense::random(relu(spec.fan_in_2 * spec.hidden, spec.hidden), &mut rng))
                .collect(),
        });
    }
    levels.push(BlockLevel {
        fan_in: 1,
        nets: (0..spec.m_s)
            .map(|_| {
                Dense::zeros(LayerSpec {
                    in_width: spec.hidden,
                    out_width: w,
                    activation: Activation::Linear,
                })
            })
            .collect(),
    });
    NetworkBundle::new(Topology::Blocks(BlockNet {
        n_blocks: spec.m_s,
        in_block_width: w,
        levels,
        residual: true,
    }))
}

/// Builds the direct-inversion baseline: the same block-sparse shape as
/// `φ'` but mapping encoded measurements to the flattened field, so the
/// residual sum is omitted (the dimensions differ) and the final level
/// splits the `out_dim` field values across blocks.
pub fn build_direct_inversion(spec: PhiSpec, out_dim: usize, seed: u64) -> Result<NetworkBundle> {
    let w = spec.block_width();
    let mut rng = rng_from_seed(seed);
    let relu = |i, o| LayerSpec {
        in_width: i,
        out_width: o,
        activation: Activation::Relu,
    };
    let mut levels = Vec::new();
    levels.push(BlockLevel {
        fan_in: spec.fan_in_1,
        nets: (0..spec.m_s)
            .map(|_| Dense::random(relu(spec.fan_in_1 * w, spec.hidden), &mut rng))
            .collect(),
    });
    for _ in 0..2 {
        levels.push(BlockLevel {
            fan_in: spec.fan_in_2,
            nets: (0..spec.m_s)
                .map(|_| Dense::random(relu(spec.fan_in_2 * spec.hidden, spec.hidden), &mut rng))
                .collect(),
        });
    }
    let base = out_dim / spec.m_s;
    let extra = out_dim % spec.m_s;
    levels.push(BlockLevel {
        fan_in: 1,
        nets: (0..spec.m_s)
            .map(|k| {
                let width = base + usize::from(k < extra);
                Dense::zeros(LayerSpec {
                    in_width: spec.hidden,
                    out_width: width,
                    activation: Activation::Linear,
                })
            })
            .collect(),
    });
    NetworkBundle::new(Topology::Blocks(BlockNet {
        n_blocks: spec.m_s,
        in_block_width: w,
        levels,
        residual: false,
    }))
}

// ---------------------------------------------------------------------------
// Trace encoding
// ---------------------------------------------------------------------------

/// Applies the encoder to every transmitter/receiver trace:
/// `M_s × M_r × M_t` measurements become `M_s × M_r × M_p` latents.
pub fn encode_set(alpha: &NetworkBundle, m: &MeasurementSet) -> Result<Array3<f64>> {
    let (m_s, m_r, m_t) = m.data.dim();
    if alpha.input_width() != m_t {
        return Err(Error::Shape(format!(
            "encoder expects {} samples per trace, measurement has {m_t}",
            alpha.input_width()
        )));
    }
    let m_p = alpha.output_width();
    let flat = m
        .data
        .to_shape((m_s * m_r, m_t))
        .expect("contiguous measurement data")
        .to_owned();
    let lat = alpha.apply_batch(&flat)?;
    Ok(lat
        .to_shape((m_s, m_r, m_p))
        .expect("latent reshape")
        .to_owned())
}

/// Inverse of [`encode_set`]: decodes latents back into a measurement set.
pub fn decode_set(
    beta: &NetworkBundle,
    latents: &Array3<f64>,
    dt: f64,
    geometry: &crate::wavesim::SensorGeometry,
) -> Result<MeasurementSet> {
    let (m_s, m_r, m_p) = latents.dim();
    if beta.input_width() != m_p {
        return Err(Error::Shape(format!(
            "decoder expects latent width {}, got {m_p}",
            beta.input_width()
        )));
    }
    let m_t = beta.output_width();
    let flat = latents
        .to_shape((m_s * m_r, m_p))
        .expect("contiguous latents")
        .to_owned();
    let traces = beta.apply_batch(&flat)?;
    Ok(MeasurementSet {
        data: traces
            .to_shape((m_s, m_r, m_t))
            .expect("trace reshape")
            .to_owned(),
        dt,
        geometry: geometry.clone(),
        tier: None,
    })
}
