//! Architecture builders: DenseNet-121 and the hybrid NemaNet (DenseNet-121
//! backbone fused with a parallel Inception-style branch).
//!
//! Both networks share the same stem naming (`features.conv0` … `features.pool0`)
//! and backbone naming (`features.denseblock*`, `features.transition*`,
//! `features.norm5`), so a DenseNet-121 checkpoint transfers onto NemaNet by
//! parameter name alone. The classification heads are named differently on
//! purpose (`classifier` vs `head`): a backbone checkpoint can never collide
//! with the hybrid head even when class counts differ.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::engine::scalar::Scalar;
use crate::engine::tensor::Tensor;
use crate::error::{Error, Result};
use crate::model::graph::{GraphNode, LayerKind, Model, NodeId, ParamStore};

/// DenseNet-121 structure constants.
const DENSE_BLOCKS: [usize; 4] = [6, 12, 24, 16];
const GROWTH_RATE: usize = 32;
const BN_SIZE: usize = 4;
const STEM_CHANNELS: usize = 64;

/// Channel widths of the Inception-style branch. All convolutions are
/// bias-free and followed by batch norm + ReLU. Defaults are chosen so the
/// full-width NemaNet parameter census lands exactly on its published size.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InceptionWidths {
    /// Module A (grid size S/4): 1x1 branch.
    pub a1: usize,
    /// Module A: double-3x3 branch (1x1 reduce, then two 3x3).
    pub a2_red: usize,
    pub a2: usize,
    /// Module A: single-3x3 branch (1x1 reduce, then one 3x3).
    pub a3_red: usize,
    pub a3: usize,
    /// Module A: pool branch 1x1 projection.
    pub a_pool: usize,
    /// Reduction to S/8: 1x1 reduce then strided 3x3.
    pub r1_red: usize,
    pub r1_out: usize,
    /// Module B (S/8): 1x1 branch.
    pub b1: usize,
    /// Module B: 1x7/7x1 factorized branch.
    pub b2_red: usize,
    pub b2: usize,
    /// Module B: double factorized branch (four inner 7-taps).
    pub b3_red: usize,
    pub b3: usize,
    /// Module B: pool branch projection.
    pub b_pool: usize,
    /// Reduction to S/16.
    pub r2_red: usize,
    pub r2_out: usize,
    /// Module C (S/16): 1x1 branch.
    pub c1: usize,
    /// Module C: expanded branch (1x1 then parallel 1x3 / 3x1).
    pub c2_red: usize,
    pub c2: usize,
    /// Module C: deep expanded branch (1x1, 3x3, then parallel 1x3 / 3x1).
    pub c3_red: usize,
    pub c3_mid: usize,
    pub c3: usize,
    /// Module C: pool branch projection.
    pub c_pool: usize,
    /// Reduction to S/32, aligning the branch with the backbone grid.
    pub r3_red: usize,
    pub r3_out: usize,
}

impl Default for InceptionWidths {
    fn default() -> Self {
        InceptionWidths {
            a1: 64,
            a2_red: 48,
            a2: 64,
            a3_red: 32,
            a3: 48,
            a_pool: 64,
            r1_red: 96,
            r1_out: 192,
            b1: 192,
            b2_red: 128,
            b2: 192,
            b3_red: 128,
            b3: 192,
            b_pool: 168,
            r2_red: 192,
            r2_out: 320,
            c1: 320,
            c2_red: 384,
            c2: 384,
            c3_red: 448,
            c3_mid: 384,
            c3: 384,
            c_pool: 296,
            r3_red: 235,
            r3_out: 2197,
        }
    }
}

impl InceptionWidths {
    /// Scale every width down by `divisor` (floored, minimum 1).
    pub fn scaled(&self, divisor: usize) -> InceptionWidths {
        let s = |w| scaled(w, divisor);
        InceptionWidths {
            a1: s(self.a1),
            a2_red: s(self.a2_red),
            a2: s(self.a2),
            a3_red: s(self.a3_red),
            a3: s(self.a3),
            a_pool: s(self.a_pool),
            r1_red: s(self.r1_red),
            r1_out: s(self.r1_out),
            b1: s(self.b1),
            b2_red: s(self.b2_red),
            b2: s(self.b2),
            b3_red: s(self.b3_red),
            b3: s(self.b3),
            b_pool: s(self.b_pool),
            r2_red: s(self.r2_red),
            r2_out: s(self.r2_out),
            c1: s(self.c1),
            c2_red: s(self.c2_red),
            c2: s(self.c2),
            c3_red: s(self.c3_red),
            c3_mid: s(self.c3_mid),
            c3: s(self.c3),
            c_pool: s(self.c_pool),
            r3_red: s(self.r3_red),
            r3_out: s(self.r3_out),
        }
    }
}

fn scaled(width: usize, divisor: usize) -> usize {
    (width / divisor).max(1)
}

/// Incrementally assembles a topologically ordered layer graph, tracking the
/// channel count of every node so convolution fan-in (and thus weight init)
/// never needs to be spelled out by callers.
struct GraphBuilder<S> {
    nodes: Vec<GraphNode>,
    params: ParamStore<S>,
    channels: Vec<usize>,
    rng: ChaCha8Rng,
}

impl<S: Scalar> GraphBuilder<S> {
    fn new(seed: u64) -> Self {
        GraphBuilder {
            nodes: Vec::new(),
            params: ParamStore::new(),
            channels: Vec::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    fn push(&mut self, name: &str, kind: LayerKind, inputs: Vec<NodeId>, out_channels: usize) -> NodeId {
        self.nodes.push(GraphNode { name: name.to_string(), kind, inputs });
        self.channels.push(out_channels);
        self.nodes.len() - 1
    }

    fn input(&mut self, channels: usize) -> NodeId {
        self.push("input", LayerKind::Input, vec![], channels)
    }

    /// Bias-free convolution with He-uniform init; the parameter is named
    /// `{name}.weight`.
    fn conv(
        &mut self,
        name: &str,
        x: NodeId,
        out_channels: usize,
        kernel: (usize, usize),
        stride: usize,
        padding: (usize, usize),
    ) -> NodeId {
        let cin = self.channels[x];
        let fan_in = cin * kernel.0 * kernel.1;
        let w = Tensor::he_uniform(vec![out_channels, cin, kernel.0, kernel.1], fan_in, &mut self.rng);
        let weight = self
            .params
            .add(format!("{name}.weight"), w, true)
            .expect("builder-generated names are unique");
        self.push(name, LayerKind::Conv { weight, bias: None, stride, padding }, vec![x], out_channels)
    }

    /// Batch norm over the input's channels; parameters are
    /// `{name}.{weight,bias,running_mean,running_var}`.
    fn batch_norm(&mut self, name: &str, x: NodeId) -> NodeId {
        let c = self.channels[x];
        let gamma = self
            .params
            .add(format!("{name}.weight"), Tensor::ones(vec![c]), true)
            .expect("builder-generated names are unique");
        let beta = self
            .params
            .add(format!("{name}.bias"), Tensor::zeros(vec![c]), true)
            .expect("builder-generated names are unique");
        let running_mean = self
            .params
            .add(format!("{name}.running_mean"), Tensor::zeros(vec![c]), false)
            .expect("builder-generated names are unique");
        let running_var = self
            .params
            .add(format!("{name}.running_var"), Tensor::ones(vec![c]), false)
            .expect("builder-generated names are unique");
        self.push(name, LayerKind::BatchNorm { gamma, beta, running_mean, running_var }, vec![x], c)
    }

    fn relu(&mut self, name: &str, x: NodeId) -> NodeId {
        let c = self.channels[x];
        self.push(name, LayerKind::Relu, vec![x], c)
    }

    fn max_pool(&mut self, name: &str, x: NodeId, window: usize, stride: usize, padding: usize) -> NodeId {
        let c = self.channels[x];
        self.push(name, LayerKind::MaxPool { window, stride, padding }, vec![x], c)
    }

    fn avg_pool(&mut self, name: &str, x: NodeId, window: usize, stride: usize, padding: usize) -> NodeId {
        let c = self.channels[x];
        self.push(name, LayerKind::AvgPool { window, stride, padding }, vec![x], c)
    }

    fn global_avg_pool(&mut self, name: &str, x: NodeId) -> NodeId {
        let c = self.channels[x];
        self.push(name, LayerKind::GlobalAvgPool, vec![x], c)
    }

    fn concat(&mut self, name: &str, inputs: &[NodeId]) -> NodeId {
        let c = inputs.iter().map(|&i| self.channels[i]).sum();
        self.push(name, LayerKind::Concat, inputs.to_vec(), c)
    }

    /// Zero-initialized linear head (`{name}.{weight,bias}`). Starting the
    /// head at zero makes an untrained classifier emit exactly uniform
    /// probabilities regardless of what the feature extractor produces.
    fn linear_zero(&mut self, name: &str, x: NodeId, out_features: usize) -> NodeId {
        let in_features = self.channels[x];
        let weight = self
            .params
            .add(format!("{name}.weight"), Tensor::zeros(vec![in_features, out_features]), true)
            .expect("builder-generated names are unique");
        let bias = self
            .params
            .add(format!("{name}.bias"), Tensor::zeros(vec![out_features]), true)
            .expect("builder-generated names are unique");
        self.push(name, LayerKind::Linear { weight, bias }, vec![x], out_features)
    }

    /// conv -> batch norm -> ReLU, the basic unit of the Inception branch.
    fn conv_bn_relu(
        &mut self,
        prefix: &str,
        x: NodeId,
        out_channels: usize,
        kernel: (usize, usize),
        stride: usize,
        padding: (usize, usize),
    ) -> NodeId {
        let y = self.conv(&format!("{prefix}.conv"), x, out_channels, kernel, stride, padding);
        let y = self.batch_norm(&format!("{prefix}.norm"), y);
        self.relu(&format!("{prefix}.relu"), y)
    }

    fn finish(self, arch: &str, num_classes: usize) -> Result<Model<S>> {
        Model::from_parts(self.nodes, self.params, arch, num_classes)
    }
}

/// Shared stem: 7x7/2 conv, BN, ReLU, 3x3/2 max pool. Output grid is S/4.
fn stem<S: Scalar>(gb: &mut GraphBuilder<S>, x: NodeId, channels: usize) -> NodeId {
    let y = gb.conv("features.conv0", x, channels, (7, 7), 2, (3, 3));
    let y = gb.batch_norm("features.norm0", y);
    let y = gb.relu("features.relu0", y);
    gb.max_pool("features.pool0", y, 3, 2, 1)
}

/// One dense block: every layer sees the concatenation of everything before
/// it and contributes `growth` new channels.
fn dense_block<S: Scalar>(
    gb: &mut GraphBuilder<S>,
    block_idx: usize,
    mut features: NodeId,
    num_layers: usize,
    growth: usize,
    bottleneck: usize,
) -> NodeId {
    for layer in 1..=num_layers {
        let p = format!("features.denseblock{block_idx}.denselayer{layer}");
        let y = gb.batch_norm(&format!("{p}.norm1"), features);
        let y = gb.relu(&format!("{p}.relu1"), y);
        let y = gb.conv(&format!("{p}.conv1"), y, bottleneck, (1, 1), 1, (0, 0));
        let y = gb.batch_norm(&format!("{p}.norm2"), y);
        let y = gb.relu(&format!("{p}.relu2"), y);
        let y = gb.conv(&format!("{p}.conv2"), y, growth, (3, 3), 1, (1, 1));
        features = gb.concat(&format!("{p}.cat"), &[features, y]);
    }
    features
}

/// Transition: BN, ReLU, 1x1 conv halving the channels, 2x2/2 average pool.
fn transition<S: Scalar>(gb: &mut GraphBuilder<S>, idx: usize, x: NodeId) -> NodeId {
    let out = gb.channels[x] / 2;
    let p = format!("features.transition{idx}");
    let y = gb.batch_norm(&format!("{p}.norm"), x);
    let y = gb.relu(&format!("{p}.relu"), y);
    let y = gb.conv(&format!("{p}.conv"), y, out, (1, 1), 1, (0, 0));
    gb.avg_pool(&format!("{p}.pool"), y, 2, 2, 0)
}

/// DenseNet-121 feature extractor from the stem output; returns the final
/// (post-norm5, post-ReLU) feature map at grid S/32.
fn densenet_features<S: Scalar>(gb: &mut GraphBuilder<S>, stem_out: NodeId, divisor: usize) -> NodeId {
    let growth = scaled(GROWTH_RATE, divisor);
    let bottleneck = BN_SIZE * growth;
    let mut x = stem_out;
    for (i, &layers) in DENSE_BLOCKS.iter().enumerate() {
        x = dense_block(gb, i + 1, x, layers, growth, bottleneck);
        if i + 1 < DENSE_BLOCKS.len() {
            x = transition(gb, i + 1, x);
        }
    }
    let x = gb.batch_norm("features.norm5", x);
    gb.relu("features.relu5", x)
}

fn inception_a<S: Scalar>(gb: &mut GraphBuilder<S>, x: NodeId, w: &InceptionWidths) -> NodeId {
    let p = "inception.a";
    let b1 = gb.conv_bn_relu(&format!("{p}.b1"), x, w.a1, (1, 1), 1, (0, 0));
    let b2 = gb.conv_bn_relu(&format!("{p}.b2.1"), x, w.a2_red, (1, 1), 1, (0, 0));
    let b2 = gb.conv_bn_relu(&format!("{p}.b2.2"), b2, w.a2, (3, 3), 1, (1, 1));
    let b2 = gb.conv_bn_relu(&format!("{p}.b2.3"), b2, w.a2, (3, 3), 1, (1, 1));
    let b3 = gb.conv_bn_relu(&format!("{p}.b3.1"), x, w.a3_red, (1, 1), 1, (0, 0));
    let b3 = gb.conv_bn_relu(&format!("{p}.b3.2"), b3, w.a3, (3, 3), 1, (1, 1));
    let pool = gb.avg_pool(&format!("{p}.b4.pool"), x, 3, 1, 1);
    let b4 = gb.conv_bn_relu(&format!("{p}.b4.1"), pool, w.a_pool, (1, 1), 1, (0, 0));
    gb.concat(&format!("{p}.cat"), &[b1, b2, b3, b4])
}

fn inception_b<S: Scalar>(gb: &mut GraphBuilder<S>, x: NodeId, w: &InceptionWidths) -> NodeId {
    let p = "inception.b";
    let b1 = gb.conv_bn_relu(&format!("{p}.b1"), x, w.b1, (1, 1), 1, (0, 0));
    let b2 = gb.conv_bn_relu(&format!("{p}.b2.1"), x, w.b2_red, (1, 1), 1, (0, 0));
    let b2 = gb.conv_bn_relu(&format!("{p}.b2.2"), b2, w.b2_red, (1, 7), 1, (0, 3));
    let b2 = gb.conv_bn_relu(&format!("{p}.b2.3"), b2, w.b2, (7, 1), 1, (3, 0));
    let b3 = gb.conv_bn_relu(&format!("{p}.b3.1"), x, w.b3_red, (1, 1), 1, (0, 0));
    let b3 = gb.conv_bn_relu(&format!("{p}.b3.2"), b3, w.b3_red, (7, 1), 1, (3, 0));
    let b3 = gb.conv_bn_relu(&format!("{p}.b3.3"), b3, w.b3_red, (1, 7), 1, (0, 3));
    let b3 = gb.conv_bn_relu(&format!("{p}.b3.4"), b3, w.b3_red, (7, 1), 1, (3, 0));
    let b3 = gb.conv_bn_relu(&format!("{p}.b3.5"), b3, w.b3, (1, 7), 1, (0, 3));
    let pool = gb.avg_pool(&format!("{p}.b4.pool"), x, 3, 1, 1);
    let b4 = gb.conv_bn_relu(&format!("{p}.b4.1"), pool, w.b_pool, (1, 1), 1, (0, 0));
    gb.concat(&format!("{p}.cat"), &[b1, b2, b3, b4])
}

fn inception_c<S: Scalar>(gb: &mut GraphBuilder<S>, x: NodeId, w: &InceptionWidths) -> NodeId {
    let p = "inception.c";
    let b1 = gb.conv_bn_relu(&format!("{p}.b1"), x, w.c1, (1, 1), 1, (0, 0));
    let b2 = gb.conv_bn_relu(&format!("{p}.b2.1"), x, w.c2_red, (1, 1), 1, (0, 0));
    let b2a = gb.conv_bn_relu(&format!("{p}.b2.2a"), b2, w.c2, (1, 3), 1, (0, 1));
    let b2b = gb.conv_bn_relu(&format!("{p}.b2.2b"), b2, w.c2, (3, 1), 1, (1, 0));
    let b3 = gb.conv_bn_relu(&format!("{p}.b3.1"), x, w.c3_red, (1, 1), 1, (0, 0));
    let b3 = gb.conv_bn_relu(&format!("{p}.b3.2"), b3, w.c3_mid, (3, 3), 1, (1, 1));
    let b3a = gb.conv_bn_relu(&format!("{p}.b3.3a"), b3, w.c3, (1, 3), 1, (0, 1));
    let b3b = gb.conv_bn_relu(&format!("{p}.b3.3b"), b3, w.c3, (3, 1), 1, (1, 0));
    let pool = gb.avg_pool(&format!("{p}.b4.pool"), x, 3, 1, 1);
    let b4 = gb.conv_bn_relu(&format!("{p}.b4.1"), pool, w.c_pool, (1, 1), 1, (0, 0));
    gb.concat(&format!("{p}.cat"), &[b1, b2a, b2b, b3a, b3b, b4])
}

/// Grid reduction: 1x1 reduce followed by a stride-2 3x3.
fn inception_reduction<S: Scalar>(
    gb: &mut GraphBuilder<S>,
    idx: usize,
    x: NodeId,
    red: usize,
    out: usize,
) -> NodeId {
    let p = format!("inception.r{idx}");
    let y = gb.conv_bn_relu(&format!("{p}.1"), x, red, (1, 1), 1, (0, 0));
    gb.conv_bn_relu(&format!("{p}.2"), y, out, (3, 3), 2, (1, 1))
}

fn validate_build(arch: &'static str, num_classes: usize, width_divisor: usize, input_size: usize) -> Result<()> {
    if num_classes < 2 {
        return Err(Error::invalid(arch, format!("need at least 2 classes, got {num_classes}")));
    }
    if width_divisor == 0 {
        return Err(Error::invalid(arch, "width divisor must be at least 1"));
    }
    if input_size < 32 || input_size % 32 != 0 {
        return Err(Error::invalid(
            arch,
            format!("input size must be a positive multiple of 32, got {input_size}"),
        ));
    }
    Ok(())
}

/// Build DenseNet-121 (`features.*` + `classifier.*`). With `width_divisor`
/// of 1 and 1000 classes this reproduces the canonical parameter census
/// (8,062,504 parameters) exactly.
pub fn build_densenet121<S: Scalar>(
    num_classes: usize,
    width_divisor: usize,
    input_size: usize,
    seed: u64,
) -> Result<Model<S>> {
    validate_build("densenet121", num_classes, width_divisor, input_size)?;
    let mut gb = GraphBuilder::new(seed);
    let input = gb.input(3);
    let s = stem(&mut gb, input, scaled(STEM_CHANNELS, width_divisor));
    let feat = densenet_features(&mut gb, s, width_divisor);
    let gap = gb.global_avg_pool("gap", feat);
    gb.linear_zero("classifier", gap, num_classes);
    let model = gb.finish("densenet121", num_classes)?;
    model.infer_shapes([1, 3, input_size, input_size])?;
    Ok(model)
}

/// Build NemaNet: the DenseNet-121 backbone and an Inception-style branch
/// run in parallel from the shared stem; their S/32 feature maps are
/// concatenated, globally pooled, and classified by a zero-initialized head.
pub fn build_nemanet<S: Scalar>(
    num_classes: usize,
    width_divisor: usize,
    widths: &InceptionWidths,
    input_size: usize,
    seed: u64,
) -> Result<Model<S>> {
    validate_build("nemanet", num_classes, width_divisor, input_size)?;
    let w = widths.scaled(width_divisor);
    let mut gb = GraphBuilder::new(seed);
    let input = gb.input(3);
    let s = stem(&mut gb, input, scaled(STEM_CHANNELS, width_divisor));
    let backbone = densenet_features(&mut gb, s, width_divisor);
    let a = inception_a(&mut gb, s, &w);
    let r1 = inception_reduction(&mut gb, 1, a, w.r1_red, w.r1_out);
    let b = inception_b(&mut gb, r1, &w);
    let r2 = inception_reduction(&mut gb, 2, b, w.r2_red, w.r2_out);
    let c = inception_c(&mut gb, r2, &w);
    let r3 = inception_reduction(&mut gb, 3, c, w.r3_red, w.r3_out);
    let fused = gb.concat("hybrid.cat", &[backbone, r3]);
    let gap = gb.global_avg_pool("hybrid.gap", fused);
    gb.linear_zero("head", gap, num_classes);
    let model = gb.finish("nemanet", num_classes)?;
    model.infer_shapes([1, 3, input_size, input_size])?;
    Ok(model)
}

/// Build a model by architecture name ("densenet121" or "nemanet").
pub fn build_by_name<S: Scalar>(
    arch: &str,
    num_classes: usize,
    width_divisor: usize,
    widths: &InceptionWidths,
    input_size: usize,
    seed: u64,
) -> Result<Model<S>> {
    match arch {
        "densenet121" => build_densenet121(num_classes, width_divisor, input_size, seed),
        "nemanet" => build_nemanet(num_classes, width_divisor, widths, input_size, seed),
        other => Err(Error::invalid(
            "build_by_name",
            format!("unknown architecture `{other}` (expected `densenet121` or `nemanet`)"),
        )),
    }
}
