//! Encoder + head networks as small DAGs with forward evaluation and
//! reverse-mode input gradients.
//!
//! Fragments are built without knowing the image size; [`assemble`] splices an
//! encoder and a head together, appends the final bilinear resize back to the
//! input resolution and infers every node's shape and stride.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, shape, Error, Result};
use crate::ops::{self, ConvSpec, PoolContext, ReluMask};
use crate::tensor::{Kernel, Shape, Tensor};

pub type NodeId = usize;

/// Spatial size a resize node upsamples to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResizeTarget {
    Fixed { height: usize, width: usize },
    /// Same spatial size as another node of the same fragment.
    LikeNode(NodeId),
    /// Resolution of the network input image.
    GraphInput,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Conv { kernel: Kernel, spec: ConvSpec },
    Relu,
    MaxPool,
    Resize(ResizeTarget),
    GlobalAvgPool,
    Concat,
    Add,
}

impl Layer {
    pub fn kind(&self) -> &'static str {
        match self {
            Layer::Conv { .. } => "conv",
            Layer::Relu => "relu",
            Layer::MaxPool => "maxpool",
            Layer::Resize(_) => "bilinear_resize",
            Layer::GlobalAvgPool => "global_avgpool",
            Layer::Concat => "concat",
            Layer::Add => "add",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub layer: Layer,
    pub inputs: Vec<NodeId>,
}

/// A network piece with one input (id 0) and one output.
///
/// Node `k >= 1` is `nodes[k - 1]`; inputs always refer to earlier ids.
#[derive(Debug, Clone, PartialEq)]
pub struct Fragment {
    in_channels: usize,
    nodes: Vec<Node>,
    channels: Vec<usize>,
    output: NodeId,
}

impl Fragment {
    pub fn identity(in_channels: usize) -> Self {
        FragmentBuilder::new(in_channels).finish(0)
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn out_channels(&self) -> usize {
        self.channels[self.output]
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn is_identity(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Dilations of every convolution, in build order.
    pub fn conv_dilations(&self) -> Vec<usize> {
        self.nodes
            .iter()
            .filter_map(|n| match &n.layer {
                Layer::Conv { spec, .. } => Some(spec.dilation),
                _ => None,
            })
            .collect()
    }
}

/// Incremental construction of a [`Fragment`] with channel bookkeeping.
#[derive(Debug, Clone)]
pub struct FragmentBuilder {
    in_channels: usize,
    nodes: Vec<Node>,
    channels: Vec<usize>,
}

impl FragmentBuilder {
    pub fn new(in_channels: usize) -> Self {
        Self { in_channels, nodes: Vec::new(), channels: vec![in_channels] }
    }

    pub const INPUT: NodeId = 0;

    fn push(&mut self, layer: Layer, inputs: Vec<NodeId>, channels: usize) -> NodeId {
        self.nodes.push(Node { layer, inputs });
        self.channels.push(channels);
        self.nodes.len()
    }

    fn check(&self, id: NodeId) -> Result<()> {
        if id >= self.channels.len() {
            return Err(Error::GraphBuild(format!("node {id} does not exist yet")));
        }
        Ok(())
    }

    pub fn channels(&self, id: NodeId) -> usize {
        self.channels[id]
    }

    pub fn conv(&mut self, x: NodeId, kernel: Kernel, spec: ConvSpec) -> Result<NodeId> {
        self.check(x)?;
        if kernel.in_channels() != self.channels[x] {
            return Err(Error::GraphBuild(format!(
                "conv expects {} input channels but node {x} has {}",
                kernel.in_channels(),
                self.channels[x]
            )));
        }
        let out = kernel.out_channels();
        Ok(self.push(Layer::Conv { kernel, spec }, vec![x], out))
    }

    fn unary(&mut self, x: NodeId, layer: Layer) -> Result<NodeId> {
        self.check(x)?;
        let c = self.channels[x];
        Ok(self.push(layer, vec![x], c))
    }

    pub fn relu(&mut self, x: NodeId) -> Result<NodeId> {
        self.unary(x, Layer::Relu)
    }

    pub fn maxpool(&mut self, x: NodeId) -> Result<NodeId> {
        self.unary(x, Layer::MaxPool)
    }

    pub fn global_avgpool(&mut self, x: NodeId) -> Result<NodeId> {
        self.unary(x, Layer::GlobalAvgPool)
    }

    pub fn resize(&mut self, x: NodeId, target: ResizeTarget) -> Result<NodeId> {
        if let ResizeTarget::LikeNode(other) = target {
            self.check(other)?;
        }
        self.unary(x, Layer::Resize(target))
    }

    pub fn concat(&mut self, xs: &[NodeId]) -> Result<NodeId> {
        if xs.is_empty() {
            return Err(Error::GraphBuild("concat needs at least one input".into()));
        }
        for &x in xs {
            self.check(x)?;
        }
        let c = xs.iter().map(|&x| self.channels[x]).sum();
        Ok(self.push(Layer::Concat, xs.to_vec(), c))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.check(a)?;
        self.check(b)?;
        if self.channels[a] != self.channels[b] {
            return Err(Error::GraphBuild(format!(
                "add inputs have {} and {} channels",
                self.channels[a], self.channels[b]
            )));
        }
        let c = self.channels[a];
        Ok(self.push(Layer::Add, vec![a, b], c))
    }

    pub fn finish(self, output: NodeId) -> Fragment {
        assert!(output < self.channels.len(), "fragment output {output} does not exist");
        Fragment { in_channels: self.in_channels, nodes: self.nodes, channels: self.channels, output }
    }
}

/// Derives independent weight streams from one user seed.
pub(crate) fn derive_seed(seed: u64, stream: u64) -> u64 {
    seed ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// `log2(stride)` stages of 3×3 same conv → ReLU → 2×2 max pool, He-uniform weights.
///
/// Stage `i` uses `channels[i]` output channels; extra entries are ignored.
pub fn build_encoder(stride: usize, channels: &[usize], in_channels: usize, seed: u64) -> Result<Fragment> {
    if !matches!(stride, 1 | 2 | 4 | 8 | 16 | 32) {
        return Err(invalid(format!("encoder stride must be a power of two in 1..=32, got {stride}")));
    }
    let stages = stride.trailing_zeros() as usize;
    if channels.len() < stages {
        return Err(invalid(format!(
            "stride {stride} needs {stages} encoder channel widths, got {}",
            channels.len()
        )));
    }
    if channels.iter().take(stages).any(|&c| c == 0) {
        return Err(invalid("encoder channel widths must be >= 1"));
    }
    let mut b = FragmentBuilder::new(in_channels);
    let mut x = FragmentBuilder::INPUT;
    let mut cin = in_channels;
    for (stage, &cout) in channels.iter().take(stages).enumerate() {
        let kernel = Kernel::he_uniform(3, 3, cin, cout, derive_seed(seed, stage as u64))?;
        x = b.conv(x, kernel, ConvSpec::same(3, 1)?)?;
        x = b.relu(x)?;
        x = b.maxpool(x)?;
        cin = cout;
    }
    Ok(b.finish(x))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AsppSpec {
    pub base_rate: usize,
    pub branch_channels: usize,
    pub in_channels: usize,
    /// Include the global-average-pool branch.
    pub image_pool: bool,
    pub seed: u64,
}

impl AsppSpec {
    pub fn new(base_rate: usize, branch_channels: usize, in_channels: usize) -> Self {
        Self { base_rate, branch_channels, in_channels, image_pool: true, seed: 0 }
    }

    /// Dilations of the three atrous branches: `{r, 2r, 3r}`.
    pub fn dilations(&self) -> [usize; 3] {
        [self.base_rate, 2 * self.base_rate, 3 * self.base_rate]
    }
}

/// Parallel 1×1 conv, optional image pooling, and three 3×3 atrous convs at
/// `{r, 2r, 3r}`, concatenated and merged by one 1×1 conv to `n_classes`.
///
/// Branches carry no normalization or activation.
pub fn build_aspp_head(spec: &AsppSpec, n_classes: usize) -> Result<Fragment> {
    if spec.base_rate == 0 {
        return Err(invalid("ASPP base rate must be >= 1"));
    }
    if spec.branch_channels == 0 || spec.in_channels == 0 || n_classes == 0 {
        return Err(invalid("ASPP channel counts must be >= 1"));
    }
    let (cin, cb) = (spec.in_channels, spec.branch_channels);
    let seed = |k: u64| derive_seed(spec.seed, 100 + k);
    let mut b = FragmentBuilder::new(cin);
    let x = FragmentBuilder::INPUT;
    let mut branches = Vec::with_capacity(5);

    branches.push(b.conv(x, Kernel::he_uniform(1, 1, cin, cb, seed(0))?, ConvSpec::new(1, 1, 0)?)?);
    if spec.image_pool {
        let pooled = b.global_avgpool(x)?;
        let proj = b.conv(pooled, Kernel::he_uniform(1, 1, cin, cb, seed(1))?, ConvSpec::new(1, 1, 0)?)?;
        branches.push(b.resize(proj, ResizeTarget::LikeNode(x))?);
    }
    for (k, d) in spec.dilations().into_iter().enumerate() {
        let kernel = Kernel::he_uniform(3, 3, cin, cb, seed(2 + k as u64))?;
        branches.push(b.conv(x, kernel, ConvSpec::same(3, d)?)?);
    }
    let cat = b.concat(&branches)?;
    let merged_in = b.channels(cat);
    let out = b.conv(cat, Kernel::he_uniform(1, 1, merged_in, n_classes, seed(9))?, ConvSpec::new(1, 1, 0)?)?;
    Ok(b.finish(out))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FcnD6Spec {
    pub rate: usize,
    pub in_channels: usize,
    pub mid_channels: usize,
    /// ReLU between the two atrous convolutions.
    pub relu: bool,
    pub seed: u64,
}

impl FcnD6Spec {
    pub fn new(rate: usize, in_channels: usize, mid_channels: usize) -> Self {
        Self { rate, in_channels, mid_channels, relu: true, seed: 0 }
    }
}

/// Two sequential 3×3 convs with dilation `rate`, then a 1×1 conv to `n_classes`.
pub fn build_fcn_d6_head(spec: &FcnD6Spec, n_classes: usize) -> Result<Fragment> {
    if spec.rate == 0 {
        return Err(invalid("FCN-D6 rate must be >= 1"));
    }
    if spec.mid_channels == 0 || spec.in_channels == 0 || n_classes == 0 {
        return Err(invalid("FCN-D6 channel counts must be >= 1"));
    }
    let seed = |k: u64| derive_seed(spec.seed, 200 + k);
    let (cin, cm) = (spec.in_channels, spec.mid_channels);
    let mut b = FragmentBuilder::new(cin);
    let mut x = b.conv(FragmentBuilder::INPUT, Kernel::he_uniform(3, 3, cin, cm, seed(0))?, ConvSpec::same(3, spec.rate)?)?;
    if spec.relu {
        x = b.relu(x)?;
    }
    x = b.conv(x, Kernel::he_uniform(3, 3, cm, cm, seed(1))?, ConvSpec::same(3, spec.rate)?)?;
    if spec.relu {
        x = b.relu(x)?;
    }
    let out = b.conv(x, Kernel::he_uniform(1, 1, cm, n_classes, seed(2))?, ConvSpec::new(1, 1, 0)?)?;
    Ok(b.finish(out))
}

/// A fully shaped network: image → encoder → head → resize to image size.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkGraph {
    /// Node 0 is the input; node `k >= 1` is `nodes[k - 1]`.
    nodes: Vec<Node>,
    shapes: Vec<Shape>,
    strides: Vec<usize>,
    feature_node: NodeId,
    output: NodeId,
}

/// Splices `encoder` and `head` and appends the final resize to `input_h × input_w`.
pub fn assemble(encoder: &Fragment, head: &Fragment, input_h: usize, input_w: usize) -> Result<NetworkGraph> {
    if input_h == 0 || input_w == 0 {
        return Err(invalid("input size must be >= 1"));
    }
    if head.in_channels != encoder.out_channels() {
        return Err(Error::GraphBuild(format!(
            "head expects {} channels but the encoder produces {}",
            head.in_channels,
            encoder.out_channels()
        )));
    }
    let input_shape = Shape::new(input_h, input_w, encoder.in_channels);
    let mut nodes: Vec<Node> = Vec::with_capacity(encoder.nodes.len() + head.nodes.len() + 1);

    nodes.extend(encoder.nodes.iter().cloned());
    let head_offset = encoder.nodes.len();
    let head_map = |id: NodeId| if id == 0 { encoder.output } else { id + head_offset };
    for node in &head.nodes {
        nodes.push(remap_node(node, &head_map));
    }
    let head_out = head_map(head.output);
    nodes.push(Node { layer: Layer::Resize(ResizeTarget::GraphInput), inputs: vec![head_out] });
    let output = nodes.len();

    let mut shapes = vec![input_shape];
    let mut strides = vec![1usize];
    for (k, node) in nodes.iter_mut().enumerate() {
        let id = k + 1;
        let (s, st) = infer_node(id, node, input_shape, &shapes, &strides)?;
        shapes.push(s);
        strides.push(st);
    }
    Ok(NetworkGraph { nodes, shapes, strides, feature_node: encoder.output, output })
}

fn remap_node(node: &Node, map: &dyn Fn(NodeId) -> NodeId) -> Node {
    let layer = match &node.layer {
        Layer::Resize(ResizeTarget::LikeNode(other)) => Layer::Resize(ResizeTarget::LikeNode(map(*other))),
        other => other.clone(),
    };
    Node { layer, inputs: node.inputs.iter().map(|&i| map(i)).collect() }
}

fn build_err(id: NodeId, kind: &str, msg: impl std::fmt::Display) -> Error {
    Error::GraphBuild(format!("node {id} ({kind}): {msg}"))
}

/// Shape and cumulative stride of one node; resolves resize targets to fixed sizes.
fn infer_node(
    id: NodeId,
    node: &mut Node,
    input_shape: Shape,
    shapes: &[Shape],
    strides: &[usize],
) -> Result<(Shape, usize)> {
    let kind = node.layer.kind();
    let first = node.inputs[0];
    let x = shapes[first];
    let st = strides[first];
    match &mut node.layer {
        Layer::Conv { kernel, spec } => {
            if kernel.in_channels() != x.channels {
                return Err(build_err(id, kind, format!("kernel wants {} channels, got {x}", kernel.in_channels())));
            }
            let out = spec.output_shape(x, kernel).map_err(|e| build_err(id, kind, e))?;
            let ratio = |a: usize, b: usize| a.checked_div(b).filter(|r| r * b == a);
            let stride = if out.spatial() == x.spatial() {
                st
            } else {
                match (ratio(x.height, out.height), ratio(x.width, out.width)) {
                    (Some(a), Some(b)) if a == b => st * a,
                    _ => return Err(build_err(id, kind, format!("non-uniform spatial reduction {x} -> {out}"))),
                }
            };
            Ok((out, stride))
        }
        Layer::Relu => Ok((x, st)),
        Layer::MaxPool => {
            if x.height % 2 != 0 || x.width % 2 != 0 {
                return Err(build_err(id, kind, format!("input {x} has an odd spatial dimension")));
            }
            Ok((Shape::new(x.height / 2, x.width / 2, x.channels), st * 2))
        }
        Layer::GlobalAvgPool => Ok((Shape::new(1, 1, x.channels), st)),
        Layer::Resize(target) => {
            let (h, w, stride) = match *target {
                ResizeTarget::Fixed { height, width } => (height, width, st),
                ResizeTarget::LikeNode(other) => (shapes[other].height, shapes[other].width, strides[other]),
                ResizeTarget::GraphInput => (input_shape.height, input_shape.width, 1),
            };
            if h < x.height || w < x.width {
                return Err(build_err(id, kind, format!("cannot shrink {x} to {h}x{w}")));
            }
            *target = ResizeTarget::Fixed { height: h, width: w };
            Ok((Shape::new(h, w, x.channels), stride))
        }
        Layer::Concat => {
            let mut c = 0;
            for &i in &node.inputs {
                if shapes[i].spatial() != x.spatial() {
                    return Err(build_err(id, kind, format!("inputs {} and {x} differ spatially", shapes[i])));
                }
                if strides[i] != st {
                    return Err(build_err(id, kind, "inputs arrive with different strides"));
                }
                c += shapes[i].channels;
            }
            Ok((Shape::new(x.height, x.width, c), st))
        }
        Layer::Add => {
            let y = shapes[node.inputs[1]];
            if x != y {
                return Err(build_err(id, kind, format!("inputs {x} and {y} differ")));
            }
            if strides[node.inputs[1]] != st {
                return Err(build_err(id, kind, "inputs arrive with different strides"));
            }
            Ok((x, st))
        }
    }
}

/// Per-node state kept from the forward pass for the backward pass.
#[derive(Debug, Clone)]
enum Saved {
    None,
    Relu(ReluMask),
    Pool(PoolContext),
}

/// ReLU masks and max-pool winners of one forward pass.
///
/// Two inputs with equal patterns lie in the same linear piece of the network.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActivationPattern {
    relu: Vec<Vec<bool>>,
    pool: Vec<Vec<usize>>,
}

impl NetworkGraph {
    pub fn input_shape(&self) -> Shape {
        self.shapes[0]
    }

    pub fn output_shape(&self) -> Shape {
        self.shapes[self.output]
    }

    pub fn n_classes(&self) -> usize {
        self.output_shape().channels
    }

    /// Shape of the encoder output feeding the head.
    pub fn feature_shape(&self) -> Shape {
        self.shapes[self.feature_node]
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node_shape(&self, id: NodeId) -> Shape {
        self.shapes[id]
    }

    /// Downsampling ratio from the image to the encoder output.
    pub fn output_stride(&self) -> usize {
        self.strides[self.feature_node]
    }

    fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id - 1]
    }

    fn check_input(&self, image: &Tensor) -> Result<()> {
        if image.shape() != self.input_shape() {
            return Err(shape(format!("image is {}, network expects {}", image.shape(), self.input_shape())));
        }
        Ok(())
    }

    fn run(&self, image: &Tensor) -> Result<(Vec<Tensor>, Vec<Saved>)> {
        self.check_input(image)?;
        let mut acts: Vec<Tensor> = Vec::with_capacity(self.nodes.len() + 1);
        let mut saved = Vec::with_capacity(self.nodes.len() + 1);
        acts.push(image.clone());
        saved.push(Saved::None);
        for id in 1..=self.nodes.len() {
            let node = self.node(id);
            let x = &acts[node.inputs[0]];
            let (out, keep) = match &node.layer {
                Layer::Conv { kernel, spec } => (ops::conv2d_forward(x, kernel, spec)?, Saved::None),
                Layer::Relu => {
                    let (y, m) = ops::relu_forward(x);
                    (y, Saved::Relu(m))
                }
                Layer::MaxPool => {
                    let (y, c) = ops::maxpool_forward(x)?;
                    (y, Saved::Pool(c))
                }
                Layer::GlobalAvgPool => (ops::global_avgpool_forward(x), Saved::None),
                Layer::Resize(target) => {
                    let ResizeTarget::Fixed { height, width } = *target else {
                        unreachable!("resize targets are resolved at assembly")
                    };
                    (ops::bilinear_upsample_forward(x, height, width)?, Saved::None)
                }
                Layer::Concat => (concat_channels(node.inputs.iter().map(|&i| &acts[i]), self.shapes[id]), Saved::None),
                Layer::Add => {
                    let mut y = x.clone();
                    y.add_assign(&acts[node.inputs[1]])?;
                    (y, Saved::None)
                }
            };
            debug_assert_eq!(out.shape(), self.shapes[id]);
            acts.push(out);
            saved.push(keep);
        }
        Ok((acts, saved))
    }

    /// Segmentation output of shape `H × W × n_classes`.
    pub fn forward(&self, image: &Tensor) -> Result<Tensor> {
        let (mut acts, _) = self.run(image)?;
        Ok(acts.swap_remove(self.output))
    }

    /// `∂(Σ seed ⊙ forward(image)) / ∂image`.
    pub fn grad_wrt_input(&self, image: &Tensor, seed: &Tensor) -> Result<Tensor> {
        if seed.shape() != self.output_shape() {
            return Err(shape(format!("seed is {}, network output is {}", seed.shape(), self.output_shape())));
        }
        let (_, saved) = self.run(image)?;
        self.backward(&saved, seed.clone())
    }

    fn backward(&self, saved: &[Saved], seed: Tensor) -> Result<Tensor> {
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len() + 1];
        grads[self.output] = Some(seed);
        for id in (1..=self.nodes.len()).rev() {
            let Some(gy) = grads[id].take() else { continue };
            let node = self.node(id);
            let in0 = self.shapes[node.inputs[0]];
            match &node.layer {
                Layer::Conv { kernel, spec } => {
                    accumulate(&mut grads, node.inputs[0], ops::conv2d_input_grad(&gy, kernel, spec, in0)?)?;
                }
                Layer::Relu => {
                    let Saved::Relu(mask) = &saved[id] else { unreachable!() };
                    accumulate(&mut grads, node.inputs[0], ops::relu_input_grad(&gy, mask)?)?;
                }
                Layer::MaxPool => {
                    let Saved::Pool(ctx) = &saved[id] else { unreachable!() };
                    accumulate(&mut grads, node.inputs[0], ops::maxpool_input_grad(&gy, ctx)?)?;
                }
                Layer::GlobalAvgPool => {
                    accumulate(&mut grads, node.inputs[0], ops::global_avgpool_input_grad(&gy, in0)?)?;
                }
                Layer::Resize(_) => {
                    accumulate(&mut grads, node.inputs[0], ops::bilinear_upsample_input_grad(&gy, in0)?)?;
                }
                Layer::Concat => {
                    let parts: Vec<Shape> = node.inputs.iter().map(|&i| self.shapes[i]).collect();
                    for (&i, g) in node.inputs.iter().zip(split_channels(&gy, &parts)) {
                        accumulate(&mut grads, i, g)?;
                    }
                }
                Layer::Add => {
                    accumulate(&mut grads, node.inputs[1], gy.clone())?;
                    accumulate(&mut grads, node.inputs[0], gy)?;
                }
            }
        }
        match grads[0].take() {
            Some(g) => Ok(g),
            None => Tensor::zeros(self.input_shape()),
        }
    }

    /// ReLU masks and pooling winners for `image`.
    pub fn activation_pattern(&self, image: &Tensor) -> Result<ActivationPattern> {
        let (_, saved) = self.run(image)?;
        let mut relu = Vec::new();
        let mut pool = Vec::new();
        for s in saved {
            match s {
                Saved::Relu(m) => relu.push(m.active().to_vec()),
                Saved::Pool(c) => pool.push(c.argmax().to_vec()),
                Saved::None => {}
            }
        }
        Ok(ActivationPattern { relu, pool })
    }
}

fn accumulate(grads: &mut [Option<Tensor>], id: NodeId, g: Tensor) -> Result<()> {
    match &mut grads[id] {
        Some(existing) => existing.add_assign(&g),
        slot @ None => {
            *slot = Some(g);
            Ok(())
        }
    }
}

fn concat_channels<'a>(parts: impl Iterator<Item = &'a Tensor>, out_shape: Shape) -> Tensor {
    let parts: Vec<&Tensor> = parts.collect();
    let mut out = Vec::with_capacity(out_shape.len());
    for px in 0..out_shape.height * out_shape.width {
        for p in &parts {
            let c = p.channels();
            out.extend_from_slice(&p.values()[px * c..(px + 1) * c]);
        }
    }
    Tensor::from_parts(out_shape, out)
}

fn split_channels(g: &Tensor, parts: &[Shape]) -> Vec<Tensor> {
    let mut outs: Vec<Vec<f64>> = parts.iter().map(|s| Vec::with_capacity(s.len())).collect();
    for px in g.values().chunks_exact(g.channels()) {
        let mut off = 0;
        for (o, s) in outs.iter_mut().zip(parts) {
            o.extend_from_slice(&px[off..off + s.channels]);
            off += s.channels;
        }
    }
    outs.into_iter().zip(parts).map(|(v, &s)| Tensor::from_parts(s, v)).collect()
}

/// Output stride of an assembled network.
pub fn infer_output_stride(net: &NetworkGraph) -> usize {
    net.output_stride()
}
