//! Layer graphs: named parameters, typed layer nodes, shape inference, and
//! the forward walker that lowers a graph onto an autodiff tape.

use std::collections::HashMap;

use crate::engine::ops::norm::{BN_EPSILON, BN_MOMENTUM};
use crate::engine::scalar::Scalar;
use crate::engine::tape::{Tape, TensorId};
use crate::engine::tensor::Tensor;
use crate::error::{Error, Result};

pub type ParamId = usize;
pub type NodeId = usize;

/// A named weight buffer. Non-trainable parameters are the batch-norm running
/// statistics; they are serialized like weights but never receive gradient.
#[derive(Clone, Debug)]
pub struct Parameter<S> {
    pub name: String,
    pub value: Tensor<S>,
    pub trainable: bool,
}

/// Insertion-ordered parameter table with unique names.
pub struct ParamStore<S> {
    params: Vec<Parameter<S>>,
    index: HashMap<String, ParamId>,
}

impl<S: Scalar> Default for ParamStore<S> {
    fn default() -> Self {
        Self::new()
    }
}

impl<S: Scalar> ParamStore<S> {
    pub fn new() -> Self {
        ParamStore { params: Vec::new(), index: HashMap::new() }
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor<S>, trainable: bool) -> Result<ParamId> {
        let name = name.into();
        if self.index.contains_key(&name) {
            return Err(Error::invalid("ParamStore::add", format!("duplicate parameter name `{name}`")));
        }
        let id = self.params.len();
        self.index.insert(name.clone(), id);
        self.params.push(Parameter { name, value, trainable });
        Ok(id)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Parameter<S> {
        &self.params[id]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Parameter<S> {
        &mut self.params[id]
    }

    pub fn id_of(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).copied()
    }

    /// Parameters in insertion order (deterministic across runs).
    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Parameter<S>)> {
        self.params.iter().enumerate()
    }
}

#[derive(Clone, Debug)]
pub enum LayerKind {
    Input,
    Conv {
        weight: ParamId,
        bias: Option<ParamId>,
        stride: usize,
        padding: (usize, usize),
    },
    BatchNorm {
        gamma: ParamId,
        beta: ParamId,
        running_mean: ParamId,
        running_var: ParamId,
    },
    Relu,
    MaxPool {
        window: usize,
        stride: usize,
        padding: usize,
    },
    AvgPool {
        window: usize,
        stride: usize,
        padding: usize,
    },
    GlobalAvgPool,
    Concat,
    Linear {
        weight: ParamId,
        bias: ParamId,
    },
}

impl LayerKind {
    pub fn kind_name(&self) -> &'static str {
        match self {
            LayerKind::Input => "input",
            LayerKind::Conv { .. } => "conv",
            LayerKind::BatchNorm { .. } => "batch_norm",
            LayerKind::Relu => "relu",
            LayerKind::MaxPool { .. } => "max_pool",
            LayerKind::AvgPool { .. } => "avg_pool",
            LayerKind::GlobalAvgPool => "global_avg_pool",
            LayerKind::Concat => "concat",
            LayerKind::Linear { .. } => "linear",
        }
    }

    /// Parameter ids referenced by this layer, trainable first.
    pub fn param_ids(&self) -> Vec<ParamId> {
        match *self {
            LayerKind::Conv { weight, bias, .. } => {
                let mut v = vec![weight];
                v.extend(bias);
                v
            }
            LayerKind::BatchNorm { gamma, beta, running_mean, running_var } => {
                vec![gamma, beta, running_mean, running_var]
            }
            LayerKind::Linear { weight, bias } => vec![weight, bias],
            _ => Vec::new(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct GraphNode {
    pub name: String,
    pub kind: LayerKind,
    pub inputs: Vec<NodeId>,
}

/// Per-layer and aggregate parameter accounting.
#[derive(Clone, Debug, serde::Serialize)]
pub struct LayerCensus {
    pub name: String,
    pub kind: &'static str,
    pub trainable: usize,
    pub non_trainable: usize,
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct ParamCensus {
    pub layers: Vec<LayerCensus>,
    pub trainable: usize,
    pub non_trainable: usize,
    pub total: usize,
}

/// A built architecture: an acyclic layer graph over a parameter store.
/// Node inputs always reference earlier nodes, so graph order is a valid
/// evaluation order.
pub struct Model<S> {
    nodes: Vec<GraphNode>,
    params: ParamStore<S>,
    output: NodeId,
    arch: String,
    num_classes: usize,
}

/// Result of lowering a graph onto a tape for one batch.
pub struct ForwardPass {
    pub output: TensorId,
    /// (parameter, tape leaf) pairs for every trainable parameter, in store
    /// order; the optimizer reads gradients through these.
    pub bindings: Vec<(ParamId, TensorId)>,
}

struct WalkOutcome<S> {
    output: TensorId,
    bindings: Vec<(ParamId, TensorId)>,
    bn_updates: Vec<(ParamId, Vec<S>)>,
}

impl<S: Scalar> Model<S> {
    pub(crate) fn from_parts(
        nodes: Vec<GraphNode>,
        params: ParamStore<S>,
        arch: impl Into<String>,
        num_classes: usize,
    ) -> Result<Self> {
        let output = nodes.len().checked_sub(1).ok_or_else(|| Error::invalid("Model", "empty graph"))?;
        let model = Model { nodes, params, output, arch: arch.into(), num_classes };
        model.validate()?;
        Ok(model)
    }

    fn validate(&self) -> Result<()> {
        if !matches!(self.nodes[0].kind, LayerKind::Input) {
            return Err(Error::invalid("Model", "first node must be the input"));
        }
        for (i, node) in self.nodes.iter().enumerate() {
            if i > 0 && node.inputs.is_empty() {
                return Err(Error::invalid("Model", format!("node `{}` has no inputs", node.name)));
            }
            if node.inputs.iter().any(|&j| j >= i) {
                return Err(Error::invalid(
                    "Model",
                    format!("node `{}` references a later node (graph must be topologically ordered)", node.name),
                ));
            }
        }
        // Every node must lie on a path to the output (no orphans).
        let mut live = vec![false; self.nodes.len()];
        live[self.output] = true;
        for i in (0..self.nodes.len()).rev() {
            if live[i] {
                for &j in &self.nodes[i].inputs {
                    live[j] = true;
                }
            }
        }
        if let Some(dead) = live.iter().position(|&l| !l) {
            return Err(Error::invalid(
                "Model",
                format!("node `{}` is not connected to the output", self.nodes[dead].name),
            ));
        }
        Ok(())
    }

    pub fn arch(&self) -> &str {
        &self.arch
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn nodes(&self) -> &[GraphNode] {
        &self.nodes
    }

    pub fn params(&self) -> &ParamStore<S> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore<S> {
        &mut self.params
    }

    /// Trainable parameter ids in store order.
    pub fn trainable_param_ids(&self) -> Vec<ParamId> {
        self.params.iter().filter(|(_, p)| p.trainable).map(|(id, _)| id).collect()
    }

    /// Static shape inference for a given input shape; errors mirror the
    /// runtime op validations.
    pub fn infer_shapes(&self, input: [usize; 4]) -> Result<Vec<Vec<usize>>> {
        let mut shapes: Vec<Vec<usize>> = Vec::with_capacity(self.nodes.len());
        for node in &self.nodes {
            let shape = match &node.kind {
                LayerKind::Input => input.to_vec(),
                LayerKind::Conv { weight, stride, padding, .. } => {
                    let ws = self.params.get(*weight).value.shape();
                    let xs = &shapes[node.inputs[0]];
                    let (o, i, kh, kw) = (ws[0], ws[1], ws[2], ws[3]);
                    if xs.len() != 4 || xs[1] != i {
                        return Err(Error::shape(
                            "infer_shapes",
                            format!("`{}`: input {xs:?} does not feed weight {ws:?}", node.name),
                        ));
                    }
                    let oh = conv_extent(xs[2], kh, *stride, padding.0, &node.name)?;
                    let ow = conv_extent(xs[3], kw, *stride, padding.1, &node.name)?;
                    vec![xs[0], o, oh, ow]
                }
                LayerKind::BatchNorm { gamma, .. } => {
                    let xs = &shapes[node.inputs[0]];
                    let c = self.params.get(*gamma).value.len();
                    if xs.len() != 4 || xs[1] != c {
                        return Err(Error::shape(
                            "infer_shapes",
                            format!("`{}`: input {xs:?} vs {c} normalized channels", node.name),
                        ));
                    }
                    xs.clone()
                }
                LayerKind::Relu => shapes[node.inputs[0]].clone(),
                LayerKind::MaxPool { window, stride, padding }
                | LayerKind::AvgPool { window, stride, padding } => {
                    let xs = &shapes[node.inputs[0]];
                    let oh = conv_extent(xs[2], *window, *stride, *padding, &node.name)?;
                    let ow = conv_extent(xs[3], *window, *stride, *padding, &node.name)?;
                    vec![xs[0], xs[1], oh, ow]
                }
                LayerKind::GlobalAvgPool => {
                    let xs = &shapes[node.inputs[0]];
                    vec![xs[0], xs[1]]
                }
                LayerKind::Concat => {
                    let first = &shapes[node.inputs[0]];
                    let mut c = 0;
                    for &i in &node.inputs {
                        let xs = &shapes[i];
                        if xs[0] != first[0] || xs[2..] != first[2..] {
                            return Err(Error::shape(
                                "infer_shapes",
                                format!("`{}`: concat input {xs:?} vs {first:?}", node.name),
                            ));
                        }
                        c += xs[1];
                    }
                    vec![first[0], c, first[2], first[3]]
                }
                LayerKind::Linear { weight, .. } => {
                    let xs = &shapes[node.inputs[0]];
                    let ws = self.params.get(*weight).value.shape();
                    if xs.len() != 2 || xs[1] != ws[0] {
                        return Err(Error::shape(
                            "infer_shapes",
                            format!("`{}`: input {xs:?} vs weight {ws:?}", node.name),
                        ));
                    }
                    vec![xs[0], ws[1]]
                }
            };
            shapes.push(shape);
        }
        Ok(shapes)
    }

    /// Training forward: batch-norm uses batch statistics and the model's
    /// running estimates are updated in place.
    pub fn forward_train(&mut self, tape: &mut Tape<S>, x: &Tensor<S>) -> Result<ForwardPass> {
        let walk = self.walk(tape, x, true, None)?;
        for (pid, new_value) in walk.bn_updates {
            let param = self.params.get_mut(pid);
            param.value.data_mut().copy_from_slice(&new_value);
        }
        Ok(ForwardPass { output: walk.output, bindings: walk.bindings })
    }

    /// Inference forward: batch-norm uses running statistics; nothing in the
    /// model mutates. Works on both normal and inference tapes.
    pub fn forward_eval(&self, tape: &mut Tape<S>, x: &Tensor<S>) -> Result<TensorId> {
        let walk = self.walk(tape, x, false, None)?;
        debug_assert!(walk.bn_updates.is_empty());
        Ok(walk.output)
    }

    /// Forward where trainable parameter values are taken from existing tape
    /// nodes (aligned with [`Model::trainable_param_ids`] order) instead of
    /// the store. This is the hook the gradient checker uses to perturb
    /// weights.
    pub fn forward_with_params(
        &self,
        tape: &mut Tape<S>,
        x: &Tensor<S>,
        provided: &[TensorId],
        training: bool,
    ) -> Result<TensorId> {
        let walk = self.walk(tape, x, training, Some(provided))?;
        Ok(walk.output)
    }

    fn walk(
        &self,
        tape: &mut Tape<S>,
        x: &Tensor<S>,
        training: bool,
        provided: Option<&[TensorId]>,
    ) -> Result<WalkOutcome<S>> {
        let provided_by_pid: Option<HashMap<ParamId, TensorId>> = provided.map(|ids| {
            self.trainable_param_ids().into_iter().zip(ids.iter().copied()).collect()
        });
        let mut param_tape_ids: Vec<Option<TensorId>> = vec![None; self.params.len()];
        let mut bindings = Vec::new();
        let mut bn_updates = Vec::new();
        let mut outs: Vec<TensorId> = Vec::with_capacity(self.nodes.len());

        // Lazily places a trainable parameter on the tape (or resolves it
        // from the provided ids) the first time a layer needs it.
        macro_rules! param_id {
            ($pid:expr) => {{
                let pid = $pid;
                if param_tape_ids[pid].is_none() {
                    let tid = match &provided_by_pid {
                        Some(map) => *map.get(&pid).ok_or_else(|| {
                            Error::invalid(
                                "forward_with_params",
                                format!("no tape tensor provided for `{}`", self.params.get(pid).name),
                            )
                        })?,
                        None => tape.param(self.params.get(pid).value.clone()),
                    };
                    param_tape_ids[pid] = Some(tid);
                    bindings.push((pid, tid));
                }
                param_tape_ids[pid].unwrap()
            }};
        }

        for node in &self.nodes {
            let out = match &node.kind {
                LayerKind::Input => tape.leaf(x.clone()),
                LayerKind::Conv { weight, bias, stride, padding } => {
                    let w = param_id!(*weight);
                    let b = match bias {
                        Some(bid) => Some(param_id!(*bid)),
                        None => None,
                    };
                    tape.conv2d(outs[node.inputs[0]], w, b, *stride, *padding)?
                }
                LayerKind::BatchNorm { gamma, beta, running_mean, running_var } => {
                    let g = param_id!(*gamma);
                    let b = param_id!(*beta);
                    let mut rm = self.params.get(*running_mean).value.data().to_vec();
                    let mut rv = self.params.get(*running_var).value.data().to_vec();
                    let y = tape.batch_norm(
                        outs[node.inputs[0]],
                        g,
                        b,
                        &mut rm,
                        &mut rv,
                        training,
                        S::of(BN_MOMENTUM),
                        S::of(BN_EPSILON),
                    )?;
                    if training {
                        bn_updates.push((*running_mean, rm));
                        bn_updates.push((*running_var, rv));
                    }
                    y
                }
                LayerKind::Relu => tape.relu(outs[node.inputs[0]])?,
                LayerKind::MaxPool { window, stride, padding } => {
                    tape.max_pool2d(outs[node.inputs[0]], *window, *stride, *padding)?
                }
                LayerKind::AvgPool { window, stride, padding } => {
                    tape.avg_pool2d(outs[node.inputs[0]], *window, *stride, *padding)?
                }
                LayerKind::GlobalAvgPool => tape.global_avg_pool(outs[node.inputs[0]])?,
                LayerKind::Concat => {
                    let ids: Vec<TensorId> = node.inputs.iter().map(|&i| outs[i]).collect();
                    tape.concat_channels(&ids)?
                }
                LayerKind::Linear { weight, bias } => {
                    let w = param_id!(*weight);
                    let b = param_id!(*bias);
                    tape.linear(outs[node.inputs[0]], w, b)?
                }
            };
            outs.push(out);
        }
        Ok(WalkOutcome { output: outs[self.output], bindings, bn_updates })
    }

    /// Parameter accounting, grouped per graph node in graph order.
    pub fn census(&self) -> ParamCensus {
        let mut layers = Vec::new();
        let mut trainable = 0usize;
        let mut non_trainable = 0usize;
        for node in &self.nodes {
            let mut row = LayerCensus {
                name: node.name.clone(),
                kind: node.kind.kind_name(),
                trainable: 0,
                non_trainable: 0,
            };
            for pid in node.kind.param_ids() {
                let p = self.params.get(pid);
                if p.trainable {
                    row.trainable += p.value.len();
                } else {
                    row.non_trainable += p.value.len();
                }
            }
            trainable += row.trainable;
            non_trainable += row.non_trainable;
            layers.push(row);
        }
        ParamCensus { layers, trainable, non_trainable, total: trainable + non_trainable }
    }
}

fn conv_extent(input: usize, k: usize, stride: usize, pad: usize, name: &str) -> Result<usize> {
    let padded = input + 2 * pad;
    if k > padded {
        return Err(Error::shape(
            "infer_shapes",
            format!("`{name}`: window {k} exceeds padded extent {padded}"),
        ));
    }
    Ok((padded - k) / stride + 1)
}
