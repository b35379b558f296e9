//! Reverse-mode differentiation over a per-thread tape.
//!
//! While a [`Recording`] is open, every tensor op that touches a tracked
//! value appends one node. Nodes are created in topological order, so the
//! backward sweep is a single reverse pass that visits each node exactly
//! once. Tensors marked `requires_grad` are registered lazily as leaves the
//! first time they feed a recorded op.

use std::collections::HashMap;
use std::marker::PhantomData;
use std::sync::Arc;

use crate::error::{Error, Result};

use super::conv;
use super::{Element, Shape, Tensor};

#[derive(Clone, Debug)]
pub(crate) enum OpKind<T> {
    Leaf,
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    Exp,
    Tanh,
    Sigmoid,
    LeakyRelu(T),
    Abs,
    AddScalar,
    MulScalar(T),
    Sum,
    Mean,
    ConcatChannels,
    SliceChannels { from: usize },
    Subgrid2 { row: usize, col: usize },
    Scatter2 { row: usize, col: usize },
    AvgPool2,
    NearestUp2,
    Conv2d { stride: usize, padding: usize },
    Quantize8,
}

pub(crate) struct NodeInput<T> {
    node: Option<usize>,
    shape: Shape,
    data: Option<Arc<[T]>>,
}

pub(crate) struct Node<T> {
    kind: OpKind<T>,
    inputs: Vec<NodeInput<T>>,
    /// Output values, for ops whose derivative is cheapest from the output.
    saved_out: Option<Arc<[T]>>,
    out_shape: Shape,
}

pub struct TapeInner<T: Element> {
    nodes: Vec<Node<T>>,
    by_uid: HashMap<u64, usize>,
}

impl<T: Element> TapeInner<T> {
    fn new() -> Self {
        TapeInner {
            nodes: Vec::new(),
            by_uid: HashMap::new(),
        }
    }

    fn register_leaf(&mut self, t: &Tensor<T>) -> usize {
        let idx = self.nodes.len();
        self.nodes.push(Node {
            kind: OpKind::Leaf,
            inputs: Vec::new(),
            saved_out: None,
            out_shape: t.shape(),
        });
        self.by_uid.insert(t.uid(), idx);
        idx
    }

    fn backward(self, loss: &Tensor<T>) -> Result<Gradients<T>> {
        let loss_idx = *self.by_uid.get(&loss.uid()).ok_or(Error::UntrackedLoss)?;
        let loss_shape = self.nodes[loss_idx].out_shape;
        if loss_shape.numel() != 1 {
            return Err(Error::NonScalarLoss { shape: loss_shape });
        }

        let mut grads: Vec<Option<Vec<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss_idx] = Some(vec![T::ONE]);

        for idx in (0..=loss_idx).rev() {
            let node = &self.nodes[idx];
            if matches!(node.kind, OpKind::Leaf) {
                continue; // leaf grads stay in place for collection below
            }
            let Some(g) = grads[idx].take() else {
                continue;
            };
            self.step_back(node, &g, &mut grads)?;
        }

        let mut map = HashMap::new();
        for (&uid, &idx) in &self.by_uid {
            if matches!(self.nodes[idx].kind, OpKind::Leaf) {
                let shape = self.nodes[idx].out_shape;
                let g = grads[idx]
                    .take()
                    .unwrap_or_else(|| vec![T::ZERO; shape.numel()]);
                map.insert(uid, Tensor::from_parts(shape, g));
            }
        }
        Ok(Gradients { map })
    }

    fn step_back(&self, node: &Node<T>, g: &[T], grads: &mut [Option<Vec<T>>]) -> Result<()> {
        let ins = &node.inputs;
        match &node.kind {
            OpKind::Leaf => unreachable!(),

            OpKind::Add => {
                accumulate_iter(grads, &ins[0], g.iter().copied());
                accumulate_iter(grads, &ins[1], g.iter().copied());
            }
            OpKind::Sub => {
                accumulate_iter(grads, &ins[0], g.iter().copied());
                accumulate_iter(grads, &ins[1], g.iter().map(|&v| -v));
            }
            OpKind::Mul => {
                let a = ins[0].data.as_ref().expect("mul saves inputs");
                let b = ins[1].data.as_ref().expect("mul saves inputs");
                accumulate_iter(grads, &ins[0], g.iter().zip(b.iter()).map(|(&g, &b)| g * b));
                accumulate_iter(grads, &ins[1], g.iter().zip(a.iter()).map(|(&g, &a)| g * a));
            }
            OpKind::Div => {
                let a = ins[0].data.as_ref().expect("div saves inputs");
                let b = ins[1].data.as_ref().expect("div saves inputs");
                accumulate_iter(grads, &ins[0], g.iter().zip(b.iter()).map(|(&g, &b)| g / b));
                accumulate_iter(
                    grads,
                    &ins[1],
                    g.iter()
                        .zip(a.iter().zip(b.iter()))
                        .map(|(&g, (&a, &b))| -g * a / (b * b)),
                );
            }
            OpKind::Neg => accumulate_iter(grads, &ins[0], g.iter().map(|&v| -v)),
            OpKind::Exp => {
                let out = node.saved_out.as_ref().expect("exp saves output");
                accumulate_iter(
                    grads,
                    &ins[0],
                    g.iter().zip(out.iter()).map(|(&g, &o)| g * o),
                );
            }
            OpKind::Tanh => {
                let out = node.saved_out.as_ref().expect("tanh saves output");
                accumulate_iter(
                    grads,
                    &ins[0],
                    g.iter()
                        .zip(out.iter())
                        .map(|(&g, &o)| g * (T::ONE - o * o)),
                );
            }
            OpKind::Sigmoid => {
                let out = node.saved_out.as_ref().expect("sigmoid saves output");
                accumulate_iter(
                    grads,
                    &ins[0],
                    g.iter()
                        .zip(out.iter())
                        .map(|(&g, &o)| g * o * (T::ONE - o)),
                );
            }
            OpKind::LeakyRelu(slope) => {
                let x = ins[0].data.as_ref().expect("leaky_relu saves input");
                let slope = *slope;
                accumulate_iter(
                    grads,
                    &ins[0],
                    g.iter()
                        .zip(x.iter())
                        .map(move |(&g, &x)| if x >= T::ZERO { g } else { g * slope }),
                );
            }
            OpKind::Abs => {
                let x = ins[0].data.as_ref().expect("abs saves input");
                accumulate_iter(
                    grads,
                    &ins[0],
                    g.iter().zip(x.iter()).map(|(&g, &x)| {
                        if x > T::ZERO {
                            g
                        } else if x < T::ZERO {
                            -g
                        } else {
                            T::ZERO
                        }
                    }),
                );
            }
            OpKind::AddScalar => accumulate_iter(grads, &ins[0], g.iter().copied()),
            OpKind::MulScalar(c) => {
                let c = *c;
                accumulate_iter(grads, &ins[0], g.iter().map(move |&v| v * c));
            }
            OpKind::Sum => {
                let gv = g[0];
                let n = ins[0].shape.numel();
                accumulate_iter(grads, &ins[0], std::iter::repeat_n(gv, n));
            }
            OpKind::Mean => {
                let n = ins[0].shape.numel();
                let gv = g[0] * (T::ONE / T::from_f64(n as f64));
                accumulate_iter(grads, &ins[0], std::iter::repeat_n(gv, n));
            }
            OpKind::ConcatChannels => {
                let out_shape = node.out_shape;
                let plane = out_shape.h * out_shape.w;
                let mut c_from = 0;
                for input in ins {
                    let ci = input.shape.c;
                    if input.node.is_some() {
                        let mut part = vec![T::ZERO; input.shape.numel()];
                        for n in 0..out_shape.n {
                            for c in 0..ci {
                                let src = (n * out_shape.c + c_from + c) * plane;
                                let dst = (n * ci + c) * plane;
                                part[dst..dst + plane].copy_from_slice(&g[src..src + plane]);
                            }
                        }
                        accumulate_vec(grads, input, part);
                    }
                    c_from += ci;
                }
            }
            OpKind::SliceChannels { from } => {
                let in_shape = ins[0].shape;
                let out_shape = node.out_shape;
                let plane = in_shape.h * in_shape.w;
                let mut dx = vec![T::ZERO; in_shape.numel()];
                for n in 0..in_shape.n {
                    for c in 0..out_shape.c {
                        let dst = (n * in_shape.c + from + c) * plane;
                        let src = (n * out_shape.c + c) * plane;
                        dx[dst..dst + plane].copy_from_slice(&g[src..src + plane]);
                    }
                }
                accumulate_vec(grads, &ins[0], dx);
            }
            OpKind::Subgrid2 { row, col } => {
                let dx = conv::scatter2(g, node.out_shape, *row, *col);
                accumulate_vec(grads, &ins[0], dx);
            }
            OpKind::Scatter2 { row, col } => {
                let dx = conv::subgrid2(g, node.out_shape, *row, *col);
                accumulate_vec(grads, &ins[0], dx);
            }
            OpKind::AvgPool2 => {
                let mut dx = conv::nearest_up2(g, node.out_shape);
                let quarter = T::from_f64(0.25);
                for v in dx.iter_mut() {
                    *v *= quarter;
                }
                accumulate_vec(grads, &ins[0], dx);
            }
            OpKind::NearestUp2 => {
                let dx = conv::sum_pool2(g, node.out_shape);
                accumulate_vec(grads, &ins[0], dx);
            }
            OpKind::Conv2d { stride, padding } => {
                let x = ins[0].data.as_ref().expect("conv2d saves x");
                let w = ins[1].data.as_ref().expect("conv2d saves w");
                let (xs, ws) = (ins[0].shape, ins[1].shape);
                if ins[0].node.is_some() {
                    let dx = conv::conv2d_dx(g, node.out_shape, w, ws, xs, *stride, *padding);
                    accumulate_vec(grads, &ins[0], dx);
                }
                if ins[1].node.is_some() {
                    let dw = conv::conv2d_dw(g, node.out_shape, x, xs, ws, *stride, *padding);
                    accumulate_vec(grads, &ins[1], dw);
                }
                if ins[2].node.is_some() {
                    let db = conv::conv2d_db(g, node.out_shape);
                    accumulate_vec(grads, &ins[2], db);
                }
            }
            OpKind::Quantize8 => {
                return Err(Error::NonDifferentiable { op: "quantize8" });
            }
        }
        Ok(())
    }
}

fn accumulate_iter<T: Element>(
    grads: &mut [Option<Vec<T>>],
    input: &NodeInput<T>,
    contribution: impl Iterator<Item = T>,
) {
    let Some(idx) = input.node else { return };
    match &mut grads[idx] {
        Some(acc) => {
            for (a, c) in acc.iter_mut().zip(contribution) {
                *a += c;
            }
        }
        slot @ None => {
            *slot = Some(contribution.collect());
        }
    }
}

fn accumulate_vec<T: Element>(
    grads: &mut [Option<Vec<T>>],
    input: &NodeInput<T>,
    contribution: Vec<T>,
) {
    let Some(idx) = input.node else { return };
    match &mut grads[idx] {
        Some(acc) => {
            for (a, c) in acc.iter_mut().zip(contribution) {
                *a += c;
            }
        }
        slot @ None => *slot = Some(contribution),
    }
}

/// Record one op on the active tape, if any input is tracked.
///
/// `save_inputs[i]` marks inputs whose values the backward rule needs;
/// `save_output` keeps a copy of the result (exp, tanh, sigmoid).
pub(crate) fn record_op<T: Element>(
    kind: OpKind<T>,
    inputs: &[&Tensor<T>],
    save_inputs: &[bool],
    save_output: bool,
    out: &Tensor<T>,
) {
    T::with_tape(|slot| {
        let Some(tape) = slot.as_mut() else { return };
        let tracked = inputs
            .iter()
            .any(|t| t.is_leaf() || tape.by_uid.contains_key(&t.uid()));
        if !tracked {
            return;
        }
        for t in inputs {
            if t.is_leaf() && !tape.by_uid.contains_key(&t.uid()) {
                tape.register_leaf(t);
            }
        }
        let node_inputs = inputs
            .iter()
            .zip(save_inputs)
            .map(|(t, &save)| NodeInput {
                node: tape.by_uid.get(&t.uid()).copied(),
                shape: t.shape(),
                data: save.then(|| t.data_arc()),
            })
            .collect();
        let idx = tape.nodes.len();
        tape.nodes.push(Node {
            kind,
            inputs: node_inputs,
            saved_out: save_output.then(|| out.data_arc()),
            out_shape: out.shape(),
        });
        tape.by_uid.insert(out.uid(), idx);
    });
}

/// An open reverse-mode recording on the current thread.
///
/// Exactly one recording per element type may be open per thread; the model
/// and loss computation run inside it, then [`Recording::backward`] consumes
/// the tape and returns the accumulated leaf gradients.
pub struct Recording<T: Element> {
    open: bool,
    _not_send: PhantomData<*const u8>,
    _elem: PhantomData<T>,
}

impl<T: Element> Recording<T> {
    /// Begin recording. Panics if a recording is already open on this thread.
    pub fn start() -> Self {
        T::with_tape(|slot| {
            assert!(
                slot.is_none(),
                "a recording is already active on this thread"
            );
            *slot = Some(TapeInner::new());
        });
        Recording {
            open: true,
            _not_send: PhantomData,
            _elem: PhantomData,
        }
    }

    /// Number of recorded nodes so far.
    pub fn node_count(&self) -> usize {
        T::with_tape(|slot| slot.as_ref().map_or(0, |t| t.nodes.len()))
    }

    /// End the recording and run the reverse sweep from `loss`.
    pub fn backward(mut self, loss: &Tensor<T>) -> Result<Gradients<T>> {
        self.open = false;
        let tape = T::with_tape(|slot| slot.take()).expect("recording was active");
        tape.backward(loss)
    }
}

impl<T: Element> Drop for Recording<T> {
    fn drop(&mut self) {
        if self.open {
            T::with_tape(|slot| *slot = None);
        }
    }
}

/// Leaf gradients produced by a backward sweep, keyed by tensor identity.
#[derive(Debug)]
pub struct Gradients<T: Element> {
    map: HashMap<u64, Tensor<T>>,
}

impl<T: Element> Gradients<T> {
    pub fn get(&self, t: &Tensor<T>) -> Option<&Tensor<T>> {
        self.map.get(&t.uid())
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Add another sweep's gradients into this store (repeated backward
    /// passes accumulate unless the store is dropped).
    pub fn accumulate(&mut self, other: Gradients<T>) {
        for (uid, g) in other.map {
            match self.map.get_mut(&uid) {
                Some(acc) => {
                    let sum: Vec<T> = acc
                        .data()
                        .iter()
                        .zip(g.data().iter())
                        .map(|(&a, &b)| a + b)
                        .collect();
                    *acc = Tensor::from_parts(acc.shape(), sum);
                }
                None => {
                    self.map.insert(uid, g);
                }
            }
        }
    }

    /// Global L2 norm across every stored gradient.
    pub fn global_norm(&self) -> f64 {
        self.map.values().map(|g| g.sum_sq()).sum::<f64>().sqrt()
    }

    /// Scale every gradient in place (gradient clipping).
    pub fn scale(&mut self, factor: f64) {
        let f = T::from_f64(factor);
        for g in self.map.values_mut() {
            let scaled: Vec<T> = g.data().iter().map(|&v| v * f).collect();
            *g = Tensor::from_parts(g.shape(), scaled);
        }
    }
}
