use std::cell::RefCell;
use std::rc::Rc;

use super::ops::{vjp, Op};
use super::tensor::{Scalar, Tensor};
use crate::error::{Error, Result};

/// Recording mode of a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// Values only; nothing is differentiable.
    NoGrad,
    /// Backward sweeps compute plain values.
    FirstOrder,
    /// Backward sweeps are themselves recorded, so gradients can be
    /// differentiated again.
    HigherOrder,
}

pub(crate) struct Node<T> {
    pub(crate) op: Op,
    pub(crate) inputs: Vec<usize>,
    pub(crate) value: Rc<Tensor<T>>,
    pub(crate) requires_grad: bool,
}

struct Inner<T> {
    nodes: Vec<Node<T>>,
    recording: bool,
}

/// Append-only, define-by-run computation graph. Build one per step.
pub struct Graph<T> {
    mode: Mode,
    inner: RefCell<Inner<T>>,
}

/// Handle to a node of a [`Graph`].
pub struct Var<'g, T> {
    graph: &'g Graph<T>,
    id: usize,
}

impl<T> Clone for Var<'_, T> {
    fn clone(&self) -> Self {
        *self
    }
}
impl<T> Copy for Var<'_, T> {}

impl<T> std::fmt::Debug for Var<'_, T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Var(#{})", self.id)
    }
}

impl<'g, T: Scalar> Var<'g, T> {
    pub fn id(&self) -> usize {
        self.id
    }

    pub fn graph(&self) -> &'g Graph<T> {
        self.graph
    }

    pub fn value(&self) -> Rc<Tensor<T>> {
        self.graph.value(self.id)
    }

    pub fn shape(&self) -> Vec<usize> {
        self.graph.inner.borrow().nodes[self.id].value.shape().to_vec()
    }

    pub fn requires_grad(&self) -> bool {
        self.graph.inner.borrow().nodes[self.id].requires_grad
    }

    /// The single element of a one-element tensor.
    pub fn item(&self) -> T {
        self.value().data()[0]
    }
}

/// Gradients keyed by the node they were taken with respect to.
pub struct GradResult<'g, T> {
    entries: Vec<(usize, Var<'g, T>)>,
}

impl<'g, T: Scalar> GradResult<'g, T> {
    pub fn get(&self, wrt: Var<'g, T>) -> Option<Var<'g, T>> {
        self.entries
            .iter()
            .find(|(id, _)| *id == wrt.id)
            .map(|(_, g)| *g)
    }

    /// Gradient as a plain tensor. Panics if `wrt` was not requested.
    pub fn tensor(&self, wrt: Var<'g, T>) -> Tensor<T> {
        let g = self.get(wrt).expect("gradient was requested for this node");
        (*g.value()).clone()
    }

    pub fn vars(&self) -> impl Iterator<Item = Var<'g, T>> + '_ {
        self.entries.iter().map(|(_, g)| *g)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl<T: Scalar> Graph<T> {
    pub fn new(mode: Mode) -> Self {
        Graph {
            mode,
            inner: RefCell::new(Inner {
                nodes: Vec::new(),
                recording: mode != Mode::NoGrad,
            }),
        }
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.inner.borrow().nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Differentiable input (parameter or data that gradients are taken
    /// against). In [`Mode::NoGrad`] it behaves like a constant.
    pub fn leaf(&self, value: Tensor<T>) -> Var<'_, T> {
        let requires = self.mode != Mode::NoGrad;
        self.push_node(Op::Leaf, Vec::new(), value, requires)
    }

    pub fn constant(&self, value: Tensor<T>) -> Var<'_, T> {
        self.push_node(Op::Constant, Vec::new(), value, false)
    }

    pub(crate) fn value(&self, id: usize) -> Rc<Tensor<T>> {
        self.inner.borrow().nodes[id].value.clone()
    }

    fn push_node(
        &self,
        op: Op,
        inputs: Vec<usize>,
        value: Tensor<T>,
        requires_grad: bool,
    ) -> Var<'_, T> {
        let mut inner = self.inner.borrow_mut();
        let id = inner.nodes.len();
        inner.nodes.push(Node {
            op,
            inputs,
            value: Rc::new(value),
            requires_grad,
        });
        Var { graph: self, id }
    }

    pub(crate) fn push(&self, op: Op, inputs: &[Var<'_, T>], value: Tensor<T>) -> Var<'_, T> {
        let requires = {
            let inner = self.inner.borrow();
            inner.recording && inputs.iter().any(|v| inner.nodes[v.id].requires_grad)
        };
        self.push_node(op, inputs.iter().map(|v| v.id).collect(), value, requires)
    }

    /// Operation tag and input ids of every node, in recording order.
    pub fn nodes(&self) -> Vec<(&'static str, Vec<usize>)> {
        self.inner
            .borrow()
            .nodes
            .iter()
            .map(|n| (n.op.tag(), n.inputs.clone()))
            .collect()
    }

    /// Smallest `|input|` over all recorded leaky-relu evaluations, i.e. how
    /// close the current point is to a non-differentiable kink.
    pub fn nearest_kink(&self) -> Option<f64> {
        let inner = self.inner.borrow();
        inner
            .nodes
            .iter()
            .filter(|n| matches!(n.op, Op::LeakyRelu { .. }))
            .flat_map(|n| {
                inner.nodes[n.inputs[0]]
                    .value
                    .data()
                    .iter()
                    .map(|v| v.to_f64_lossy().abs())
                    .collect::<Vec<_>>()
            })
            .min_by(|a, b| a.total_cmp(b))
    }

    /// Reverse sweep from a scalar `output`. In [`Mode::HigherOrder`] the
    /// returned gradients are recorded nodes and may be differentiated again.
    /// Nodes that `output` does not depend on get a zero gradient.
    pub fn backward<'g>(
        &'g self,
        output: Var<'g, T>,
        wrt: &[Var<'g, T>],
    ) -> Result<GradResult<'g, T>> {
        self.sweep(output, wrt, self.mode == Mode::HigherOrder)
    }

    /// Gradient of a functional of earlier gradients. Requires a graph
    /// recorded in [`Mode::HigherOrder`].
    pub fn grad_of_grad<'g>(
        &'g self,
        inner: Var<'g, T>,
        params: &[Var<'g, T>],
    ) -> Result<GradResult<'g, T>> {
        if self.mode != Mode::HigherOrder {
            return Err(Error::NotHigherOrder);
        }
        self.sweep(inner, params, false)
    }

    fn sweep<'g>(
        &'g self,
        output: Var<'g, T>,
        wrt: &[Var<'g, T>],
        create_graph: bool,
    ) -> Result<GradResult<'g, T>> {
        let out_shape = output.shape();
        if out_shape.iter().product::<usize>() != 1 {
            return Err(Error::NonScalarOutput(out_shape));
        }
        let n = output.id + 1;
        // Nodes on some path from a `wrt` target.
        let mut leads = vec![false; n];
        {
            let inner = self.inner.borrow();
            for v in wrt {
                if v.id < n && inner.nodes[v.id].requires_grad {
                    leads[v.id] = true;
                }
            }
            for id in 0..n {
                let node = &inner.nodes[id];
                if !leads[id] && node.requires_grad {
                    leads[id] = node.inputs.iter().any(|&i| leads[i]);
                }
            }
        }

        let saved = std::mem::replace(&mut self.inner.borrow_mut().recording, create_graph);
        let result = self.sweep_marked(output, wrt, &leads, n);
        self.inner.borrow_mut().recording = saved;
        result
    }

    fn sweep_marked<'g>(
        &'g self,
        output: Var<'g, T>,
        wrt: &[Var<'g, T>],
        leads: &[bool],
        n: usize,
    ) -> Result<GradResult<'g, T>> {
        let mut grads: Vec<Option<Var<'g, T>>> = vec![None; n];
        let mut found: Vec<(usize, Var<'g, T>)> = Vec::new();
        if leads[output.id] {
            grads[output.id] = Some(self.constant(Tensor::ones(&output.shape())));
        }
        for id in (0..n).rev() {
            if !leads[id] {
                continue;
            }
            let Some(g) = grads[id].take() else { continue };
            if wrt.iter().any(|v| v.id == id) {
                found.push((id, g));
            }
            let (op, inputs) = {
                let inner = self.inner.borrow();
                let node = &inner.nodes[id];
                (node.op.clone(), node.inputs.clone())
            };
            if inputs.is_empty() {
                continue;
            }
            let needs: Vec<bool> = inputs.iter().map(|&i| leads[i]).collect();
            if !needs.iter().any(|&b| b) {
                continue;
            }
            let in_vars: Vec<Var<'g, T>> = inputs.iter().map(|&i| Var { graph: self, id: i }).collect();
            let out = Var { graph: self, id };
            let contribs = vjp(&op, &in_vars, out, g, &needs)?;
            for ((&i, c), &need) in inputs.iter().zip(contribs).zip(&needs) {
                let Some(c) = c else { continue };
                if !need {
                    continue;
                }
                grads[i] = Some(match grads[i] {
                    Some(acc) => acc.add(c)?,
                    None => c,
                });
            }
        }
        let entries = wrt
            .iter()
            .map(|v| {
                let g = found
                    .iter()
                    .find(|(id, _)| *id == v.id)
                    .map(|(_, g)| *g)
                    .unwrap_or_else(|| self.constant(Tensor::zeros(&v.shape())));
                (v.id, g)
            })
            .collect();
        Ok(GradResult { entries })
    }
}
