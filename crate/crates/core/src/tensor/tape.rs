use std::cell::RefCell;
use std::rc::Rc;

use super::{Tensor, TensorError};

/// Receives the upstream gradient of a node and pushes contributions to its parents.
pub(crate) type BackwardFn = Box<dyn Fn(&[f64], &mut GradSink)>;

struct Node {
    value: Rc<Tensor>,
    requires_grad: bool,
    backward: Option<BackwardFn>,
}

/// Gradient accumulator handed to backward rules.
pub(crate) struct GradSink {
    grads: Vec<Option<Vec<f64>>>,
    lens: Vec<usize>,
    wanted: Vec<bool>,
}

impl GradSink {
    pub(crate) fn wants(&self, id: usize) -> bool {
        self.wanted[id]
    }

    /// Zero-initialized on first touch.
    pub(crate) fn slot(&mut self, id: usize) -> &mut [f64] {
        let len = self.lens[id];
        self.grads[id].get_or_insert_with(|| vec![0.0; len])
    }

    pub(crate) fn add(&mut self, id: usize, g: &[f64]) {
        if !self.wanted[id] {
            return;
        }
        for (s, v) in self.slot(id).iter_mut().zip(g) {
            *s += v;
        }
    }
}

/// A single-threaded record of operations for one forward pass.
#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
}

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t> {
    pub(crate) tape: &'t Tape,
    pub(crate) id: usize,
}

impl std::fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Var")
            .field("id", &self.id)
            .field("shape", &self.shape())
            .finish()
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    /// A trainable input; gradients are reported for it.
    pub fn param(&self, value: Tensor) -> Var<'_> {
        self.push(value, true, None)
    }

    /// A value that never receives a gradient.
    pub fn constant(&self, value: Tensor) -> Var<'_> {
        self.push(value, false, None)
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub(crate) fn push(&self, value: Tensor, requires_grad: bool, backward: Option<BackwardFn>) -> Var<'_> {
        let mut nodes = self.nodes.borrow_mut();
        let id = nodes.len();
        nodes.push(Node {
            value: Rc::new(value),
            requires_grad,
            backward: if requires_grad { backward } else { None },
        });
        Var { tape: self, id }
    }

    pub(crate) fn value_of(&self, id: usize) -> Rc<Tensor> {
        Rc::clone(&self.nodes.borrow()[id].value)
    }

    pub(crate) fn requires_grad(&self, id: usize) -> bool {
        self.nodes.borrow()[id].requires_grad
    }

    /// Reverse-mode sweep from a one-element `loss`.
    pub fn backward(&self, loss: Var<'_>) -> Result<Gradients, TensorError> {
        assert!(std::ptr::eq(loss.tape, self), "loss belongs to another tape");
        let nodes = self.nodes.borrow();
        let shape = nodes[loss.id].value.shape().to_vec();
        if nodes[loss.id].value.numel() != 1 {
            return Err(TensorError::NonScalarLoss(shape));
        }
        let count = loss.id + 1;
        let mut sink = GradSink {
            grads: vec![None; count],
            lens: nodes[..count].iter().map(|n| n.value.numel()).collect(),
            wanted: nodes[..count].iter().map(|n| n.requires_grad).collect(),
        };
        if sink.wanted[loss.id] {
            sink.grads[loss.id] = Some(vec![1.0]);
        }
        for id in (0..count).rev() {
            let Some(rule) = nodes[id].backward.as_ref() else {
                continue;
            };
            if let Some(g) = sink.grads[id].take() {
                rule(&g, &mut sink);
            }
        }
        let grads = sink
            .grads
            .into_iter()
            .zip(&nodes[..count])
            .map(|(g, n)| match (g, n.backward.is_none() && n.requires_grad) {
                (Some(g), true) => Some(Tensor::new(n.value.shape().to_vec(), g).expect("gradient shape")),
                _ => None,
            })
            .collect();
        Ok(Gradients { grads })
    }
}

/// Gradients of the loss with respect to every parameter leaf it depends on.
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// `None` when `var` is not a parameter or the loss does not depend on it.
    pub fn get(&self, var: Var<'_>) -> Option<&Tensor> {
        self.grads.get(var.id).and_then(Option::as_ref)
    }

    /// Like [`get`](Self::get) but returns zeros of the right shape for unused parameters.
    pub fn get_or_zeros(&self, var: Var<'_>) -> Tensor {
        self.get(var)
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(var.value().shape()))
    }
}

impl<'t> Var<'t> {
    pub fn value(&self) -> Rc<Tensor> {
        self.tape.value_of(self.id)
    }

    pub fn shape(&self) -> Vec<usize> {
        self.value().shape().to_vec()
    }

    pub fn requires_grad(&self) -> bool {
        self.tape.requires_grad(self.id)
    }

    pub fn item(&self) -> Option<f64> {
        self.value().item()
    }
}
