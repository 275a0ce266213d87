//! Dense N×C×H×W tensors with tape-free reverse-mode differentiation.
//!
//! Every tensor produced by a differentiable op keeps a handle to its inputs
//! and a closure-like [`Backward`] object. Node ids are handed out from a
//! monotone counter, so inputs always carry smaller ids than outputs and a
//! descending-id sweep over the reachable set is a valid reverse topological
//! order.

mod element;
pub mod ops;

use std::cell::{Ref, RefCell};
use std::collections::HashMap;
use std::fmt;
use std::rc::Rc;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};

pub use element::Element;

static NEXT_ID: AtomicU64 = AtomicU64::new(0);

fn next_id() -> u64 {
    NEXT_ID.fetch_add(1, Ordering::Relaxed)
}

/// Batch, channel, height, width.
#[derive(Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct Shape(pub [usize; 4]);

impl Shape {
    pub const fn new(n: usize, c: usize, h: usize, w: usize) -> Self {
        Shape([n, c, h, w])
    }

    pub const fn scalar() -> Self {
        Shape([1, 1, 1, 1])
    }

    pub fn n(&self) -> usize {
        self.0[0]
    }

    pub fn c(&self) -> usize {
        self.0[1]
    }

    pub fn h(&self) -> usize {
        self.0[2]
    }

    pub fn w(&self) -> usize {
        self.0[3]
    }

    /// Elements in one H×W plane.
    pub fn plane(&self) -> usize {
        self.0[2] * self.0[3]
    }

    pub fn numel(&self) -> usize {
        self.0.iter().product()
    }

    pub fn with_c(mut self, c: usize) -> Self {
        self.0[1] = c;
        self
    }

    pub fn with_hw(mut self, h: usize, w: usize) -> Self {
        self.0[2] = h;
        self.0[3] = w;
        self
    }
}

impl fmt::Debug for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [n, c, h, w] = self.0;
        write!(f, "({n}, {c}, {h}, {w})")
    }
}

/// The local derivative of one op. `backward` receives d(loss)/d(output) and
/// returns one entry per parent, `None` where the parent does not need it.
pub(crate) trait Backward<T: Element> {
    fn parents(&self) -> Vec<&Tensor<T>>;
    fn backward(&self, output: &Tensor<T>, grad: &[T]) -> Vec<Option<Vec<T>>>;
}

struct Node<T: Element> {
    id: u64,
    shape: Shape,
    data: Vec<T>,
    requires_grad: bool,
    grad: RefCell<Option<Vec<T>>>,
    op: Option<Box<dyn Backward<T>>>,
}

/// Reference-counted handle to an immutable value with an optional gradient buffer.
pub struct Tensor<T: Element = f32>(Rc<Node<T>>);

impl<T: Element> Clone for Tensor<T> {
    fn clone(&self) -> Self {
        Tensor(Rc::clone(&self.0))
    }
}

impl<T: Element> fmt::Debug for Tensor<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tensor")
            .field("shape", &self.0.shape)
            .field("requires_grad", &self.0.requires_grad)
            .finish_non_exhaustive()
    }
}

impl<T: Element> Tensor<T> {
    fn build(shape: Shape, data: Vec<T>, requires_grad: bool, op: Option<Box<dyn Backward<T>>>) -> Self {
        assert_eq!(shape.numel(), data.len(), "tensor data length must match shape {shape:?}");
        Tensor(Rc::new(Node {
            id: next_id(),
            shape,
            data,
            requires_grad,
            grad: RefCell::new(None),
            op,
        }))
    }

    /// A constant leaf.
    pub fn from_vec(shape: Shape, data: Vec<T>) -> Result<Self> {
        if shape.numel() != data.len() {
            return Err(Error::contract(format!(
                "data length {} does not match shape {shape:?}",
                data.len()
            )));
        }
        Ok(Self::build(shape, data, false, None))
    }

    /// A trainable leaf.
    pub fn parameter(shape: Shape, data: Vec<T>) -> Result<Self> {
        if shape.numel() != data.len() {
            return Err(Error::contract(format!(
                "data length {} does not match shape {shape:?}",
                data.len()
            )));
        }
        Ok(Self::build(shape, data, true, None))
    }

    pub fn zeros(shape: Shape) -> Self {
        Self::build(shape, vec![T::zero(); shape.numel()], false, None)
    }

    pub fn full(shape: Shape, value: T) -> Self {
        Self::build(shape, vec![value; shape.numel()], false, None)
    }

    pub fn scalar(value: T) -> Self {
        Self::full(Shape::scalar(), value)
    }

    /// Wrap an op result. The op is kept only if some parent needs a gradient.
    pub(crate) fn from_op(shape: Shape, data: Vec<T>, op: impl Backward<T> + 'static) -> Self {
        let requires_grad = op.parents().iter().any(|p| p.requires_grad());
        let op: Option<Box<dyn Backward<T>>> = if requires_grad { Some(Box::new(op)) } else { None };
        Self::build(shape, data, requires_grad, op)
    }

    pub fn shape(&self) -> Shape {
        self.0.shape
    }

    pub fn data(&self) -> &[T] {
        &self.0.data
    }

    pub fn numel(&self) -> usize {
        self.0.data.len()
    }

    pub fn requires_grad(&self) -> bool {
        self.0.requires_grad
    }

    pub fn id(&self) -> u64 {
        self.0.id
    }

    /// Value of a one-element tensor.
    pub fn item(&self) -> T {
        self.0.data[0]
    }

    /// Same values, cut off from the graph.
    pub fn detach(&self) -> Self {
        Self::build(self.shape(), self.0.data.clone(), false, None)
    }

    /// Same values as a fresh trainable leaf.
    pub fn detach_as_parameter(&self) -> Self {
        Self::build(self.shape(), self.0.data.clone(), true, None)
    }

    pub fn grad(&self) -> Option<Ref<'_, Vec<T>>> {
        let g = self.0.grad.borrow();
        if g.is_some() {
            Some(Ref::map(g, |g| g.as_ref().unwrap()))
        } else {
            None
        }
    }

    pub fn grad_vec(&self) -> Option<Vec<T>> {
        self.0.grad.borrow().clone()
    }

    pub fn zero_grad(&self) {
        *self.0.grad.borrow_mut() = None;
    }

    /// Plane (n, c) as a slice.
    pub fn plane(&self, n: usize, c: usize) -> &[T] {
        let s = self.shape();
        let p = s.plane();
        let off = (n * s.c() + c) * p;
        &self.0.data[off..off + p]
    }

    pub fn cast<U: Element>(&self) -> Tensor<U> {
        let data = self.0.data.iter().map(|v| U::from_f64(v.as_f64()).unwrap()).collect();
        Tensor::build(self.shape(), data, false, None)
    }

    pub fn to_f64_vec(&self) -> Vec<f64> {
        self.0.data.iter().map(|v| v.as_f64()).collect()
    }

    /// Reverse-mode sweep from a one-element tensor. Gradients are added into
    /// every reachable tensor that requires them.
    pub fn backward(&self) -> Result<()> {
        if self.numel() != 1 {
            return Err(Error::contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.shape()
            )));
        }
        if !self.requires_grad() {
            return Ok(());
        }

        // Collect the requires_grad sub-graph.
        let mut nodes: Vec<Tensor<T>> = Vec::new();
        let mut seen = std::collections::HashSet::new();
        let mut stack = vec![self.clone()];
        seen.insert(self.id());
        while let Some(t) = stack.pop() {
            if let Some(op) = &t.0.op {
                for p in op.parents() {
                    if p.requires_grad() && seen.insert(p.id()) {
                        stack.push(p.clone());
                    }
                }
            }
            nodes.push(t);
        }
        nodes.sort_unstable_by_key(|t| std::cmp::Reverse(t.id()));

        let mut pending: HashMap<u64, Vec<T>> = HashMap::new();
        pending.insert(self.id(), vec![T::one()]);
        for node in &nodes {
            let Some(grad) = pending.remove(&node.id()) else {
                continue;
            };
            if let Some(op) = &node.0.op {
                let parent_grads = op.backward(node, &grad);
                for (parent, pg) in op.parents().into_iter().zip(parent_grads) {
                    let Some(pg) = pg else { continue };
                    if !parent.requires_grad() {
                        continue;
                    }
                    debug_assert_eq!(pg.len(), parent.numel());
                    match pending.get_mut(&parent.id()) {
                        Some(acc) => acc.iter_mut().zip(&pg).for_each(|(a, g)| *a = *a + *g),
                        None => {
                            pending.insert(parent.id(), pg);
                        }
                    }
                }
            }
            let mut slot = node.0.grad.borrow_mut();
            match slot.as_mut() {
                Some(acc) => acc.iter_mut().zip(&grad).for_each(|(a, g)| *a = *a + *g),
                None => *slot = Some(grad),
            }
        }
        Ok(())
    }
}

/// Check two shapes are equal, naming the first differing axis.
pub(crate) fn expect_same_shape(op: &'static str, a: Shape, b: Shape) -> Result<()> {
    const AXES: [&str; 4] = ["batch", "channels", "height", "width"];
    for i in 0..4 {
        if a.0[i] != b.0[i] {
            return Err(Error::dim(op, AXES[i], a.0[i], b.0[i]));
        }
    }
    Ok(())
}
