//! Wengert-list tape for reverse-mode differentiation.
//!
//! Every operation whose inputs include a tracked variable is appended to the
//! tape together with a closure that maps the output gradient to input
//! gradients. Operations on constants only are evaluated eagerly and leave
//! nothing behind, so inference runs without holding intermediates alive.

use std::cell::RefCell;
use std::rc::Rc;

use super::{AdError, Array};

/// Per-input gradient contributions returned by a backward rule, in the same
/// order as the inputs passed to `Tape::record`. `None` means "no
/// contribution" (constant input or structurally zero).
pub(crate) type InputGrads = Vec<Option<Vec<f64>>>;

type BackwardFn = Box<dyn Fn(&[f64]) -> InputGrads>;

struct Entry {
    inputs: Vec<Option<usize>>,
    output: usize,
    backward: BackwardFn,
}

#[derive(Default)]
struct Inner {
    entries: Vec<Entry>,
    /// Shape of every id handed out, leaves and intermediates alike.
    shapes: Vec<Vec<usize>>,
    /// Accumulated gradient for leaves; `None` for intermediates.
    leaf_grads: Vec<Option<Vec<f64>>>,
}

/// A value living on (or next to) a tape.
///
/// Cloning is cheap: the value is reference-counted.
#[derive(Clone, Debug)]
pub struct Var {
    id: Option<usize>,
    value: Rc<Array>,
}

impl Var {
    pub fn value(&self) -> &Array {
        &self.value
    }

    pub(crate) fn value_rc(&self) -> Rc<Array> {
        Rc::clone(&self.value)
    }

    pub fn shape(&self) -> &[usize] {
        self.value.shape()
    }

    pub fn data(&self) -> &[f64] {
        self.value.data()
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }

    pub fn requires_grad(&self) -> bool {
        self.id.is_some()
    }

    /// Scalar value of a one-element variable.
    pub fn item(&self) -> f64 {
        self.value.item()
    }
}

/// Single-threaded recording tape.
///
/// Gradients of leaves accumulate across `backward` calls until
/// [`Tape::zero_grad`] is called.
#[derive(Default)]
pub struct Tape {
    inner: RefCell<Inner>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a trainable leaf.
    pub fn leaf(&self, value: Array) -> Var {
        let mut inner = self.inner.borrow_mut();
        let id = inner.shapes.len();
        inner.shapes.push(value.shape().to_vec());
        inner.leaf_grads.push(Some(vec![0.0; value.len()]));
        Var { id: Some(id), value: Rc::new(value) }
    }

    /// Wraps a value that never receives a gradient.
    pub fn constant(&self, value: Array) -> Var {
        Var { id: None, value: Rc::new(value) }
    }

    pub fn scalar(&self, value: f64) -> Var {
        self.constant(Array::scalar(value))
    }

    /// Number of recorded operations.
    pub fn len(&self) -> usize {
        self.inner.borrow().entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Records an operation. When no input is tracked the output is a
    /// constant and the backward rule is dropped.
    pub(crate) fn record<F>(&self, inputs: &[&Var], value: Array, backward: F) -> Var
    where
        F: Fn(&[f64]) -> InputGrads + 'static,
    {
        let ids: Vec<Option<usize>> = inputs.iter().map(|v| v.id).collect();
        if ids.iter().all(Option::is_none) {
            return Var { id: None, value: Rc::new(value) };
        }
        let mut inner = self.inner.borrow_mut();
        let id = inner.shapes.len();
        inner.shapes.push(value.shape().to_vec());
        inner.leaf_grads.push(None);
        inner.entries.push(Entry { inputs: ids, output: id, backward: Box::new(backward) });
        Var { id: Some(id), value: Rc::new(value) }
    }

    /// Back-propagates from a scalar output, adding into leaf gradients.
    pub fn backward(&self, output: &Var) -> Result<(), AdError> {
        if output.len() != 1 {
            return Err(AdError::NonScalar(output.shape().to_vec()));
        }
        let Some(out_id) = output.id else {
            // Output does not depend on any leaf.
            return Ok(());
        };
        let mut inner = self.inner.borrow_mut();
        let n = inner.shapes.len();
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; n];
        grads[out_id] = Some(vec![1.0]);

        for entry in inner.entries.iter().rev() {
            if entry.output > out_id {
                continue;
            }
            let Some(g) = grads[entry.output].take() else { continue };
            let contributions = (entry.backward)(&g);
            debug_assert_eq!(contributions.len(), entry.inputs.len());
            for (input, contrib) in entry.inputs.iter().zip(contributions) {
                if let (Some(id), Some(c)) = (input, contrib) {
                    match &mut grads[*id] {
                        Some(acc) => {
                            for (a, v) in acc.iter_mut().zip(&c) {
                                *a += v;
                            }
                        }
                        slot @ None => *slot = Some(c),
                    }
                }
            }
        }

        for (id, g) in grads.into_iter().enumerate() {
            if let (Some(acc), Some(g)) = (inner.leaf_grads[id].as_mut(), g) {
                for (a, v) in acc.iter_mut().zip(&g) {
                    *a += v;
                }
            }
        }
        Ok(())
    }

    /// Accumulated gradient of a leaf, shaped like the leaf. Constants and
    /// intermediates yield `None`.
    pub fn grad(&self, var: &Var) -> Option<Array> {
        let id = var.id?;
        let inner = self.inner.borrow();
        let g = inner.leaf_grads[id].as_ref()?;
        Some(Array::new(inner.shapes[id].clone(), g.clone()).expect("gradient shape"))
    }

    pub fn zero_grad(&self) {
        let mut inner = self.inner.borrow_mut();
        for g in inner.leaf_grads.iter_mut().flatten() {
            g.iter_mut().for_each(|v| *v = 0.0);
        }
    }
}
