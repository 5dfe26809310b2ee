//! Operation tape and the reverse-mode backward driver.

use std::cell::RefCell;
use std::collections::HashMap;

use super::Tensor;
use crate::error::{Error, Result};

/// Gradient accumulator used while a backward pass runs.
///
/// Adjoints are keyed by tensor id and flushed into each tensor's `grad`
/// buffer once the replay finishes, so a tensor's visible gradient is the
/// total over the whole pass (and over repeated passes, additively).
pub(crate) struct Adjoints {
    map: HashMap<u64, (Tensor, Vec<f64>)>,
}

impl Adjoints {
    fn new() -> Self {
        Adjoints {
            map: HashMap::new(),
        }
    }

    /// Mutable view of a tensor's adjoint buffer, created zeroed on first use.
    pub(crate) fn buffer_mut(&mut self, t: &Tensor) -> &mut [f64] {
        let entry = self
            .map
            .entry(t.id())
            .or_insert_with(|| (t.clone(), vec![0.0; t.numel()]));
        &mut entry.1
    }

    /// Adds `delta` elementwise into a tensor's adjoint.
    pub(crate) fn accumulate(&mut self, t: &Tensor, delta: &[f64]) {
        let buf = self.buffer_mut(t);
        debug_assert_eq!(buf.len(), delta.len());
        for (g, d) in buf.iter_mut().zip(delta) {
            *g += d;
        }
    }

    fn adjoint_of(&self, id: u64) -> Option<Vec<f64>> {
        self.map.get(&id).map(|(_, buf)| buf.clone())
    }
}

struct RecordedOp {
    out: Tensor,
    /// Applies the chain rule for this operation: receives the adjoint of
    /// `out` and accumulates into the adjoints of the operation's inputs.
    back: Box<dyn Fn(&[f64], &mut Adjoints)>,
}

/// Records every differentiable operation executed through it, in forward
/// order, so [`Tape::backward`] can replay them in reverse.
///
/// A tape and its tensors belong to one execution context (the type is not
/// `Send`); independent tapes may run concurrently. Each forward output is a
/// fresh tensor, so reverse-chronological replay is a valid topological order
/// of the recorded graph.
#[derive(Default)]
pub struct Tape {
    ops: RefCell<Vec<RecordedOp>>,
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    /// Number of operations recorded so far.
    pub fn len(&self) -> usize {
        self.ops.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.borrow().is_empty()
    }

    /// Registers an operation output and its backward closure. Exposed to the
    /// crate so the gradient-check suite can register a deliberately broken
    /// rule as a negative control.
    pub(crate) fn record(&self, out: Tensor, back: impl Fn(&[f64], &mut Adjoints) + 'static) {
        self.ops.borrow_mut().push(RecordedOp {
            out,
            back: Box::new(back),
        });
    }

    /// Runs reverse-mode differentiation from a scalar root: seeds the root's
    /// adjoint with 1, replays the recorded operations newest-first, then
    /// adds every reached tensor's adjoint into its `grad` buffer.
    ///
    /// Calling backward again without clearing gradients accumulates a second
    /// contribution on top of the first.
    pub fn backward(&self, root: &Tensor) -> Result<()> {
        if !root.is_scalar() {
            return Err(Error::Shape(format!(
                "backward: root must be a scalar, got shape {:?}",
                root.shape()
            )));
        }
        let mut adj = Adjoints::new();
        adj.accumulate(root, &[1.0]);
        let ops = self.ops.borrow();
        for op in ops.iter().rev() {
            // An output no gradient has reached does not influence the root;
            // skip its backward rule entirely.
            if let Some(bar) = adj.adjoint_of(op.out.id()) {
                (op.back)(&bar, &mut adj);
            }
        }
        for (tensor, buf) in adj.map.values() {
            tensor.accumulate_grad(buf);
        }
        Ok(())
    }
}
