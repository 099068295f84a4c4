use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};

use super::{ElemKind, NodeRef, Storage, Tensor};
use crate::error::{Error, Result};

static NEXT_TAPE_ID: AtomicU64 = AtomicU64::new(1);

/// Backward rule: receives the upstream gradient of the node output and a
/// mask of which inputs need gradients; returns one gradient per input.
pub(crate) type BackwardFn = Box<dyn FnOnce(&Storage, &[bool]) -> Vec<Option<Storage>>>;

struct Node {
    inputs: Vec<Option<usize>>,
    backward: Option<BackwardFn>,
    /// Tensor id when this node is a leaf.
    leaf: Option<u64>,
    kind: ElemKind,
    len: usize,
}

struct Inner {
    generation: u64,
    nodes: Vec<Node>,
    leaves: HashMap<u64, usize>,
}

/// Append-only record of differentiable operations.
///
/// Node ids are assigned in execution order, so inputs always precede the
/// nodes that consume them. [`Tape::backward`] walks the nodes once in
/// reverse and then clears the tape for the next forward pass.
pub struct Tape {
    id: u64,
    inner: RefCell<Inner>,
}

impl Default for Tape {
    fn default() -> Self {
        Tape::new()
    }
}

impl Tape {
    pub fn new() -> Tape {
        Tape {
            id: NEXT_TAPE_ID.fetch_add(1, Ordering::Relaxed),
            inner: RefCell::new(Inner { generation: 0, nodes: Vec::new(), leaves: HashMap::new() }),
        }
    }

    pub fn len(&self) -> usize {
        self.inner.borrow().nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Drops all recorded nodes; tensors from earlier passes become stale.
    pub fn reset(&self) {
        let mut inner = self.inner.borrow_mut();
        inner.nodes.clear();
        inner.leaves.clear();
        inner.generation += 1;
    }

    /// True when at least one input would be recorded.
    pub(crate) fn tracking(&self, inputs: &[&Tensor]) -> bool {
        inputs.iter().any(|t| t.is_tracked())
    }

    fn resolve(&self, inner: &mut Inner, t: &Tensor) -> Result<Option<usize>> {
        if let Some(node) = t.node() {
            if node.tape != self.id || node.generation != inner.generation {
                return Err(Error::Tape(
                    "tensor was produced on a different or already-consumed tape".into(),
                ));
            }
            return Ok(Some(node.index));
        }
        if !t.requires_grad_flag() {
            return Ok(None);
        }
        if let Some(&ix) = inner.leaves.get(&t.id()) {
            return Ok(Some(ix));
        }
        let ix = inner.nodes.len();
        inner.nodes.push(Node {
            inputs: Vec::new(),
            backward: None,
            leaf: Some(t.id()),
            kind: t.kind(),
            len: t.numel(),
        });
        inner.leaves.insert(t.id(), ix);
        Ok(Some(ix))
    }

    /// Records an operation. Returns an untracked tensor (and drops the rule)
    /// when no input participates in differentiation.
    pub(crate) fn record<F>(&self, inputs: &[&Tensor], shape: Vec<usize>, data: Storage, backward: F) -> Result<Tensor>
    where
        F: FnOnce(&Storage, &[bool]) -> Vec<Option<Storage>> + 'static,
    {
        if !self.tracking(inputs) {
            return Ok(Tensor::from_parts(shape, data));
        }
        let mut inner = self.inner.borrow_mut();
        let ids = inputs.iter().map(|t| self.resolve(&mut inner, t)).collect::<Result<Vec<_>>>()?;
        let index = inner.nodes.len();
        inner.nodes.push(Node {
            inputs: ids,
            backward: Some(Box::new(backward)),
            leaf: None,
            kind: data.kind(),
            len: data.len(),
        });
        let node = NodeRef { tape: self.id, generation: inner.generation, index };
        Ok(Tensor::tracked(shape, data, node))
    }

    /// Gradients of a real scalar `root` with respect to every leaf that
    /// requires gradients. The tape is cleared afterwards.
    pub fn backward(&self, root: &Tensor) -> Result<Gradients> {
        if root.is_complex() {
            return Err(Error::Tape("backward root must be real".into()));
        }
        if root.numel() != 1 || root.rank() > 1 {
            return Err(Error::Tape(format!(
                "backward root must be a scalar, got shape {:?}",
                root.shape()
            )));
        }
        let root_ix = {
            let mut inner = self.inner.borrow_mut();
            match self.resolve(&mut inner, root)? {
                Some(ix) => ix,
                None => return Err(Error::Tape("backward root is not on the tape".into())),
            }
        };
        let mut nodes = {
            let mut inner = self.inner.borrow_mut();
            let nodes = std::mem::take(&mut inner.nodes);
            inner.leaves.clear();
            inner.generation += 1;
            nodes
        };
        nodes.truncate(root_ix + 1);

        let mut grads: Vec<Option<Storage>> = Vec::with_capacity(nodes.len());
        grads.resize_with(nodes.len(), || None);
        grads[root_ix] = Some(Storage::Real(vec![1.0]));

        let mut out = HashMap::new();
        for ix in (0..nodes.len()).rev() {
            let Some(g) = grads[ix].take() else { continue };
            let node = &mut nodes[ix];
            if let Some(id) = node.leaf {
                out.insert(id, g);
                continue;
            }
            let Some(rule) = node.backward.take() else { continue };
            let needs: Vec<bool> = node.inputs.iter().map(Option::is_some).collect();
            let input_grads = rule(&g, &needs);
            debug_assert_eq!(input_grads.len(), node.inputs.len());
            for (slot, ig) in node.inputs.clone().into_iter().zip(input_grads) {
                let (Some(j), Some(ig)) = (slot, ig) else { continue };
                debug_assert_eq!(ig.len(), nodes[j].len);
                debug_assert_eq!(ig.kind(), nodes[j].kind);
                match &mut grads[j] {
                    Some(acc) => acc.accumulate(&ig),
                    empty => *empty = Some(ig),
                }
            }
        }
        Ok(Gradients { by_id: out })
    }
}

/// Leaf gradients keyed by tensor identity.
#[derive(Default)]
pub struct Gradients {
    by_id: HashMap<u64, Storage>,
}

impl Gradients {
    /// Gradient for a leaf, shaped like the leaf. `None` if the leaf did not
    /// influence the root.
    pub fn get(&self, leaf: &Tensor) -> Option<Tensor> {
        self.by_id
            .get(&leaf.id())
            .map(|s| Tensor::from_parts(leaf.shape().to_vec(), s.clone()))
    }

    pub fn storage(&self, leaf: &Tensor) -> Option<&Storage> {
        self.by_id.get(&leaf.id())
    }

    pub fn len(&self) -> usize {
        self.by_id.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_id.is_empty()
    }
}
