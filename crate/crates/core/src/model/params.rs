use crate::error::{Error, Result};
use crate::nn::{Gradients, Scalar, Tape, Tensor, Var};

/// Index of an entry in a [`ParamStore`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ParamId(pub usize);

#[derive(Clone, Debug)]
pub struct ParamEntry<T = f32> {
    pub name: String,
    /// Logical shape written to checkpoints: 4-d for weights, 1-d for biases.
    pub shape: Vec<usize>,
    pub value: Tensor<T>,
    pub grad: Tensor<T>,
    has_grad: bool,
}

impl<T: Scalar> ParamEntry<T> {
    pub fn has_grad(&self) -> bool {
        self.has_grad
    }
}

/// Learnable tensors in construction order, each with a gradient slot.
#[derive(Clone, Debug, Default)]
pub struct ParamStore<T = f32> {
    entries: Vec<ParamEntry<T>>,
}

impl<T: Scalar> ParamStore<T> {
    pub fn new() -> Self {
        Self { entries: Vec::new() }
    }

    pub fn push(&mut self, name: impl Into<String>, shape: Vec<usize>, value: Tensor<T>) -> Result<ParamId> {
        let name = name.into();
        if self.entries.iter().any(|e| e.name == name) {
            return Err(Error::Internal(format!("duplicate parameter name {name}")));
        }
        if shape.iter().product::<usize>() != value.numel() {
            return Err(Error::Internal(format!("logical shape {shape:?} does not fit {name}")));
        }
        let grad = Tensor::zeros(value.dims());
        self.entries.push(ParamEntry {
            name,
            shape,
            value,
            grad,
            has_grad: false,
        });
        Ok(ParamId(self.entries.len() - 1))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &ParamEntry<T>> {
        self.entries.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut ParamEntry<T>> {
        self.entries.iter_mut()
    }

    pub fn get(&self, id: ParamId) -> &ParamEntry<T> {
        &self.entries[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut ParamEntry<T> {
        &mut self.entries[id.0]
    }

    pub fn by_name(&self, name: &str) -> Option<&ParamEntry<T>> {
        self.entries.iter().find(|e| e.name == name)
    }

    /// Total number of scalar parameters.
    pub fn numel(&self) -> usize {
        self.entries.iter().map(|e| e.value.numel()).sum()
    }

    pub fn zero_grad(&mut self) {
        for e in &mut self.entries {
            e.grad.data_mut().fill(T::zero());
            e.has_grad = false;
        }
    }

    /// Registers every parameter as a leaf on `tape`, in store order.
    pub fn bind(&self, tape: &mut Tape<T>) -> Vec<Var> {
        self.entries.iter().map(|e| tape.leaf(e.value.clone())).collect()
    }

    /// Copies the gradients of `vars` (as returned by [`bind`](Self::bind))
    /// into the gradient slots. A parameter the output does not depend
    /// on is an internal error: the network has no dead parameters.
    pub fn load_grads(&mut self, vars: &[Var], grads: &mut Gradients<T>) -> Result<()> {
        if vars.len() != self.entries.len() {
            return Err(Error::Internal(format!(
                "{} bound variables for {} parameters",
                vars.len(),
                self.entries.len()
            )));
        }
        for (e, &v) in self.entries.iter_mut().zip(vars) {
            let g = grads
                .take(v)
                .ok_or_else(|| Error::Internal(format!("no gradient reached {}", e.name)))?;
            e.grad = g;
            e.has_grad = true;
        }
        Ok(())
    }

    pub fn cast<U: Scalar>(&self) -> ParamStore<U> {
        ParamStore {
            entries: self
                .entries
                .iter()
                .map(|e| ParamEntry {
                    name: e.name.clone(),
                    shape: e.shape.clone(),
                    value: e.value.cast(),
                    grad: e.grad.cast(),
                    has_grad: e.has_grad,
                })
                .collect(),
        }
    }

    /// Flat view `(entry, offset)` of the `i`-th scalar across all entries.
    pub fn locate(&self, mut i: usize) -> Option<(ParamId, usize)> {
        for (k, e) in self.entries.iter().enumerate() {
            if i < e.value.numel() {
                return Some((ParamId(k), i));
            }
            i -= e.value.numel();
        }
        None
    }

    /// True when every value is bitwise equal to `other`'s.
    pub fn bitwise_eq(&self, other: &Self) -> bool {
        self.entries.len() == other.entries.len()
            && self.entries.iter().zip(&other.entries).all(|(a, b)| {
                a.name == b.name
                    && a.value.dims() == b.value.dims()
                    && a.value
                        .data()
                        .iter()
                        .zip(b.value.data())
                        .all(|(x, y)| x.to_f64().map(f64::to_bits) == y.to_f64().map(f64::to_bits))
            })
    }
}
