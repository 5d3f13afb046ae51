use crate::workload::{Activation, ActivationKind};

use super::ProtocolError;

#[derive(Debug, Clone, PartialEq)]
pub struct FunctionEntry {
    pub activation: Activation,
    /// What the host expects in the data region when this id is invoked.
    pub expects: String,
}

/// Host-side table of functions an accelerator may invoke. Ids are dense
/// indices into the table; the id stands in for the function pointer a
/// real driver would publish.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionTable {
    entries: Vec<FunctionEntry>,
}

impl FunctionTable {
    pub fn new(entries: Vec<FunctionEntry>) -> Self {
        Self { entries }
    }

    /// All seven activations, ids in the order heaviside, tanh, sigmoid,
    /// relu, leaky_relu, elu, softplus.
    pub fn standard() -> Self {
        let entries = ActivationKind::ALL
            .into_iter()
            .map(|kind| FunctionEntry {
                activation: Activation::new(kind),
                expects: format!("{kind} over `element_count` f64 values at `data_offset`"),
            })
            .collect();
        Self { entries }
    }

    /// Replaces the entry of the same kind (e.g. to carry a custom ELU alpha).
    pub fn with_activation(mut self, activation: Activation) -> Self {
        for e in &mut self.entries {
            if e.activation.kind == activation.kind {
                e.activation = activation;
            }
        }
        self
    }

    pub fn lookup(&self, id: u64) -> Result<&FunctionEntry, ProtocolError> {
        usize::try_from(id)
            .ok()
            .and_then(|i| self.entries.get(i))
            .ok_or(ProtocolError::UnknownFunction(id))
    }

    pub fn id_of(&self, kind: ActivationKind) -> Option<u64> {
        self.entries
            .iter()
            .position(|e| e.activation.kind == kind)
            .map(|i| i as u64)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_ids() {
        let t = FunctionTable::standard();
        assert_eq!(t.len(), 7);
        assert_eq!(t.lookup(2).unwrap().activation.kind, ActivationKind::Sigmoid);
        assert_eq!(t.id_of(ActivationKind::Softplus), Some(6));
        assert!(matches!(t.lookup(99), Err(ProtocolError::UnknownFunction(99))));
        assert!(matches!(t.lookup(7), Err(ProtocolError::UnknownFunction(7))));
    }

    #[test]
    fn custom_alpha() {
        let t = FunctionTable::standard().with_activation(Activation::elu(0.25).unwrap());
        let id = t.id_of(ActivationKind::Elu).unwrap();
        assert_eq!(t.lookup(id).unwrap().activation.elu_alpha, 0.25);
    }
}
