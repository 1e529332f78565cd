use std::collections::HashMap;

use super::graph::{Graph, Var};
use crate::error::{Error, Result};
use crate::tensor::RealTensor;

/// Ordered collection of named parameter tensors.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamSet {
    names: Vec<String>,
    tensors: Vec<RealTensor>,
    index: HashMap<String, usize>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, name: impl Into<String>, tensor: RealTensor) -> Result<()> {
        let name = name.into();
        if name.is_empty() || name.len() > u16::MAX as usize {
            return Err(Error::InvalidArgument(format!("bad parameter name {name:?}")));
        }
        if self.index.contains_key(&name) {
            return Err(Error::InvalidArgument(format!("duplicate parameter {name:?}")));
        }
        self.index.insert(name.clone(), self.names.len());
        self.names.push(name);
        self.tensors.push(tensor);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn tensors(&self) -> &[RealTensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [RealTensor] {
        &mut self.tensors
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &RealTensor)> {
        self.names.iter().map(String::as_str).zip(&self.tensors)
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn get(&self, name: &str) -> Option<&RealTensor> {
        self.position(name).map(|i| &self.tensors[i])
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut RealTensor> {
        self.position(name).map(|i| &mut self.tensors[i])
    }

    /// Looks up `name`, failing with a descriptive error if absent.
    pub fn require(&self, name: &str) -> Result<&RealTensor> {
        self.get(name)
            .ok_or_else(|| Error::InvalidArgument(format!("missing parameter {name:?}")))
    }

    pub fn remove(&mut self, name: &str) -> Option<RealTensor> {
        let i = self.position(name)?;
        self.names.remove(i);
        let t = self.tensors.remove(i);
        self.index = self.names.iter().cloned().zip(0..).collect();
        Some(t)
    }

    /// Total number of scalar entries.
    pub fn element_count(&self) -> usize {
        self.tensors.iter().map(RealTensor::len).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(RealTensor::is_finite)
    }

    /// Places every tensor on `graph` as a trainable leaf.
    pub fn register(&self, graph: &mut Graph) -> BoundParams {
        let vars = self.tensors.iter().map(|t| graph.param(t.clone())).collect();
        BoundParams {
            vars,
            index: self.index.clone(),
        }
    }
}

/// Graph handles for a registered [`ParamSet`], in the same order.
#[derive(Debug, Clone)]
pub struct BoundParams {
    vars: Vec<Var>,
    index: HashMap<String, usize>,
}

impl BoundParams {
    pub fn var(&self, name: &str) -> Result<Var> {
        self.index
            .get(name)
            .map(|&i| self.vars[i])
            .ok_or_else(|| Error::InvalidArgument(format!("missing parameter {name:?}")))
    }

    pub fn vars(&self) -> &[Var] {
        &self.vars
    }

    /// Gradients in parameter order.
    pub fn grads(&self, graph: &Graph) -> Vec<RealTensor> {
        self.vars.iter().map(|&v| graph.grad(v)).collect()
    }
}
