//! Minibatches of (input, label) examples.

use crate::error::{Error, Result};

/// A non-empty batch of examples, with indices into the parent dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Minibatch {
    pub inputs: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    /// Source indices into the parent dataset, parallel to `inputs`.
    pub indices: Vec<usize>,
}

impl Minibatch {
    pub fn new(inputs: Vec<Vec<f64>>, labels: Vec<usize>, indices: Vec<usize>) -> Result<Self> {
        if inputs.is_empty() {
            return Err(Error::invalid("minibatch must be non-empty"));
        }
        if inputs.len() != labels.len() || inputs.len() != indices.len() {
            return Err(Error::invalid("inputs, labels and indices must align"));
        }
        let dim = inputs[0].len();
        if inputs.iter().any(|x| x.len() != dim) {
            return Err(Error::invalid("all inputs must share one dimension"));
        }
        Ok(Minibatch {
            inputs,
            labels,
            indices,
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.inputs[0].len()
    }
}
