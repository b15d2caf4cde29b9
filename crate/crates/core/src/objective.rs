//! Pluggable loss-and-gradient evaluators.

use crate::batch::Minibatch;
use crate::error::Result;
use crate::param::ParamVector;

/// A deterministic loss-and-gradient evaluator over flat parameters.
/// Implementations must return a gradient of the same length as `params`.
pub trait Objective: Sync {
    fn dim(&self) -> usize;

    /// Returns (loss, gradient) at `params` on `batch`.
    fn eval(&self, params: &ParamVector, batch: &Minibatch) -> Result<(f64, ParamVector)>;
}

/// Deterministic diagonal quadratic `f(θ) = ½ Σ a_i (θ_i - c_i)²` where the
/// center is read off the batch's first input row. Used by tests and the
/// noisy-quadratic simulator: sampling a noisy center c and building a batch
/// around it gives exactly the perturbed-optimum loss.
pub struct QuadraticObjective {
    pub curvature: Vec<f64>,
}

impl QuadraticObjective {
    pub fn new(curvature: Vec<f64>) -> Self {
        QuadraticObjective { curvature }
    }

    /// Wraps a center vector as a one-example batch.
    pub fn center_batch(center: Vec<f64>) -> Minibatch {
        Minibatch {
            inputs: vec![center],
            labels: vec![0],
            indices: vec![0],
        }
    }
}

impl Objective for QuadraticObjective {
    fn dim(&self) -> usize {
        self.curvature.len()
    }

    fn eval(&self, params: &ParamVector, batch: &Minibatch) -> Result<(f64, ParamVector)> {
        params.check_len(self.curvature.len())?;
        let center = &batch.inputs[0];
        let mut loss = 0.0;
        let mut grad = Vec::with_capacity(self.curvature.len());
        for ((p, a), c) in params.as_slice().iter().zip(&self.curvature).zip(center) {
            let delta = p - c;
            loss += 0.5 * a * delta * delta;
            grad.push(a * delta);
        }
        Ok((loss, ParamVector::from_vec(grad)))
    }
}
