//! Optimizer state machines: SGD, classical momentum, Lookahead, Lookaround.
//!
//! All four operate on flat `ParamVector`s against a pluggable `Objective`.
//! Lookaround alternates an around step (one inner update per replica, each on
//! a differently augmented view of the same minibatch) with an average step
//! that synchronizes every replica to the uniform mean.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::augment::AugmentationSpec;
use crate::batch::Minibatch;
use crate::error::{Error, Result};
use crate::objective::Objective;
use crate::param::ParamVector;
use crate::rng;

/// Inner optimizer: plain SGD, or classical momentum with the update order
/// `v ← βv − g; θ ← θ + γv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum InnerOptimizer {
    Sgd {
        gamma: f64,
    },
    Momentum {
        gamma: f64,
        beta: f64,
        velocity: ParamVector,
    },
}

impl InnerOptimizer {
    pub fn sgd(gamma: f64) -> Self {
        InnerOptimizer::Sgd { gamma }
    }

    pub fn momentum(gamma: f64, beta: f64, dim: usize) -> Self {
        InnerOptimizer::Momentum {
            gamma,
            beta,
            velocity: ParamVector::zeros(dim),
        }
    }

    pub fn gamma(&self) -> f64 {
        match self {
            InnerOptimizer::Sgd { gamma } => *gamma,
            InnerOptimizer::Momentum { gamma, .. } => *gamma,
        }
    }

    pub fn set_gamma(&mut self, new_gamma: f64) {
        match self {
            InnerOptimizer::Sgd { gamma } => *gamma = new_gamma,
            InnerOptimizer::Momentum { gamma, .. } => *gamma = new_gamma,
        }
    }

    /// Resets momentum state; no-op for SGD.
    pub fn reset_velocity(&mut self) {
        if let InnerOptimizer::Momentum { velocity, .. } = self {
            *velocity = ParamVector::zeros(velocity.len());
        }
    }

    pub fn velocity(&self) -> Option<&ParamVector> {
        match self {
            InnerOptimizer::Sgd { .. } => None,
            InnerOptimizer::Momentum { velocity, .. } => Some(velocity),
        }
    }

    pub fn set_velocity(&mut self, v: ParamVector) -> Result<()> {
        if let InnerOptimizer::Momentum { velocity, .. } = self {
            v.check_len(velocity.len())?;
            *velocity = v;
        }
        Ok(())
    }

    /// One inner update in place. Validates dimensions and rejects
    /// non-positive learning rates.
    pub fn step(&mut self, params: &mut ParamVector, grad: &ParamVector) -> Result<()> {
        grad.check_len(params.len())?;
        match self {
            InnerOptimizer::Sgd { gamma } => {
                if *gamma <= 0.0 {
                    return Err(Error::invalid("learning rate γ must be > 0"));
                }
                params.axpy(-*gamma, grad)?;
            }
            InnerOptimizer::Momentum {
                gamma,
                beta,
                velocity,
            } => {
                if *gamma <= 0.0 {
                    return Err(Error::invalid("learning rate γ must be > 0"));
                }
                if !(0.0..1.0).contains(beta) {
                    return Err(Error::invalid("momentum β must lie in [0, 1)"));
                }
                velocity.check_len(params.len())?;
                // v ← βv − g, then θ ← θ + γv. The gradient enters the
                // velocity before the learning-rate scaling.
                velocity.scale(*beta);
                velocity.axpy(-1.0, grad)?;
                params.axpy(*gamma, velocity)?;
            }
        }
        Ok(())
    }
}

/// Lookahead: k inner steps from the slow weights, then
/// `slow ← slow + α(fast_k − slow)`; fast weights restart from the new slow.
#[derive(Debug, Clone)]
pub struct Lookahead {
    pub inner: InnerOptimizer,
    pub k: usize,
    pub alpha: f64,
    pub slow: ParamVector,
}

impl Lookahead {
    pub fn new(inner: InnerOptimizer, k: usize, alpha: f64, init: ParamVector) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("synchronization period k must be ≥ 1"));
        }
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::invalid("α must lie in (0, 1]"));
        }
        Ok(Lookahead {
            inner,
            k,
            alpha,
            slow: init,
        })
    }

    /// Runs one outer round over exactly `k` minibatches; returns the new slow
    /// weights.
    pub fn round(&mut self, objective: &dyn Objective, batches: &[Minibatch]) -> Result<ParamVector> {
        if batches.len() < self.k {
            return Err(Error::invalid(format!(
                "lookahead round needs {} batches, got {}",
                self.k,
                batches.len()
            )));
        }
        let mut fast = self.slow.clone();
        for batch in batches.iter().take(self.k) {
            let (_, grad) = objective.eval(&fast, batch)?;
            self.inner.step(&mut fast, &grad)?;
        }
        let diff = fast.sub(&self.slow)?;
        self.slow.axpy(self.alpha, &diff)?;
        Ok(self.slow.clone())
    }
}

/// Lookaround optimizer state: d replicas with per-replica inner states and
/// augmentation specs, synchronized to the averaged weights every k steps.
#[derive(Debug, Clone)]
pub struct Lookaround {
    inner_template: InnerOptimizer,
    pub k: usize,
    pub augs: Vec<AugmentationSpec>,
    pub replicas: Vec<ParamVector>,
    pub inner_states: Vec<InnerOptimizer>,
    /// When true, momentum velocities are averaged across replicas at each
    /// average step instead of being reset to zero.
    pub carry_velocity: bool,
    /// Top-level seed feeding every augmentation stream.
    pub seed: u64,
    /// Round counter: increments at each average step.
    pub round_index: u64,
    /// Step counter within the current round.
    step_index: u64,
    /// When true, replicas advance in parallel; the trajectory is identical
    /// either way because each replica owns its state and RNG stream.
    pub parallel: bool,
}

impl Lookaround {
    pub fn new(
        inner: InnerOptimizer,
        k: usize,
        augs: Vec<AugmentationSpec>,
        init: ParamVector,
        seed: u64,
    ) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("synchronization period k must be ≥ 1"));
        }
        if augs.is_empty() {
            return Err(Error::invalid("replica count d must be ≥ 1"));
        }
        let d = augs.len();
        Ok(Lookaround {
            inner_template: inner.clone(),
            k,
            augs,
            replicas: vec![init; d],
            inner_states: vec![inner; d],
            carry_velocity: false,
            seed,
            round_index: 0,
            step_index: 0,
            parallel: false,
        })
    }

    pub fn d(&self) -> usize {
        self.augs.len()
    }

    pub fn set_gamma(&mut self, gamma: f64) {
        self.inner_template.set_gamma(gamma);
        for s in &mut self.inner_states {
            s.set_gamma(gamma);
        }
    }

    /// One around step: every replica takes one inner update on its own
    /// augmented view of the same minibatch.
    pub fn around_step(&mut self, objective: &dyn Objective, batch: &Minibatch) -> Result<()> {
        let seed = self.seed;
        let round = self.round_index;
        let step = self.step_index;
        let do_one = |j: usize,
                      replica: &mut ParamVector,
                      state: &mut InnerOptimizer,
                      aug: &AugmentationSpec|
         -> Result<()> {
            let mut stream = rng::aug_stream(seed, round, step, j as u64);
            let view = aug.apply(batch, &mut stream)?;
            if view.len() != batch.len() {
                return Err(Error::Invariant("augmentation changed example count".into()));
            }
            let (_, grad) = objective.eval(replica, &view)?;
            state.step(replica, &grad)
        };

        if self.parallel {
            self.replicas
                .par_iter_mut()
                .zip(self.inner_states.par_iter_mut())
                .zip(self.augs.par_iter())
                .enumerate()
                .try_for_each(|(j, ((replica, state), aug))| do_one(j, replica, state, aug))?;
        } else {
            for (j, ((replica, state), aug)) in self
                .replicas
                .iter_mut()
                .zip(self.inner_states.iter_mut())
                .zip(self.augs.iter())
                .enumerate()
            {
                do_one(j, replica, state, aug)?;
            }
        }
        self.step_index += 1;
        Ok(())
    }

    /// Average step: synchronizes every replica to the uniform mean φ and
    /// resets (or averages, under `carry_velocity`) the momentum states.
    pub fn average_step(&mut self) -> Result<ParamVector> {
        let phi = ParamVector::mean(&self.replicas)?;
        for r in &mut self.replicas {
            *r = phi.clone();
        }
        if self.carry_velocity {
            let vels: Vec<ParamVector> = self
                .inner_states
                .iter()
                .filter_map(|s| s.velocity().cloned())
                .collect();
            if !vels.is_empty() {
                let mean_v = ParamVector::mean(&vels)?;
                for s in &mut self.inner_states {
                    s.set_velocity(mean_v.clone())?;
                }
            }
        } else {
            for s in &mut self.inner_states {
                s.reset_velocity();
            }
        }
        self.round_index += 1;
        self.step_index = 0;
        Ok(phi)
    }

    /// One full round: k around steps (one shared batch per step) then one
    /// average step. Returns the new synchronized weights φ.
    pub fn round(&mut self, objective: &dyn Objective, batches: &[Minibatch]) -> Result<ParamVector> {
        if batches.len() < self.k {
            return Err(Error::invalid(format!(
                "lookaround round needs {} batches, got {}",
                self.k,
                batches.len()
            )));
        }
        for batch in batches.iter().take(self.k) {
            self.around_step(objective, batch)?;
        }
        self.average_step()
    }

    /// Current synchronized weights (valid right after an average step).
    pub fn phi(&self) -> &ParamVector {
        &self.replicas[0]
    }
}
