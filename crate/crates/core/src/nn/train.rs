//! Training loops driving the four optimizers over the MLP harness.
//!
//! Every run is fully determined by (config, dataset, augs, seed): batch
//! shuffles, augmentation draws and weight init all come from named streams of
//! the run seed. Logging happens once per synchronization.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::augment::AugmentationSpec;
use crate::batch::Minibatch;
use crate::error::{Error, Result};
use crate::nn::dataset::{epoch_batches, Dataset};
use crate::nn::mlp::{Arch, Mlp, MlpObjective};
use crate::objective::Objective;
use crate::optim::{InnerOptimizer, Lookahead, Lookaround};
use crate::param::ParamVector;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrainMethod {
    Sgd,
    Momentum { beta: f64 },
    Lookahead { k: usize, alpha: f64 },
    Lookaround { k: usize, d: usize },
}

impl TrainMethod {
    pub fn name(&self) -> &'static str {
        match self {
            TrainMethod::Sgd => "sgd",
            TrainMethod::Momentum { .. } => "momentum",
            TrainMethod::Lookahead { .. } => "lookahead",
            TrainMethod::Lookaround { .. } => "lookaround",
        }
    }
}

/// Learning-rate schedules: piecewise-constant decay by 0.2 at 30/60/80% of
/// training, or cosine annealing to zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Schedule {
    Constant,
    Piecewise,
    Cosine,
}

impl Schedule {
    pub fn lr(&self, base: f64, step: usize, total_steps: usize) -> f64 {
        let frac = step as f64 / total_steps.max(1) as f64;
        match self {
            Schedule::Constant => base,
            Schedule::Piecewise => {
                let mut lr = base;
                for boundary in [0.3, 0.6, 0.8] {
                    if frac >= boundary {
                        lr *= 0.2;
                    }
                }
                lr
            }
            Schedule::Cosine => base * 0.5 * (1.0 + (std::f64::consts::PI * frac).cos()),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub method: TrainMethod,
    pub gamma: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub schedule: Schedule,
    pub seed: u64,
    /// Hidden layer widths; input/output widths come from the dataset.
    pub hidden: Vec<usize>,
    /// Averaged momentum carry-over at average steps instead of reset.
    #[serde(default)]
    pub carry_velocity: bool,
    /// Advance Lookaround replicas in parallel.
    #[serde(default)]
    pub parallel_replicas: bool,
}

/// One record per synchronization.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub round: usize,
    pub step: usize,
    pub lr: f64,
    pub train_loss_per_replica: Vec<f64>,
    pub test_acc_per_replica: Vec<f64>,
    pub test_acc_mean_net: f64,
    pub wall_clock_s: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunLog {
    pub method: String,
    pub seed: u64,
    pub config: TrainConfig,
    pub records: Vec<RunRecord>,
}

impl RunLog {
    pub fn final_mean_net_accuracy(&self) -> Option<f64> {
        self.records.last().map(|r| r.test_acc_mean_net)
    }
}

/// Outcome of a run: the log, the final averaged network and the final
/// per-replica networks (one entry for single-trajectory methods).
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub log: RunLog,
    pub final_net: Mlp,
    pub replicas: Vec<Mlp>,
}

pub fn arch_for(dataset: &Dataset, hidden: &[usize]) -> Result<Arch> {
    let mut widths = vec![dataset.input_dim()];
    widths.extend_from_slice(hidden);
    widths.push(dataset.n_classes());
    Arch::new(widths)
}

/// Runs the configured optimizer over the dataset. `augs` drives Lookaround
/// replicas one-to-one; single-trajectory methods cycle through the same list
/// so every method sees the same mixed augmented data.
pub fn train(cfg: &TrainConfig, dataset: &Dataset, augs: &[AugmentationSpec]) -> Result<TrainOutcome> {
    if augs.is_empty() {
        return Err(Error::invalid("at least one augmentation spec required"));
    }
    if cfg.epochs == 0 {
        return Err(Error::invalid("epochs must be ≥ 1"));
    }
    let arch = arch_for(dataset, &cfg.hidden)?;
    let objective = MlpObjective::new(arch.clone());
    let init = Mlp::init(arch.clone(), cfg.seed);
    let start = Instant::now();

    let batches_per_epoch = dataset.train_inputs.len().div_ceil(cfg.batch_size);
    let total_steps = cfg.epochs * batches_per_epoch;

    match cfg.method {
        TrainMethod::Lookaround { k, d } => {
            if d != augs.len() {
                return Err(Error::invalid(format!(
                    "lookaround d = {d} but {} augmentations supplied",
                    augs.len()
                )));
            }
            let mut opt = Lookaround::new(
                InnerOptimizer::sgd(cfg.gamma),
                k,
                augs.to_vec(),
                init.params.clone(),
                cfg.seed,
            )?;
            opt.carry_velocity = cfg.carry_velocity;
            opt.parallel = cfg.parallel_replicas;
            let mut log = new_log(cfg);
            let mut step = 0usize;
            let mut last_batch: Option<Minibatch> = None;
            // Replica weights as they stood just before the last average step.
            let mut pre_avg: Vec<ParamVector> = opt.replicas.clone();
            for epoch in 0..cfg.epochs {
                for batch in epoch_batches(dataset, cfg.batch_size, cfg.seed, epoch as u64)? {
                    opt.set_gamma(cfg.schedule.lr(cfg.gamma, step, total_steps));
                    opt.around_step(&objective, &batch)?;
                    last_batch = Some(batch);
                    step += 1;
                    if step % k == 0 {
                        record_lookaround(&mut log, &opt, &objective, &arch, dataset,
                            last_batch.as_ref().unwrap(), step, total_steps, cfg, &start)?;
                        pre_avg = opt.replicas.clone();
                        opt.average_step()?;
                    }
                }
            }
            if step % k != 0 {
                // close the trailing partial round
                record_lookaround(&mut log, &opt, &objective, &arch, dataset,
                    last_batch.as_ref().unwrap(), step, total_steps, cfg, &start)?;
                pre_avg = opt.replicas.clone();
                opt.average_step()?;
            }
            let phi = opt.phi().clone();
            check_finite(&phi)?;
            let replicas = pre_avg
                .into_iter()
                .map(|p| Mlp::unflatten(arch.clone(), p))
                .collect::<Result<Vec<_>>>()?;
            Ok(TrainOutcome {
                log,
                final_net: Mlp::unflatten(arch, phi)?,
                replicas,
            })
        }
        TrainMethod::Lookahead { k, alpha } => {
            let mut opt = Lookahead::new(InnerOptimizer::sgd(cfg.gamma), k, alpha, init.params.clone())?;
            let mut log = new_log(cfg);
            let mut step = 0usize;
            let mut round = 0usize;
            let mut buffer: Vec<Minibatch> = Vec::with_capacity(k);
            for epoch in 0..cfg.epochs {
                for batch in epoch_batches(dataset, cfg.batch_size, cfg.seed, epoch as u64)? {
                    let aug = &augs[step % augs.len()];
                    let mut stream = rng::aug_stream(cfg.seed, 0, step as u64, 0);
                    buffer.push(aug.apply(&batch, &mut stream)?);
                    step += 1;
                    if buffer.len() == k {
                        opt.inner.set_gamma(cfg.schedule.lr(cfg.gamma, step, total_steps));
                        let slow = opt.round(&objective, &buffer)?;
                        buffer.clear();
                        record_single(&mut log, &slow, &objective, &arch, dataset,
                            round, step, total_steps, cfg, &start)?;
                        round += 1;
                    }
                }
            }
            let slow = opt.slow.clone();
            check_finite(&slow)?;
            Ok(TrainOutcome {
                log,
                final_net: Mlp::unflatten(arch.clone(), slow.clone())?,
                replicas: vec![Mlp::unflatten(arch, slow)?],
            })
        }
        TrainMethod::Sgd | TrainMethod::Momentum { .. } => {
            let mut opt = match cfg.method {
                TrainMethod::Sgd => InnerOptimizer::sgd(cfg.gamma),
                TrainMethod::Momentum { beta } => {
                    InnerOptimizer::momentum(cfg.gamma, beta, arch.n_params())
                }
                _ => unreachable!(),
            };
            let mut params = init.params.clone();
            let mut log = new_log(cfg);
            let mut step = 0usize;
            let mut round = 0usize;
            let log_every = batches_per_epoch;
            for epoch in 0..cfg.epochs {
                for batch in epoch_batches(dataset, cfg.batch_size, cfg.seed, epoch as u64)? {
                    let aug = &augs[step % augs.len()];
                    let mut stream = rng::aug_stream(cfg.seed, 0, step as u64, 0);
                    let view = aug.apply(&batch, &mut stream)?;
                    opt.set_gamma(cfg.schedule.lr(cfg.gamma, step, total_steps));
                    let (_, grad) = objective.eval(&params, &view)?;
                    opt.step(&mut params, &grad)?;
                    step += 1;
                    if step % log_every == 0 {
                        record_single(&mut log, &params, &objective, &arch, dataset,
                            round, step, total_steps, cfg, &start)?;
                        round += 1;
                    }
                }
            }
            check_finite(&params)?;
            Ok(TrainOutcome {
                log,
                final_net: Mlp::unflatten(arch.clone(), params.clone())?,
                replicas: vec![Mlp::unflatten(arch, params)?],
            })
        }
    }
}

fn new_log(cfg: &TrainConfig) -> RunLog {
    RunLog {
        method: cfg.method.name().to_string(),
        seed: cfg.seed,
        config: cfg.clone(),
        records: Vec::new(),
    }
}

fn check_finite(p: &ParamVector) -> Result<()> {
    if !p.all_finite() {
        return Err(Error::Numerical("non-finite parameter after training".into()));
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn record_lookaround(
    log: &mut RunLog,
    opt: &Lookaround,
    objective: &MlpObjective,
    arch: &Arch,
    dataset: &Dataset,
    last_batch: &Minibatch,
    step: usize,
    total_steps: usize,
    cfg: &TrainConfig,
    start: &Instant,
) -> Result<()> {
    let mut train_losses = Vec::with_capacity(opt.d());
    let mut test_accs = Vec::with_capacity(opt.d());
    for replica in &opt.replicas {
        check_finite(replica)?;
        let (loss, _) = objective.eval(replica, last_batch)?;
        train_losses.push(loss);
        let net = Mlp::unflatten(arch.clone(), replica.clone())?;
        test_accs.push(net.accuracy(&dataset.test_inputs, &dataset.test_labels)?);
    }
    let phi = ParamVector::mean(&opt.replicas)?;
    let mean_net = Mlp::unflatten(arch.clone(), phi)?;
    let mean_acc = mean_net.accuracy(&dataset.test_inputs, &dataset.test_labels)?;
    log.records.push(RunRecord {
        round: log.records.len(),
        step,
        lr: cfg.schedule.lr(cfg.gamma, step, total_steps),
        train_loss_per_replica: train_losses,
        test_acc_per_replica: test_accs,
        test_acc_mean_net: mean_acc,
        wall_clock_s: start.elapsed().as_secs_f64(),
    });
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn record_single(
    log: &mut RunLog,
    params: &ParamVector,
    objective: &MlpObjective,
    arch: &Arch,
    dataset: &Dataset,
    round: usize,
    step: usize,
    total_steps: usize,
    cfg: &TrainConfig,
    start: &Instant,
) -> Result<()> {
    check_finite(params)?;
    let net = Mlp::unflatten(arch.clone(), params.clone())?;
    let acc = net.accuracy(&dataset.test_inputs, &dataset.test_labels)?;
    let sample = Minibatch::new(
        dataset.train_inputs.iter().take(64).cloned().collect(),
        dataset.train_labels.iter().take(64).copied().collect(),
        (0..dataset.train_inputs.len().min(64)).collect(),
    )?;
    let (loss, _) = objective.eval(params, &sample)?;
    log.records.push(RunRecord {
        round,
        step,
        lr: cfg.schedule.lr(cfg.gamma, step, total_steps),
        train_loss_per_replica: vec![loss],
        test_acc_per_replica: vec![acc],
        test_acc_mean_net: acc,
        wall_clock_s: start.elapsed().as_secs_f64(),
    });
    Ok(())
}
