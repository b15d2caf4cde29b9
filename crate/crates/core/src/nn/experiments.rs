//! Higher-level experiment procedures: logit ensembling, post-hoc weight
//! averaging, the DA×WA ablation grid, and the d / k sweeps.

use serde::{Deserialize, Serialize};

use crate::augment::AugmentationSpec;
use crate::error::{Error, Result};
use crate::nn::dataset::{make_augmentations, Dataset};
use crate::nn::mlp::{argmax, Mlp};
use crate::nn::train::{train, RunLog, Schedule, TrainConfig, TrainMethod, TrainOutcome};
use crate::param::ParamVector;

/// Shared hyperparameters for an experiment family.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentParams {
    pub gamma: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub schedule: Schedule,
    pub hidden: Vec<usize>,
    pub k: usize,
    pub d: usize,
}

impl ExperimentParams {
    pub fn train_config(&self, method: TrainMethod, seed: u64) -> TrainConfig {
        TrainConfig {
            method,
            gamma: self.gamma,
            epochs: self.epochs,
            batch_size: self.batch_size,
            schedule: self.schedule,
            seed,
            hidden: self.hidden.clone(),
            carry_velocity: false,
            parallel_replicas: false,
        }
    }
}

/// Test accuracy of the average-of-logits ensemble.
pub fn logit_ensemble(models: &[Mlp], inputs: &[Vec<f64>], labels: &[usize]) -> Result<f64> {
    let first = models
        .first()
        .ok_or_else(|| Error::invalid("ensemble needs at least one model"))?;
    if models.iter().any(|m| m.arch != first.arch) {
        return Err(Error::invalid("ensemble members must share an architecture"));
    }
    let mut correct = 0usize;
    for (x, &y) in inputs.iter().zip(labels) {
        let mut logits = vec![0.0; first.arch.output_dim()];
        for m in models {
            for (acc, z) in logits.iter_mut().zip(m.forward(x)?) {
                *acc += z;
            }
        }
        if argmax(&logits) == y {
            correct += 1;
        }
    }
    Ok(correct as f64 / inputs.len() as f64)
}

/// Elementwise mean of the models' weights. Collapses when the models sit in
/// different loss basins; stays benign for replicas of one Lookaround round.
pub fn posthoc_average(models: &[Mlp]) -> Result<Mlp> {
    let first = models
        .first()
        .ok_or_else(|| Error::invalid("average needs at least one model"))?;
    if models.iter().any(|m| m.arch != first.arch) {
        return Err(Error::invalid("averaged models must share an architecture"));
    }
    let params: Vec<ParamVector> = models.iter().map(|m| m.params.clone()).collect();
    Mlp::unflatten(first.arch.clone(), ParamVector::mean(&params)?)
}

/// Mean and sample standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

/// Least-squares slope of y over x.
pub fn fit_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let num: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    num / den
}

/// One ablation cell: per-seed accuracies.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AblationCell {
    pub accuracies: Vec<f64>,
}

impl AblationCell {
    pub fn mean(&self) -> f64 {
        mean_std(&self.accuracies).0
    }

    pub fn std(&self) -> f64 {
        mean_std(&self.accuracies).1
    }
}

/// The 2×2 {no DA, DA} × {no WA, WA} grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AblationTable {
    pub no_da_no_wa: AblationCell,
    pub da_no_wa: AblationCell,
    pub no_da_wa: AblationCell,
    pub da_wa: AblationCell,
}

/// Runs the four ablation arms over the given seeds.
/// no-DA arms use identity augmentations; no-WA arms train d independent nets
/// (each under its own augmentation and seed) and report the best single net
/// on the test set.
pub fn ablation_grid(dataset: &Dataset, params: &ExperimentParams, seeds: &[u64]) -> Result<AblationTable> {
    if seeds.len() < 3 {
        return Err(Error::invalid("ablation needs ≥ 3 seeds"));
    }
    let augs = make_augmentations(dataset.kind, params.d)?;
    let identity = vec![AugmentationSpec::Identity; params.d];

    let mut table = AblationTable {
        no_da_no_wa: AblationCell { accuracies: vec![] },
        da_no_wa: AblationCell { accuracies: vec![] },
        no_da_wa: AblationCell { accuracies: vec![] },
        da_wa: AblationCell { accuracies: vec![] },
    };

    for &seed in seeds {
        // no-DA no-WA: plain SGD.
        let cfg = params.train_config(TrainMethod::Sgd, seed);
        let out = train(&cfg, dataset, &[AugmentationSpec::Identity])?;
        table
            .no_da_no_wa
            .accuracies
            .push(test_acc(&out.final_net, dataset)?);

        // DA no-WA: best of d independently trained nets.
        table
            .da_no_wa
            .accuracies
            .push(best_of_independent(dataset, params, seed, &augs)?);

        // no-DA WA: Lookaround over identical identity augmentations.
        let cfg = params.train_config(
            TrainMethod::Lookaround {
                k: params.k,
                d: params.d,
            },
            seed,
        );
        let out = train(&cfg, dataset, &identity)?;
        table
            .no_da_wa
            .accuracies
            .push(test_acc(&out.final_net, dataset)?);

        // DA WA: full Lookaround.
        let cfg = params.train_config(
            TrainMethod::Lookaround {
                k: params.k,
                d: params.d,
            },
            seed,
        );
        let out = train(&cfg, dataset, &augs)?;
        table
            .da_wa
            .accuracies
            .push(test_acc(&out.final_net, dataset)?);
    }
    Ok(table)
}

fn test_acc(net: &Mlp, dataset: &Dataset) -> Result<f64> {
    net.accuracy(&dataset.test_inputs, &dataset.test_labels)
}

/// Trains d nets independently (one augmentation each, distinct seeds) and
/// returns the best single test accuracy.
fn best_of_independent(
    dataset: &Dataset,
    params: &ExperimentParams,
    seed: u64,
    augs: &[AugmentationSpec],
) -> Result<f64> {
    let mut best = f64::MIN;
    for (j, aug) in augs.iter().enumerate() {
        let cfg = params.train_config(TrainMethod::Sgd, seed.wrapping_add(1000 * (j as u64 + 1)));
        let out = train(&cfg, dataset, std::slice::from_ref(aug))?;
        best = best.max(test_acc(&out.final_net, dataset)?);
    }
    Ok(best)
}

/// Trains d nets fully independently for ensembling / soups experiments.
pub fn train_independent_nets(
    dataset: &Dataset,
    params: &ExperimentParams,
    seeds: &[u64],
    aug: &AugmentationSpec,
) -> Result<Vec<TrainOutcome>> {
    seeds
        .iter()
        .map(|&s| {
            let cfg = params.train_config(TrainMethod::Sgd, s);
            train(&cfg, dataset, std::slice::from_ref(aug))
        })
        .collect()
}

/// One row of the d (or k) sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: usize,
    pub per_seed_accuracy: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

/// Accuracy per replica count d, over seeds. d = 1 degenerates to the single
/// trajectory inner optimizer under one augmentation.
pub fn sweep_d(
    dataset: &Dataset,
    params: &ExperimentParams,
    d_values: &[usize],
    seeds: &[u64],
) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::new();
    for &d in d_values {
        let augs = make_augmentations(dataset.kind, d)?;
        let mut accs = Vec::new();
        for &seed in seeds {
            let cfg = params.train_config(TrainMethod::Lookaround { k: params.k, d }, seed);
            let out = train(&cfg, dataset, &augs)?;
            accs.push(test_acc(&out.final_net, dataset)?);
        }
        let (mean, std) = mean_std(&accs);
        rows.push(SweepRow {
            value: d,
            per_seed_accuracy: accs,
            mean,
            std,
        });
    }
    Ok(rows)
}

/// Accuracy per synchronization period k, with the full per-round curves kept
/// for early/late comparisons.
pub fn sweep_k(
    dataset: &Dataset,
    params: &ExperimentParams,
    k_values: &[usize],
    seeds: &[u64],
) -> Result<(Vec<SweepRow>, Vec<RunLog>)> {
    let augs = make_augmentations(dataset.kind, params.d)?;
    let mut rows = Vec::new();
    let mut logs = Vec::new();
    for &k in k_values {
        let mut accs = Vec::new();
        for &seed in seeds {
            let cfg = params.train_config(TrainMethod::Lookaround { k, d: params.d }, seed);
            let out = train(&cfg, dataset, &augs)?;
            accs.push(test_acc(&out.final_net, dataset)?);
            logs.push(out.log);
        }
        let (mean, std) = mean_std(&accs);
        rows.push(SweepRow {
            value: k,
            per_seed_accuracy: accs,
            mean,
            std,
        });
    }
    Ok((rows, logs))
}
