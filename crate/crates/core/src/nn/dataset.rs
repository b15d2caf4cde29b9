//! Deterministic synthetic datasets and their augmentation lists.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::augment::AugmentationSpec;
use crate::batch::Minibatch;
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetKind {
    /// 2-class interleaved spirals in 2-d with angular noise.
    Spirals,
    /// 4 Gaussian clusters in 2-d, one class each.
    Blobs,
    /// 8×8 binary shape patterns, 4 classes, with pixel noise.
    Glyphs,
}

impl DatasetKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "spirals" => Ok(DatasetKind::Spirals),
            "blobs" => Ok(DatasetKind::Blobs),
            "glyphs" => Ok(DatasetKind::Glyphs),
            other => Err(Error::invalid(format!("unknown dataset kind '{other}'"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            DatasetKind::Spirals => "spirals",
            DatasetKind::Blobs => "blobs",
            DatasetKind::Glyphs => "glyphs",
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            DatasetKind::Spirals | DatasetKind::Blobs => 2,
            DatasetKind::Glyphs => 64,
        }
    }

    pub fn n_classes(&self) -> usize {
        match self {
            DatasetKind::Spirals => 2,
            DatasetKind::Blobs | DatasetKind::Glyphs => 4,
        }
    }
}

/// Train/test splits are generated from disjoint named streams of the seed.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub kind: DatasetKind,
    pub train_inputs: Vec<Vec<f64>>,
    pub train_labels: Vec<usize>,
    pub test_inputs: Vec<Vec<f64>>,
    pub test_labels: Vec<usize>,
}

impl Dataset {
    pub fn n_classes(&self) -> usize {
        self.kind.n_classes()
    }

    pub fn input_dim(&self) -> usize {
        self.kind.input_dim()
    }
}

/// Deterministic synthetic dataset at the kind's default noise level.
pub fn make_dataset(kind: DatasetKind, n_train: usize, n_test: usize, seed: u64) -> Result<Dataset> {
    make_dataset_with_noise(kind, n_train, n_test, seed, 1.0)
}

/// Same, with the kind's default noise scaled by `noise_scale` (0 = noiseless).
pub fn make_dataset_with_noise(
    kind: DatasetKind,
    n_train: usize,
    n_test: usize,
    seed: u64,
    noise_scale: f64,
) -> Result<Dataset> {
    if n_train == 0 || n_test == 0 {
        return Err(Error::invalid("n_train and n_test must be ≥ 1"));
    }
    let (train_inputs, train_labels) = generate(kind, n_train, seed, "train", noise_scale);
    let (test_inputs, test_labels) = generate(kind, n_test, seed, "test", noise_scale);
    Ok(Dataset {
        kind,
        train_inputs,
        train_labels,
        test_inputs,
        test_labels,
    })
}

fn generate(
    kind: DatasetKind,
    n: usize,
    seed: u64,
    split: &str,
    noise_scale: f64,
) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut r = rng::stream(seed, &format!("dataset/{}/{}", kind.name(), split));
    let mut inputs = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    match kind {
        DatasetKind::Spirals => {
            let noise = Normal::new(0.0, 0.08 * noise_scale).unwrap();
            for i in 0..n {
                let class = i % 2;
                let t: f64 = r.gen_range(0.15..1.0);
                let angle = t * 2.0 * std::f64::consts::PI + class as f64 * std::f64::consts::PI;
                let radius = t;
                let x = radius * angle.cos() + noise.sample(&mut r);
                let y = radius * angle.sin() + noise.sample(&mut r);
                inputs.push(vec![x, y]);
                labels.push(class);
            }
        }
        DatasetKind::Blobs => {
            let centers = [[2.0, 2.0], [-2.0, -2.0], [2.0, -2.0], [-2.0, 2.0]];
            let noise = Normal::new(0.0, 0.5 * noise_scale).unwrap();
            for i in 0..n {
                let class = i % 4;
                let c = centers[class];
                inputs.push(vec![c[0] + noise.sample(&mut r), c[1] + noise.sample(&mut r)]);
                labels.push(class);
            }
        }
        DatasetKind::Glyphs => {
            let flip_p = 0.04 * noise_scale;
            for i in 0..n {
                let class = i % 4;
                let mut grid = glyph_template(class);
                for px in &mut grid {
                    if r.gen::<f64>() < flip_p {
                        *px = 1.0 - *px;
                    }
                }
                inputs.push(grid);
                labels.push(class);
            }
        }
    }
    (inputs, labels)
}

/// 8×8 templates, all symmetric under horizontal flip so the flip
/// augmentation is label-preserving.
fn glyph_template(class: usize) -> Vec<f64> {
    let mut g = vec![0.0; 64];
    let mut set = |row: usize, col: usize| g[row * 8 + col] = 1.0;
    match class {
        // hollow square frame
        0 => {
            for i in 1..7 {
                set(1, i);
                set(6, i);
                set(i, 1);
                set(i, 6);
            }
        }
        // plus sign
        1 => {
            for i in 1..7 {
                set(i, 3);
                set(i, 4);
                set(3, i);
                set(4, i);
            }
        }
        // diamond
        2 => {
            for (row, half) in [(0usize, 0usize), (1, 1), (2, 2), (3, 3), (4, 3), (5, 2), (6, 1), (7, 0)] {
                let lo = 3 - half.min(3);
                let hi = 4 + half.min(3);
                for col in lo..=hi {
                    set(row, col);
                }
            }
        }
        // horizontal bars
        _ => {
            for col in 0..8 {
                set(1, col);
                set(4, col);
                set(7, col);
            }
        }
    }
    g
}

/// Ordered, label-preserving augmentation lists per dataset family; the first
/// `d` entries are returned. Coordinate swap is excluded for spirals and blobs
/// (neither is class-symmetric under reflection across y = x).
pub fn make_augmentations(kind: DatasetKind, d: usize) -> Result<Vec<AugmentationSpec>> {
    if !(1..=6).contains(&d) {
        return Err(Error::invalid(format!("d must lie in 1..=6, got {d}")));
    }
    let list: Vec<AugmentationSpec> = match kind {
        // Slides move points along the spiral arms, so they manufacture valid
        // new training examples rather than perturbing off-manifold.
        DatasetKind::Spirals => vec![
            AugmentationSpec::SpiralSlide { max_delta: 0.6, r_lo: 0.15, r_hi: 1.0 },
            AugmentationSpec::SpiralSlide { max_delta: 1.2, r_lo: 0.15, r_hi: 1.0 },
            AugmentationSpec::Jitter { sigma: 0.05 },
            AugmentationSpec::SpiralSlide { max_delta: 1.8, r_lo: 0.15, r_hi: 1.0 },
            AugmentationSpec::SpiralSlide { max_delta: 0.9, r_lo: 0.15, r_hi: 1.0 },
            AugmentationSpec::Jitter { sigma: 0.1 },
        ],
        DatasetKind::Blobs => vec![
            AugmentationSpec::Identity,
            AugmentationSpec::Rotate {
                max_angle: 15f64.to_radians(),
            },
            AugmentationSpec::Jitter { sigma: 0.05 },
            AugmentationSpec::Scale { lo: 0.9, hi: 1.1 },
            AugmentationSpec::Rotate {
                max_angle: 7.5f64.to_radians(),
            },
            AugmentationSpec::Jitter { sigma: 0.15 },
        ],
        DatasetKind::Glyphs => vec![
            AugmentationSpec::Identity,
            AugmentationSpec::PixelShift {
                width: 8,
                height: 8,
            },
            AugmentationSpec::PixelDropout { p: 0.05 },
            AugmentationSpec::HorizontalFlip {
                width: 8,
                height: 8,
            },
            AugmentationSpec::Jitter { sigma: 0.1 },
            AugmentationSpec::Contrast { lo: 0.8, hi: 1.2 },
        ],
    };
    Ok(list.into_iter().take(d).collect())
}

/// One epoch of minibatches from a single shuffle shared by all replicas.
pub fn epoch_batches(
    dataset: &Dataset,
    batch_size: usize,
    seed: u64,
    epoch: u64,
) -> Result<Vec<Minibatch>> {
    if batch_size == 0 {
        return Err(Error::invalid("batch size must be ≥ 1"));
    }
    let n = dataset.train_inputs.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut r = rng::stream(seed, &format!("shuffle/epoch={epoch}"));
    order.shuffle(&mut r);
    let mut batches = Vec::new();
    for chunk in order.chunks(batch_size) {
        let inputs = chunk.iter().map(|&i| dataset.train_inputs[i].clone()).collect();
        let labels = chunk.iter().map(|&i| dataset.train_labels[i]).collect();
        batches.push(Minibatch::new(inputs, labels, chunk.to_vec())?);
    }
    Ok(batches)
}
