//! Label-preserving data augmentations.
//!
//! An `AugmentationSpec` is a pure description; applying it to a minibatch
//! consumes an explicit RNG so the caller controls the stream keying. Applying
//! any spec preserves example count, labels and source indices.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::batch::Minibatch;
use crate::error::{Error, Result};

/// One augmentation transform. 2-d transforms act on point clouds; grid
/// transforms act on row-major `height x width` pixel grids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum AugmentationSpec {
    /// Leaves inputs bit-identical.
    Identity,
    /// Rotation about the origin by a uniform angle in `[-max_angle, max_angle]`
    /// radians, drawn per example.
    Rotate { max_angle: f64 },
    /// Additive Gaussian noise, per coordinate.
    Jitter { sigma: f64 },
    /// Isotropic scaling by a factor drawn uniformly from `[lo, hi]` per example.
    Scale { lo: f64, hi: f64 },
    /// Slide along a two-arm Archimedean spiral `r = θ/2π + const`: rotate by
    /// a uniform δ in `[-max_delta, max_delta]` and advance the radius by
    /// δ/2π, which maps each arm onto itself. δ is additionally clamped so the
    /// new radius stays inside `[r_lo, r_hi]`, keeping augmented points on the
    /// populated stretch of the arms. Only label-preserving for data arranged
    /// on such a spiral.
    SpiralSlide { max_delta: f64, r_lo: f64, r_hi: f64 },
    /// Swap of the two coordinates. Only valid for datasets whose classes are
    /// symmetric under reflection across y = x.
    SwapCoords,
    /// Shift of a pixel grid by one cell in a random axis direction, zero fill.
    PixelShift { width: usize, height: usize },
    /// Each pixel independently zeroed with probability `p`.
    PixelDropout { p: f64 },
    /// Horizontal mirror of a pixel grid.
    HorizontalFlip { width: usize, height: usize },
    /// Multiplicative contrast about the per-example mean, factor in `[lo, hi]`.
    Contrast { lo: f64, hi: f64 },
}

impl AugmentationSpec {
    /// Applies the transform to every example, returning a new batch with the
    /// same labels and indices.
    pub fn apply(&self, batch: &Minibatch, rng: &mut ChaCha8Rng) -> Result<Minibatch> {
        let inputs: Result<Vec<Vec<f64>>> = batch
            .inputs
            .iter()
            .map(|x| self.apply_one(x, rng))
            .collect();
        let out = Minibatch {
            inputs: inputs?,
            labels: batch.labels.clone(),
            indices: batch.indices.clone(),
        };
        if out.len() != batch.len() {
            return Err(Error::Invariant(
                "augmentation changed example count".into(),
            ));
        }
        Ok(out)
    }

    fn apply_one(&self, x: &[f64], rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
        match self {
            AugmentationSpec::Identity => Ok(x.to_vec()),
            AugmentationSpec::Rotate { max_angle } => {
                if x.len() != 2 {
                    return Err(Error::invalid("Rotate requires 2-d inputs"));
                }
                let theta = Uniform::new_inclusive(-max_angle, *max_angle).sample(rng);
                let [a, b] = rotate2d(x[0], x[1], theta);
                Ok(vec![a, b])
            }
            AugmentationSpec::Jitter { sigma } => {
                let normal = Normal::new(0.0, *sigma)
                    .map_err(|e| Error::invalid(format!("bad jitter sigma: {e}")))?;
                Ok(x.iter().map(|v| v + normal.sample(rng)).collect())
            }
            AugmentationSpec::Scale { lo, hi } => {
                let s = Uniform::new_inclusive(*lo, *hi).sample(rng);
                Ok(x.iter().map(|v| v * s).collect())
            }
            AugmentationSpec::SpiralSlide { max_delta, r_lo, r_hi } => {
                if x.len() != 2 {
                    return Err(Error::invalid("SpiralSlide requires 2-d inputs"));
                }
                let two_pi = 2.0 * std::f64::consts::PI;
                let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
                if r < 1e-12 {
                    return Ok(x.to_vec());
                }
                // δ range that keeps the slid radius inside [r_lo, r_hi].
                let lo = (-max_delta).max(two_pi * (r_lo - r));
                let hi = max_delta.min(two_pi * (r_hi - r));
                let delta = if lo < hi {
                    Uniform::new_inclusive(lo, hi).sample(rng)
                } else {
                    0.0
                };
                let [a, b] = rotate2d(x[0], x[1], delta);
                let s = (r + delta / two_pi) / r;
                Ok(vec![a * s, b * s])
            }
            AugmentationSpec::SwapCoords => {
                if x.len() != 2 {
                    return Err(Error::invalid("SwapCoords requires 2-d inputs"));
                }
                Ok(vec![x[1], x[0]])
            }
            AugmentationSpec::PixelShift { width, height } => {
                if x.len() != width * height {
                    return Err(Error::invalid("PixelShift: grid size mismatch"));
                }
                let dir = rng.gen_range(0..4u8);
                let (dx, dy): (isize, isize) = match dir {
                    0 => (1, 0),
                    1 => (-1, 0),
                    2 => (0, 1),
                    _ => (0, -1),
                };
                let mut out = vec![0.0; x.len()];
                for row in 0..*height {
                    for col in 0..*width {
                        let src_r = row as isize - dy;
                        let src_c = col as isize - dx;
                        if src_r >= 0
                            && src_r < *height as isize
                            && src_c >= 0
                            && src_c < *width as isize
                        {
                            out[row * width + col] = x[src_r as usize * width + src_c as usize];
                        }
                    }
                }
                Ok(out)
            }
            AugmentationSpec::PixelDropout { p } => Ok(x
                .iter()
                .map(|v| if rng.gen::<f64>() < *p { 0.0 } else { *v })
                .collect()),
            AugmentationSpec::HorizontalFlip { width, height } => {
                if x.len() != width * height {
                    return Err(Error::invalid("HorizontalFlip: grid size mismatch"));
                }
                let mut out = vec![0.0; x.len()];
                for row in 0..*height {
                    for col in 0..*width {
                        out[row * width + col] = x[row * width + (width - 1 - col)];
                    }
                }
                Ok(out)
            }
            AugmentationSpec::Contrast { lo, hi } => {
                let f = Uniform::new_inclusive(*lo, *hi).sample(rng);
                let mean = x.iter().sum::<f64>() / x.len() as f64;
                Ok(x.iter().map(|v| mean + f * (v - mean)).collect())
            }
        }
    }

    pub fn is_identity(&self) -> bool {
        matches!(self, AugmentationSpec::Identity)
    }
}

/// Rotates a 2-d point about the origin by `theta` radians.
pub fn rotate2d(x: f64, y: f64, theta: f64) -> [f64; 2] {
    let (s, c) = theta.sin_cos();
    [c * x - s * y, s * x + c * y]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn batch2d() -> Minibatch {
        Minibatch::new(
            vec![vec![1.0, 0.0], vec![0.3, -0.7]],
            vec![0, 1],
            vec![0, 1],
        )
        .unwrap()
    }

    #[test]
    fn identity_is_bit_exact() {
        let b = batch2d();
        let mut rng = stream(0, "t");
        let out = AugmentationSpec::Identity.apply(&b, &mut rng).unwrap();
        assert_eq!(out, b);
    }

    #[test]
    fn labels_and_count_preserved() {
        let b = batch2d();
        let mut rng = stream(1, "t");
        for spec in [
            AugmentationSpec::Rotate { max_angle: 0.3 },
            AugmentationSpec::Jitter { sigma: 0.1 },
            AugmentationSpec::Scale { lo: 0.9, hi: 1.1 },
            AugmentationSpec::SwapCoords,
        ] {
            let out = spec.apply(&b, &mut rng).unwrap();
            assert_eq!(out.labels, b.labels);
            assert_eq!(out.indices, b.indices);
            assert_eq!(out.len(), b.len());
        }
    }

    #[test]
    fn full_turn_rotation_is_near_identity() {
        let two_pi = 2.0 * std::f64::consts::PI;
        let [a, b] = rotate2d(0.4, -1.3, two_pi);
        assert!((a - 0.4).abs() < 1e-12);
        assert!((b - -1.3).abs() < 1e-12);
    }

    #[test]
    fn spiral_slide_stays_on_arm() {
        // On the arm θ = 2πr the invariant θ − 2πr ≡ 0 (mod 2π) must survive.
        let spec = AugmentationSpec::SpiralSlide { max_delta: 1.5, r_lo: 0.15, r_hi: 1.0 };
        let mut rng = stream(7, "t");
        for t in [0.2, 0.45, 0.8, 0.97] {
            let angle = 2.0 * std::f64::consts::PI * t;
            let b = Minibatch::new(
                vec![vec![t * angle.cos(), t * angle.sin()]],
                vec![0],
                vec![0],
            )
            .unwrap();
            for _ in 0..20 {
                let out = spec.apply(&b, &mut rng).unwrap();
                let [x, y] = [out.inputs[0][0], out.inputs[0][1]];
                let r = x.hypot(y);
                let phase = (y.atan2(x) - 2.0 * std::f64::consts::PI * r)
                    .rem_euclid(2.0 * std::f64::consts::PI);
                let dist = phase.min(2.0 * std::f64::consts::PI - phase);
                assert!(dist < 1e-9, "t={t}: off-arm phase {dist}");
            }
        }
    }

    #[test]
    fn pixel_shift_preserves_grid_size() {
        let b = Minibatch::new(vec![vec![1.0; 64]], vec![0], vec![0]).unwrap();
        let mut rng = stream(3, "t");
        let spec = AugmentationSpec::PixelShift {
            width: 8,
            height: 8,
        };
        let out = spec.apply(&b, &mut rng).unwrap();
        assert_eq!(out.inputs[0].len(), 64);
    }

    #[test]
    fn horizontal_flip_is_involutive() {
        let x: Vec<f64> = (0..64).map(|i| i as f64).collect();
        let b = Minibatch::new(vec![x.clone()], vec![0], vec![0]).unwrap();
        let spec = AugmentationSpec::HorizontalFlip {
            width: 8,
            height: 8,
        };
        let mut rng = stream(4, "t");
        let once = spec.apply(&b, &mut rng).unwrap();
        let twice = spec.apply(&once, &mut rng).unwrap();
        assert_eq!(twice.inputs[0], x);
    }
}
