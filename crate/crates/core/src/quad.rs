//! Noisy-quadratic moment analysis.
//!
//! The model is `L̂(θ) = ½(θ − c)ᵀ A (θ − c)` with diagonal `A`, noisy center
//! `c ~ N(0, Σ)` (diagonal Σ) and optimum at the origin. This module evolves
//! per-coordinate means and variances of the iterates under SGD, Lookahead and
//! Lookaround, evaluates the closed-form variance fixed points, and runs a
//! Monte Carlo simulator of the actual stochastic process to confront the two.
//!
//! Note on the SGD fixed point: the recursion injects `γ²A²Σ` noise per step,
//! so the fixed point implemented here is `γ²A²Σ / (I − (I − γA)²)`; some
//! statements of the same result print `Σ²` in the numerator, which is
//! inconsistent with the recursion. See [`SIGMA_EXPONENT_NOTE`].

use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Recorded in artifact metadata wherever the SGD fixed point is emitted.
pub const SIGMA_EXPONENT_NOTE: &str = "V*_SGD uses gamma^2 A^2 Sigma / (I - (I - gamma A)^2), \
the form consistent with the variance recursion V <- (I-gA)^2 V + g^2 A^2 Sigma; \
the printed Sigma^2 variant is not recursion-consistent";

/// Diagonal noisy quadratic: curvatures `a_i > 0`, noise variances `σ_i² ≥ 0`,
/// optimum fixed at the zero vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagNoisyQuadratic {
    pub a: Vec<f64>,
    pub sigma2: Vec<f64>,
}

impl DiagNoisyQuadratic {
    pub fn new(a: Vec<f64>, sigma2: Vec<f64>) -> Result<Self> {
        if a.len() != sigma2.len() {
            return Err(Error::invalid("a and sigma2 must have equal length"));
        }
        if a.iter().any(|&x| x <= 0.0) {
            return Err(Error::invalid("all curvatures a_i must be > 0"));
        }
        if sigma2.iter().any(|&x| x < 0.0) {
            return Err(Error::invalid("all noise variances σ_i² must be ≥ 0"));
        }
        Ok(DiagNoisyQuadratic { a, sigma2 })
    }

    pub fn dim(&self) -> usize {
        self.a.len()
    }

    /// L = max_i a_i.
    pub fn l_max(&self) -> f64 {
        self.a.iter().cloned().fold(f64::MIN, f64::max)
    }

    /// Enforces the validity range `0 < γ < 1/L` used by all fixed-point
    /// evaluations. (The looser `2/L` bound appears elsewhere; the stricter
    /// bound is the one the derivations actually use.)
    pub fn check_gamma(&self, gamma: f64) -> Result<()> {
        let bound = 1.0 / self.l_max();
        if !(gamma > 0.0 && gamma < bound) {
            return Err(Error::domain(format!(
                "learning rate must satisfy 0 < γ < 1/L = {bound} (L = max_i a_i), got γ = {gamma}"
            )));
        }
        Ok(())
    }
}

/// Per-coordinate mean and variance of the iterates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentState {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

impl MomentState {
    pub fn new(mean: Vec<f64>, var: Vec<f64>) -> Result<Self> {
        if mean.len() != var.len() {
            return Err(Error::invalid("mean and var must have equal length"));
        }
        if var.iter().any(|&v| v < 0.0) {
            return Err(Error::invalid("variances must be ≥ 0"));
        }
        Ok(MomentState { mean, var })
    }

    pub fn point(mean: Vec<f64>) -> Self {
        let var = vec![0.0; mean.len()];
        MomentState { mean, var }
    }
}

/// Method under analysis, with its hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum MethodSpec {
    Sgd { gamma: f64 },
    Lookahead { gamma: f64, k: usize, alpha: f64 },
    Lookaround { gamma: f64, k: usize, d: usize },
}

impl MethodSpec {
    pub fn gamma(&self) -> f64 {
        match self {
            MethodSpec::Sgd { gamma }
            | MethodSpec::Lookahead { gamma, .. }
            | MethodSpec::Lookaround { gamma, .. } => *gamma,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            MethodSpec::Sgd { .. } => "sgd",
            MethodSpec::Lookahead { .. } => "lookahead",
            MethodSpec::Lookaround { .. } => "lookaround",
        }
    }

    pub fn validate(&self, model: &DiagNoisyQuadratic) -> Result<()> {
        model.check_gamma(self.gamma())?;
        match self {
            MethodSpec::Sgd { .. } => {}
            MethodSpec::Lookahead { k, alpha, .. } => {
                if *k == 0 {
                    return Err(Error::invalid("k must be ≥ 1"));
                }
                if !(*alpha > 0.0 && *alpha <= 1.0) {
                    return Err(Error::invalid("α must lie in (0, 1]"));
                }
            }
            MethodSpec::Lookaround { k, d, .. } => {
                if *k == 0 {
                    return Err(Error::invalid("k must be ≥ 1"));
                }
                if *d == 0 {
                    return Err(Error::invalid("d must be ≥ 1"));
                }
            }
        }
        Ok(())
    }
}

/// Expected loss `½ Σ_i a_i (E[θ_i]² + V[θ_i] + σ_i²)`.
pub fn expected_loss(model: &DiagNoisyQuadratic, state: &MomentState) -> Result<f64> {
    if state.mean.len() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            got: state.mean.len(),
        });
    }
    Ok(model
        .a
        .iter()
        .zip(&state.mean)
        .zip(&state.var)
        .zip(&model.sigma2)
        .map(|(((a, m), v), s2)| 0.5 * a * (m * m + v + s2))
        .sum())
}

/// One SGD step of the moment recursion:
/// `E ← (1−γa)E`, `V ← (1−γa)²V + γ²a²σ²` per coordinate.
pub fn sgd_moment_step(
    model: &DiagNoisyQuadratic,
    state: &MomentState,
    gamma: f64,
) -> Result<MomentState> {
    if gamma <= 0.0 {
        return Err(Error::invalid("γ must be > 0"));
    }
    let mut mean = Vec::with_capacity(model.dim());
    let mut var = Vec::with_capacity(model.dim());
    for i in 0..model.dim() {
        let c = 1.0 - gamma * model.a[i];
        mean.push(c * state.mean[i]);
        var.push(c * c * state.var[i] + gamma * gamma * model.a[i] * model.a[i] * model.sigma2[i]);
    }
    MomentState::new(mean, var)
}

/// One Lookaround round of the moment recursion, exactly as derived:
/// `E[φ] ← (1−γa)^k E[φ]`,
/// `V[φ] ← ((d−1)/d)(1−γa)^{2k} V[φ] + γ²a²σ²(1−(1−γa)^{2k}) / (d(1−(1−γa)²))`.
pub fn lookaround_moment_round(
    model: &DiagNoisyQuadratic,
    state: &MomentState,
    gamma: f64,
    k: usize,
    d: usize,
) -> Result<MomentState> {
    if k == 0 || d == 0 {
        return Err(Error::invalid("k and d must be ≥ 1"));
    }
    let mut mean = Vec::with_capacity(model.dim());
    let mut var = Vec::with_capacity(model.dim());
    let df = d as f64;
    for i in 0..model.dim() {
        let c = 1.0 - gamma * model.a[i];
        let denom = 1.0 - c * c;
        if denom == 0.0 {
            return Err(Error::domain(format!(
                "γ·a_i = {} makes 1 − (1−γa)² vanish at coordinate {i}",
                gamma * model.a[i]
            )));
        }
        let ck = c.powi(k as i32);
        let c2k = ck * ck;
        mean.push(ck * state.mean[i]);
        let noise = gamma * gamma * model.a[i] * model.a[i] * model.sigma2[i] * (1.0 - c2k)
            / (df * denom);
        var.push((df - 1.0) / df * c2k * state.var[i] + noise);
    }
    MomentState::new(mean, var)
}

/// Per-coordinate Lookahead variance coefficient multiplying V*_SGD:
/// `α²(1−c^{2k}) / (α²(1−c^{2k}) + 2α(1−α)(1−c^k))` with `c = 1−γa`.
fn lookahead_coeff(c: f64, k: usize, alpha: f64) -> f64 {
    let ck = c.powi(k as i32);
    let c2k = ck * ck;
    let num = alpha * alpha * (1.0 - c2k);
    let den = alpha * alpha * (1.0 - c2k) + 2.0 * alpha * (1.0 - alpha) * (1.0 - ck);
    num / den
}

/// Per-coordinate coefficient taking V*_Lookahead to V*_Lookaround:
/// `(α²(1−c^{2k}) + 2α(1−α)(1−c^k)) / (α²(d − (d−1)c^{2k}))`.
fn lookaround_over_lookahead_coeff(c: f64, k: usize, d: usize, alpha: f64) -> f64 {
    let ck = c.powi(k as i32);
    let c2k = ck * ck;
    let num = alpha * alpha * (1.0 - c2k) + 2.0 * alpha * (1.0 - alpha) * (1.0 - ck);
    let den = alpha * alpha * (d as f64 - (d as f64 - 1.0) * c2k);
    num / den
}

/// Per-coordinate SGD variance fixed point `γ²a²σ² / (1 − (1−γa)²)`.
pub fn sgd_fixed_point(model: &DiagNoisyQuadratic, gamma: f64) -> Result<Vec<f64>> {
    model.check_gamma(gamma)?;
    Ok((0..model.dim())
        .map(|i| {
            let c = 1.0 - gamma * model.a[i];
            gamma * gamma * model.a[i] * model.a[i] * model.sigma2[i] / (1.0 - c * c)
        })
        .collect())
}

/// Direct-from-SGD Lookaround fixed point:
/// `(1−B²) / (d − (d−1)B²) · V*_SGD` with `B = (1−γa)^k`.
pub fn lookaround_fixed_point(
    model: &DiagNoisyQuadratic,
    gamma: f64,
    k: usize,
    d: usize,
) -> Result<Vec<f64>> {
    if k == 0 || d == 0 {
        return Err(Error::invalid("k and d must be ≥ 1"));
    }
    let sgd = sgd_fixed_point(model, gamma)?;
    Ok(sgd
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let b = (1.0 - gamma * model.a[i]).powi(k as i32);
            let b2 = b * b;
            (1.0 - b2) / (d as f64 - (d as f64 - 1.0) * b2) * v
        })
        .collect())
}

/// Closed-form per-coordinate variance fixed point for the given method.
/// Lookahead and Lookaround are evaluated as their printed ratios against
/// V*_SGD; an `alpha` is required to route Lookaround through the Lookahead
/// form, so the direct form is used here (the two agree algebraically, see
/// [`lookaround_fixed_point_via_lookahead`]).
pub fn fixed_point(model: &DiagNoisyQuadratic, spec: &MethodSpec) -> Result<Vec<f64>> {
    spec.validate(model)?;
    match *spec {
        MethodSpec::Sgd { gamma } => sgd_fixed_point(model, gamma),
        MethodSpec::Lookahead { gamma, k, alpha } => {
            let sgd = sgd_fixed_point(model, gamma)?;
            Ok(sgd
                .iter()
                .enumerate()
                .map(|(i, v)| lookahead_coeff(1.0 - gamma * model.a[i], k, alpha) * v)
                .collect())
        }
        MethodSpec::Lookaround { gamma, k, d } => lookaround_fixed_point(model, gamma, k, d),
    }
}

/// Lookaround fixed point computed through the Lookahead form:
/// `coeff(α) · V*_Lookahead`. Algebraically identical to the direct form for
/// every valid α; exposed so the two routes can be cross-checked.
pub fn lookaround_fixed_point_via_lookahead(
    model: &DiagNoisyQuadratic,
    gamma: f64,
    k: usize,
    d: usize,
    alpha: f64,
) -> Result<Vec<f64>> {
    let la = fixed_point(model, &MethodSpec::Lookahead { gamma, k, alpha })?;
    Ok(la
        .iter()
        .enumerate()
        .map(|(i, v)| lookaround_over_lookahead_coeff(1.0 - gamma * model.a[i], k, d, alpha) * v)
        .collect())
}

/// Result of the elementwise variance ordering check
/// `V*_Lookaround ≤ V*_Lookahead ≤ V*_SGD`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OrderingReport {
    pub holds: bool,
    /// Per-coordinate V*_Lookahead / V*_SGD.
    pub lookahead_coeff: Vec<f64>,
    /// Per-coordinate V*_Lookaround / V*_Lookahead.
    pub lookaround_over_lookahead_coeff: Vec<f64>,
}

/// Checks the ordering elementwise and reports the two coefficient ratios.
/// Reports honestly: outside the `d ≥ 3, α ∈ [1/2, 1)` conditions the ordering
/// may fail and `holds` will say so.
pub fn check_ordering(
    model: &DiagNoisyQuadratic,
    gamma: f64,
    k: usize,
    d: usize,
    alpha: f64,
) -> Result<OrderingReport> {
    model.check_gamma(gamma)?;
    if k == 0 || d == 0 {
        return Err(Error::invalid("k and d must be ≥ 1"));
    }
    let mut la_coeff = Vec::with_capacity(model.dim());
    let mut lar_coeff = Vec::with_capacity(model.dim());
    let mut holds = true;
    for i in 0..model.dim() {
        let c = 1.0 - gamma * model.a[i];
        let r1 = lookahead_coeff(c, k, alpha);
        let r2 = lookaround_over_lookahead_coeff(c, k, d, alpha);
        if r1 > 1.0 || r2 > 1.0 {
            holds = false;
        }
        la_coeff.push(r1);
        lar_coeff.push(r2);
    }
    Ok(OrderingReport {
        holds,
        lookahead_coeff: la_coeff,
        lookaround_over_lookahead_coeff: lar_coeff,
    })
}

/// Iterates a moment recursion to stationarity: stops when the per-coordinate
/// relative change drops below 1e−13, or after 10⁶ rounds.
pub fn iterate_to_stationarity<F>(init: MomentState, mut step: F) -> Result<MomentState>
where
    F: FnMut(&MomentState) -> Result<MomentState>,
{
    const REL_TOL: f64 = 1e-13;
    const MAX_ROUNDS: usize = 1_000_000;
    let mut state = init;
    for _ in 0..MAX_ROUNDS {
        let next = step(&state)?;
        let converged = next
            .var
            .iter()
            .zip(&state.var)
            .all(|(n, p)| (n - p).abs() <= REL_TOL * n.abs().max(1e-300));
        let state_next = next;
        if converged {
            return Ok(state_next);
        }
        state = state_next;
    }
    Ok(state)
}

/// How replica noise is drawn in the simulator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseMode {
    /// Each replica draws its own center per inner step (the assumption behind
    /// the independent-replica covariance computation).
    Independent,
    /// One center draw per inner step shared by all replicas (the literal
    /// shared-minibatch reading).
    Shared,
}

/// Empirical per-round moments across trials.
#[derive(Debug, Clone)]
pub struct MonteCarloResult {
    /// One state per round, index 0 = after the first round.
    pub trajectory: Vec<MomentState>,
    pub trials: usize,
}

impl MonteCarloResult {
    /// Standard error of the empirical mean at a round, per coordinate.
    pub fn mean_std_err(&self, round: usize) -> Vec<f64> {
        self.trajectory[round]
            .var
            .iter()
            .map(|v| (v / self.trials as f64).sqrt())
            .collect()
    }
}

/// Simulates the actual stochastic process from a deterministic start `init`
/// and returns empirical per-round means and variances across `trials`.
///
/// Trials are split into fixed-size blocks; block partials are combined in a
/// fixed pairwise tree so the result is bit-identical for any worker count.
pub fn monte_carlo(
    model: &DiagNoisyQuadratic,
    spec: &MethodSpec,
    init: &[f64],
    rounds: usize,
    trials: usize,
    noise_mode: NoiseMode,
    seed: u64,
) -> Result<MonteCarloResult> {
    if rounds == 0 || trials == 0 {
        return Err(Error::invalid("rounds and trials must be ≥ 1"));
    }
    if init.len() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            got: init.len(),
        });
    }
    spec.validate(model)?;

    let n = model.dim();
    const BLOCK: usize = 1024;
    let n_blocks = trials.div_ceil(BLOCK);

    // Per-block partial sums of φ and φ² for every (round, coordinate).
    let partials: Vec<(Vec<f64>, Vec<f64>)> = (0..n_blocks)
        .into_par_iter()
        .map(|b| {
            let lo = b * BLOCK;
            let hi = ((b + 1) * BLOCK).min(trials);
            let mut sum = vec![0.0; rounds * n];
            let mut sum_sq = vec![0.0; rounds * n];
            for trial in lo..hi {
                let mut trial_rng = rng::trial_stream(seed, trial as u64);
                simulate_one_trial(
                    model,
                    spec,
                    init,
                    rounds,
                    noise_mode,
                    &mut trial_rng,
                    &mut sum,
                    &mut sum_sq,
                );
            }
            (sum, sum_sq)
        })
        .collect();

    // Fixed-tree pairwise reduction over blocks, independent of thread count.
    let (sum, sum_sq) = pairwise_reduce(partials, rounds * n);

    let tf = trials as f64;
    let mut trajectory = Vec::with_capacity(rounds);
    for r in 0..rounds {
        let mut mean = Vec::with_capacity(n);
        let mut var = Vec::with_capacity(n);
        for i in 0..n {
            let m = sum[r * n + i] / tf;
            // Unbiased sample variance, clamped at zero against rounding.
            let v = if trials > 1 {
                ((sum_sq[r * n + i] - tf * m * m) / (tf - 1.0)).max(0.0)
            } else {
                0.0
            };
            mean.push(m);
            var.push(v);
        }
        trajectory.push(MomentState { mean, var });
    }
    Ok(MonteCarloResult { trajectory, trials })
}

fn pairwise_reduce(mut partials: Vec<(Vec<f64>, Vec<f64>)>, len: usize) -> (Vec<f64>, Vec<f64>) {
    if partials.is_empty() {
        return (vec![0.0; len], vec![0.0; len]);
    }
    while partials.len() > 1 {
        let mut next = Vec::with_capacity(partials.len().div_ceil(2));
        let mut iter = partials.into_iter();
        while let Some((mut s, mut q)) = iter.next() {
            if let Some((s2, q2)) = iter.next() {
                for (a, b) in s.iter_mut().zip(&s2) {
                    *a += b;
                }
                for (a, b) in q.iter_mut().zip(&q2) {
                    *a += b;
                }
            }
            next.push((s, q));
        }
        partials = next;
    }
    partials.pop().unwrap()
}

#[allow(clippy::too_many_arguments)]
fn simulate_one_trial(
    model: &DiagNoisyQuadratic,
    spec: &MethodSpec,
    init: &[f64],
    rounds: usize,
    noise_mode: NoiseMode,
    trial_rng: &mut rand_chacha::ChaCha8Rng,
    sum: &mut [f64],
    sum_sq: &mut [f64],
) {
    let n = model.dim();
    let sigma: Vec<f64> = model.sigma2.iter().map(|s| s.sqrt()).collect();
    let gamma = spec.gamma();
    let normal = Normal::new(0.0, 1.0).unwrap();
    let record = |r: usize, phi: &[f64], sum: &mut [f64], sum_sq: &mut [f64]| {
        for i in 0..n {
            sum[r * n + i] += phi[i];
            sum_sq[r * n + i] += phi[i] * phi[i];
        }
    };

    match *spec {
        MethodSpec::Sgd { .. } => {
            let mut theta = init.to_vec();
            for r in 0..rounds {
                for i in 0..n {
                    let c = sigma[i] * normal.sample(trial_rng);
                    theta[i] -= gamma * model.a[i] * (theta[i] - c);
                }
                record(r, &theta, sum, sum_sq);
            }
        }
        MethodSpec::Lookahead { k, alpha, .. } => {
            let mut phi = init.to_vec();
            for r in 0..rounds {
                let mut theta = phi.clone();
                for _ in 0..k {
                    for i in 0..n {
                        let c = sigma[i] * normal.sample(trial_rng);
                        theta[i] -= gamma * model.a[i] * (theta[i] - c);
                    }
                }
                for i in 0..n {
                    phi[i] += alpha * (theta[i] - phi[i]);
                }
                record(r, &phi, sum, sum_sq);
            }
        }
        MethodSpec::Lookaround { k, d, .. } => {
            let mut phi = init.to_vec();
            let mut replicas = vec![vec![0.0; n]; d];
            for r in 0..rounds {
                for rep in &mut replicas {
                    rep.copy_from_slice(&phi);
                }
                for _ in 0..k {
                    match noise_mode {
                        NoiseMode::Independent => {
                            for rep in &mut replicas {
                                for i in 0..n {
                                    let c = sigma[i] * normal.sample(trial_rng);
                                    rep[i] -= gamma * model.a[i] * (rep[i] - c);
                                }
                            }
                        }
                        NoiseMode::Shared => {
                            let draws: Vec<f64> =
                                (0..n).map(|i| sigma[i] * normal.sample(trial_rng)).collect();
                            for rep in &mut replicas {
                                for i in 0..n {
                                    rep[i] -= gamma * model.a[i] * (rep[i] - draws[i]);
                                }
                            }
                        }
                    }
                }
                for i in 0..n {
                    phi[i] = replicas.iter().map(|rep| rep[i]).sum::<f64>() / d as f64;
                }
                record(r, &phi, sum, sum_sq);
            }
        }
    }
}

/// Exact per-round expectation multiplier for a coordinate with contraction
/// `c = 1−γa`: SGD decays by `c` per round, Lookahead by `(1−α) + αc^k`,
/// Lookaround by `c^k`. Exact regardless of noise correlation.
pub fn mean_decay_per_round(spec: &MethodSpec, a: f64) -> f64 {
    let c = 1.0 - spec.gamma() * a;
    match *spec {
        MethodSpec::Sgd { .. } => c,
        MethodSpec::Lookahead { k, alpha, .. } => (1.0 - alpha) + alpha * c.powi(k as i32),
        MethodSpec::Lookaround { k, .. } => c.powi(k as i32),
    }
}

/// Analytic mean trajectory from `init`, one entry per round.
pub fn analytic_mean_trajectory(
    model: &DiagNoisyQuadratic,
    spec: &MethodSpec,
    init: &[f64],
    rounds: usize,
) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(rounds);
    let mut mean = init.to_vec();
    for _ in 0..rounds {
        for (i, m) in mean.iter_mut().enumerate() {
            *m *= mean_decay_per_round(spec, model.a[i]);
        }
        out.push(mean.clone());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(a: f64, sigma2: f64) -> DiagNoisyQuadratic {
        DiagNoisyQuadratic::new(vec![a], vec![sigma2]).unwrap()
    }

    #[test]
    fn expected_loss_noise_floor() {
        let m = scalar(1.0, 1.0);
        let s = MomentState::new(vec![0.0], vec![0.0]).unwrap();
        assert_eq!(expected_loss(&m, &s).unwrap(), 0.5);
    }

    #[test]
    fn expected_loss_pure_quadratic() {
        let m = scalar(1.0, 0.0);
        let s = MomentState::new(vec![2.0], vec![0.0]).unwrap();
        assert_eq!(expected_loss(&m, &s).unwrap(), 2.0);
    }

    #[test]
    fn expected_loss_at_sgd_fixed_point() {
        let m = scalar(1.0, 1.0);
        let v = sgd_fixed_point(&m, 0.1).unwrap()[0];
        let s = MomentState::new(vec![0.0], vec![v]).unwrap();
        let loss = expected_loss(&m, &s).unwrap();
        assert!((loss - 0.5263157894736842).abs() < 1e-12);
    }

    #[test]
    fn sgd_moment_step_mean_decay() {
        let m = scalar(1.0, 0.0);
        let s = MomentState::new(vec![1.0], vec![0.0]).unwrap();
        let next = sgd_moment_step(&m, &s, 0.1).unwrap();
        assert_eq!(next.mean, vec![0.9]);
        assert_eq!(next.var, vec![0.0]);
    }

    #[test]
    fn sgd_moment_step_noise_injection() {
        let m = scalar(1.0, 1.0);
        let s = MomentState::new(vec![0.0], vec![0.0]).unwrap();
        let next = sgd_moment_step(&m, &s, 0.1).unwrap();
        assert!((next.var[0] - 0.01).abs() < 1e-15);
    }

    #[test]
    fn sgd_recursion_converges_to_fixed_point() {
        let m = scalar(1.0, 1.0);
        let stat = iterate_to_stationarity(MomentState::point(vec![1.0]), |s| {
            sgd_moment_step(&m, s, 0.1)
        })
        .unwrap();
        let fp = sgd_fixed_point(&m, 0.1).unwrap();
        assert!((stat.var[0] - fp[0]).abs() < 1e-12);
        assert!((fp[0] - 0.05263157894736842).abs() < 1e-12);
    }

    #[test]
    fn lookaround_round_d1_k1_is_pure_noise_injection() {
        let m = scalar(1.0, 1.0);
        let s = MomentState::new(vec![0.0], vec![0.3]).unwrap();
        let next = lookaround_moment_round(&m, &s, 0.1, 1, 1).unwrap();
        // (d−1)/d = 0, noise term = γ²a²σ²(1−c²)/(1−c²) = γ²a²σ².
        assert!((next.var[0] - 0.01).abs() < 1e-15);
    }

    #[test]
    fn lookaround_mean_geometric_in_k() {
        let m = scalar(2.0, 0.0);
        let gamma = 0.1;
        let mut s = MomentState::point(vec![1.0]);
        for _ in 0..4 {
            s = lookaround_moment_round(&m, &s, gamma, 5, 3).unwrap();
        }
        let c = 1.0 - gamma * 2.0;
        assert!((s.mean[0] - c.powi(20)).abs() < 1e-12);
    }

    #[test]
    fn lookaround_recursion_converges_to_closed_form() {
        let m = scalar(1.0, 1.0);
        let stat = iterate_to_stationarity(MomentState::point(vec![1.0]), |s| {
            lookaround_moment_round(&m, s, 0.1, 5, 3)
        })
        .unwrap();
        let fp = lookaround_fixed_point(&m, 0.1, 5, 3).unwrap();
        assert!((stat.var[0] - fp[0]).abs() < 1e-12);
        // B = 0.9⁵, ratio (1−B²)/(3−2B²) ≈ 0.28286, V* ≈ 0.014887.
        let b: f64 = 0.9f64.powi(5);
        let expected = (1.0 - b * b) / (3.0 - 2.0 * b * b) * 0.05263157894736842;
        assert!((fp[0] - expected).abs() < 1e-12);
        assert!((fp[0] - 0.014887).abs() < 1e-5);
    }

    #[test]
    fn lookaround_denominator_vanishing_is_domain_error() {
        let m = scalar(1.0, 1.0);
        let s = MomentState::point(vec![0.0]);
        // γa = 2 ⇒ c = −1 ⇒ 1 − c² = 0.
        assert!(lookaround_moment_round(&m, &s, 2.0, 2, 2).is_err());
    }

    #[test]
    fn lookahead_alpha_one_equals_sgd_fixed_point() {
        let m = DiagNoisyQuadratic::new(vec![1.0, 3.0], vec![1.0, 0.5]).unwrap();
        for k in [1, 5, 20] {
            let la = fixed_point(
                &m,
                &MethodSpec::Lookahead {
                    gamma: 0.05,
                    k,
                    alpha: 1.0,
                },
            )
            .unwrap();
            let sgd = sgd_fixed_point(&m, 0.05).unwrap();
            for (x, y) in la.iter().zip(&sgd) {
                assert!((x - y).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn lookaround_two_routes_agree() {
        let m = DiagNoisyQuadratic::new(vec![1.0, 2.0], vec![1.0, 2.0]).unwrap();
        let direct = lookaround_fixed_point(&m, 0.1, 7, 4).unwrap();
        for alpha in [0.3, 0.5, 0.9, 1.0] {
            let via = lookaround_fixed_point_via_lookahead(&m, 0.1, 7, 4, alpha).unwrap();
            for (x, y) in direct.iter().zip(&via) {
                assert!((x - y).abs() < 1e-12 * x.abs().max(1.0));
            }
        }
    }

    #[test]
    fn gamma_out_of_range_names_bound() {
        let m = scalar(4.0, 1.0);
        let err = sgd_fixed_point(&m, 0.3).unwrap_err();
        assert!(err.to_string().contains("1/L"));
    }

    #[test]
    fn ordering_holds_under_prop_conditions() {
        let m = DiagNoisyQuadratic::new(vec![0.5, 1.0, 2.0], vec![1.0, 0.3, 2.0]).unwrap();
        for alpha in [0.5, 0.7, 0.95] {
            for k in [1, 5, 20] {
                for d in [3, 4, 6] {
                    let rep = check_ordering(&m, 0.2, k, d, alpha).unwrap();
                    assert!(rep.holds, "alpha={alpha} k={k} d={d}");
                }
            }
        }
    }

    #[test]
    fn ordering_counterexample_outside_conditions() {
        // d = 1: scan α, k and record a violation.
        let m = scalar(1.0, 1.0);
        let mut found = false;
        for alpha_i in 1..10 {
            let alpha = alpha_i as f64 / 10.0;
            for k in 1..=50 {
                let rep = check_ordering(&m, 0.1, k, 1, alpha).unwrap();
                if !rep.holds {
                    found = true;
                }
            }
        }
        assert!(found, "expected an ordering violation at d = 1");
    }

    #[test]
    fn ordering_alpha_near_one_d3() {
        let m = scalar(1.0, 1.0);
        let rep = check_ordering(&m, 0.1, 5, 3, 0.999999).unwrap();
        assert!(rep.holds);
        assert!((rep.lookahead_coeff[0] - 1.0).abs() < 1e-5);
        let b: f64 = 0.9f64.powi(5);
        let expected = (1.0 - b * b) / (3.0 - 2.0 * b * b);
        assert!((rep.lookaround_over_lookahead_coeff[0] - expected).abs() < 1e-4);
    }

    #[test]
    fn monotone_in_d() {
        let m = DiagNoisyQuadratic::new(vec![0.7, 1.5], vec![1.0, 0.4]).unwrap();
        let mut prev: Option<Vec<f64>> = None;
        for d in 1..=6 {
            let fp = lookaround_fixed_point(&m, 0.2, 5, d).unwrap();
            if let Some(p) = &prev {
                for (cur, old) in fp.iter().zip(p) {
                    assert!(cur <= old);
                }
            }
            prev = Some(fp);
        }
    }

    #[test]
    fn monte_carlo_zero_noise_is_deterministic_decay() {
        let m = scalar(1.0, 0.0);
        let res = monte_carlo(
            &m,
            &MethodSpec::Sgd { gamma: 0.1 },
            &[1.0],
            20,
            64,
            NoiseMode::Independent,
            0,
        )
        .unwrap();
        for (r, state) in res.trajectory.iter().enumerate() {
            assert!((state.mean[0] - 0.9f64.powi(r as i32 + 1)).abs() < 1e-12);
            // identical trials: variance is pure cancellation noise, O(ε·mean²)
            assert!(state.var[0].abs() < 1e-13);
        }
    }

    #[test]
    fn monte_carlo_deterministic_across_thread_counts() {
        let m = scalar(1.0, 1.0);
        let spec = MethodSpec::Lookaround {
            gamma: 0.1,
            k: 3,
            d: 2,
        };
        let run = || {
            monte_carlo(&m, &spec, &[1.0], 10, 3000, NoiseMode::Independent, 5)
                .unwrap()
                .trajectory
        };
        let a = run();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(run);
        assert_eq!(a, b);
    }
}
