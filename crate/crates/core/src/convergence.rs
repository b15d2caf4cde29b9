//! Deterministic-quadratic convergence rates.
//!
//! Scalar quadratic directions are analyzed through small linear dynamical
//! systems: classical momentum through its 2×2 transition matrix, Lookahead
//! through the composite k-step matrix over (velocity, slow weights), and
//! Lookaround through the (k+1)×(k+1) historical-average system `L·B^{k−1}·T`.
//! A system's convergence rate is the k-th root of its spectral radius.
//!
//! The Lookaround system averages k+1 historical iterates of one trajectory,
//! which approximates the replica average; every output labels this rate
//! "historical-average approximation" rather than an exact Lookaround rate.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Label attached to Lookaround rates wherever they are emitted.
pub const LOOKAROUND_RATE_LABEL: &str = "historical-average approximation";

/// One scalar quadratic direction with optimizer hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadraticSpec1D {
    /// Curvature, > 0.
    pub a: f64,
    /// Learning rate.
    pub gamma: f64,
    /// Momentum factor in [0, 1).
    pub beta: f64,
    /// Synchronization period.
    pub k: usize,
}

impl QuadraticSpec1D {
    pub fn validate(&self) -> Result<()> {
        if self.a <= 0.0 {
            return Err(Error::invalid("curvature a must be > 0"));
        }
        if !(0.0..1.0).contains(&self.beta) {
            return Err(Error::invalid("β must lie in [0, 1)"));
        }
        if self.k == 0 {
            return Err(Error::invalid("k must be ≥ 1"));
        }
        Ok(())
    }
}

/// Square transition matrix whose one application represents
/// `steps_per_application` inner updates.
#[derive(Debug, Clone)]
pub struct TransitionSystem {
    pub matrix: DMatrix<f64>,
    pub steps_per_application: usize,
}

/// Max modulus over all (possibly complex) eigenvalues, via real Schur
/// decomposition. Errors if the decomposition fails to converge.
pub fn spectral_radius(m: &DMatrix<f64>) -> Result<f64> {
    if !m.is_square() {
        return Err(Error::invalid("spectral_radius requires a square matrix"));
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("matrix entries must be finite"));
    }
    let schur = nalgebra::linalg::Schur::try_new(m.clone(), 1e-12, 100_000)
        .ok_or_else(|| Error::Numerical(format!("Schur iteration did not converge for {m}")))?;
    let eigs = schur.complex_eigenvalues();
    Ok(eigs.iter().map(|z| z.re.hypot(z.im)).fold(0.0, f64::max))
}

/// Convergence rate of the system: `spectral_radius(M)^(1/k)`.
pub fn rate(system: &TransitionSystem) -> Result<f64> {
    let rho = spectral_radius(&system.matrix)?;
    Ok(rho.powf(1.0 / system.steps_per_application as f64))
}

/// Spectral radius of the 2×2 classical-momentum transition matrix
/// `[[β, −a], [γβ, 1−γa]]` acting on (velocity, parameter).
///
/// At γ = 0 the matrix is triangular with eigenvalues {β, 1}; the returned
/// rate is 1 — the system is non-contractive since nothing feeds the iterate.
pub fn cm_rate(q: &QuadraticSpec1D) -> Result<f64> {
    q.validate()?;
    let m = DMatrix::from_row_slice(
        2,
        2,
        &[q.beta, -q.a, q.gamma * q.beta, 1.0 - q.gamma * q.a],
    );
    spectral_radius(&m)
}

/// The accelerated lower bound `(√κ − 1)/(√κ + 1)` for condition number κ.
pub fn optimal_rate(kappa: f64) -> Result<f64> {
    if kappa < 1.0 {
        return Err(Error::domain(format!("condition number must be ≥ 1, got {kappa}")));
    }
    let s = kappa.sqrt();
    Ok((s - 1.0) / (s + 1.0))
}

/// Historical-average Lookaround system `M = L · B^{k−1} · T` over the state
/// `[θ_{t,0}; θ_{t−1,k}; …; θ_{t−1,1}]` of length k+1.
///
/// First rows follow the printed templates; for k < 2 the T template's history
/// columns are truncated to the state size. All other rows are identity
/// shifts.
pub fn build_lookaround_system(q: &QuadraticSpec1D) -> Result<TransitionSystem> {
    q.validate()?;
    let n = q.k + 1;
    let eta_a = q.gamma * q.a;

    let mut l = DMatrix::zeros(n, n);
    for col in 0..n {
        l[(0, col)] = 1.0 / (q.k + 1) as f64;
    }
    shift_rows(&mut l);

    let mut b = DMatrix::zeros(n, n);
    b[(0, 0)] = (1.0 + q.beta) - eta_a;
    if n > 1 {
        b[(0, 1)] = -q.beta;
    }
    shift_rows(&mut b);

    let mut t = DMatrix::zeros(n, n);
    t[(0, 0)] = 1.0 - eta_a;
    if n > 1 {
        t[(0, 1)] = q.beta;
    }
    if n > 2 {
        t[(0, 2)] = -q.beta;
    }
    shift_rows(&mut t);

    let mut m = l;
    for _ in 0..q.k - 1 {
        m *= &b;
    }
    m *= &t;
    debug_assert_eq!(m.nrows(), n);
    Ok(TransitionSystem {
        matrix: m,
        steps_per_application: q.k,
    })
}

/// Fills rows 1..n with subdiagonal identity shifts.
fn shift_rows(m: &mut DMatrix<f64>) {
    for row in 1..m.nrows() {
        m[(row, row - 1)] = 1.0;
    }
}

/// Lookahead composite system on the state (velocity, slow weights): k CM
/// steps from the slow weights, then the outer interpolation
/// `φ ← (1−α)φ + αθ_k` applied once per application. The fast iterate starts
/// each round at φ, so it is eliminated from the state.
pub fn build_lookahead_system(q: &QuadraticSpec1D, alpha: f64) -> Result<TransitionSystem> {
    q.validate()?;
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::invalid("α must lie in (0, 1]"));
    }
    let step = DMatrix::from_row_slice(
        2,
        2,
        &[q.beta, -q.a, q.gamma * q.beta, 1.0 - q.gamma * q.a],
    );
    let mut sk = DMatrix::identity(2, 2);
    for _ in 0..q.k {
        sk = &step * sk;
    }
    let m = DMatrix::from_row_slice(
        2,
        2,
        &[
            sk[(0, 0)],
            sk[(0, 1)],
            alpha * sk[(1, 0)],
            alpha * sk[(1, 1)] + (1.0 - alpha),
        ],
    );
    Ok(TransitionSystem {
        matrix: m,
        steps_per_application: q.k,
    })
}

/// Measures the asymptotic per-inner-step decay of `x ← Mx` from a seeded
/// random start, via the log-norm slope over the tail of `applications`
/// applications. The transient first half is discarded.
pub fn simulated_decay_rate(system: &TransitionSystem, applications: usize, seed: u64) -> Result<f64> {
    if applications < 10 {
        return Err(Error::invalid("need at least 10 applications"));
    }
    let n = system.matrix.nrows();
    let mut r = rng::stream(seed, "decay-sim");
    let mut x: nalgebra::DVector<f64> = nalgebra::DVector::from_fn(n, |_, _| r.gen_range(-1.0..1.0));
    let mut log_norms = Vec::with_capacity(applications + 1);
    let mut acc = x.norm().ln();
    log_norms.push(acc);
    for _ in 0..applications {
        x = &system.matrix * x;
        let norm = x.norm();
        if norm == 0.0 {
            return Err(Error::Numerical("iterate collapsed to zero".into()));
        }
        acc += norm.ln();
        // renormalize against under/overflow
        x /= norm;
        log_norms.push(acc);
    }
    let start = applications / 2;
    let slope = (log_norms[applications] - log_norms[start]) / (applications - start) as f64;
    Ok((slope / system.steps_per_application as f64).exp())
}

/// Methods in the condition-number sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RateMethod {
    Cm,
    Lookahead,
    Lookaround,
}

impl RateMethod {
    pub fn name(&self) -> &'static str {
        match self {
            RateMethod::Cm => "cm",
            RateMethod::Lookahead => "lookahead",
            RateMethod::Lookaround => "lookaround",
        }
    }
}

/// One sweep row: the γ-minimized rate for a method at a condition number.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepPoint {
    pub kappa: f64,
    pub method: RateMethod,
    pub best_rate: f64,
    pub best_gamma: f64,
}

/// Rate of a method on the worse of the two eigen-directions {1, κ} at a
/// given γ. Diagonal quadratics block-decouple per direction, so the full
/// system's rate is the max over per-direction scalar systems.
pub fn method_rate(
    method: RateMethod,
    kappa: f64,
    gamma: f64,
    k: usize,
    beta: f64,
    alpha: f64,
) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for a in [1.0, kappa] {
        let q = QuadraticSpec1D { a, gamma, beta, k };
        let r = match method {
            RateMethod::Cm => cm_rate(&q)?,
            RateMethod::Lookahead => rate(&build_lookahead_system(&q, alpha)?)?,
            RateMethod::Lookaround => rate(&build_lookaround_system(&q)?)?,
        };
        worst = worst.max(r);
    }
    Ok(worst)
}

/// Minimizes each method's rate over a 200-point log grid
/// `γ ∈ [10⁻⁶, 2/κ]` for every condition number in the grid. Output is
/// ordered by (κ, method).
pub fn rate_sweep(
    kappa_grid: &[f64],
    methods: &[RateMethod],
    k: usize,
    beta: f64,
    alpha: f64,
) -> Result<Vec<SweepPoint>> {
    const GRID_POINTS: usize = 200;
    let mut out = Vec::new();
    for &kappa in kappa_grid {
        if kappa < 1.0 {
            return Err(Error::domain(format!("κ must be ≥ 1, got {kappa}")));
        }
        let lo: f64 = 1e-6;
        let hi: f64 = 2.0 / kappa;
        let log_lo = lo.ln();
        let log_hi = hi.ln();
        for &method in methods {
            let mut best_rate = f64::INFINITY;
            let mut best_gamma = lo;
            for i in 0..GRID_POINTS {
                let frac = i as f64 / (GRID_POINTS - 1) as f64;
                let gamma = (log_lo + frac * (log_hi - log_lo)).exp();
                let r = method_rate(method, kappa, gamma, k, beta, alpha)?;
                if r < best_rate {
                    best_rate = r;
                    best_gamma = gamma;
                }
            }
            out.push(SweepPoint {
                kappa,
                method,
                best_rate,
                best_gamma,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Quadratic-formula eigenvalue oracle for 2×2 matrices.
    fn two_by_two_radius(m: &DMatrix<f64>) -> f64 {
        let tr = m[(0, 0)] + m[(1, 1)];
        let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
        let disc = tr * tr - 4.0 * det;
        if disc >= 0.0 {
            let s = disc.sqrt();
            ((tr + s) / 2.0).abs().max(((tr - s) / 2.0).abs())
        } else {
            // complex pair: modulus √det
            det.sqrt()
        }
    }

    #[test]
    fn spectral_radius_identity() {
        let m = DMatrix::identity(3, 3);
        assert!((spectral_radius(&m).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn spectral_radius_rotation_complex_pair() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        assert!((spectral_radius(&m).unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn spectral_radius_known_by_similarity() {
        // D = diag(0.1..0.9, 0.9) conjugated by a random-ish invertible P.
        let n = 10;
        let diag: Vec<f64> = (0..n).map(|i| 0.1 + 0.8 * i as f64 / (n - 1) as f64).collect();
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(diag.clone()));
        let mut p: DMatrix<f64> = DMatrix::identity(n, n);
        let mut r = rng::stream(3, "sim");
        for i in 0..n {
            for j in 0..n {
                p[(i, j)] += 0.3 * r.gen_range(-1.0..1.0f64);
            }
        }
        let p_inv = p.clone().try_inverse().unwrap();
        let m = &p * d * p_inv;
        assert!((spectral_radius(&m).unwrap() - 0.9).abs() < 1e-8);
    }

    #[test]
    fn cm_rate_beta_zero_is_sgd_contraction() {
        let q = QuadraticSpec1D {
            a: 1.0,
            gamma: 0.1,
            beta: 0.0,
            k: 1,
        };
        assert!((cm_rate(&q).unwrap() - 0.9).abs() < 1e-10);
    }

    #[test]
    fn cm_rate_gamma_zero_is_non_contractive() {
        let q = QuadraticSpec1D {
            a: 1.0,
            gamma: 0.0,
            beta: 0.9,
            k: 1,
        };
        assert!((cm_rate(&q).unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn cm_rate_matches_quadratic_formula_oracle() {
        let mut r = rng::stream(11, "cm-oracle");
        for _ in 0..100 {
            let q = QuadraticSpec1D {
                a: r.gen_range(0.1..5.0),
                gamma: r.gen_range(0.001..0.5),
                beta: r.gen_range(0.0..0.999),
                k: 1,
            };
            let m = DMatrix::from_row_slice(
                2,
                2,
                &[q.beta, -q.a, q.gamma * q.beta, 1.0 - q.gamma * q.a],
            );
            let expect = two_by_two_radius(&m);
            assert!((cm_rate(&q).unwrap() - expect).abs() < 1e-9);
        }
    }

    #[test]
    fn cm_critically_damped_minimum_near_sqrt_beta() {
        // At β = 0.9, scanning γ on a = 1 reaches min rate ≈ √β.
        let beta: f64 = 0.9;
        let mut best = f64::INFINITY;
        for i in 1..4000 {
            let gamma = i as f64 * 1e-3;
            let q = QuadraticSpec1D {
                a: 1.0,
                gamma,
                beta,
                k: 1,
            };
            best = best.min(cm_rate(&q).unwrap());
        }
        assert!((best - beta.sqrt()).abs() < 1e-3);
    }

    #[test]
    fn optimal_rate_values() {
        assert_eq!(optimal_rate(1.0).unwrap(), 0.0);
        assert!((optimal_rate(100.0).unwrap() - 9.0 / 11.0).abs() < 1e-15);
        assert!((optimal_rate(1e4).unwrap() - 99.0 / 101.0).abs() < 1e-15);
        assert!(optimal_rate(0.5).is_err());
    }

    #[test]
    fn lookaround_k1_is_2x2_and_matches_hand_product() {
        let q = QuadraticSpec1D {
            a: 1.0,
            gamma: 0.1,
            beta: 0.3,
            k: 1,
        };
        let sys = build_lookaround_system(&q).unwrap();
        assert_eq!(sys.matrix.nrows(), 2);
        // M = L·T with L = [[½, ½], [1, 0]], T = [[1−γa, β], [1, 0]].
        let l = DMatrix::from_row_slice(2, 2, &[0.5, 0.5, 1.0, 0.0]);
        let t = DMatrix::from_row_slice(2, 2, &[0.9, 0.3, 1.0, 0.0]);
        let expect = l * t;
        assert!((sys.matrix.clone() - expect).norm() < 1e-14);
    }

    #[test]
    fn lookaround_beta_zero_rate_matches_closed_form() {
        // With β = 0 every history slot equals φ right after a sync, and k
        // steps later the slots hold c^k φ … c φ, φ. The next average is then
        // φ·(1−c^{k+1})/((1−c)(k+1)), which is the exact per-round factor.
        for &(gamma, a, k) in &[(0.1, 1.0, 30usize), (0.05, 5.0, 12), (0.2, 2.0, 8)] {
            let q = QuadraticSpec1D {
                a,
                gamma,
                beta: 0.0,
                k,
            };
            let c = 1.0 - gamma * a;
            let per_round = (1.0 - c.powi(k as i32 + 1)) / ((1.0 - c) * (k + 1) as f64);
            let expect = per_round.powf(1.0 / k as f64);
            let sys = build_lookaround_system(&q).unwrap();
            let r = rate(&sys).unwrap();
            assert!((r - expect).abs() < 1e-10, "rate {r} vs closed form {expect}");
        }
    }

    #[test]
    fn lookaround_rate_matches_decay_slope() {
        let q = QuadraticSpec1D {
            a: 1.0,
            gamma: 0.05,
            beta: 0.99,
            k: 20,
        };
        let sys = build_lookaround_system(&q).unwrap();
        let r = rate(&sys).unwrap();
        let sim = simulated_decay_rate(&sys, 1000, 17).unwrap();
        assert!((r - sim).abs() <= 1e-3, "rate {r} vs simulated {sim}");
    }

    #[test]
    fn lookahead_alpha_one_reduces_to_cm() {
        let q = QuadraticSpec1D {
            a: 2.0,
            gamma: 0.1,
            beta: 0.8,
            k: 7,
        };
        let sys = build_lookahead_system(&q, 1.0).unwrap();
        let r = rate(&sys).unwrap();
        let cm = cm_rate(&q).unwrap();
        assert!((r - cm).abs() < 1e-12);
    }

    #[test]
    fn lookahead_scalar_example() {
        // k=1, β=0, α=0.5, a=1, γ=0.1 → φ ← 0.95 φ → rate 0.95.
        let q = QuadraticSpec1D {
            a: 1.0,
            gamma: 0.1,
            beta: 0.0,
            k: 1,
        };
        let sys = build_lookahead_system(&q, 0.5).unwrap();
        assert!((rate(&sys).unwrap() - 0.95).abs() < 1e-12);
    }

    #[test]
    fn lookahead_rate_matches_decay_slope() {
        let q = QuadraticSpec1D {
            a: 1.0,
            gamma: 0.05,
            beta: 0.99,
            k: 20,
        };
        let sys = build_lookahead_system(&q, 0.5).unwrap();
        let r = rate(&sys).unwrap();
        let sim = simulated_decay_rate(&sys, 1000, 23).unwrap();
        assert!((r - sim).abs() <= 1e-3, "rate {r} vs simulated {sim}");
    }

    #[test]
    fn rate_trivial_cases() {
        let sys = TransitionSystem {
            matrix: DMatrix::from_diagonal_element(3, 3, 0.5),
            steps_per_application: 2,
        };
        assert!((rate(&sys).unwrap() - 0.5f64.sqrt()).abs() < 1e-12);
        let sys1 = TransitionSystem {
            matrix: DMatrix::from_diagonal_element(3, 3, 0.5),
            steps_per_application: 1,
        };
        assert!((rate(&sys1).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn kth_root_consistency_under_composition() {
        let q = QuadraticSpec1D {
            a: 3.0,
            gamma: 0.07,
            beta: 0.9,
            k: 10,
        };
        let sys = build_lookaround_system(&q).unwrap();
        let doubled = TransitionSystem {
            matrix: &sys.matrix * &sys.matrix,
            steps_per_application: 2 * sys.steps_per_application,
        };
        let r1 = rate(&sys).unwrap();
        let r2 = rate(&doubled).unwrap();
        assert!((r1 - r2).abs() < 1e-9, "{r1} vs {r2}");
    }

    #[test]
    fn sweep_respects_lower_bound() {
        let grid = [10.0, 1e3, 1e5];
        let pts = rate_sweep(
            &grid,
            &[RateMethod::Cm, RateMethod::Lookahead, RateMethod::Lookaround],
            20,
            0.99,
            0.5,
        )
        .unwrap();
        for p in &pts {
            let floor = optimal_rate(p.kappa).unwrap();
            assert!(p.best_rate >= floor - 1e-9, "{:?}", p);
        }
    }
}
