//! Experiment implementations: each function executes one experiment kind,
//! emits its artifacts under the output directory, and returns a one-line
//! summary. Any violated invariant surfaces as an error (nonzero exit).

use std::path::Path;

use anyhow::{anyhow, bail, Result};

use lookaround_core::augment::AugmentationSpec;
use lookaround_core::convergence::{
    optimal_rate, rate_sweep, RateMethod, SweepPoint, LOOKAROUND_RATE_LABEL,
};
use lookaround_core::nn::dataset::{make_augmentations, make_dataset, Dataset};
use lookaround_core::nn::experiments::{
    ablation_grid, fit_slope, posthoc_average, sweep_d, sweep_k, AblationCell, ExperimentParams,
};
use lookaround_core::nn::landscape::{plane_grid_eval, plane_projection};
use lookaround_core::nn::mlp::Mlp;
use lookaround_core::nn::train::{train, RunLog, TrainConfig, TrainMethod, TrainOutcome};
use lookaround_core::param::ParamVector;
use lookaround_core::quad::{
    analytic_mean_trajectory, expected_loss, fixed_point, lookaround_moment_round,
    sgd_moment_step, DiagNoisyQuadratic, MethodSpec, MomentState, MonteCarloResult,
};

use crate::artifact::{write_csv, write_svg_best_effort};
use crate::config::{
    AblationParams, ExperimentConfig, ExperimentKind, LandscapeParams, QuadFixedPointsParams,
    QuadMonteCarloParams, RateSweepParams, SoupsCollapseParams, SweepDParams, SweepKParams,
    TrainParams,
};
use crate::svg;

pub fn run(cfg: &ExperimentConfig) -> Result<String> {
    let out = cfg.out.as_path();
    match &cfg.kind {
        ExperimentKind::QuadFixedPoints(p) => quad_fixed_points(p, out),
        ExperimentKind::QuadMonteCarlo(p) => quad_monte_carlo(p, cfg.seed, out),
        ExperimentKind::RateSweep(p) => run_rate_sweep(p, out),
        ExperimentKind::Train(p) => run_train(p, cfg.seed, out),
        ExperimentKind::Ablation(p) => run_ablation(p, out),
        ExperimentKind::SweepD(p) => run_sweep_d(p, out),
        ExperimentKind::SweepK(p) => run_sweep_k(p, out),
        ExperimentKind::Landscape(p) => run_landscape(p, cfg.seed, out),
        ExperimentKind::SoupsCollapse(p) => run_soups_collapse(p, out),
    }
}

// ---------------------------------------------------------------------------
// Noisy-quadratic experiments
// ---------------------------------------------------------------------------

fn method_specs(
    names: &[&str],
    gamma: f64,
    k: usize,
    d: usize,
    alpha: f64,
) -> Result<Vec<MethodSpec>> {
    names
        .iter()
        .map(|name| match *name {
            "sgd" => Ok(MethodSpec::Sgd { gamma }),
            "lookahead" => Ok(MethodSpec::Lookahead { gamma, k, alpha }),
            "lookaround" => Ok(MethodSpec::Lookaround { gamma, k, d }),
            other => Err(anyhow!("unknown method '{other}'")),
        })
        .collect()
}

fn quad_fixed_points(p: &QuadFixedPointsParams, out: &Path) -> Result<String> {
    let model = DiagNoisyQuadratic::new(p.a.clone(), p.sigma2.clone())?;
    let specs = method_specs(&["sgd", "lookahead", "lookaround"], p.gamma, p.k, p.d, p.alpha)?;

    let mut max_rel = 0.0f64;
    let path = write_csv(
        out,
        "fixed_points.csv",
        &["method", "coordinate", "fixed_point_var", "iterated_var", "rel_err"],
        |w| {
            for spec in &specs {
                let closed = fixed_point(&model, spec)?;
                // Iterate the matching moment recursion to stationarity; there
                // is no slow-weights recursion, so that row is closed-form only.
                let iterated: Option<Vec<f64>> = match *spec {
                    MethodSpec::Sgd { gamma } => Some(
                        lookaround_core::quad::iterate_to_stationarity(
                            MomentState::point(vec![1.0; model.dim()]),
                            |s| sgd_moment_step(&model, s, gamma),
                        )?
                        .var,
                    ),
                    MethodSpec::Lookaround { gamma, k, d } => Some(
                        lookaround_core::quad::iterate_to_stationarity(
                            MomentState::point(vec![1.0; model.dim()]),
                            |s| lookaround_moment_round(&model, s, gamma, k, d),
                        )?
                        .var,
                    ),
                    MethodSpec::Lookahead { .. } => None,
                };
                for (i, c) in closed.iter().enumerate() {
                    let (it_s, err_s) = match &iterated {
                        Some(v) => {
                            let rel = (v[i] - c).abs() / c.abs().max(1e-300);
                            max_rel = max_rel.max(rel);
                            (format!("{:.17e}", v[i]), format!("{rel:.3e}"))
                        }
                        None => (String::new(), String::new()),
                    };
                    w.write_record([
                        spec.name(),
                        &i.to_string(),
                        &format!("{c:.17e}"),
                        &it_s,
                        &err_s,
                    ])?;
                }
            }
            Ok(())
        },
    )?;
    if max_rel > 1e-10 {
        bail!("fixed-point consistency violated: max relative error {max_rel:.3e} > 1e-10");
    }
    Ok(format!(
        "quad-fixed-points: {} coordinates × 3 methods verified (max rel err {max_rel:.2e}) → {}",
        p.a.len(),
        path.display()
    ))
}

fn quad_monte_carlo(p: &QuadMonteCarloParams, seed: u64, out: &Path) -> Result<String> {
    let model = DiagNoisyQuadratic::new(p.a.clone(), p.sigma2.clone())?;
    let names: Vec<&str> = p.methods.iter().map(|s| s.as_str()).collect();
    let specs = method_specs(&names, p.gamma, p.k, p.d, p.alpha)?;

    let mut results: Vec<(MethodSpec, MonteCarloResult)> = Vec::new();
    for spec in &specs {
        let mc = lookaround_core::quad::monte_carlo(
            &model,
            spec,
            &p.init,
            p.rounds,
            p.trials,
            p.noise,
            seed,
        )?;
        results.push((*spec, mc));
    }

    let path = write_csv(
        out,
        "moments.csv",
        &[
            "round",
            "method",
            "coordinate",
            "analytic_mean",
            "analytic_var",
            "empirical_mean",
            "empirical_var",
            "expected_loss",
        ],
        |w| {
            for (spec, mc) in &results {
                let means = analytic_mean_trajectory(&model, spec, &p.init, p.rounds);
                // Variance trajectory from the matching recursion where one
                // exists; the slow-weights variance column stays empty.
                let vars: Option<Vec<Vec<f64>>> = match *spec {
                    MethodSpec::Sgd { gamma } => Some(moment_var_track(&model, &p.init, p.rounds, |s| {
                        sgd_moment_step(&model, s, gamma)
                    })?),
                    MethodSpec::Lookaround { gamma, k, d } => {
                        Some(moment_var_track(&model, &p.init, p.rounds, |s| {
                            lookaround_moment_round(&model, s, gamma, k, d)
                        })?)
                    }
                    MethodSpec::Lookahead { .. } => None,
                };
                for r in 0..p.rounds {
                    let emp = &mc.trajectory[r];
                    let loss = expected_loss(&model, emp)?;
                    for i in 0..model.dim() {
                        let av = vars
                            .as_ref()
                            .map(|v| format!("{:.17e}", v[r][i]))
                            .unwrap_or_default();
                        w.write_record([
                            r.to_string(),
                            spec.name().to_string(),
                            i.to_string(),
                            format!("{:.17e}", means[r][i]),
                            av,
                            format!("{:.17e}", emp.mean[i]),
                            format!("{:.17e}", emp.var[i]),
                            format!("{loss:.17e}"),
                        ])?;
                    }
                }
            }
            Ok(())
        },
    )?;
    let noise = match p.noise {
        lookaround_core::quad::NoiseMode::Independent => "independent",
        lookaround_core::quad::NoiseMode::Shared => "shared",
    };
    Ok(format!(
        "quad-monte-carlo: {} methods × {} rounds × {} trials ({noise} noise) → {}",
        results.len(),
        p.rounds,
        p.trials,
        path.display()
    ))
}

fn moment_var_track(
    model: &DiagNoisyQuadratic,
    init: &[f64],
    rounds: usize,
    mut step: impl FnMut(&MomentState) -> lookaround_core::error::Result<MomentState>,
) -> Result<Vec<Vec<f64>>> {
    let _ = model;
    let mut state = MomentState::point(init.to_vec());
    let mut out = Vec::with_capacity(rounds);
    for _ in 0..rounds {
        state = step(&state)?;
        out.push(state.var.clone());
    }
    Ok(out)
}

fn run_rate_sweep(p: &RateSweepParams, out: &Path) -> Result<String> {
    let grid: Vec<f64> = (0..p.kappa_points)
        .map(|i| {
            let frac = i as f64 / (p.kappa_points - 1) as f64;
            (p.kappa_min.ln() + frac * (p.kappa_max.ln() - p.kappa_min.ln())).exp()
        })
        .collect();
    let points: Vec<SweepPoint> = rate_sweep(&grid, &p.methods, p.k, p.beta, p.alpha)?;

    for pt in &points {
        let floor = optimal_rate(pt.kappa)?;
        if pt.best_rate < floor - 1e-9 {
            bail!(
                "rate floor violated: {} at κ={} has rate {} < optimal {}",
                pt.method.name(),
                pt.kappa,
                pt.best_rate,
                floor
            );
        }
    }

    let path = write_csv(
        out,
        "rates.csv",
        &["kappa", "method", "rate", "gamma_best", "note"],
        |w| {
            for pt in &points {
                let note = if pt.method == RateMethod::Lookaround {
                    LOOKAROUND_RATE_LABEL
                } else {
                    ""
                };
                w.write_record([
                    format!("{:.17e}", pt.kappa),
                    pt.method.name().to_string(),
                    format!("{:.17e}", pt.best_rate),
                    format!("{:.17e}", pt.best_gamma),
                    note.to_string(),
                ])?;
            }
            Ok(())
        },
    )?;

    if p.svg {
        write_svg_best_effort(out, "rates.svg", || {
            let series: Vec<(String, Vec<(f64, f64)>)> = p
                .methods
                .iter()
                .map(|m| {
                    let pts = points
                        .iter()
                        .filter(|pt| pt.method == *m)
                        .map(|pt| (pt.kappa, pt.best_rate))
                        .collect();
                    (m.name().to_string(), pts)
                })
                .collect();
            Ok(svg::line_chart(
                "convergence rate vs condition number (γ optimized per point)",
                &series,
                true,
            ))
        });
    }
    Ok(format!(
        "rate-sweep: {} κ points × {} methods, floor respected everywhere → {}",
        grid.len(),
        p.methods.len(),
        path.display()
    ))
}

// ---------------------------------------------------------------------------
// MLP-harness experiments
// ---------------------------------------------------------------------------

fn load_dataset(kind: lookaround_core::nn::dataset::DatasetKind, n_train: usize, n_test: usize, data_seed: u64) -> Result<Dataset> {
    Ok(make_dataset(kind, n_train, n_test, data_seed)?)
}

fn write_runlog_csv(out: &Path, name: &str, logs: &[&RunLog]) -> Result<std::path::PathBuf> {
    let join = |xs: &[f64]| {
        xs.iter()
            .map(|x| format!("{x:.6}"))
            .collect::<Vec<_>>()
            .join(";")
    };
    write_csv(
        out,
        name,
        &[
            "method",
            "seed",
            "round",
            "step",
            "lr",
            "train_loss_per_replica",
            "test_acc_per_replica",
            "test_acc_mean_net",
            "wall_clock_s",
        ],
        |w| {
            for log in logs {
                for rec in &log.records {
                    w.write_record([
                        log.method.clone(),
                        log.seed.to_string(),
                        rec.round.to_string(),
                        rec.step.to_string(),
                        format!("{:.8}", rec.lr),
                        join(&rec.train_loss_per_replica),
                        join(&rec.test_acc_per_replica),
                        format!("{:.6}", rec.test_acc_mean_net),
                        format!("{:.3}", rec.wall_clock_s),
                    ])?;
                }
            }
            Ok(())
        },
    )
}

fn run_train(p: &TrainParams, seed: u64, out: &Path) -> Result<String> {
    let dataset = load_dataset(p.dataset, p.n_train, p.n_test, p.data_seed)?;
    let method = match p.method.as_str() {
        "sgd" => TrainMethod::Sgd,
        "momentum" => TrainMethod::Momentum { beta: p.momentum_beta },
        "lookahead" => TrainMethod::Lookahead { k: p.k, alpha: p.alpha },
        "lookaround" => TrainMethod::Lookaround { k: p.k, d: p.d },
        other => bail!("unknown method '{other}'"),
    };
    let cfg = TrainConfig {
        method,
        gamma: p.gamma,
        epochs: p.epochs,
        batch_size: p.batch_size,
        schedule: p.schedule,
        seed,
        hidden: p.hidden.clone(),
        carry_velocity: p.carry_velocity,
        parallel_replicas: p.parallel_replicas,
    };
    let augs = make_augmentations(p.dataset, p.d)?;
    let outcome: TrainOutcome = train(&cfg, &dataset, &augs)?;
    let path = write_runlog_csv(out, "runlog.csv", &[&outcome.log])?;
    let acc = outcome
        .final_net
        .accuracy(&dataset.test_inputs, &dataset.test_labels)?;
    Ok(format!(
        "train: {} on {} for {} epochs, final test accuracy {acc:.4} → {}",
        p.method,
        p.dataset.name(),
        p.epochs,
        path.display()
    ))
}

fn experiment_params(
    gamma: f64,
    epochs: usize,
    batch_size: usize,
    schedule: lookaround_core::nn::train::Schedule,
    hidden: &[usize],
    k: usize,
    d: usize,
) -> ExperimentParams {
    ExperimentParams {
        gamma,
        epochs,
        batch_size,
        schedule,
        hidden: hidden.to_vec(),
        k,
        d,
    }
}

fn run_ablation(p: &AblationParams, out: &Path) -> Result<String> {
    let dataset = load_dataset(p.dataset, p.n_train, p.n_test, p.data_seed)?;
    let params = experiment_params(p.gamma, p.epochs, p.batch_size, p.schedule, &p.hidden, p.k, p.d);
    let table = ablation_grid(&dataset, &params, &p.seeds)?;
    let cells: [(&str, &AblationCell); 4] = [
        ("no_da_no_wa", &table.no_da_no_wa),
        ("da_no_wa", &table.da_no_wa),
        ("no_da_wa", &table.no_da_wa),
        ("da_wa", &table.da_wa),
    ];
    let path = write_csv(
        out,
        "ablation.csv",
        &["cell", "mean_accuracy", "std_accuracy", "per_seed_accuracy"],
        |w| {
            for (name, cell) in &cells {
                w.write_record([
                    name.to_string(),
                    format!("{:.6}", cell.mean()),
                    format!("{:.6}", cell.std()),
                    cell.accuracies
                        .iter()
                        .map(|a| format!("{a:.6}"))
                        .collect::<Vec<_>>()
                        .join(";"),
                ])?;
            }
            Ok(())
        },
    )?;
    Ok(format!(
        "ablation: DA×WA means over {} seeds: {} → {}",
        p.seeds.len(),
        cells
            .iter()
            .map(|(n, c)| format!("{n}={:.4}", c.mean()))
            .collect::<Vec<_>>()
            .join(" "),
        path.display()
    ))
}

fn write_sweep_csv(
    out: &Path,
    value_name: &str,
    rows: &[lookaround_core::nn::experiments::SweepRow],
) -> Result<std::path::PathBuf> {
    write_csv(
        out,
        "sweep.csv",
        &[value_name, "mean_accuracy", "std_accuracy", "per_seed_accuracy"],
        |w| {
            for row in rows {
                w.write_record([
                    row.value.to_string(),
                    format!("{:.6}", row.mean),
                    format!("{:.6}", row.std),
                    row.per_seed_accuracy
                        .iter()
                        .map(|a| format!("{a:.6}"))
                        .collect::<Vec<_>>()
                        .join(";"),
                ])?;
            }
            Ok(())
        },
    )
}

fn run_sweep_d(p: &SweepDParams, out: &Path) -> Result<String> {
    let dataset = load_dataset(p.dataset, p.n_train, p.n_test, p.data_seed)?;
    let params = experiment_params(p.gamma, p.epochs, p.batch_size, p.schedule, &p.hidden, p.k, 1);
    let rows = sweep_d(&dataset, &params, &p.d_values, &p.seeds)?;
    let path = write_sweep_csv(out, "d", &rows)?;
    let xs: Vec<f64> = rows.iter().map(|r| r.value as f64).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.mean).collect();
    Ok(format!(
        "sweep-d: d ∈ {:?} over {} seeds, trend slope {:.5} → {}",
        p.d_values,
        p.seeds.len(),
        fit_slope(&xs, &ys),
        path.display()
    ))
}

fn run_sweep_k(p: &SweepKParams, out: &Path) -> Result<String> {
    let dataset = load_dataset(p.dataset, p.n_train, p.n_test, p.data_seed)?;
    let params = experiment_params(p.gamma, p.epochs, p.batch_size, p.schedule, &p.hidden, 1, p.d);
    let (rows, logs) = sweep_k(&dataset, &params, &p.k_values, &p.seeds)?;
    let path = write_sweep_csv(out, "k", &rows)?;
    // Per-round accuracy curves for the early/late-phase comparison.
    let log_refs: Vec<&RunLog> = logs.iter().collect();
    write_runlog_csv(out, "curves.csv", &log_refs)?;
    Ok(format!(
        "sweep-k: k ∈ {:?} over {} seeds, means {:?} → {}",
        p.k_values,
        p.seeds.len(),
        rows.iter().map(|r| (r.mean * 1e4).round() / 1e4).collect::<Vec<_>>(),
        path.display()
    ))
}

fn run_landscape(p: &LandscapeParams, seed: u64, out: &Path) -> Result<String> {
    let dataset = load_dataset(p.dataset, p.n_train, p.n_test, p.data_seed)?;
    let batch = if p.batch_size == 0 {
        dataset.train_inputs.len()
    } else {
        p.batch_size
    };
    let cfg = TrainConfig {
        method: TrainMethod::Lookaround { k: p.k, d: 3 },
        gamma: p.gamma,
        epochs: p.epochs,
        batch_size: batch,
        schedule: p.schedule,
        seed,
        hidden: p.hidden.clone(),
        carry_velocity: false,
        parallel_replicas: false,
    };
    // Identical stochastic jitter per replica keeps the three deviations
    // independent, which is the regime where the plane is informative.
    let augs = vec![AugmentationSpec::Jitter { sigma: p.jitter_sigma }; 3];
    let outcome = train(&cfg, &dataset, &augs)?;
    let trio: Vec<ParamVector> = outcome.replicas.iter().map(|m| m.flatten()).collect();
    let proj = plane_projection(&trio[0], &trio[1], &trio[2])?;
    let arch = outcome.final_net.arch.clone();

    let m = p.margin;
    let grid = plane_grid_eval(
        &proj,
        &arch,
        &dataset.test_inputs,
        &dataset.test_labels,
        (-m * proj.u_norm, (1.0 + m) * proj.u_norm),
        (-m * proj.v_norm, (1.0 + m) * proj.v_norm),
        p.resolution,
    )?;

    // Matrix CSV: first row is the x grid, first column the y grid.
    let path = write_csv(out, "plane.csv", &[], |w| {
        let mut header = vec!["y\\x".to_string()];
        header.extend(grid.xs.iter().map(|x| format!("{x:.8}")));
        w.write_record(&header)?;
        for (iy, row) in grid.losses.iter().enumerate() {
            let mut rec = vec![format!("{:.8}", grid.ys[iy])];
            rec.extend(row.iter().map(|l| format!("{l:.8}")));
            w.write_record(&rec)?;
        }
        Ok(())
    })?;

    let loss_of = |w: &ParamVector| -> Result<f64> {
        Ok(Mlp::unflatten(arch.clone(), w.clone())?
            .mean_loss(&dataset.test_inputs, &dataset.test_labels)?)
    };
    let mean_point = ParamVector::mean(&trio)?;
    let mut corner_losses = Vec::new();
    write_csv(
        out,
        "corners.csv",
        &["point", "x", "y", "test_loss"],
        |w| {
            for (name, vec) in [
                ("w_v", &trio[0]),
                ("w_h", &trio[1]),
                ("w_r", &trio[2]),
                ("mean", &mean_point),
            ] {
                let (x, y) = proj.coords_of(vec)?;
                let l = loss_of(vec)?;
                corner_losses.push((name, l));
                w.write_record([
                    name.to_string(),
                    format!("{x:.8}"),
                    format!("{y:.8}"),
                    format!("{l:.8}"),
                ])?;
            }
            Ok(())
        },
    )?;

    if p.svg {
        write_svg_best_effort(out, "plane.svg", || {
            Ok(svg::heatmap("test loss over the replica plane", &grid.losses))
        });
    }

    let mean_loss = corner_losses.last().map(|(_, l)| *l).unwrap_or(f64::NAN);
    let best_corner = corner_losses[..3]
        .iter()
        .map(|(_, l)| *l)
        .fold(f64::INFINITY, f64::min);
    Ok(format!(
        "landscape: {0}×{0} plane grid; mean-point loss {mean_loss:.4} vs best corner {best_corner:.4} → {1}",
        p.resolution,
        path.display()
    ))
}

fn run_soups_collapse(p: &SoupsCollapseParams, out: &Path) -> Result<String> {
    let dataset = load_dataset(p.dataset, p.n_train, p.n_test, p.data_seed)?;
    let base = |seed: u64| TrainConfig {
        method: TrainMethod::Sgd,
        gamma: p.gamma,
        epochs: p.epochs,
        batch_size: p.batch_size,
        schedule: p.schedule,
        seed,
        hidden: p.hidden.clone(),
        carry_velocity: false,
        parallel_replicas: false,
    };
    let identity = [AugmentationSpec::Identity];
    let net_a = train(&base(p.seed_a), &dataset, &identity)?.final_net;
    let net_b = train(&base(p.seed_b), &dataset, &identity)?.final_net;
    let avg = posthoc_average(&[net_a.clone(), net_b.clone()])?;
    let acc = |m: &Mlp| -> Result<f64> {
        Ok(m.accuracy(&dataset.test_inputs, &dataset.test_labels)?)
    };
    let (acc_a, acc_b, acc_avg) = (acc(&net_a)?, acc(&net_b)?, acc(&avg)?);

    write_csv(out, "collapse.csv", &["model", "test_accuracy"], |w| {
        for (name, a) in [("net_a", acc_a), ("net_b", acc_b), ("average", acc_avg)] {
            w.write_record([name.to_string(), format!("{a:.6}")])?;
        }
        Ok(())
    })?;

    // Small-lr replica-average run: the mean net must track the replica mean.
    let mut small = base(p.data_seed.wrapping_add(7));
    small.method = TrainMethod::Lookaround { k: p.k, d: p.d };
    small.gamma = p.small_lr_gamma;
    small.epochs = p.small_lr_epochs;
    let augs = make_augmentations(p.dataset, p.d)?;
    let outcome = train(&small, &dataset, &augs)?;
    let mut max_gap = 0.0f64;
    let path = write_csv(
        out,
        "locality.csv",
        &["round", "step", "replica_mean_acc", "mean_net_acc", "gap"],
        |w| {
            for rec in &outcome.log.records {
                let rm = rec.test_acc_per_replica.iter().sum::<f64>()
                    / rec.test_acc_per_replica.len() as f64;
                let gap = (rec.test_acc_mean_net - rm).abs();
                max_gap = max_gap.max(gap);
                w.write_record([
                    rec.round.to_string(),
                    rec.step.to_string(),
                    format!("{rm:.6}"),
                    format!("{:.6}", rec.test_acc_mean_net),
                    format!("{gap:.6}"),
                ])?;
            }
            Ok(())
        },
    )?;
    Ok(format!(
        "soups-collapse: independent nets {acc_a:.3}/{acc_b:.3} average to {acc_avg:.3}; \
         replica-average max sync gap {max_gap:.4} → {}",
        path.display()
    ))
}
