//! Subcommand implementations. Every command is a pure function of the
//! resolved configuration (up to wall-clock timing columns) and writes its
//! artifacts under the configured output root.

use std::path::{Path, PathBuf};

use anyhow::{bail, Result};
use ndarray::Array2;

use explore_core::agent::{
    run_countbased, run_ideal, run_maxent, CountBasedConfig, IdealConfig, MaxEntConfig, RunRecord,
};
use explore_core::env::{EnvSpec, Sampler};
use explore_core::eval::{
    evaluate_policy, goal_conditioned_eval, solve_time_study, sweep_xi, sweep_zeta,
};
use explore_core::mdp::PolicyTable;
use explore_core::objective::{
    solve_objective, ObjectiveKind, ObjectiveParams, SolveOptions,
};

use crate::artifact::{fmt, mean_ci, write_csv, write_svg_lines, Series};
use crate::config::ExperimentConfig;

fn out_path(cfg: &ExperimentConfig, parts: &[&str]) -> PathBuf {
    let mut p = cfg.out_dir.clone();
    for part in parts {
        p.push(part);
    }
    p
}

/// The target cap only exists for the two objectives with a target matrix;
/// the other two always run uncapped.
fn params_for(cfg: &ExperimentConfig, kind: ObjectiveKind) -> ObjectiveParams {
    let zeta = match kind {
        ObjectiveKind::Infinity | ObjectiveKind::Frobenius => cfg.zeta,
        ObjectiveKind::ColumnSum | ObjectiveKind::Dual => 1.0,
    };
    ObjectiveParams { xi: cfg.xi, zeta }
}

fn write_policy(path: &Path, policy: &PolicyTable) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut text = String::new();
    for row in policy.probs().rows() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.12e}")).collect();
        text.push_str(&cells.join(" "));
        text.push('\n');
    }
    std::fs::write(path, text)?;
    Ok(())
}

/// `solve`: exact solves, one CSV row per objective kind.
/// Columns: kind,xi,zeta,objective,h_state,h_state_action,min_d,gap,bound
pub fn cmd_solve(cfg: &ExperimentConfig) -> Result<()> {
    let env = cfg.build_env()?;
    let opts = SolveOptions::default();
    let mut rows = Vec::new();
    for &kind in &cfg.kinds {
        let params = params_for(cfg, kind);
        let sol = solve_objective(&env.mdp, kind, params, &opts)?;
        let metrics = evaluate_policy(&env, &sol.policy, &opts)?;
        let bound = match kind {
            ObjectiveKind::Infinity => metrics.bounds.infinity,
            ObjectiveKind::Frobenius => metrics.bounds.frobenius,
            ObjectiveKind::ColumnSum => metrics.bounds.column_sum,
            ObjectiveKind::Dual => metrics.bounds.max(),
        };
        rows.push(vec![
            kind.name().to_string(),
            fmt(params.xi),
            fmt(params.zeta),
            fmt(sol.objective_value),
            fmt(metrics.h_state.unwrap_or(f64::NAN)),
            fmt(metrics.h_state_action.unwrap_or(f64::NAN)),
            fmt(metrics.min_d.unwrap_or(f64::NAN)),
            fmt(metrics.spectral_gap),
            fmt(bound),
        ]);
        write_policy(
            &out_path(cfg, &["solve", &format!("policy-{}.txt", kind.name())]),
            &sol.policy,
        )?;
        println!(
            "{}: objective {:.6}, h_state {:.4}",
            kind.name(),
            sol.objective_value,
            metrics.h_state.unwrap_or(f64::NAN)
        );
    }
    write_csv(
        &out_path(cfg, &["solve", "solutions.csv"]),
        &["kind", "xi", "zeta", "objective", "h_state", "h_state_action", "min_d", "gap", "bound"],
        &rows,
    )
}

fn run_one_seed(env: &EnvSpec, cfg: &ExperimentConfig, seed: u64) -> explore_core::Result<RunRecord> {
    let mut sampler = Sampler::new(env.clone(), seed);
    match cfg.algorithm.as_str() {
        "ideal" => run_ideal(
            &mut sampler,
            &IdealConfig {
                kind: cfg.kinds[0],
                params: params_for(cfg, cfg.kinds[0]),
                batch_n: cfg.batch_n,
                max_iters: cfg.max_iters,
                ..IdealConfig::default()
            },
        ),
        "maxent" => run_maxent(
            &mut sampler,
            &MaxEntConfig {
                eta: cfg.eta,
                epsilon: cfg.epsilon,
                batch_n: cfg.batch_n,
                max_iters: cfg.max_iters,
                gamma: cfg.gamma,
            },
        ),
        "countbased" => run_countbased(
            &mut sampler,
            &CountBasedConfig {
                epsilon: cfg.epsilon,
                batch_n: cfg.batch_n,
                max_iters: cfg.max_iters,
                gamma: cfg.gamma,
            },
        ),
        other => Err(explore_core::ExploreError::InvalidParam(format!(
            "explore cannot run algorithm '{other}'"
        ))),
    }
}

/// `explore`: seeded learning runs with per-seed CSVs and a mean ± 95% CI
/// aggregate. Per-seed columns: iter,samples,h_state,h_state_action,min_d,
/// spectral_gap,model_error,solve_seconds. Aggregate columns:
/// iter,n_seeds,h_state_mean,h_state_ci95,min_d_mean,min_d_ci95
pub fn cmd_explore(cfg: &ExperimentConfig) -> Result<()> {
    if cfg.algorithm == "exact-solve" {
        bail!("explore needs a learning algorithm; use the solve subcommand instead");
    }
    let env = cfg.build_env()?;
    let seeds: Vec<u64> = (0..cfg.n_seeds as u64).map(|i| cfg.base_seed + i).collect();

    // bounded worker pool over seed indices; results collected in order
    let mut results: Vec<Option<explore_core::Result<RunRecord>>> = Vec::new();
    results.resize_with(seeds.len(), || None);
    let next = std::sync::atomic::AtomicUsize::new(0);
    let slots: Vec<std::sync::Mutex<Option<explore_core::Result<RunRecord>>>> =
        seeds.iter().map(|_| std::sync::Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..cfg.jobs.max(1).min(seeds.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                if i >= seeds.len() {
                    break;
                }
                let rec = run_one_seed(&env, cfg, seeds[i]);
                *slots[i].lock().unwrap() = Some(rec);
            });
        }
    });
    for (i, slot) in slots.into_iter().enumerate() {
        results[i] = slot.into_inner().unwrap();
    }

    let dir = format!("explore-{}-{}", cfg.algorithm, cfg.env);
    let mut ok_records = Vec::new();
    for (i, res) in results.into_iter().enumerate() {
        match res.expect("every seed slot is filled") {
            Ok(rec) => {
                let rows: Vec<Vec<String>> = (0..rec.h_state.len())
                    .map(|it| {
                        vec![
                            it.to_string(),
                            rec.samples[it].to_string(),
                            fmt(rec.h_state[it]),
                            fmt(rec.h_state_action[it]),
                            fmt(rec.min_d[it]),
                            fmt(rec.spectral_gap[it]),
                            fmt(rec.model_error[it]),
                            fmt(rec.solve_seconds[it]),
                        ]
                    })
                    .collect();
                write_csv(
                    &out_path(cfg, &[&dir, &format!("seed_{i:03}.csv")]),
                    &[
                        "iter",
                        "samples",
                        "h_state",
                        "h_state_action",
                        "min_d",
                        "spectral_gap",
                        "model_error",
                        "solve_seconds",
                    ],
                    &rows,
                )?;
                ok_records.push(rec);
            }
            Err(e) => eprintln!("seed {i} failed: {e}"),
        }
    }
    if ok_records.is_empty() {
        bail!("every seed failed");
    }

    let max_len = ok_records.iter().map(|r| r.h_state.len()).max().unwrap_or(0);
    let mut agg_rows = Vec::with_capacity(max_len);
    let mut mean_series = Vec::with_capacity(max_len);
    for it in 0..max_len {
        // a converged run keeps its last value for the remaining iterations
        let hs: Vec<f64> =
            ok_records.iter().map(|r| *r.h_state.get(it).unwrap_or_else(|| r.h_state.last().unwrap())).collect();
        let ms: Vec<f64> =
            ok_records.iter().map(|r| *r.min_d.get(it).unwrap_or_else(|| r.min_d.last().unwrap())).collect();
        let (hm, hc) = mean_ci(&hs);
        let (mm, mc) = mean_ci(&ms);
        agg_rows.push(vec![
            it.to_string(),
            hs.len().to_string(),
            fmt(hm),
            fmt(hc),
            fmt(mm),
            fmt(mc),
        ]);
        mean_series.push((it as f64, hm));
    }
    write_csv(
        &out_path(cfg, &[&dir, "aggregate.csv"]),
        &["iter", "n_seeds", "h_state_mean", "h_state_ci95", "min_d_mean", "min_d_ci95"],
        &agg_rows,
    )?;
    write_svg_lines(
        &out_path(cfg, &[&dir, "h_state.svg"]),
        &format!("{} on {}", cfg.algorithm, cfg.env),
        "iteration",
        "normalized state entropy",
        &[Series { label: cfg.algorithm.clone(), points: mean_series }],
    )?;
    let last = agg_rows.last().unwrap();
    println!(
        "{} seeds ok; final h_state {} ± {}",
        ok_records.len(),
        last[2],
        last[3]
    );
    Ok(())
}

/// `sweep-xi`: exact solves over an action-floor grid, one series per kind.
/// Columns: kind,xi,objective,h_state,h_state_action
pub fn cmd_sweep_xi(cfg: &ExperimentConfig, grid_points: usize) -> Result<()> {
    let env = cfg.build_env()?;
    let opts = SolveOptions::default();
    let n_actions = env.mdp.n_actions() as f64;
    let grid: Vec<f64> = (0..grid_points)
        .map(|i| i as f64 / (grid_points.saturating_sub(1).max(1)) as f64 / n_actions)
        .collect();
    let mut rows = Vec::new();
    let mut series = Vec::new();
    for &kind in &cfg.kinds {
        let zeta = params_for(cfg, kind).zeta;
        let points = sweep_xi(&env, kind, &grid, zeta, &opts)?;
        series.push(Series {
            label: kind.name().to_string(),
            points: points.iter().map(|p| (p.xi, p.h_state)).collect(),
        });
        for p in points {
            rows.push(vec![
                kind.name().to_string(),
                fmt(p.xi),
                fmt(p.objective_value),
                fmt(p.h_state),
                fmt(p.h_state_action),
            ]);
        }
    }
    write_csv(
        &out_path(cfg, &["sweep-xi", "sweep.csv"]),
        &["kind", "xi", "objective", "h_state", "h_state_action"],
        &rows,
    )?;
    write_svg_lines(
        &out_path(cfg, &["sweep-xi", "h_state.svg"]),
        &format!("action floor sweep on {}", cfg.env),
        "xi",
        "normalized state entropy",
        &series,
    )?;
    println!("sweep-xi: {} kinds x {} grid points", cfg.kinds.len(), grid_points);
    Ok(())
}

/// `sweep-zeta`: exact solves over a target-cap grid (objectives with a
/// target matrix only). Columns: kind,zeta,h_state,spectral_gap
pub fn cmd_sweep_zeta(cfg: &ExperimentConfig, grid_points: usize) -> Result<()> {
    let env = cfg.build_env()?;
    let opts = SolveOptions::default();
    let n_states = env.mdp.n_states() as f64;
    let lo = 1.0 / n_states;
    let grid: Vec<f64> = (0..grid_points)
        .map(|i| lo + (1.0 - lo) * i as f64 / (grid_points.saturating_sub(1).max(1)) as f64)
        .collect();
    let mut rows = Vec::new();
    let mut series = Vec::new();
    for &kind in &cfg.kinds {
        if !matches!(kind, ObjectiveKind::Infinity | ObjectiveKind::Frobenius) {
            bail!("sweep-zeta supports only the infinity and frobenius objectives");
        }
        let points = sweep_zeta(&env, kind, &grid, cfg.xi, &opts)?;
        series.push(Series {
            label: kind.name().to_string(),
            points: points.iter().map(|p| (p.zeta, p.spectral_gap)).collect(),
        });
        let heat_rows: Vec<Vec<String>> = points
            .iter()
            .map(|p| {
                let mut row = vec![fmt(p.zeta)];
                row.extend(p.state_distribution.iter().map(|v| fmt(*v)));
                row
            })
            .collect();
        let mut heat_header: Vec<String> = vec!["zeta".into()];
        heat_header.extend((0..env.mdp.n_states()).map(|s| format!("d_{s}")));
        write_csv(
            &out_path(cfg, &["sweep-zeta", &format!("dist-{}.csv", kind.name())]),
            &heat_header.iter().map(|s| s.as_str()).collect::<Vec<_>>(),
            &heat_rows,
        )?;
        for p in points {
            rows.push(vec![
                kind.name().to_string(),
                fmt(p.zeta),
                fmt(p.h_state),
                fmt(p.spectral_gap),
            ]);
        }
    }
    write_csv(
        &out_path(cfg, &["sweep-zeta", "sweep.csv"]),
        &["kind", "zeta", "h_state", "spectral_gap"],
        &rows,
    )?;
    write_svg_lines(
        &out_path(cfg, &["sweep-zeta", "spectral_gap.svg"]),
        &format!("target cap sweep on {}", cfg.env),
        "zeta",
        "spectral gap",
        &series,
    )?;
    println!("sweep-zeta: {} kinds x {} grid points", cfg.kinds.len(), grid_points);
    Ok(())
}

/// `goal`: learns an exploration policy, then measures downstream
/// goal-reaching against the uniform-random baseline.
/// Columns: policy,horizon,success_rate,mean_return
pub fn cmd_goal(cfg: &ExperimentConfig, horizons: &[usize]) -> Result<()> {
    let env = cfg.build_env()?;
    let explorer = match cfg.algorithm.as_str() {
        "exact-solve" => {
            let params = params_for(cfg, cfg.kinds[0]);
            solve_objective(&env.mdp, cfg.kinds[0], params, &SolveOptions::default())?.policy
        }
        _ => run_one_seed(&env, cfg, cfg.base_seed)?.final_policy,
    };
    let uniform = PolicyTable::uniform(env.mdp.n_states(), env.mdp.n_actions());
    let mut rows = Vec::new();
    let mut series = Vec::new();
    for (label, policy) in [(cfg.algorithm.as_str(), &explorer), ("uniform", &uniform)] {
        let results =
            goal_conditioned_eval(&env, policy, horizons, cfg.n_runs, cfg.gamma, cfg.base_seed)?;
        series.push(Series {
            label: label.to_string(),
            points: results.iter().map(|r| (r.horizon as f64, r.success_rate)).collect(),
        });
        for r in &results {
            rows.push(vec![
                label.to_string(),
                r.horizon.to_string(),
                fmt(r.success_rate),
                fmt(r.mean_return),
            ]);
        }
    }
    write_csv(
        &out_path(cfg, &["goal", "success.csv"]),
        &["policy", "horizon", "success_rate", "mean_return"],
        &rows,
    )?;
    write_svg_lines(
        &out_path(cfg, &["goal", "success.svg"]),
        &format!("goal-conditioned evaluation on {}", cfg.env),
        "horizon",
        "success rate",
        &series,
    )?;
    for row in &rows {
        println!("{} h={}: success {}", row[0], row[1], row[2]);
    }
    Ok(())
}

/// `bench`: wall-clock solve times over a random-instance size ladder.
/// Columns: n_states,n_actions,variables,kind,seconds,ok
pub fn cmd_bench(cfg: &ExperimentConfig, sizes: &[(usize, usize)]) -> Result<()> {
    let opts = SolveOptions::default();
    let rows_data = solve_time_study(sizes, &cfg.kinds, cfg.base_seed, &opts)?;
    let mut rows = Vec::new();
    let mut series: Vec<Series> =
        cfg.kinds.iter().map(|k| Series { label: k.name().to_string(), points: vec![] }).collect();
    for r in &rows_data {
        rows.push(vec![
            r.n_states.to_string(),
            r.n_actions.to_string(),
            r.variables.to_string(),
            r.kind.name().to_string(),
            fmt(r.seconds),
            r.ok.to_string(),
        ]);
        if let Some(s) = series.iter_mut().find(|s| s.label == r.kind.name()) {
            s.points.push((r.variables as f64, r.seconds));
        }
        println!("{} ({} vars): {:.4}s", r.kind.name(), r.variables, r.seconds);
    }
    write_csv(
        &out_path(cfg, &["bench", "times.csv"]),
        &["n_states", "n_actions", "variables", "kind", "seconds", "ok"],
        &rows,
    )?;
    write_svg_lines(
        &out_path(cfg, &["bench", "times.svg"]),
        "solve time vs problem size",
        "optimization variables",
        "seconds",
        &series,
    )?;
    Ok(())
}

/// Round-trips a policy table written by [`write_policy`]; used by tests.
#[allow(dead_code)]
pub fn read_policy(path: &Path) -> Result<PolicyTable> {
    let text = std::fs::read_to_string(path)?;
    let rows: Vec<Vec<f64>> = text
        .lines()
        .map(|l| l.split_whitespace().map(|v| v.parse::<f64>().unwrap()).collect())
        .collect();
    let (s, a) = (rows.len(), rows.first().map_or(0, |r| r.len()));
    let mut probs = Array2::zeros((s, a));
    for (i, row) in rows.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            probs[[i, j]] = *v;
        }
    }
    Ok(PolicyTable::new(probs)?)
}
