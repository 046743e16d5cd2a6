//! Ground-truth evaluation: policy metrics, parameter sweeps, the
//! goal-conditioned downstream protocol, and solve-time scaling.

use std::time::Instant;

use ndarray::Array1;

use crate::agent::{estimate_model, value_iteration, CountTable, UnvisitedModel};
use crate::env::{random_mdp, EnvSpec, Sampler};
use crate::error::Result;
use crate::mdp::{
    induce_chain, spectral_info, state_action_distribution, stationary_distribution, PolicyTable,
};
use crate::objective::{
    entropy_lower_bound, solve_objective, ObjectiveKind, ObjectiveParams, SolveOptions,
};

/// Normalized entropy lower bounds certified by the three distance
/// objectives (cap-free inner infimum).
#[derive(Debug, Clone, Copy)]
pub struct BoundValues {
    pub infinity: f64,
    pub frobenius: f64,
    pub column_sum: f64,
}

impl BoundValues {
    pub fn max(&self) -> f64 {
        self.infinity.max(self.frobenius).max(self.column_sum)
    }
}

/// Metrics of a fixed policy measured against the true model. Quantities
/// that need a steady state are absent when the induced chain has none.
#[derive(Debug, Clone)]
pub struct PolicyMetrics {
    /// Normalized steady-state entropy.
    pub h_state: Option<f64>,
    /// Normalized entropy of the stationary state-action distribution.
    pub h_state_action: Option<f64>,
    /// Probability of the least favorable state.
    pub min_d: Option<f64>,
    pub state_distribution: Option<Array1<f64>>,
    pub spectral_gap: f64,
    /// Steps to total-variation 0.25 from the worst start, when the chain
    /// mixes within the internal cap.
    pub mixing_time: Option<usize>,
    pub bounds: BoundValues,
}

pub fn evaluate_policy(env: &EnvSpec, policy: &PolicyTable, opts: &SolveOptions) -> Result<PolicyMetrics> {
    let mdp = &env.mdp;
    let chain = induce_chain(mdp, policy)?;
    let spec = spectral_info(&chain)?;
    let mixing = crate::mdp::mixing_time(&chain, 0.25, 10_000).ok();

    let stationary = stationary_distribution(&chain, 1e-10, 100_000).ok();
    let (h_state, h_state_action, min_d, dist) = match &stationary {
        Some(d) => {
            let dsa = state_action_distribution(mdp, policy, d)?;
            (
                Some(d.entropy_normalized()),
                Some(dsa.entropy_normalized()),
                Some(d.min_prob()),
                Some(d.probs().clone()),
            )
        }
        None => (None, None, None, None),
    };

    let free = ObjectiveParams::default();
    let bounds = BoundValues {
        infinity: entropy_lower_bound(mdp, policy, ObjectiveKind::Infinity, free, opts)?.bound_normalized,
        frobenius: entropy_lower_bound(mdp, policy, ObjectiveKind::Frobenius, free, opts)?.bound_normalized,
        column_sum: entropy_lower_bound(mdp, policy, ObjectiveKind::ColumnSum, free, opts)?.bound_normalized,
    };

    Ok(PolicyMetrics {
        h_state,
        h_state_action,
        min_d,
        state_distribution: dist,
        spectral_gap: spec.spectral_gap,
        mixing_time: mixing,
        bounds,
    })
}

#[derive(Debug, Clone)]
pub struct XiSweepPoint {
    pub xi: f64,
    pub h_state: f64,
    pub h_state_action: f64,
    pub objective_value: f64,
    pub policy: PolicyTable,
}

/// Exact solves along an action-floor grid.
pub fn sweep_xi(
    env: &EnvSpec,
    kind: ObjectiveKind,
    xi_grid: &[f64],
    zeta: f64,
    opts: &SolveOptions,
) -> Result<Vec<XiSweepPoint>> {
    let mdp = &env.mdp;
    let mut out = Vec::with_capacity(xi_grid.len());
    for &xi in xi_grid {
        let sol = solve_objective(mdp, kind, ObjectiveParams { xi, zeta }, opts)?;
        let chain = induce_chain(mdp, &sol.policy)?;
        let d = stationary_distribution(&chain, 1e-10, 100_000)?;
        let dsa = state_action_distribution(mdp, &sol.policy, &d)?;
        out.push(XiSweepPoint {
            xi,
            h_state: d.entropy_normalized(),
            h_state_action: dsa.entropy_normalized(),
            objective_value: sol.objective_value,
            policy: sol.policy,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct ZetaSweepPoint {
    pub zeta: f64,
    pub h_state: f64,
    pub spectral_gap: f64,
    pub state_distribution: Array1<f64>,
    pub policy: PolicyTable,
}

/// Exact solves along a target-cap grid; only the two objectives with a
/// target matrix support the cap.
pub fn sweep_zeta(
    env: &EnvSpec,
    kind: ObjectiveKind,
    zeta_grid: &[f64],
    xi: f64,
    opts: &SolveOptions,
) -> Result<Vec<ZetaSweepPoint>> {
    if !matches!(kind, ObjectiveKind::Infinity | ObjectiveKind::Frobenius) {
        return Err(crate::ExploreError::InvalidParam(format!(
            "zeta sweep needs a target-matrix objective, got {}",
            kind.name()
        )));
    }
    let mdp = &env.mdp;
    let mut out = Vec::with_capacity(zeta_grid.len());
    for &zeta in zeta_grid {
        let sol = solve_objective(mdp, kind, ObjectiveParams { xi, zeta }, opts)?;
        let chain = induce_chain(mdp, &sol.policy)?;
        let spec = spectral_info(&chain)?;
        let d = stationary_distribution(&chain, 1e-10, 100_000)?;
        out.push(ZetaSweepPoint {
            zeta,
            h_state: d.entropy_normalized(),
            spectral_gap: spec.spectral_gap,
            state_distribution: d.probs().clone(),
            policy: sol.policy,
        });
    }
    Ok(out)
}

/// State visited least often by the uniform-random policy; ties resolve to
/// the lowest index.
pub fn hardest_state(env: &EnvSpec, seed: u64, n_samples: usize) -> Result<usize> {
    let mdp = &env.mdp;
    let policy = PolicyTable::uniform(mdp.n_states(), mdp.n_actions());
    let mut sampler = Sampler::new(env.clone(), seed);
    let mut visits = vec![0u64; mdp.n_states()];
    visits[sampler.current_state()] += 1;
    for _ in 0..n_samples {
        let (_, _, s2) = sampler.sample_policy_step(&policy)?;
        visits[s2] += 1;
    }
    Ok(visits
        .iter()
        .enumerate()
        .min_by_key(|&(_, &v)| v)
        .map(|(i, _)| i)
        .expect("at least one state"))
}

#[derive(Debug, Clone, Copy)]
pub struct GoalTaskResult {
    pub horizon: usize,
    /// Mean discounted return of the greedy policy (reward 1 on each goal
    /// visit).
    pub mean_return: f64,
    /// Fraction of runs whose rollout reaches the goal within the horizon.
    pub success_rate: f64,
}

/// Episodes of experience collected per (run, horizon) before planning.
pub const GOAL_EVAL_EPISODES: usize = 30;

/// Downstream protocol: per run, collect `GOAL_EVAL_EPISODES` episodes of
/// `horizon` steps each with the exploration policy (restarting from d0 at
/// every episode boundary), fit a model, plan toward the hardest state by
/// value iteration, and roll the greedy policy out once on the true
/// environment; success means reaching the goal within `horizon` steps.
pub fn goal_conditioned_eval(
    env: &EnvSpec,
    exploration_policy: &PolicyTable,
    horizons: &[usize],
    n_runs: usize,
    gamma: f64,
    seed: u64,
) -> Result<Vec<GoalTaskResult>> {
    let mdp = &env.mdp;
    let (s, a) = (mdp.n_states(), mdp.n_actions());
    let goal = hardest_state(env, seed, 100_000)?;
    let mut reward = Array1::zeros(s);
    reward[goal] = 1.0;

    let mut out = Vec::with_capacity(horizons.len());
    for (hi, &horizon) in horizons.iter().enumerate() {
        let mut successes = 0usize;
        let mut returns = 0.0;
        for run in 0..n_runs {
            let run_seed = seed
                .wrapping_add(1 + run as u64)
                .wrapping_add((hi as u64) << 32);
            let mut sampler = Sampler::new(env.clone(), run_seed);
            let mut counts = CountTable::new(s, a);
            for _ in 0..GOAL_EVAL_EPISODES {
                sampler.reset();
                for _ in 0..horizon {
                    let (ss, aa, s2) = sampler.sample_policy_step(exploration_policy)?;
                    counts.record(ss, aa, s2);
                }
            }
            // Self-loop fallback: planning for exploitation must not treat
            // unvisited pairs as teleports the way an exploration objective
            // benefits from.
            let model = estimate_model(&counts, UnvisitedModel::SelfLoop);
            let (_, greedy) = value_iteration(&model, &reward, gamma, 1e-8, 10_000);

            // single greedy rollout from a fresh initial state
            let mut rollout = Sampler::new(env.clone(), run_seed.wrapping_add(0x9e3779b97f4a7c15));
            let mut reached = rollout.current_state() == goal;
            let mut ret = if reached { 1.0 } else { 0.0 };
            for t in 0..horizon {
                let (_, _, s2) = rollout.sample_policy_step(&greedy)?;
                if s2 == goal {
                    ret += gamma.powi(t as i32 + 1);
                    reached = true;
                }
            }
            if reached {
                successes += 1;
            }
            returns += ret;
        }
        out.push(GoalTaskResult {
            horizon,
            mean_return: returns / n_runs as f64,
            success_rate: successes as f64 / n_runs as f64,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct TimingRow {
    pub n_states: usize,
    pub n_actions: usize,
    /// Decision variables of the formulation.
    pub variables: usize,
    pub kind: ObjectiveKind,
    pub seconds: f64,
    /// False when the solve failed or hit its iteration cap.
    pub ok: bool,
}

pub fn objective_variable_count(n_states: usize, n_actions: usize, kind: ObjectiveKind) -> usize {
    match kind {
        ObjectiveKind::ColumnSum | ObjectiveKind::Dual => n_states + n_states * n_actions,
        _ => n_states * n_states + n_states * n_actions,
    }
}

/// Wall-clock scaling over a family of seeded random instances.
pub fn solve_time_study(
    sizes: &[(usize, usize)],
    kinds: &[ObjectiveKind],
    seed: u64,
    opts: &SolveOptions,
) -> Result<Vec<TimingRow>> {
    let mut out = Vec::new();
    for (idx, &(s, a)) in sizes.iter().enumerate() {
        let branching = 4.min(s);
        let env = random_mdp(s, a, branching, seed.wrapping_add(idx as u64))?;
        for &kind in kinds {
            let start = Instant::now();
            let ok = solve_objective(&env.mdp, kind, ObjectiveParams::default(), opts).is_ok();
            out.push(TimingRow {
                n_states: s,
                n_actions: a,
                variables: objective_variable_count(s, a, kind),
                kind,
                seconds: start.elapsed().as_secs_f64(),
                ok,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests;
