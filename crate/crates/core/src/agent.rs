//! Model-based exploration agents: the iterative entropy-objective loop and
//! the two baselines it is compared against (mixture-of-policies entropy
//! maximization and count-based bonuses).

use ndarray::{Array1, Array2, Array3};
use rand::Rng;

use crate::env::Sampler;
use crate::error::Result;
use crate::mdp::{PolicyTable, TabularMdp};
use crate::objective::{solve_objective, ObjectiveKind, ObjectiveParams, SolveOptions};

/// Transition counts collected while exploring.
#[derive(Debug, Clone)]
pub struct CountTable {
    sas: Array3<u64>,
    sa: Array2<u64>,
}

impl CountTable {
    pub fn new(n_states: usize, n_actions: usize) -> Self {
        Self { sas: Array3::zeros((n_states, n_actions, n_states)), sa: Array2::zeros((n_states, n_actions)) }
    }

    pub fn record(&mut self, s: usize, a: usize, s2: usize) {
        self.sas[[s, a, s2]] += 1;
        self.sa[[s, a]] += 1;
    }

    pub fn pair_visits(&self, s: usize, a: usize) -> u64 {
        self.sa[[s, a]]
    }

    pub fn state_visits(&self, s: usize) -> u64 {
        self.sa.row(s).sum()
    }

    pub fn min_pair_visits(&self) -> u64 {
        *self.sa.iter().min().unwrap_or(&0)
    }

    pub fn n_states(&self) -> usize {
        self.sa.nrows()
    }

    pub fn n_actions(&self) -> usize {
        self.sa.ncols()
    }
}

/// Row filler for state-action pairs that were never sampled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnvisitedModel {
    Uniform,
    SelfLoop,
}

/// Maximum-likelihood transition model with the chosen fallback rows.
pub fn estimate_model(counts: &CountTable, fallback: UnvisitedModel) -> Array3<f64> {
    let (s, a) = (counts.n_states(), counts.n_actions());
    let mut t = Array3::zeros((s, a, s));
    for i in 0..s {
        for j in 0..a {
            let total = counts.sa[[i, j]];
            if total == 0 {
                match fallback {
                    UnvisitedModel::Uniform => t.slice_mut(ndarray::s![i, j, ..]).fill(1.0 / s as f64),
                    UnvisitedModel::SelfLoop => t[[i, j, i]] = 1.0,
                }
            } else {
                for k in 0..s {
                    t[[i, j, k]] = counts.sas[[i, j, k]] as f64 / total as f64;
                }
            }
        }
    }
    t
}

/// Stationary distribution of the chain damped toward uniform; the damping
/// makes the iteration a contraction, so it converges on any chain an agent
/// can build mid-run (including periodic or weakly connected ones).
pub fn damped_stationary(chain: &Array2<f64>, damping: f64, start: Option<&Array1<f64>>) -> Array1<f64> {
    let n = chain.nrows();
    let uniform_mass = (1.0 - damping) / n as f64;
    let mut d = match start {
        Some(v) => v.clone(),
        None => Array1::from_elem(n, 1.0 / n as f64),
    };
    for _ in 0..100_000 {
        let mut next = Array1::from_elem(n, uniform_mass);
        for i in 0..n {
            let di = d[i] * damping;
            if di > 0.0 {
                for j in 0..n {
                    next[j] += di * chain[[i, j]];
                }
            }
        }
        let res: f64 = next.iter().zip(d.iter()).map(|(a, b)| (a - b).abs()).sum();
        d = next;
        if res < 1e-12 {
            break;
        }
    }
    d
}

const METRIC_DAMPING: f64 = 0.999;

/// Per-iteration quality of a policy under the true dynamics: normalized
/// state entropy, normalized state-action entropy, min d, spectral gap.
struct PolicySnapshot {
    h_state: f64,
    h_state_action: f64,
    min_d: f64,
    spectral_gap: f64,
}

fn joint_entropy_normalized(d: &Array1<f64>, policy: &PolicyTable) -> f64 {
    let (s, a) = (policy.n_states(), policy.n_actions());
    let mut nats = 0.0;
    for i in 0..s {
        for j in 0..a {
            let p = d[i] * policy.probs()[[i, j]];
            if p > 0.0 {
                nats -= p * p.ln();
            }
        }
    }
    nats / ((s * a) as f64).ln()
}

fn policy_metrics(mdp: &TabularMdp, policy: &PolicyTable) -> Result<PolicySnapshot> {
    let chain = crate::mdp::induce_chain(mdp, policy)?;
    let d = damped_stationary(chain.matrix(), METRIC_DAMPING, None);
    let (nats, _) = crate::mdp::entropy(d.view())?;
    Ok(PolicySnapshot {
        h_state: nats / (mdp.n_states() as f64).ln(),
        h_state_action: joint_entropy_normalized(&d, policy),
        min_d: d.iter().cloned().fold(f64::INFINITY, f64::min),
        // The gap is a diagnostic; a failed eigensolve on a transient
        // mid-learning chain must not abort the run.
        spectral_gap: crate::mdp::spectral_info(&chain)
            .map_or(f64::NAN, |i| i.spectral_gap),
    })
}

/// Frobenius norm of the gap between the true transition tensor and an
/// estimate of it.
pub fn model_error(truth: &Array3<f64>, estimate: &Array3<f64>) -> f64 {
    truth
        .iter()
        .zip(estimate.iter())
        .map(|(t, e)| (t - e) * (t - e))
        .sum::<f64>()
        .sqrt()
}

/// One learning run: per-iteration quality of the exploration policy under
/// the true dynamics, plus the artifacts needed to keep using it.
#[derive(Debug, Clone)]
pub struct RunRecord {
    /// Environment steps consumed up to and including each iteration.
    pub samples: Vec<usize>,
    /// Normalized steady-state entropy per iteration.
    pub h_state: Vec<f64>,
    /// Normalized steady-state entropy over state-action pairs per iteration.
    pub h_state_action: Vec<f64>,
    /// Least-favorable state probability per iteration.
    pub min_d: Vec<f64>,
    /// Spectral gap of the induced chain per iteration.
    pub spectral_gap: Vec<f64>,
    /// Frobenius distance between the true dynamics and the running model
    /// estimate per iteration.
    pub model_error: Vec<f64>,
    /// Wall-clock seconds spent in planning/solving per iteration.
    pub solve_seconds: Vec<f64>,
    pub final_policy: PolicyTable,
    pub steps: usize,
    pub solver_failures: usize,
    pub converged_at: Option<usize>,
    /// Transition counts accumulated over the run.
    pub counts: CountTable,
}

impl RunRecord {
    fn new(s: usize, a: usize, cap: usize, policy: PolicyTable) -> Self {
        Self {
            samples: Vec::with_capacity(cap),
            h_state: Vec::with_capacity(cap),
            h_state_action: Vec::with_capacity(cap),
            min_d: Vec::with_capacity(cap),
            spectral_gap: Vec::with_capacity(cap),
            model_error: Vec::with_capacity(cap),
            solve_seconds: Vec::with_capacity(cap),
            final_policy: policy,
            steps: 0,
            solver_failures: 0,
            converged_at: None,
            counts: CountTable::new(s, a),
        }
    }
}

fn collect(sampler: &mut Sampler, policy: &PolicyTable, n: usize, counts: &mut CountTable) -> Result<()> {
    for _ in 0..n {
        let (s, a, s2) = sampler.sample_policy_step(policy)?;
        counts.record(s, a, s2);
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct IdealConfig {
    pub kind: ObjectiveKind,
    pub params: ObjectiveParams,
    /// Steps collected per iteration.
    pub batch_n: usize,
    pub max_iters: usize,
    /// Skip model estimation and hand the solver the true dynamics.
    pub oracle_model: bool,
    /// Early-stop threshold on the policy change between iterations, once
    /// every state-action pair has been visited at least once.
    pub policy_tol: f64,
    pub opts: SolveOptions,
}

impl Default for IdealConfig {
    fn default() -> Self {
        Self {
            kind: ObjectiveKind::Frobenius,
            params: ObjectiveParams { xi: 0.1, zeta: 0.7 },
            batch_n: 10,
            max_iters: 300,
            oracle_model: false,
            policy_tol: 1e-6,
            opts: SolveOptions::default(),
        }
    }
}

/// Iterative model-based loop: act, re-estimate the model, re-solve the
/// entropy objective on the estimate, repeat. A failed solve keeps the
/// previous policy for another round of data collection.
pub fn run_ideal(sampler: &mut Sampler, cfg: &IdealConfig) -> Result<RunRecord> {
    let mdp = sampler.env().mdp.clone();
    let (s, a) = (mdp.n_states(), mdp.n_actions());
    let mut counts = CountTable::new(s, a);
    let mut policy = PolicyTable::uniform(s, a);
    let mut record = RunRecord::new(s, a, cfg.max_iters, policy.clone());
    let mut last_model_err = f64::NAN;

    for iter in 0..cfg.max_iters {
        let mut solve_secs = 0.0;
        if record.converged_at.is_none() {
            collect(sampler, &policy, cfg.batch_n, &mut counts)?;
            record.steps += cfg.batch_n;

            let model = if cfg.oracle_model {
                mdp.clone()
            } else {
                TabularMdp::new(
                    estimate_model(&counts, UnvisitedModel::Uniform),
                    mdp.initial_dist().clone(),
                )?
            };
            last_model_err = model_error(mdp.transition(), model.transition());
            let start = std::time::Instant::now();
            match solve_objective(&model, cfg.kind, cfg.params, &cfg.opts) {
                Ok(sol) => {
                    let delta = sol.policy.max_abs_diff(&policy);
                    policy = sol.policy;
                    if delta < cfg.policy_tol && counts.min_pair_visits() >= 1 {
                        record.converged_at = Some(iter);
                    }
                }
                Err(_) => record.solver_failures += 1,
            }
            solve_secs = start.elapsed().as_secs_f64();
        }
        let snap = policy_metrics(&mdp, &policy)?;
        record.samples.push(record.steps);
        record.h_state.push(snap.h_state);
        record.h_state_action.push(snap.h_state_action);
        record.min_d.push(snap.min_d);
        record.spectral_gap.push(snap.spectral_gap);
        record.model_error.push(last_model_err);
        record.solve_seconds.push(solve_secs);
    }
    record.final_policy = policy;
    record.counts = counts;
    Ok(record)
}

/// `V(s) = R(s) + gamma * max_a sum_s' P(s'|s,a) V(s')`; greedy ties go to
/// the lowest action index.
pub fn value_iteration(
    transition: &Array3<f64>,
    reward: &Array1<f64>,
    gamma: f64,
    tol: f64,
    max_iters: usize,
) -> (Array1<f64>, PolicyTable) {
    let (s, a) = (transition.shape()[0], transition.shape()[1]);
    let mut v = Array1::zeros(s);
    for _ in 0..max_iters {
        let mut next = Array1::zeros(s);
        for i in 0..s {
            let mut best = f64::NEG_INFINITY;
            for j in 0..a {
                let q: f64 = (0..s).map(|k| transition[[i, j, k]] * v[k]).sum();
                if q > best {
                    best = q;
                }
            }
            next[i] = reward[i] + gamma * best;
        }
        let diff = next.iter().zip(v.iter()).map(|(x, y): (&f64, &f64)| (x - y).abs()).fold(0.0, f64::max);
        v = next;
        if diff < tol {
            break;
        }
    }
    let mut actions = vec![0usize; s];
    for i in 0..s {
        let mut best = f64::NEG_INFINITY;
        for j in 0..a {
            let q: f64 = (0..s).map(|k| transition[[i, j, k]] * v[k]).sum();
            if q > best + 1e-12 {
                best = q;
                actions[i] = j;
            }
        }
    }
    (v, PolicyTable::deterministic(&actions, a))
}

pub fn epsilon_greedy(policy: &PolicyTable, epsilon: f64) -> PolicyTable {
    let (s, a) = (policy.n_states(), policy.n_actions());
    let probs = Array2::from_shape_fn((s, a), |(i, j)| {
        (1.0 - epsilon) * policy.probs()[[i, j]] + epsilon / a as f64
    });
    PolicyTable::new(probs).expect("convex combination of row-stochastic tables")
}

/// Time-mixture of deterministic policies with geometric reweighting.
#[derive(Debug, Clone)]
pub struct MixturePolicy {
    /// `(weight, policy, cached steady state under the true dynamics)`
    components: Vec<(f64, PolicyTable, Option<Array1<f64>>)>,
}

impl MixturePolicy {
    pub fn new(first: PolicyTable) -> Self {
        Self { components: vec![(1.0, first, None)] }
    }

    /// `alpha_{i+1} = ((1 - eta) * alpha_i, eta)`, dropping components whose
    /// weight can no longer matter.
    pub fn push(&mut self, eta: f64, policy: PolicyTable) {
        for c in &mut self.components {
            c.0 *= 1.0 - eta;
        }
        self.components.push((eta, policy, None));
        self.components.retain(|c| c.0 > 1e-8);
        let total: f64 = self.components.iter().map(|c| c.0).sum();
        for c in &mut self.components {
            c.0 /= total;
        }
    }

    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    pub fn sample_component(&self, rng: &mut impl Rng) -> &PolicyTable {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (w, p, _) in &self.components {
            acc += w;
            if u < acc {
                return p;
            }
        }
        &self.components.last().expect("mixture is never empty").1
    }

    /// State-collapsed table `pi(a|s) = sum_i alpha_i pi_i(a|s)`.
    pub fn collapsed(&self) -> PolicyTable {
        let (s, a) = (self.components[0].1.n_states(), self.components[0].1.n_actions());
        let mut probs = Array2::zeros((s, a));
        for (w, p, _) in &self.components {
            probs = probs + p.probs() * *w;
        }
        PolicyTable::new(probs).expect("convex combination of row-stochastic tables")
    }

    /// Mixture steady state `sum_i alpha_i d^{pi_i}` under `mdp`, caching the
    /// per-component distributions (valid while `mdp` is fixed).
    pub fn state_distribution(&mut self, mdp: &TabularMdp) -> Result<Array1<f64>> {
        let n = mdp.n_states();
        let mut d = Array1::zeros(n);
        for (w, p, cache) in &mut self.components {
            if cache.is_none() {
                let chain = crate::mdp::induce_chain(mdp, p)?;
                *cache = Some(damped_stationary(chain.matrix(), METRIC_DAMPING, None));
            }
            d = d + cache.as_ref().unwrap() * *w;
        }
        Ok(d)
    }

    /// Joint steady-state distribution `sum_i alpha_i d^{pi_i}(s) pi_i(a|s)`
    /// under `mdp`; shares the per-component caches with
    /// [`Self::state_distribution`].
    pub fn joint_distribution(&mut self, mdp: &TabularMdp) -> Result<Array2<f64>> {
        let (s, a) = (self.components[0].1.n_states(), self.components[0].1.n_actions());
        self.state_distribution(mdp)?;
        let mut joint = Array2::zeros((s, a));
        for (w, p, cache) in &self.components {
            let d = cache.as_ref().expect("caches filled by state_distribution");
            for i in 0..s {
                for j in 0..a {
                    joint[[i, j]] += w * d[i] * p.probs()[[i, j]];
                }
            }
        }
        Ok(joint)
    }

    /// As [`Self::state_distribution`] but on a changing model: no caching,
    /// warm-started from the supplied per-component guesses.
    fn state_distribution_on(
        &self,
        model: &TabularMdp,
        warm: &mut Vec<Array1<f64>>,
    ) -> Result<Array1<f64>> {
        let n = model.n_states();
        warm.resize(self.components.len(), Array1::from_elem(n, 1.0 / n as f64));
        let mut d = Array1::zeros(n);
        for (idx, (w, p, _)) in self.components.iter().enumerate() {
            let chain = crate::mdp::induce_chain(model, p)?;
            let di = damped_stationary(chain.matrix(), METRIC_DAMPING, Some(&warm[idx]));
            warm[idx] = di.clone();
            d = d + &di * *w;
        }
        Ok(d)
    }
}

#[derive(Debug, Clone)]
pub struct MaxEntConfig {
    /// Mixture learning rate.
    pub eta: f64,
    /// Exploration rate of the appended epsilon-greedy components.
    pub epsilon: f64,
    pub batch_n: usize,
    pub max_iters: usize,
    pub gamma: f64,
}

impl Default for MaxEntConfig {
    fn default() -> Self {
        Self { eta: 0.02, epsilon: 0.1, batch_n: 10, max_iters: 300, gamma: 0.99 }
    }
}

/// Mixture-policy entropy maximization: each iteration greedily improves the
/// entropy gradient reward `-log d(s) - 1` of the current mixture (an
/// exploration bonus `log |S|` on unvisited states) and blends the greedy
/// policy into the mixture.
pub fn run_maxent(sampler: &mut Sampler, cfg: &MaxEntConfig) -> Result<RunRecord> {
    let mdp = sampler.env().mdp.clone();
    let (s, a) = (mdp.n_states(), mdp.n_actions());
    let log_s = (s as f64).ln();
    let mut counts = CountTable::new(s, a);
    let mut mixture = MixturePolicy::new(PolicyTable::uniform(s, a));
    let mut warm: Vec<Array1<f64>> = Vec::new();
    let mut record = RunRecord::new(s, a, cfg.max_iters, mixture.collapsed());

    for _ in 0..cfg.max_iters {
        let component = mixture.sample_component(sampler.rng_mut()).clone();
        collect(sampler, &component, cfg.batch_n, &mut counts)?;
        record.steps += cfg.batch_n;

        let model = TabularMdp::new(
            estimate_model(&counts, UnvisitedModel::SelfLoop),
            mdp.initial_dist().clone(),
        )?;
        let d_mix = mixture.state_distribution_on(&model, &mut warm)?;
        let reward = Array1::from_shape_fn(s, |i| {
            if counts.state_visits(i) > 0 {
                -d_mix[i].max(1e-12).ln() - 1.0
            } else {
                log_s
            }
        });
        let start = std::time::Instant::now();
        let (_, greedy) = value_iteration(model.transition(), &reward, cfg.gamma, 1e-8, 10_000);
        let solve_secs = start.elapsed().as_secs_f64();
        mixture.push(cfg.eta, epsilon_greedy(&greedy, cfg.epsilon));

        let d_true = mixture.state_distribution(&mdp)?;
        let (nats, _) = crate::mdp::entropy(d_true.view())?;
        let joint = mixture.joint_distribution(&mdp)?;
        let joint_nats: f64 =
            joint.iter().filter(|&&p| p > 0.0).map(|&p| -p * p.ln()).sum();
        let collapsed = mixture.collapsed();
        let chain = crate::mdp::induce_chain(&mdp, &collapsed)?;
        record.samples.push(record.steps);
        record.h_state.push(nats / log_s);
        record.h_state_action.push(joint_nats / ((s * a) as f64).ln());
        record.min_d.push(d_true.iter().cloned().fold(f64::INFINITY, f64::min));
        record
            .spectral_gap
            .push(crate::mdp::spectral_info(&chain).map_or(f64::NAN, |i| i.spectral_gap));
        record.model_error.push(model_error(mdp.transition(), model.transition()));
        record.solve_seconds.push(solve_secs);
    }
    record.final_policy = mixture.collapsed();
    record.counts = counts;
    Ok(record)
}

#[derive(Debug, Clone)]
pub struct CountBasedConfig {
    pub epsilon: f64,
    pub batch_n: usize,
    pub max_iters: usize,
    pub gamma: f64,
}

impl Default for CountBasedConfig {
    fn default() -> Self {
        Self { epsilon: 0.1, batch_n: 10, max_iters: 300, gamma: 0.99 }
    }
}

/// Count-based exploration: visitation bonus `R(s) = 1 / (N(s) + 1)`,
/// greedy planning on the estimated model, epsilon-greedy acting.
///
/// The bonus is consumable: `N(s)` counts visits from the most recent batch
/// only, so reward evaporates wherever the agent has just been. The model
/// estimate still uses the full cumulative transition counts.
pub fn run_countbased(sampler: &mut Sampler, cfg: &CountBasedConfig) -> Result<RunRecord> {
    let mdp = sampler.env().mdp.clone();
    let (s, a) = (mdp.n_states(), mdp.n_actions());
    let mut counts = CountTable::new(s, a);
    let mut policy = PolicyTable::uniform(s, a);
    let mut record = RunRecord::new(s, a, cfg.max_iters, policy.clone());

    let mut batch_visits = vec![0u64; s];
    for _ in 0..cfg.max_iters {
        batch_visits.iter_mut().for_each(|v| *v = 0);
        for _ in 0..cfg.batch_n {
            let (st, ac, s2) = sampler.sample_policy_step(&policy)?;
            counts.record(st, ac, s2);
            batch_visits[st] += 1;
        }
        record.steps += cfg.batch_n;

        let model = estimate_model(&counts, UnvisitedModel::Uniform);
        let reward = Array1::from_shape_fn(s, |i| 1.0 / (batch_visits[i] as f64 + 1.0));
        let start = std::time::Instant::now();
        let (_, greedy) = value_iteration(&model, &reward, cfg.gamma, 1e-8, 10_000);
        let solve_secs = start.elapsed().as_secs_f64();
        policy = epsilon_greedy(&greedy, cfg.epsilon);

        let snap = policy_metrics(&mdp, &policy)?;
        record.samples.push(record.steps);
        record.h_state.push(snap.h_state);
        record.h_state_action.push(snap.h_state_action);
        record.min_d.push(snap.min_d);
        record.spectral_gap.push(snap.spectral_gap);
        record.model_error.push(model_error(mdp.transition(), &model));
        record.solve_seconds.push(solve_secs);
    }
    record.final_policy = policy;
    record.counts = counts;
    Ok(record)
}
