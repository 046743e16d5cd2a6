//! Experiment configuration: a plain `key = value` file merged with command
//! line flags; flags win over file entries, file entries win over defaults.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use explore_core::env::{double_chain, four_rooms, random_mdp, river_swim, single_chain, EnvSpec};
use explore_core::objective::ObjectiveKind;

/// Fully resolved experiment parameters shared by every subcommand.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub env: String,
    /// Primary size knob: chain length / side length / state count.
    pub size: usize,
    pub p_slip: f64,
    pub n_actions: usize,
    pub algorithm: String,
    pub kinds: Vec<ObjectiveKind>,
    pub xi: f64,
    pub zeta: f64,
    pub epsilon: f64,
    pub eta: f64,
    pub batch_n: usize,
    pub max_iters: usize,
    pub n_seeds: usize,
    pub base_seed: u64,
    pub n_runs: usize,
    pub gamma: f64,
    pub jobs: usize,
    pub out_dir: PathBuf,
}

/// Optional values collected from flags or the config file before merging.
#[derive(Debug, Default, Clone)]
pub struct PartialConfig {
    pub env: Option<String>,
    pub size: Option<usize>,
    pub p_slip: Option<f64>,
    pub n_actions: Option<usize>,
    pub algorithm: Option<String>,
    pub kinds: Option<Vec<ObjectiveKind>>,
    pub xi: Option<f64>,
    pub zeta: Option<f64>,
    pub epsilon: Option<f64>,
    pub eta: Option<f64>,
    pub batch_n: Option<usize>,
    pub max_iters: Option<usize>,
    pub n_seeds: Option<usize>,
    pub base_seed: Option<u64>,
    pub n_runs: Option<usize>,
    pub gamma: Option<f64>,
    pub jobs: Option<usize>,
    pub out_dir: Option<PathBuf>,
}

impl PartialConfig {
    /// Fills every `None` from `other` (lower priority source).
    pub fn or(mut self, other: PartialConfig) -> PartialConfig {
        macro_rules! take {
            ($($f:ident),*) => { $( if self.$f.is_none() { self.$f = other.$f; } )* };
        }
        take!(
            env, size, p_slip, n_actions, algorithm, kinds, xi, zeta, epsilon, eta, batch_n,
            max_iters, n_seeds, base_seed, n_runs, gamma, jobs, out_dir
        );
        self
    }

    pub fn resolve(self) -> Result<ExperimentConfig> {
        let out_dir = self
            .out_dir
            .or_else(|| std::env::var_os("EXPLORE_OUT").map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("out"));
        let cfg = ExperimentConfig {
            env: self.env.unwrap_or_else(|| "single-chain".into()),
            size: self.size.unwrap_or(10),
            p_slip: self.p_slip.unwrap_or(0.1),
            n_actions: self.n_actions.unwrap_or(2),
            algorithm: self.algorithm.unwrap_or_else(|| "ideal".into()),
            kinds: self.kinds.unwrap_or_else(|| vec![ObjectiveKind::Frobenius]),
            xi: self.xi.unwrap_or(0.1),
            zeta: self.zeta.unwrap_or(0.7),
            epsilon: self.epsilon.unwrap_or(0.1),
            eta: self.eta.unwrap_or(0.02),
            batch_n: self.batch_n.unwrap_or(10),
            max_iters: self.max_iters.unwrap_or(300),
            n_seeds: self.n_seeds.unwrap_or(20),
            base_seed: self.base_seed.unwrap_or(1000),
            n_runs: self.n_runs.unwrap_or(500),
            gamma: self.gamma.unwrap_or(0.99),
            jobs: self.jobs.unwrap_or_else(|| {
                std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
            }),
            out_dir,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl ExperimentConfig {
    fn validate(&self) -> Result<()> {
        if !(0.0..=0.5).contains(&self.p_slip) {
            bail!("p-slip {} outside [0, 0.5]", self.p_slip);
        }
        if !(0.0..=1.0).contains(&self.xi) || self.zeta <= 0.0 || self.zeta > 1.0 {
            bail!("xi {} / zeta {} outside their ranges", self.xi, self.zeta);
        }
        match self.env.as_str() {
            "single-chain" | "double-chain" | "river-swim" | "four-rooms" | "random" => {}
            other => bail!("unknown environment '{other}'"),
        }
        if !(0.0..=1.0).contains(&self.epsilon) || !(0.0..=1.0).contains(&self.eta) {
            bail!("epsilon {} / eta {} outside [0, 1]", self.epsilon, self.eta);
        }
        if !(0.0..1.0).contains(&self.gamma) {
            bail!("gamma {} outside [0, 1)", self.gamma);
        }
        if self.batch_n == 0 || self.max_iters == 0 || self.n_seeds == 0 || self.n_runs == 0 {
            bail!("batch-n, max-iters, n-seeds and n-runs must be positive");
        }
        match self.algorithm.as_str() {
            "ideal" | "maxent" | "countbased" | "exact-solve" => {}
            other => bail!("unknown algorithm '{other}'"),
        }
        Ok(())
    }

    pub fn build_env(&self) -> Result<EnvSpec> {
        let env = match self.env.as_str() {
            "single-chain" => single_chain(self.size, self.p_slip)?,
            "double-chain" => double_chain(self.size, self.p_slip)?,
            "river-swim" => river_swim(self.size)?,
            "four-rooms" => four_rooms(self.size, self.p_slip)?,
            "random" => random_mdp(self.size, self.n_actions, 4.min(self.size), self.base_seed)?,
            other => bail!("unknown environment '{other}'"),
        };
        Ok(env)
    }
}

/// Parses a `key = value` file; `#` starts a comment.
pub fn load_config_file(path: &Path) -> Result<PartialConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config file {}", path.display()))?;
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            bail!("{}:{}: expected 'key = value'", path.display(), lineno + 1);
        };
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    let mut p = PartialConfig::default();
    for (k, v) in map {
        let fail = || format!("config key '{k}': bad value");
        match k.as_str() {
            "env" => p.env = Some(v),
            "size" => p.size = Some(v.parse().with_context(fail)?),
            "p-slip" => p.p_slip = Some(v.parse().with_context(fail)?),
            "n-actions" => p.n_actions = Some(v.parse().with_context(fail)?),
            "algorithm" => p.algorithm = Some(v),
            "kind" => {
                let kinds = v
                    .split(',')
                    .map(|s| s.trim().parse::<ObjectiveKind>())
                    .collect::<explore_core::Result<Vec<_>>>()?;
                p.kinds = Some(kinds);
            }
            "xi" => p.xi = Some(v.parse().with_context(fail)?),
            "zeta" => p.zeta = Some(v.parse().with_context(fail)?),
            "epsilon" => p.epsilon = Some(v.parse().with_context(fail)?),
            "eta" => p.eta = Some(v.parse().with_context(fail)?),
            "batch-n" => p.batch_n = Some(v.parse().with_context(fail)?),
            "max-iters" => p.max_iters = Some(v.parse().with_context(fail)?),
            "n-seeds" => p.n_seeds = Some(v.parse().with_context(fail)?),
            "base-seed" => p.base_seed = Some(v.parse().with_context(fail)?),
            "n-runs" => p.n_runs = Some(v.parse().with_context(fail)?),
            "gamma" => p.gamma = Some(v.parse().with_context(fail)?),
            "jobs" => p.jobs = Some(v.parse().with_context(fail)?),
            "out" => p.out_dir = Some(PathBuf::from(v)),
            other => bail!("unknown config key '{other}'"),
        }
    }
    Ok(p)
}
