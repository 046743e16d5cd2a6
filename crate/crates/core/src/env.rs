//! Benchmark environment constructors and a seeded trajectory sampler.

use std::collections::BTreeMap;

use ndarray::{Array1, Array3};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{ExploreError, Result};
use crate::mdp::TabularMdp;

/// A named benchmark MDP together with the parameters that built it.
#[derive(Debug, Clone)]
pub struct EnvSpec {
    pub name: String,
    pub mdp: TabularMdp,
    pub metadata: BTreeMap<String, String>,
}

impl EnvSpec {
    pub fn new(name: impl Into<String>, mdp: TabularMdp, metadata: BTreeMap<String, String>) -> Result<Self> {
        let spec = Self { name: name.into(), mdp, metadata };
        spec.check_reachable()?;
        Ok(spec)
    }

    /// BFS over positive-probability transitions (any action) from the
    /// support of the initial distribution.
    fn check_reachable(&self) -> Result<()> {
        let n = self.mdp.n_states();
        let a = self.mdp.n_actions();
        let mut seen = vec![false; n];
        let mut queue: Vec<usize> = (0..n).filter(|&s| self.mdp.initial_dist()[s] > 0.0).collect();
        for &s in &queue {
            seen[s] = true;
        }
        while let Some(s) = queue.pop() {
            for j in 0..a {
                for k in 0..n {
                    if self.mdp.transition()[[s, j, k]] > 0.0 && !seen[k] {
                        seen[k] = true;
                        queue.push(k);
                    }
                }
            }
        }
        if let Some(s) = seen.iter().position(|&v| !v) {
            return Err(ExploreError::InvalidParam(format!(
                "state {s} of environment '{}' is unreachable from the initial distribution",
                self.name
            )));
        }
        Ok(())
    }

    /// Plain-text matrix interchange format: one header line "S A", then
    /// `S*A` rows (s-major) of `S` decimal probabilities.
    pub fn to_text(&self) -> String {
        let (s, a) = (self.mdp.n_states(), self.mdp.n_actions());
        let mut out = format!("{s} {a}\n");
        for i in 0..s {
            for j in 0..a {
                let row: Vec<String> =
                    (0..s).map(|k| format!("{:.17}", self.mdp.transition()[[i, j, k]])).collect();
                out.push_str(&row.join(" "));
                out.push('\n');
            }
        }
        out
    }

    pub fn from_text(name: &str, text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| ExploreError::InvalidParam("empty environment text".into()))?;
        let mut parts = header.split_whitespace();
        let parse = |p: Option<&str>| -> Result<usize> {
            p.and_then(|v| v.parse().ok())
                .ok_or_else(|| ExploreError::InvalidParam(format!("bad header line '{header}'")))
        };
        let s = parse(parts.next())?;
        let a = parse(parts.next())?;
        let mut tensor = Array3::zeros((s, a, s));
        for i in 0..s {
            for j in 0..a {
                let line = lines.next().ok_or_else(|| {
                    ExploreError::InvalidParam(format!("missing row for (s={i}, a={j})"))
                })?;
                let vals: Vec<f64> = line
                    .split_whitespace()
                    .map(|v| v.parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| ExploreError::InvalidParam(format!("bad probability: {e}")))?;
                if vals.len() != s {
                    return Err(ExploreError::InvalidParam(format!(
                        "row (s={i}, a={j}) has {} entries, expected {s}",
                        vals.len()
                    )));
                }
                for (k, v) in vals.into_iter().enumerate() {
                    tensor[[i, j, k]] = v;
                }
            }
        }
        let mut d0 = Array1::zeros(s);
        d0[0] = 1.0;
        EnvSpec::new(name, TabularMdp::new(tensor, d0)?, BTreeMap::new())
    }
}

/// Seeded sampler advancing through an environment.
#[derive(Debug, Clone)]
pub struct Sampler {
    env: EnvSpec,
    rng: ChaCha8Rng,
    current_state: usize,
}

impl Sampler {
    /// Starts from a draw of the initial distribution.
    pub fn new(env: EnvSpec, rng_seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        let current_state = draw_index(env.mdp.initial_dist().view(), &mut rng);
        Self { env, rng, current_state }
    }

    pub fn current_state(&self) -> usize {
        self.current_state
    }

    /// Redraws the current state from the initial distribution (episode
    /// boundary); the random stream continues.
    pub fn reset(&mut self) {
        self.current_state = draw_index(self.env.mdp.initial_dist().view(), &mut self.rng);
    }

    pub fn env(&self) -> &EnvSpec {
        &self.env
    }

    /// Access to the stream for auxiliary draws that must stay reproducible
    /// (e.g. mixture component selection).
    pub fn rng_mut(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    /// Draws `s' ~ P(. | s, a)`, advances and returns the next state.
    pub fn sample_step(&mut self, action: usize) -> Result<usize> {
        if action >= self.env.mdp.n_actions() {
            return Err(ExploreError::InvalidParam(format!(
                "action {action} out of range (|A| = {})",
                self.env.mdp.n_actions()
            )));
        }
        let row = self
            .env
            .mdp
            .transition()
            .slice(ndarray::s![self.current_state, action, ..]);
        let next = draw_index(row, &mut self.rng);
        self.current_state = next;
        Ok(next)
    }

    /// Draws an action from a policy row, then steps.
    pub fn sample_policy_step(&mut self, policy: &crate::mdp::PolicyTable) -> Result<(usize, usize, usize)> {
        let s = self.current_state;
        let a = draw_index(policy.probs().row(s), &mut self.rng);
        let s2 = self.sample_step(a)?;
        Ok((s, a, s2))
    }
}

fn draw_index(probs: ndarray::ArrayView1<f64>, rng: &mut ChaCha8Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

fn slip_mix(intent_a: &[(usize, f64)], intent_b: &[(usize, f64)], p_slip: f64, n: usize) -> Vec<f64> {
    let mut row = vec![0.0; n];
    for &(t, w) in intent_a {
        row[t] += (1.0 - p_slip) * w;
    }
    for &(t, w) in intent_b {
        row[t] += p_slip * w;
    }
    row
}

fn tensor_from_rows(rows: Vec<Vec<Vec<f64>>>) -> Array3<f64> {
    let s = rows.len();
    let a = rows[0].len();
    let mut t = Array3::zeros((s, a, s));
    for (i, actions) in rows.into_iter().enumerate() {
        for (j, row) in actions.into_iter().enumerate() {
            for (k, v) in row.into_iter().enumerate() {
                t[[i, j, k]] = v;
            }
        }
    }
    t
}

fn point_mass(n: usize, s: usize) -> Array1<f64> {
    let mut d = Array1::zeros(n);
    d[s] = 1.0;
    d
}

/// Single Chain: action 0 (RESET) falls to state 0, action 1 (UP) climbs
/// toward the last state; the two actions are swapped with probability
/// `p_slip`. The last state self-loops under a successful UP.
pub fn single_chain(n: usize, p_slip: f64) -> Result<EnvSpec> {
    if n < 2 {
        return Err(ExploreError::InvalidParam(format!("single chain needs n >= 2, got {n}")));
    }
    if !(0.0..=0.5).contains(&p_slip) {
        return Err(ExploreError::InvalidParam(format!("p_slip {p_slip} outside [0, 0.5]")));
    }
    let rows: Vec<Vec<Vec<f64>>> = (0..n)
        .map(|s| {
            let up = vec![((s + 1).min(n - 1), 1.0)];
            let reset = vec![(0usize, 1.0)];
            vec![slip_mix(&reset, &up, p_slip, n), slip_mix(&up, &reset, p_slip, n)]
        })
        .collect();
    let mdp = TabularMdp::new(tensor_from_rows(rows), point_mass(n, 0))?;
    let mut meta = BTreeMap::new();
    meta.insert("n".into(), n.to_string());
    meta.insert("p_slip".into(), p_slip.to_string());
    EnvSpec::new("single-chain", mdp, meta)
}

/// Double Chain: two single chains sharing a central initial state
/// (`|S| = 2*n_side - 1`). Action 0 (RESET) returns to the center; action 1
/// (CLIMB) moves away from the center along each arm (splitting evenly at
/// the center); the actions swap with probability `p_slip`.
pub fn double_chain(n_side: usize, p_slip: f64) -> Result<EnvSpec> {
    double_chain_variant(n_side, p_slip, false)
}

/// `duplicate_center = true` builds the 20-state reading (two full chains
/// glued side by side, each arm keeping its own reset state).
pub fn double_chain_variant(n_side: usize, p_slip: f64, duplicate_center: bool) -> Result<EnvSpec> {
    if n_side < 2 {
        return Err(ExploreError::InvalidParam(format!("double chain needs n_side >= 2, got {n_side}")));
    }
    if !(0.0..=0.5).contains(&p_slip) {
        return Err(ExploreError::InvalidParam(format!("p_slip {p_slip} outside [0, 0.5]")));
    }
    let (n, center) = if duplicate_center { (2 * n_side, n_side - 1) } else { (2 * n_side - 1, n_side - 1) };
    let rows: Vec<Vec<Vec<f64>>> = (0..n)
        .map(|s| {
            let (climb, reset): (Vec<(usize, f64)>, Vec<(usize, f64)>) = if duplicate_center {
                // states 0..n_side-1 form the left chain, the rest the right
                // chain; RESET lands on the center pair so the arms stay
                // connected
                let pair = vec![(n_side - 1, 0.5), (n_side, 0.5)];
                if s < n_side {
                    (vec![(s.saturating_sub(1), 1.0)], pair)
                } else {
                    (vec![((s + 1).min(n - 1), 1.0)], pair)
                }
            } else if s < center {
                (vec![(s.saturating_sub(1), 1.0)], vec![(center, 1.0)])
            } else if s > center {
                (vec![((s + 1).min(n - 1), 1.0)], vec![(center, 1.0)])
            } else {
                (vec![(center - 1, 0.5), (center + 1, 0.5)], vec![(center, 1.0)])
            };
            vec![slip_mix(&reset, &climb, p_slip, n), slip_mix(&climb, &reset, p_slip, n)]
        })
        .collect();
    let d0 = if duplicate_center {
        let mut d = Array1::zeros(n);
        d[n_side - 1] = 0.5;
        d[n_side] = 0.5;
        d
    } else {
        point_mass(n, center)
    };
    let mdp = TabularMdp::new(tensor_from_rows(rows), d0)?;
    let mut meta = BTreeMap::new();
    meta.insert("n_side".into(), n_side.to_string());
    meta.insert("p_slip".into(), p_slip.to_string());
    meta.insert("duplicate_center".into(), duplicate_center.to_string());
    EnvSpec::new("double-chain", mdp, meta)
}

/// River Swim with the conventional MBIE-EB transition values: LEFT is a
/// deterministic move downstream, RIGHT succeeds with probability 0.3 in
/// the interior (stay 0.6, back 0.1), 0.3/0.7 at the bottom, and stays with
/// 0.3 / falls back with 0.7 at the top.
pub fn river_swim(n: usize) -> Result<EnvSpec> {
    if n < 2 {
        return Err(ExploreError::InvalidParam(format!("river swim needs n >= 2, got {n}")));
    }
    let rows: Vec<Vec<Vec<f64>>> = (0..n)
        .map(|s| {
            let mut left = vec![0.0; n];
            left[s.saturating_sub(1)] = 1.0;
            let mut right = vec![0.0; n];
            if s == 0 {
                right[1] = 0.3;
                right[0] = 0.7;
            } else if s == n - 1 {
                right[n - 1] = 0.3;
                right[n - 2] = 0.7;
            } else {
                right[s + 1] = 0.3;
                right[s] = 0.6;
                right[s - 1] = 0.1;
            }
            vec![left, right]
        })
        .collect();
    let mdp = TabularMdp::new(tensor_from_rows(rows), point_mass(n, 0))?;
    let mut meta = BTreeMap::new();
    meta.insert("n".into(), n.to_string());
    meta.insert("interior_right".into(), "0.3 forward / 0.6 stay / 0.1 back".into());
    meta.insert("bottom_right".into(), "0.3 forward / 0.7 stay".into());
    meta.insert("top_right".into(), "0.3 stay / 0.7 back".into());
    EnvSpec::new("river-swim", mdp, meta)
}

/// Four-room gridworld on a `side x side` open grid with a cross-shaped
/// inner wall and one doorway per wall segment. Four move actions; bumping
/// a wall stays in place; with probability `slip` the move is replaced by a
/// uniformly random other action.
pub fn four_rooms(side: usize, slip: f64) -> Result<EnvSpec> {
    if side < 5 || side % 2 == 0 {
        return Err(ExploreError::InvalidParam(format!("four rooms needs odd side >= 5, got {side}")));
    }
    if !(0.0..=1.0).contains(&slip) {
        return Err(ExploreError::InvalidParam(format!("slip {slip} outside [0, 1]")));
    }
    let m = side / 2;
    let q1 = m / 2;
    let q2 = (m + side) / 2;
    let is_wall = |r: usize, c: usize| -> bool {
        if r == m && c == m {
            return true;
        }
        if r == m {
            c != q1 && c != q2
        } else if c == m {
            r != q1 && r != q2
        } else {
            false
        }
    };
    let mut index = vec![vec![usize::MAX; side]; side];
    let mut cells = Vec::new();
    for r in 0..side {
        for c in 0..side {
            if !is_wall(r, c) {
                index[r][c] = cells.len();
                cells.push((r, c));
            }
        }
    }
    let n = cells.len();
    // N, S, E, W
    let deltas: [(isize, isize); 4] = [(-1, 0), (1, 0), (0, 1), (0, -1)];
    let move_target = |s: usize, a: usize| -> usize {
        let (r, c) = cells[s];
        let (dr, dc) = deltas[a];
        let (nr, nc) = (r as isize + dr, c as isize + dc);
        if nr < 0 || nc < 0 || nr >= side as isize || nc >= side as isize {
            return s;
        }
        let (nr, nc) = (nr as usize, nc as usize);
        if is_wall(nr, nc) {
            s
        } else {
            index[nr][nc]
        }
    };
    let mut tensor = Array3::zeros((n, 4, n));
    for s in 0..n {
        for a in 0..4 {
            tensor[[s, a, move_target(s, a)]] += 1.0 - slip;
            for other in 0..4 {
                if other != a {
                    tensor[[s, a, move_target(s, other)]] += slip / 3.0;
                }
            }
        }
    }
    let mdp = TabularMdp::new(tensor, point_mass(n, 0))?;
    let mut meta = BTreeMap::new();
    meta.insert("side".into(), side.to_string());
    meta.insert("slip".into(), slip.to_string());
    meta.insert("doors".into(), format!("{q1},{q2}"));
    EnvSpec::new("four-rooms", mdp, meta)
}

/// Seeded random MDP: each `(s, a)` row is a Dirichlet(1) draw over
/// `branching` uniformly chosen successor states.
pub fn random_mdp(n_states: usize, n_actions: usize, branching: usize, seed: u64) -> Result<EnvSpec> {
    if n_states == 0 || n_actions == 0 || branching == 0 || branching > n_states {
        return Err(ExploreError::InvalidParam(format!(
            "invalid random MDP parameters (S={n_states}, A={n_actions}, branching={branching})"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tensor = Array3::zeros((n_states, n_actions, n_states));
    for s in 0..n_states {
        for a in 0..n_actions {
            // reservoir-free successor pick: shuffle-like partial Fisher-Yates
            let mut pool: Vec<usize> = (0..n_states).collect();
            for i in 0..branching {
                let j = rng.random_range(i..n_states);
                pool.swap(i, j);
            }
            // always keep state 0 reachable so the spec-level BFS check holds
            if s > 0 && a == 0 {
                pool[0] = (s + 1) % n_states;
            }
            let mut weights = Vec::with_capacity(branching);
            let mut total = 0.0;
            for _ in 0..branching {
                let w = -f64::ln(1.0 - rng.random::<f64>());
                weights.push(w);
                total += w;
            }
            for i in 0..branching {
                tensor[[s, a, pool[i]]] += weights[i] / total;
            }
        }
    }
    let d0 = Array1::from_elem(n_states, 1.0 / n_states as f64);
    let mdp = TabularMdp::new(tensor, d0)?;
    let mut meta = BTreeMap::new();
    meta.insert("n_states".into(), n_states.to_string());
    meta.insert("n_actions".into(), n_actions.to_string());
    meta.insert("branching".into(), branching.to_string());
    meta.insert("seed".into(), seed.to_string());
    EnvSpec::new("random-mdp", mdp, meta)
}

/// Induced chain of the uniform policy; convenience for baselines.
pub fn uniform_policy_chain(env: &EnvSpec) -> Result<crate::mdp::StateChain> {
    crate::mdp::induce_chain(
        &env.mdp,
        &crate::mdp::PolicyTable::uniform(env.mdp.n_states(), env.mdp.n_actions()),
    )
}

pub fn env_by_name(
    name: &str,
    params: &BTreeMap<String, String>,
) -> Result<EnvSpec> {
    let get_usize = |k: &str, default: usize| -> Result<usize> {
        match params.get(k) {
            Some(v) => v
                .parse()
                .map_err(|_| ExploreError::InvalidParam(format!("bad integer for {k}: {v}"))),
            None => Ok(default),
        }
    };
    let get_f64 = |k: &str, default: f64| -> Result<f64> {
        match params.get(k) {
            Some(v) => v
                .parse()
                .map_err(|_| ExploreError::InvalidParam(format!("bad number for {k}: {v}"))),
            None => Ok(default),
        }
    };
    match name {
        "single-chain" => single_chain(get_usize("n", 10)?, get_f64("p_slip", 0.1)?),
        "double-chain" => double_chain_variant(
            get_usize("n_side", 10)?,
            get_f64("p_slip", 0.1)?,
            params.get("duplicate_center").map(|v| v == "true").unwrap_or(false),
        ),
        "river-swim" => river_swim(get_usize("n", 6)?),
        "four-rooms" => four_rooms(get_usize("side", 11)?, get_f64("slip", 0.0)?),
        "random-mdp" => random_mdp(
            get_usize("n_states", 50)?,
            get_usize("n_actions", 4)?,
            get_usize("branching", 4)?,
            get_usize("seed", 0)? as u64,
        ),
        other => Err(ExploreError::InvalidParam(format!("unknown environment '{other}'"))),
    }
}
