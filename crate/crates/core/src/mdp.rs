//! Core tabular-MDP data types and Markov-chain analytics: induced state
//! chains, stationary distributions, entropies, spectral quantities and
//! mixing times.

use ndarray::{Array1, Array2, Array3, ArrayView1, Axis};

use crate::error::{ExploreError, NonErgodicKind, Result};

/// Tolerance for row-stochasticity checks on construction.
pub const STOCHASTIC_TOL: f64 = 1e-9;

/// A tabular MDP: transition tensor indexed `(s, a, s')` plus an initial
/// state distribution. Reward-free; rewards live with the agents that
/// construct them.
#[derive(Debug, Clone)]
pub struct TabularMdp {
    transition: Array3<f64>,
    initial_dist: Array1<f64>,
}

impl TabularMdp {
    pub fn new(transition: Array3<f64>, initial_dist: Array1<f64>) -> Result<Self> {
        let (s, a, s2) = transition.dim();
        if s == 0 || a == 0 || s != s2 {
            return Err(ExploreError::Shape(format!(
                "transition tensor must be (S, A, S) with S, A > 0, got ({s}, {a}, {s2})"
            )));
        }
        if initial_dist.len() != s {
            return Err(ExploreError::Shape(format!(
                "initial distribution has length {}, expected {s}",
                initial_dist.len()
            )));
        }
        for ((i, j, _), &p) in transition.indexed_iter() {
            if p < 0.0 {
                return Err(ExploreError::InvalidDistribution(format!(
                    "negative transition probability at (s={i}, a={j})"
                )));
            }
        }
        for i in 0..s {
            for j in 0..a {
                let sum: f64 = transition.slice(ndarray::s![i, j, ..]).sum();
                if (sum - 1.0).abs() > STOCHASTIC_TOL {
                    return Err(ExploreError::InvalidDistribution(format!(
                        "transition row (s={i}, a={j}) sums to {sum}, expected 1"
                    )));
                }
            }
        }
        validate_prob_vector(initial_dist.view(), STOCHASTIC_TOL)?;
        Ok(Self { transition, initial_dist })
    }

    pub fn n_states(&self) -> usize {
        self.transition.dim().0
    }

    pub fn n_actions(&self) -> usize {
        self.transition.dim().1
    }

    pub fn transition(&self) -> &Array3<f64> {
        &self.transition
    }

    pub fn initial_dist(&self) -> &Array1<f64> {
        &self.initial_dist
    }
}

/// A stochastic policy `pi(a | s)` stored as an `(S, A)` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyTable {
    probs: Array2<f64>,
}

impl PolicyTable {
    pub fn new(probs: Array2<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(ExploreError::Shape("empty policy matrix".into()));
        }
        for (s, row) in probs.outer_iter().enumerate() {
            validate_prob_vector(row, STOCHASTIC_TOL).map_err(|_| {
                ExploreError::InvalidDistribution(format!(
                    "policy row {s} is not a probability vector (sum {})",
                    row.sum()
                ))
            })?;
        }
        Ok(Self { probs })
    }

    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        Self { probs: Array2::from_elem((n_states, n_actions), 1.0 / n_actions as f64) }
    }

    /// Deterministic policy taking `actions[s]` in state `s`.
    pub fn deterministic(actions: &[usize], n_actions: usize) -> Self {
        let mut probs = Array2::zeros((actions.len(), n_actions));
        for (s, &a) in actions.iter().enumerate() {
            probs[[s, a]] = 1.0;
        }
        Self { probs }
    }

    pub fn probs(&self) -> &Array2<f64> {
        &self.probs
    }

    pub fn n_states(&self) -> usize {
        self.probs.nrows()
    }

    pub fn n_actions(&self) -> usize {
        self.probs.ncols()
    }

    /// Largest entrywise difference to another policy.
    pub fn max_abs_diff(&self, other: &PolicyTable) -> f64 {
        self.probs
            .iter()
            .zip(other.probs.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Row-stochastic state-to-state matrix induced by a policy.
#[derive(Debug, Clone)]
pub struct StateChain {
    matrix: Array2<f64>,
}

impl StateChain {
    pub fn new(matrix: Array2<f64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() || matrix.is_empty() {
            return Err(ExploreError::Shape(format!(
                "state chain must be square and non-empty, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        for (s, row) in matrix.outer_iter().enumerate() {
            validate_prob_vector(row, STOCHASTIC_TOL).map_err(|_| {
                ExploreError::InvalidDistribution(format!(
                    "chain row {s} is not a probability vector (sum {})",
                    row.sum()
                ))
            })?;
        }
        Ok(Self { matrix })
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.matrix
    }

    pub fn n_states(&self) -> usize {
        self.matrix.nrows()
    }
}

/// A probability vector together with its entropy in nats and its entropy
/// normalized by `ln(len)`.
#[derive(Debug, Clone)]
pub struct Distribution {
    probs: Array1<f64>,
    entropy_nats: f64,
    entropy_normalized: f64,
}

impl Distribution {
    pub fn new(probs: Array1<f64>) -> Result<Self> {
        let (nats, normalized) = entropy(probs.view())?;
        Ok(Self { probs, entropy_nats: nats, entropy_normalized: normalized })
    }

    pub fn probs(&self) -> &Array1<f64> {
        &self.probs
    }

    pub fn entropy_nats(&self) -> f64 {
        self.entropy_nats
    }

    pub fn entropy_normalized(&self) -> f64 {
        self.entropy_normalized
    }

    pub fn min_prob(&self) -> f64 {
        self.probs.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Second largest eigenvalue modulus and derived spectral gap of a chain.
#[derive(Debug, Clone, Copy)]
pub struct SpectralInfo {
    pub slem: f64,
    pub spectral_gap: f64,
    pub reversible: bool,
}

fn validate_prob_vector(v: ArrayView1<f64>, tol: f64) -> Result<()> {
    let mut sum = 0.0;
    for &p in v.iter() {
        if p < -tol {
            return Err(ExploreError::InvalidDistribution(format!("negative entry {p}")));
        }
        sum += p;
    }
    if (sum - 1.0).abs() > tol {
        return Err(ExploreError::InvalidDistribution(format!("sums to {sum}, expected 1")));
    }
    Ok(())
}

/// P^pi(s, s') = sum_a pi(a|s) P(s'|s, a).
pub fn induce_chain(mdp: &TabularMdp, policy: &PolicyTable) -> Result<StateChain> {
    let (s, a, _) = mdp.transition().dim();
    if policy.n_states() != s || policy.n_actions() != a {
        return Err(ExploreError::Shape(format!(
            "policy is {}x{}, MDP expects {s}x{a}",
            policy.n_states(),
            policy.n_actions()
        )));
    }
    let mut matrix = Array2::zeros((s, s));
    for i in 0..s {
        for j in 0..a {
            let w = policy.probs()[[i, j]];
            if w == 0.0 {
                continue;
            }
            for k in 0..s {
                matrix[[i, k]] += w * mdp.transition()[[i, j, k]];
            }
        }
    }
    // guard against drift from the convex combination
    for mut row in matrix.outer_iter_mut() {
        let sum = row.sum();
        row.mapv_inplace(|x| x / sum);
    }
    StateChain::new(matrix)
}

fn power_step(chain: &Array2<f64>, d: &Array1<f64>) -> Array1<f64> {
    chain.t().dot(d)
}

fn l1_residual(chain: &Array2<f64>, d: &Array1<f64>) -> f64 {
    let next = power_step(chain, d);
    next.iter().zip(d.iter()).map(|(a, b)| (a - b).abs()).sum()
}

/// Power iteration on the lazy chain `(I + P) / 2`, which is aperiodic and
/// shares the recurrent structure of `P`; used only to diagnose failures of
/// the plain iteration.
fn lazy_fixed_point(chain: &Array2<f64>, start: Array1<f64>, iters: usize, tol: f64) -> Array1<f64> {
    let mut d = start;
    for _ in 0..iters {
        let next = (power_step(chain, &d) + &d) * 0.5;
        let res: f64 = next.iter().zip(d.iter()).map(|(a, b)| (a - b).abs()).sum();
        d = next;
        if res <= tol {
            break;
        }
    }
    let s = d.sum();
    d / s
}

/// Steady-state distribution via power iteration.
pub fn stationary_distribution(chain: &StateChain, tol: f64, max_iter: usize) -> Result<Distribution> {
    let n = chain.n_states();
    let m = chain.matrix();
    // asymmetric start so that periodic chains do not sit on a symmetric
    // fixed point by accident
    let norm = (n * (n + 1)) as f64 / 2.0;
    let mut d = Array1::from_shape_fn(n, |i| (i + 1) as f64 / norm);
    for it in 0..max_iter {
        let next = power_step(m, &d);
        let res: f64 = next.iter().zip(d.iter()).map(|(a, b)| (a - b).abs()).sum();
        d = next;
        if res <= tol {
            let s = d.sum();
            return Distribution::new(d / s);
        }
        let _ = it;
    }
    // Diagnose with the lazy chain from two extreme starts. A shared fixed
    // point despite a non-converging plain iteration indicates periodicity;
    // distinct limits indicate reducibility.
    let diag_iters = (max_iter / 10).max(200);
    let mut e0 = Array1::zeros(n);
    e0[0] = 1.0;
    let mut e1 = Array1::zeros(n);
    e1[n - 1] = 1.0;
    let c0 = lazy_fixed_point(m, e0, diag_iters, tol);
    let c1 = lazy_fixed_point(m, e1, diag_iters, tol);
    let spread: f64 = c0.iter().zip(c1.iter()).map(|(a, b)| (a - b).abs()).sum();
    let residual = l1_residual(m, &d);
    let kind = if spread > 1e-6 {
        NonErgodicKind::Reducible
    } else if l1_residual(m, &c0) < residual * 1e-3 + tol {
        NonErgodicKind::Periodic
    } else {
        NonErgodicKind::Unknown
    };
    Err(ExploreError::NonErgodic { kind, residual, iterations: max_iter })
}

/// Shannon entropy of a probability vector: `(nats, nats / ln(len))`.
/// `0 log 0` is taken as 0.
pub fn entropy(probs: ArrayView1<f64>) -> Result<(f64, f64)> {
    if probs.is_empty() {
        return Err(ExploreError::InvalidDistribution("empty vector".into()));
    }
    let mut sum = 0.0;
    for &p in probs.iter() {
        if p < -1e-12 {
            return Err(ExploreError::InvalidDistribution(format!("negative entry {p}")));
        }
        sum += p;
    }
    if (sum - 1.0).abs() > 1e-6 {
        return Err(ExploreError::InvalidDistribution(format!("sums to {sum}, expected 1")));
    }
    let nats: f64 = probs
        .iter()
        .map(|&p| if p > 0.0 { -p * p.ln() } else { 0.0 })
        .sum();
    let nats = nats.max(0.0);
    let normalized = if probs.len() == 1 { 1.0 } else { nats / (probs.len() as f64).ln() };
    Ok((nats, normalized))
}

/// Joint state-action distribution `omega(s, a) = d(s) pi(a|s)`, flattened
/// row-major as `s * |A| + a`.
pub fn state_action_distribution(
    mdp: &TabularMdp,
    policy: &PolicyTable,
    d: &Distribution,
) -> Result<Distribution> {
    let (s, a) = (mdp.n_states(), mdp.n_actions());
    if policy.n_states() != s || policy.n_actions() != a || d.probs().len() != s {
        return Err(ExploreError::Shape("state-action distribution inputs disagree".into()));
    }
    let mut omega = Array1::zeros(s * a);
    for i in 0..s {
        for j in 0..a {
            omega[i * a + j] = d.probs()[i] * policy.probs()[[i, j]];
        }
    }
    let total = omega.sum();
    Distribution::new(omega / total)
}

/// SLEM (multiplicity-aware) and spectral gap of a chain, plus a
/// detailed-balance reversibility flag.
pub fn spectral_info(chain: &StateChain) -> Result<SpectralInfo> {
    let n = chain.n_states();
    let slem = if n == 1 {
        0.0
    } else {
        let m = nalgebra::DMatrix::from_fn(n, n, |i, j| chain.matrix()[[i, j]]);
        let schur = nalgebra::linalg::Schur::try_new(m, 1e-12, 100_000).ok_or_else(|| {
            ExploreError::Numeric("Schur iteration failed to converge on the chain matrix".into())
        })?;
        let eigs = schur.complex_eigenvalues();
        // remove exactly one eigenvalue closest to 1; the rest bound the SLEM
        let mut moduli: Vec<(f64, f64)> =
            eigs.iter().map(|l| (l.norm(), (l - nalgebra::Complex::new(1.0, 0.0)).norm())).collect();
        if moduli.iter().any(|m| !m.0.is_finite() || !m.1.is_finite()) {
            return Err(ExploreError::Numeric(
                "eigensolver returned non-finite eigenvalues for the chain matrix".into(),
            ));
        }
        let drop_idx = moduli
            .iter()
            .enumerate()
            .min_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
            .map(|(i, _)| i)
            .unwrap();
        moduli.swap_remove(drop_idx);
        moduli.iter().map(|m| m.0).fold(0.0, f64::max).clamp(0.0, 1.0)
    };
    let reversible = match stationary_distribution(chain, 1e-11, 100_000) {
        Ok(d) => {
            let p = chain.matrix();
            let mut ok = true;
            'outer: for i in 0..n {
                for j in 0..n {
                    let lhs = d.probs()[i] * p[[i, j]];
                    let rhs = d.probs()[j] * p[[j, i]];
                    if (lhs - rhs).abs() > 1e-7 {
                        ok = false;
                        break 'outer;
                    }
                }
            }
            ok
        }
        Err(_) => false,
    };
    Ok(SpectralInfo { slem, spectral_gap: 1.0 - slem, reversible })
}

/// Smallest `t` such that the worst-case total-variation distance between
/// the `t`-step distribution from a deterministic start and the steady
/// state drops to `eps`.
pub fn mixing_time(chain: &StateChain, eps: f64, t_cap: usize) -> Result<usize> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(ExploreError::InvalidParam(format!("mixing threshold {eps} outside (0, 1)")));
    }
    let d = stationary_distribution(chain, 1e-12, 200_000)?;
    let p = chain.matrix();
    let mut power = p.clone();
    let mut tv = f64::INFINITY;
    for t in 1..=t_cap {
        tv = power
            .outer_iter()
            .map(|row| 0.5 * row.iter().zip(d.probs().iter()).map(|(a, b)| (a - b).abs()).sum::<f64>())
            .fold(0.0, f64::max);
        if tv <= eps {
            return Ok(t);
        }
        power = power.dot(p);
    }
    Err(ExploreError::NonMixing { t_cap, tv })
}

/// Matrix distance kinds used across the objectives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixNorm {
    /// Maximum absolute row sum of the difference.
    Infinity,
    Frobenius,
    /// `b` is ignored; `a` is a chain and the result is
    /// `|| (I - a^T) 1 ||_1`, the L1 gap between column sums and 1.
    ColumnSumDeficit,
}

pub fn matrix_distance(a: &Array2<f64>, b: &Array2<f64>, kind: MatrixNorm) -> Result<f64> {
    match kind {
        MatrixNorm::Infinity | MatrixNorm::Frobenius => {
            if a.dim() != b.dim() {
                return Err(ExploreError::Shape(format!(
                    "matrix shapes {:?} and {:?} differ",
                    a.dim(),
                    b.dim()
                )));
            }
            let diff = a - b;
            Ok(match kind {
                MatrixNorm::Infinity => diff
                    .axis_iter(Axis(0))
                    .map(|row| row.iter().map(|x| x.abs()).sum::<f64>())
                    .fold(0.0, f64::max),
                MatrixNorm::Frobenius => diff.iter().map(|x| x * x).sum::<f64>().sqrt(),
                MatrixNorm::ColumnSumDeficit => unreachable!(),
            })
        }
        MatrixNorm::ColumnSumDeficit => {
            if a.nrows() != a.ncols() {
                return Err(ExploreError::Shape("column-sum deficit needs a square matrix".into()));
            }
            Ok((0..a.ncols())
                .map(|j| (1.0 - a.column(j).sum()).abs())
                .sum())
        }
    }
}
