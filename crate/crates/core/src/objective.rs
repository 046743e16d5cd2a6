//! Convex surrogate objectives for exploration: push the policy-induced
//! chain toward a doubly stochastic matrix (whose steady state is uniform)
//! or maximize steady-state entropy directly over the occupancy polytope.

use ndarray::{Array1, Array2};

use crate::error::{ExploreError, Result};
use crate::mdp::{PolicyTable, TabularMdp};
use crate::solver::{
    maximize_concave, FrankWolfeConfig, IpmConfig, LinearProgram, QuadraticProgram, SparseMatrix,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectiveKind {
    /// Minimize the infinity-norm distance to the doubly stochastic set.
    Infinity,
    /// Minimize the Frobenius-norm distance to the doubly stochastic set.
    Frobenius,
    /// Minimize the total column-sum deficit of the induced chain.
    ColumnSum,
    /// Maximize steady-state entropy over the occupancy polytope.
    Dual,
}

impl ObjectiveKind {
    pub const ALL: [ObjectiveKind; 4] =
        [ObjectiveKind::Infinity, ObjectiveKind::Frobenius, ObjectiveKind::ColumnSum, ObjectiveKind::Dual];

    pub fn name(self) -> &'static str {
        match self {
            ObjectiveKind::Infinity => "infinity",
            ObjectiveKind::Frobenius => "frobenius",
            ObjectiveKind::ColumnSum => "column-sum",
            ObjectiveKind::Dual => "dual",
        }
    }
}

impl std::str::FromStr for ObjectiveKind {
    type Err = ExploreError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "infinity" | "inf" => Ok(ObjectiveKind::Infinity),
            "frobenius" | "fro" => Ok(ObjectiveKind::Frobenius),
            "column-sum" | "cs" => Ok(ObjectiveKind::ColumnSum),
            "dual" => Ok(ObjectiveKind::Dual),
            other => Err(ExploreError::InvalidParam(format!("unknown objective '{other}'"))),
        }
    }
}

/// Shared knobs: an action floor `pi(a|s) >= xi` keeping every action
/// explored, and a cap `zeta` on the entries of the doubly stochastic
/// target (distance objectives only).
#[derive(Debug, Clone, Copy)]
pub struct ObjectiveParams {
    pub xi: f64,
    pub zeta: f64,
}

impl Default for ObjectiveParams {
    fn default() -> Self {
        Self { xi: 0.0, zeta: 1.0 }
    }
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub ipm: IpmConfig,
    pub fw: FrankWolfeConfig,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { ipm: IpmConfig::default(), fw: FrankWolfeConfig::default() }
    }
}

#[derive(Debug, Clone)]
pub struct ObjectiveSolution {
    pub kind: ObjectiveKind,
    pub policy: PolicyTable,
    /// Distance value for the three norm objectives; steady-state entropy
    /// in nats for [`ObjectiveKind::Dual`].
    pub objective_value: f64,
    /// Optimal doubly stochastic target, when the objective has one.
    pub target_matrix: Option<Array2<f64>>,
    pub iterations: usize,
}

/// Entropy bound for a fixed policy: `distance` is the infimum over
/// admissible targets and the bound is in nats alongside its value
/// normalized by `ln |S|`.
#[derive(Debug, Clone, Copy)]
pub struct BoundReport {
    pub kind: ObjectiveKind,
    pub distance: f64,
    pub bound_nats: f64,
    pub bound_normalized: f64,
}

fn check_params(mdp: &TabularMdp, kind: ObjectiveKind, p: ObjectiveParams) -> Result<()> {
    let n_actions = mdp.n_actions() as f64;
    let n_states = mdp.n_states() as f64;
    if !(0.0..=1.0 / n_actions).contains(&p.xi) {
        return Err(ExploreError::InvalidParam(format!(
            "action floor xi = {} outside [0, 1/|A|] = [0, {}]",
            p.xi,
            1.0 / n_actions
        )));
    }
    match kind {
        ObjectiveKind::ColumnSum | ObjectiveKind::Dual => {
            if p.zeta != 1.0 {
                return Err(ExploreError::InvalidParam(format!(
                    "target cap zeta = {} is only supported by the infinity and frobenius objectives",
                    p.zeta
                )));
            }
        }
        _ => {
            if !(0.0..=1.0).contains(&p.zeta) || p.zeta < 1.0 / n_states {
                return Err(ExploreError::InvalidParam(format!(
                    "target cap zeta = {} outside [1/|S|, 1] = [{}, 1]",
                    p.zeta,
                    1.0 / n_states
                )));
            }
        }
    }
    Ok(())
}

/// Doubly stochastic constraints on an `S x S` block starting at `offset`,
/// appended to `a`/`b` (which must have `2 * n_states` preallocated rows at
/// `row0`): all row sums and all column sums equal one.
fn add_doubly_stochastic_rows(
    a: &mut SparseMatrix,
    b: &mut Array1<f64>,
    row0: usize,
    offset: usize,
    n_states: usize,
) {
    for s in 0..n_states {
        for t in 0..n_states {
            a.add(row0 + s, offset + s * n_states + t, 1.0);
            a.add(row0 + n_states + t, offset + s * n_states + t, 1.0);
        }
        b[row0 + s] = 1.0;
        b[row0 + n_states + s] = 1.0;
    }
}

fn policy_from_slice(mdp: &TabularMdp, raw: &[f64]) -> Result<PolicyTable> {
    let (s, a) = (mdp.n_states(), mdp.n_actions());
    let mut probs = Array2::zeros((s, a));
    for i in 0..s {
        let row = &raw[i * a..(i + 1) * a];
        let total: f64 = row.iter().map(|&v| v.max(0.0)).sum();
        for j in 0..a {
            probs[[i, j]] = if total > 1e-12 { row[j].max(0.0) / total } else { 1.0 / a as f64 };
        }
    }
    PolicyTable::new(probs)
}

pub fn solve_objective(
    mdp: &TabularMdp,
    kind: ObjectiveKind,
    params: ObjectiveParams,
    opts: &SolveOptions,
) -> Result<ObjectiveSolution> {
    check_params(mdp, kind, params)?;
    match kind {
        ObjectiveKind::Infinity => solve_infinity(mdp, params, opts),
        ObjectiveKind::Frobenius => solve_frobenius(mdp, params, opts),
        ObjectiveKind::ColumnSum => solve_column_sum(mdp, params, opts),
        ObjectiveKind::Dual => solve_dual(mdp, params, opts),
    }
}

/// min over (policy, doubly stochastic target) of the infinity norm of
/// `target - chain(policy)`, as an LP with per-row absolute-value splits.
fn solve_infinity(mdp: &TabularMdp, p: ObjectiveParams, opts: &SolveOptions) -> Result<ObjectiveSolution> {
    let (s, a) = (mdp.n_states(), mdp.n_actions());
    let (s2, sa) = (s * s, s * a);
    let pu = |i: usize, j: usize| i * s + j;
    let pi = |i: usize, j: usize| s2 + i * a + j;
    let dv = |i: usize, j: usize| s2 + sa + i * s + j;
    let n = s2 + sa + s2 + 1;
    let v_idx = n - 1;

    let mut lp = LinearProgram::new(n);
    lp.c[v_idx] = 1.0;
    for i in 0..s2 {
        lp.lower[i] = 0.0;
        lp.upper[i] = p.zeta;
        lp.lower[s2 + sa + i] = 0.0;
        lp.upper[s2 + sa + i] = 2.0;
    }
    for i in 0..sa {
        lp.lower[s2 + i] = p.xi;
        lp.upper[s2 + i] = 1.0;
    }
    lp.lower[v_idx] = 0.0;
    lp.upper[v_idx] = 2.0 * s as f64;

    let mut a_eq = SparseMatrix::new(3 * s, n);
    let mut b_eq = Array1::zeros(3 * s);
    add_doubly_stochastic_rows(&mut a_eq, &mut b_eq, 0, 0, s);
    for i in 0..s {
        for j in 0..a {
            a_eq.add(2 * s + i, pi(i, j), 1.0);
        }
        b_eq[2 * s + i] = 1.0;
    }
    lp.a_eq = a_eq;
    lp.b_eq = b_eq;

    let mut a_ub = SparseMatrix::new(2 * s2 + s, n);
    let b_ub = Array1::zeros(2 * s2 + s);
    let t = mdp.transition();
    for i in 0..s {
        for j in 0..s {
            let r = 2 * (i * s + j);
            // |target(i,j) - sum_a pi(i,a) P(i,a,j)| <= d(i,j)
            a_ub.add(r, pu(i, j), 1.0);
            a_ub.add(r + 1, pu(i, j), -1.0);
            for k in 0..a {
                let v = t[[i, k, j]];
                if v != 0.0 {
                    a_ub.add(r, pi(i, k), -v);
                    a_ub.add(r + 1, pi(i, k), v);
                }
            }
            a_ub.add(r, dv(i, j), -1.0);
            a_ub.add(r + 1, dv(i, j), -1.0);
            a_ub.add(2 * s2 + i, dv(i, j), 1.0);
        }
        a_ub.add(2 * s2 + i, v_idx, -1.0);
    }
    lp.a_ub = a_ub;
    lp.b_ub = b_ub;

    let rep = lp.solve(&opts.ipm)?.require_optimal()?;
    let policy = policy_from_slice(mdp, &rep.x.as_slice().unwrap()[s2..s2 + sa])?;
    let target = Array2::from_shape_fn((s, s), |(i, j)| rep.x[pu(i, j)]);
    Ok(ObjectiveSolution {
        kind: ObjectiveKind::Infinity,
        policy,
        objective_value: rep.objective,
        target_matrix: Some(target),
        iterations: rep.iterations,
    })
}

/// min over (policy, target) of the squared Frobenius distance; reported as
/// the norm itself.
fn solve_frobenius(mdp: &TabularMdp, p: ObjectiveParams, opts: &SolveOptions) -> Result<ObjectiveSolution> {
    let (s, a) = (mdp.n_states(), mdp.n_actions());
    let (s2, sa) = (s * s, s * a);
    let n = s2 + sa;
    let pi = |i: usize, j: usize| s2 + i * a + j;

    let mut qp = QuadraticProgram::new(n);
    for i in 0..s2 {
        qp.q.add(i, i, 2.0);
        qp.lower[i] = 0.0;
        qp.upper[i] = p.zeta;
    }
    for i in 0..sa {
        qp.lower[s2 + i] = p.xi;
        qp.upper[s2 + i] = 1.0;
    }
    // squared distance ||target - B pi||^2 with B[(i,j), (i,k)] = P(i,k,j)
    let t = mdp.transition();
    for i in 0..s {
        for j in 0..s {
            let row = i * s + j;
            for k in 0..a {
                let v = t[[i, k, j]];
                if v != 0.0 {
                    qp.q.add(row, pi(i, k), -2.0 * v);
                    qp.q.add(pi(i, k), row, -2.0 * v);
                }
            }
            for k1 in 0..a {
                let v1 = t[[i, k1, j]];
                if v1 == 0.0 {
                    continue;
                }
                for k2 in 0..a {
                    let v2 = t[[i, k2, j]];
                    if v2 != 0.0 {
                        qp.q.add(pi(i, k1), pi(i, k2), 2.0 * v1 * v2);
                    }
                }
            }
        }
    }

    let mut a_eq = SparseMatrix::new(3 * s, n);
    let mut b_eq = Array1::zeros(3 * s);
    add_doubly_stochastic_rows(&mut a_eq, &mut b_eq, 0, 0, s);
    for i in 0..s {
        for j in 0..a {
            a_eq.add(2 * s + i, pi(i, j), 1.0);
        }
        b_eq[2 * s + i] = 1.0;
    }
    qp.a_eq = a_eq;
    qp.b_eq = b_eq;

    let rep = qp.solve(&opts.ipm)?.require_optimal()?;
    let policy = policy_from_slice(mdp, &rep.x.as_slice().unwrap()[s2..s2 + sa])?;
    let target = Array2::from_shape_fn((s, s), |(i, j)| rep.x[i * s + j]);
    Ok(ObjectiveSolution {
        kind: ObjectiveKind::Frobenius,
        policy,
        // 1/2 x'Qx is exactly the squared distance
        objective_value: rep.objective.max(0.0).sqrt(),
        target_matrix: Some(target),
        iterations: rep.iterations,
    })
}

/// min of the L1 column-sum deficit `|| (I - chain') 1 ||_1`, an LP that
/// needs no explicit target matrix.
fn solve_column_sum(mdp: &TabularMdp, p: ObjectiveParams, opts: &SolveOptions) -> Result<ObjectiveSolution> {
    let (s, a) = (mdp.n_states(), mdp.n_actions());
    let sa = s * a;
    let n = sa + s;
    let pi = |i: usize, j: usize| i * a + j;

    let mut lp = LinearProgram::new(n);
    for i in 0..sa {
        lp.lower[i] = p.xi;
        lp.upper[i] = 1.0;
    }
    for j in 0..s {
        lp.c[sa + j] = 1.0;
        lp.lower[sa + j] = 0.0;
        lp.upper[sa + j] = s as f64 + 1.0;
    }

    let mut a_eq = SparseMatrix::new(s, n);
    let mut b_eq = Array1::zeros(s);
    for i in 0..s {
        for j in 0..a {
            a_eq.add(i, pi(i, j), 1.0);
        }
        b_eq[i] = 1.0;
    }
    lp.a_eq = a_eq;
    lp.b_eq = b_eq;

    // |1 - column_sum_j(chain)| <= v_j
    let mut a_ub = SparseMatrix::new(2 * s, n);
    let mut b_ub = Array1::zeros(2 * s);
    let t = mdp.transition();
    for j in 0..s {
        for i in 0..s {
            for k in 0..a {
                let v = t[[i, k, j]];
                if v != 0.0 {
                    a_ub.add(2 * j, pi(i, k), -v);
                    a_ub.add(2 * j + 1, pi(i, k), v);
                }
            }
        }
        a_ub.add(2 * j, sa + j, -1.0);
        a_ub.add(2 * j + 1, sa + j, -1.0);
        b_ub[2 * j] = -1.0;
        b_ub[2 * j + 1] = 1.0;
    }
    lp.a_ub = a_ub;
    lp.b_ub = b_ub;

    let rep = lp.solve(&opts.ipm)?.require_optimal()?;
    let policy = policy_from_slice(mdp, &rep.x.as_slice().unwrap()[..sa])?;
    Ok(ObjectiveSolution {
        kind: ObjectiveKind::ColumnSum,
        policy,
        objective_value: rep.objective,
        target_matrix: None,
        iterations: rep.iterations,
    })
}

/// Occupancy polytope of the MDP: stationary state-action distributions.
/// Returns the equality system and (for `xi > 0`) the floor inequalities.
fn occupancy_constraints(
    mdp: &TabularMdp,
    xi: f64,
) -> (SparseMatrix, Array1<f64>, SparseMatrix, Array1<f64>) {
    let (s, a) = (mdp.n_states(), mdp.n_actions());
    let sa = s * a;
    let t = mdp.transition();
    // stationarity for all states but the last (redundant), plus normalization
    let m = s;
    let mut a_eq = SparseMatrix::new(m, sa);
    let mut b_eq = Array1::zeros(m);
    for tgt in 0..s - 1 {
        for k in 0..a {
            a_eq.add(tgt, tgt * a + k, 1.0);
        }
        for i in 0..s {
            for k in 0..a {
                let v = t[[i, k, tgt]];
                if v != 0.0 {
                    a_eq.add(tgt, i * a + k, -v);
                }
            }
        }
    }
    for i in 0..sa {
        a_eq.add(m - 1, i, 1.0);
    }
    b_eq[m - 1] = 1.0;

    let (a_ub, b_ub) = if xi > 0.0 {
        // omega(s, a) >= xi * sum_a' omega(s, a')
        let mut mat = SparseMatrix::new(sa, sa);
        for i in 0..s {
            for k in 0..a {
                let r = i * a + k;
                mat.add(r, r, -(1.0 - xi));
                for k2 in 0..a {
                    if k2 != k {
                        mat.add(r, i * a + k2, xi);
                    }
                }
            }
        }
        (mat, Array1::zeros(sa))
    } else {
        (SparseMatrix::new(0, sa), Array1::zeros(0))
    };
    (a_eq, b_eq, a_ub, b_ub)
}

/// Maximize the entropy of the state marginal of a stationary state-action
/// distribution, by conditional gradient over the occupancy polytope; the
/// policy is read off the optimal occupancy.
fn solve_dual(mdp: &TabularMdp, p: ObjectiveParams, opts: &SolveOptions) -> Result<ObjectiveSolution> {
    let (s, a) = (mdp.n_states(), mdp.n_actions());
    let sa = s * a;
    let (a_eq, b_eq, a_ub, b_ub) = occupancy_constraints(mdp, p.xi);

    let mut template = LinearProgram::new(sa);
    template.lower = Array1::zeros(sa);
    template.upper = Array1::from_elem(sa, 1.0);
    template.a_eq = a_eq;
    template.b_eq = b_eq;
    template.a_ub = a_ub;
    template.b_ub = b_ub;

    // the oracle tolerance can stay loose: the step size caps its influence
    let lmo_cfg = IpmConfig { tol: 1e-8, tol_mu: 1e-9, ..opts.ipm.clone() };
    let mut lmo = |g: &Array1<f64>| -> Result<Array1<f64>> {
        let mut lp = template.clone();
        lp.c = -g.clone();
        Ok(lp.solve(&lmo_cfg)?.require_optimal()?.x)
    };

    let marginal = |omega: &Array1<f64>| -> Array1<f64> {
        Array1::from_shape_fn(s, |i| (0..a).map(|k| omega[i * a + k].max(0.0)).sum())
    };
    let value = move |omega: &Array1<f64>| -> f64 {
        marginal(omega).iter().map(|&d| if d > 1e-300 { -d * d.ln() } else { 0.0 }).sum()
    };
    let gradient = move |omega: &Array1<f64>| -> Array1<f64> {
        let d = marginal(omega);
        Array1::from_shape_fn(sa, |i| -(d[i / a].max(1e-12).ln()) - 1.0)
    };

    // well-centered feasible start: the oracle under a zero objective
    let x0 = lmo(&Array1::zeros(sa))?;
    let rep = maximize_concave(&value, &gradient, &mut lmo, x0, &opts.fw)?;

    let mut probs = Array2::zeros((s, a));
    for i in 0..s {
        let total: f64 = (0..a).map(|k| rep.x[i * a + k].max(0.0)).sum();
        for k in 0..a {
            probs[[i, k]] =
                if total > 1e-9 { rep.x[i * a + k].max(0.0) / total } else { 1.0 / a as f64 };
        }
    }
    Ok(ObjectiveSolution {
        kind: ObjectiveKind::Dual,
        policy: PolicyTable::new(probs)?,
        objective_value: rep.objective,
        target_matrix: None,
        iterations: rep.iterations,
    })
}

/// Tightest entropy bound certified by `kind` for a fixed policy; the inner
/// infimum over admissible targets is solved exactly.
pub fn entropy_lower_bound(
    mdp: &TabularMdp,
    policy: &PolicyTable,
    kind: ObjectiveKind,
    params: ObjectiveParams,
    opts: &SolveOptions,
) -> Result<BoundReport> {
    check_params(mdp, kind, params)?;
    let s = mdp.n_states();
    let sf = s as f64;
    let chain = crate::mdp::induce_chain(mdp, policy)?;
    let cm = chain.matrix();

    let (distance, factor) = match kind {
        ObjectiveKind::Infinity => (nearest_infinity(cm, params.zeta, opts)?, sf),
        ObjectiveKind::Frobenius => (nearest_frobenius(cm, params.zeta, opts)?, sf * sf),
        ObjectiveKind::ColumnSum => {
            let deficit: f64 = (0..s).map(|j| (1.0 - cm.column(j).sum()).abs()).sum();
            (deficit, sf)
        }
        ObjectiveKind::Dual => {
            return Err(ExploreError::InvalidParam(
                "the dual objective optimizes entropy directly and has no bound form".into(),
            ))
        }
    };
    let bound_nats = sf.ln() - factor * distance * distance;
    Ok(BoundReport { kind, distance, bound_nats, bound_normalized: bound_nats / sf.ln() })
}

/// Infinity distance from a fixed chain to the capped doubly stochastic set.
fn nearest_infinity(chain: &Array2<f64>, zeta: f64, opts: &SolveOptions) -> Result<f64> {
    let s = chain.nrows();
    let s2 = s * s;
    let n = 2 * s2 + 1;
    let v_idx = n - 1;
    let dv = |i: usize, j: usize| s2 + i * s + j;

    let mut lp = LinearProgram::new(n);
    lp.c[v_idx] = 1.0;
    for i in 0..s2 {
        lp.lower[i] = 0.0;
        lp.upper[i] = zeta;
        lp.lower[s2 + i] = 0.0;
        lp.upper[s2 + i] = 2.0;
    }
    lp.lower[v_idx] = 0.0;
    lp.upper[v_idx] = 2.0 * s as f64;

    let mut a_eq = SparseMatrix::new(2 * s, n);
    let mut b_eq = Array1::zeros(2 * s);
    add_doubly_stochastic_rows(&mut a_eq, &mut b_eq, 0, 0, s);
    lp.a_eq = a_eq;
    lp.b_eq = b_eq;

    let mut a_ub = SparseMatrix::new(2 * s2 + s, n);
    let mut b_ub = Array1::zeros(2 * s2 + s);
    for i in 0..s {
        for j in 0..s {
            let r = 2 * (i * s + j);
            a_ub.add(r, i * s + j, 1.0);
            b_ub[r] = chain[[i, j]];
            a_ub.add(r + 1, i * s + j, -1.0);
            b_ub[r + 1] = -chain[[i, j]];
            a_ub.add(r, dv(i, j), -1.0);
            a_ub.add(r + 1, dv(i, j), -1.0);
            a_ub.add(2 * s2 + i, dv(i, j), 1.0);
        }
        a_ub.add(2 * s2 + i, v_idx, -1.0);
    }
    lp.a_ub = a_ub;
    lp.b_ub = b_ub;

    Ok(lp.solve(&opts.ipm)?.require_optimal()?.objective)
}

/// Frobenius distance from a fixed chain to the capped doubly stochastic set.
fn nearest_frobenius(chain: &Array2<f64>, zeta: f64, opts: &SolveOptions) -> Result<f64> {
    let s = chain.nrows();
    let s2 = s * s;
    // ||x - chain||^2 up to the constant ||chain||^2
    let mut qp = QuadraticProgram::new(s2);
    for i in 0..s {
        for j in 0..s {
            let idx = i * s + j;
            qp.q.add(idx, idx, 2.0);
            qp.c[idx] = -2.0 * chain[[i, j]];
            qp.lower[idx] = 0.0;
            qp.upper[idx] = zeta;
        }
    }
    let mut a_eq = SparseMatrix::new(2 * s, s2);
    let mut b_eq = Array1::zeros(2 * s);
    add_doubly_stochastic_rows(&mut a_eq, &mut b_eq, 0, 0, s);
    qp.a_eq = a_eq;
    qp.b_eq = b_eq;

    let rep = qp.solve(&opts.ipm)?.require_optimal()?;
    let mut dist2 = 0.0;
    for i in 0..s {
        for j in 0..s {
            let d = rep.x[i * s + j] - chain[[i, j]];
            dist2 += d * d;
        }
    }
    Ok(dist2.sqrt())
}

#[cfg(test)]
mod tests;
