//! Frank-Wolfe (conditional gradient) maximization of a smooth concave
//! function over a polytope reached through a linear maximization oracle.

use ndarray::Array1;

use crate::error::Result;

#[derive(Debug, Clone)]
pub struct FrankWolfeConfig {
    pub max_iters: usize,
    /// Stop once the duality gap `<grad, s - x>` falls below this.
    pub gap_tol: f64,
}

impl Default for FrankWolfeConfig {
    fn default() -> Self {
        Self { max_iters: 2000, gap_tol: 1e-6 }
    }
}

#[derive(Debug, Clone)]
pub struct FrankWolfeReport {
    pub x: Array1<f64>,
    pub objective: f64,
    /// Last duality gap; an upper bound on the suboptimality.
    pub gap: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Maximizes `value` from the feasible start `x0`. `lmo(g)` must return a
/// feasible maximizer of `<g, s>`. Iterates never leave the polytope, and
/// the objective is kept monotone by halving the classical `2 / (k + 2)`
/// step whenever it would decrease the value.
pub fn maximize_concave(
    value: &dyn Fn(&Array1<f64>) -> f64,
    gradient: &dyn Fn(&Array1<f64>) -> Array1<f64>,
    lmo: &mut dyn FnMut(&Array1<f64>) -> Result<Array1<f64>>,
    x0: Array1<f64>,
    cfg: &FrankWolfeConfig,
) -> Result<FrankWolfeReport> {
    let mut x = x0;
    let mut fx = value(&x);
    let mut gap = f64::INFINITY;
    let mut converged = false;
    let mut iterations = cfg.max_iters;
    for k in 0..cfg.max_iters {
        let g = gradient(&x);
        let s = lmo(&g)?;
        let d = &s - &x;
        gap = g.dot(&d);
        if gap <= cfg.gap_tol {
            converged = true;
            iterations = k;
            break;
        }
        let mut gamma = 2.0 / (k + 2) as f64;
        let mut accepted = false;
        for _ in 0..40 {
            let trial = &x + &(&d * gamma);
            let ft = value(&trial);
            if ft >= fx {
                x = trial;
                fx = ft;
                accepted = true;
                break;
            }
            gamma *= 0.5;
        }
        if !accepted {
            // no improving step along an ascent direction: numerically done
            converged = gap <= cfg.gap_tol.max(1e-4);
            iterations = k;
            break;
        }
    }
    Ok(FrankWolfeReport { x, objective: fx, gap, iterations, converged })
}
