use ndarray::{Array1, Array2};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;

fn dense_solve(a: &Array2<f64>, b: &Array1<f64>) -> Option<Array1<f64>> {
    let n = b.len();
    let mut m: Vec<f64> = a.iter().cloned().collect();
    let lu = super::linalg::LuFactor::new(std::mem::take(&mut m), n)?;
    let mut rhs: Vec<f64> = b.iter().cloned().collect();
    lu.solve(&mut rhs);
    Some(Array1::from_vec(rhs))
}

/// Brute-force LP oracle: enumerate all vertex candidates (n active
/// constraints drawn from equalities, inequalities and bounds), keep the
/// feasible ones, and take the best objective.
fn lp_vertex_oracle(lp: &LinearProgram) -> Option<f64> {
    let n = lp.c.len();
    // each candidate active constraint as a dense (row, rhs) pair
    let mut rows: Vec<(Vec<f64>, f64)> = Vec::new();
    for r in 0..lp.a_eq.n_rows() {
        let mut row = vec![0.0; n];
        for &(c, v) in lp.a_eq.row(r) {
            row[c] = v;
        }
        rows.push((row, lp.b_eq[r]));
    }
    let n_eq = rows.len();
    for r in 0..lp.a_ub.n_rows() {
        let mut row = vec![0.0; n];
        for &(c, v) in lp.a_ub.row(r) {
            row[c] = v;
        }
        rows.push((row, lp.b_ub[r]));
    }
    for i in 0..n {
        if lp.lower[i].is_finite() {
            let mut row = vec![0.0; n];
            row[i] = 1.0;
            rows.push((row, lp.lower[i]));
        }
        if lp.upper[i].is_finite() {
            let mut row = vec![0.0; n];
            row[i] = 1.0;
            rows.push((row, lp.upper[i]));
        }
    }
    let total = rows.len();
    let mut best: Option<f64> = None;
    let mut pick = vec![0usize; n];
    // iterate over all n-subsets that include every equality row
    fn rec(
        rows: &[(Vec<f64>, f64)],
        n_eq: usize,
        lp: &LinearProgram,
        pick: &mut Vec<usize>,
        depth: usize,
        start: usize,
        best: &mut Option<f64>,
        total: usize,
    ) {
        let n = lp.c.len();
        if depth == n {
            if pick[..n_eq.min(n)] != (0..n_eq.min(n)).collect::<Vec<_>>()[..] {
                return;
            }
            let mut a = Array2::zeros((n, n));
            let mut b = Array1::zeros(n);
            for (k, &idx) in pick.iter().enumerate() {
                for j in 0..n {
                    a[[k, j]] = rows[idx].0[j];
                }
                b[k] = rows[idx].1;
            }
            let Some(x) = dense_solve(&a, &b) else { return };
            // feasibility
            for r in 0..lp.a_eq.n_rows() {
                let v: f64 = lp.a_eq.row(r).iter().map(|&(c, w)| w * x[c]).sum();
                if (v - lp.b_eq[r]).abs() > 1e-7 {
                    return;
                }
            }
            for r in 0..lp.a_ub.n_rows() {
                let v: f64 = lp.a_ub.row(r).iter().map(|&(c, w)| w * x[c]).sum();
                if v > lp.b_ub[r] + 1e-7 {
                    return;
                }
            }
            for i in 0..n {
                if x[i] < lp.lower[i] - 1e-7 || x[i] > lp.upper[i] + 1e-7 {
                    return;
                }
            }
            let obj = lp.c.dot(&x);
            *best = Some(best.map_or(obj, |b: f64| b.min(obj)));
            return;
        }
        for idx in start..total {
            pick[depth] = idx;
            rec(rows, n_eq, lp, pick, depth + 1, idx + 1, best, total);
        }
    }
    rec(&rows, n_eq, lp, &mut pick, 0, 0, &mut best, total);
    best
}

fn random_feasible_lp(rng: &mut ChaCha8Rng, n: usize, n_eq: usize, n_ub: usize) -> LinearProgram {
    let mut lp = LinearProgram::new(n);
    let x0 = Array1::from_shape_fn(n, |_| rng.random_range(0.2..0.8));
    for i in 0..n {
        lp.c[i] = rng.random_range(-1.0..1.0);
        lp.lower[i] = 0.0;
        lp.upper[i] = 1.0;
    }
    let mut a_eq = SparseMatrix::new(n_eq, n);
    let mut b_eq = Array1::zeros(n_eq);
    for r in 0..n_eq {
        let mut dot = 0.0;
        for i in 0..n {
            let v = rng.random_range(-1.0..1.0);
            a_eq.add(r, i, v);
            dot += v * x0[i];
        }
        b_eq[r] = dot;
    }
    let mut a_ub = SparseMatrix::new(n_ub, n);
    let mut b_ub = Array1::zeros(n_ub);
    for r in 0..n_ub {
        let mut dot = 0.0;
        for i in 0..n {
            let v = rng.random_range(-1.0..1.0);
            a_ub.add(r, i, v);
            dot += v * x0[i];
        }
        b_ub[r] = dot + rng.random_range(0.05..0.5);
    }
    lp.a_eq = a_eq;
    lp.b_eq = b_eq;
    lp.a_ub = a_ub;
    lp.b_ub = b_ub;
    lp
}

#[test]
fn lp_matches_vertex_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let cfg = IpmConfig::default();
    let mut checked = 0;
    for _ in 0..30 {
        let lp = random_feasible_lp(&mut rng, 3, 1, 2);
        let oracle = lp_vertex_oracle(&lp).expect("construction guarantees feasibility");
        let rep = lp.solve(&cfg).unwrap().require_optimal().unwrap();
        assert!(
            (rep.objective - oracle).abs() < 1e-6,
            "ipm {} vs oracle {}",
            rep.objective,
            oracle
        );
        checked += 1;
    }
    assert_eq!(checked, 30);
}

#[test]
fn lp_centers_degenerate_optimal_face() {
    // zero objective over the simplex: every point is optimal and the
    // interior-point limit should be well inside the face
    let n = 4;
    let mut lp = LinearProgram::new(n);
    for i in 0..n {
        lp.lower[i] = 0.0;
        lp.upper[i] = 1.0;
    }
    let mut a = SparseMatrix::new(1, n);
    for i in 0..n {
        a.add(0, i, 1.0);
    }
    lp.a_eq = a;
    lp.b_eq = Array1::from_vec(vec![1.0]);
    let rep = lp.solve(&IpmConfig::default()).unwrap().require_optimal().unwrap();
    for i in 0..n {
        assert!((rep.x[i] - 0.25).abs() < 0.02, "x[{i}] = {}", rep.x[i]);
    }
}

#[test]
fn qp_segment_matches_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        // minimize 1/2 x'Qx + c'x over x1 + x2 = 1, x in [0,1]^2
        let m = Array2::from_shape_fn((2, 2), |_| rng.random_range(-1.0..1.0));
        let q = m.t().dot(&m) + Array2::<f64>::eye(2) * 0.1;
        let c = Array1::from_shape_fn(2, |_| rng.random_range(-1.0..1.0));

        let mut qp = QuadraticProgram::new(2);
        for i in 0..2 {
            for j in 0..2 {
                qp.q.add(i, j, q[[i, j]]);
            }
            qp.lower[i] = 0.0;
            qp.upper[i] = 1.0;
        }
        qp.c = c.clone();
        let mut a = SparseMatrix::new(1, 2);
        a.add(0, 0, 1.0);
        a.add(0, 1, 1.0);
        qp.a_eq = a;
        qp.b_eq = Array1::from_vec(vec![1.0]);

        // x = (t, 1-t): quadratic phi(t) = at^2 + bt + k
        let av = 0.5 * (q[[0, 0]] - 2.0 * q[[0, 1]] + q[[1, 1]]);
        let bv = q[[0, 1]] - q[[1, 1]] + c[0] - c[1];
        let t_free = if av > 0.0 { (-bv / (2.0 * av)).clamp(0.0, 1.0) } else { 0.0 };
        let eval = |t: f64| {
            let x = Array1::from_vec(vec![t, 1.0 - t]);
            0.5 * x.dot(&q.dot(&x)) + c.dot(&x)
        };
        let oracle = eval(t_free).min(eval(0.0)).min(eval(1.0));

        let rep = qp.solve(&IpmConfig::default()).unwrap().require_optimal().unwrap();
        assert!(
            (rep.objective - oracle).abs() < 1e-6,
            "ipm {} vs oracle {}",
            rep.objective,
            oracle
        );
    }
}

#[test]
fn qp_separable_clips_to_box() {
    // minimize sum (x_i - a_i)^2 over [0,1]^n: solution is clip(a)
    let a = [1.7, -0.3, 0.4, 0.99];
    let n = a.len();
    let mut qp = QuadraticProgram::new(n);
    for i in 0..n {
        qp.q.add(i, i, 2.0);
        qp.c[i] = -2.0 * a[i];
        qp.lower[i] = 0.0;
        qp.upper[i] = 1.0;
    }
    let rep = qp.solve(&IpmConfig::default()).unwrap().require_optimal().unwrap();
    for i in 0..n {
        assert!((rep.x[i] - a[i].clamp(0.0, 1.0)).abs() < 1e-6, "x[{i}] = {}", rep.x[i]);
    }
}

#[test]
fn qp_equality_matches_kkt_solve() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let n = 5;
    let m = Array2::from_shape_fn((n, n), |_| rng.random_range(-1.0..1.0));
    let q = m.t().dot(&m) + Array2::<f64>::eye(n) * 0.5;
    let c = Array1::from_shape_fn(n, |_| rng.random_range(-1.0..1.0));

    let mut qp = QuadraticProgram::new(n);
    for i in 0..n {
        for j in 0..n {
            qp.q.add(i, j, q[[i, j]]);
        }
    }
    qp.c = c.clone();
    qp.lower = Array1::from_elem(n, -10.0);
    qp.upper = Array1::from_elem(n, 10.0);
    let mut a = SparseMatrix::new(1, n);
    for i in 0..n {
        a.add(0, i, 1.0);
    }
    qp.a_eq = a;
    qp.b_eq = Array1::from_vec(vec![1.0]);

    // dense KKT oracle (bounds inactive by construction)
    let mut kkt = Array2::zeros((n + 1, n + 1));
    let mut rhs = Array1::zeros(n + 1);
    for i in 0..n {
        for j in 0..n {
            kkt[[i, j]] = q[[i, j]];
        }
        kkt[[i, n]] = 1.0;
        kkt[[n, i]] = 1.0;
        rhs[i] = -c[i];
    }
    rhs[n] = 1.0;
    let sol = dense_solve(&kkt, &rhs).unwrap();

    let rep = qp.solve(&IpmConfig::default()).unwrap().require_optimal().unwrap();
    for i in 0..n {
        assert!((rep.x[i] - sol[i]).abs() < 1e-6, "x[{i}] = {} vs {}", rep.x[i], sol[i]);
    }
}

#[test]
fn lp_reports_infeasible() {
    let mut lp = LinearProgram::new(1);
    lp.lower[0] = 0.0;
    lp.upper[0] = 1.0;
    let mut a = SparseMatrix::new(1, 1);
    a.add(0, 0, 1.0);
    lp.a_eq = a;
    lp.b_eq = Array1::from_vec(vec![2.0]);
    let rep = lp.solve(&IpmConfig::default()).unwrap();
    assert_eq!(rep.status, SolveStatus::Infeasible);
    assert!(rep.require_optimal().is_err());
}

#[test]
fn lp_reports_unbounded() {
    let mut lp = LinearProgram::new(1);
    lp.c[0] = -1.0;
    lp.lower[0] = 0.0;
    let rep = lp.solve(&IpmConfig::default()).unwrap();
    assert_eq!(rep.status, SolveStatus::Unbounded);
}

#[test]
fn frank_wolfe_entropy_over_simplex() {
    let n = 6;
    let value = |x: &Array1<f64>| -> f64 {
        -x.iter().map(|&p| if p > 1e-12 { p * p.ln() } else { 0.0 }).sum::<f64>()
    };
    let gradient =
        |x: &Array1<f64>| Array1::from_shape_fn(n, |i| -(x[i].max(1e-12).ln()) - 1.0);
    let mut lmo = |g: &Array1<f64>| -> crate::Result<Array1<f64>> {
        let mut best = 0;
        for i in 1..n {
            if g[i] > g[best] {
                best = i;
            }
        }
        let mut s = Array1::zeros(n);
        s[best] = 1.0;
        Ok(s)
    };
    let mut x0 = Array1::zeros(n);
    x0[0] = 0.7;
    x0[1] = 0.3;
    let cfg = FrankWolfeConfig { max_iters: 5000, gap_tol: 1e-5 };
    let rep = maximize_concave(&value, &gradient, &mut lmo, x0, &cfg).unwrap();
    let target = (n as f64).ln();
    assert!((rep.objective - target).abs() < 1e-4, "H = {} vs {}", rep.objective, target);
    // gap bounds suboptimality
    assert!(target - rep.objective <= rep.gap + 1e-9);
}

#[test]
fn frank_wolfe_is_monotone() {
    // quadratic with maximizer outside the simplex; record objective path
    let n = 3;
    let a = Array1::from_vec(vec![2.0, -1.0, 0.5]);
    let value = |x: &Array1<f64>| -> f64 { -(x - &a).dot(&(x - &a)) };
    let gradient = |x: &Array1<f64>| -> Array1<f64> { (x - &a) * -2.0 };
    let mut lmo = |g: &Array1<f64>| -> crate::Result<Array1<f64>> {
        let mut s = Array1::zeros(n);
        let best = (0..n).max_by(|&i, &j| g[i].partial_cmp(&g[j]).unwrap()).unwrap();
        s[best] = 1.0;
        Ok(s)
    };
    let mut x = Array1::from_elem(n, 1.0 / n as f64);
    let mut prev = value(&x);
    for _ in 0..50 {
        let rep = maximize_concave(
            &value,
            &gradient,
            &mut lmo,
            x.clone(),
            &FrankWolfeConfig { max_iters: 1, gap_tol: 1e-12 },
        )
        .unwrap();
        x = rep.x;
        assert!(rep.objective >= prev - 1e-12);
        prev = rep.objective;
    }
    // optimum on the simplex places all mass on the coordinate closest to a
    assert!((prev - value(&Array1::from_vec(vec![1.0, 0.0, 0.0]))).abs() < 1e-2);
}
