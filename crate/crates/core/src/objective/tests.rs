use ndarray::{Array1, Array3};

use super::*;
use crate::env::{random_mdp, single_chain};
use crate::mdp::{induce_chain, stationary_distribution, PolicyTable};

fn stationary_entropy(mdp: &TabularMdp, policy: &PolicyTable) -> (f64, f64) {
    let chain = induce_chain(mdp, policy).unwrap();
    let d = stationary_distribution(&chain, 1e-10, 100_000).unwrap();
    (d.entropy_nats(), d.entropy_normalized())
}

/// Deterministic cycle walk: LEFT and RIGHT move deterministically, so the
/// uniform policy induces a doubly stochastic chain.
fn cycle_mdp(n: usize) -> TabularMdp {
    let mut t = Array3::zeros((n, 2, n));
    for s in 0..n {
        t[[s, 0, (s + 1) % n]] = 1.0;
        t[[s, 1, (s + n - 1) % n]] = 1.0;
    }
    TabularMdp::new(t, Array1::from_elem(n, 1.0 / n as f64)).unwrap()
}

#[test]
fn cycle_reaches_zero_distance_and_uniform_entropy() {
    let mdp = cycle_mdp(5);
    let opts = SolveOptions::default();
    for kind in [ObjectiveKind::Infinity, ObjectiveKind::Frobenius, ObjectiveKind::ColumnSum] {
        let sol = solve_objective(&mdp, kind, ObjectiveParams::default(), &opts).unwrap();
        // squared-distance objectives only localize sqrt(tol) around zero
        assert!(sol.objective_value.abs() < 1e-3, "{}: {}", kind.name(), sol.objective_value);
        let (_, hn) = stationary_entropy(&mdp, &sol.policy);
        assert!(hn > 0.9999, "{}: normalized entropy {hn}", kind.name());
    }
    let sol =
        solve_objective(&mdp, ObjectiveKind::Dual, ObjectiveParams::default(), &opts).unwrap();
    assert!((sol.objective_value - (5.0f64).ln()).abs() < 1e-3, "dual H = {}", sol.objective_value);
}

#[test]
fn single_chain_matches_published_entropies() {
    let mdp = single_chain(10, 0.1).unwrap().mdp;
    let opts = SolveOptions::default();
    let cases = [
        (ObjectiveKind::Infinity, 0.983),
        (ObjectiveKind::Frobenius, 0.984),
        (ObjectiveKind::ColumnSum, 0.985),
        (ObjectiveKind::Dual, 0.985),
    ];
    for (kind, expected) in cases {
        let sol = solve_objective(&mdp, kind, ObjectiveParams::default(), &opts).unwrap();
        let (_, hn) = stationary_entropy(&mdp, &sol.policy);
        assert!((hn - expected).abs() < 0.01, "{}: {hn} vs {expected}", kind.name());
    }
}

#[test]
fn single_chain_constrained_matches_published_metrics() {
    // floor 0.1 with a 0.7 cap on the two distance objectives
    let mdp = single_chain(10, 0.1).unwrap().mdp;
    let opts = SolveOptions::default();
    let cases = [
        (ObjectiveKind::Infinity, 0.7, 0.89, 2.6e-2),
        (ObjectiveKind::Frobenius, 0.7, 0.94, 4.1e-2),
        (ObjectiveKind::ColumnSum, 1.0, 0.95, 3.8e-2),
    ];
    for (kind, zeta, expected_h, expected_min) in cases {
        let sol =
            solve_objective(&mdp, kind, ObjectiveParams { xi: 0.1, zeta }, &opts).unwrap();
        let chain = induce_chain(&mdp, &sol.policy).unwrap();
        let d = stationary_distribution(&chain, 1e-10, 100_000).unwrap();
        assert!(
            (d.entropy_normalized() - expected_h).abs() < 0.02,
            "{}: H {} vs {expected_h}",
            kind.name(),
            d.entropy_normalized()
        );
        assert!(
            (d.min_prob() - expected_min).abs() < 1e-2,
            "{}: min_d {} vs {expected_min}",
            kind.name(),
            d.min_prob()
        );
        for &p in sol.policy.probs().iter() {
            assert!(p >= 0.1 - 1e-6, "{}: floor violated ({p})", kind.name());
        }
    }
}

#[test]
fn bounds_are_valid_on_random_mdps() {
    let opts = SolveOptions::default();
    for seed in 0..5 {
        let mdp = random_mdp(6, 3, 3, seed).unwrap().mdp;
        let policy = PolicyTable::uniform(6, 3);
        let (h_nats, _) = stationary_entropy(&mdp, &policy);
        for kind in [ObjectiveKind::Infinity, ObjectiveKind::Frobenius, ObjectiveKind::ColumnSum] {
            let b =
                entropy_lower_bound(&mdp, &policy, kind, ObjectiveParams::default(), &opts).unwrap();
            assert!(
                b.bound_nats <= h_nats + 1e-6,
                "seed {seed} {}: bound {} exceeds entropy {}",
                kind.name(),
                b.bound_nats,
                h_nats
            );
        }
    }
}

#[test]
fn infinity_bound_dominates_frobenius_bound() {
    let opts = SolveOptions::default();
    for seed in 5..10 {
        let mdp = random_mdp(5, 2, 3, seed).unwrap().mdp;
        let policy = PolicyTable::uniform(5, 2);
        let bi = entropy_lower_bound(&mdp, &policy, ObjectiveKind::Infinity, ObjectiveParams::default(), &opts)
            .unwrap();
        let bf = entropy_lower_bound(&mdp, &policy, ObjectiveKind::Frobenius, ObjectiveParams::default(), &opts)
            .unwrap();
        assert!(
            bi.bound_nats >= bf.bound_nats - 1e-6,
            "seed {seed}: infinity {} < frobenius {}",
            bi.bound_nats,
            bf.bound_nats
        );
    }
}

#[test]
fn distance_grows_with_action_floor() {
    let mdp = single_chain(6, 0.1).unwrap().mdp;
    let opts = SolveOptions::default();
    let mut prev = -1.0;
    for xi in [0.0, 0.2, 0.4] {
        let sol = solve_objective(
            &mdp,
            ObjectiveKind::Frobenius,
            ObjectiveParams { xi, zeta: 1.0 },
            &opts,
        )
        .unwrap();
        assert!(sol.objective_value >= prev - 1e-7, "xi {xi}: {} < {prev}", sol.objective_value);
        prev = sol.objective_value;
    }
}

#[test]
fn dual_occupancy_matches_recovered_policy() {
    let mdp = single_chain(8, 0.1).unwrap().mdp;
    let sol = solve_objective(
        &mdp,
        ObjectiveKind::Dual,
        ObjectiveParams { xi: 0.1, zeta: 1.0 },
        &SolveOptions::default(),
    )
    .unwrap();
    let (h_nats, _) = stationary_entropy(&mdp, &sol.policy);
    assert!(
        (h_nats - sol.objective_value).abs() < 1e-3,
        "occupancy entropy {} vs induced-chain entropy {}",
        sol.objective_value,
        h_nats
    );
}

#[test]
fn parameter_validation() {
    let mdp = single_chain(4, 0.1).unwrap().mdp;
    let opts = SolveOptions::default();
    // floor above 1/|A|
    assert!(solve_objective(
        &mdp,
        ObjectiveKind::Frobenius,
        ObjectiveParams { xi: 0.6, zeta: 1.0 },
        &opts
    )
    .is_err());
    // cap below 1/|S|
    assert!(solve_objective(
        &mdp,
        ObjectiveKind::Frobenius,
        ObjectiveParams { xi: 0.0, zeta: 0.2 },
        &opts
    )
    .is_err());
    // cap unsupported for column-sum and dual
    for kind in [ObjectiveKind::ColumnSum, ObjectiveKind::Dual] {
        assert!(solve_objective(&mdp, kind, ObjectiveParams { xi: 0.0, zeta: 0.7 }, &opts).is_err());
    }
    // dual has no bound form
    assert!(entropy_lower_bound(
        &mdp,
        &PolicyTable::uniform(4, 2),
        ObjectiveKind::Dual,
        ObjectiveParams::default(),
        &opts
    )
    .is_err());
}
