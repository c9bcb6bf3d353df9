use frontlab::voting::{
    conditional_vote_probability, estimate_u, identity_check, mckean_nonlinearity, path_rng,
    simulate_tree, simulate_tree_capped, vote_propagate, voting_nonlinearity, Estimator, Tree,
    TreeNode, VotingRules,
};
use frontlab::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn step(x: f64) -> f64 {
    if x <= 0.0 {
        1.0
    } else {
        0.0
    }
}

#[test]
fn yule_mean_leaf_count() {
    let rules = VotingRules::tilted(2, 1.0, 1.0).unwrap();
    let trials = 10_000;
    let counts: Vec<f64> = (0..trials)
        .map(|i| {
            let mut rng = path_rng(7, i);
            simulate_tree(&rules, 1.0, 0.0, &mut rng)
                .unwrap()
                .leaf_count() as f64
        })
        .collect();
    let mean = counts.iter().sum::<f64>() / trials as f64;
    let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (trials - 1) as f64;
    let se = (var / trials as f64).sqrt();
    let want = 1f64.exp();
    assert!((mean - want).abs() < 3.0 * se, "{mean} vs {want} (se {se})");
}

#[test]
fn trivial_trees() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let rules = VotingRules::tilted(3, 0.5, 2.0).unwrap();
    let tree = simulate_tree(&rules, 0.0, 1.5, &mut rng).unwrap();
    assert_eq!(tree.nodes.len(), 1);
    assert_eq!(tree.nodes[0].x, 1.5);

    // without branching the leaf is N(x, 2t)
    let frozen = VotingRules::custom(vec![0.0, 0.5, 1.0], 0.0).unwrap();
    let xs: Vec<f64> = (0..20_000)
        .map(|_| simulate_tree(&frozen, 3.0, 1.0, &mut rng).unwrap().nodes[0].x)
        .collect();
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / xs.len() as f64;
    assert!(
        (mean - 1.0).abs() < 3.0 * (6.0 / 20_000f64).sqrt(),
        "{mean}"
    );
    assert!((var - 6.0).abs() < 0.2, "{var}");
}

#[test]
fn trees_are_well_formed() {
    let rules = VotingRules::tilted(3, 0.5, 1.0).unwrap();
    let mut rng = path_rng(3, 0);
    for _ in 0..200 {
        let tree = simulate_tree(&rules, 1.0, 0.0, &mut rng).unwrap();
        let internal = tree.nodes.iter().filter(|n| n.children.is_some()).count();
        assert_eq!(tree.leaf_count(), 1 + internal * (rules.n - 1));
        for (i, node) in tree.nodes.iter().enumerate() {
            match node.children {
                None => assert_eq!(node.time, 1.0),
                Some(c) => {
                    assert!(c > i && node.time < 1.0);
                    for child in &tree.nodes[c..c + 3] {
                        assert!(child.time >= node.time);
                    }
                }
            }
        }
    }
}

#[test]
fn particle_cap_is_enforced() {
    let rules = VotingRules::tilted(2, 1.0, 5.0).unwrap();
    let mut rng = path_rng(0, 0);
    match simulate_tree_capped(&rules, 10.0, 0.0, 100, &mut rng) {
        Err(Error::ParticleCap { cap, t }) => {
            assert_eq!(cap, 100);
            assert!(t > 0.0 && t < 10.0);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn constant_votes_are_absorbing() {
    let rules = VotingRules::tilted(2, 1.0, 1.0).unwrap();
    let mut rng = path_rng(11, 0);
    for _ in 0..100 {
        let tree = simulate_tree(&rules, 1.5, 0.0, &mut rng).unwrap();
        assert!(vote_propagate(&tree, &|_| 1.0, &rules, &mut rng));
        assert!(!vote_propagate(&tree, &|_| 0.0, &rules, &mut rng));
        assert_eq!(conditional_vote_probability(&tree, &|_| 1.0, &rules), 1.0);
        assert_eq!(conditional_vote_probability(&tree, &|_| 0.0, &rules), 0.0);
    }
}

fn depth_one(mu: Vec<f64>) -> (Tree, VotingRules) {
    let rules = VotingRules::custom(mu, 1.0).unwrap();
    let leaf = TreeNode {
        x: 0.0,
        time: 1.0,
        children: None,
    };
    let root = TreeNode {
        x: 0.0,
        time: 0.5,
        children: Some(1),
    };
    (
        Tree {
            n: 2,
            t: 1.0,
            nodes: vec![root, leaf, leaf],
        },
        rules,
    )
}

#[test]
fn depth_one_tree_matches_enumeration() {
    let mu: Vec<f64> = vec![0.0, 0.3, 0.9];
    // enumerate the four leaf-vote outcomes at g = 1/2
    let mut want = 0.0f64;
    for a in [0usize, 1] {
        for b in [0usize, 1] {
            want += 0.25 * mu[a + b];
        }
    }
    assert!((want - (mu[1] * 2.0 * 0.25 + mu[2] * 0.25)).abs() < 1e-15);
    let (tree, rules) = depth_one(mu);
    let half = |_: f64| 0.5;
    assert!((conditional_vote_probability(&tree, &half, &rules) - want).abs() < 1e-15);
    let mut rng = path_rng(5, 0);
    let trials = 200_000;
    let ones = (0..trials)
        .filter(|_| vote_propagate(&tree, &half, &rules, &mut rng))
        .count() as f64;
    let p = ones / trials as f64;
    let se = (want * (1.0 - want) / trials as f64).sqrt();
    assert!((p - want).abs() < 4.0 * se, "{p} vs {want}");
}

#[test]
fn zero_time_estimate_is_the_initial_vote() {
    let rules = VotingRules::tilted(2, 1.0, 1.0).unwrap();
    let g = |x: f64| 1.0 / (1.0 + x.exp());
    let xs = [-1.0, 0.0, 2.0];
    let est = estimate_u(&rules, &g, 0.0, &xs, 100, 9, Estimator::Conditional).unwrap();
    for (i, x) in xs.iter().enumerate() {
        assert_eq!(est.mean[i], g(*x));
        assert_eq!(est.se[i], 0.0);
    }
    assert!(estimate_u(&rules, &g, 0.0, &xs, 99, 9, Estimator::Conditional).is_err());
}

#[test]
fn estimates_are_deterministic_and_worker_independent() {
    let rules = VotingRules::tilted(3, 0.5, 1.0).unwrap();
    let xs = [-0.5, 0.0, 0.5];
    let run = |threads: usize, est: Estimator| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| estimate_u(&rules, &step, 1.0, &xs, 3000, 42, est).unwrap())
    };
    for est in [Estimator::Conditional, Estimator::Sampled] {
        let a = run(1, est);
        let b = run(4, est);
        assert_eq!(a, b);
        assert!(a.mean.iter().all(|m| (0.0..=1.0).contains(m)));
    }
}

#[test]
fn both_estimators_agree() {
    // random parent votes and soft leaf votes, so conditioning removes variance
    let rules = VotingRules::tilted(3, 0.25, 1.0).unwrap();
    let g = |x: f64| 1.0 / (1.0 + x.exp());
    let xs = [-1.0, 0.0, 1.0];
    let a = estimate_u(&rules, &g, 1.0, &xs, 20_000, 1, Estimator::Conditional).unwrap();
    let b = estimate_u(&rules, &g, 1.0, &xs, 20_000, 2, Estimator::Sampled).unwrap();
    for i in 0..3 {
        let se = (a.se[i].powi(2) + b.se[i].powi(2)).sqrt();
        assert!((a.mean[i] - b.mean[i]).abs() < 4.0 * se, "x={}", xs[i]);
        assert!(a.se[i] < b.se[i], "x={}: {} vs {}", xs[i], a.se[i], b.se[i]);
    }
}

#[test]
fn estimates_are_monotone_in_the_initial_vote() {
    let rules = VotingRules::tilted(3, 0.5, 1.0).unwrap();
    let lo = |x: f64| step(x + 0.5);
    let hi = |x: f64| step(x - 0.5) * 0.9 + 0.1 * step(x);
    let xs = [-1.0, 0.0, 1.0];
    for est in [Estimator::Conditional, Estimator::Sampled] {
        let a = estimate_u(&rules, &lo, 1.0, &xs, 2000, 8, est).unwrap();
        let b = estimate_u(&rules, &hi, 1.0, &xs, 2000, 8, est).unwrap();
        for i in 0..3 {
            let joint = (a.se[i].powi(2) + b.se[i].powi(2)).sqrt();
            assert!(a.mean[i] <= b.mean[i] + 3.0 * joint);
        }
    }
}

#[test]
fn coupled_votes_are_pathwise_ordered() {
    let rules = VotingRules::tilted(2, 1.0, 1.0).unwrap();
    let lo = |x: f64| step(x + 0.3);
    for i in 0..500 {
        let tree = simulate_tree(&rules, 1.0, 0.0, &mut path_rng(4, i)).unwrap();
        let a = vote_propagate(&tree, &lo, &rules, &mut path_rng(5, i));
        let b = vote_propagate(&tree, &step, &rules, &mut path_rng(5, i));
        assert!(!a || b);
        assert!(
            conditional_vote_probability(&tree, &lo, &rules)
                <= conditional_vote_probability(&tree, &step, &rules)
        );
    }
}

#[test]
fn tilted_rules_give_the_power_nonlinearity() {
    for n in 2..=6 {
        for gamma in [0.1, 0.5 / (n - 1) as f64, 1.0 / (n - 1) as f64] {
            let beta = 1.7;
            let rules = VotingRules::tilted(n, gamma, beta).unwrap();
            let f = voting_nonlinearity(&rules);
            let mut want = vec![0.0; n + 1];
            want[1] = beta * gamma;
            want[n] = -beta * gamma;
            assert_eq!(f.f.coeffs.len(), n + 1);
            for (a, b) in f.f.coeffs.iter().zip(&want) {
                assert!(
                    (a - b).abs() < 1e-12,
                    "n={n} gamma={gamma}: {:?}",
                    f.f.coeffs
                );
            }
            assert!(f.monostable);
        }
    }
    let f = voting_nonlinearity(&VotingRules::tilted(2, 1.0, 1.0).unwrap());
    assert!((f.f.eval(0.3) - (0.3 - 0.09)).abs() < 1e-15);
}

#[test]
fn majority_vote_gives_allen_cahn() {
    let f = voting_nonlinearity(&VotingRules::majority(3, 1.0).unwrap());
    // u(1 − u)(2u − 1) = −u + 3u² − 2u³
    let want = [0.0, -1.0, 3.0, -2.0];
    assert_eq!(f.f.coeffs.len(), 4);
    for (a, b) in f.f.coeffs.iter().zip(want) {
        assert!((a - b).abs() < 1e-12);
    }
    assert!(!f.monostable);
    assert!(VotingRules::majority(4, 1.0).is_err());
}

#[test]
fn proportional_votes_have_no_reaction() {
    for n in 2..=8 {
        let mu = (0..=n).map(|k| k as f64 / n as f64).collect();
        let f = voting_nonlinearity(&VotingRules::custom(mu, 1.3).unwrap());
        assert!(
            f.f.coeffs.iter().all(|c| c.abs() < 1e-12),
            "{:?}",
            f.f.coeffs
        );
        assert!(!f.monostable);
    }
}

#[test]
fn rule_validation() {
    assert!(VotingRules::tilted(3, 0.6, 1.0).is_err());
    assert!(VotingRules::tilted(3, 0.0, 1.0).is_err());
    assert!(VotingRules::tilted(1, 0.5, 1.0).is_err());
    assert!(VotingRules::tilted(3, 0.5, 1.0).unwrap().mu[2] <= 1.0);
    assert!(VotingRules::custom(vec![0.0, 1.2, 1.0], 1.0).is_err());
    assert!(VotingRules::custom(vec![0.0, 0.5, 1.0], -1.0).is_err());
    let m = VotingRules::tilted(3, 0.5, 1.0)
        .unwrap()
        .pde_model()
        .unwrap();
    assert!((m.f(0.4) - 0.5 * (0.4 - 0.064)).abs() < 1e-14);
    assert!(VotingRules::majority(3, 1.0).unwrap().pde_model().is_err());
}

#[test]
fn mckean_nonlinearities() {
    let f = mckean_nonlinearity(1.0, &[0.0, 0.0, 1.0]).unwrap();
    assert!((f.eval(0.3) - (0.3 - 0.09)).abs() < 1e-15);
    let f = mckean_nonlinearity(1.0, &[0.0, 0.0, 0.0, 1.0]).unwrap();
    assert!((f.eval(0.5) - 0.375).abs() < 1e-15);
    let p = [0.0, 0.0, 0.2, 0.5, 0.3];
    let gamma = 0.7;
    let f = mckean_nonlinearity(gamma, &p).unwrap();
    let mean: f64 = p.iter().enumerate().map(|(k, q)| k as f64 * q).sum();
    assert!((f.derivative().eval(0.0) - gamma * (mean - 1.0)).abs() < 1e-13);
    assert!(f.eval(0.0).abs() < 1e-15 && f.eval(1.0).abs() < 1e-15);
    assert!(mckean_nonlinearity(1.0, &[0.0, 0.5, 0.5]).is_err());
    assert!(mckean_nonlinearity(1.0, &[0.0, 0.0, 0.5]).is_err());
}

#[test]
fn voting_identity_on_random_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..100 {
        let n = rng.random_range(2..=9usize);
        let gamma = rng.random_range(1e-6..=1.0) / (n - 1) as f64;
        let u: f64 = rng.random();
        let c = identity_check(n, gamma, u).unwrap();
        assert!(c.difference < 1e-12, "n={n} gamma={gamma} u={u}: {c:?}");
    }
    let c = identity_check(2, 1.0, 0.5).unwrap();
    assert!((c.lhs - 0.25).abs() < 1e-15 && (c.rhs - 0.25).abs() < 1e-15);
    for u in [0.0, 1.0] {
        let c = identity_check(4, 0.2, u).unwrap();
        assert_eq!((c.lhs, c.rhs), (0.0, 0.0));
    }
    assert!(identity_check(3, 0.5, 1.5).is_err());
}
