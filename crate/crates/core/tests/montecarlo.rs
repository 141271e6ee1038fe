use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use collective::analysis;
use collective::coevolution::{CoevolutionRule, Ranking};
use collective::dynamics::{
    simulate, ChangeCriterion, InitialActions, InitialCondition, InitialOpinions, Network, Protocol, Scenario,
    ScenarioGame, Schedule, TieRule,
};
use collective::games::{Action, CoevolutionParams, CoordinationParams, InnerGame};
use collective::graph;
use collective::montecarlo::{count_changes, estimate_change_threshold, run_ensemble};
use collective::tempnet::{sample_contacts_uniform, sample_contacts_visibility, ContactParams};

fn trend(n: usize, k: usize, alpha: f64, u_t: f64, u_v: f64, zeta0: f64, commit: bool) -> Scenario {
    Scenario {
        game: ScenarioGame::Coordination(CoordinationParams::new(alpha).unwrap()),
        network: Network::ActivityDriven {
            n,
            contacts: ContactParams {
                k,
                u_v,
                ..ContactParams::default()
            },
        },
        protocol: Protocol::TrendMixed { u_t },
        schedule: Schedule::Synchronous,
        initial: InitialCondition {
            actions: InitialActions::Fraction { fraction: zeta0 },
            opinions: InitialOpinions::MatchActions,
            commit_adopters: commit,
        },
        committed: vec![],
        horizon: 500,
        snapshot_stride: 0,
    }
}

fn changes(s: &Scenario, seed: u64) -> usize {
    count_changes(s, 100, seed, ChangeCriterion::Consensus).unwrap()
}

/// Three binomial standard errors around `p` over `trials`.
fn within_3_sigma(count: usize, trials: usize, p: f64) -> bool {
    let sd = (trials as f64 * p * (1.0 - p)).sqrt();
    (count as f64 - trials as f64 * p).abs() <= 3.0 * sd
}

#[test]
fn uniform_contact_frequency() {
    let params = ContactParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let n = 1000;
    let mut hits = 0;
    let mut draws = 0;
    while draws < 1_000_000 {
        let lists = sample_contacts_uniform(n, &params, &mut rng).unwrap();
        for row in &lists {
            let total: f64 = row.iter().map(|&(_, w)| w).sum();
            assert!((total - 1.0).abs() < 1e-15);
            for &(j, w) in row {
                if j == 17 {
                    hits += (w * 3.0).round() as usize;
                }
            }
        }
        draws += 3 * n;
    }
    assert!(within_3_sigma(hits, draws, 1.0 / n as f64), "{hits} hits in {draws} draws");
}

#[test]
fn visibility_contact_frequency() {
    let n = 1000;
    let params = ContactParams {
        u_v: 1.0,
        ..ContactParams::default()
    };
    let x: Vec<Action> = (0..n).map(|i| if i < 200 { Action::Plus } else { Action::Minus }).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut adopter_hits, mut other_hits, mut draws) = (0usize, 0usize, 0usize);
    while draws < 1_000_000 {
        for row in sample_contacts_visibility(&params, &x, &mut rng).unwrap() {
            for (j, w) in row {
                let c = (w * 3.0).round() as usize;
                match j {
                    5 => adopter_hits += c,
                    500 => other_hits += c,
                    _ => {}
                }
            }
        }
        draws += 3 * n;
    }
    assert!(within_3_sigma(adopter_hits, draws, 2.0 / 1200.0), "{adopter_hits} of {draws}");
    assert!(within_3_sigma(other_hits, draws, 1.0 / 1200.0), "{other_hits} of {draws}");
}

#[test]
fn contacts_replay_from_seed() {
    let params = ContactParams::default();
    let a = sample_contacts_uniform(50, &params, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
    let b = sample_contacts_uniform(50, &params, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn trend_above_critical_sensitivity_changes() {
    let hits = changes(&trend(1000, 3, 0.0, 0.2, 0.0, 0.05, true), 3);
    assert!(hits >= 95, "{hits}");
}

#[test]
fn no_intervention_threshold_separates_outcomes() {
    for (k, alpha) in [(3, 0.0), (5, 0.0), (3, -0.5)] {
        let Some(z) = analysis::zeta_star(k, alpha).unwrap() else {
            continue;
        };
        let up = changes(&trend(2000, k, alpha, 0.0, 0.0, z + 0.05, false), 11);
        let down = changes(&trend(2000, k, alpha, 0.0, 0.0, z - 0.05, false), 11);
        assert!(up >= 90, "k={k} alpha={alpha} above: {up}");
        assert!(down <= 10, "k={k} alpha={alpha} below: {down}");
    }
}

#[test]
fn trichotomy_over_a_grid() {
    for (k, alpha) in [(3, 0.0), (5, 0.0), (5, -0.6)] {
        let u_star = analysis::u_star(k, alpha, 1e-10).unwrap();
        assert!(u_star > 0.1, "k={k} alpha={alpha}: u* = {u_star}");
        // sensitivity above the plateau: change from a small committed seed
        let hits = changes(&trend(2000, k, alpha, u_star + 0.05, 0.0, 0.05, true), 5);
        assert!(hits >= 90, "k={k} alpha={alpha} above u*: {hits}");
        let u_t = u_star - 0.05;
        let z = analysis::zeta_star_u(k, alpha, u_t).unwrap();
        assert!(z < 0.9, "k={k} alpha={alpha}: zeta* = {z}");
        // an upward trend at t = 0 needs the initial adopters to hold
        let hits = changes(&trend(2000, k, alpha, u_t, 0.0, z + 0.05, true), 5);
        assert!(hits >= 90, "k={k} alpha={alpha} above zeta*: {hits}");
        let hits = changes(&trend(2000, k, alpha, u_t, 0.0, z - 0.05, false), 5);
        assert!(hits <= 10, "k={k} alpha={alpha} below zeta*: {hits}");
    }
}

#[test]
fn free_adopters_ignore_the_trend() {
    // trend followers hold at t = 0, so the first step is pure best response
    let z0 = analysis::zeta_star(3, 0.0).unwrap().unwrap();
    let est = estimate_change_threshold(&trend(2000, 3, 0.0, 0.08, 0.0, 0.5, false), 100, 1, ChangeCriterion::Consensus, 0.005)
        .unwrap();
    let e = est.estimate.unwrap();
    assert!((e - z0).abs() <= 0.02, "estimate {e}, no-trend threshold {z0}");
    let committed =
        estimate_change_threshold(&trend(2000, 3, 0.0, 0.08, 0.0, 0.5, true), 100, 1, ChangeCriterion::Consensus, 0.005)
            .unwrap();
    assert!(committed.band.1 <= analysis::zeta_star_u(3, 0.0, 0.08).unwrap());
}

#[test]
fn simulated_threshold_matches_visibility_analysis() {
    let predicted = analysis::zeta_star_uv(3, 0.0, 0.0, 1.0).unwrap();
    let est = estimate_change_threshold(&trend(2000, 3, 0.0, 0.0, 1.0, 0.5, false), 100, 3, ChangeCriterion::Consensus, 0.005)
        .unwrap();
    let e = est.estimate.expect("monotone profile");
    assert!((e - predicted).abs() <= 0.03, "estimate {e}, analysis {predicted}");
}

#[test]
fn strong_trend_needs_no_seed() {
    let est = estimate_change_threshold(&trend(500, 3, 0.0, 0.3, 0.0, 0.5, true), 40, 1, ChangeCriterion::Consensus, 0.01)
        .unwrap();
    assert!(est.estimate.unwrap() <= 0.02, "{est:?}");
}

#[test]
fn change_frequency_rises_with_seed_size() {
    let est = estimate_change_threshold(&trend(1000, 3, 0.0, 0.0, 0.5, 0.5, false), 60, 8, ChangeCriterion::Consensus, 0.01)
        .unwrap();
    assert!(est.is_monotone());
    assert!(est.band.0 <= est.band.1);
}

#[test]
fn ensemble_is_thread_count_independent() {
    let s = trend(400, 3, 0.0, 0.05, 0.5, 0.3, false);
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run_ensemble(&s, 24, 77, ChangeCriterion::Consensus).unwrap())
    };
    let one = run(1);
    assert_eq!(one, run(3));
    assert_eq!(one, run(8));
    for t in 0..one.q500.len() {
        assert!(one.q025[t] <= one.q500[t] && one.q500[t] <= one.q975[t]);
    }
    assert!((0.0..=1.0).contains(&one.change_probability));
}

#[test]
fn single_run_envelope_is_degenerate() {
    let res = run_ensemble(&trend(200, 3, 0.0, 0.1, 0.0, 0.2, true), 1, 4, ChangeCriterion::Consensus).unwrap();
    assert_eq!(res.q025, res.q500);
    assert_eq!(res.q975, res.q500);
}

#[test]
fn deterministic_runs_have_zero_width_envelope() {
    let g = graph::ring(30).row_normalize().unwrap();
    let s = Scenario {
        game: ScenarioGame::Coordination(CoordinationParams::new(0.2).unwrap()),
        network: Network::Static(g),
        protocol: Protocol::BestResponse {
            tie: TieRule::KeepCurrent,
        },
        schedule: Schedule::Synchronous,
        initial: InitialCondition {
            actions: InitialActions::Nodes { nodes: vec![0, 1, 2, 3] },
            ..InitialCondition::default()
        },
        committed: vec![],
        horizon: 100,
        snapshot_stride: 0,
    };
    let res = run_ensemble(&s, 10, 5, ChangeCriterion::Consensus).unwrap();
    assert_eq!(res.q025, res.q975);
}

#[test]
fn logit_small_world_with_committed_hubs() {
    let n = 84;
    let raw = graph::watts_strogatz(n, 6, 0.1, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
    let committed = Ranking::Eigenvector.order(&raw, 0).unwrap()[..16].to_vec();
    let s = Scenario {
        game: ScenarioGame::Coordination(CoordinationParams::new(1.0).unwrap()),
        network: Network::Static(raw.row_normalize().unwrap()),
        protocol: Protocol::Logit {
            sigma: 4.0,
            sign: Default::default(),
        },
        schedule: Schedule::Synchronous,
        initial: InitialCondition::default(),
        committed,
        horizon: 400,
        snapshot_stride: 0,
    };
    let res = run_ensemble(&s, 100, 12, ChangeCriterion::sustained_default()).unwrap();
    assert!(res.change_probability >= 0.9, "{}", res.change_probability);
}

#[test]
fn committed_nodes_hold_in_every_snapshot() {
    let g = graph::watts_strogatz(40, 4, 0.2, &mut ChaCha8Rng::seed_from_u64(8)).unwrap();
    let s = Scenario {
        game: ScenarioGame::Coordination(CoordinationParams::new(-0.3).unwrap()),
        network: Network::Static(g.row_normalize().unwrap()),
        protocol: Protocol::Logit {
            sigma: 1.0,
            sign: Default::default(),
        },
        schedule: Schedule::AsyncUniform,
        initial: InitialCondition::default(),
        committed: vec![3, 9, 27],
        horizon: 2000,
        snapshot_stride: 1,
    };
    let tr = simulate(&s, 6).unwrap();
    assert_eq!(tr.snapshots.len(), 2001);
    for snap in &tr.snapshots {
        for &i in &[3, 9, 27] {
            assert_eq!(snap.x[i], Action::Plus);
        }
    }
}

#[test]
fn async_coevolution_settles() {
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    for seed in 0..40 {
        let n = rng.random_range(4..=20);
        let g = loop {
            if let Ok(w) = graph::erdos_renyi(n, 0.4, &mut rng).row_normalize() {
                break w;
            }
        };
        let inner = InnerGame::Coordination(CoordinationParams::new(rng.random_range(-0.8..1.5)).unwrap());
        let params = CoevolutionParams::homogeneous(
            n,
            rng.random_range(0.0..2.0),
            rng.random_range(0.1..3.0),
            rng.random_range(0.1..3.0),
            inner,
        )
        .unwrap();
        let rule = CoevolutionRule::single_layer(g.clone(), params).unwrap();
        let s = Scenario {
            game: ScenarioGame::Coevolution(Box::new(rule)),
            network: Network::Static(g),
            protocol: Protocol::BestResponse {
                tie: TieRule::KeepCurrent,
            },
            schedule: Schedule::AsyncUniform,
            initial: InitialCondition {
                actions: InitialActions::Fraction { fraction: 0.5 },
                opinions: InitialOpinions::Uniform { low: -1.0, high: 1.0 },
                commit_adopters: false,
            },
            committed: vec![],
            horizon: 1_000_000,
            snapshot_stride: 0,
        };
        let tr = simulate(&s, seed).unwrap();
        assert!(tr.absorbed_at.is_some(), "instance {seed} did not settle");
    }
}

#[test]
fn complete_graph_control_baseline() {
    let n = 40;
    let g = graph::complete(n).row_normalize().unwrap();
    let rule = |gamma: f64, beta: f64, lambda: f64| {
        let inner = InnerGame::Coordination(CoordinationParams::new(0.0).unwrap());
        CoevolutionRule::single_layer(g.clone(), CoevolutionParams::homogeneous(n, gamma, beta, lambda, inner).unwrap())
            .unwrap()
    };
    let base = rule(1.0, 1.0, 1.0);
    let half: Vec<usize> = (0..n / 2 + 1).collect();
    assert!(base.reach_collective_change(&half).unwrap().changed);
    // without action payoffs one leader suffices once beta > lambda (n - 1)
    assert!(rule(0.0, 100.0, 1.0).reach_collective_change(&[0]).unwrap().changed);
    assert!(!rule(0.0, 30.0, 1.0).reach_collective_change(&[0]).unwrap().changed);
    let strong = rule(1.0, 10.0, 1.0);
    let order: Vec<usize> = (0..n).collect();
    let report = strong.min_control_set_greedy(&order, "index").unwrap();
    assert!(report.changed);
    let critical = strong.critical_count().unwrap();
    assert!(report.committed_nodes.len().abs_diff(critical) <= 1);
    // no consistency pull: opinions cannot move actions, so a third is too few
    let stuck = rule(5.0, 1.0, 0.0);
    let report = stuck.min_control_set_greedy(&order[..n / 3], "index").unwrap();
    assert!(!report.changed);
}
