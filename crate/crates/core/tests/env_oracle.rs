use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use relaynet_core::oracle::{self, FadingTable, Scenario};
use relaynet_core::radio::{power_of_level, LargeScale, LinkRealization};
use relaynet_core::{Env, Fading, NetworkConfig, NetworkSnapshot, Point2, PowerAction};

/// Recovers the fading coefficients of a realization by dividing out path loss.
fn fading_of(links: &LinkRealization, large: &LargeScale, n_users: usize) -> FadingTable {
    let n = large.n_cells();
    FadingTable {
        direct: (0..n_users)
            .map(|u| (0..n).map(|b| links.direct(u, b) / large.direct[u * n + b]).collect())
            .collect(),
        backhaul: (0..n).map(|m| links.backhaul[m] / large.backhaul[m]).collect(),
        access: (0..n_users)
            .map(|u| (0..n).map(|m| links.access(u, m) / large.access[u * n + m]).collect())
            .collect(),
    }
}

#[test]
fn step_reward_matches_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for seed in 0..20 {
        let cfg = NetworkConfig {
            seed,
            users_per_cell: 1 + (seed as usize % 3),
            ..Default::default()
        };
        let mut env = Env::new(cfg.clone(), 10).unwrap();
        env.reset().unwrap();
        for _ in 0..10 {
            let snap = env.snapshot().unwrap().clone();
            let links = env.links().unwrap().clone();
            let large = LargeScale::compute(&snap, &cfg).unwrap();
            let fading = fading_of(&links, &large, snap.n_users());
            let action = PowerAction((0..9).map(|_| rng.random_range(0..10)).collect());
            let tx = action
                .levels()
                .iter()
                .map(|&m| power_of_level(m, &cfg).unwrap())
                .collect();
            let scen = Scenario::new(&cfg, &snap.bs_positions, &snap.user_positions, tx);
            let expected: f64 = oracle::evaluate(&scen, &fading).iter().map(|r| r.rate).sum();
            let out = env.step(&action).unwrap();
            assert!(
                (out.reward - expected).abs() <= 1e-9 * expected.max(1.0),
                "{} vs {expected}",
                out.reward
            );
        }
    }
}

#[test]
fn geometry_is_fixed_within_an_episode() {
    let mut env = Env::new(NetworkConfig::default(), 50).unwrap();
    let first = env.reset().unwrap();
    let snap = env.snapshot().unwrap().clone();
    let act = PowerAction::uniform(9, 9);
    let mut states = vec![first];
    for t in 0..50 {
        let out = env.step(&act).unwrap();
        assert_eq!(env.snapshot().unwrap(), &snap);
        assert_eq!(out.truncated, t == 49);
        states.push(out.next_state);
    }
    // Distance and assistance blocks stay put while the gain block moves.
    let n = 18;
    for s in &states {
        assert_eq!(s.as_slice()[..n], states[0].as_slice()[..n]);
        assert_eq!(s.as_slice()[2 * n..], states[0].as_slice()[2 * n..]);
    }
    assert!(states
        .windows(2)
        .any(|w| w[0].as_slice()[n..2 * n] != w[1].as_slice()[n..2 * n]));
    assert!(env.step(&act).is_err());
    env.reset().unwrap();
    assert_ne!(env.snapshot().unwrap(), &snap);
}

#[test]
fn rates_permute_with_users_in_a_cell() {
    let cfg = NetworkConfig {
        users_per_cell: 3,
        fading: Fading::Unit,
        ..Default::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..50 {
        let snap = NetworkSnapshot::generate(&cfg, &mut rng).unwrap();
        let cell = rng.random_range(0..9);
        let (a, b) = (cell * 3, cell * 3 + 2);
        let mut users = snap.user_positions.clone();
        users.swap(a, b);
        let swapped = NetworkSnapshot::assemble(snap.bs_positions.clone(), users, &cfg).unwrap();
        let action = PowerAction((0..9).map(|_| rng.random_range(0..10)).collect());
        let r0 = Env::frozen(cfg.clone(), snap, 1).and_then(|mut e| {
            e.reset()?;
            e.evaluate(&action)
        });
        let r1 = Env::frozen(cfg.clone(), swapped, 1).and_then(|mut e| {
            e.reset()?;
            e.evaluate(&action)
        });
        let (mut r0, r1) = (r0.unwrap(), r1.unwrap());
        r0.swap(a, b);
        for (x, y) in r0.iter().zip(&r1) {
            assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
        }
        let s0: f64 = r0.iter().sum();
        let s1: f64 = r1.iter().sum();
        assert!((s0 - s1).abs() <= 1e-12 * s0);
    }
}

#[test]
fn unit_fading_matches_oracle_without_randomness() {
    let cfg = NetworkConfig {
        n_cells: 2,
        users_per_cell: 1,
        fading: Fading::Unit,
        ..Default::default()
    };
    let sites = vec![Point2::new(-1000.0, 0.0), Point2::new(1000.0, 0.0)];
    let users = vec![Point2::new(-1300.0, 0.0), Point2::new(1700.0, 0.0)];
    let snap = NetworkSnapshot::assemble(sites, users, &cfg).unwrap();
    let mut env = Env::frozen(cfg.clone(), snap.clone(), 3).unwrap();
    env.reset().unwrap();
    for levels in [[0, 0], [0, 9], [9, 0], [9, 9]] {
        let action = PowerAction(levels.to_vec());
        let tx = levels.iter().map(|&m| power_of_level(m, &cfg).unwrap()).collect();
        let scen = Scenario::new(&cfg, &snap.bs_positions, &snap.user_positions, tx);
        let want = oracle::evaluate(&scen, &FadingTable::ones(2, 2));
        for (got, w) in env.evaluate(&action).unwrap().iter().zip(&want) {
            assert!((got - w.rate).abs() < 1e-12);
        }
    }
}

#[test]
fn long_run_mean_is_stable() {
    let cfg = NetworkConfig {
        seed: 17,
        ..Default::default()
    };
    let mut env = Env::new(cfg, 50).unwrap();
    let act = PowerAction::uniform(9, 9);
    let mut halves = [0.0; 2];
    for ep in 0..200 {
        env.reset().unwrap();
        for _ in 0..50 {
            halves[ep / 100] += env.step(&act).unwrap().mean_rate();
        }
    }
    let (a, b) = (halves[0] / 5000.0, halves[1] / 5000.0);
    assert!(a.is_finite() && a > 0.0);
    assert!((a - b).abs() / a < 0.1, "{a} vs {b}");
}
