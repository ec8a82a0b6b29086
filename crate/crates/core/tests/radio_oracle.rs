use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use relaynet_core::oracle::{self, FadingTable, Scenario};
use relaynet_core::radio::{power_of_level, spectral_efficiency, Downlink, LargeScale, LinkRealization};
use relaynet_core::{NetworkConfig, NetworkSnapshot, PowerAction, RelayMode};

fn realization(large: &LargeScale, f: &FadingTable) -> LinkRealization {
    let n = large.n_cells();
    let direct = large
        .direct
        .iter()
        .enumerate()
        .map(|(i, g)| g * f.direct[i / n][i % n])
        .collect();
    let backhaul = large.backhaul.iter().zip(&f.backhaul).map(|(g, c)| g * c).collect();
    let access = large
        .access
        .iter()
        .enumerate()
        .map(|(i, g)| g * f.access[i / n][i % n])
        .collect();
    LinkRealization::from_gains(n, direct, backhaul, access)
}

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

fn random_config(rng: &mut ChaCha8Rng) -> NetworkConfig {
    NetworkConfig {
        users_per_cell: rng.random_range(1..=4),
        ref_distance_m: rng.random_range(0.0..1100.0),
        uav_altitude_m: [25.0, 50.0, 100.0][rng.random_range(0..3)],
        relay_mode: if rng.random::<bool>() {
            RelayMode::NormalizedAf
        } else {
            RelayMode::Literal
        },
        air_pathloss_slope: if rng.random::<bool>() { 37.6 } else { 30.0 },
        seed: rng.random(),
        ..Default::default()
    }
}

#[test]
fn sinr_matches_all_pairs_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let cfg = random_config(&mut rng);
        let snap = NetworkSnapshot::generate(&cfg, &mut rng).unwrap();
        let action = PowerAction((0..9).map(|_| rng.random_range(0..10)).collect());
        let fading = FadingTable::random(snap.n_users(), 9, &mut rng);
        let large = LargeScale::compute(&snap, &cfg).unwrap();
        let links = realization(&large, &fading);
        let dl = Downlink::new(&snap, &links, &action, &cfg).unwrap();

        let tx_dbm = action
            .levels()
            .iter()
            .map(|&m| power_of_level(m, &cfg).unwrap())
            .collect();
        let scen = Scenario::new(&cfg, &snap.bs_positions, &snap.user_positions, tx_dbm);
        let expected = oracle::evaluate(&scen, &fading);
        assert_eq!(oracle::pairing(&scen), snap.user_of_uav);
        for (u, e) in expected.iter().enumerate() {
            for (got, want) in [
                (dl.signal_mw(u), e.signal_mw),
                (dl.interference_mw(u), e.interference_mw),
                (dl.sinr(u), e.sinr),
            ] {
                let r = rel(got, want);
                worst = worst.max(r);
                assert!(r < 1e-12, "user {u}: {got} vs {want} (rel {r})");
            }
        }
    }
    println!("worst relative deviation {worst:e}");
}

#[test]
fn large_scale_gains_match_formula() {
    let cfg = NetworkConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let snap = NetworkSnapshot::generate(&cfg, &mut rng).unwrap();
    let large = LargeScale::compute(&snap, &cfg).unwrap();
    for (u, user) in snap.user_positions.iter().enumerate() {
        for (n, bs) in snap.bs_positions.iter().enumerate() {
            let d = ((user.x - bs.x).powi(2) + (user.y - bs.y).powi(2)).sqrt();
            let g = 10f64.powf(-(128.1 + 37.6 * (d / 1000.0).log10()) / 10.0);
            assert!(rel(large.direct[u * 9 + n], g) < 1e-12);
        }
    }
    let g = 10f64.powf(-(128.1 + 37.6 * (0.1f64).log10()) / 10.0);
    assert!(large.backhaul.iter().all(|&b| rel(b, g) < 1e-12));
}

#[test]
fn powers_monotone_in_sinr() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..200 {
        let cfg = random_config(&mut rng);
        let snap = NetworkSnapshot::generate(&cfg, &mut rng).unwrap();
        let fading = FadingTable::random(snap.n_users(), 9, &mut rng);
        let links = realization(&LargeScale::compute(&snap, &cfg).unwrap(), &fading);
        let base = PowerAction((0..9).map(|_| rng.random_range(0..9)).collect());
        let before = Downlink::new(&snap, &links, &base, &cfg).unwrap();
        let bs = rng.random_range(0..9);
        let mut raised = base.clone();
        raised.0[bs] += 1;
        let after = Downlink::new(&snap, &links, &raised, &cfg).unwrap();
        for u in 0..snap.n_users() {
            let (s0, s1) = (before.sinr(u), after.sinr(u));
            if snap.serving_cell(u) == bs {
                assert!(s1 >= s0 * (1.0 - 1e-12), "own power raised, SINR fell {s0} -> {s1}");
            } else {
                assert!(s1 <= s0 * (1.0 + 1e-12), "other power raised, SINR rose {s0} -> {s1}");
            }
        }
    }
}

#[test]
fn no_uavs_reduces_to_terrestrial_sinr() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let cfg = NetworkConfig {
        ref_distance_m: f64::INFINITY,
        ..Default::default()
    };
    for _ in 0..50 {
        let snap = NetworkSnapshot::generate(&cfg, &mut rng).unwrap();
        assert!(snap.active_uavs.is_empty());
        let fading = FadingTable::random(snap.n_users(), 9, &mut rng);
        let links = realization(&LargeScale::compute(&snap, &cfg).unwrap(), &fading);
        let action = PowerAction((0..9).map(|_| rng.random_range(0..10)).collect());
        let dl = Downlink::new(&snap, &links, &action, &cfg).unwrap();
        let tx = action.to_mw(&cfg).unwrap();
        for u in 0..snap.n_users() {
            let home = snap.serving_cell(u);
            let s = tx[home] * links.direct(u, home);
            let i: f64 = (0..9).filter(|&n| n != home).map(|n| tx[n] * links.direct(u, n)).sum();
            assert_eq!(dl.interference(u).aerial_mw, 0.0);
            assert!(rel(dl.sinr(u), s / (i + dl.noise_mw())) < 1e-12);
        }
    }
}

#[test]
fn spectral_efficiency_increasing_and_concave() {
    let h = 1e-3;
    let mut x = 0.0;
    while x < 100.0 {
        let (a, b, c) = (
            spectral_efficiency(x).unwrap(),
            spectral_efficiency(x + h).unwrap(),
            spectral_efficiency(x + 2.0 * h).unwrap(),
        );
        assert!(b > a);
        assert!(c - 2.0 * b + a < 0.0, "not concave at {x}");
        x += 0.37;
    }
}
