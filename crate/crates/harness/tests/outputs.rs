use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use relaynet_core::oracle::{self, FadingTable, Scenario};
use relaynet_core::radio::power_of_level;
use relaynet_core::{NetworkConfig, NetworkSnapshot};
use relaynet_harness::experiments::{
    baseline_table, curve_table, eval_env, policy_records, run_baselines, run_curves, run_sweep_users, sweep_table,
    Policy, CURVE_COLUMNS,
};
use relaynet_harness::{Cell, Settings, Table};

fn quick_settings() -> Settings {
    let mut s = Settings::default();
    s.agent.episodes = 4;
    s.agent.slots_per_episode = 10;
    s.agent.batch_size = 16;
    s.agent.hidden_layers = vec![16, 16];
    s.experiment.seeds = vec![3, 4];
    s.experiment.eval_episodes = 2;
    s
}

#[test]
fn csv_round_trip_is_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for _ in 0..200 {
        let cols = rng.random_range(1..6);
        let mut t = Table::new((0..cols).map(|c| format!("c{c}")));
        for _ in 0..rng.random_range(0..20) {
            let row = (0..cols)
                .map(|_| match rng.random_range(0..5) {
                    0 => Cell::Empty,
                    1 => Cell::Text(["agg", "dqn", "max_power", "a,b", "x\"y"][rng.random_range(0..5)].into()),
                    2 => Cell::Num(rng.random_range(0..1000) as f64),
                    3 => Cell::Num(f64::from_bits(rng.random::<u64>() >> 2)),
                    _ => Cell::Num(rng.random::<f64>() * 10f64.powi(rng.random_range(-30..30))),
                })
                .collect();
            t.push(row).unwrap();
        }
        // A single blank column is indistinguishable from a blank line in CSV.
        if cols == 1 {
            t.rows.retain(|r| r[0] != Cell::Empty);
        }
        let text = t.to_csv().unwrap();
        assert_eq!(Table::from_csv(&text).unwrap(), t, "{text}");
        assert_eq!(Table::from_csv(&text).unwrap().to_csv().unwrap(), text);
    }
}

#[test]
fn curve_rows_are_self_consistent() {
    let s = quick_settings();
    let runs = run_curves(&s).unwrap();
    assert_eq!(runs.len(), 2);
    for run in &runs {
        for records in [&run.training.records, &run.testing] {
            let table = curve_table(records);
            assert_eq!(table.header, CURVE_COLUMNS);
            assert_eq!(table.rows.len(), records.len());
            for r in records.iter() {
                let n = r.user_rates.len() as f64;
                let joint = r.user_rates.iter().sum::<f64>() / n;
                assert!((r.rate_all - joint).abs() < 1e-12);
                let group = |ceu: bool| {
                    let v: Vec<f64> = r
                        .user_rates
                        .iter()
                        .zip(&r.is_ceu)
                        .filter(|(_, &c)| c == ceu)
                        .map(|(x, _)| *x)
                        .collect();
                    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
                };
                assert_eq!(r.rate_ccu.is_some(), group(false).is_some());
                assert_eq!(r.rate_ceu.is_some(), group(true).is_some());
                let n_ceu = r.is_ceu.iter().filter(|&&c| c).count() as f64;
                let weighted = r.rate_ccu.unwrap_or(0.0) * (n - n_ceu) + r.rate_ceu.unwrap_or(0.0) * n_ceu;
                assert!((weighted / n - r.rate_all).abs() < 1e-12);
            }
        }
        assert_eq!(run.testing.len(), 20);
        assert!(run.testing.iter().all(|r| r.epsilon == 0.0 && r.loss.is_none()));
    }
}

#[test]
fn aggregates_recompute_from_emitted_rows() {
    let mut s = quick_settings();
    s.experiment.users_grid = vec![4, 1, 2];
    s.experiment.seeds = vec![0, 1, 2];
    let rows = run_sweep_users(&s).unwrap();
    let table = Table::from_csv(&sweep_table(&rows).to_csv().unwrap()).unwrap();
    assert_eq!(table.rows.len(), 3 * 4);
    let ks: Vec<f64> = table.rows.iter().map(|r| r[2].num().unwrap()).collect();
    assert!(ks.windows(2).all(|w| w[0] <= w[1]), "K not ascending: {ks:?}");
    let seed = table.column("seed").unwrap();
    for chunk in table.rows.chunks(4) {
        assert_eq!(chunk[3][seed], Cell::Text("agg".into()));
        for name in ["rate_all", "rate_ccu", "rate_ceu"] {
            let c = table.column(name).unwrap();
            let vals: Vec<f64> = chunk[..3].iter().filter_map(|r| r[c].num()).collect();
            match chunk[3][c].num() {
                Some(m) => {
                    let mean = vals.iter().sum::<f64>() / vals.len() as f64;
                    assert!((m - mean).abs() < 1e-12);
                    let sd = table.column(&format!("{name}_std")).unwrap();
                    if vals.len() > 1 {
                        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (vals.len() - 1) as f64;
                        assert!((chunk[3][sd].num().unwrap() - var.sqrt()).abs() < 1e-12);
                    }
                }
                None => assert!(vals.is_empty()),
            }
        }
    }
}

#[test]
fn policies_share_evaluation_snapshots() {
    let mut s = quick_settings();
    s.experiment.eval_episodes = 3;
    let max = policy_records(&s, Policy::MaxPower, 7).unwrap();
    let rnd = policy_records(&s, Policy::Random, 7).unwrap();
    let dqn = policy_records(&s, Policy::Dqn, 7).unwrap();
    for ((a, b), c) in max.iter().zip(&rnd).zip(&dqn) {
        assert_eq!(a.is_ceu, b.is_ceu);
        assert_eq!(a.is_ceu, c.is_ceu);
        assert!(a.action.levels().iter().all(|&m| m == 9));
        assert!(a
            .action
            .levels()
            .iter()
            .all(|&m| power_of_level(m, &s.network).unwrap() == 38.0));
    }
    // Geometry is common to the D0 variants; only classification differs.
    let mut envs: Vec<_> = [Policy::Dqn, Policy::DqnNoUav, Policy::DqnAllUav]
        .iter()
        .map(|p| eval_env(&p.network(&s.network), &s.agent, 7).unwrap())
        .collect();
    for _ in 0..3 {
        let snaps: Vec<NetworkSnapshot> = envs
            .iter_mut()
            .map(|e| {
                e.reset().unwrap();
                e.snapshot().unwrap().clone()
            })
            .collect();
        assert_eq!(snaps[0].user_positions, snaps[1].user_positions);
        assert_eq!(snaps[0].user_positions, snaps[2].user_positions);
        assert!(snaps[1].active_uavs.is_empty());
        assert_eq!(snaps[2].ceu_count(), snaps[2].n_users());
        assert_eq!(envs[0].links().unwrap().direct, envs[1].links().unwrap().direct);
    }
}

#[test]
fn random_policy_matches_monte_carlo() {
    let mut s = quick_settings();
    s.agent.slots_per_episode = 5;
    s.experiment.eval_episodes = 2000;
    let recs = policy_records(&s, Policy::Random, 11).unwrap();
    let policy_mean = recs.iter().map(|r| r.rate_all).sum::<f64>() / recs.len() as f64;

    let cfg = NetworkConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let draws = 10_000;
    let mut total = 0.0;
    for _ in 0..draws {
        let snap = NetworkSnapshot::generate(&cfg, &mut rng).unwrap();
        let tx = (0..9)
            .map(|_| power_of_level(rng.random_range(0..10), &cfg).unwrap())
            .collect();
        let scen = Scenario::new(&cfg, &snap.bs_positions, &snap.user_positions, tx);
        let res = oracle::evaluate(&scen, &FadingTable::random(snap.n_users(), 9, &mut rng));
        total += res.iter().map(|r| r.rate).sum::<f64>() / res.len() as f64;
    }
    let mc_mean = total / draws as f64;
    assert!(
        (policy_mean - mc_mean).abs() / mc_mean < 0.03,
        "policy {policy_mean} vs Monte-Carlo {mc_mean}"
    );
}

#[test]
fn baseline_table_has_every_policy() {
    let mut s = quick_settings();
    s.experiment.seeds = vec![1];
    let table = baseline_table(&run_baselines(&s).unwrap());
    let names: Vec<&Cell> = table.rows.iter().map(|r| &r[0]).collect();
    for p in Policy::ALL {
        assert_eq!(
            names.iter().filter(|c| ***c == Cell::Text(p.as_str().into())).count(),
            2
        );
    }
    let d0 = table.column("d0_m").unwrap();
    let row = |p: Policy| {
        table
            .rows
            .iter()
            .find(|r| r[0] == Cell::Text(p.as_str().into()))
            .unwrap()
    };
    assert_eq!(row(Policy::DqnNoUav)[d0], Cell::Num(f64::INFINITY));
    assert_eq!(row(Policy::DqnAllUav)[d0], Cell::Num(0.0));
    assert_eq!(row(Policy::DqnNoUav)[table.column("rate_ceu").unwrap()], Cell::Empty);
}
