//! Brute-force reference computations for tests.
//!
//! Everything here is recomputed from raw coordinates with plain loops and
//! shares no arithmetic with [`crate::radio`] or [`crate::topology`].

/// Fading power coefficients of every link, indexed like the simulator's
/// realization: `direct[user][bs]`, `backhaul[uav]`, `access[user][uav]`.
#[derive(Debug, Clone)]
pub struct FadingTable {
    pub direct: Vec<Vec<f64>>,
    pub backhaul: Vec<f64>,
    pub access: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub bs: Vec<(f64, f64)>,
    pub users: Vec<(f64, f64)>,
    pub users_per_cell: usize,
    pub ref_distance_m: f64,
    pub altitude_m: f64,
    pub intercept_db: f64,
    pub slope_db: f64,
    pub air_slope_db: f64,
    pub noise_dbm: f64,
    /// `true` for variable-gain AF, `false` for unit gain.
    pub normalized_relay: bool,
    pub tx_dbm: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct UserResult {
    pub signal_mw: f64,
    pub interference_mw: f64,
    pub sinr: f64,
    pub rate: f64,
}

fn loss_gain(intercept: f64, slope: f64, d: f64) -> f64 {
    let db = intercept + slope * (d / 1000.0).log10();
    10f64.powf(-db / 10.0)
}

/// Nearest-CEU pairing by exhaustive scan; `pair[cell]` is the user index.
pub fn pairing(s: &Scenario) -> Vec<Option<usize>> {
    let mut pair = vec![None; s.bs.len()];
    for (cell, b) in s.bs.iter().enumerate() {
        let mut best: Option<(usize, f64)> = None;
        for u in 0..s.users.len() {
            if u / s.users_per_cell != cell {
                continue;
            }
            let d = ((s.users[u].0 - b.0).powi(2) + (s.users[u].1 - b.1).powi(2)).sqrt();
            if d <= s.ref_distance_m {
                continue;
            }
            if best.is_none() || d < best.unwrap().1 {
                best = Some((u, d));
            }
        }
        pair[cell] = best.map(|(u, _)| u);
    }
    pair
}

/// Enumerates every transmitter (each BS and each active UAV) for every user.
pub fn evaluate(s: &Scenario, f: &FadingTable) -> Vec<UserResult> {
    let noise = 10f64.powf(s.noise_dbm / 10.0);
    let tx: Vec<f64> = s.tx_dbm.iter().map(|p| 10f64.powf(p / 10.0)).collect();
    let pair = pairing(s);
    let mut out = Vec::new();
    for u in 0..s.users.len() {
        let (ux, uy) = s.users[u];
        let home = u / s.users_per_cell;
        let mut signal = 0.0;
        let mut interference = 0.0;
        for (n, &(bx, by)) in s.bs.iter().enumerate() {
            // Terrestrial BS n -> user u.
            let d = ((ux - bx).powi(2) + (uy - by).powi(2)).sqrt();
            let p = tx[n] * f.direct[u][n] * loss_gain(s.intercept_db, s.slope_db, d);
            if n == home {
                signal += p;
            } else {
                interference += p;
            }
            // UAV n (above BS n) -> user u, only if it is paired.
            if let Some(partner) = pair[n] {
                let hop1 = f.backhaul[n] * loss_gain(s.intercept_db, s.air_slope_db, s.altitude_m);
                let rx_at_uav = tx[n] * hop1;
                let amp = if s.normalized_relay {
                    tx[n] / (rx_at_uav + noise)
                } else {
                    1.0
                };
                let d2 = (d * d + s.altitude_m * s.altitude_m).sqrt();
                let p = amp * rx_at_uav * f.access[u][n] * loss_gain(s.intercept_db, s.air_slope_db, d2);
                if partner == u {
                    signal += p;
                } else {
                    interference += p;
                }
            }
        }
        let sinr = signal / (interference + noise);
        out.push(UserResult {
            signal_mw: signal,
            interference_mw: interference,
            sinr,
            rate: (1.0 + sinr).log2(),
        });
    }
    out
}

impl Scenario {
    pub fn new(config: &crate::NetworkConfig, bs: &[crate::Point2], users: &[crate::Point2], tx_dbm: Vec<f64>) -> Self {
        Self {
            bs: bs.iter().map(|p| (p.x, p.y)).collect(),
            users: users.iter().map(|p| (p.x, p.y)).collect(),
            users_per_cell: config.users_per_cell,
            ref_distance_m: config.ref_distance_m,
            altitude_m: config.uav_altitude_m,
            intercept_db: config.pathloss_intercept_db,
            slope_db: config.pathloss_slope,
            air_slope_db: config.air_pathloss_slope,
            noise_dbm: config.noise_dbm,
            normalized_relay: config.relay_mode == crate::RelayMode::NormalizedAf,
            tx_dbm,
        }
    }
}

impl FadingTable {
    pub fn ones(n_users: usize, n_cells: usize) -> Self {
        Self {
            direct: vec![vec![1.0; n_cells]; n_users],
            backhaul: vec![1.0; n_cells],
            access: vec![vec![1.0; n_cells]; n_users],
        }
    }

    /// Independent unit-mean exponential coefficients, `-ln(u)`.
    pub fn random<R: rand::Rng + ?Sized>(n_users: usize, n_cells: usize, rng: &mut R) -> Self {
        let mut draw = || -(1.0 - rng.random::<f64>()).ln();
        let direct = (0..n_users).map(|_| (0..n_cells).map(|_| draw()).collect()).collect();
        let backhaul = (0..n_cells).map(|_| draw()).collect();
        let access = (0..n_users).map(|_| (0..n_cells).map(|_| draw()).collect()).collect();
        Self {
            direct,
            backhaul,
            access,
        }
    }
}
