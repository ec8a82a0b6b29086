//! Cell layout, user drops, CEU classification and UAV pairing.

use rand::distr::Open01;
use rand::Rng;

use crate::config::NetworkConfig;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub fn above(p: Point2, z: f64) -> Self {
        Self { x: p.x, y: p.y, z }
    }

    /// 3-D distance to a ground point.
    pub fn distance_to_ground(&self, p: &Point2) -> f64 {
        let horizontal = (self.x - p.x).hypot(self.y - p.y);
        horizontal.hypot(self.z)
    }
}

/// Square grid of base stations, centered at the origin, row-major.
pub fn build_grid(config: &NetworkConfig) -> Result<Vec<Point2>> {
    let side = (config.n_cells as f64).sqrt().round() as usize;
    if config.n_cells == 0 || side * side != config.n_cells {
        return Err(Error::Config(format!(
            "n_cells must be a positive perfect square, got {}",
            config.n_cells
        )));
    }
    let spacing = config.inter_site_distance_m;
    let offset = (side as f64 - 1.0) / 2.0;
    let coord = |i: usize| (i as f64 - offset) * spacing;
    let mut sites = Vec::with_capacity(config.n_cells);
    for row in 0..side {
        for col in 0..side {
            sites.push(Point2::new(coord(col), coord(row)));
        }
    }
    Ok(sites)
}

/// Inverse CDF of `f(r) = 2r/R^2`, clamped up to the minimum user distance.
pub fn radius_from_uniform(u: f64, config: &NetworkConfig) -> f64 {
    (config.cell_radius_m * u.sqrt()).max(config.min_user_distance_m)
}

/// Drops one user uniformly over the disk of radius R around `site`.
pub fn sample_user_position<R: Rng + ?Sized>(site: Point2, config: &NetworkConfig, rng: &mut R) -> Point2 {
    let u: f64 = rng.sample(Open01);
    let phi = rng.random::<f64>() * std::f64::consts::TAU;
    let r = radius_from_uniform(u, config);
    Point2::new(site.x + r * phi.cos(), site.y + r * phi.sin())
}

/// Frozen geometry of one episode.
///
/// User `i` belongs to cell `i / users_per_cell` and is served by that
/// cell's BS. UAV `m` hovers above BS `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSnapshot {
    pub bs_positions: Vec<Point2>,
    pub uav_positions: Vec<Point3>,
    pub user_positions: Vec<Point2>,
    pub users_per_cell: usize,
    pub serving_distance_m: Vec<f64>,
    pub is_ceu: Vec<bool>,
    pub uav_of_user: Vec<Option<usize>>,
    pub user_of_uav: Vec<Option<usize>>,
    /// Paired UAV indices, ascending.
    pub active_uavs: Vec<usize>,
}

impl NetworkSnapshot {
    /// Fresh grid layout with randomly dropped users.
    pub fn generate<R: Rng + ?Sized>(config: &NetworkConfig, rng: &mut R) -> Result<Self> {
        let sites = build_grid(config)?;
        Self::generate_on_sites(sites, config, rng)
    }

    /// Same as [`generate`](Self::generate) but on caller-supplied BS sites,
    /// which need not form a square grid.
    pub fn generate_on_sites<R: Rng + ?Sized>(sites: Vec<Point2>, config: &NetworkConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let mut users = Vec::with_capacity(sites.len() * config.users_per_cell);
        for site in &sites {
            for _ in 0..config.users_per_cell {
                users.push(sample_user_position(*site, config, rng));
            }
        }
        Self::assemble(sites, users, config)
    }

    /// Builds a snapshot from explicit positions, then classifies and pairs.
    pub fn assemble(bs_positions: Vec<Point2>, user_positions: Vec<Point2>, config: &NetworkConfig) -> Result<Self> {
        if bs_positions.is_empty() {
            return Err(Error::Config("at least one base station is required".into()));
        }
        if user_positions.len() != bs_positions.len() * config.users_per_cell {
            return Err(Error::Shape {
                expected: bs_positions.len() * config.users_per_cell,
                actual: user_positions.len(),
            });
        }
        let k = config.users_per_cell;
        let serving_distance_m = user_positions
            .iter()
            .enumerate()
            .map(|(i, u)| u.distance(&bs_positions[i / k]))
            .collect();
        let uav_positions = bs_positions
            .iter()
            .map(|&p| Point3::above(p, config.uav_altitude_m))
            .collect();
        let n_users = user_positions.len();
        let n_uavs = bs_positions.len();
        let mut snapshot = Self {
            bs_positions,
            uav_positions,
            user_positions,
            users_per_cell: k,
            serving_distance_m,
            is_ceu: vec![false; n_users],
            uav_of_user: vec![None; n_users],
            user_of_uav: vec![None; n_uavs],
            active_uavs: Vec::new(),
        };
        snapshot.classify_and_pair(config.ref_distance_m);
        Ok(snapshot)
    }

    /// Re-runs CEU classification and UAV pairing for threshold `ref_distance_m`.
    ///
    /// Each UAV is paired with the nearest CEU of its own cell (lower user
    /// index wins ties); UAVs of cells without a CEU stay inactive.
    pub fn classify_and_pair(&mut self, ref_distance_m: f64) {
        let k = self.users_per_cell;
        for (flag, d) in self.is_ceu.iter_mut().zip(&self.serving_distance_m) {
            *flag = *d > ref_distance_m;
        }
        self.uav_of_user.iter_mut().for_each(|p| *p = None);
        self.active_uavs.clear();
        for cell in 0..self.bs_positions.len() {
            let members = cell * k..(cell + 1) * k;
            let nearest = members
                .filter(|&i| self.is_ceu[i])
                .fold(None, |best: Option<usize>, i| match best {
                    Some(b) if self.serving_distance_m[b] <= self.serving_distance_m[i] => Some(b),
                    _ => Some(i),
                });
            self.user_of_uav[cell] = nearest;
            if let Some(user) = nearest {
                self.uav_of_user[user] = Some(cell);
                self.active_uavs.push(cell);
            }
        }
    }

    pub fn n_cells(&self) -> usize {
        self.bs_positions.len()
    }

    pub fn n_users(&self) -> usize {
        self.user_positions.len()
    }

    pub fn serving_cell(&self, user: usize) -> usize {
        user / self.users_per_cell
    }

    pub fn is_uav_active(&self, uav: usize) -> bool {
        self.user_of_uav[uav].is_some()
    }

    /// UAV assisting `user`, if any.
    pub fn paired_uav(&self, user: usize) -> Option<usize> {
        self.uav_of_user[user]
    }

    pub fn ceu_count(&self) -> usize {
        self.is_ceu.iter().filter(|&&c| c).count()
    }
}
