//! Poisson cellular deployment, link budget, association and per-cell user
//! pools.
//!
//! Every random draw of a drop comes from a generator seeded by
//! `(seed, stream, drop_index, ...)`, so drops can be generated in any order or
//! in parallel and still be reproduced bit for bit.

use std::io::Write;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::clustering::UserPool;
use crate::error::NetworkError;
use crate::noma::{LinearSinr, Member};

/// Thermal noise density at room temperature.
pub const THERMAL_NOISE_DBM_PER_HZ: f64 = -174.0;

/// Smallest linear channel gain a link can take (-300 dB).
pub const GAIN_FLOOR: f64 = 1e-30;

const MAX_DROP_ATTEMPTS: u32 = 1000;

const DEFAULT_PROFILE: &str = include_str!("../profiles/urban_macro_v1.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PathLossModel {
    /// `13.54 + 39.08 log10(d3D) + 20 log10(fc) - 0.6 (hUT - 1.5)` dB, the
    /// urban-macro NLOS fit.
    UmaNlos { bs_height_m: f64, ue_height_m: f64 },
    /// `intercept + 10 * exponent * log10(d)` dB with `d` in metres.
    LogDistance { intercept_db: f64, exponent: f64 },
}

impl PathLossModel {
    pub fn loss_db(&self, distance_2d_m: f64, carrier_ghz: f64) -> f64 {
        match *self {
            PathLossModel::UmaNlos {
                bs_height_m,
                ue_height_m,
            } => {
                let dh = bs_height_m - ue_height_m;
                let d3 = (distance_2d_m * distance_2d_m + dh * dh).sqrt();
                13.54 + 39.08 * d3.log10() + 20.0 * carrier_ghz.log10() - 0.6 * (ue_height_m - 1.5)
            }
            PathLossModel::LogDistance {
                intercept_db,
                exponent,
            } => intercept_db + 10.0 * exponent * distance_2d_m.log10(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FadingModel {
    None,
    /// Unit-mean exponential power gain, drawn once per link per drop.
    Rayleigh,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Association {
    /// Strongest long-term link (path loss and shadowing, fading averaged out).
    #[default]
    LongTerm,
    /// Strongest link including this drop's fading realisation.
    Instantaneous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadioConfig {
    /// Name and version of the propagation profile.
    pub profile: String,
    pub bs_density_per_km2: f64,
    pub user_density_per_km2: f64,
    /// Side of the square deployment region.
    pub region_side_km: f64,
    /// Side of the central measurement square as a fraction of the region side.
    pub measurement_fraction: f64,
    pub tx_power_dbm: f64,
    pub bandwidth_hz: f64,
    pub noise_figure_db: f64,
    /// Overrides the thermal noise derived from bandwidth and noise figure.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_power_dbm: Option<f64>,
    pub carrier_frequency_ghz: f64,
    pub pathloss: PathLossModel,
    pub shadowing_sigma_db: f64,
    pub fading: FadingModel,
    #[serde(default)]
    pub association: Association,
    /// Minimum horizontal user-to-site distance.
    pub min_distance_m: f64,
    pub users_per_bs: usize,
    pub seed: u64,
}

impl Default for RadioConfig {
    fn default() -> Self {
        Self::urban_macro()
    }
}

impl RadioConfig {
    /// The bundled urban-macro profile (`profiles/urban_macro_v1.json`).
    pub fn urban_macro() -> Self {
        serde_json::from_str(DEFAULT_PROFILE).expect("bundled radio profile is valid JSON")
    }

    pub fn noise_power_dbm(&self) -> f64 {
        self.noise_power_dbm.unwrap_or_else(|| {
            THERMAL_NOISE_DBM_PER_HZ + 10.0 * self.bandwidth_hz.log10() + self.noise_figure_db
        })
    }

    pub fn region_area_km2(&self) -> f64 {
        self.region_side_km * self.region_side_km
    }

    // negated comparisons also reject NaN
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<(), NetworkError> {
        let bad = |msg: String| Err(NetworkError::InvalidConfig(msg));
        if !(self.bs_density_per_km2 > 0.0) {
            return bad(format!(
                "bs_density_per_km2 must be positive, got {}",
                self.bs_density_per_km2
            ));
        }
        if !(self.user_density_per_km2 > 0.0) {
            return bad(format!(
                "user_density_per_km2 must be positive to select {} users per cell, got {}",
                self.users_per_bs, self.user_density_per_km2
            ));
        }
        if !(self.region_side_km > 0.0) {
            return bad("region_side_km must be positive".into());
        }
        if self.bs_density_per_km2 * self.region_area_km2() < 1.0 {
            return bad(format!(
                "expected base-station count {} is below one; enlarge the region",
                self.bs_density_per_km2 * self.region_area_km2()
            ));
        }
        if !(self.measurement_fraction > 0.0 && self.measurement_fraction <= 1.0) {
            return bad("measurement_fraction must lie in (0, 1]".into());
        }
        if self.users_per_bs == 0 {
            return bad("users_per_bs must be at least 1".into());
        }
        if !(self.bandwidth_hz > 0.0) || !(self.carrier_frequency_ghz > 0.0) {
            return bad("bandwidth and carrier frequency must be positive".into());
        }
        if !(self.shadowing_sigma_db >= 0.0) {
            return bad("shadowing_sigma_db must be non-negative".into());
        }
        if !(self.min_distance_m > 0.0) {
            return bad("min_distance_m must be positive".into());
        }
        let finite = [
            self.tx_power_dbm,
            self.noise_figure_db,
            self.noise_power_dbm(),
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return bad("power levels must be finite".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Random stream tags, so different consumers never share draws.
#[derive(Debug, Clone, Copy)]
#[repr(u64)]
enum Stream {
    Deployment = 1,
    PoolSelection = 2,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent generator from the run seed and a path of indices.
pub fn derived_rng(seed: u64, path: &[u64]) -> ChaCha8Rng {
    let mixed = path
        .iter()
        .fold(splitmix64(seed), |acc, &w| splitmix64(acc ^ splitmix64(w)));
    ChaCha8Rng::seed_from_u64(mixed)
}

fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

/// One realisation of sites, users and channels.
#[derive(Debug, Clone, PartialEq)]
pub struct Deployment {
    pub drop_index: u64,
    /// Extra attempts needed because earlier attempts had no base station.
    pub regenerations: u32,
    pub base_stations: Vec<Point>,
    pub users: Vec<Point>,
    n_bs: usize,
    tx_power_mw: f64,
    noise_mw: f64,
    /// Linear channel gains, user-major: `gains[u * n_bs + b]`.
    gains: Vec<f64>,
    serving: Vec<usize>,
    sinr: Vec<LinearSinr>,
}

impl Deployment {
    /// Builds a deployment from explicit per-link gains and associates each
    /// user to its strongest link.
    pub fn from_gains(
        tx_power_mw: f64,
        noise_mw: f64,
        gains: Vec<Vec<f64>>,
    ) -> Result<Self, NetworkError> {
        let n_bs = gains.first().map_or(0, Vec::len);
        if n_bs == 0 || gains.iter().any(|row| row.len() != n_bs) {
            return Err(NetworkError::InvalidConfig(
                "gain matrix must be rectangular with at least one base station".into(),
            ));
        }
        let flat: Vec<f64> = gains.into_iter().flatten().collect();
        let serving = strongest(&flat, n_bs);
        Self::assemble(
            0,
            0,
            Vec::new(),
            Vec::new(),
            n_bs,
            tx_power_mw,
            noise_mw,
            flat,
            serving,
        )
    }

    #[allow(clippy::too_many_arguments)]
    fn assemble(
        drop_index: u64,
        regenerations: u32,
        base_stations: Vec<Point>,
        users: Vec<Point>,
        n_bs: usize,
        tx_power_mw: f64,
        noise_mw: f64,
        gains: Vec<f64>,
        serving: Vec<usize>,
    ) -> Result<Self, NetworkError> {
        let n_users = gains.len() / n_bs;
        let mut d = Self {
            drop_index,
            regenerations,
            base_stations,
            users,
            n_bs,
            tx_power_mw,
            noise_mw,
            gains,
            serving,
            sinr: Vec::with_capacity(n_users),
        };
        d.sinr = (0..n_users)
            .map(|u| d.compute_sinr(u))
            .collect::<Result<_, _>>()?;
        Ok(d)
    }

    pub fn bs_count(&self) -> usize {
        self.n_bs
    }

    pub fn user_count(&self) -> usize {
        self.serving.len()
    }

    pub fn serving_bs(&self, user: usize) -> usize {
        self.serving[user]
    }

    pub fn association(&self) -> &[usize] {
        &self.serving
    }

    pub fn sinr(&self, user: usize) -> LinearSinr {
        self.sinr[user]
    }

    pub fn gain(&self, user: usize, bs: usize) -> f64 {
        self.gains[user * self.n_bs + bs]
    }

    pub fn tx_power_mw(&self) -> f64 {
        self.tx_power_mw
    }

    pub fn noise_mw(&self) -> f64 {
        self.noise_mw
    }

    /// `P g_serving / (N0 + sum over other sites of P g)`.
    pub fn compute_sinr(&self, user: usize) -> Result<LinearSinr, NetworkError> {
        if user >= self.serving.len() {
            return Err(NetworkError::UnknownUser { user });
        }
        let n_bs = self.n_bs;
        let row = &self.gains[user * n_bs..(user + 1) * n_bs];
        let s = self.serving[user];
        let interference: f64 = row
            .iter()
            .enumerate()
            .filter(|&(b, _)| b != s)
            .map(|(_, g)| self.tx_power_mw * g)
            .sum();
        Ok(LinearSinr::new(
            self.tx_power_mw * row[s] / (self.noise_mw + interference),
        )?)
    }

    /// Users associated with `bs`, in index order.
    pub fn associated_users(&self, bs: usize) -> Vec<usize> {
        self.serving
            .iter()
            .enumerate()
            .filter(|&(_, &s)| s == bs)
            .map(|(u, _)| u)
            .collect()
    }

    /// Writes `drop,user,bs,gain_db,serving` rows for every link.
    pub fn write_gain_dump<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "drop,user,bs,gain_db,serving")?;
        let n_bs = self.n_bs;
        for u in 0..self.user_count() {
            for b in 0..n_bs {
                let g = self.gains[u * n_bs + b];
                writeln!(
                    out,
                    "{},{},{},{},{}",
                    self.drop_index,
                    u,
                    b,
                    10.0 * g.log10(),
                    u8::from(self.serving[u] == b)
                )?;
            }
        }
        Ok(())
    }
}

fn strongest(gains: &[f64], n_bs: usize) -> Vec<usize> {
    gains
        .chunks_exact(n_bs)
        .map(|row| {
            let mut best = 0;
            for (b, &g) in row.iter().enumerate().skip(1) {
                if g > row[best] {
                    best = b;
                }
            }
            best
        })
        .collect()
}

/// Draws a Poisson deployment and its channels for one drop.
///
/// Attempts without any base station are redrawn from a fresh sub-stream and
/// counted in [`Deployment::regenerations`].
pub fn generate_drop(config: &RadioConfig, drop_index: u64) -> Result<Deployment, NetworkError> {
    config.validate()?;
    let side_m = config.region_side_km * 1000.0;
    let area = config.region_area_km2();
    let bs_count = Poisson::new(config.bs_density_per_km2 * area)
        .map_err(|e| NetworkError::InvalidConfig(e.to_string()))?;
    let user_count = Poisson::new(config.user_density_per_km2 * area)
        .map_err(|e| NetworkError::InvalidConfig(e.to_string()))?;
    let shadowing = Normal::new(0.0, config.shadowing_sigma_db)
        .map_err(|e| NetworkError::InvalidConfig(e.to_string()))?;

    for attempt in 0..MAX_DROP_ATTEMPTS {
        let mut rng = derived_rng(
            config.seed,
            &[Stream::Deployment as u64, drop_index, attempt as u64],
        );
        let n_bs = bs_count.sample(&mut rng) as usize;
        let n_users = user_count.sample(&mut rng) as usize;
        if n_bs == 0 {
            continue;
        }
        let point = |rng: &mut ChaCha8Rng| Point {
            x: rng.random::<f64>() * side_m,
            y: rng.random::<f64>() * side_m,
        };
        let base_stations: Vec<Point> = (0..n_bs).map(|_| point(&mut rng)).collect();
        let users: Vec<Point> = (0..n_users).map(|_| point(&mut rng)).collect();

        let mut long_term = Vec::with_capacity(n_bs * n_users);
        let mut gains = Vec::with_capacity(n_bs * n_users);
        for u in &users {
            for b in &base_stations {
                let d = u.distance(*b).max(config.min_distance_m);
                let loss_db = config.pathloss.loss_db(d, config.carrier_frequency_ghz)
                    + shadowing.sample(&mut rng);
                let lt = 10f64.powf(-loss_db / 10.0).max(GAIN_FLOOR);
                let fade: f64 = match config.fading {
                    FadingModel::None => 1.0,
                    FadingModel::Rayleigh => Exp1.sample(&mut rng),
                };
                long_term.push(lt);
                gains.push((lt * fade).max(GAIN_FLOOR));
            }
        }
        let serving = match config.association {
            Association::LongTerm => strongest(&long_term, n_bs),
            Association::Instantaneous => strongest(&gains, n_bs),
        };
        return Deployment::assemble(
            drop_index,
            attempt,
            base_stations,
            users,
            n_bs,
            dbm_to_mw(config.tx_power_dbm),
            dbm_to_mw(config.noise_power_dbm()),
            gains,
            serving,
        );
    }
    Err(NetworkError::DegenerateDrop {
        drop_index,
        attempts: MAX_DROP_ATTEMPTS,
    })
}

/// Picks `n` of the users associated with `bs` uniformly at random, or `None`
/// when the cell has fewer than `n` users.
pub fn select_pool<R: Rng + ?Sized>(
    deployment: &Deployment,
    bs: usize,
    n: usize,
    rng: &mut R,
) -> Result<Option<UserPool>, NetworkError> {
    if bs >= deployment.bs_count() {
        return Err(NetworkError::UnknownBaseStation { bs });
    }
    let candidates = deployment.associated_users(bs);
    if candidates.len() < n {
        return Ok(None);
    }
    let mut picked = index::sample(rng, candidates.len(), n).into_vec();
    picked.sort_unstable();
    let users = picked
        .into_iter()
        .map(|k| {
            let u = candidates[k];
            Member {
                id: crate::noma::UserId(u as u32),
                sinr: deployment.sinr(u),
            }
        })
        .collect();
    Ok(Some(UserPool::new(users)?))
}

/// Base stations inside the central measurement square.
pub fn measured_base_stations(config: &RadioConfig, deployment: &Deployment) -> Vec<usize> {
    let side = config.region_side_km * 1000.0;
    let lo = side * (1.0 - config.measurement_fraction) / 2.0;
    let hi = side - lo;
    deployment
        .base_stations
        .iter()
        .enumerate()
        .filter(|(_, p)| p.x >= lo && p.x <= hi && p.y >= lo && p.y <= hi)
        .map(|(b, _)| b)
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellPool {
    pub bs: usize,
    pub pool: UserPool,
}

/// The measured cells of one drop that had enough users.
#[derive(Debug, Clone, PartialEq)]
pub struct DropPools {
    pub drop_index: u64,
    pub regenerations: u32,
    pub cells: Vec<CellPool>,
    /// Measured cells skipped for having fewer than `users_per_bs` users.
    pub skipped_cells: usize,
}

pub fn drop_pools(config: &RadioConfig, drop_index: u64) -> Result<DropPools, NetworkError> {
    let deployment = generate_drop(config, drop_index)?;
    pools_from_deployment(config, &deployment)
}

pub fn pools_from_deployment(
    config: &RadioConfig,
    deployment: &Deployment,
) -> Result<DropPools, NetworkError> {
    let mut cells = Vec::new();
    let mut skipped_cells = 0;
    for bs in measured_base_stations(config, deployment) {
        let mut rng = derived_rng(
            config.seed,
            &[
                Stream::PoolSelection as u64,
                deployment.drop_index,
                bs as u64,
            ],
        );
        match select_pool(deployment, bs, config.users_per_bs, &mut rng)? {
            Some(pool) => cells.push(CellPool { bs, pool }),
            None => skipped_cells += 1,
        }
    }
    Ok(DropPools {
        drop_index: deployment.drop_index,
        regenerations: deployment.regenerations,
        cells,
        skipped_cells,
    })
}

/// Members of a pool as plain SINR values, strongest first.
pub fn pool_sinrs(pool: &UserPool) -> Vec<f64> {
    let mut v: Vec<f64> = pool.users().iter().map(|m| m.sinr.value()).collect();
    v.sort_by(|a, b| b.total_cmp(a));
    v
}
