//! Randomised property suites for the rate model, runnable outside the test
//! harness (the CLI `verify` command uses them).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::exec::Execution;
use crate::noma::{
    allocate_powers, alpha_lower_bound, alpha_lower_bound_strict, beta_ordering_holds,
    cluster_feasibility, noma_rate, oma_rate, power_factor, zeta_bound, AllocationRule,
    ClusterSpec, LinearSinr,
};

/// Relative tolerance for the rate comparison.
pub const RATE_TOLERANCE: f64 = 1e-9;

const SAMPLER_ATTEMPTS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyOutcome {
    pub name: &'static str,
    pub cases: usize,
    pub violations: usize,
    /// First counterexample, if any.
    pub example: Option<String>,
}

impl PropertyOutcome {
    pub fn passed(&self) -> bool {
        self.cases > 0 && self.violations == 0
    }
}

#[derive(Default)]
struct Tally {
    cases: usize,
    violations: usize,
    example: Option<String>,
}

impl Tally {
    fn check(&mut self, ok: bool, describe: impl FnOnce() -> String) {
        self.cases += 1;
        if !ok {
            self.violations += 1;
            if self.example.is_none() {
                self.example = Some(describe());
            }
        }
    }

    fn finish(self, name: &'static str) -> PropertyOutcome {
        PropertyOutcome {
            name,
            cases: self.cases,
            violations: self.violations,
            example: self.example,
        }
    }
}

/// Draws SINRs in dB with random gaps and keeps the first draw that passes the
/// feasibility gate at `beta`. `None` if nothing passes within the attempt cap.
pub fn sample_feasible_cluster<R: Rng>(rng: &mut R, size: usize, beta: f64) -> Option<ClusterSpec> {
    for _ in 0..SAMPLER_ATTEMPTS {
        let mut db = rng.random_range(0.0..50.0);
        let mut sinrs = Vec::with_capacity(size);
        for _ in 0..size {
            sinrs.push(10f64.powf(db / 10.0));
            db -= rng.random_range(0.5..15.0);
        }
        let cluster = ClusterSpec::from_sinrs(&sinrs, beta).ok()?;
        if cluster_feasibility(&cluster).cluster_pass {
            return Some(cluster);
        }
    }
    None
}

/// Every user of a cluster that passes the gate gets at least its OMA rate.
pub fn guarantee_violations(cluster: &ClusterSpec, rule: AllocationRule) -> Vec<usize> {
    let g = cluster.size();
    let Ok(alloc) = allocate_powers(cluster, rule) else {
        return (1..=g).collect();
    };
    (1..=g)
        .filter(|&rank| {
            let gamma = cluster.sinr(rank).expect("rank in range");
            let oma = oma_rate(gamma, g);
            let noma = noma_rate(cluster, &alloc, rank).expect("allocation matches cluster");
            noma < oma - RATE_TOLERANCE * oma
        })
        .collect()
}

fn guarantee(cases: usize, seed: u64, beta_max: f64) -> Tally {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Tally::default();
    for k in 0..cases {
        let size = [2, 4, 8][k % 3];
        let beta = if beta_max > 0.0 {
            rng.random_range(0.0..=beta_max)
        } else {
            0.0
        };
        let Some(cluster) = sample_feasible_cluster(&mut rng, size, beta) else {
            continue;
        };
        let bad = guarantee_violations(&cluster, AllocationRule::PerfectSic);
        t.check(bad.is_empty(), || {
            format!(
                "beta={beta} sinrs={:?} failing ranks {bad:?}",
                cluster
                    .members()
                    .iter()
                    .map(|m| m.sinr.value())
                    .collect::<Vec<_>>()
            )
        });
    }
    t
}

fn allocation_shape(cases: usize, seed: u64) -> Tally {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Tally::default();
    for k in 0..cases {
        let size = [2, 4, 8][k % 3];
        let Some(cluster) = sample_feasible_cluster(&mut rng, size, 0.0) else {
            continue;
        };
        let alloc = allocate_powers(&cluster, AllocationRule::PerfectSic);
        t.check(
            alloc.as_ref().is_ok_and(|a| {
                a.pre_sharing_sum() < 1.0
                    && (a.total() - 1.0).abs() <= 1e-12
                    && a.is_strictly_ordered()
            }),
            || format!("{cluster:?} -> {alloc:?}"),
        );
    }
    t
}

fn strict_dominates(cases: usize, seed: u64) -> Tally {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Tally::default();
    for _ in 0..cases {
        let size = 1usize << rng.random_range(1..=5);
        let rank = rng.random_range(1..=size);
        let beta = rng.random_range(0.0..=1.0);
        let gamma = LinearSinr::from_db(rng.random_range(-20.0..50.0)).expect("finite");
        let strict = alpha_lower_bound_strict(gamma, size, rank, beta).expect("valid");
        let floor = (size - rank) as f64 * strict;
        if floor >= 1.0 {
            continue;
        }
        let tail = rng.random_range(floor..1.0);
        let loose = alpha_lower_bound(gamma, size, beta, tail).expect("valid");
        t.check(strict >= loose * (1.0 - 1e-12), || {
            format!(
                "gamma={} G={size} i={rank} beta={beta} tail={tail}",
                gamma.value()
            )
        });
    }
    t
}

fn zeta_consistency() -> Tally {
    let mut t = Tally::default();
    let grid: Vec<f64> = (0..=24).map(|k| -10.0 + 2.5 * k as f64).collect();
    for &size in &[2usize, 4, 8, 16, 32] {
        for (a, &db_prev) in grid.iter().enumerate() {
            for &db_curr in &grid[..=a] {
                let prev = LinearSinr::from_db(db_prev).expect("finite");
                let curr = LinearSinr::from_db(db_curr).expect("finite");
                for rank in [2, size / 2 + 1, size] {
                    if rank < 2 {
                        continue;
                    }
                    let Some(zeta) = zeta_bound(prev, curr, size, rank).expect("valid") else {
                        continue;
                    };
                    for step in 0..=20 {
                        let beta = step as f64 / 20.0;
                        if (beta - zeta).abs() <= 1e-9 {
                            continue;
                        }
                        let direct =
                            beta_ordering_holds(prev, curr, size, rank, beta).expect("valid");
                        t.check(direct == (beta < zeta), || {
                            format!("{db_prev} dB / {db_curr} dB G={size} i={rank} beta={beta}")
                        });
                    }
                }
            }
        }
    }
    t
}

fn factor_monotone() -> Tally {
    let mut t = Tally::default();
    for k in 0..=120 {
        let gamma = LinearSinr::from_db(-60.0 + k as f64).expect("finite");
        for size in 1..64 {
            let a = power_factor(gamma, size);
            let b = power_factor(gamma, size + 1);
            t.check(b < a, || format!("gamma={} G={size}", gamma.value()));
        }
    }
    t
}

fn factor_limit() -> Tally {
    let mut t = Tally::default();
    let gamma = LinearSinr::new(1e-8).expect("positive");
    for size in 1..=64 {
        let f = power_factor(gamma, size);
        t.check((f - 1.0 / size as f64).abs() <= 1e-6, || {
            format!("G={size} F={f}")
        });
    }
    t
}

fn single_user(cases: usize, seed: u64) -> Tally {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Tally::default();
    for _ in 0..cases {
        let gamma = 10f64.powf(rng.random_range(-3.0..6.0));
        let cluster =
            ClusterSpec::from_sinrs(&[gamma], rng.random_range(0.0..=1.0)).expect("valid");
        let alloc = allocate_powers(&cluster, AllocationRule::PerfectSic).expect("single user");
        let noma = noma_rate(&cluster, &alloc, 1).expect("rank 1");
        let oma = oma_rate(cluster.sinr(1).expect("rank 1"), 1);
        t.check(alloc.alphas() == [1.0] && noma == oma, || {
            format!("gamma={gamma}")
        });
    }
    t
}

/// Runs every property. The imperfect-SIC guarantee is reported separately
/// because the feasibility gate does not imply it for `beta > 0`.
pub fn run_core_properties(cases: usize, seed: u64, exec: Execution) -> Vec<PropertyOutcome> {
    type Job = Box<dyn Fn() -> PropertyOutcome + Send + Sync>;
    let jobs: Vec<Job> = vec![
        Box::new(move || guarantee(cases, seed, 0.0).finish("rate guarantee, perfect SIC")),
        Box::new(move || {
            guarantee(cases, seed ^ 1, 0.1).finish("rate guarantee, imperfect SIC (beta <= 0.1)")
        }),
        Box::new(move || allocation_shape(cases, seed ^ 2).finish("power budget and ordering")),
        Box::new(move || {
            strict_dominates(cases, seed ^ 3).finish("strict bound dominates sufficient bound")
        }),
        Box::new(|| zeta_consistency().finish("zeta matches direct ordering test")),
        Box::new(|| factor_monotone().finish("power factor decreasing in cluster size")),
        Box::new(|| factor_limit().finish("power factor low-SINR limit")),
        Box::new(move || single_user(cases, seed ^ 4).finish("single-user cluster equals OMA")),
    ];
    exec.map(jobs, |job| job())
}
