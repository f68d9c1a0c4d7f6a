//! Near-far cluster layout, cluster splitting, and the MUP / AMUP scheduling
//! policies.
//!
//! Clusters are processed independently: no power or interference coupling
//! exists between clusters of the same cell.
//!
//! Resource accounting: every original cluster of size `G` owns one resource
//! unit. A NOMA group of size `g` carved out of it by successive halving owns
//! `g / G` of that unit, and each OMA user owns `1 / G`. Fractions of the
//! disjoint groups of one original cluster therefore always sum to one.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{ClusteringError, NomaError};
use crate::noma::{
    allocate_powers, cluster_feasibility, noma_sinr, oma_rate, sort_descending, AllocationRule,
    ClusterSpec, Member, UserId,
};

/// The users served by one base station in one scheduling decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserPool {
    users: Vec<Member>,
}

impl UserPool {
    pub fn new(users: Vec<Member>) -> Result<Self, ClusteringError> {
        if users.is_empty() {
            return Err(ClusteringError::EmptyPool);
        }
        let mut seen = HashSet::with_capacity(users.len());
        for u in &users {
            if !seen.insert(u.id) {
                return Err(ClusteringError::DuplicateUser(u.id.0));
            }
        }
        Ok(Self { users })
    }

    pub fn from_sinrs(sinrs: &[f64]) -> Result<Self, ClusteringError> {
        let users = sinrs
            .iter()
            .enumerate()
            .map(|(k, &s)| Member::new(k as u32, s))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(users)
    }

    pub fn users(&self) -> &[Member] {
        &self.users
    }

    pub fn len(&self) -> usize {
        self.users.len()
    }

    pub fn is_empty(&self) -> bool {
        self.users.is_empty()
    }
}

/// `N / G` clusters of `G` users, each sorted by descending SINR.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterLayout {
    cluster_size: usize,
    clusters: Vec<Vec<Member>>,
}

impl ClusterLayout {
    pub fn cluster_size(&self) -> usize {
        self.cluster_size
    }

    pub fn clusters(&self) -> &[Vec<Member>] {
        &self.clusters
    }

    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    pub fn user_count(&self) -> usize {
        self.clusters.len() * self.cluster_size
    }

    /// Cluster ids in layout order.
    pub fn ids(&self) -> Vec<Vec<u32>> {
        self.clusters
            .iter()
            .map(|c| c.iter().map(|m| m.id.0).collect())
            .collect()
    }

    pub fn specs(&self, beta: f64) -> Result<Vec<ClusterSpec>, NomaError> {
        self.clusters
            .iter()
            .map(|c| ClusterSpec::new(c.clone(), beta))
            .collect()
    }
}

/// Sorts users by SINR, fills an `(N/G) x G` grid column by column, flips the
/// second half of the columns upside down and takes each row as a cluster.
///
/// The flip pairs the strongest remaining users with the weakest ones.
pub fn layout_clusters(
    users: &[Member],
    cluster_size: usize,
) -> Result<ClusterLayout, ClusteringError> {
    if users.is_empty() {
        return Err(ClusteringError::EmptyPool);
    }
    if !cluster_size.is_power_of_two() {
        return Err(ClusteringError::UnsupportedClusterSize(cluster_size));
    }
    if !users.len().is_multiple_of(cluster_size) {
        return Err(ClusteringError::Indivisible {
            users: users.len(),
            cluster_size,
        });
    }
    let mut sorted = users.to_vec();
    sort_descending(&mut sorted);

    let rows = users.len() / cluster_size;
    let first_flipped = cluster_size - cluster_size / 2;
    let clusters = (0..rows)
        .map(|r| {
            let mut row: Vec<Member> = (0..cluster_size)
                .map(|c| {
                    let r = if c >= first_flipped { rows - 1 - r } else { r };
                    sorted[c * rows + r]
                })
                .collect();
            sort_descending(&mut row);
            row
        })
        .collect();
    Ok(ClusterLayout {
        cluster_size,
        clusters,
    })
}

pub fn layout_pool(pool: &UserPool, cluster_size: usize) -> Result<ClusterLayout, ClusteringError> {
    layout_clusters(&pool.users, cluster_size)
}

/// Halves a cluster by re-running the layout on its members with size `G/2`.
pub fn split_cluster(cluster: &ClusterSpec) -> Result<(ClusterSpec, ClusterSpec), ClusteringError> {
    let size = cluster.size();
    if !size.is_multiple_of(2) {
        return Err(ClusteringError::OddSplit(size));
    }
    let layout = layout_clusters(cluster.members(), size / 2)?;
    let mut halves = layout.clusters.into_iter();
    let (Some(a), Some(b)) = (halves.next(), halves.next()) else {
        unreachable!("a layout of 2 * (G/2) users has exactly two rows")
    };
    Ok((
        ClusterSpec::new(a, cluster.beta())?,
        ClusterSpec::new(b, cluster.beta())?,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Noma,
    Oma,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserDecision {
    pub user: UserId,
    pub sinr: f64,
    pub mode: Mode,
    /// Index of the original cluster in the layout.
    pub cluster: usize,
    /// Index of the effective group (NOMA group or lone OMA user).
    pub group: usize,
    pub group_size: usize,
    /// Share of the original cluster's resource held by the effective group.
    pub resource_fraction: f64,
    pub alpha: Option<f64>,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchedulingOutcome {
    pub cluster_size: usize,
    pub beta: f64,
    pub decisions: Vec<UserDecision>,
    /// Pair evaluations performed by the feasibility gate.
    pub feasibility_checks: usize,
    /// Gate-passing groups whose minimum powers overran the budget.
    pub allocation_failures: usize,
    groups: usize,
}

impl SchedulingOutcome {
    fn new(cluster_size: usize, beta: f64) -> Self {
        Self {
            cluster_size,
            beta,
            decisions: Vec::new(),
            feasibility_checks: 0,
            allocation_failures: 0,
            groups: 0,
        }
    }

    pub fn group_count(&self) -> usize {
        self.groups
    }

    pub fn noma_users(&self) -> usize {
        self.decisions
            .iter()
            .filter(|d| d.mode == Mode::Noma)
            .count()
    }

    fn push_oma(&mut self, cluster: usize, member: &Member) {
        let g = self.cluster_size;
        self.decisions.push(UserDecision {
            user: member.id,
            sinr: member.sinr.value(),
            mode: Mode::Oma,
            cluster,
            group: self.groups,
            group_size: 1,
            resource_fraction: 1.0 / g as f64,
            alpha: None,
            rate: oma_rate(member.sinr, g),
        });
        self.groups += 1;
    }

    /// Schedules the group in NOMA if it passes the gate and its powers fit.
    fn try_push_noma(
        &mut self,
        cluster: usize,
        spec: &ClusterSpec,
        fraction: f64,
        rule: AllocationRule,
        gated: bool,
    ) -> Result<bool, NomaError> {
        if spec.size() < 2 {
            return Ok(false);
        }
        if gated {
            let report = cluster_feasibility(spec);
            self.feasibility_checks += report.checks();
            if !report.cluster_pass {
                return Ok(false);
            }
        }
        let alloc = match allocate_powers(spec, rule) {
            Ok(a) => a,
            Err(NomaError::PowerBudgetExceeded { .. }) => {
                self.allocation_failures += 1;
                return Ok(false);
            }
            Err(e) => return Err(e),
        };
        for (k, m) in spec.members().iter().enumerate() {
            let sinr = noma_sinr(spec, &alloc, k + 1)?;
            self.decisions.push(UserDecision {
                user: m.id,
                sinr: m.sinr.value(),
                mode: Mode::Noma,
                cluster,
                group: self.groups,
                group_size: spec.size(),
                resource_fraction: fraction,
                alpha: Some(alloc.alphas()[k]),
                rate: fraction * (1.0 + sinr.value()).log2(),
            });
        }
        self.groups += 1;
        Ok(true)
    }
}

/// Scheduling parameters shared by every policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scheduler {
    pub beta: f64,
    pub rule: AllocationRule,
}

impl Scheduler {
    pub fn new(beta: f64) -> Self {
        Self {
            beta,
            rule: AllocationRule::default(),
        }
    }

    pub fn with_rule(mut self, rule: AllocationRule) -> Self {
        self.rule = rule;
        self
    }

    /// Every user served orthogonally with `1/G` of its cluster's resource.
    pub fn oma(&self, layout: &ClusterLayout) -> Result<SchedulingOutcome, ClusteringError> {
        let mut out = SchedulingOutcome::new(layout.cluster_size, self.beta);
        for (r, members) in layout.clusters.iter().enumerate() {
            for m in members {
                out.push_oma(r, m);
            }
        }
        Ok(out)
    }

    /// All-or-nothing: NOMA for the whole cluster when every pair passes,
    /// otherwise OMA for all of its users.
    pub fn mup(&self, layout: &ClusterLayout) -> Result<SchedulingOutcome, ClusteringError> {
        let mut out = SchedulingOutcome::new(layout.cluster_size, self.beta);
        for (r, spec) in layout.specs(self.beta)?.iter().enumerate() {
            if !out.try_push_noma(r, spec, 1.0, self.rule, true)? {
                for m in spec.members() {
                    out.push_oma(r, m);
                }
            }
        }
        Ok(out)
    }

    /// Halves failing clusters until a passing size is found; lone users fall
    /// back to OMA.
    pub fn amup(&self, layout: &ClusterLayout) -> Result<SchedulingOutcome, ClusteringError> {
        let mut out = SchedulingOutcome::new(layout.cluster_size, self.beta);
        for (r, spec) in layout.specs(self.beta)?.into_iter().enumerate() {
            self.amup_group(&mut out, r, spec, 1.0)?;
        }
        Ok(out)
    }

    fn amup_group(
        &self,
        out: &mut SchedulingOutcome,
        cluster: usize,
        spec: ClusterSpec,
        fraction: f64,
    ) -> Result<(), ClusteringError> {
        if spec.size() == 1 {
            out.push_oma(cluster, &spec.members()[0]);
            return Ok(());
        }
        if out.try_push_noma(cluster, &spec, fraction, self.rule, true)? {
            return Ok(());
        }
        let (a, b) = split_cluster(&spec)?;
        self.amup_group(out, cluster, a, fraction / 2.0)?;
        self.amup_group(out, cluster, b, fraction / 2.0)
    }

    /// NOMA for every cluster with no feasibility gate (conventional near-far
    /// pairing when the layout has `G = 2`). Clusters whose minimum powers
    /// overrun the budget are counted and served in OMA.
    pub fn ungated(&self, layout: &ClusterLayout) -> Result<SchedulingOutcome, ClusteringError> {
        let mut out = SchedulingOutcome::new(layout.cluster_size, self.beta);
        for (r, spec) in layout.specs(self.beta)?.iter().enumerate() {
            if !out.try_push_noma(r, spec, 1.0, self.rule, false)? {
                for m in spec.members() {
                    out.push_oma(r, m);
                }
            }
        }
        Ok(out)
    }
}

pub fn run_mup(layout: &ClusterLayout, beta: f64) -> Result<SchedulingOutcome, ClusteringError> {
    Scheduler::new(beta).mup(layout)
}

pub fn run_amup(layout: &ClusterLayout, beta: f64) -> Result<SchedulingOutcome, ClusteringError> {
    Scheduler::new(beta).amup(layout)
}

/// How per-user rates are folded into a single cell figure.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CseNormalization {
    /// `G * sum(R_i) / N`: throughput per resource unit when the `N/G`
    /// clusters take turns on the full band. OMA is then independent of `G`.
    #[default]
    PerResource,
    /// `sum(R_i) / N`: plain mean of the normalised per-user rates.
    PerUser,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateSummary {
    pub rates: Vec<(UserId, f64)>,
    pub cluster_size: usize,
    /// `sum(R_i) / N`.
    pub mean_user_rate: f64,
}

impl RateSummary {
    pub fn cell_spectral_efficiency(&self, normalization: CseNormalization) -> f64 {
        match normalization {
            CseNormalization::PerUser => self.mean_user_rate,
            CseNormalization::PerResource => self.mean_user_rate * self.cluster_size as f64,
        }
    }
}

pub fn evaluate_rates(outcome: &SchedulingOutcome) -> RateSummary {
    let rates: Vec<(UserId, f64)> = outcome.decisions.iter().map(|d| (d.user, d.rate)).collect();
    let total: f64 = rates.iter().map(|(_, r)| r).sum();
    let mean_user_rate = if rates.is_empty() {
        0.0
    } else {
        total / rates.len() as f64
    };
    RateSummary {
        rates,
        cluster_size: outcome.cluster_size,
        mean_user_rate,
    }
}
