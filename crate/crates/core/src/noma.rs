//! Rate model, power-allocation bounds and pairwise clustering criteria for a
//! single downlink NOMA cluster with imperfect successive interference
//! cancellation (SIC).
//!
//! Users inside a cluster are addressed by their 1-based *rank* in SIC order:
//! rank 1 is the strongest user (decoded last, no stronger-user interference
//! left), rank `G` is the weakest user (largest power share).
//!
//! Every function here is a pure function of its arguments.

use serde::{Deserialize, Serialize};

use crate::error::NomaError;

/// Below this SINR the power factor switches to its series expansion.
pub const SMALL_SINR: f64 = 1e-6;

/// A strictly positive, finite linear SINR.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct LinearSinr(f64);

impl LinearSinr {
    pub fn new(value: f64) -> Result<Self, NomaError> {
        if value.is_finite() && value > 0.0 {
            Ok(Self(value))
        } else {
            Err(NomaError::InvalidSinr(value))
        }
    }

    pub fn from_db(db: f64) -> Result<Self, NomaError> {
        Self::new(10f64.powf(db / 10.0))
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    pub fn db(self) -> f64 {
        10.0 * self.0.log10()
    }
}

impl TryFrom<f64> for LinearSinr {
    type Error = NomaError;

    fn try_from(value: f64) -> Result<Self, Self::Error> {
        Self::new(value)
    }
}

impl From<LinearSinr> for f64 {
    fn from(s: LinearSinr) -> f64 {
        s.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct UserId(pub u32);

/// A user together with its OMA SINR toward the serving base station.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Member {
    pub id: UserId,
    pub sinr: LinearSinr,
}

impl Member {
    pub fn new(id: u32, sinr: f64) -> Result<Self, NomaError> {
        Ok(Self {
            id: UserId(id),
            sinr: LinearSinr::new(sinr)?,
        })
    }
}

/// Descending SINR, ties broken by ascending user id.
pub(crate) fn sort_descending(members: &mut [Member]) {
    members.sort_by(|a, b| {
        b.sinr
            .value()
            .total_cmp(&a.sinr.value())
            .then(a.id.cmp(&b.id))
    });
}

pub(crate) fn check_beta(beta: f64) -> Result<f64, NomaError> {
    if (0.0..=1.0).contains(&beta) {
        Ok(beta)
    } else {
        Err(NomaError::InvalidBeta(beta))
    }
}

/// An ordered group of co-scheduled users sharing one resource.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSpec {
    members: Vec<Member>,
    beta: f64,
}

impl ClusterSpec {
    /// Builds a cluster from members already in SIC order (non-increasing SINR).
    pub fn new(members: Vec<Member>, beta: f64) -> Result<Self, NomaError> {
        if members.is_empty() {
            return Err(NomaError::EmptyCluster);
        }
        check_beta(beta)?;
        for (k, w) in members.windows(2).enumerate() {
            if w[1].sinr.value() > w[0].sinr.value() {
                return Err(NomaError::Unsorted {
                    rank: k + 2,
                    previous: k + 1,
                });
            }
        }
        Ok(Self { members, beta })
    }

    /// Builds a cluster, sorting the members into SIC order first.
    pub fn sorted(mut members: Vec<Member>, beta: f64) -> Result<Self, NomaError> {
        sort_descending(&mut members);
        Self::new(members, beta)
    }

    pub fn from_sinrs(sinrs: &[f64], beta: f64) -> Result<Self, NomaError> {
        let members = sinrs
            .iter()
            .enumerate()
            .map(|(k, &s)| Member::new(k as u32, s))
            .collect::<Result<Vec<_>, _>>()?;
        Self::sorted(members, beta)
    }

    #[inline]
    pub fn size(&self) -> usize {
        self.members.len()
    }

    #[inline]
    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn members(&self) -> &[Member] {
        &self.members
    }

    pub fn into_members(self) -> Vec<Member> {
        self.members
    }

    pub fn sinr(&self, rank: usize) -> Result<LinearSinr, NomaError> {
        self.check_rank(rank)?;
        Ok(self.members[rank - 1].sinr)
    }

    pub fn with_beta(&self, beta: f64) -> Result<Self, NomaError> {
        Ok(Self {
            members: self.members.clone(),
            beta: check_beta(beta)?,
        })
    }

    fn check_rank(&self, rank: usize) -> Result<(), NomaError> {
        if rank == 0 || rank > self.size() {
            Err(NomaError::RankOutOfRange {
                rank,
                size: self.size(),
            })
        } else {
            Ok(())
        }
    }
}

/// Per-user fractions of the base station's transmit power, indexed by rank.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerAllocation {
    alphas: Vec<f64>,
    pre_sharing_sum: f64,
}

impl PowerAllocation {
    /// Wraps explicit fractions, e.g. to evaluate a hand-picked allocation.
    pub fn from_alphas(alphas: Vec<f64>) -> Self {
        let pre_sharing_sum = alphas.iter().sum();
        Self {
            alphas,
            pre_sharing_sum,
        }
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn alpha(&self, rank: usize) -> Option<f64> {
        rank.checked_sub(1)
            .and_then(|k| self.alphas.get(k))
            .copied()
    }

    pub fn total(&self) -> f64 {
        self.alphas.iter().sum()
    }

    /// Sum of the minimum fractions before the leftover power was shared out.
    pub fn pre_sharing_sum(&self) -> f64 {
        self.pre_sharing_sum
    }

    /// `alpha_G > ... > alpha_1`.
    pub fn is_strictly_ordered(&self) -> bool {
        self.alphas.windows(2).all(|w| w[1] > w[0])
    }
}

/// Which SIC imperfection the allocator plans for.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AllocationRule {
    /// Minimum fractions computed as if SIC were perfect (beta = 0), as in the
    /// reference pseudo-code.
    #[default]
    PerfectSic,
    /// Minimum fractions computed with the cluster's own beta.
    ClusterBeta,
}

/// Normalised OMA rate `(1/G) log2(1 + gamma)` in bits/s/Hz.
pub fn oma_rate(gamma: LinearSinr, cluster_size: usize) -> f64 {
    assert!(cluster_size >= 1, "cluster size must be at least 1");
    (1.0 + gamma.value()).log2() / cluster_size as f64
}

/// SINR of the user at `rank` after SIC with residual fraction `beta`.
pub fn noma_sinr(
    cluster: &ClusterSpec,
    alloc: &PowerAllocation,
    rank: usize,
) -> Result<LinearSinr, NomaError> {
    cluster.check_rank(rank)?;
    if alloc.alphas.len() != cluster.size() {
        return Err(NomaError::AllocationMismatch {
            alphas: alloc.alphas.len(),
            size: cluster.size(),
        });
    }
    let gamma = cluster.members[rank - 1].sinr.value();
    let stronger: f64 = alloc.alphas[..rank - 1].iter().sum();
    let weaker: f64 = alloc.alphas[rank..].iter().sum();
    let own = alloc.alphas[rank - 1] * gamma;
    LinearSinr::new(own / (1.0 + stronger * gamma + cluster.beta * weaker * gamma))
}

/// Achieved NOMA rate `log2(1 + sinr)` of the user at `rank`.
pub fn noma_rate(
    cluster: &ClusterSpec,
    alloc: &PowerAllocation,
    rank: usize,
) -> Result<f64, NomaError> {
    noma_sinr(cluster, alloc, rank).map(|s| (1.0 + s.value()).log2())
}

/// `((1+g)^(1/G) - 1) / (g (1+g)^(1/G))`: the per-unit power a user needs for
/// its NOMA rate to match its `1/G` OMA share.
///
/// Tends to `1/G` as `g -> 0`; below [`SMALL_SINR`] the two-term series is used.
pub fn power_factor(gamma: LinearSinr, cluster_size: usize) -> f64 {
    factor(gamma.value(), cluster_size as f64)
}

#[inline]
fn factor(gamma: f64, size: f64) -> f64 {
    if gamma < SMALL_SINR {
        (1.0 - (size + 1.0) / (2.0 * size) * gamma) / size
    } else {
        // 1 - (1+g)^(-1/G), written to stay accurate for small g
        -(-gamma.ln_1p() / size).exp_m1() / gamma
    }
}

fn check_size(size: usize) -> Result<f64, NomaError> {
    if size == 0 {
        Err(NomaError::EmptyCluster)
    } else {
        Ok(size as f64)
    }
}

#[inline]
fn sufficient_bound(gamma: f64, size: f64, beta: f64, tail_sum: f64) -> f64 {
    (1.0 + (1.0 + (beta - 1.0) * tail_sum) * gamma) * factor(gamma, size)
}

/// Minimum power fraction for a user whose weaker users already hold
/// `tail_sum`, such that its NOMA rate exceeds its OMA rate once the whole
/// budget is in use. The caller treats the value as a strict lower bound.
pub fn alpha_lower_bound(
    gamma: LinearSinr,
    cluster_size: usize,
    beta: f64,
    tail_sum: f64,
) -> Result<f64, NomaError> {
    let size = check_size(cluster_size)?;
    check_beta(beta)?;
    if !(0.0..1.0).contains(&tail_sum) {
        return Err(NomaError::TailSumOutOfRange(tail_sum));
    }
    Ok(sufficient_bound(gamma.value(), size, beta, tail_sum))
}

/// Tighter bound that only depends on the user's own SINR, obtained by
/// replacing the tail sum with `(G - rank) * alpha` (valid under the NOMA power
/// ordering).
pub fn alpha_lower_bound_strict(
    gamma: LinearSinr,
    cluster_size: usize,
    rank: usize,
    beta: f64,
) -> Result<f64, NomaError> {
    let size = check_size(cluster_size)?;
    check_beta(beta)?;
    if rank == 0 || rank > cluster_size {
        return Err(NomaError::RankOutOfRange {
            rank,
            size: cluster_size,
        });
    }
    let g = gamma.value();
    let f = factor(g, size);
    let weaker = (cluster_size - rank) as f64;
    let denom = 1.0 - (beta - 1.0) * weaker * g * f;
    assert!(denom > 0.0, "strict bound denominator must stay positive");
    Ok((1.0 + g) * f / denom)
}

/// The `D`, `E_i`, `E_{i-1}` terms for the adjacent pair `(rank-1, rank)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairTerms {
    pub d: f64,
    pub e_curr: f64,
    pub e_prev: f64,
}

impl PairTerms {
    fn compute(prev: f64, curr: f64, size: usize, rank: usize) -> Self {
        let g = size as f64;
        let f_prev = factor(prev, g);
        let f_curr = factor(curr, g);
        Self {
            d: (1.0 + prev) * f_prev / ((1.0 + curr) * f_curr),
            e_curr: (size - rank) as f64 * curr * f_curr,
            e_prev: (size - rank + 1) as f64 * prev * f_prev,
        }
    }

    fn zeta(&self) -> Option<f64> {
        let denom = self.e_prev - self.d * self.e_curr;
        (denom > 0.0).then(|| (1.0 - self.d) / denom + 1.0)
    }

    fn ordering_holds(&self, beta: f64) -> bool {
        1.0 - (beta - 1.0) * self.e_prev > self.d * (1.0 - (beta - 1.0) * self.e_curr)
    }

    fn msd(&self, prev: f64, curr: f64, size: usize, rank: usize) -> f64 {
        let f_prev = factor(prev, size as f64);
        (self.d * self.e_curr + self.d - 1.0) / ((size - rank + 1) as f64 * f_prev) - curr
    }
}

fn check_pair(size: usize, rank: usize) -> Result<(), NomaError> {
    if rank < 2 || rank > size {
        Err(NomaError::PairRankOutOfRange { rank, size })
    } else {
        Ok(())
    }
}

pub fn pair_terms(
    prev: LinearSinr,
    curr: LinearSinr,
    cluster_size: usize,
    rank: usize,
) -> Result<PairTerms, NomaError> {
    check_pair(cluster_size, rank)?;
    Ok(PairTerms::compute(
        prev.value(),
        curr.value(),
        cluster_size,
        rank,
    ))
}

/// Largest SIC imperfection under which the strict power bounds of the pair
/// stay ordered. `None` when the closed form's denominator is not positive;
/// use [`beta_ordering_holds`] in that case.
pub fn zeta_bound(
    prev: LinearSinr,
    curr: LinearSinr,
    cluster_size: usize,
    rank: usize,
) -> Result<Option<f64>, NomaError> {
    pair_terms(prev, curr, cluster_size, rank).map(|t| t.zeta())
}

/// Evaluates `1 - (beta-1) E_{i-1} > D [1 - (beta-1) E_i]` directly.
///
/// Equivalent to `beta < zeta` wherever zeta is defined, without the
/// sign-sensitive division.
pub fn beta_ordering_holds(
    prev: LinearSinr,
    curr: LinearSinr,
    cluster_size: usize,
    rank: usize,
    beta: f64,
) -> Result<bool, NomaError> {
    check_beta(beta)?;
    pair_terms(prev, curr, cluster_size, rank).map(|t| t.ordering_holds(beta))
}

/// Minimum SINR difference the pair must exceed. May be negative.
pub fn msd_threshold(
    prev: LinearSinr,
    curr: LinearSinr,
    cluster_size: usize,
    rank: usize,
) -> Result<f64, NomaError> {
    let t = pair_terms(prev, curr, cluster_size, rank)?;
    Ok(t.msd(prev.value(), curr.value(), cluster_size, rank))
}

/// Outcome of both criteria for one adjacent pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairCheck {
    /// Rank of the weaker user of the pair.
    pub rank: usize,
    pub sinr_gap: f64,
    pub msd_threshold: f64,
    pub zeta: Option<f64>,
    pub msd_pass: bool,
    pub beta_pass: bool,
    pub pair_pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub pairs: Vec<PairCheck>,
    pub cluster_pass: bool,
}

impl FeasibilityReport {
    /// Number of pair evaluations that produced this report.
    pub fn checks(&self) -> usize {
        self.pairs.len()
    }

    /// Tightest zeta across the cluster, `None` if any pair's zeta is undefined
    /// or the cluster has no pairs.
    pub fn binding_zeta(&self) -> Option<f64> {
        self.pairs
            .iter()
            .map(|p| p.zeta)
            .try_fold(f64::INFINITY, |acc, z| z.map(|z| acc.min(z)))
            .filter(|z| z.is_finite())
    }
}

/// Runs the MSD and SIC-imperfection checks over all `G - 1` adjacent pairs.
///
/// A cluster with a single user has no pairs and never passes.
pub fn cluster_feasibility(cluster: &ClusterSpec) -> FeasibilityReport {
    let size = cluster.size();
    let pairs: Vec<PairCheck> = (2..=size)
        .map(|rank| {
            let prev = cluster.members[rank - 2].sinr.value();
            let curr = cluster.members[rank - 1].sinr.value();
            let terms = PairTerms::compute(prev, curr, size, rank);
            let sinr_gap = prev - curr;
            let msd_threshold = terms.msd(prev, curr, size, rank);
            let msd_pass = sinr_gap > msd_threshold;
            let beta_pass = terms.ordering_holds(cluster.beta);
            PairCheck {
                rank,
                sinr_gap,
                msd_threshold,
                zeta: terms.zeta(),
                msd_pass,
                beta_pass,
                pair_pass: msd_pass && beta_pass,
            }
        })
        .collect();
    let cluster_pass = !pairs.is_empty() && pairs.iter().all(|p| p.pair_pass);
    FeasibilityReport {
        pairs,
        cluster_pass,
    }
}

/// Allocates each user its minimum fraction, weakest user first, then shares
/// the leftover power equally so the fractions sum to one.
///
/// Fails with [`NomaError::PowerBudgetExceeded`] when the minimum fractions
/// alone use up the budget.
pub fn allocate_powers(
    cluster: &ClusterSpec,
    rule: AllocationRule,
) -> Result<PowerAllocation, NomaError> {
    let size = cluster.size();
    if size == 1 {
        return Ok(PowerAllocation {
            alphas: vec![1.0],
            pre_sharing_sum: 1.0,
        });
    }
    let beta = match rule {
        AllocationRule::PerfectSic => 0.0,
        AllocationRule::ClusterBeta => cluster.beta,
    };
    let g = size as f64;
    let mut alphas = vec![0.0; size];
    let mut tail = 0.0;
    for k in (0..size).rev() {
        let a = sufficient_bound(cluster.members[k].sinr.value(), g, beta, tail);
        alphas[k] = a;
        tail += a;
    }
    if tail.is_nan() || tail >= 1.0 {
        return Err(NomaError::PowerBudgetExceeded { required: tail });
    }
    let share = (1.0 - tail) / g;
    for a in &mut alphas {
        *a += share;
    }
    Ok(PowerAllocation {
        alphas,
        pre_sharing_sum: tail,
    })
}
