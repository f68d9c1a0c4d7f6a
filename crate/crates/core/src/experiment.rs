//! Experiment orchestration: policy sweeps over cluster size and SIC
//! imperfection, baselines, metric aggregation and output files.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::clustering::{
    evaluate_rates, layout_pool, ClusterLayout, CseNormalization, Scheduler, SchedulingOutcome,
    UserPool,
};
use crate::error::{ClusteringError, ExperimentError};
use crate::exec::Execution;
use crate::network::{drop_pools, generate_drop, RadioConfig};
use crate::noma::{check_beta, AllocationRule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Policy {
    #[serde(rename = "oma")]
    Oma,
    #[serde(rename = "mup")]
    Mup,
    #[serde(rename = "amup")]
    Amup,
    /// Every near-far pair in NOMA, no gate.
    #[serde(rename = "near_far")]
    NearFar,
    /// Gated two-user pairing with OMA fallback. An approximation of adaptive
    /// user pairing, not a reproduction of it.
    #[serde(rename = "aup2-approx")]
    Aup2,
}

impl Policy {
    pub const ALL: [Policy; 5] = [
        Policy::Oma,
        Policy::Mup,
        Policy::Amup,
        Policy::NearFar,
        Policy::Aup2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Policy::Oma => "oma",
            Policy::Mup => "mup",
            Policy::Amup => "amup",
            Policy::NearFar => "near_far",
            Policy::Aup2 => "aup2-approx",
        }
    }

    /// Baselines always pair two users, whatever the swept cluster size.
    pub fn effective_cluster_size(self, g: usize) -> usize {
        match self {
            Policy::NearFar | Policy::Aup2 => 2,
            _ => g,
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Policy {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "oma" => Ok(Policy::Oma),
            "mup" => Ok(Policy::Mup),
            "amup" => Ok(Policy::Amup),
            "near_far" | "nearfar" => Ok(Policy::NearFar),
            "aup2" | "aup2_approx" | "aup" => Ok(Policy::Aup2),
            _ => Err(ExperimentError::UnknownPolicy(s.to_string())),
        }
    }
}

/// Runs one policy on one user pool.
pub fn schedule(
    policy: Policy,
    pool: &UserPool,
    g: usize,
    scheduler: &Scheduler,
) -> Result<SchedulingOutcome, ClusteringError> {
    let layout = layout_pool(pool, policy.effective_cluster_size(g))?;
    schedule_layout(policy, &layout, scheduler)
}

fn schedule_layout(
    policy: Policy,
    layout: &ClusterLayout,
    scheduler: &Scheduler,
) -> Result<SchedulingOutcome, ClusteringError> {
    match policy {
        Policy::Oma => scheduler.oma(layout),
        Policy::Mup | Policy::Aup2 => scheduler.mup(layout),
        Policy::Amup => scheduler.amup(layout),
        Policy::NearFar => scheduler.ungated(layout),
    }
}

/// Conventional near-far pairing: the two-user layout with every pair in NOMA.
pub fn baseline_near_far(
    layout: &ClusterLayout,
    beta: f64,
    rule: AllocationRule,
) -> Result<SchedulingOutcome, ClusteringError> {
    if layout.cluster_size() != 2 {
        return Err(ClusteringError::UnsupportedClusterSize(
            layout.cluster_size(),
        ));
    }
    Scheduler::new(beta).with_rule(rule).ungated(layout)
}

/// Gated two-user pairing (MUP at `G = 2`).
pub fn baseline_aup2(
    pool: &UserPool,
    beta: f64,
    rule: AllocationRule,
) -> Result<SchedulingOutcome, ClusteringError> {
    Scheduler::new(beta)
        .with_rule(rule)
        .mup(&layout_pool(pool, 2)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub radio: RadioConfig,
    pub policies: Vec<Policy>,
    pub g_values: Vec<usize>,
    pub beta_values: Vec<f64>,
    pub drops: u64,
    #[serde(default)]
    pub allocation_rule: AllocationRule,
    #[serde(default)]
    pub normalization: CseNormalization,
    /// Drops whose per-link gains are dumped to `gains_drop<k>.csv`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub gain_dump_drops: Vec<u64>,
    #[serde(default, skip_serializing)]
    pub output_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            radio: RadioConfig::urban_macro(),
            policies: Policy::ALL.to_vec(),
            g_values: vec![2, 4, 8, 16, 32],
            beta_values: vec![0.0],
            drops: 50,
            allocation_rule: AllocationRule::default(),
            normalization: CseNormalization::default(),
            gain_dump_drops: Vec::new(),
            output_dir: None,
        }
    }
}

fn merge(base: &mut Value, overrides: Value) {
    match (base, overrides) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                merge(b.entry(k).or_insert(Value::Null), v);
            }
        }
        (b, o) => *b = o,
    }
}

impl ExperimentConfig {
    /// Parses a config; `radio` keys are applied on top of the bundled profile,
    /// so a file only needs to list what it changes.
    pub fn from_json_str(text: &str) -> Result<Self, ExperimentError> {
        let mut doc: Value = serde_json::from_str(text)?;
        let mut radio = serde_json::to_value(RadioConfig::urban_macro())?;
        if let Some(overrides) = doc.get_mut("radio").map(Value::take) {
            merge(&mut radio, overrides);
        }
        doc["radio"] = radio;
        Ok(serde_json::from_value(doc)?)
    }

    pub fn from_json_file(path: &Path) -> Result<Self, ExperimentError> {
        Self::from_json_str(&fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        self.radio.validate()?;
        let bad = |m: String| Err(ExperimentError::InvalidConfig(m));
        let n = self.radio.users_per_bs;
        if self.drops == 0 {
            return bad("drops must be at least 1".into());
        }
        if !self.policies.is_empty() && (self.g_values.is_empty() || self.beta_values.is_empty()) {
            return bad("g_values and beta_values must be non-empty".into());
        }
        for &g in &self.g_values {
            if !g.is_power_of_two() || !n.is_multiple_of(g) {
                return bad(format!(
                    "cluster size {g} must be a power of two dividing users_per_bs = {n}"
                ));
            }
        }
        if self
            .policies
            .iter()
            .any(|p| matches!(p, Policy::NearFar | Policy::Aup2))
            && !n.is_multiple_of(2)
        {
            return bad("pairing baselines need an even users_per_bs".into());
        }
        for &b in &self.beta_values {
            if check_beta(b).is_err() {
                return bad(format!("beta {b} is outside [0, 1]"));
            }
        }
        Ok(())
    }
}

/// Cell spectral efficiency of one measured cell under one setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSample {
    pub policy: Policy,
    pub g: usize,
    pub beta: f64,
    pub drop: u64,
    pub bs: usize,
    pub cse: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CdfPoint {
    pub value: f64,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub policy: Policy,
    pub g: usize,
    pub beta: f64,
    pub mean_cse: f64,
    pub cdf: Vec<CdfPoint>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunDiagnostics {
    pub drops: u64,
    pub cells_measured: usize,
    pub cells_skipped: usize,
    pub regenerations: u64,
    pub feasibility_checks: u64,
    pub allocation_failures: u64,
}

impl RunDiagnostics {
    fn absorb(&mut self, other: &RunDiagnostics) {
        self.drops += other.drops;
        self.cells_measured += other.cells_measured;
        self.cells_skipped += other.cells_skipped;
        self.regenerations += other.regenerations;
        self.feasibility_checks += other.feasibility_checks;
        self.allocation_failures += other.allocation_failures;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsTable {
    pub rows: Vec<CellSample>,
    pub aggregates: Vec<Aggregate>,
    pub diagnostics: RunDiagnostics,
}

type GroupKey = (Policy, usize, u64);

/// Per (policy, G): CSE values for each beta, in sorted beta order.
type BetaSeries = Vec<(f64, Vec<f64>)>;

fn group_key(s: &CellSample) -> GroupKey {
    (s.policy, s.g, s.beta.to_bits())
}

impl MetricsTable {
    /// Sorts samples canonically and folds them into means and CDFs. The result
    /// does not depend on the order in which samples arrive.
    pub fn from_rows(mut rows: Vec<CellSample>, diagnostics: RunDiagnostics) -> Self {
        rows.sort_by(|a, b| {
            (a.policy, a.g)
                .cmp(&(b.policy, b.g))
                .then(a.beta.total_cmp(&b.beta))
                .then((a.drop, a.bs).cmp(&(b.drop, b.bs)))
        });
        let mut groups: BTreeMap<(Policy, usize), BetaSeries> = BTreeMap::new();
        let mut current: Option<GroupKey> = None;
        for s in &rows {
            let key = group_key(s);
            let bucket = groups.entry((s.policy, s.g)).or_default();
            if current != Some(key) {
                bucket.push((s.beta, Vec::new()));
                current = Some(key);
            }
            bucket.last_mut().expect("bucket just pushed").1.push(s.cse);
        }
        let aggregates = groups
            .into_iter()
            .flat_map(|((policy, g), betas)| {
                betas.into_iter().map(move |(beta, values)| {
                    let mean_cse = values.iter().sum::<f64>() / values.len() as f64;
                    Aggregate {
                        policy,
                        g,
                        beta,
                        mean_cse,
                        cdf: empirical_cdf(values),
                    }
                })
            })
            .collect();
        Self {
            rows,
            aggregates,
            diagnostics,
        }
    }

    pub fn aggregate(&self, policy: Policy, g: usize, beta: f64) -> Option<&Aggregate> {
        self.aggregates
            .iter()
            .find(|a| a.policy == policy && a.g == g && a.beta == beta)
    }

    pub fn mean(&self, policy: Policy, g: usize, beta: f64) -> Option<f64> {
        self.aggregate(policy, g, beta).map(|a| a.mean_cse)
    }

    /// Samples of one setting in `(drop, bs)` order.
    pub fn samples(&self, policy: Policy, g: usize, beta: f64) -> Vec<&CellSample> {
        self.rows
            .iter()
            .filter(|s| s.policy == policy && s.g == g && s.beta == beta)
            .collect()
    }
}

/// Sorted values paired with cumulative probabilities `k / n`.
pub fn empirical_cdf(mut values: Vec<f64>) -> Vec<CdfPoint> {
    values.sort_by(f64::total_cmp);
    let n = values.len() as f64;
    values
        .into_iter()
        .enumerate()
        .map(|(k, value)| CdfPoint {
            value,
            probability: (k + 1) as f64 / n,
        })
        .collect()
}

fn evaluate_drop(
    config: &ExperimentConfig,
    drop_index: u64,
) -> Result<(Vec<CellSample>, RunDiagnostics), ExperimentError> {
    let pools = drop_pools(&config.radio, drop_index)?;
    let mut diag = RunDiagnostics {
        drops: 1,
        cells_measured: pools.cells.len(),
        cells_skipped: pools.skipped_cells,
        regenerations: pools.regenerations as u64,
        ..Default::default()
    };
    let mut rows = Vec::new();
    for cell in &pools.cells {
        let mut layouts: BTreeMap<usize, ClusterLayout> = BTreeMap::new();
        for &policy in &config.policies {
            for &g in &config.g_values {
                let size = policy.effective_cluster_size(g);
                let layout = match layouts.entry(size) {
                    Entry::Occupied(e) => e.into_mut(),
                    Entry::Vacant(e) => e.insert(layout_pool(&cell.pool, size)?),
                };
                for &beta in &config.beta_values {
                    let scheduler = Scheduler::new(beta).with_rule(config.allocation_rule);
                    let outcome = schedule_layout(policy, layout, &scheduler)?;
                    diag.feasibility_checks += outcome.feasibility_checks as u64;
                    diag.allocation_failures += outcome.allocation_failures as u64;
                    rows.push(CellSample {
                        policy,
                        g,
                        beta,
                        drop: drop_index,
                        bs: cell.bs,
                        cse: evaluate_rates(&outcome)
                            .cell_spectral_efficiency(config.normalization),
                    });
                }
            }
        }
    }
    Ok((rows, diag))
}

/// Runs every (drop, policy, G, beta) combination and aggregates the results.
pub fn run_experiment(
    config: &ExperimentConfig,
    exec: Execution,
) -> Result<MetricsTable, ExperimentError> {
    config.validate()?;
    let per_drop = exec.map_range(0..config.drops, |d| evaluate_drop(config, d));
    let mut rows = Vec::new();
    let mut diagnostics = RunDiagnostics::default();
    for result in per_drop {
        let (r, d) = result?;
        rows.extend(r);
        diagnostics.absorb(&d);
    }
    Ok(MetricsTable::from_rows(rows, diagnostics))
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    seed: u64,
    noise_power_dbm: f64,
    config: &'a ExperimentConfig,
    diagnostics: &'a RunDiagnostics,
}

pub fn cdf_file_name(policy: Policy, g: usize, beta: f64) -> String {
    format!("cdf_{}_{}_{}.csv", policy.name(), g, beta)
}

/// Writes `summary.csv`, one `cdf_<policy>_<G>_<beta>.csv` per setting and
/// `manifest.json`. Returns the written paths.
pub fn emit_outputs(
    table: &MetricsTable,
    config: &ExperimentConfig,
    dir: &Path,
) -> Result<Vec<PathBuf>, ExperimentError> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    if !table.aggregates.is_empty() {
        let mut summary = String::from("policy,G,beta,mean_cse\n");
        for a in &table.aggregates {
            summary.push_str(&format!("{},{},{},{}\n", a.policy, a.g, a.beta, a.mean_cse));
            let mut cdf = String::from("value,cumulative_probability\n");
            for p in &a.cdf {
                cdf.push_str(&format!("{},{}\n", p.value, p.probability));
            }
            let path = dir.join(cdf_file_name(a.policy, a.g, a.beta));
            fs::write(&path, cdf)?;
            written.push(path);
        }
        let path = dir.join("summary.csv");
        fs::write(&path, summary)?;
        written.push(path);
    }
    let manifest = Manifest {
        tool: "noma-sim",
        version: env!("CARGO_PKG_VERSION"),
        seed: config.radio.seed,
        noise_power_dbm: config.radio.noise_power_dbm(),
        config,
        diagnostics: &table.diagnostics,
    };
    let path = dir.join("manifest.json");
    fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n")?;
    written.push(path);
    Ok(written)
}

/// Writes `gains_drop<k>.csv` for every drop listed in `gain_dump_drops`.
pub fn emit_gain_dumps(
    config: &ExperimentConfig,
    dir: &Path,
) -> Result<Vec<PathBuf>, ExperimentError> {
    fs::create_dir_all(dir)?;
    config
        .gain_dump_drops
        .iter()
        .map(|&d| {
            let deployment = generate_drop(&config.radio, d)?;
            let path = dir.join(format!("gains_drop{d}.csv"));
            let file = std::io::BufWriter::new(fs::File::create(&path)?);
            deployment.write_gain_dump(file)?;
            Ok(path)
        })
        .collect()
}
