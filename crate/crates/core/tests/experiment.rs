use std::fs;

use noma_cluster::experiment::{
    baseline_aup2, baseline_near_far, cdf_file_name, emit_outputs, run_experiment,
    ExperimentConfig, MetricsTable, Policy,
};
use noma_cluster::network::{drop_pools, RadioConfig};
use noma_cluster::{layout_pool, AllocationRule, CseNormalization, Execution, Mode, Scheduler};

fn small(
    policies: Vec<Policy>,
    g_values: Vec<usize>,
    beta_values: Vec<f64>,
    drops: u64,
) -> ExperimentConfig {
    ExperimentConfig {
        radio: RadioConfig {
            region_side_km: 1.0,
            users_per_bs: 16,
            ..RadioConfig::urban_macro()
        },
        policies,
        g_values,
        beta_values,
        drops,
        ..ExperimentConfig::default()
    }
}

#[test]
fn oma_cse_is_mean_oma_rate() {
    let mut config = small(vec![Policy::Oma], vec![2, 4, 8], vec![0.0], 1);
    config.normalization = CseNormalization::PerUser;
    let table = run_experiment(&config, Execution::Sequential).unwrap();
    let pools = drop_pools(&config.radio, 0).unwrap();
    for g in [2, 4, 8] {
        let samples = table.samples(Policy::Oma, g, 0.0);
        assert_eq!(samples.len(), pools.cells.len());
        for (s, cell) in samples.iter().zip(&pools.cells) {
            let users = cell.pool.users();
            let expected = users
                .iter()
                .map(|m| (1.0 + m.sinr.value()).log2() / g as f64)
                .sum::<f64>()
                / users.len() as f64;
            assert_eq!(s.bs, cell.bs);
            assert!((s.cse - expected).abs() <= 1e-12 * expected);
        }
    }
}

#[test]
fn oma_is_flat_in_g_per_resource() {
    let config = small(vec![Policy::Oma], vec![2, 4, 8, 16], vec![0.0], 3);
    let table = run_experiment(&config, Execution::Sequential).unwrap();
    let base = table.mean(Policy::Oma, 2, 0.0).unwrap();
    for g in [4, 8, 16] {
        let m = table.mean(Policy::Oma, g, 0.0).unwrap();
        assert!((m - base).abs() <= 1e-12 * base);
    }
}

#[test]
fn mup_dominates_near_far_per_cell_at_perfect_sic() {
    let config = small(vec![Policy::Mup, Policy::NearFar], vec![2], vec![0.0], 5);
    let table = run_experiment(&config, Execution::Parallel).unwrap();
    let mup = table.samples(Policy::Mup, 2, 0.0);
    let nf = table.samples(Policy::NearFar, 2, 0.0);
    assert_eq!(mup.len(), nf.len());
    for (m, n) in mup.iter().zip(&nf) {
        assert_eq!((m.drop, m.bs), (n.drop, n.bs));
        assert!(m.cse >= n.cse * (1.0 - 1e-12));
    }
}

#[test]
fn baselines_ignore_swept_cluster_size() {
    let config = small(
        vec![Policy::NearFar, Policy::Aup2],
        vec![2, 8, 16],
        vec![0.0],
        2,
    );
    let table = run_experiment(&config, Execution::Sequential).unwrap();
    for p in [Policy::NearFar, Policy::Aup2] {
        let m2 = table.mean(p, 2, 0.0).unwrap();
        assert_eq!(table.mean(p, 8, 0.0).unwrap(), m2);
        assert_eq!(table.mean(p, 16, 0.0).unwrap(), m2);
    }
}

#[test]
fn baselines_on_one_pool() {
    let radio = RadioConfig::urban_macro();
    let pool = drop_pools(&radio, 0).unwrap().cells.remove(0).pool;
    let layout = layout_pool(&pool, 2).unwrap();
    let rule = AllocationRule::PerfectSic;

    let mup = Scheduler::new(0.0).mup(&layout).unwrap();
    let aup = baseline_aup2(&pool, 0.0, rule).unwrap();
    assert_eq!(mup, aup);

    // at large beta the ungated baseline keeps NOMA where the gate would not
    let nf = baseline_near_far(&layout, 0.9, rule).unwrap();
    let gated = baseline_aup2(&pool, 0.9, rule).unwrap();
    assert!(nf.noma_users() >= gated.noma_users());
    assert_eq!(nf.feasibility_checks, 0);
    let below_oma = nf
        .decisions
        .iter()
        .filter(|d| d.mode == Mode::Noma && d.rate < (1.0 + d.sinr).log2() / 2.0)
        .count();
    assert!(below_oma > 0);
    for d in gated.decisions.iter().filter(|d| d.mode == Mode::Oma) {
        assert_eq!(d.rate, (1.0 + d.sinr).log2() / 2.0);
    }
}

#[test]
fn parallel_and_sequential_agree() {
    let config = small(Policy::ALL.to_vec(), vec![2, 4], vec![0.0, 0.05], 4);
    let a = run_experiment(&config, Execution::Parallel).unwrap();
    let b = run_experiment(&config, Execution::Sequential).unwrap();
    assert_eq!(a, b);
}

#[test]
fn invalid_config_is_rejected_before_running() {
    let config = small(vec![Policy::Mup], vec![32], vec![0.0], 1);
    assert!(run_experiment(&config, Execution::Sequential).is_err());
    let config = small(vec![Policy::Mup], vec![4], vec![-0.1], 1);
    assert!(run_experiment(&config, Execution::Sequential).is_err());
}

#[test]
fn outputs_have_documented_shape() {
    let config = small(vec![Policy::Amup], vec![4], vec![0.01], 10);
    let table = run_experiment(&config, Execution::Parallel).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let files = emit_outputs(&table, &config, dir.path()).unwrap();
    assert_eq!(files.len(), 3);

    let summary = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    let mut lines = summary.lines();
    assert_eq!(lines.next(), Some("policy,G,beta,mean_cse"));
    assert!(lines.next().unwrap().starts_with("amup,4,0.01,"));
    assert!(lines.next().is_none());

    let cdf = fs::read_to_string(dir.path().join(cdf_file_name(Policy::Amup, 4, 0.01))).unwrap();
    let rows: Vec<&str> = cdf.lines().collect();
    assert_eq!(rows[0], "value,cumulative_probability");
    let n = table.diagnostics.cells_measured;
    assert_eq!(rows.len() - 1, n);
    assert!(rows.last().unwrap().ends_with(",1"));

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["seed"], config.radio.seed);
    assert_eq!(manifest["config"]["drops"], 10);
    assert!(manifest["config"].get("output_dir").is_none());
}

#[test]
fn cdf_probabilities_are_k_over_n() {
    let mut config = small(vec![Policy::Mup], vec![2], vec![0.0], 10);
    config.radio.region_side_km = 0.4;
    config.radio.bs_density_per_km2 = 10.0;
    config.radio.measurement_fraction = 1.0;
    config.radio.users_per_bs = 2;
    let table = run_experiment(&config, Execution::Sequential).unwrap();
    let per_drop: Vec<u64> = table.rows.iter().map(|r| r.drop).collect();
    let agg = table.aggregate(Policy::Mup, 2, 0.0).unwrap();
    assert_eq!(agg.cdf.len(), per_drop.len());
    for (k, p) in agg.cdf.iter().enumerate() {
        assert_eq!(p.probability, (k + 1) as f64 / per_drop.len() as f64);
    }
}

#[test]
fn empty_policy_list_writes_only_manifest() {
    let config = small(vec![], vec![], vec![], 1);
    let table = run_experiment(&config, Execution::Sequential).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let files = emit_outputs(&table, &config, dir.path()).unwrap();
    assert_eq!(files, vec![dir.path().join("manifest.json")]);
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
}

#[test]
fn aggregation_is_reproducible_from_rows() {
    let config = small(vec![Policy::Oma, Policy::Mup], vec![2], vec![0.0], 3);
    let table = run_experiment(&config, Execution::Parallel).unwrap();
    let mut shuffled = table.rows.clone();
    shuffled.reverse();
    assert_eq!(
        MetricsTable::from_rows(shuffled, table.diagnostics.clone()),
        table
    );
}
