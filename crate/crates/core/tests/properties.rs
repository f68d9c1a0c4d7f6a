use noma_cluster::noma::{alpha_lower_bound, beta_ordering_holds, zeta_bound};
use noma_cluster::verify::guarantee_violations;
use noma_cluster::{
    allocate_powers, cluster_feasibility, noma_rate, oma_rate, power_factor, AllocationRule,
    ClusterSpec, LinearSinr,
};
use proptest::prelude::*;

fn cluster(db: &[f64], beta: f64) -> ClusterSpec {
    let sinrs: Vec<f64> = db.iter().map(|d| 10f64.powf(d / 10.0)).collect();
    let mut sorted = sinrs;
    sorted.sort_by(|a, b| b.total_cmp(a));
    ClusterSpec::from_sinrs(&sorted, beta).unwrap()
}

fn sizes() -> impl Strategy<Value = usize> {
    prop_oneof![Just(2usize), Just(4), Just(8)]
}

fn db_cluster() -> impl Strategy<Value = Vec<f64>> {
    sizes().prop_flat_map(|g| prop::collection::vec(0.0f64..30.0, g))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn gated_clusters_beat_oma_with_perfect_sic(db in db_cluster()) {
        let c = cluster(&db, 0.0);
        prop_assume!(cluster_feasibility(&c).cluster_pass);
        prop_assert!(guarantee_violations(&c, AllocationRule::PerfectSic).is_empty());
    }

    #[test]
    fn gated_allocation_is_ordered_and_fits(db in db_cluster()) {
        let c = cluster(&db, 0.0);
        prop_assume!(cluster_feasibility(&c).cluster_pass);
        let a = allocate_powers(&c, AllocationRule::PerfectSic).unwrap();
        prop_assert!(a.pre_sharing_sum() < 1.0);
        prop_assert!((a.total() - 1.0).abs() < 1e-12);
        prop_assert!(a.is_strictly_ordered());
    }

    #[test]
    fn beta_aware_allocation_that_fits_beats_oma(db in db_cluster(), beta in 0.0f64..=1.0) {
        let c = cluster(&db, beta);
        if allocate_powers(&c, AllocationRule::ClusterBeta).is_ok() {
            prop_assert!(guarantee_violations(&c, AllocationRule::ClusterBeta).is_empty());
        }
    }

    #[test]
    fn zeta_agrees_with_direct_test(
        a in -10.0f64..40.0, gap in 0.0f64..30.0, lg in 1u32..=5, pick in 0.0f64..1.0, beta in 0.0f64..=1.0,
    ) {
        let g = 1usize << lg;
        let rank = 2 + ((g - 1) as f64 * pick) as usize % (g - 1);
        let prev = LinearSinr::from_db(a).unwrap();
        let curr = LinearSinr::from_db(a - gap).unwrap();
        let direct = beta_ordering_holds(prev, curr, g, rank, beta).unwrap();
        if let Some(z) = zeta_bound(prev, curr, g, rank).unwrap() {
            prop_assume!((beta - z).abs() > 1e-9);
            prop_assert_eq!(direct, beta < z);
        }
    }

    #[test]
    fn sufficient_bound_meets_oma_at_full_budget(
        db in -10.0f64..40.0, lg in 0u32..=5, beta in 0.0f64..=1.0, tail in 0.0f64..0.9,
    ) {
        // a user holding exactly the bound, with the stronger users holding the
        // rest, reaches its OMA rate
        let g = 1usize << lg;
        let gamma = LinearSinr::from_db(db).unwrap();
        let a = alpha_lower_bound(gamma, g, beta, tail).unwrap();
        if a + tail > 1.0 {
            return Ok(());
        }
        let y = gamma.value();
        let sinr = a * y / (1.0 + (1.0 - tail - a) * y + beta * tail * y);
        let oma = oma_rate(gamma, g);
        prop_assert!(((1.0 + sinr).log2() - oma).abs() <= 1e-9 * oma.max(1e-12) + 1e-12);
    }

    #[test]
    fn power_factor_is_decreasing_in_g(db in -60.0f64..60.0, g in 1usize..64) {
        let gamma = LinearSinr::from_db(db).unwrap();
        prop_assert!(power_factor(gamma, g + 1) < power_factor(gamma, g));
    }

    #[test]
    fn single_user_equals_oma(db in -20.0f64..60.0, beta in 0.0f64..=1.0) {
        let c = ClusterSpec::from_sinrs(&[10f64.powf(db / 10.0)], beta).unwrap();
        let a = allocate_powers(&c, AllocationRule::PerfectSic).unwrap();
        prop_assert_eq!(a.alphas(), &[1.0][..]);
        prop_assert_eq!(noma_rate(&c, &a, 1).unwrap(), oma_rate(c.sinr(1).unwrap(), 1));
        prop_assert!(!cluster_feasibility(&c).cluster_pass);
    }
}

#[test]
fn power_factor_low_sinr_limit() {
    let gamma = LinearSinr::new(1e-8).unwrap();
    for g in 1..=64 {
        assert!((power_factor(gamma, g) - 1.0 / g as f64).abs() <= 1e-6);
    }
}
