//! Frozen reference values computed independently at 30 significant digits,
//! plus a bisection oracle for the minimum power fractions.

use approx::assert_relative_eq;
use noma_cluster::noma::{
    alpha_lower_bound, alpha_lower_bound_strict, msd_threshold, pair_terms, zeta_bound,
};
use noma_cluster::{
    allocate_powers, evaluate_rates, layout_pool, noma_rate, noma_sinr, oma_rate, power_factor,
    AllocationRule, ClusterSpec, CseNormalization, LinearSinr, PowerAllocation, Scheduler,
    UserPool,
};

fn s(v: f64) -> LinearSinr {
    LinearSinr::new(v).unwrap()
}

fn worked() -> ClusterSpec {
    ClusterSpec::from_sinrs(&[20.0, 5.0], 0.0).unwrap()
}

#[test]
fn oma_rates() {
    assert_relative_eq!(oma_rate(s(20.0), 2), 2.19615871138938, max_relative = 1e-13);
    assert_relative_eq!(oma_rate(s(5.0), 2), 1.29248125036058, max_relative = 1e-13);
}

#[test]
fn power_factors() {
    assert_relative_eq!(
        power_factor(s(5.0), 2),
        0.118350341907227,
        max_relative = 1e-13
    );
    assert_relative_eq!(
        power_factor(s(20.0), 2),
        0.0390891054882004,
        max_relative = 1e-13
    );
}

#[test]
fn sufficient_bounds() {
    let weakest = alpha_lower_bound(s(5.0), 2, 0.0, 0.0).unwrap();
    assert_relative_eq!(weakest, 0.710102051443364, max_relative = 1e-13);
    assert_relative_eq!(
        alpha_lower_bound(s(20.0), 2, 0.0, 0.71016).unwrap(),
        0.265680832182200,
        max_relative = 1e-12
    );
    assert_relative_eq!(
        alpha_lower_bound(s(20.0), 2, 0.0, weakest).unwrap(),
        0.265726135327065,
        max_relative = 1e-12
    );
}

#[test]
fn strict_bound() {
    assert_relative_eq!(
        alpha_lower_bound_strict(s(20.0), 2, 1, 0.0).unwrap(),
        0.460702355666221,
        max_relative = 1e-12
    );
}

#[test]
fn pair_quantities() {
    let t = pair_terms(s(20.0), s(5.0), 2, 2).unwrap();
    assert_relative_eq!(t.d, 1.15599048556992, max_relative = 1e-12);
    assert_relative_eq!(t.e_prev, 0.781782109764008, max_relative = 1e-12);
    assert_eq!(t.e_curr, 0.0);
    let zeta = zeta_bound(s(20.0), s(5.0), 2, 2).unwrap().unwrap();
    assert_relative_eq!(zeta, 0.800468079760736, max_relative = 1e-12);
    assert!((zeta - 0.8006).abs() < 1e-3);
    let msd = msd_threshold(s(20.0), s(5.0), 2, 2).unwrap();
    assert_relative_eq!(msd, -1.00936159521472, max_relative = 1e-12);
    assert!((msd - -1.012).abs() < 5e-3);
}

#[test]
fn worked_allocation() {
    let alloc = allocate_powers(&worked(), AllocationRule::PerfectSic).unwrap();
    assert_relative_eq!(
        alloc.pre_sharing_sum(),
        0.975828186770429,
        max_relative = 1e-12
    );
    assert_relative_eq!(alloc.alphas()[0], 0.277812041941850, max_relative = 1e-12);
    assert_relative_eq!(alloc.alphas()[1], 0.722187958058150, max_relative = 1e-12);
    assert!((alloc.alphas()[0] - 0.27776).abs() < 1e-4);
    assert!((alloc.alphas()[1] - 0.72224).abs() < 1e-4);
}

#[test]
fn worked_rates() {
    let c = worked();
    let alloc = allocate_powers(&c, AllocationRule::PerfectSic).unwrap();
    assert_relative_eq!(
        noma_sinr(&c, &alloc, 1).unwrap().value(),
        5.55624083883700,
        max_relative = 1e-12
    );
    assert_relative_eq!(
        noma_sinr(&c, &alloc, 2).unwrap().value(),
        1.51144779675946,
        max_relative = 1e-12
    );
    let r1 = noma_rate(&c, &alloc, 1).unwrap();
    let r2 = noma_rate(&c, &alloc, 2).unwrap();
    assert_relative_eq!(r1, 2.71286885178544, max_relative = 1e-12);
    assert_relative_eq!(r2, 1.32851928729763, max_relative = 1e-12);
    assert!((r1 - 2.7127).abs() < 1e-3 && (r2 - 1.3286).abs() < 1e-3);

    let pool = UserPool::from_sinrs(&[20.0, 5.0]).unwrap();
    let out = Scheduler::new(0.0)
        .mup(&layout_pool(&pool, 2).unwrap())
        .unwrap();
    let summary = evaluate_rates(&out);
    assert_relative_eq!(
        summary.cell_spectral_efficiency(CseNormalization::PerUser),
        2.02069406954153,
        max_relative = 1e-12
    );
}

#[test]
fn rounded_alphas_reproduce_listed_sinrs() {
    let c = worked();
    let alloc = PowerAllocation::from_alphas(vec![0.27776, 0.72224]);
    assert!((noma_sinr(&c, &alloc, 1).unwrap().value() - 5.5552).abs() < 1e-9);
    assert!((noma_sinr(&c, &alloc, 2).unwrap().value() - 1.51172).abs() < 1e-4);
}

#[test]
fn equal_sinr_pair_exhausts_budget() {
    let c = ClusterSpec::from_sinrs(&[10.0, 10.0], 0.0).unwrap();
    match allocate_powers(&c, AllocationRule::PerfectSic) {
        Err(noma_cluster::NomaError::PowerBudgetExceeded { required }) => {
            assert!((required - 1.0).abs() < 1e-12)
        }
        other => assert!(
            other
                .as_ref()
                .is_ok_and(|a| (a.pre_sharing_sum() - 1.0).abs() < 1e-12),
            "{other:?}"
        ),
    }
    // MUP then serves the pair in OMA, so the cell sum equals OMA's.
    let pool = UserPool::from_sinrs(&[10.0, 10.0]).unwrap();
    let layout = layout_pool(&pool, 2).unwrap();
    let mup = evaluate_rates(&Scheduler::new(0.0).mup(&layout).unwrap());
    let oma = evaluate_rates(&Scheduler::new(0.0).oma(&layout).unwrap());
    assert_relative_eq!(
        mup.cell_spectral_efficiency(CseNormalization::PerUser),
        oma.cell_spectral_efficiency(CseNormalization::PerUser),
        max_relative = 1e-12
    );
}

/// Smallest fraction giving the user its OMA rate, found by bisection on the
/// rate inequality with the weaker users' fractions fixed and the stronger
/// users holding the rest of the budget.
fn bisect_minimum(gamma: f64, size: usize, beta: f64, tail: f64) -> f64 {
    let target = (1.0 + gamma).log2() / size as f64;
    let rate = |a: f64| {
        let stronger = 1.0 - tail - a;
        (1.0 + a * gamma / (1.0 + stronger * gamma + beta * tail * gamma)).log2()
    };
    let (mut lo, mut hi) = (0.0, 1.0 - tail);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if rate(mid) >= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

#[test]
fn bisection_matches_closed_form() {
    for &(gamma, size, beta, tail) in &[
        (5.0, 2, 0.0, 0.0),
        (20.0, 2, 0.0, 0.710102051443364),
        (100.0, 4, 0.05, 0.4),
        (3.0, 8, 0.3, 0.1),
        (1000.0, 16, 0.01, 0.9),
    ] {
        let closed = alpha_lower_bound(s(gamma), size, beta, tail).unwrap();
        let brute = bisect_minimum(gamma, size, beta, tail);
        assert_relative_eq!(closed, brute, max_relative = 1e-9);
    }
}
